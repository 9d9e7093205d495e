#ifndef FORAY_LOOP_TREE_HPP
#define FORAY_LOOP_TREE_HPP

#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <unordered_map>
#include <vector>

#include "foray/affine.hpp"
#include "foray/trace.hpp"

namespace foray {

struct ReferenceEntry {
  std::uint64_t instruction_address = 0;
  ReferenceState state;  // exec_count == 0 until the first access initializes it
};

/// One dynamic context of a static loop: the same static loop reached
/// through different parent nodes gets different LoopNodes.
class LoopNode {
 public:
  LoopNode() = default;  // root
  LoopNode(std::uint64_t loop_id, LoopNode* parent)
      : loop_id_(loop_id), parent_(parent), depth_(parent->depth_ + 1) {}

  LoopNode(const LoopNode&) = delete;
  LoopNode& operator=(const LoopNode&) = delete;

  bool is_root() const noexcept { return !loop_id_; }
  std::uint64_t loop_id() const { return *loop_id_; }
  const LoopNode* parent() const noexcept { return parent_; }
  std::size_t depth() const noexcept { return depth_; }

  /// Current 0-based iteration; -1 between the begin checkpoint and the
  /// first body-begin.
  std::int64_t iter() const noexcept { return iter_; }
  /// True between a body-end and the next body-begin of this loop.
  bool between_iterations() const noexcept { return between_; }
  std::uint64_t entry_count() const noexcept { return entry_count_; }
  std::uint64_t closed_entries() const noexcept { return closed_entries_; }
  std::uint64_t trip_min() const noexcept { return closed_entries_ ? trip_min_ : 0; }
  std::uint64_t trip_max() const noexcept { return trip_max_; }

  /// Children in order of first entry.
  const std::vector<std::unique_ptr<LoopNode>>& children() const noexcept { return children_; }
  LoopNode* child(std::uint64_t loop_id) const;

  /// References in order of first access.
  const std::vector<ReferenceEntry>& references() const noexcept { return references_; }

  /// Loop ids from the outermost loop down to this node (empty for root).
  std::vector<std::uint64_t> path() const;

 private:
  friend class LoopTree;

  LoopNode& ensure_child(std::uint64_t loop_id);
  ReferenceState& ensure_reference(std::uint64_t instr);
  void enter();
  void close();

  std::optional<std::uint64_t> loop_id_;
  LoopNode* parent_ = nullptr;
  std::size_t depth_ = 0;
  std::int64_t iter_ = -1;
  bool between_ = false;
  std::uint64_t entry_count_ = 0;
  std::uint64_t closed_entries_ = 0;
  std::uint64_t trip_min_ = std::numeric_limits<std::uint64_t>::max();
  std::uint64_t trip_max_ = 0;
  std::vector<std::unique_ptr<LoopNode>> children_;
  std::unordered_map<std::uint64_t, LoopNode*> child_index_;
  std::vector<ReferenceEntry> references_;
  std::unordered_map<std::uint64_t, std::size_t> reference_index_;
};

/// Dynamic loop/reference tree plus the cursor (stack of active nodes) that
/// tracks where the trace currently is.
class LoopTree {
 public:
  LoopTree() { stack_.push_back(&root_); }

  LoopTree(const LoopTree&) = delete;
  LoopTree& operator=(const LoopTree&) = delete;

  /// Moves the cursor for one checkpoint:
  ///  - begin(L): closes loops whose body never started, closes L and
  ///    everything inside it if L is still active, then enters the child
  ///    node for L under the new top (iteration -1).
  ///  - body-begin(L): closes everything above L, then advances L's
  ///    iteration.
  ///  - body-end(L): closes everything above L. Until L's next body-begin,
  ///    L counts as finished for accesses (they belong to the enclosing
  ///    loop) and for a following begin (a sibling, not a child).
  /// Throws StructuralError for a body checkpoint of an inactive loop and
  /// TraceError for an undeclared checkpoint.
  void apply_checkpoint(const CheckpointEvent& ev, const DeclarationTable& decls,
                        std::uint64_t position = 0);

  /// IT_1..IT_N of the loops enclosing an access right now, innermost
  /// first.
  std::vector<std::int64_t> iterator_vector() const;
  void iterator_vector(std::vector<std::int64_t>& out) const;

  /// Reference state for `instr` in the node enclosing an access, created empty
  /// (exec_count == 0) on first encounter.
  ReferenceState& locate_reference(std::uint64_t instr);

  /// Closes every active loop (end of trace).
  void close_all();

  const LoopNode& root() const noexcept { return root_; }
  const LoopNode& top() const noexcept { return *stack_.back(); }
  /// Innermost node whose body is executing (skips a top that is between
  /// iterations).
  const LoopNode& current() const noexcept { return *stack_[current_index()]; }
  /// Active nodes from root to top.
  const std::vector<LoopNode*>& stack() const noexcept { return stack_; }

  std::size_t node_count() const noexcept { return node_count_; }
  std::size_t reference_count() const noexcept { return reference_count_; }

 private:
  bool on_stack(std::uint64_t loop_id) const;
  std::size_t current_index() const noexcept {
    return stack_.size() > 1 && stack_.back()->between_ ? stack_.size() - 2 : stack_.size() - 1;
  }
  void pop();

  LoopNode root_;
  std::vector<LoopNode*> stack_;
  std::size_t node_count_ = 0;
  std::size_t reference_count_ = 0;
};

}  // namespace foray

#endif  // FORAY_LOOP_TREE_HPP
