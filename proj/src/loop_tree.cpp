#include "foray/loop_tree.hpp"

#include <algorithm>

#include "foray/error.hpp"

namespace foray {

LoopNode* LoopNode::child(std::uint64_t loop_id) const {
  auto it = child_index_.find(loop_id);
  return it == child_index_.end() ? nullptr : it->second;
}

std::vector<std::uint64_t> LoopNode::path() const {
  std::vector<std::uint64_t> out(depth_);
  const LoopNode* n = this;
  for (std::size_t i = depth_; i-- > 0; n = n->parent_) out[i] = n->loop_id();
  return out;
}

LoopNode& LoopNode::ensure_child(std::uint64_t loop_id) {
  if (LoopNode* existing = child(loop_id)) return *existing;
  children_.push_back(std::make_unique<LoopNode>(loop_id, this));
  child_index_[loop_id] = children_.back().get();
  return *children_.back();
}

ReferenceState& LoopNode::ensure_reference(std::uint64_t instr) {
  auto [it, inserted] = reference_index_.try_emplace(instr, references_.size());
  if (inserted) references_.push_back({instr, ReferenceState{}});
  return references_[it->second].state;
}

void LoopNode::enter() {
  iter_ = -1;
  between_ = false;
  ++entry_count_;
}

void LoopNode::close() {
  const auto trips = static_cast<std::uint64_t>(iter_ + 1);
  trip_min_ = std::min(trip_min_, trips);
  trip_max_ = std::max(trip_max_, trips);
  ++closed_entries_;
  iter_ = -1;
  between_ = false;
}

bool LoopTree::on_stack(std::uint64_t loop_id) const {
  return std::any_of(stack_.begin() + 1, stack_.end(),
                     [&](const LoopNode* n) { return n->loop_id() == loop_id; });
}

void LoopTree::pop() {
  stack_.back()->close();
  stack_.pop_back();
}

void LoopTree::apply_checkpoint(const CheckpointEvent& ev, const DeclarationTable& decls,
                                std::uint64_t position) {
  const CheckpointBinding* b = decls.lookup(ev.checkpoint_id);
  if (!b) throw TraceError(position, "undeclared checkpoint " + std::to_string(ev.checkpoint_id));
  const std::uint64_t loop = b->loop_id;

  if (b->role == CheckpointRole::begin) {
    // Neither a loop whose body never started nor one that just finished an
    // iteration can contain another loop's begin.
    while (stack_.size() > 1 && (stack_.back()->iter() < 0 || stack_.back()->between_)) pop();
    if (on_stack(loop)) {
      while (stack_.back()->loop_id() != loop) pop();
      pop();
    }
    LoopNode& node = stack_.back()->ensure_child(loop);
    if (node.entry_count() == 0) ++node_count_;
    node.enter();
    stack_.push_back(&node);
    return;
  }

  if (!on_stack(loop))
    throw StructuralError(position, "checkpoint " + std::to_string(ev.checkpoint_id) +
                                        " for loop " + std::to_string(loop) +
                                        " which is not active");
  while (stack_.back()->loop_id() != loop) pop();
  LoopNode& top = *stack_.back();
  if (b->role == CheckpointRole::body_begin) ++top.iter_;
  top.between_ = b->role == CheckpointRole::body_end;
}

std::vector<std::int64_t> LoopTree::iterator_vector() const {
  std::vector<std::int64_t> out;
  iterator_vector(out);
  return out;
}

void LoopTree::iterator_vector(std::vector<std::int64_t>& out) const {
  out.clear();
  for (std::size_t i = current_index() + 1; i-- > 1;) out.push_back(stack_[i]->iter());
}

ReferenceState& LoopTree::locate_reference(std::uint64_t instr) {
  LoopNode& top = *stack_[current_index()];
  const std::size_t before = top.references().size();
  ReferenceState& s = top.ensure_reference(instr);
  if (top.references().size() != before) ++reference_count_;
  return s;
}

void LoopTree::close_all() {
  while (stack_.size() > 1) pop();
}

}  // namespace foray
