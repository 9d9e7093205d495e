#ifndef FORAY_MODEL_HPP
#define FORAY_MODEL_HPP

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "foray/affine.hpp"
#include "foray/loop_tree.hpp"
#include "foray/trace.hpp"

namespace foray {

/// Thresholds for keeping a reference in the model. Both bounds are
/// inclusive.
struct FilterConfig {
  std::uint64_t n_exec = 20;
  std::uint64_t n_loc = 10;
  bool require_iterator = true;
  std::size_t footprint_cap = 0;  // 0 = exact, unbounded

  /// Throws std::invalid_argument if a threshold is zero.
  void validate() const;
};

enum class Category : std::uint8_t { included, purged, non_analyzable };

/// Why a reference left the model. Checked in declaration order; the first
/// failing test wins.
enum class PurgeReason : std::uint8_t {
  none,
  non_analyzable,
  no_iterator,
  too_few_executions,
  too_few_locations,
};

std::string_view to_string(Category c);
std::string_view to_string(PurgeReason r);

struct ReferenceResult {
  const LoopNode* node = nullptr;
  std::uint64_t instruction_address = 0;
  InferenceResult expression;
  std::uint64_t exec_count = 0;
  std::uint64_t footprint = 0;
  std::uint64_t reads = 0;
  std::uint64_t writes = 0;
  std::uint64_t mispredictions = 0;
  PurgeReason reason = PurgeReason::none;

  bool surviving() const noexcept { return reason == PurgeReason::none; }
  Category category() const noexcept;
  const AffineExpression* affine() const noexcept {
    return std::get_if<AffineExpression>(&expression);
  }
};

struct CategoryStats {
  std::uint64_t references = 0;
  std::uint64_t accesses = 0;
  std::uint64_t footprint = 0;  // distinct addresses (unions overlap across categories)

  friend bool operator==(const CategoryStats&, const CategoryStats&) = default;
};

struct ModelStats {
  CategoryStats total;
  CategoryStats included;
  CategoryStats purged;
  CategoryStats non_analyzable;
  std::uint64_t static_loops = 0;  // distinct loop ids entered
  std::uint64_t loop_nodes = 0;    // dynamic contexts
  std::uint64_t model_loops = 0;   // loop nodes that appear in the emitted model

  friend bool operator==(const ModelStats&, const ModelStats&) = default;
};

struct HintContext {
  std::vector<std::uint64_t> loop_path;  // outermost first
  std::vector<std::size_t> surviving;    // indices into ForayModel::references
};

/// A static loop (or a loop-free reference) reached through two or more
/// distinct loop contexts; duplicating the enclosing function would let
/// each context be optimized separately.
struct InliningHint {
  enum class Kind : std::uint8_t { loop, instruction };
  Kind kind = Kind::loop;
  std::uint64_t id = 0;  // loop id or instruction address
  std::vector<HintContext> contexts;
};

struct ForayModel {
  std::unique_ptr<LoopTree> tree = std::make_unique<LoopTree>();
  DeclarationTable declarations;
  FilterConfig config;
  std::vector<ReferenceResult> references;  // tree pre-order, first-access order
  std::vector<InliningHint> hints;
  ModelStats stats;
  std::vector<std::string> notes;
  std::uint64_t memory_events = 0;
  std::uint64_t checkpoint_events = 0;
  std::uint64_t peak_live_state = 0;

  /// Begin-checkpoint id of a loop; used for iterator names.
  std::uint64_t begin_id(std::uint64_t loop_id) const;
};

/// Filter decision for one finalized reference.
PurgeReason purge_reason(const InferenceResult& expr, std::uint64_t exec_count,
                         std::uint64_t footprint, const FilterConfig& cfg);

/// Sets `reason` on every reference.
void purge(std::span<ReferenceResult> refs, const FilterConfig& cfg);

std::vector<InliningHint> inlining_hints(const ForayModel& model);

/// Loop nodes that enclose a surviving reference in the emitted model:
/// every enclosing node for a full expression, the M innermost for a partial
/// one. Outermost first.
std::vector<const LoopNode*> emitted_nest(const ReferenceResult& ref);

/// Streaming driver: feed records in trace order, then finish().
class Analyzer {
 public:
  explicit Analyzer(FilterConfig cfg = {});

  /// `position` tags errors (line number, or record index).
  void feed(const TraceRecord& record, std::uint64_t position = 0);

  /// Closes open loops, finalizes and filters references, computes stats and
  /// hints. The analyzer is spent afterwards.
  ForayModel finish();

  /// Structural units currently held: loop nodes, reference slots,
  /// footprint entries, active stack.
  std::uint64_t live_state() const noexcept { return live_units_ + model_.tree->stack().size(); }
  std::uint64_t peak_live_state() const noexcept { return peak_; }

 private:
  ForayModel model_;
  bool seen_event_ = false;
  std::uint64_t live_units_ = 0;
  std::uint64_t peak_ = 0;
  std::vector<std::int64_t> iters_;
};

ForayModel analyze(TraceReader& reader, const FilterConfig& cfg = {});
ForayModel analyze(std::span<const TraceRecord> records, const FilterConfig& cfg = {});

}  // namespace foray

#endif  // FORAY_MODEL_HPP
