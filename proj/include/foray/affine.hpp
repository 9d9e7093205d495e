#ifndef FORAY_AFFINE_HPP
#define FORAY_AFFINE_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <unordered_set>
#include <variant>
#include <vector>

#include "foray/trace.hpp"

namespace foray {

/// Current loop iterator values, innermost loop first.
using IteratorView = std::span<const std::int64_t>;

/// Distinct byte addresses touched by one reference. A nonzero cap stops
/// growth; `saturated()` then reports that size() is a lower bound.
class Footprint {
 public:
  explicit Footprint(std::size_t cap = 0) : cap_(cap) {}

  void insert(std::uint64_t address) {
    if (cap_ && addresses_.size() >= cap_) {
      saturated_ = saturated_ || !addresses_.count(address);
      return;
    }
    addresses_.insert(address);
  }

  std::size_t size() const noexcept { return addresses_.size(); }
  bool saturated() const noexcept { return saturated_; }
  const std::unordered_set<std::uint64_t>& addresses() const noexcept { return addresses_; }

 private:
  std::size_t cap_;
  bool saturated_ = false;
  std::unordered_set<std::uint64_t> addresses_;
};

/// Incremental inference state for one memory reference in one loop-tree
/// context. Addresses are modelled as
///
///   address = const_term + sum_i coeffs[i] * it[i]      (i = 0 innermost)
///
/// with arithmetic modulo 2^64. `partial_level` (M) counts the innermost
/// iterators whose coefficients are still trusted; mispredictions demote it.
struct ReferenceState {
  std::size_t nest_level = 0;     // N
  std::size_t partial_level = 0;  // M, 0 <= M <= N
  std::uint64_t const_term = 0;
  std::uint64_t first_const = 0;  // const_term right after the first access
  std::vector<std::optional<std::int64_t>> coeffs;  // nullopt = UNKNOWN
  std::vector<std::int64_t> prev_iters;             // ITP
  std::vector<std::uint8_t> stable;                 // S: 1 = unchanged in some misprediction
  std::uint64_t prev_address = 0;                   // INDP
  std::uint64_t exec_count = 0;
  std::uint64_t reads = 0;
  std::uint64_t writes = 0;
  std::uint64_t mispredictions = 0;
  bool non_analyzable = false;
  Footprint footprint{0};
};

/// First access of a reference: const_term = address, M = N, all
/// coefficients UNKNOWN.
ReferenceState init_reference(IteratorView iters, std::uint64_t address,
                              AccessKind kind = AccessKind::read,
                              std::size_t footprint_cap = 0);

/// Every later access. `iters` must have the length the state was created
/// with.
///
/// 1. Iterators that changed since the previous access and still have an
///    UNKNOWN coefficient form the set HS.
/// 2. |HS| == 1: solve that coefficient from the address delta, after
///    subtracting the contribution of the other changed iterators
///    (sum C_i * (IT_i - ITP_i)). An inexact quotient leaves it UNKNOWN.
/// 3. |HS| > 1: the reference becomes non-analyzable for good.
/// 4. Predict the address from the known coefficients. On a miss, flag every
///    unchanged iterator in S, re-anchor const_term on the observed address,
///    and set M to (outermost index with S == 0) - 1, or 0 if there is none.
void observe_access(ReferenceState& state, IteratorView iters, std::uint64_t address,
                    AccessKind kind = AccessKind::read);

/// Full (M == N) or partial (M < N) affine expression.
struct AffineExpression {
  std::uint64_t base = 0;        // const_term at end of trace
  std::uint64_t first_base = 0;  // const_term after the first access
  std::vector<std::int64_t> coeffs;  // M entries, innermost first; UNKNOWN -> 0
  std::size_t nest_level = 0;        // N
  bool partial = false;

  std::size_t partial_level() const noexcept { return coeffs.size(); }
  bool has_iterator() const noexcept {
    for (auto c : coeffs)
      if (c != 0) return true;
    return false;
  }

  friend bool operator==(const AffineExpression&, const AffineExpression&) = default;
};

struct NonAnalyzable {
  friend bool operator==(const NonAnalyzable&, const NonAnalyzable&) = default;
};

using InferenceResult = std::variant<AffineExpression, NonAnalyzable>;

InferenceResult finalize_expression(const ReferenceState& state);

/// Units of live analysis state held by one reference (slots plus footprint
/// entries). Used by the streaming-memory accounting.
std::size_t state_units(const ReferenceState& state);

}  // namespace foray

#endif  // FORAY_AFFINE_HPP
