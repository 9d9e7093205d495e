#include "foray/affine.hpp"

#include <cassert>

namespace foray {

namespace {

// Signed view of a modulo-2^64 quantity.
std::int64_t as_signed(std::uint64_t v) { return static_cast<std::int64_t>(v); }
std::uint64_t as_unsigned(std::int64_t v) { return static_cast<std::uint64_t>(v); }

void bookkeeping(ReferenceState& s, IteratorView iters, std::uint64_t address,
                 AccessKind kind) {
  s.prev_iters.assign(iters.begin(), iters.end());
  s.prev_address = address;
  ++s.exec_count;
  (kind == AccessKind::write ? s.writes : s.reads) += 1;
  s.footprint.insert(address);
}

}  // namespace

ReferenceState init_reference(IteratorView iters, std::uint64_t address, AccessKind kind,
                              std::size_t footprint_cap) {
  ReferenceState s;
  s.nest_level = iters.size();
  s.partial_level = iters.size();
  s.const_term = address;
  s.first_const = address;
  s.coeffs.assign(iters.size(), std::nullopt);
  s.stable.assign(iters.size(), 0);
  s.footprint = Footprint(footprint_cap);
  bookkeeping(s, iters, address, kind);
  return s;
}

void observe_access(ReferenceState& s, IteratorView iters, std::uint64_t address,
                    AccessKind kind) {
  assert(iters.size() == s.nest_level);
  const std::size_t n = s.nest_level;

  if (s.non_analyzable) {
    bookkeeping(s, iters, address, kind);
    return;
  }

  std::size_t unknown_changed = 0;
  std::size_t k = 0;
  for (std::size_t i = n; i-- > 0;) {
    if (iters[i] != s.prev_iters[i] && !s.coeffs[i]) {
      ++unknown_changed;
      k = i;  // ends on the innermost member
    }
  }

  if (unknown_changed > 1) {
    s.non_analyzable = true;
    bookkeeping(s, iters, address, kind);
    return;
  }

  if (unknown_changed == 1) {
    std::uint64_t adj = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (iters[i] != s.prev_iters[i] && s.coeffs[i])
        adj += as_unsigned(*s.coeffs[i]) * as_unsigned(iters[i] - s.prev_iters[i]);
    }
    const std::int64_t num = as_signed(address - adj - s.prev_address);
    const std::int64_t den = iters[k] - s.prev_iters[k];
    if (den == -1)
      s.coeffs[k] = as_signed(0 - as_unsigned(num));
    else if (num % den == 0)
      s.coeffs[k] = num / den;
  }

  std::uint64_t predicted = s.const_term;
  for (std::size_t i = 0; i < n; ++i)
    if (s.coeffs[i]) predicted += as_unsigned(*s.coeffs[i]) * as_unsigned(iters[i]);

  if (predicted != address) {
    ++s.mispredictions;
    for (std::size_t i = 0; i < n; ++i)
      if (iters[i] == s.prev_iters[i]) s.stable[i] = 1;
    s.const_term += address - predicted;
    std::size_t m = 0;
    for (std::size_t i = n; i-- > 0;) {
      if (!s.stable[i]) {
        m = i;  // 0-based index of the outermost changing iterator == M
        break;
      }
    }
    s.partial_level = m;
  }

  bookkeeping(s, iters, address, kind);
}

InferenceResult finalize_expression(const ReferenceState& s) {
  if (s.non_analyzable) return NonAnalyzable{};
  AffineExpression e;
  e.base = s.const_term;
  e.first_base = s.first_const;
  e.nest_level = s.nest_level;
  e.partial = s.partial_level < s.nest_level;
  e.coeffs.reserve(s.partial_level);
  for (std::size_t i = 0; i < s.partial_level; ++i) e.coeffs.push_back(s.coeffs[i].value_or(0));
  return e;
}

std::size_t state_units(const ReferenceState& s) {
  return 1 + 3 * s.nest_level + s.footprint.size();
}

}  // namespace foray
