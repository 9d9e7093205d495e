#ifndef FORAY_SYNTH_HPP
#define FORAY_SYNTH_HPP

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "foray/model.hpp"
#include "foray/trace.hpp"

namespace foray::synth {

/// Base-address offset that changes every time the loop at `level`
/// (1 = innermost enclosing loop of the access) starts a new iteration.
/// Offsets come from `offsets` (cycled) or, when that is empty, from a
/// seeded hash drawn uniformly from [lo, hi].
struct Perturbation {
  std::size_t level = 1;
  std::vector<std::int64_t> offsets;
  std::int64_t lo = 0;
  std::int64_t hi = (std::int64_t{1} << 24) - 1;
};

/// Irregular reference: every execution touches a seeded pseudo-random
/// address in [lo, hi).
struct Noise {
  std::uint64_t lo = 0;
  std::uint64_t hi = 0;
};

struct RefSpec {
  std::uint64_t instr = 0;
  std::uint64_t base = 0;
  std::vector<std::int64_t> coeffs;  // innermost first; length == loops enclosing it locally
  AccessKind kind = AccessKind::read;
  std::optional<Perturbation> perturb;
  std::optional<Noise> noise;
};

/// Invokes a function body. `offset_coeffs` (innermost first, one per local
/// loop enclosing the call) and `offset_base` shift every address the
/// callee produces, the way a pointer argument would.
struct CallSpec {
  std::string function;
  std::int64_t offset_base = 0;
  std::vector<std::int64_t> offset_coeffs;
};

struct Item;

struct LoopSpec {
  std::uint64_t id = 0;
  std::uint64_t begin = 0;
  std::uint64_t body = 0;
  std::uint64_t end = 0;
  std::vector<std::uint64_t> trips;  // entry k runs trips[k % size] iterations
  std::vector<Item> items;
};

struct Item {
  std::variant<LoopSpec, RefSpec, CallSpec> node;
};

struct WorkloadSpec {
  std::vector<Item> main;
  std::map<std::string, std::vector<Item>> functions;
};

inline constexpr std::string_view kSpecFormat = "foray-workload";
inline constexpr int kSpecVersion = 1;

/// Parses and validates the JSON spec format (docs/workload-spec.md).
/// Throws SpecError listing every violation with its field path.
WorkloadSpec parse_spec(std::string_view json_text);
std::string spec_to_json(const WorkloadSpec& spec);

/// Static checks; returns the list of violations (empty if valid).
std::vector<std::string> validate(const WorkloadSpec& spec);

/// One executed access as seen by the interpreter.
struct AccessSite {
  std::uint64_t instr = 0;
  std::uint64_t address = 0;
  AccessKind kind = AccessKind::read;
  bool noise = false;
  std::span<const std::uint64_t> path;   // loop ids, outermost first
  std::span<const std::int64_t> iters;   // innermost first
};

struct EventSink {
  std::function<void(const TraceRecord&)> record;  // declarations, checkpoints, accesses
  std::function<void(const AccessSite&)> access;   // ground-truth view of each access
};

/// Runs the spec. Declarations (ascending loop id) come first, then
/// begin / {body-begin ... body-end}* per loop entry. Deterministic in
/// (spec, seed). Throws SpecError if the spec is invalid.
void run(const WorkloadSpec& spec, std::uint64_t seed, const EventSink& sink);

std::vector<TraceRecord> generate_trace(const WorkloadSpec& spec, std::uint64_t seed);

/// Brute-force ground truth for one (loop path, instruction) pair.
struct ExpectedReference {
  std::vector<std::uint64_t> path;
  std::uint64_t instr = 0;
  std::size_t nest_level = 0;
  bool noise = false;
  /// Largest M for which all accesses obey
  ///   address = k(outer iterators M+1..N) + sum_{i<=M} c_i * it_i
  /// with shared integer c. Empty when not even M = 0 fits.
  std::optional<std::size_t> partial_level;
  std::uint64_t base = 0;             // k of the slice holding the first access
  std::vector<std::int64_t> coeffs;   // c_1..c_M; iterators that never vary -> 0
  std::uint64_t exec_count = 0;
  std::uint64_t footprint = 0;
  /// Filter outcome for a fitted reference. Noise or unfitted references
  /// only need to end up outside the model.
  std::optional<PurgeReason> reason;
};

std::vector<ExpectedReference> expected_results(const WorkloadSpec& spec, std::uint64_t seed,
                                                const FilterConfig& cfg = {});

/// Exact integer fit used by expected_results. `iters` holds `nest`
/// iterator values (innermost first) per access, back to back.
struct FitResult {
  std::size_t partial_level = 0;
  std::uint64_t base = 0;
  std::vector<std::int64_t> coeffs;
};
std::optional<FitResult> fit_affine(std::span<const std::int64_t> iters,
                                    std::span<const std::uint64_t> addresses, std::size_t nest);

/// Streaming result vs oracle. One line per disagreement.
struct CheckReport {
  std::size_t references = 0;
  std::vector<std::string> mismatches;
  bool ok() const noexcept { return mismatches.empty(); }
};

CheckReport compare(const ForayModel& model, std::span<const ExpectedReference> expected);

/// synth -> analyze -> compare, without materializing the trace.
CheckReport check(const WorkloadSpec& spec, std::uint64_t seed, const FilterConfig& cfg = {});

struct RandomOptions {
  std::size_t max_depth = 4;
  std::uint64_t min_trip = 2;
  std::uint64_t max_trip = 20;
  std::int64_t max_coeff = 256;
  std::uint64_t max_base = std::uint64_t{1} << 40;
  std::uint64_t access_budget = 60000;  // cap on innermost iterations per loop path
  bool perturbations = true;
  bool noise = true;
  bool calls = true;
};

/// Seeded random workload within `opts`.
WorkloadSpec random_spec(std::uint64_t seed, const RandomOptions& opts = {});

/// Fixed workloads used by tests and the sample specs.
/// while (2 trips) { ptr += 100; for (3 trips) *ptr++ = ...; } over a char
/// buffer whose first store lands at 0x7fff5934. Loops 1 (checkpoints
/// 12/13/17) and 2 (15/16/14); store instruction 0x4002a0.
WorkloadSpec pointer_walk_spec();
/// main: loop x (trip 10) calls foo(10*x); loop y (trip 20) calls foo(2*y);
/// foo: for i < 10 reads A[i + offset].
WorkloadSpec shared_callee_spec();
/// Depth-`depth` nest with trips `trip`, one reference whose base shifts by a
/// pseudo-random offset every iteration of loop `level` (1 = innermost).
WorkloadSpec perturbed_nest_spec(std::size_t depth, std::size_t level, std::uint64_t trip,
                                 std::uint64_t spec_seed);

}  // namespace foray::synth

#endif  // FORAY_SYNTH_HPP
