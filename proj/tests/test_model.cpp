#include <fstream>
#include <sstream>

#include "doctest.h"
#include "foray/error.hpp"
#include "foray/model.hpp"
#include "foray/synth.hpp"

using namespace foray;

namespace {

ForayModel analyze_file(const char* name, const FilterConfig& cfg) {
  std::ifstream f(std::string(FORAY_TEST_DATA) + "/" + name);
  REQUIRE(f);
  TraceReader reader(f);
  return analyze(reader, cfg);
}

ForayModel analyze_spec(const synth::WorkloadSpec& spec, const FilterConfig& cfg = {}) {
  const auto trace = synth::generate_trace(spec, 0);
  return analyze(trace, cfg);
}

const ReferenceResult& by_instr(const ForayModel& m, std::uint64_t instr) {
  for (const auto& r : m.references)
    if (r.instruction_address == instr) return r;
  FAIL("no reference " << instr);
  throw 0;
}

// One loop of `trip` iterations around an optional inner loop; the single
// reference has coefficients `coeffs` (innermost first).
synth::WorkloadSpec nest(const std::vector<std::uint64_t>& trips, const std::string& coeffs) {
  std::string items = R"({"ref": {"instr": "500", "base": 65536, "coeffs": )" + coeffs + "}}";
  std::uint64_t id = trips.size();
  for (auto it = trips.rbegin(); it != trips.rend(); ++it, --id) {
    const auto c = std::to_string(10 * id);
    items = R"({"loop": {"id": )" + std::to_string(id) + R"(, "begin": )" + c + "0" +
            R"(, "body": )" + c + "1" + R"(, "end": )" + c + "2" +
            R"(, "trip": )" + std::to_string(*it) + R"(, "items": [)" + items + "]}}";
  }
  return synth::parse_spec(R"({"format": "foray-workload", "version": 1, "main": [)" + items +
                           "]}");
}

}  // namespace

TEST_CASE("pointer-walk trace with lowered thresholds keeps the store") {
  const auto m = analyze_file("pointer_walk.ftrace", FilterConfig{1, 1, true, 0});
  REQUIRE(m.references.size() == 1);
  const auto& r = m.references[0];
  CHECK(r.surviving());
  CHECK(r.exec_count == 6);
  CHECK(r.footprint == 6);
  CHECK(r.writes == 6);
  const auto* e = r.affine();
  REQUIRE(e);
  CHECK(e->base == 2147440948u);
  CHECK(e->coeffs == std::vector<std::int64_t>{1, 103});
  CHECK(m.stats.included.references == 1);
  CHECK(m.stats.model_loops == 2);
  CHECK(m.memory_events == 6);
  CHECK(m.checkpoint_events == 19);
}

TEST_CASE("pointer-walk trace with default thresholds keeps nothing") {
  const auto m = analyze_file("pointer_walk.ftrace", FilterConfig{});
  REQUIRE(m.references.size() == 1);
  CHECK(m.references[0].reason == PurgeReason::too_few_executions);
  CHECK(m.stats.included.references == 0);
  CHECK(m.stats.purged.references == 1);
  CHECK(m.stats.model_loops == 0);
}

TEST_CASE("three-reference workload: only the hot affine reference survives") {
  const auto spec = synth::parse_spec(R"({
    "format": "foray-workload", "version": 1,
    "main": [
      {"loop": {"id": 1, "begin": 10, "body": 11, "end": 12, "trip": 100, "items": [
        {"ref": {"instr": "400000", "base": 1048576, "coeffs": [4]}},
        {"ref": {"instr": "400004", "base": 2097152, "coeffs": [0], "kind": "wr"}}]}},
      {"loop": {"id": 2, "begin": 20, "body": 21, "end": 22, "trip": 4, "items": [
        {"ref": {"instr": "400008", "base": 3145728, "coeffs": [8]}}]}}
    ]})");
  const auto m = analyze_spec(spec);
  const auto& hot = by_instr(m, 0x400000);
  const auto& scalar = by_instr(m, 0x400004);
  const auto& cold = by_instr(m, 0x400008);
  CHECK(hot.surviving());
  CHECK(hot.exec_count == 100);
  CHECK(hot.footprint == 100);
  CHECK(scalar.reason == PurgeReason::no_iterator);
  CHECK(scalar.exec_count == 100);
  CHECK(scalar.footprint == 1);
  CHECK(cold.reason == PurgeReason::too_few_executions);
  CHECK(cold.exec_count == 4);
  CHECK(m.stats.included.references == 1);
  CHECK(m.stats.purged.references == 2);
  CHECK(m.stats.total.accesses == 204);
  CHECK(m.stats.included.accesses + m.stats.purged.accesses + m.stats.non_analyzable.accesses ==
        204);
}

TEST_CASE("filter thresholds are inclusive") {
  CHECK(analyze_spec(nest({19}, "[1]")).references[0].reason == PurgeReason::too_few_executions);
  CHECK(analyze_spec(nest({20}, "[1]")).references[0].surviving());
  // 27 executions over 9 addresses, then 20 over 10
  CHECK(analyze_spec(nest({3, 9}, "[1, 0]")).references[0].reason ==
        PurgeReason::too_few_locations);
  const auto m = analyze_spec(nest({2, 10}, "[1, 0]"));
  CHECK(m.references[0].exec_count == 20);
  CHECK(m.references[0].footprint == 10);
  CHECK(m.references[0].surviving());
}

TEST_CASE("purge_reason checks in fixed order") {
  const FilterConfig cfg;
  const AffineExpression affine{0, 0, {4}, 1, false};
  const AffineExpression flat{0, 0, {0}, 1, false};
  const AffineExpression none{0, 0, {}, 0, false};
  CHECK(purge_reason(NonAnalyzable{}, 1, 1, cfg) == PurgeReason::non_analyzable);
  CHECK(purge_reason(flat, 1, 1, cfg) == PurgeReason::no_iterator);
  CHECK(purge_reason(none, 100, 100, cfg) == PurgeReason::no_iterator);
  CHECK(purge_reason(affine, 19, 5, cfg) == PurgeReason::too_few_executions);
  CHECK(purge_reason(affine, 20, 9, cfg) == PurgeReason::too_few_locations);
  CHECK(purge_reason(affine, 20, 10, cfg) == PurgeReason::none);
  FilterConfig loose = cfg;
  loose.require_iterator = false;
  CHECK(purge_reason(flat, 20, 10, loose) == PurgeReason::none);
}

TEST_CASE("filter config rejects zero thresholds") {
  CHECK_THROWS_AS(FilterConfig({0, 10, true, 0}).validate(), std::invalid_argument);
  CHECK_THROWS_AS(FilterConfig({20, 0, true, 0}).validate(), std::invalid_argument);
  CHECK_NOTHROW(FilterConfig{}.validate());
}

TEST_CASE("empty event section yields an empty model") {
  std::istringstream in("Loop: 1 begin=1 body=2 end=3\n");
  TraceReader reader(in);
  const auto m = analyze(reader);
  CHECK(m.references.empty());
  CHECK(m.hints.empty());
  CHECK(m.stats == ModelStats{});
}

TEST_CASE("structural errors carry their position") {
  std::istringstream in("Loop: 1 begin=1 body=2 end=3\nInstr: 1 addr: 2 rd\nCheckpoint: 2\n");
  TraceReader reader(in);
  CHECK_THROWS_WITH_AS(analyze(reader), "line 3: checkpoint 2 for loop 1 which is not active",
                       StructuralError);
}

TEST_CASE("access counts are conserved across categories") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    CAPTURE(seed);
    const auto spec = synth::random_spec(seed);
    const auto trace = synth::generate_trace(spec, seed);
    std::uint64_t events = 0;
    for (const auto& r : trace) events += std::holds_alternative<MemoryAccessEvent>(r);
    const auto m = analyze(trace);
    const auto& s = m.stats;
    CHECK(s.total.accesses == events);
    CHECK(s.included.accesses + s.purged.accesses + s.non_analyzable.accesses == events);
    CHECK(s.included.references + s.purged.references + s.non_analyzable.references ==
          s.total.references);
    CHECK(s.total.references == m.references.size());
    for (const auto& r : m.references)
      if (r.surviving()) {
        REQUIRE(r.affine());
        CHECK(r.affine()->has_iterator());
        CHECK(r.exec_count >= m.config.n_exec);
        CHECK(r.footprint >= m.config.n_loc);
      }
    // determinism
    const auto again = analyze(trace);
    CHECK(again.stats == m.stats);
  }
}

TEST_CASE("shared callee: one loop hint with two contexts") {
  const auto m = analyze_spec(synth::shared_callee_spec());
  REQUIRE(m.hints.size() == 1);
  const auto& h = m.hints[0];
  CHECK(h.kind == InliningHint::Kind::loop);
  CHECK(h.id == 3);
  REQUIRE(h.contexts.size() == 2);
  CHECK(h.contexts[0].loop_path == std::vector<std::uint64_t>{1, 3});
  CHECK(h.contexts[1].loop_path == std::vector<std::uint64_t>{2, 3});
  for (const auto& c : h.contexts) {
    REQUIRE(c.surviving.size() == 1);
    CHECK(m.references[c.surviving[0]].instruction_address == 0x400100);
  }
  const auto* x = m.references[h.contexts[0].surviving[0]].affine();
  const auto* y = m.references[h.contexts[1].surviving[0]].affine();
  REQUIRE(x);
  REQUIRE(y);
  CHECK(x->coeffs == std::vector<std::int64_t>{1, 10});
  CHECK(y->coeffs == std::vector<std::int64_t>{1, 2});
}

TEST_CASE("loop-free helper called from three loops: one instruction hint") {
  const auto spec = synth::parse_spec(R"({
    "format": "foray-workload", "version": 1,
    "functions": {"get": [{"ref": {"instr": "400200", "base": 4096, "coeffs": []}}]},
    "main": [
      {"loop": {"id": 1, "begin": 10, "body": 11, "end": 12, "trip": 30, "items": [
        {"call": {"function": "get", "offset_coeffs": [4]}}]}},
      {"loop": {"id": 2, "begin": 20, "body": 21, "end": 22, "trip": 30, "items": [
        {"call": {"function": "get", "offset_coeffs": [8]}}]}},
      {"loop": {"id": 3, "begin": 30, "body": 31, "end": 32, "trip": 30, "items": [
        {"call": {"function": "get", "offset_base": 64, "offset_coeffs": [-4]}}]}}
    ]})");
  const auto m = analyze_spec(spec);
  REQUIRE(m.hints.size() == 1);
  const auto& h = m.hints[0];
  CHECK(h.kind == InliningHint::Kind::instruction);
  CHECK(h.id == 0x400200);
  REQUIRE(h.contexts.size() == 3);
  for (const auto& c : h.contexts) CHECK(c.surviving.size() == 1);
}

TEST_CASE("single-context program has no hints") {
  CHECK(analyze_spec(synth::pointer_walk_spec(), FilterConfig{1, 1, true, 0}).hints.empty());
}

TEST_CASE("peak live state does not grow with trace length") {
  auto peak = [](std::uint64_t outer) {
    const auto spec = synth::parse_spec(R"({"format": "foray-workload", "version": 1, "main": [
      {"loop": {"id": 1, "begin": 10, "body": 11, "end": 12, "trip": )" +
                                        std::to_string(outer) + R"(, "items": [
        {"loop": {"id": 2, "begin": 20, "body": 21, "end": 22, "trip": 50, "items": [
          {"ref": {"instr": "400000", "base": 8192, "coeffs": [8, 0]}},
          {"ref": {"instr": "400004", "base": 65536, "coeffs": [4, 0], "kind": "wr"}}]}}]}}]})");
    Analyzer an;
    synth::run(spec, 0, synth::EventSink{[&](const TraceRecord& r) { an.feed(r); }, {}});
    return an.peak_live_state();
  };
  const auto small = peak(10);
  CHECK(small > 0);
  CHECK(peak(1000) == small);
}
