#include <Eigen/Dense>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "foray/emitter.hpp"
#include "foray/error.hpp"
#include "foray/synth.hpp"

using namespace foray;

namespace {

std::string file_text(const char* name) {
  std::ifstream f(std::string(FORAY_TEST_DATA) + "/" + name);
  REQUIRE(f);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string encode(const std::vector<TraceRecord>& t) {
  std::string out;
  for (const auto& r : t) out += encode_record(r) + "\n";
  return out;
}

std::vector<std::string> spec_issues(const std::string& json) {
  try {
    synth::parse_spec(json);
  } catch (const SpecError& e) {
    return e.issues();
  }
  return {};
}

const char* kHead = R"("format": "foray-workload", "version": 1)";

}  // namespace

TEST_CASE("pointer-walk spec generates the reference trace") {
  const auto trace = synth::generate_trace(synth::pointer_walk_spec(), 0);
  // 2 declarations + 1 outer begin + 2 x (body-begin + inner begin + 3 x 3 + body-end)
  CHECK(trace.size() == 2 + 1 + 2 * (1 + 1 + 3 * 3 + 1));
  CHECK(trace.size() == 27);
  CHECK(encode(trace) == file_text("pointer_walk.ftrace"));

  const auto from_file = synth::parse_spec(file_text("pointer_walk.spec.json"));
  CHECK(synth::spec_to_json(from_file) == synth::spec_to_json(synth::pointer_walk_spec()));

  const auto m = analyze(trace, FilterConfig{1, 1, true, 0});
  CHECK(emit_c(m) ==
        "for (int i12=0; i12<2; i12++)\n"
        " for (int i15=0; i15<3; i15++)\n"
        "  A4002a0[2147440948+1*i15+103*i12]\n");
}

TEST_CASE("shared callee spec file matches the built-in workload") {
  CHECK(synth::spec_to_json(synth::parse_spec(file_text("shared_callee.spec.json"))) ==
        synth::spec_to_json(synth::shared_callee_spec()));
}

TEST_CASE("zero-trip loop emits a begin and nothing else") {
  const auto spec = synth::parse_spec(std::string("{") + kHead + R"(, "main": [
    {"loop": {"id": 1, "begin": 10, "body": 11, "end": 12, "trip": 0, "items": [
      {"ref": {"instr": "1", "base": 0, "coeffs": [1]}}]}}]})");
  const auto trace = synth::generate_trace(spec, 0);
  REQUIRE(trace.size() == 2);
  CHECK(std::get<CheckpointEvent>(trace[1]).checkpoint_id == 10);
}

TEST_CASE("per-entry trip lists cycle over entries") {
  const auto spec = synth::parse_spec(file_text("varying_trips.spec.json"));
  std::vector<std::uint64_t> trips;
  std::uint64_t body = 0;
  bool in_inner = false;
  for (const auto& r : synth::generate_trace(spec, 0)) {
    const auto* c = std::get_if<CheckpointEvent>(&r);
    if (!c) continue;
    if (c->checkpoint_id == 20) {
      if (in_inner) trips.push_back(body);
      in_inner = true;
      body = 0;
    }
    if (c->checkpoint_id == 21) ++body;
  }
  trips.push_back(body);
  CHECK(trips == std::vector<std::uint64_t>{3, 7, 5, 3, 7, 5});

  const auto rep = synth::check(spec, 0, FilterConfig{1, 1, true, 0});
  CHECK(rep.ok());
}

TEST_CASE("generation is deterministic; seeds only move perturbed addresses") {
  const auto spec = synth::perturbed_nest_spec(3, 2, 5, 42);
  const auto a = synth::generate_trace(spec, 1);
  CHECK(a == synth::generate_trace(spec, 1));
  const auto b = synth::generate_trace(spec, 2);
  REQUIRE(a.size() == b.size());
  std::size_t differing = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == b[i]) continue;
    ++differing;
    const auto* x = std::get_if<MemoryAccessEvent>(&a[i]);
    const auto* y = std::get_if<MemoryAccessEvent>(&b[i]);
    REQUIRE(x);
    REQUIRE(y);
    CHECK(x->instruction_address == y->instruction_address);
  }
  CHECK(differing > 0);
  // the unperturbed workload ignores the seed
  CHECK(synth::generate_trace(synth::pointer_walk_spec(), 1) ==
        synth::generate_trace(synth::pointer_walk_spec(), 99));
}

TEST_CASE("validation lists every violation with its path") {
  auto issues = spec_issues(file_text("dup-checkpoint.spec.json"));
  REQUIRE(issues.size() == 1);
  CHECK(issues[0] == "main[0].loop.items[0].loop.begin: checkpoint id 12 used twice");

  issues = spec_issues(std::string("{") + kHead + R"(, "main": [
    {"loop": {"id": 1, "begin": 1, "body": 2, "end": 3, "trip": 2, "items": [
      {"ref": {"instr": "1", "base": 0, "coeffs": [1, 2]}},
      {"call": {"function": "nowhere"}}]}},
    {"loop": {"id": 1, "begin": 4, "body": 5, "end": 6, "trip": 2, "items": []}}]})");
  CHECK(issues.size() == 3);
  CHECK(std::find(issues.begin(), issues.end(),
                  "main[0].loop.items[0].ref.coeffs: expected 1 coefficients, got 2") !=
        issues.end());

  CHECK_FALSE(spec_issues(R"({"format": "other", "version": 1, "main": []})").empty());
  CHECK_FALSE(spec_issues(R"({"format": "foray-workload", "version": 9, "main": []})").empty());
  CHECK_FALSE(spec_issues("[1, 2").empty());
  CHECK_FALSE(spec_issues(std::string("{") + kHead + R"(, "main": [{"bogus": {}}]})").empty());

  // recursion
  issues = spec_issues(std::string("{") + kHead + R"(, "functions": {
      "f": [{"call": {"function": "g"}}], "g": [{"call": {"function": "f"}}]},
    "main": [{"call": {"function": "f"}}]})");
  CHECK_FALSE(issues.empty());
}

TEST_CASE("spec json round trip") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto spec = synth::random_spec(seed);
    CHECK(synth::validate(spec).empty());
    const auto text = synth::spec_to_json(spec);
    CHECK(synth::spec_to_json(synth::parse_spec(text)) == text);
  }
}

TEST_CASE("random specs respect their bounds") {
  std::size_t max_seen = 0;
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    const auto spec = synth::random_spec(seed);
    synth::run(spec, seed,
               synth::EventSink{{}, [&](const synth::AccessSite& s) {
                                  max_seen = std::max(max_seen, s.iters.size());
                                }});
  }
  CHECK(max_seen <= 4);
  CHECK(max_seen >= 3);
}

TEST_CASE("oracle: unperturbed, perturbed and noise references") {
  const FilterConfig loose{1, 1, true, 0};
  auto exp = synth::expected_results(synth::pointer_walk_spec(), 0, loose);
  REQUIRE(exp.size() == 1);
  CHECK(exp[0].partial_level == 2u);
  CHECK(exp[0].base == 2147440948u);
  CHECK(exp[0].coeffs == std::vector<std::int64_t>{1, 103});
  CHECK(exp[0].exec_count == 6);
  CHECK(exp[0].reason == PurgeReason::none);

  const auto perturbed = synth::perturbed_nest_spec(4, 3, 4, 5);
  exp = synth::expected_results(perturbed, 0);
  REQUIRE(exp.size() == 1);
  CHECK(exp[0].partial_level == 2u);
  CHECK(exp[0].coeffs.size() == 2);

  exp = synth::expected_results(synth::parse_spec(file_text("noise.spec.json")), 0);
  REQUIRE(exp.size() == 2);
  CHECK(exp[0].reason == PurgeReason::none);
  CHECK(exp[1].noise);
  CHECK(synth::check(synth::parse_spec(file_text("noise.spec.json")), 0).ok());
}

TEST_CASE("fit_affine agrees with a least-squares solve") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng() % 3;
    std::vector<std::int64_t> c(n);
    for (auto& x : c) x = static_cast<std::int64_t>(rng() % 201) - 100;
    const std::int64_t k = static_cast<std::int64_t>(rng() % 100000);
    std::vector<std::int64_t> iters;
    std::vector<std::uint64_t> addrs;
    std::vector<std::int64_t> it(n, 0);
    for (int rep = 0; rep < 60; ++rep) {
      std::int64_t a = k;
      for (std::size_t i = 0; i < n; ++i) {
        it[i] = static_cast<std::int64_t>(rng() % 7);
        a += c[i] * it[i];
      }
      iters.insert(iters.end(), it.begin(), it.end());
      addrs.push_back(static_cast<std::uint64_t>(a));
    }
    Eigen::MatrixXd A(addrs.size(), n + 1);
    Eigen::VectorXd b(addrs.size());
    for (std::size_t r = 0; r < addrs.size(); ++r) {
      A(r, 0) = 1;
      for (std::size_t i = 0; i < n; ++i) A(r, i + 1) = static_cast<double>(iters[r * n + i]);
      b(r) = static_cast<double>(addrs[r]);
    }
    const Eigen::VectorXd x = A.colPivHouseholderQr().solve(b);
    const auto fit = synth::fit_affine(iters, addrs, n);
    REQUIRE(fit);
    CHECK(fit->partial_level == n);
    for (std::size_t i = 0; i < n; ++i) CHECK(fit->coeffs[i] == std::llround(x(i + 1)));
    CHECK(fit->base == static_cast<std::uint64_t>(k));
  }

  // an address that breaks the pattern drops M
  const std::vector<std::int64_t> it2{0, 0, 1, 0, 0, 1, 1, 1, 0, 2, 1, 2};
  const std::vector<std::uint64_t> a2{100, 104, 500, 504, 1000, 1004};
  const auto f = synth::fit_affine(it2, a2, 2);
  REQUIRE(f);
  CHECK(f->partial_level == 1);
  CHECK(f->coeffs == std::vector<std::int64_t>{4});
  CHECK(f->base == 100);
}

TEST_CASE("round trip over random specs") {
  std::size_t refs = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto rep = synth::check(synth::random_spec(seed), seed);
    refs += rep.references;
    if (!rep.ok()) {
      CAPTURE(seed);
      CHECK(rep.mismatches.empty());
    }
  }
  CHECK(refs > 1000);
}

TEST_CASE("perturbation deeper than the nest is rejected at run time") {
  const auto spec = synth::parse_spec(std::string("{") + kHead + R"(, "main": [
    {"loop": {"id": 1, "begin": 1, "body": 2, "end": 3, "trip": 2, "items": [
      {"ref": {"instr": "1", "base": 0, "coeffs": [1], "perturb": {"level": 2}}}]}}]})");
  CHECK_THROWS_AS(synth::generate_trace(spec, 0), SpecError);
}
