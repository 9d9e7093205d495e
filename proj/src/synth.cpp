#include "foray/synth.hpp"

#include <algorithm>
#include <charconv>
#include <random>
#include <set>
#include <unordered_set>

#include "foray/error.hpp"
#include "json.hpp"

namespace foray::synth {

using json = nlohmann::ordered_json;

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t mix(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return splitmix(splitmix(splitmix(seed) ^ a) ^ b);
}

std::string hex(std::uint64_t v) {
  char buf[17];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, 16);
  return std::string(buf, ptr);
}

std::string path_string(std::span<const std::uint64_t> path) {
  std::string s = "[";
  for (std::size_t i = 0; i < path.size(); ++i) s += (i ? "," : "") + std::to_string(path[i]);
  return s + "]";
}

// ---------------------------------------------------------------------------
// JSON reading. Structural problems are collected, not thrown, so one run
// reports every bad field.

class Reader {
 public:
  std::vector<std::string> issues;

  void issue(const std::string& path, const std::string& what) {
    issues.push_back(path + ": " + what);
  }

  std::optional<std::uint64_t> u64(const json& obj, const char* key, const std::string& path,
                                   bool required) {
    if (!obj.contains(key)) {
      if (required) issue(path + "." + key, "missing");
      return std::nullopt;
    }
    const json& v = obj[key];
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
      issue(path + "." + key, "expected a non-negative integer");
      return std::nullopt;
    }
    return v.get<std::uint64_t>();
  }

  std::optional<std::int64_t> i64(const json& obj, const char* key, const std::string& path) {
    if (!obj.contains(key)) return std::nullopt;
    const json& v = obj[key];
    if (!v.is_number_integer()) {
      issue(path + "." + key, "expected an integer");
      return std::nullopt;
    }
    return v.get<std::int64_t>();
  }

  std::vector<std::int64_t> i64_array(const json& obj, const char* key, const std::string& path) {
    std::vector<std::int64_t> out;
    if (!obj.contains(key)) return out;
    const json& v = obj[key];
    if (!v.is_array()) {
      issue(path + "." + key, "expected an array of integers");
      return out;
    }
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number_integer())
        issue(path + "." + key + "[" + std::to_string(i) + "]", "expected an integer");
      else
        out.push_back(v[i].get<std::int64_t>());
    }
    return out;
  }

  std::optional<std::uint64_t> address(const json& obj, const char* key, const std::string& path) {
    if (!obj.contains(key)) {
      issue(path + "." + key, "missing");
      return std::nullopt;
    }
    const json& v = obj[key];
    if (v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0))
      return v.get<std::uint64_t>();
    if (v.is_string()) {
      std::string_view s = v.get_ref<const std::string&>();
      if (s.substr(0, 2) == "0x" || s.substr(0, 2) == "0X") s.remove_prefix(2);
      std::uint64_t out = 0;
      auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out, 16);
      if (ec == std::errc{} && ptr == s.data() + s.size() && !s.empty()) return out;
    }
    issue(path + "." + key, "expected a hex string or non-negative integer");
    return std::nullopt;
  }

  std::vector<Item> items(const json& arr, const std::string& path) {
    std::vector<Item> out;
    if (!arr.is_array()) {
      issue(path, "expected an array of items");
      return out;
    }
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string p = path + "[" + std::to_string(i) + "]";
      const json& it = arr[i];
      if (!it.is_object() || it.size() != 1) {
        issue(p, "expected an object with exactly one of \"loop\", \"ref\", \"call\"");
        continue;
      }
      if (it.contains("loop"))
        out.push_back({loop(it["loop"], p + ".loop")});
      else if (it.contains("ref"))
        out.push_back({ref(it["ref"], p + ".ref")});
      else if (it.contains("call"))
        out.push_back({call(it["call"], p + ".call")});
      else
        issue(p, "unknown item kind \"" + it.begin().key() + "\"");
    }
    return out;
  }

 private:
  LoopSpec loop(const json& j, const std::string& path) {
    LoopSpec l;
    if (!j.is_object()) {
      issue(path, "expected an object");
      return l;
    }
    l.id = u64(j, "id", path, true).value_or(0);
    l.begin = u64(j, "begin", path, true).value_or(0);
    l.body = u64(j, "body", path, true).value_or(0);
    l.end = u64(j, "end", path, true).value_or(0);
    const bool has_trip = j.contains("trip"), has_trips = j.contains("trips");
    if (has_trip == has_trips) {
      issue(path, "exactly one of \"trip\" or \"trips\" is required");
    } else if (has_trip) {
      if (auto t = u64(j, "trip", path, true)) l.trips = {*t};
    } else {
      const json& t = j["trips"];
      if (!t.is_array() || t.empty()) {
        issue(path + ".trips", "expected a non-empty array of non-negative integers");
      } else {
        for (std::size_t i = 0; i < t.size(); ++i) {
          if (!t[i].is_number_unsigned() &&
              !(t[i].is_number_integer() && t[i].get<std::int64_t>() >= 0))
            issue(path + ".trips[" + std::to_string(i) + "]", "expected a non-negative integer");
          else
            l.trips.push_back(t[i].get<std::uint64_t>());
        }
      }
    }
    if (j.contains("items")) l.items = items(j["items"], path + ".items");
    return l;
  }

  RefSpec ref(const json& j, const std::string& path) {
    RefSpec r;
    if (!j.is_object()) {
      issue(path, "expected an object");
      return r;
    }
    r.instr = address(j, "instr", path).value_or(0);
    if (j.contains("base")) r.base = u64(j, "base", path, true).value_or(0);
    r.coeffs = i64_array(j, "coeffs", path);
    if (j.contains("kind")) {
      const json& k = j["kind"];
      if (k == "rd")
        r.kind = AccessKind::read;
      else if (k == "wr")
        r.kind = AccessKind::write;
      else
        issue(path + ".kind", "expected \"rd\" or \"wr\"");
    }
    if (j.contains("perturb")) {
      const json& pj = j["perturb"];
      const std::string pp = path + ".perturb";
      if (!pj.is_object()) {
        issue(pp, "expected an object");
      } else {
        Perturbation p;
        p.level = u64(pj, "level", pp, true).value_or(0);
        p.offsets = i64_array(pj, "offsets", pp);
        if (pj.contains("range")) {
          auto range = i64_array(pj, "range", pp);
          if (range.size() != 2)
            issue(pp + ".range", "expected [lo, hi]");
          else
            p.lo = range[0], p.hi = range[1];
        }
        r.perturb = p;
      }
    }
    if (j.contains("noise")) {
      const json& nj = j["noise"];
      const std::string np = path + ".noise";
      if (!nj.is_object() || !nj.contains("range") || !nj["range"].is_array() ||
          nj["range"].size() != 2 || !nj["range"][0].is_number_unsigned() ||
          !nj["range"][1].is_number_unsigned()) {
        issue(np, "expected {\"range\": [lo, hi]} with non-negative integers");
      } else {
        r.noise = Noise{nj["range"][0].get<std::uint64_t>(), nj["range"][1].get<std::uint64_t>()};
      }
    }
    return r;
  }

  CallSpec call(const json& j, const std::string& path) {
    CallSpec c;
    if (!j.is_object() || !j.contains("function") || !j["function"].is_string()) {
      issue(path + ".function", "expected a function name");
      return c;
    }
    c.function = j["function"].get<std::string>();
    c.offset_base = i64(j, "offset_base", path).value_or(0);
    c.offset_coeffs = i64_array(j, "offset_coeffs", path);
    return c;
  }
};

// ---------------------------------------------------------------------------
// Static validation.

class Validator {
 public:
  explicit Validator(const WorkloadSpec& spec) : spec_(spec) {}

  std::vector<std::string> run() {
    walk(spec_.main, "main", 0);
    for (const auto& [name, body] : spec_.functions) walk(body, "functions." + name, 0);
    check_recursion();
    return std::move(issues_);
  }

 private:
  void issue(const std::string& path, const std::string& what) {
    issues_.push_back(path + ": " + what);
  }

  void walk(const std::vector<Item>& items, const std::string& path, std::size_t depth) {
    for (std::size_t i = 0; i < items.size(); ++i) {
      const std::string p = path + "[" + std::to_string(i) + "]";
      if (const auto* l = std::get_if<LoopSpec>(&items[i].node)) {
        const std::string lp = p + ".loop";
        if (!loop_ids_.insert(l->id).second)
          issue(lp + ".id", "loop id " + std::to_string(l->id) + " used twice");
        for (auto [key, id] : {std::pair{"begin", l->begin}, {"body", l->body}, {"end", l->end}}) {
          if (!checkpoints_.insert(id).second)
            issue(lp + "." + key, "checkpoint id " + std::to_string(id) + " used twice");
        }
        if (l->trips.empty()) issue(lp, "no trip count");
        walk(l->items, lp + ".items", depth + 1);
      } else if (const auto* r = std::get_if<RefSpec>(&items[i].node)) {
        const std::string rp = p + ".ref";
        if (r->noise) {
          if (r->noise->hi <= r->noise->lo) issue(rp + ".noise.range", "need lo < hi");
        } else if (r->coeffs.size() != depth) {
          issue(rp + ".coeffs", "expected " + std::to_string(depth) + " coefficients, got " +
                                    std::to_string(r->coeffs.size()));
        }
        if (r->perturb) {
          if (r->perturb->level < 1) issue(rp + ".perturb.level", "must be at least 1");
          if (r->perturb->offsets.empty() && r->perturb->hi < r->perturb->lo)
            issue(rp + ".perturb.range", "need lo <= hi");
        }
      } else {
        const auto& c = std::get<CallSpec>(items[i].node);
        const std::string cp = p + ".call";
        if (!spec_.functions.count(c.function))
          issue(cp + ".function", "unknown function \"" + c.function + "\"");
        if (!c.offset_coeffs.empty() && c.offset_coeffs.size() != depth)
          issue(cp + ".offset_coeffs", "expected " + std::to_string(depth) +
                                           " coefficients, got " +
                                           std::to_string(c.offset_coeffs.size()));
      }
    }
  }

  static void callees(const std::vector<Item>& items, std::set<std::string>& out) {
    for (const auto& it : items) {
      if (const auto* l = std::get_if<LoopSpec>(&it.node)) callees(l->items, out);
      if (const auto* c = std::get_if<CallSpec>(&it.node)) out.insert(c->function);
    }
  }

  void check_recursion() {
    std::map<std::string, std::set<std::string>> graph;
    for (const auto& [name, body] : spec_.functions) callees(body, graph[name]);
    std::map<std::string, int> state;  // 1 = on path, 2 = done
    std::function<bool(const std::string&)> cyclic = [&](const std::string& f) {
      if (state[f] == 1) return true;
      if (state[f] == 2) return false;
      state[f] = 1;
      for (const auto& g : graph[f])
        if (graph.count(g) && cyclic(g)) return true;
      state[f] = 2;
      return false;
    };
    for (const auto& [name, _] : graph)
      if (cyclic(name)) {
        issue("functions." + name, "recursive call chain");
        return;
      }
  }

  const WorkloadSpec& spec_;
  std::vector<std::string> issues_;
  std::set<std::uint64_t> loop_ids_;
  std::set<std::uint64_t> checkpoints_;
};

// ---------------------------------------------------------------------------
// Interpreter.

class Interpreter {
 public:
  Interpreter(const WorkloadSpec& spec, std::uint64_t seed, const EventSink& sink)
      : spec_(spec), seed_(seed), sink_(sink) {}

  void run() {
    std::vector<const LoopSpec*> loops;
    collect(spec_.main, loops);
    for (const auto& [_, body] : spec_.functions) collect(body, loops);
    std::sort(loops.begin(), loops.end(),
              [](const LoopSpec* a, const LoopSpec* b) { return a->id < b->id; });
    for (const LoopSpec* l : loops) emit(LoopDeclaration{l->id, l->begin, l->body, l->end});
    exec(spec_.main, 0, Offset{});
  }

 private:
  struct Frame {
    std::uint64_t loop_id;
    std::int64_t iter;
    std::uint64_t* ordinal;  // body iterations of this loop node so far
  };
  struct Offset {
    std::uint64_t base = 0;
    std::vector<std::int64_t> coeffs;  // per frame, outermost first
  };

  static void collect(const std::vector<Item>& items, std::vector<const LoopSpec*>& out) {
    for (const auto& it : items)
      if (const auto* l = std::get_if<LoopSpec>(&it.node)) {
        out.push_back(l);
        collect(l->items, out);
      }
  }

  void emit(const TraceRecord& r) {
    if (sink_.record) sink_.record(r);
  }

  void exec(const std::vector<Item>& items, std::size_t local_base, const Offset& off) {
    for (const auto& it : items) {
      if (const auto* l = std::get_if<LoopSpec>(&it.node))
        exec_loop(*l, local_base, off);
      else if (const auto* r = std::get_if<RefSpec>(&it.node))
        exec_ref(*r, off);
      else
        exec_call(std::get<CallSpec>(it.node), local_base, off);
    }
  }

  void exec_loop(const LoopSpec& l, std::size_t local_base, const Offset& off) {
    emit(CheckpointEvent{l.begin});
    const std::uint64_t entry = entries_[&l]++;
    const std::uint64_t trips = l.trips[entry % l.trips.size()];
    path_.push_back(l.id);
    frames_.push_back({l.id, -1, &node_iterations_[path_]});
    for (std::uint64_t t = 0; t < trips; ++t) {
      frames_.back().iter = static_cast<std::int64_t>(t);
      ++*frames_.back().ordinal;
      emit(CheckpointEvent{l.body});
      exec(l.items, local_base, off);
      emit(CheckpointEvent{l.end});
    }
    frames_.pop_back();
    path_.pop_back();
  }

  void exec_call(const CallSpec& c, std::size_t local_base, const Offset& off) {
    Offset inner = off;
    inner.base += static_cast<std::uint64_t>(c.offset_base);
    inner.coeffs.resize(frames_.size(), 0);
    const std::size_t local = frames_.size() - local_base;
    for (std::size_t j = 0; j < c.offset_coeffs.size() && j < local; ++j)
      inner.coeffs[frames_.size() - 1 - j] += c.offset_coeffs[j];
    exec(spec_.functions.at(c.function), frames_.size(), inner);
  }

  void exec_ref(const RefSpec& r, const Offset& off) {
    const std::size_t depth = frames_.size();
    std::uint64_t addr;
    if (r.noise) {
      const std::uint64_t n = noise_execs_[r.instr]++;
      addr = r.noise->lo + mix(seed_, r.instr ^ 0x6e6f697365ULL, n) % (r.noise->hi - r.noise->lo);
    } else {
      addr = r.base + off.base;
      for (std::size_t j = 0; j < r.coeffs.size() && j < depth; ++j)
        addr += static_cast<std::uint64_t>(r.coeffs[j]) *
                static_cast<std::uint64_t>(frames_[depth - 1 - j].iter);
      for (std::size_t f = 0; f < off.coeffs.size() && f < depth; ++f)
        addr += static_cast<std::uint64_t>(off.coeffs[f]) *
                static_cast<std::uint64_t>(frames_[f].iter);
      if (r.perturb) addr += static_cast<std::uint64_t>(perturbation(r, *r.perturb));
    }

    emit(MemoryAccessEvent{r.instr, addr, r.kind});
    if (sink_.access) {
      iters_.clear();
      for (std::size_t i = depth; i-- > 0;) iters_.push_back(frames_[i].iter);
      sink_.access(AccessSite{r.instr, addr, r.kind, r.noise.has_value(), path_, iters_});
    }
  }

  std::int64_t perturbation(const RefSpec& r, const Perturbation& p) {
    if (p.level > frames_.size())
      throw SpecError({"ref " + hex(r.instr) + ": perturbation level " + std::to_string(p.level) +
                       " exceeds nest depth " + std::to_string(frames_.size()) + " at " +
                       path_string(path_)});
    const std::uint64_t ordinal = *frames_[frames_.size() - p.level].ordinal - 1;
    if (!p.offsets.empty()) return p.offsets[ordinal % p.offsets.size()];
    const auto span = static_cast<std::uint64_t>(p.hi - p.lo) + 1;
    return p.lo + static_cast<std::int64_t>(mix(seed_, r.instr, ordinal) % span);
  }

  const WorkloadSpec& spec_;
  std::uint64_t seed_;
  const EventSink& sink_;
  std::vector<Frame> frames_;
  std::vector<std::uint64_t> path_;
  std::vector<std::int64_t> iters_;
  std::map<const LoopSpec*, std::uint64_t> entries_;
  std::map<std::vector<std::uint64_t>, std::uint64_t> node_iterations_;
  std::map<std::uint64_t, std::uint64_t> noise_execs_;
};

// ---------------------------------------------------------------------------
// Exact rational arithmetic for the oracle fit.

using i128 = __int128;

i128 gcd128(i128 a, i128 b) {
  if (a < 0) a = -a;
  if (b < 0) b = -b;
  while (b) {
    i128 t = a % b;
    a = b;
    b = t;
  }
  return a;
}

struct Rational {
  i128 num = 0;
  i128 den = 1;

  Rational() = default;
  Rational(i128 n, i128 d = 1) : num(n), den(d) { normalize(); }

  void normalize() {
    if (den < 0) num = -num, den = -den;
    const i128 g = gcd128(num, den);
    if (g > 1) num /= g, den /= g;
  }
  bool zero() const { return num == 0; }
  friend Rational operator-(Rational a, Rational b) {
    return {a.num * b.den - b.num * a.den, a.den * b.den};
  }
  friend Rational operator*(Rational a, Rational b) { return {a.num * b.num, a.den * b.den}; }
  friend Rational operator/(Rational a, Rational b) { return {a.num * b.den, a.den * b.num}; }
};

struct Row {
  std::vector<Rational> coef;
  Rational rhs;
};

// Incrementally maintained reduced row echelon basis. add() returns false
// when the row contradicts the rows already absorbed.
class Basis {
 public:
  explicit Basis(std::size_t cols) : cols_(cols) {}

  bool add(Row row) {
    for (const auto& [pivot, b] : rows_) {
      if (row.coef[pivot].zero()) continue;
      const Rational f = row.coef[pivot];
      for (std::size_t c = 0; c < cols_; ++c) row.coef[c] = row.coef[c] - f * b.coef[c];
      row.rhs = row.rhs - f * b.rhs;
    }
    std::size_t pivot = cols_;
    for (std::size_t c = 0; c < cols_; ++c)
      if (!row.coef[c].zero()) {
        pivot = c;
        break;
      }
    if (pivot == cols_) return row.rhs.zero();

    const Rational p = row.coef[pivot];
    for (auto& c : row.coef) c = c / p;
    row.rhs = row.rhs / p;
    for (auto& [_, b] : rows_) {
      if (b.coef[pivot].zero()) continue;
      const Rational f = b.coef[pivot];
      for (std::size_t c = 0; c < cols_; ++c) b.coef[c] = b.coef[c] - f * row.coef[c];
      b.rhs = b.rhs - f * row.rhs;
    }
    rows_.emplace_back(pivot, std::move(row));
    return true;
  }

  /// Solution with free columns at zero; nullopt if not integral.
  std::optional<std::vector<std::int64_t>> integer_solution() const {
    std::vector<std::int64_t> out(cols_, 0);
    for (const auto& [pivot, b] : rows_) {
      if (b.rhs.den != 1) return std::nullopt;
      out[pivot] = static_cast<std::int64_t>(b.rhs.num);
    }
    return out;
  }

 private:
  std::size_t cols_;
  std::vector<std::pair<std::size_t, Row>> rows_;
};

std::optional<FitResult> fit_at(std::span<const std::int64_t> iters,
                                std::span<const std::uint64_t> addrs, std::size_t nest,
                                std::size_t m) {
  const std::size_t count = addrs.size();
  std::map<std::vector<std::int64_t>, std::size_t> anchors;
  std::vector<std::size_t> anchor_of(count);
  Basis basis(m);
  for (std::size_t a = 0; a < count; ++a) {
    const std::int64_t* it = iters.data() + a * nest;
    std::vector<std::int64_t> key(it + m, it + nest);
    auto [pos, fresh] = anchors.try_emplace(std::move(key), a);
    anchor_of[a] = pos->second;
    if (fresh) continue;
    const std::int64_t* at = iters.data() + pos->second * nest;
    Row row;
    row.coef.reserve(m);
    for (std::size_t i = 0; i < m; ++i) row.coef.emplace_back(it[i] - at[i]);
    row.rhs = Rational(static_cast<std::int64_t>(addrs[a] - addrs[pos->second]));
    if (!basis.add(std::move(row))) return std::nullopt;
  }
  auto coeffs = basis.integer_solution();
  if (!coeffs) return std::nullopt;

  auto slice_const = [&](std::size_t a) {
    std::uint64_t k = addrs[a];
    const std::int64_t* it = iters.data() + a * nest;
    for (std::size_t i = 0; i < m; ++i)
      k -= static_cast<std::uint64_t>((*coeffs)[i]) * static_cast<std::uint64_t>(it[i]);
    return k;
  };
  for (std::size_t a = 0; a < count; ++a)
    if (slice_const(a) != slice_const(anchor_of[a])) return std::nullopt;

  return FitResult{m, count ? slice_const(0) : 0, std::move(*coeffs)};
}

// Groups ground-truth accesses per (loop path, instruction).
class AccessLog {
 public:
  void add(const AccessSite& s) {
    auto [it, fresh] = index_.try_emplace(Key{{s.path.begin(), s.path.end()}, s.instr}, groups_.size());
    if (fresh) {
      Group g;
      g.path.assign(s.path.begin(), s.path.end());
      g.instr = s.instr;
      g.nest = s.iters.size();
      groups_.push_back(std::move(g));
    }
    Group& g = groups_[it->second];
    g.noise = g.noise || s.noise;
    g.iters.insert(g.iters.end(), s.iters.begin(), s.iters.end());
    g.addrs.push_back(s.address);
  }

  std::vector<ExpectedReference> results(const FilterConfig& cfg) const {
    std::vector<ExpectedReference> out;
    out.reserve(groups_.size());
    for (const Group& g : groups_) {
      ExpectedReference e;
      e.path = g.path;
      e.instr = g.instr;
      e.nest_level = g.nest;
      e.noise = g.noise;
      e.exec_count = g.addrs.size();
      e.footprint = std::unordered_set<std::uint64_t>(g.addrs.begin(), g.addrs.end()).size();
      if (auto fit = fit_affine(g.iters, g.addrs, g.nest)) {
        e.partial_level = fit->partial_level;
        e.base = fit->base;
        e.coeffs = fit->coeffs;
        if (!g.noise) {
          AffineExpression expr;
          expr.base = expr.first_base = e.base;
          expr.coeffs = e.coeffs;
          expr.nest_level = e.nest_level;
          expr.partial = fit->partial_level < g.nest;
          e.reason = purge_reason(expr, e.exec_count, e.footprint, cfg);
        }
      }
      out.push_back(std::move(e));
    }
    return out;
  }

 private:
  struct Group {
    std::vector<std::uint64_t> path;
    std::uint64_t instr = 0;
    std::size_t nest = 0;
    bool noise = false;
    std::vector<std::int64_t> iters;
    std::vector<std::uint64_t> addrs;
  };
  using Key = std::pair<std::vector<std::uint64_t>, std::uint64_t>;
  std::map<Key, std::size_t> index_;
  std::vector<Group> groups_;
};

json items_to_json(const std::vector<Item>& items) {
  json arr = json::array();
  for (const auto& it : items) {
    if (const auto* l = std::get_if<LoopSpec>(&it.node)) {
      json j = {{"id", l->id}, {"begin", l->begin}, {"body", l->body}, {"end", l->end}};
      if (l->trips.size() == 1)
        j["trip"] = l->trips[0];
      else
        j["trips"] = l->trips;
      j["items"] = items_to_json(l->items);
      arr.push_back({{"loop", std::move(j)}});
    } else if (const auto* r = std::get_if<RefSpec>(&it.node)) {
      json j = {{"instr", hex(r->instr)}, {"base", r->base}, {"coeffs", r->coeffs},
                {"kind", r->kind == AccessKind::write ? "wr" : "rd"}};
      if (r->perturb) {
        json p = {{"level", r->perturb->level}};
        if (!r->perturb->offsets.empty())
          p["offsets"] = r->perturb->offsets;
        else
          p["range"] = {r->perturb->lo, r->perturb->hi};
        j["perturb"] = std::move(p);
      }
      if (r->noise) j["noise"] = {{"range", {r->noise->lo, r->noise->hi}}};
      arr.push_back({{"ref", std::move(j)}});
    } else {
      const auto& c = std::get<CallSpec>(it.node);
      json j = {{"function", c.function}};
      if (c.offset_base) j["offset_base"] = c.offset_base;
      if (!c.offset_coeffs.empty()) j["offset_coeffs"] = c.offset_coeffs;
      arr.push_back({{"call", std::move(j)}});
    }
  }
  return arr;
}

}  // namespace

WorkloadSpec parse_spec(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw SpecError({std::string("$: ") + e.what()});
  }
  Reader rd;
  WorkloadSpec spec;
  if (!doc.is_object()) throw SpecError({"$: expected a JSON object"});
  if (doc.contains("format") && doc["format"] != kSpecFormat)
    rd.issue("format", "expected \"" + std::string(kSpecFormat) + "\"");
  if (doc.contains("version") && doc["version"] != kSpecVersion)
    rd.issue("version", "unsupported version (expected " + std::to_string(kSpecVersion) + ")");
  if (!doc.contains("main"))
    rd.issue("main", "missing");
  else
    spec.main = rd.items(doc["main"], "main");
  if (doc.contains("functions")) {
    if (!doc["functions"].is_object()) {
      rd.issue("functions", "expected an object of name -> items");
    } else {
      for (const auto& [name, body] : doc["functions"].items())
        spec.functions[name] = rd.items(body, "functions." + name);
    }
  }
  if (!rd.issues.empty()) throw SpecError(std::move(rd.issues));
  if (auto issues = validate(spec); !issues.empty()) throw SpecError(std::move(issues));
  return spec;
}

std::string spec_to_json(const WorkloadSpec& spec) {
  json doc;
  doc["format"] = kSpecFormat;
  doc["version"] = kSpecVersion;
  if (!spec.functions.empty()) {
    json fns = json::object();
    for (const auto& [name, body] : spec.functions) fns[name] = items_to_json(body);
    doc["functions"] = std::move(fns);
  }
  doc["main"] = items_to_json(spec.main);
  return doc.dump(2) + "\n";
}

std::vector<std::string> validate(const WorkloadSpec& spec) { return Validator(spec).run(); }

void run(const WorkloadSpec& spec, std::uint64_t seed, const EventSink& sink) {
  if (auto issues = validate(spec); !issues.empty()) throw SpecError(std::move(issues));
  Interpreter(spec, seed, sink).run();
}

std::vector<TraceRecord> generate_trace(const WorkloadSpec& spec, std::uint64_t seed) {
  std::vector<TraceRecord> out;
  run(spec, seed, EventSink{[&](const TraceRecord& r) { out.push_back(r); }, {}});
  return out;
}

std::optional<FitResult> fit_affine(std::span<const std::int64_t> iters,
                                    std::span<const std::uint64_t> addresses, std::size_t nest) {
  for (std::size_t m = nest + 1; m-- > 0;)
    if (auto fit = fit_at(iters, addresses, nest, m)) return fit;
  return std::nullopt;
}

std::vector<ExpectedReference> expected_results(const WorkloadSpec& spec, std::uint64_t seed,
                                                const FilterConfig& cfg) {
  AccessLog log;
  run(spec, seed, EventSink{{}, [&](const AccessSite& s) { log.add(s); }});
  return log.results(cfg);
}

CheckReport compare(const ForayModel& model, std::span<const ExpectedReference> expected) {
  CheckReport rep;
  rep.references = expected.size();
  std::map<std::pair<std::vector<std::uint64_t>, std::uint64_t>, const ReferenceResult*> found;
  for (const auto& r : model.references) found[{r.node->path(), r.instruction_address}] = &r;

  std::set<const ReferenceResult*> matched;
  for (const auto& e : expected) {
    const std::string who = "ref " + hex(e.instr) + " @ " + path_string(e.path);
    auto it = found.find({e.path, e.instr});
    if (it == found.end()) {
      rep.mismatches.push_back(who + ": missing from model");
      continue;
    }
    const ReferenceResult& r = *it->second;
    matched.insert(&r);
    auto diff = [&](const std::string& field, const std::string& want, const std::string& got) {
      if (want != got)
        rep.mismatches.push_back(who + ": " + field + " expected " + want + ", got " + got);
    };
    diff("exec_count", std::to_string(e.exec_count), std::to_string(r.exec_count));
    diff("footprint", std::to_string(e.footprint), std::to_string(r.footprint));

    if (!e.reason) {
      if (r.surviving())
        rep.mismatches.push_back(who + ": expected outside the model (irregular), got included");
      continue;
    }
    diff("category", std::string(to_string(*e.reason)), std::string(to_string(r.reason)));
    const AffineExpression* a = r.affine();
    if (!a) continue;  // category mismatch already recorded
    diff("M", std::to_string(*e.partial_level), std::to_string(a->partial_level()));
    diff("base", std::to_string(e.base), std::to_string(a->first_base));
    auto vec = [](const std::vector<std::int64_t>& v) {
      std::string s = "[";
      for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
      return s + "]";
    };
    diff("coeffs", vec(e.coeffs), vec(a->coeffs));
  }
  for (const auto& r : model.references)
    if (!matched.count(&r))
      rep.mismatches.push_back("ref " + hex(r.instruction_address) + " @ " +
                               path_string(r.node->path()) + ": not produced by the workload");
  return rep;
}

CheckReport check(const WorkloadSpec& spec, std::uint64_t seed, const FilterConfig& cfg) {
  Analyzer analyzer(cfg);
  AccessLog log;
  std::uint64_t position = 0;
  run(spec, seed,
      EventSink{[&](const TraceRecord& r) { analyzer.feed(r, ++position); },
                [&](const AccessSite& s) { log.add(s); }});
  const ForayModel model = analyzer.finish();
  const auto expected = log.results(cfg);
  return compare(model, expected);
}

// ---------------------------------------------------------------------------
// Random workloads.

namespace {

class RandomBuilder {
 public:
  RandomBuilder(std::uint64_t seed, const RandomOptions& o) : rng_(seed), o_(o) {}

  WorkloadSpec build() {
    WorkloadSpec spec;
    if (o_.calls && chance(0.35)) {
      const std::size_t fdepth = pick(1, std::min<std::size_t>(2, o_.max_depth - 1));
      function_depth_ = fdepth;
      spec.functions["kernel"] = {Item{loop(fdepth, 1, o_.access_budget / 4, false)}};
    }
    const std::size_t nests = pick(1, 2);
    for (std::size_t i = 0; i < nests; ++i) {
      const std::size_t depth = pick(1, o_.max_depth);
      spec.main.push_back(Item{loop(depth, 1, o_.access_budget, true)});
    }
    if (chance(0.15)) spec.main.push_back(Item{ref(0, 0)});
    return spec;
  }

 private:
  std::size_t pick(std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, std::max(lo, hi))(rng_);
  }
  std::int64_t pick_i(std::int64_t lo, std::int64_t hi) {
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng_);
  }
  bool chance(double p) { return std::bernoulli_distribution(p)(rng_); }

  // `levels` loops remain to be nested below (including this one); `depth`
  // is this loop's local depth.
  LoopSpec loop(std::size_t levels, std::size_t depth, std::uint64_t budget, bool in_main) {
    LoopSpec l;
    l.id = next_loop_++;
    l.begin = next_checkpoint_++;
    l.body = next_checkpoint_++;
    l.end = next_checkpoint_++;
    const std::uint64_t cap = std::max<std::uint64_t>(
        o_.min_trip, std::min<std::uint64_t>(o_.max_trip, budget));
    if (chance(0.15)) {
      for (std::size_t k = 0, n = pick(2, 3); k < n; ++k)
        l.trips.push_back(pick(o_.min_trip, cap));
    } else {
      l.trips.push_back(pick(o_.min_trip, cap));
    }
    const std::uint64_t inner_budget =
        std::max<std::uint64_t>(1, budget / *std::max_element(l.trips.begin(), l.trips.end()));

    const std::size_t full_depth = in_main ? depth : depth + 1;  // function called from >= 1 loop
    if (levels > 1) {
      l.items.push_back(Item{loop(levels - 1, depth + 1, inner_budget, in_main)});
      if (chance(0.2) && inner_budget >= o_.min_trip)
        l.items.push_back(Item{loop(1, depth + 1, inner_budget, in_main)});
    }
    for (std::size_t k = 0, n = pick(levels > 1 ? 0 : 1, 2); k < n; ++k)
      l.items.push_back(Item{ref(depth, in_main ? full_depth : 0)});
    if (in_main && function_depth_ && depth + function_depth_ <= o_.max_depth && chance(0.4)) {
      CallSpec c;
      c.function = "kernel";
      c.offset_base = pick_i(0, 1 << 16);
      for (std::size_t j = 0; j < depth; ++j) c.offset_coeffs.push_back(pick_i(-64, 64));
      l.items.push_back(Item{c});
    }
    return l;
  }

  // `perturb_depth` > 0 allows a perturbation of the enclosing levels.
  RefSpec ref(std::size_t depth, std::size_t perturb_depth) {
    RefSpec r;
    r.instr = next_instr_;
    next_instr_ += 4;
    r.kind = chance(0.5) ? AccessKind::write : AccessKind::read;
    r.base = std::uniform_int_distribution<std::uint64_t>(std::uint64_t{1} << 24, o_.max_base)(rng_);
    if (o_.noise && chance(0.08)) {
      r.noise = Noise{r.base, r.base + (std::uint64_t{1} << 20)};
      return r;
    }
    for (std::size_t j = 0; j < depth; ++j) r.coeffs.push_back(pick_i(-o_.max_coeff, o_.max_coeff));
    if (o_.perturbations && perturb_depth > 0 && chance(0.2)) {
      Perturbation p;
      p.level = pick(1, perturb_depth);
      r.perturb = p;
    }
    return r;
  }

  std::mt19937_64 rng_;
  RandomOptions o_;
  std::size_t function_depth_ = 0;
  std::uint64_t next_loop_ = 1;
  std::uint64_t next_checkpoint_ = 10;
  std::uint64_t next_instr_ = 0x400000;
};

LoopSpec make_loop(std::uint64_t id, std::uint64_t begin, std::uint64_t body, std::uint64_t end,
                   std::uint64_t trip, std::vector<Item> items) {
  return LoopSpec{id, begin, body, end, {trip}, std::move(items)};
}

}  // namespace

WorkloadSpec random_spec(std::uint64_t seed, const RandomOptions& opts) {
  return RandomBuilder(seed, opts).build();
}

WorkloadSpec pointer_walk_spec() {
  RefSpec store;
  store.instr = 0x4002a0;
  store.base = 0x7fff5934;
  store.coeffs = {1, 103};
  store.kind = AccessKind::write;
  WorkloadSpec spec;
  spec.main.push_back(
      Item{make_loop(1, 12, 13, 17, 2, {Item{make_loop(2, 15, 16, 14, 3, {Item{store}})}})});
  return spec;
}

WorkloadSpec shared_callee_spec() {
  RefSpec load;
  load.instr = 0x400100;
  load.base = 0x10000000;
  load.coeffs = {1};
  WorkloadSpec spec;
  spec.functions["foo"] = {Item{make_loop(3, 120, 121, 122, 10, {Item{load}})}};
  spec.main.push_back(Item{make_loop(1, 100, 101, 102, 10, {Item{CallSpec{"foo", 0, {10}}}})});
  spec.main.push_back(Item{make_loop(2, 110, 111, 112, 20, {Item{CallSpec{"foo", 0, {2}}}})});
  return spec;
}

WorkloadSpec perturbed_nest_spec(std::size_t depth, std::size_t level, std::uint64_t trip,
                                 std::uint64_t spec_seed) {
  std::mt19937_64 rng(spec_seed);
  std::uniform_int_distribution<std::int64_t> coeff(-256, 256);
  RefSpec r;
  r.instr = 0x401000;
  r.base = std::uint64_t{1} << 32;
  for (std::size_t j = 0; j < depth; ++j) {
    std::int64_t c = 0;
    while (c == 0) c = coeff(rng);
    r.coeffs.push_back(c);
  }
  r.perturb = Perturbation{level, {}, 0, (std::int64_t{1} << 24) - 1};

  std::vector<Item> body{Item{r}};
  for (std::size_t d = depth; d >= 1; --d) {
    const std::uint64_t id = d;  // 1 = outermost
    body = {Item{make_loop(id, 10 * id, 10 * id + 1, 10 * id + 2, trip, std::move(body))}};
  }
  WorkloadSpec spec;
  spec.main = std::move(body);
  return spec;
}

}  // namespace foray::synth
