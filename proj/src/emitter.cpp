#include "foray/emitter.hpp"

#include <charconv>
#include <cstdio>
#include <functional>
#include <stdexcept>
#include <unordered_map>

#include "json.hpp"

namespace foray {

using json = nlohmann::ordered_json;

namespace {

std::string hex(std::uint64_t v) {
  char buf[17];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, 16);
  return std::string(buf, ptr);
}

std::string iterator_name(const ForayModel& m, const LoopNode& n) {
  return "i" + std::to_string(m.begin_id(n.loop_id()));
}

struct NestTrie {
  const LoopNode* loop = nullptr;
  std::vector<std::unique_ptr<NestTrie>> children;
  std::vector<const ReferenceResult*> refs;

  NestTrie& child(const LoopNode* n) {
    for (auto& c : children)
      if (c->loop == n) return *c;
    children.push_back(std::make_unique<NestTrie>());
    children.back()->loop = n;
    return *children.back();
  }
};

void write_trie(const ForayModel& m, const NestTrie& t, std::size_t depth, std::string& out) {
  std::size_t inner = depth;
  if (t.loop) {
    const std::string it = iterator_name(m, *t.loop);
    out.append(depth, ' ');
    out += "for (int " + it + "=0; " + it + "<" + std::to_string(t.loop->trip_max()) + "; " +
           it + "++)\n";
    ++inner;
  }
  for (const ReferenceResult* r : t.refs) {
    out.append(inner, ' ');
    out += expression_text(m, *r);
    if (r->affine()->partial) out += " /* partial, base varies */";
    out += '\n';
  }
  for (const auto& c : t.children) write_trie(m, *c, inner, out);
}

json category_json(const CategoryStats& c) {
  return {{"references", c.references}, {"accesses", c.accesses}, {"footprint", c.footprint}};
}

CategoryStats category_from(const json& j) {
  return {j.at("references").get<std::uint64_t>(), j.at("accesses").get<std::uint64_t>(),
          j.at("footprint").get<std::uint64_t>()};
}

void for_each_node(const LoopNode& n, const std::function<void(const LoopNode&)>& fn) {
  fn(n);
  for (const auto& c : n.children()) for_each_node(*c, fn);
}

}  // namespace

std::string expression_text(const ForayModel& m, const ReferenceResult& ref) {
  const AffineExpression* e = ref.affine();
  if (!e) return {};
  std::string out = "A" + hex(ref.instruction_address) + "[" + std::to_string(e->first_base);
  const LoopNode* n = ref.node;
  for (std::size_t i = 0; i < e->coeffs.size(); ++i, n = n->parent()) {
    const std::int64_t c = e->coeffs[i];
    if (c == 0) continue;
    out += c < 0 ? "-" : "+";
    out += std::to_string(c < 0 ? 0 - static_cast<std::uint64_t>(c) : static_cast<std::uint64_t>(c));
    out += "*" + iterator_name(m, *n);
  }
  out += "]";
  return out;
}

std::string emit_c(const ForayModel& m) {
  NestTrie root;
  for (const auto& r : m.references) {
    if (!r.surviving()) continue;
    NestTrie* t = &root;
    for (const LoopNode* n : emitted_nest(r)) t = &t->child(n);
    t->refs.push_back(&r);
  }
  std::string out;
  write_trie(m, root, 0, out);
  return out;
}

std::string emit_report(const ForayModel& m) {
  json doc;
  doc["schema"] = kReportSchema;
  doc["version"] = kReportVersion;
  doc["filter"] = {{"n_exec", m.config.n_exec},
                   {"n_loc", m.config.n_loc},
                   {"require_iterator", m.config.require_iterator},
                   {"footprint_cap", m.config.footprint_cap}};
  doc["events"] = {{"memory", m.memory_events}, {"checkpoint", m.checkpoint_events}};

  std::unordered_map<const LoopNode*, bool> in_model;
  for (const auto& r : m.references)
    if (r.surviving())
      for (const LoopNode* n : emitted_nest(r)) in_model[n] = true;

  json loops = json::array();
  for_each_node(m.tree->root(), [&](const LoopNode& n) {
    if (n.is_root()) return;
    loops.push_back({{"path", n.path()},
                     {"loop_id", n.loop_id()},
                     {"iterator", iterator_name(m, n)},
                     {"entries", n.entry_count()},
                     {"trip_min", n.trip_min()},
                     {"trip_max", n.trip_max()},
                     {"single_trip", n.trip_max() == 1},
                     {"in_model", in_model.count(&n) > 0}});
  });
  doc["loops"] = std::move(loops);

  json refs = json::array();
  for (const auto& r : m.references) {
    json j = {{"instr", hex(r.instruction_address)},
              {"path", r.node->path()},
              {"category", to_string(r.category())},
              {"purge_reason", to_string(r.reason)},
              {"exec_count", r.exec_count},
              {"footprint", r.footprint},
              {"reads", r.reads},
              {"writes", r.writes},
              {"mispredictions", r.mispredictions}};
    if (const auto* e = r.affine()) {
      j["expression"] = {{"text", expression_text(m, r)},
                         {"base", e->first_base},
                         {"final_base", e->base},
                         {"coeffs", e->coeffs},
                         {"nest_level", e->nest_level},
                         {"partial_level", e->partial_level()},
                         {"partial", e->partial}};
    } else {
      j["expression"] = nullptr;
    }
    refs.push_back(std::move(j));
  }
  doc["references"] = std::move(refs);

  json hints = json::array();
  for (const auto& h : m.hints) {
    json ctxs = json::array();
    for (const auto& c : h.contexts) {
      json exprs = json::array();
      for (std::size_t i : c.surviving) exprs.push_back(expression_text(m, m.references[i]));
      ctxs.push_back({{"path", c.loop_path}, {"expressions", std::move(exprs)}});
    }
    const bool is_loop = h.kind == InliningHint::Kind::loop;
    hints.push_back({{"kind", is_loop ? "loop" : "instruction"},
                     {"id", is_loop ? json(h.id) : json(hex(h.id))},
                     {"contexts", std::move(ctxs)}});
  }
  doc["hints"] = std::move(hints);

  json reasons = json::object();
  for (PurgeReason p : {PurgeReason::non_analyzable, PurgeReason::no_iterator,
                        PurgeReason::too_few_executions, PurgeReason::too_few_locations}) {
    std::uint64_t count = 0;
    for (const auto& r : m.references) count += r.reason == p;
    reasons[std::string(to_string(p))] = count;
  }

  doc["stats"] = {{"total", category_json(m.stats.total)},
                  {"included", category_json(m.stats.included)},
                  {"purged", category_json(m.stats.purged)},
                  {"non_analyzable", category_json(m.stats.non_analyzable)},
                  {"purge_reasons", std::move(reasons)},
                  {"static_loops", m.stats.static_loops},
                  {"loop_nodes", m.stats.loop_nodes},
                  {"model_loops", m.stats.model_loops}};
  doc["notes"] = m.notes;
  return doc.dump(2) + "\n";
}

ModelStats parse_report_stats(std::string_view report) {
  const json doc = json::parse(report, nullptr, false);
  if (!doc.is_object() || doc.value("schema", "") != kReportSchema ||
      doc.value("version", 0) != kReportVersion)
    throw std::runtime_error("not a foray-report v1 document");
  try {
    const json& s = doc.at("stats");
    ModelStats out;
    out.total = category_from(s.at("total"));
    out.included = category_from(s.at("included"));
    out.purged = category_from(s.at("purged"));
    out.non_analyzable = category_from(s.at("non_analyzable"));
    out.static_loops = s.at("static_loops").get<std::uint64_t>();
    out.loop_nodes = s.at("loop_nodes").get<std::uint64_t>();
    out.model_loops = s.at("model_loops").get<std::uint64_t>();
    return out;
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("malformed report stats: ") + e.what());
  }
}

std::string format_stats(const ModelStats& s) {
  auto pct = [](std::uint64_t part, std::uint64_t whole) {
    return whole ? 100.0 * static_cast<double>(part) / static_cast<double>(whole) : 0.0;
  };
  std::string out;
  char line[160];
  std::snprintf(line, sizeof line, "%-16s %12s %14s %12s\n", "category", "references",
                "accesses", "footprint");
  out += line;
  auto row = [&](const char* name, const CategoryStats& c) {
    std::snprintf(line, sizeof line, "%-16s %12llu %14llu %12llu  (%5.1f%% refs, %5.1f%% acc)\n",
                  name, static_cast<unsigned long long>(c.references),
                  static_cast<unsigned long long>(c.accesses),
                  static_cast<unsigned long long>(c.footprint), pct(c.references, s.total.references),
                  pct(c.accesses, s.total.accesses));
    out += line;
  };
  row("included", s.included);
  row("purged", s.purged);
  row("non-analyzable", s.non_analyzable);
  row("total", s.total);
  std::snprintf(line, sizeof line, "loops: %llu static, %llu contexts, %llu in model\n",
                static_cast<unsigned long long>(s.static_loops),
                static_cast<unsigned long long>(s.loop_nodes),
                static_cast<unsigned long long>(s.model_loops));
  out += line;
  return out;
}

}  // namespace foray
