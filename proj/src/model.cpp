#include "foray/model.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <set>
#include <stdexcept>
#include <unordered_set>

#include "foray/error.hpp"

namespace foray {

void FilterConfig::validate() const {
  if (n_exec < 1) throw std::invalid_argument("n_exec must be at least 1");
  if (n_loc < 1) throw std::invalid_argument("n_loc must be at least 1");
}

std::string_view to_string(Category c) {
  switch (c) {
    case Category::included: return "included";
    case Category::purged: return "purged";
    case Category::non_analyzable: return "non-analyzable";
  }
  return "?";
}

std::string_view to_string(PurgeReason r) {
  switch (r) {
    case PurgeReason::none: return "none";
    case PurgeReason::non_analyzable: return "non-analyzable";
    case PurgeReason::no_iterator: return "no-iterator";
    case PurgeReason::too_few_executions: return "too-few-executions";
    case PurgeReason::too_few_locations: return "too-few-locations";
  }
  return "?";
}

Category ReferenceResult::category() const noexcept {
  if (reason == PurgeReason::none) return Category::included;
  if (reason == PurgeReason::non_analyzable) return Category::non_analyzable;
  return Category::purged;
}

std::uint64_t ForayModel::begin_id(std::uint64_t loop_id) const {
  const LoopDeclaration* d = declarations.loop(loop_id);
  return d ? d->begin_id : loop_id;
}

PurgeReason purge_reason(const InferenceResult& expr, std::uint64_t exec_count,
                         std::uint64_t footprint, const FilterConfig& cfg) {
  const auto* e = std::get_if<AffineExpression>(&expr);
  if (!e) return PurgeReason::non_analyzable;
  if (cfg.require_iterator && !e->has_iterator()) return PurgeReason::no_iterator;
  if (exec_count < cfg.n_exec) return PurgeReason::too_few_executions;
  if (footprint < cfg.n_loc) return PurgeReason::too_few_locations;
  return PurgeReason::none;
}

void purge(std::span<ReferenceResult> refs, const FilterConfig& cfg) {
  for (auto& r : refs) r.reason = purge_reason(r.expression, r.exec_count, r.footprint, cfg);
}

std::vector<const LoopNode*> emitted_nest(const ReferenceResult& ref) {
  std::vector<const LoopNode*> nest;
  const auto* e = ref.affine();
  if (!e) return nest;
  std::size_t keep = e->partial ? e->partial_level() : e->nest_level;
  for (const LoopNode* n = ref.node; n && !n->is_root() && keep > 0; n = n->parent(), --keep)
    nest.push_back(n);
  std::reverse(nest.begin(), nest.end());
  return nest;
}

namespace {

void for_each_node(const LoopNode& n, const std::function<void(const LoopNode&)>& fn) {
  fn(n);
  for (const auto& c : n.children()) for_each_node(*c, fn);
}

bool is_within(const LoopNode* node, const LoopNode* ancestor) {
  for (; node; node = node->parent())
    if (node == ancestor) return true;
  return false;
}

}  // namespace

std::vector<InliningHint> inlining_hints(const ForayModel& model) {
  std::map<std::uint64_t, std::vector<const LoopNode*>> loop_nodes;
  for_each_node(model.tree->root(), [&](const LoopNode& n) {
    if (!n.is_root()) loop_nodes[n.loop_id()].push_back(&n);
  });

  auto surviving_under = [&](const LoopNode* ctx, bool exact) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < model.references.size(); ++i) {
      const auto& r = model.references[i];
      if (!r.surviving()) continue;
      if (exact ? r.node == ctx : is_within(r.node, ctx)) out.push_back(i);
    }
    return out;
  };

  std::vector<InliningHint> hints;
  for (const auto& [loop, nodes] : loop_nodes) {
    if (nodes.size() < 2) continue;
    InliningHint h{InliningHint::Kind::loop, loop, {}};
    for (const LoopNode* n : nodes) h.contexts.push_back({n->path(), surviving_under(n, false)});
    hints.push_back(std::move(h));
  }

  // A reference reached from several different loops without a loop of its
  // own in common (for example a loop-free helper called from distinct
  // loops). References sharing one static loop are covered above.
  std::map<std::uint64_t, std::vector<const LoopNode*>> instr_nodes;
  for (const auto& r : model.references) instr_nodes[r.instruction_address].push_back(r.node);
  for (const auto& [instr, nodes] : instr_nodes) {
    if (nodes.size() < 2) continue;
    std::set<std::optional<std::uint64_t>> owners;
    for (const LoopNode* n : nodes)
      owners.insert(n->is_root() ? std::nullopt : std::optional(n->loop_id()));
    if (owners.size() < 2) continue;
    InliningHint h{InliningHint::Kind::instruction, instr, {}};
    for (const LoopNode* n : nodes) {
      HintContext ctx{n->path(), {}};
      for (std::size_t i : surviving_under(n, true))
        if (model.references[i].instruction_address == instr) ctx.surviving.push_back(i);
      h.contexts.push_back(std::move(ctx));
    }
    hints.push_back(std::move(h));
  }
  return hints;
}

Analyzer::Analyzer(FilterConfig cfg) {
  cfg.validate();
  model_.config = cfg;
}

void Analyzer::feed(const TraceRecord& record, std::uint64_t position) {
  LoopTree& tree = *model_.tree;
  if (const auto* d = std::get_if<LoopDeclaration>(&record)) {
    if (seen_event_) throw TraceError(position, "loop declaration after first event");
    model_.declarations.add(*d, position);
    return;
  }
  seen_event_ = true;

  if (const auto* cp = std::get_if<CheckpointEvent>(&record)) {
    ++model_.checkpoint_events;
    const std::size_t before = tree.node_count();
    tree.apply_checkpoint(*cp, model_.declarations, position);
    live_units_ += tree.node_count() - before;
  } else {
    const auto& a = std::get<MemoryAccessEvent>(record);
    ++model_.memory_events;
    tree.iterator_vector(iters_);
    ReferenceState& s = tree.locate_reference(a.instruction_address);
    if (s.exec_count == 0) {
      s = init_reference(iters_, a.memory_address, a.kind, model_.config.footprint_cap);
      live_units_ += state_units(s);
    } else {
      const std::size_t before = s.footprint.size();
      observe_access(s, iters_, a.memory_address, a.kind);
      live_units_ += s.footprint.size() - before;
    }
  }
  peak_ = std::max(peak_, live_state());
}

ForayModel Analyzer::finish() {
  ForayModel& m = model_;
  m.tree->close_all();
  m.peak_live_state = peak_;

  for_each_node(m.tree->root(), [&](const LoopNode& n) {
    for (const auto& entry : n.references()) {
      const ReferenceState& s = entry.state;
      ReferenceResult r;
      r.node = &n;
      r.instruction_address = entry.instruction_address;
      r.expression = finalize_expression(s);
      r.exec_count = s.exec_count;
      r.footprint = s.footprint.size();
      r.reads = s.reads;
      r.writes = s.writes;
      r.mispredictions = s.mispredictions;
      m.references.push_back(std::move(r));
    }
  });
  purge(m.references, m.config);

  // Stats. Footprints are unions of distinct addresses within each category.
  std::unordered_set<std::uint64_t> all, inc, pur, non;
  auto add = [](CategoryStats& c, std::unordered_set<std::uint64_t>& set,
                const ReferenceResult& r, const Footprint& fp) {
    ++c.references;
    c.accesses += r.exec_count;
    set.insert(fp.addresses().begin(), fp.addresses().end());
  };
  std::size_t idx = 0;
  for_each_node(m.tree->root(), [&](const LoopNode& n) {
    for (const auto& entry : n.references()) {
      const ReferenceResult& r = m.references[idx++];
      add(m.stats.total, all, r, entry.state.footprint);
      switch (r.category()) {
        case Category::included: add(m.stats.included, inc, r, entry.state.footprint); break;
        case Category::purged: add(m.stats.purged, pur, r, entry.state.footprint); break;
        case Category::non_analyzable:
          add(m.stats.non_analyzable, non, r, entry.state.footprint);
          break;
      }
    }
  });
  m.stats.total.footprint = all.size();
  m.stats.included.footprint = inc.size();
  m.stats.purged.footprint = pur.size();
  m.stats.non_analyzable.footprint = non.size();

  std::set<std::uint64_t> static_loops;
  for_each_node(m.tree->root(), [&](const LoopNode& n) {
    if (!n.is_root()) static_loops.insert(n.loop_id());
  });
  m.stats.static_loops = static_loops.size();
  m.stats.loop_nodes = m.tree->node_count();
  std::unordered_set<const LoopNode*> in_model;
  for (const auto& r : m.references)
    if (r.surviving())
      for (const LoopNode* n : emitted_nest(r)) in_model.insert(n);
  m.stats.model_loops = in_model.size();

  m.hints = inlining_hints(m);

  m.notes.push_back(
      "coefficient solve subtracts sum C_i*(IT_i-ITP_i) over changed iterators with known "
      "coefficients (delta form)");
  m.notes.push_back("partial expressions report the constant term of their first slice");
  for (const auto& r : m.references) {
    const auto* e = r.affine();
    if (r.surviving() && e && e->partial) {
      m.notes.push_back("partial expressions present: constant term varies with outer loops");
      break;
    }
  }
  return std::move(model_);
}

ForayModel analyze(TraceReader& reader, const FilterConfig& cfg) {
  Analyzer a(cfg);
  while (auto rec = reader.next()) a.feed(*rec, reader.line());
  return a.finish();
}

ForayModel analyze(std::span<const TraceRecord> records, const FilterConfig& cfg) {
  Analyzer a(cfg);
  std::uint64_t pos = 0;
  for (const auto& r : records) a.feed(r, ++pos);
  return a.finish();
}

}  // namespace foray
