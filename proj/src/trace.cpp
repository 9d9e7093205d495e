#include "foray/trace.hpp"

#include <charconv>
#include <istream>

#include "foray/error.hpp"

namespace foray {

namespace {

bool is_blank(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_blank(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_blank(s.back())) s.remove_suffix(1);
  return s;
}

// Minimal cursor over one trace line. Every accessor returns false on
// mismatch; the caller turns that into a single "malformed record" error.
class Cursor {
 public:
  explicit Cursor(std::string_view s) : s_(s) {}

  bool literal(std::string_view lit) {
    if (s_.substr(0, lit.size()) != lit) return false;
    s_.remove_prefix(lit.size());
    return true;
  }

  bool blanks() {
    if (s_.empty() || !is_blank(s_.front())) return false;
    while (!s_.empty() && is_blank(s_.front())) s_.remove_prefix(1);
    return true;
  }

  bool number(std::uint64_t& out, int base) {
    if (s_.empty()) return false;
    const char* first = s_.data();
    const char* last = first + s_.size();
    auto [ptr, ec] = std::from_chars(first, last, out, base);
    if (ec != std::errc{} || ptr == first) return false;
    s_.remove_prefix(static_cast<std::size_t>(ptr - first));
    return true;
  }

  bool done() const { return s_.empty(); }

 private:
  std::string_view s_;
};

std::optional<TraceRecord> parse_loop(Cursor c) {
  LoopDeclaration d;
  if (c.blanks() && c.number(d.loop_id, 10) && c.blanks() && c.literal("begin=") &&
      c.number(d.begin_id, 10) && c.blanks() && c.literal("body=") &&
      c.number(d.body_begin_id, 10) && c.blanks() && c.literal("end=") &&
      c.number(d.body_end_id, 10) && c.done())
    return d;
  return std::nullopt;
}

std::optional<TraceRecord> parse_checkpoint(Cursor c) {
  CheckpointEvent e;
  if (c.blanks() && c.number(e.checkpoint_id, 10) && c.done()) return e;
  return std::nullopt;
}

std::optional<TraceRecord> parse_access(Cursor c) {
  MemoryAccessEvent e;
  if (!(c.blanks() && c.number(e.instruction_address, 16) && c.blanks() &&
        c.literal("addr:") && c.blanks() && c.number(e.memory_address, 16) &&
        c.blanks()))
    return std::nullopt;
  if (c.literal("wr"))
    e.kind = AccessKind::write;
  else if (c.literal("rd"))
    e.kind = AccessKind::read;
  else
    return std::nullopt;
  if (!c.done()) return std::nullopt;
  return e;
}

void append_hex(std::string& out, std::uint64_t v) {
  char buf[17];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, 16);
  out.append(buf, ptr);
}

}  // namespace

std::optional<TraceRecord> parse_trace_line(std::string_view line,
                                            std::uint64_t line_no) {
  std::string_view body = trim(line);
  if (body.empty()) return std::nullopt;

  Cursor c(body);
  std::optional<TraceRecord> rec;
  if (c.literal("Checkpoint:"))
    rec = parse_checkpoint(c);
  else if (c.literal("Instr:"))
    rec = parse_access(c);
  else if (c.literal("Loop:"))
    rec = parse_loop(c);

  if (!rec) throw TraceError(line_no, "malformed record: '" + std::string(body) + "'");
  return rec;
}

std::string encode_record(const TraceRecord& record) {
  std::string out;
  if (const auto* d = std::get_if<LoopDeclaration>(&record)) {
    out = "Loop: " + std::to_string(d->loop_id) + " begin=" + std::to_string(d->begin_id) +
          " body=" + std::to_string(d->body_begin_id) + " end=" +
          std::to_string(d->body_end_id);
  } else if (const auto* cp = std::get_if<CheckpointEvent>(&record)) {
    out = "Checkpoint: " + std::to_string(cp->checkpoint_id);
  } else {
    const auto& a = std::get<MemoryAccessEvent>(record);
    out = "Instr: ";
    append_hex(out, a.instruction_address);
    out += " addr: ";
    append_hex(out, a.memory_address);
    out += a.kind == AccessKind::write ? " wr" : " rd";
  }
  return out;
}

void DeclarationTable::add(const LoopDeclaration& decl, std::uint64_t line_no) {
  if (decl.begin_id == decl.body_begin_id || decl.begin_id == decl.body_end_id ||
      decl.body_begin_id == decl.body_end_id)
    throw TraceError(line_no, "loop " + std::to_string(decl.loop_id) +
                                  ": checkpoint ids must be pairwise distinct");
  if (loops_.count(decl.loop_id))
    throw TraceError(line_no, "loop " + std::to_string(decl.loop_id) + " declared twice");
  for (std::uint64_t id : {decl.begin_id, decl.body_begin_id, decl.body_end_id}) {
    if (bindings_.count(id))
      throw TraceError(line_no, "checkpoint " + std::to_string(id) +
                                    " already bound by another loop");
  }
  bindings_[decl.begin_id] = {decl.loop_id, CheckpointRole::begin};
  bindings_[decl.body_begin_id] = {decl.loop_id, CheckpointRole::body_begin};
  bindings_[decl.body_end_id] = {decl.loop_id, CheckpointRole::body_end};
  loops_[decl.loop_id] = decl;
}

const CheckpointBinding* DeclarationTable::lookup(std::uint64_t checkpoint_id) const {
  auto it = bindings_.find(checkpoint_id);
  return it == bindings_.end() ? nullptr : &it->second;
}

const LoopDeclaration* DeclarationTable::loop(std::uint64_t loop_id) const {
  auto it = loops_.find(loop_id);
  return it == loops_.end() ? nullptr : &it->second;
}

std::optional<TraceRecord> TraceReader::next() {
  while (std::getline(in_, buffer_)) {
    ++line_;
    auto rec = parse_trace_line(buffer_, line_);
    if (!rec) continue;

    if (const auto* d = std::get_if<LoopDeclaration>(&*rec)) {
      if (seen_event_) throw TraceError(line_, "loop declaration after first event");
      decls_.add(*d, line_);
    } else {
      seen_event_ = true;
      if (const auto* cp = std::get_if<CheckpointEvent>(&*rec);
          cp && !decls_.lookup(cp->checkpoint_id))
        throw TraceError(line_, "undeclared checkpoint " + std::to_string(cp->checkpoint_id));
    }
    return rec;
  }
  return std::nullopt;
}

}  // namespace foray
