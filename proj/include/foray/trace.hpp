#ifndef FORAY_TRACE_HPP
#define FORAY_TRACE_HPP

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

namespace foray {

enum class AccessKind : std::uint8_t { read, write };

struct CheckpointEvent {
  std::uint64_t checkpoint_id = 0;

  friend bool operator==(const CheckpointEvent&, const CheckpointEvent&) = default;
};

/// One executed load or store. `instruction_address` is the identity of the
/// static reference; `memory_address` is the byte address it touched.
struct MemoryAccessEvent {
  std::uint64_t instruction_address = 0;
  std::uint64_t memory_address = 0;
  AccessKind kind = AccessKind::read;

  friend bool operator==(const MemoryAccessEvent&, const MemoryAccessEvent&) = default;
};

/// Header record binding three checkpoint ids to the roles they play for
/// one static loop.
struct LoopDeclaration {
  std::uint64_t loop_id = 0;
  std::uint64_t begin_id = 0;
  std::uint64_t body_begin_id = 0;
  std::uint64_t body_end_id = 0;

  friend bool operator==(const LoopDeclaration&, const LoopDeclaration&) = default;
};

using TraceRecord = std::variant<LoopDeclaration, CheckpointEvent, MemoryAccessEvent>;

/// Decodes one line of the text trace format:
///
///   Loop: <dec> begin=<dec> body=<dec> end=<dec>
///   Checkpoint: <dec>
///   Instr: <hex> addr: <hex> <wr|rd>
///
/// Returns std::nullopt for a blank line. Throws TraceError (tagged with
/// `line_no`) for anything else that does not match the grammar.
std::optional<TraceRecord> parse_trace_line(std::string_view line,
                                            std::uint64_t line_no = 0);

/// Inverse of parse_trace_line. Hex fields are lowercase without leading
/// zeros; no trailing newline.
std::string encode_record(const TraceRecord& record);

enum class CheckpointRole : std::uint8_t { begin, body_begin, body_end };

struct CheckpointBinding {
  std::uint64_t loop_id = 0;
  CheckpointRole role = CheckpointRole::begin;
};

/// Checkpoint id -> (loop, role) map built from the trace header.
class DeclarationTable {
 public:
  /// Throws TraceError if the declaration reuses a loop id or any checkpoint
  /// id already bound, or if its three ids are not pairwise distinct.
  void add(const LoopDeclaration& decl, std::uint64_t line_no = 0);

  const CheckpointBinding* lookup(std::uint64_t checkpoint_id) const;
  const LoopDeclaration* loop(std::uint64_t loop_id) const;

  std::size_t size() const noexcept { return loops_.size(); }
  bool empty() const noexcept { return loops_.empty(); }

 private:
  std::unordered_map<std::uint64_t, CheckpointBinding> bindings_;
  std::unordered_map<std::uint64_t, LoopDeclaration> loops_;
};

/// Pull-based single-pass reader over a text trace. Holds at most one line
/// in memory. Enforces the header rule (declarations before events) and
/// rejects checkpoints that no declaration binds.
class TraceReader {
 public:
  explicit TraceReader(std::istream& in) : in_(in) {}

  /// Next record, or std::nullopt at end of input. Blank lines are skipped.
  std::optional<TraceRecord> next();

  /// 1-based number of the last line read.
  std::uint64_t line() const noexcept { return line_; }

  const DeclarationTable& declarations() const noexcept { return decls_; }

 private:
  std::istream& in_;
  std::string buffer_;
  std::uint64_t line_ = 0;
  bool seen_event_ = false;
  DeclarationTable decls_;
};

}  // namespace foray

#endif  // FORAY_TRACE_HPP
