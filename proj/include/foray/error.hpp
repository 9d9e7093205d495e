#ifndef FORAY_ERROR_HPP
#define FORAY_ERROR_HPP

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace foray {

/// Malformed trace text or a violated trace-format rule (header order,
/// undeclared checkpoint). `line()` is 1-based; 0 when the record did not
/// come from a text stream.
class TraceError : public std::runtime_error {
 public:
  TraceError(std::uint64_t line, const std::string& what)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what
                                : what),
        line_(line) {}

  std::uint64_t line() const noexcept { return line_; }

 private:
  std::uint64_t line_;
};

/// A checkpoint stream that cannot describe a loop nest (body checkpoint for
/// a loop that is not currently active).
class StructuralError : public TraceError {
 public:
  using TraceError::TraceError;
};

/// Workload specification failed validation. Each issue is prefixed with the
/// JSON path of the offending field.
class SpecError : public std::runtime_error {
 public:
  explicit SpecError(std::vector<std::string> issues)
      : std::runtime_error(join(issues)), issues_(std::move(issues)) {}

  const std::vector<std::string>& issues() const noexcept { return issues_; }

 private:
  static std::string join(const std::vector<std::string>& issues) {
    std::string out = "invalid workload spec";
    for (const auto& i : issues) out += "\n  " + i;
    return out;
  }

  std::vector<std::string> issues_;
};

}  // namespace foray

#endif  // FORAY_ERROR_HPP
