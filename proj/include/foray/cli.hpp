#ifndef FORAY_CLI_HPP
#define FORAY_CLI_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace foray::cli {

/// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kFailure = 1;  // analysis / validation / check mismatch
inline constexpr int kIoError = 2;  // I/O, trace format, bad flags

/// Runs `foray <subcommand> ...`. `args` excludes the program name. `in` is
/// what "--trace -" reads.
int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
        std::ostream& err);

}  // namespace foray::cli

#endif  // FORAY_CLI_HPP
