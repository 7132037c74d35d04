#ifndef QOSEC_CLI_HPP
#define QOSEC_CLI_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace qosec {

// Stable build identifier stamped into every output file's provenance
// header. Deliberately free of timestamps so reruns are byte-identical.
inline constexpr const char* kBuildId = "qosec 0.1.0";

// Exit codes shared by the binary and by in-process callers (tests).
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitInfeasible = 3;
inline constexpr int kExitNumerical = 4;

// Runs one command-line invocation; `args` is argv without the program
// name. All regular output goes to `out`, diagnostics to `err`. Returns the
// process exit code per the constants above.
int cli_main(const std::vector<std::string>& args, std::ostream& out,
             std::ostream& err);

} // namespace qosec

#endif
