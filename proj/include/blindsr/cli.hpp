#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace blindsr {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // runtime failure
inline constexpr int kExitUsage = 2;    // malformed flags or invalid configuration

/// Routes `args` (without the program name) to a subcommand:
/// degrade, train, eval, analyze-freq, analyze-entropy, analyze-ddr,
/// verify-lemma, verify-gradcheck. Returns the process exit status.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace blindsr
