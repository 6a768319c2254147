#ifndef EMBEDFUSE_TOOLS_CLI_HPP
#define EMBEDFUSE_TOOLS_CLI_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace embedfuse::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/**
 * Runs one subcommand. `args` excludes the program name.
 *
 * Exit codes: 0 on success, 1 for data or I/O errors at run time, 2 for usage
 * and configuration errors. Failures print a single JSON line
 * {"error": kind, "field"?: name, "message": text} to `err`.
 */
int execute(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace embedfuse::cli

#endif
