#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dicomdrm::cli {

/// Environment variable naming a policy file that replaces the built-in one.
inline constexpr const char* policy_env_var = "DICOMDRM_POLICY";

/**
 * Run one command line. `args` excludes the program name.
 *
 * Returns 0 on success, 1 on a domain error (one diagnostic line on `err`),
 * 2 on a usage error. Output files are staged next to their destination and
 * renamed into place only once everything succeeded.
 */
auto run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) -> int;

}  // namespace dicomdrm::cli
