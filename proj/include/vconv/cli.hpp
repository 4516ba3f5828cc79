#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace vconv {

/// Runs one command (`args` excludes the program name). Reports go to `out`
/// as single JSON lines, errors to `err` as JSON lines. Returns 0 on success,
/// 2 on I/O or parse errors, 3 on precondition or math-domain violations.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace vconv
