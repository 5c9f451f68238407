#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace psqe {

/// Entry point of the psqe command-line tool. `args` excludes the program name.
/// Returns 0 on success, 1 on data errors, 2 on configuration or usage errors.
int cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace psqe
