#pragma once

#include <iosfwd>

namespace voxelcast {

/// Entry point of the `voxelcast` command. Returns the process exit status:
/// 0 on success, 1 on a runtime failure, 2 on a usage error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace voxelcast
