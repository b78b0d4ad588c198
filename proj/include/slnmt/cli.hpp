#pragma once

namespace slnmt {

// Full command-line surface. Returns the process exit status:
// 0 success, 1 runtime failure, 2 usage error.
int run_cli(int argc, const char* const* argv);

}  // namespace slnmt
