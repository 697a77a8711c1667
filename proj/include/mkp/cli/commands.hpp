#pragma once

namespace mkp {

// Entry point of the `mkp` tool. Returns 0 on success, 2 on usage errors and
// 1 when a command fails.
int run_cli(int argc, char** argv);

}  // namespace mkp
