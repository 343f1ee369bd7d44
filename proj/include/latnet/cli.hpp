#pragma once

namespace latnet {

// Entry point for the latnet tool. Exit codes: 0 success, 1 runtime error,
// 2 flag validation failure.
int run_cli(int argc, const char* const* argv);

}  // namespace latnet
