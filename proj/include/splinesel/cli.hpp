#pragma once

namespace splinesel {

/// Exit codes: 0 success, 2 usage or configuration error, 3 numerical or I/O failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitFailure = 3;

int run_cli(int argc, char** argv);

}  // namespace splinesel
