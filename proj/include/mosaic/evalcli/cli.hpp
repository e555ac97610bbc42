#pragma once

#include <iosfwd>

namespace mosaic::evalcli {

enum ExitCode : int {
  kExitOk = 0,
  kExitInternal = 1,
  kExitBadConfig = 2,
  kExitMissingCheckpoint = 3,
  kExitIo = 4,
  kExitTraining = 5,
  kExitSelftest = 6,
};

// Entry point of the `mosaic` tool. Progress goes to `out`; on failure a
// single-line JSON error record {"error", "message", "exit_code"} goes to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mosaic::evalcli
