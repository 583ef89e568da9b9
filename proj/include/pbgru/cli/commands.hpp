// SPDX-License-Identifier: Apache-2.0
//
// The `pbgru` command line: build-graphs, synth, train, evaluate, predict,
// sweep-k, ablate and gradcheck.
#pragma once

#include <iosfwd>

namespace pbgru::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitInternal = 1,
  kExitConfig = 2,
  kExitData = 3,
  kExitNumeric = 4,
  kExitCheckFailed = 5,
};

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace pbgru::cli
