#pragma once

#include <iosfwd>

namespace mosaic::evalcli {

struct SelftestSummary {
  int passed = 0;
  int failed = 0;
};

// Fast invariant suite on a tiny model: top-r ordering, selection partition,
// single-condition degeneracy, flow endpoints, Fourier algebra, SSIM
// identities, zero-init sampling equivalence and checkpoint round trip.
// Writes one "PASS <name>" / "FAIL <name>: <reason>" line per check.
SelftestSummary run_selftest(std::ostream& log);

}  // namespace mosaic::evalcli
