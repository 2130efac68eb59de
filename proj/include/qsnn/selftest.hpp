#pragma once

#include <string>
#include <vector>

namespace qsnn {

struct SelfCheck {
  std::string name;
  bool pass = false;
  std::string detail;
};

// Quick internal consistency checks (seconds, no data files): quantizer
// grid, noise mean, micro-net equivalence at T = 1, charge conservation and
// the unevenness demo.
std::vector<SelfCheck> run_selftest();

}  // namespace qsnn
