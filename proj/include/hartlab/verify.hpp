#pragma once

#include <string>
#include <vector>

#include "hartlab/harness.hpp"

namespace hartlab {

// One invariant check: `value` is the measured quantity, `bound` the pinned
// tolerance it must stay under.  Informational rows (hard = false) report a
// constant without gating the suite.
struct CheckResult {
    std::string name;
    double value = 0.0;
    double bound = 0.0;
    bool hard = true;
    bool passed = true;
};

struct VerifyReport {
    std::string module;
    std::vector<CheckResult> checks;

    bool passed() const;
    std::string table() const;  // one line per check
    std::string to_json() const;
};

// module: space | dyadic | haar | operators | constants | corona | harness | all
VerifyReport run_verify(const Scenario& sc, const std::string& module);

}  // namespace hartlab
