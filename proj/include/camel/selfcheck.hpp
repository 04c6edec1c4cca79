#pragma once

#include <string>
#include <vector>

namespace camel {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

// Fast invariant suite: gradient checks on a tiny two-stream model, the MMD
// estimator against a brute-force oracle, softmax/routing simplex checks,
// attention weight normalization and the tuner's add gate.
std::vector<CheckResult> run_self_checks();

}  // namespace camel
