#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace entrain {

/// Outcome of one numerical check. `worst_margin` is the largest observed
/// violation amount; a check passes when it is <= 0 (so negative margins
/// measure slack). `location` is the time at which the worst margin occurred.
struct CheckResult {
    std::string name;
    bool pass = true;
    double worst_margin = -INFINITY;
    double location = NAN;
    std::string detail;

    bool saw_nan = false;

    void observe(double margin, double t) {
        if (std::isnan(margin)) {
            saw_nan = true;
            location = t;
        } else if (margin > worst_margin) {
            worst_margin = margin;
            location = t;
        }
    }

    /// Sets pass from the accumulated margin against `allowance`.
    CheckResult& settle(double allowance = 0.0) {
        pass = !saw_nan && worst_margin <= allowance;
        return *this;
    }
};

inline bool all_pass(const std::vector<CheckResult>& checks) {
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.pass; });
}

}  // namespace entrain
