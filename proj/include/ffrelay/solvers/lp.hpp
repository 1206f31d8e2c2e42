#pragma once

#include <vector>

#include "ffrelay/numkit.hpp"

namespace ffrelay::solvers {

enum class LpSense { le, ge, eq };

struct LpConstraint {
    numkit::RVector a;
    LpSense sense = LpSense::le;
    double b = 0.0;
};

enum class LpStatus { optimal, infeasible, unbounded };

struct LpResult {
    numkit::RVector x;
    double objective = 0.0;
    LpStatus status = LpStatus::infeasible;
};

// maximize c^T x subject to the constraints and x >= 0.
// Dense two-phase tableau simplex with Bland's rule.
LpResult solve_lp(const numkit::RVector& c, const std::vector<LpConstraint>& constraints);

}  // namespace ffrelay::solvers
