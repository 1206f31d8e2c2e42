#pragma once

#include <functional>
#include <stdexcept>

namespace ffrelay::solvers {

class BracketError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct BisectResult {
    double tau = 0.0;    // last feasible point
    double upper = 0.0;  // last infeasible point
    int iterations = 0;
};

// Largest feasible tau for a monotone predicate (true below the threshold).
// Requires feasible(lo) and !feasible(hi); both ends are probed unless the
// caller already established them. Runs exactly ceil(log2((hi - lo) / eps))
// halvings.
BisectResult bisect(const std::function<bool(double)>& feasible, double lo, double hi, double eps,
                    bool bracket_verified = false);

int bisect_iterations(double lo, double hi, double eps);

}  // namespace ffrelay::solvers
