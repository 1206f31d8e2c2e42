#include "ffrelay/solvers/bisect.hpp"

#include <cmath>
#include <string>

namespace ffrelay::solvers {

int bisect_iterations(double lo, double hi, double eps) {
    const double ratio = (hi - lo) / eps;
    if (ratio <= 1.0) {
        return 0;
    }
    return static_cast<int>(std::ceil(std::log2(ratio)));
}

BisectResult bisect(const std::function<bool(double)>& feasible, double lo, double hi, double eps,
                    bool bracket_verified) {
    if (!(eps > 0.0)) {
        throw std::invalid_argument("bisect: eps must be positive");
    }
    if (!(lo < hi)) {
        throw BracketError("bisect: need lo < hi; widen the bracket");
    }
    if (!bracket_verified) {
        if (!feasible(lo)) {
            throw BracketError("bisect: lower end " + std::to_string(lo) + " is infeasible; lower the bracket");
        }
        if (feasible(hi)) {
            throw BracketError("bisect: upper end " + std::to_string(hi) + " is feasible; widen the bracket");
        }
    }
    BisectResult res;
    res.iterations = bisect_iterations(lo, hi, eps);
    for (int i = 0; i < res.iterations; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (feasible(mid)) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    res.tau = lo;
    res.upper = hi;
    return res;
}

}  // namespace ffrelay::solvers
