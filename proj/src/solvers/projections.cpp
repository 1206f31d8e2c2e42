#include "ffrelay/solvers/projections.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace ffrelay::solvers {

using numkit::CMatrix;
using numkit::CVector;
using numkit::Index;
using numkit::RVector;

RVector project_power_halfspace(const RVector& p, double budget) {
    if (!(budget >= 0.0)) {
        throw numkit::ContractViolation("project_power_halfspace: budget must be nonnegative");
    }
    RVector clipped = p.cwiseMax(0.0);
    if (clipped.sum() <= budget) {
        return clipped;
    }
    // simplex {q >= 0, sum q = budget}: q = max(p - theta, 0)
    std::vector<double> sorted(p.data(), p.data() + p.size());
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    double cumulative = 0.0;
    double theta = 0.0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        cumulative += sorted[i];
        const double candidate = (cumulative - budget) / static_cast<double>(i + 1);
        if (i + 1 == sorted.size() || sorted[i + 1] <= candidate) {
            theta = candidate;
            break;
        }
    }
    RVector out = (p.array() - theta).cwiseMax(0.0);
    // absorb rounding so the sum never exceeds the budget
    const double total = out.sum();
    if (total > budget && total > 0.0) {
        out *= budget / total;
    }
    return out;
}

CVector project_ellipsoid(const CVector& r, const CMatrix& q, double budget) {
    if (q.rows() != r.size() || q.cols() != r.size()) {
        throw numkit::DimensionError("project_ellipsoid: size mismatch");
    }
    if (!(budget >= 0.0)) {
        throw numkit::ContractViolation("project_ellipsoid: budget must be nonnegative");
    }
    const double level = numkit::quad_form(q, r);
    if (level <= budget) {
        return r;
    }
    const auto eig = numkit::hermitian_eig(q);
    if (!(eig.values.minCoeff() > 0.0)) {
        throw numkit::ContractViolation("project_ellipsoid: matrix must be positive definite");
    }
    if (budget == 0.0) {
        return CVector::Zero(r.size());
    }
    const CVector c = eig.vectors.adjoint() * r;
    const RVector w = c.cwiseAbs2();
    const RVector& lam = eig.values;
    // h(mu) = sum lam_i |c_i|^2 / (1 + mu lam_i)^2 decreases from level to 0
    auto h = [&](double mu) {
        double acc = 0.0;
        for (Index i = 0; i < lam.size(); ++i) {
            const double d = 1.0 + mu * lam(i);
            acc += lam(i) * w(i) / (d * d);
        }
        return acc;
    };
    double lo = 0.0;
    double hi = 1.0 / lam.minCoeff();
    while (h(hi) > budget) {
        lo = hi;
        hi *= 2.0;
    }
    for (int iter = 0; iter < 200; ++iter) {
        const double mid = 0.5 * (lo + hi);
        if (h(mid) > budget) {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo <= 1e-15 * hi) {
            break;
        }
    }
    CVector scaled(c.size());
    for (Index i = 0; i < c.size(); ++i) {
        scaled(i) = c(i) / (1.0 + hi * lam(i));
    }
    CVector out = eig.vectors * scaled;
    for (int guard = 0; guard < 8; ++guard) {
        const double final_level = numkit::quad_form(q, out);
        if (final_level <= budget) {
            break;
        }
        out *= std::sqrt(budget / final_level) * (1.0 - 1e-15);
    }
    return out;
}

}  // namespace ffrelay::solvers
