#pragma once

#include <complex>
#include <random>

#include "ffrelay/model.hpp"

namespace testsupport {

using ffrelay::numkit::CMatrix;
using ffrelay::numkit::CVector;
using ffrelay::numkit::RVector;
using ffrelay::numkit::cplx;
using ffrelay::numkit::Index;

inline CVector crandn(std::mt19937_64& gen, Index n, double var = 1.0) {
    std::normal_distribution<double> nd(0.0, std::sqrt(var / 2.0));
    CVector v(n);
    for (Index i = 0; i < n; ++i) {
        v(i) = cplx(nd(gen), nd(gen));
    }
    return v;
}

inline CMatrix crandm(std::mt19937_64& gen, Index rows, Index cols) {
    CMatrix m(rows, cols);
    for (Index j = 0; j < cols; ++j) {
        m.col(j) = crandn(gen, rows);
    }
    return m;
}

inline RVector runif(std::mt19937_64& gen, Index n, double lo, double hi) {
    std::uniform_real_distribution<double> ud(lo, hi);
    RVector v(n);
    for (Index i = 0; i < n; ++i) {
        v(i) = ud(gen);
    }
    return v;
}

inline double rel_err(const CMatrix& a, const CMatrix& b) {
    const double scale = std::max(a.norm(), b.norm());
    return scale == 0.0 ? 0.0 : (a - b).norm() / scale;
}

inline double rel_err(double a, double b) {
    const double scale = std::max(std::abs(a), std::abs(b));
    return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

// channel pair printed with the notch-filling example
inline CVector fixture_f() {
    CVector f(3);
    f << cplx(-0.0477, 0.7546), cplx(0.1938, 0.2019), cplx(-0.4832, -0.2111);
    return f;
}

inline CVector fixture_g() {
    CVector g(3);
    g << cplx(-0.8370, -0.2463), cplx(-0.3438, 0.1734), cplx(-0.5136, 0.4147);
    return g;
}

inline ffrelay::model::SystemConfig small_config(int n, int lf, int lg, int lr) {
    ffrelay::model::SystemConfig cfg;
    cfg.n_sub = n;
    cfg.lf = lf;
    cfg.lg = lg;
    cfg.lr = lr;
    return cfg;
}

}  // namespace testsupport
