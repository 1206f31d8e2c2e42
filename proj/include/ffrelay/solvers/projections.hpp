#pragma once

#include "ffrelay/numkit.hpp"

namespace ffrelay::solvers {

// Euclidean projection onto {p >= 0, sum(p) <= budget}.
numkit::RVector project_power_halfspace(const numkit::RVector& p, double budget);

// Euclidean projection onto {r : r^H Q r <= budget} for Hermitian positive
// definite Q. Solves the secular equation for the multiplier on the
// eigenbasis of Q; the returned point satisfies the budget exactly.
numkit::CVector project_ellipsoid(const numkit::CVector& r, const numkit::CMatrix& q, double budget);

}  // namespace ffrelay::solvers
