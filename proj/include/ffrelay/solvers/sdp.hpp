#pragma once

#include <vector>

#include "ffrelay/numkit.hpp"

namespace ffrelay::solvers {

using numkit::CMatrix;
using numkit::Index;
using numkit::RVector;

enum class Sense { ge, le, eq };

struct SdpConstraint {
    CMatrix a;
    double b = 0.0;
    Sense sense = Sense::ge;
};

// minimize tr(C X) subject to tr(A_i X) {>=, <=, =} b_i and X PSD (Hermitian)
struct SdpProblem {
    CMatrix c;
    std::vector<SdpConstraint> constraints;
    Index dim() const { return c.rows(); }
};

enum class SdpStatus { optimal, infeasible, max_iter };

struct KktResiduals {
    double primal = 0.0;  // worst constraint violation / (1 + |b_i|), and PSD violation of X
    double dual = 0.0;    // PSD violation of C - sum y_i A_i and sign violations of the multipliers
    double gap = 0.0;     // |primal obj - dual obj| / (1 + |primal obj| + |dual obj|)
};

struct SdpSolution {
    CMatrix x;
    double objective = 0.0;
    double dual_objective = 0.0;
    // Multiplier per constraint, reported nonnegative for inequalities
    // (>= and <= alike); equality multipliers are signed.
    RVector duals;
    SdpStatus status = SdpStatus::max_iter;
    KktResiduals kkt;
    int iterations = 0;
};

struct SdpOptions {
    double tol = 1e-8;
    int max_iter = 200;
};

// Primal-dual interior point (HKM direction, Mehrotra predictor-corrector)
// on the real symmetric embedding phi(A) = [[Re A, -Im A], [Im A, Re A]].
// Since tr(A X) = tr(phi(A) phi(X)) / 2, each complex constraint becomes
// <phi(A)/2, Y> on a real 2n x 2n variable Y, and the complex solution is
// read back as X = (Y11 + Y22)/2 + j (Y21 - Y12)/2.
SdpSolution solve_sdp(const SdpProblem& problem, const SdpOptions& options = {});

// Evaluates the KKT residuals of a candidate (X, multipliers) pair for problem.
KktResiduals sdp_kkt(const SdpProblem& problem, const CMatrix& x, const RVector& duals);

// Real-embedding helpers, exposed for tests.
numkit::RMatrix real_embed(const CMatrix& a);
CMatrix real_extract(const numkit::RMatrix& y);

}  // namespace ffrelay::solvers
