#include "ffrelay/solvers/sdp.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

namespace ffrelay::solvers {

using numkit::cplx;
using numkit::RMatrix;

RMatrix real_embed(const CMatrix& a) {
    const Index n = a.rows();
    RMatrix out(2 * n, 2 * n);
    out.topLeftCorner(n, n) = a.real();
    out.topRightCorner(n, n) = -a.imag();
    out.bottomLeftCorner(n, n) = a.imag();
    out.bottomRightCorner(n, n) = a.real();
    return out;
}

CMatrix real_extract(const RMatrix& y) {
    const Index n = y.rows() / 2;
    CMatrix x(n, n);
    x.real() = 0.5 * (y.topLeftCorner(n, n) + y.bottomRightCorner(n, n));
    x.imag() = 0.5 * (y.bottomLeftCorner(n, n) - y.topRightCorner(n, n));
    return numkit::hermitian_part(x);
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// min <C, X> + cl^T xl  s.t.  <A_i, X> + G(i,:) xl = b_i,  X PSD,  xl >= 0
struct RealProblem {
    Index m = 0;
    std::vector<RMatrix> a;
    RMatrix g;
    RVector b;
    RMatrix c;
    RVector cl;
};

struct RealIterate {
    RMatrix x, z;
    RVector xl, zl, y;
    int iterations = 0;
    bool converged = false;
};

RMatrix sym(const RMatrix& m) {
    return 0.5 * (m + m.transpose());
}

RVector apply_a(const RealProblem& p, const RMatrix& m) {
    RVector out(p.a.size());
    for (std::size_t i = 0; i < p.a.size(); ++i) {
        out(static_cast<Index>(i)) = p.a[i].cwiseProduct(m).sum();
    }
    return out;
}

RMatrix apply_at(const RealProblem& p, const RVector& y) {
    RMatrix out = RMatrix::Zero(p.m, p.m);
    for (std::size_t i = 0; i < p.a.size(); ++i) {
        out += y(static_cast<Index>(i)) * p.a[i];
    }
    return out;
}

double max_step_psd(const RMatrix& x, const RMatrix& dx) {
    Eigen::LLT<RMatrix> llt(x);
    if (llt.info() != Eigen::Success) {
        return 0.0;
    }
    RMatrix w = llt.matrixL().solve(dx);
    w = llt.matrixL().solve(w.transpose()).transpose();
    Eigen::SelfAdjointEigenSolver<RMatrix> es(sym(w), Eigen::EigenvaluesOnly);
    const double lam = es.eigenvalues()(0);
    return lam >= 0.0 ? kInf : -1.0 / lam;
}

double max_step_lp(const RVector& x, const RVector& dx) {
    double step = kInf;
    for (Index i = 0; i < x.size(); ++i) {
        if (dx(i) < 0.0) {
            step = std::min(step, -x(i) / dx(i));
        }
    }
    return step;
}

using AcceptFn = std::function<bool(const RealIterate&)>;

RealIterate interior_point(const RealProblem& p, double tol, int max_iter, const AcceptFn& accept) {
    const Index m = p.m;
    const Index ncon = static_cast<Index>(p.a.size());
    const Index nlp = p.cl.size();
    const double nu = static_cast<double>(m + nlp);

    double max_a = 0.0;
    double ratio = 0.0;
    for (Index i = 0; i < ncon; ++i) {
        const double an = std::sqrt(p.a[i].squaredNorm() + p.g.row(i).squaredNorm());
        max_a = std::max(max_a, an);
        ratio = std::max(ratio, (1.0 + std::abs(p.b(i))) / (1.0 + an));
    }
    const double xi = std::max({10.0, std::sqrt(nu), nu * ratio});
    const double eta = std::max({10.0, std::sqrt(nu), max_a, p.c.norm(), p.cl.norm()});

    RealIterate it;
    it.x = xi * RMatrix::Identity(m, m);
    it.z = eta * RMatrix::Identity(m, m);
    it.xl = RVector::Constant(nlp, xi);
    it.zl = RVector::Constant(nlp, eta);
    it.y = RVector::Zero(ncon);

    const double bnorm = p.b.norm();
    const double cnorm = std::sqrt(p.c.squaredNorm() + p.cl.squaredNorm());
    int stalls = 0;

    for (int iter = 0; iter <= max_iter; ++iter) {
        it.iterations = iter;
        const RVector rp = p.b - apply_a(p, it.x) - p.g * it.xl;
        const RMatrix rd = p.c - apply_at(p, it.y) - it.z;
        const RVector rdl = p.cl - p.g.transpose() * it.y - it.zl;
        const double pobj = p.c.cwiseProduct(it.x).sum() + p.cl.dot(it.xl);
        const double dobj = p.b.dot(it.y);
        const double relgap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
        const double pinf = rp.norm() / (1.0 + bnorm);
        const double dinf = std::sqrt(rd.squaredNorm() + rdl.squaredNorm()) / (1.0 + cnorm);
        if (relgap <= tol && pinf <= tol && dinf <= tol && accept(it)) {
            it.converged = true;
            return it;
        }
        if (iter == max_iter || !std::isfinite(pobj) || !std::isfinite(dobj) || it.x.norm() > 1e14 ||
            it.y.norm() > 1e14) {
            return it;
        }

        Eigen::LLT<RMatrix> zfac(it.z);
        if (zfac.info() != Eigen::Success) {
            return it;
        }
        const RMatrix zinv = zfac.solve(RMatrix::Identity(m, m));
        const double mu = (it.x.cwiseProduct(it.z).sum() + it.xl.dot(it.zl)) / nu;

        // Schur complement M_ij = tr(A_i X A_j Z^-1) + G D G^T
        RMatrix schur(ncon, ncon);
        std::vector<RMatrix> xaz(ncon);
        for (Index j = 0; j < ncon; ++j) {
            xaz[j] = it.x * p.a[j] * zinv;
        }
        for (Index i = 0; i < ncon; ++i) {
            for (Index j = i; j < ncon; ++j) {
                const double v = p.a[i].cwiseProduct(xaz[j].transpose()).sum();
                schur(i, j) = v;
                schur(j, i) = v;
            }
        }
        const RVector ratio_lp = it.xl.cwiseQuotient(it.zl);
        schur += p.g * ratio_lp.asDiagonal() * p.g.transpose();
        // dependent constraints make M singular; a tiny ridge keeps the direction defined
        schur.diagonal() *= 1.0 + 1e-14;
        Eigen::LDLT<RMatrix> sfac(schur);
        if (sfac.info() != Eigen::Success) {
            return it;
        }

        const RVector rhs_fixed = rp + apply_a(p, it.x * rd * zinv) + p.g * ratio_lp.cwiseProduct(rdl);
        struct Dir {
            RMatrix dx, dz;
            RVector dxl, dzl, dy;
        };
        auto direction = [&](const RMatrix& rc, const RVector& rcl) {
            Dir d;
            const RVector rhs = rhs_fixed - apply_a(p, rc * zinv) - p.g * rcl.cwiseQuotient(it.zl);
            d.dy = sfac.solve(rhs);
            d.dz = rd - apply_at(p, d.dy);
            d.dzl = rdl - p.g.transpose() * d.dy;
            d.dx = sym((rc - it.x * d.dz) * zinv);
            d.dxl = (rcl - it.xl.cwiseProduct(d.dzl)).cwiseQuotient(it.zl);
            return d;
        };

        const RMatrix xz = it.x * it.z;
        const Dir aff = direction(-xz, -it.xl.cwiseProduct(it.zl));
        const double ap_aff = std::min({1.0, max_step_psd(it.x, aff.dx), max_step_lp(it.xl, aff.dxl)});
        const double ad_aff = std::min({1.0, max_step_psd(it.z, aff.dz), max_step_lp(it.zl, aff.dzl)});
        const double mu_aff = ((it.x + ap_aff * aff.dx).cwiseProduct(it.z + ad_aff * aff.dz).sum() +
                               (it.xl + ap_aff * aff.dxl).dot(it.zl + ad_aff * aff.dzl)) /
                              nu;
        const double sigma = std::clamp(std::pow(mu_aff / mu, 3.0), 0.0, 1.0);

        RMatrix rc = sigma * mu * RMatrix::Identity(m, m) - xz - aff.dx * aff.dz;
        RVector rcl = RVector::Constant(nlp, sigma * mu) - it.xl.cwiseProduct(it.zl) - aff.dxl.cwiseProduct(aff.dzl);
        const Dir d = direction(rc, rcl);
        const double ap = std::min(1.0, 0.98 * std::min(max_step_psd(it.x, d.dx), max_step_lp(it.xl, d.dxl)));
        const double ad = std::min(1.0, 0.98 * std::min(max_step_psd(it.z, d.dz), max_step_lp(it.zl, d.dzl)));
        if (!(ap > 0.0) || !(ad > 0.0)) {
            return it;
        }
        stalls = (ap < 1e-9 && ad < 1e-9) ? stalls + 1 : 0;
        if (stalls > 3) {
            return it;
        }
        it.x = sym(it.x + ap * d.dx);
        it.xl += ap * d.dxl;
        it.y += ad * d.dy;
        it.z = sym(it.z + ad * d.dz);
        it.zl += ad * d.dzl;
    }
    return it;
}

struct Scaling {
    std::vector<double> row;  // per constraint
    double cost = 1.0;
};

// Real, row-normalized form of a complex problem; one slack column per inequality.
RealProblem embed(const SdpProblem& prob, Scaling& scale) {
    const Index n = prob.dim();
    const Index ncon = static_cast<Index>(prob.constraints.size());
    RealProblem p;
    p.m = 2 * n;
    Index nslack = 0;
    for (const auto& con : prob.constraints) {
        nslack += (con.sense == Sense::eq) ? 0 : 1;
    }
    p.g = RMatrix::Zero(ncon, nslack);
    p.b.resize(ncon);
    p.cl = RVector::Zero(nslack);
    scale.row.assign(ncon, 1.0);
    Index col = 0;
    for (Index i = 0; i < ncon; ++i) {
        const auto& con = prob.constraints[i];
        RMatrix ar = 0.5 * real_embed(numkit::hermitian_part(con.a));
        double an = ar.norm();
        if (an == 0.0) {
            an = 1.0;
        }
        scale.row[i] = an;
        p.a.push_back(ar / an);
        p.b(i) = con.b / an;
        if (con.sense == Sense::ge) {
            p.g(i, col++) = -1.0;
        } else if (con.sense == Sense::le) {
            p.g(i, col++) = 1.0;
        }
    }
    RMatrix cr = 0.5 * real_embed(numkit::hermitian_part(prob.c));
    scale.cost = std::max(1.0, cr.norm());
    p.c = cr / scale.cost;
    return p;
}

RVector signed_to_reported(const SdpProblem& prob, const RVector& y) {
    RVector out = y;
    for (Index i = 0; i < y.size(); ++i) {
        if (prob.constraints[i].sense == Sense::le) {
            out(i) = -y(i);
        }
    }
    return out;
}

RVector unscale_duals(const SdpProblem& prob, const Scaling& scale, const RVector& y) {
    RVector out(y.size());
    for (Index i = 0; i < y.size(); ++i) {
        out(i) = scale.cost * y(i) / scale.row[i];
    }
    return signed_to_reported(prob, out);
}

SdpSolution finish(const SdpProblem& prob, const Scaling& scale, const RealIterate& it) {
    SdpSolution sol;
    sol.x = real_extract(it.x);
    sol.duals = unscale_duals(prob, scale, it.y);
    sol.objective = (prob.c * sol.x).trace().real();
    const RVector y = signed_to_reported(prob, sol.duals);
    double dobj = 0.0;
    for (Index i = 0; i < y.size(); ++i) {
        dobj += y(i) * prob.constraints[i].b;
    }
    sol.dual_objective = dobj;
    sol.kkt = sdp_kkt(prob, sol.x, sol.duals);
    sol.iterations = it.iterations;
    return sol;
}

// Phase 1: min t s.t. every constraint relaxed by t, tr(X) <= big.
bool phase_one_infeasible(const SdpProblem& prob, const SdpOptions& opt) {
    Scaling scale;
    RealProblem p = embed(prob, scale);
    const Index ncon = static_cast<Index>(prob.constraints.size());
    Index neq = 0;
    for (const auto& con : prob.constraints) {
        neq += (con.sense == Sense::eq) ? 1 : 0;
    }
    const Index old_cols = p.g.cols();
    const Index extra = 1 + 2 * neq + 1;  // t, eq pairs, trace slack
    RMatrix g = RMatrix::Zero(ncon + 1, old_cols + extra);
    g.topLeftCorner(ncon, old_cols) = p.g;
    Index col = old_cols + 1;
    for (Index i = 0; i < ncon; ++i) {
        switch (prob.constraints[i].sense) {
            case Sense::ge: g(i, old_cols) = 1.0; break;
            case Sense::le: g(i, old_cols) = -1.0; break;
            case Sense::eq:
                g(i, col++) = 1.0;
                g(i, col++) = -1.0;
                break;
        }
    }
    g(ncon, old_cols + extra - 1) = 1.0;
    const double big = 1e6 * (1.0 + p.b.cwiseAbs().maxCoeff()) * static_cast<double>(p.m);
    RMatrix trace_row = RMatrix::Identity(p.m, p.m) / std::sqrt(static_cast<double>(p.m));
    p.a.push_back(trace_row);
    p.b.conservativeResize(ncon + 1);
    p.b(ncon) = big / std::sqrt(static_cast<double>(p.m));
    p.g = g;
    p.cl = RVector::Zero(old_cols + extra);
    p.cl.segment(old_cols, extra - 1).setOnes();
    p.c = RMatrix::Zero(p.m, p.m);
    const RealIterate it = interior_point(p, 1e-9, opt.max_iter, [](const RealIterate&) { return true; });
    const double t = p.cl.dot(it.xl);
    const double level = 1e-6 * (1.0 + p.b.head(ncon).cwiseAbs().maxCoeff());
    return it.converged ? t > level : t > 1e3 * level;
}

}  // namespace

KktResiduals sdp_kkt(const SdpProblem& prob, const CMatrix& x, const RVector& duals) {
    KktResiduals k;
    const Index ncon = static_cast<Index>(prob.constraints.size());
    const RVector y = signed_to_reported(prob, duals);
    const auto xe = numkit::hermitian_eig(numkit::hermitian_part(x));
    k.primal = std::max(0.0, -xe.values.minCoeff()) / (1.0 + xe.values.cwiseAbs().maxCoeff());
    CMatrix z = numkit::hermitian_part(prob.c);
    double dobj = 0.0;
    double max_dual = 0.0;
    for (Index i = 0; i < ncon; ++i) {
        const auto& con = prob.constraints[i];
        const double v = (con.a * x).trace().real();
        double viol = 0.0;
        switch (con.sense) {
            case Sense::ge: viol = std::max(0.0, con.b - v); break;
            case Sense::le: viol = std::max(0.0, v - con.b); break;
            case Sense::eq: viol = std::abs(v - con.b); break;
        }
        k.primal = std::max(k.primal, viol / (1.0 + std::abs(con.b)));
        z -= y(i) * numkit::hermitian_part(con.a);
        dobj += y(i) * con.b;
        max_dual = std::max(max_dual, std::abs(duals(i)));
    }
    const double cn = prob.c.norm();
    const auto ze = numkit::hermitian_eig(numkit::hermitian_part(z));
    k.dual = std::max(0.0, -ze.values.minCoeff()) / (1.0 + cn);
    for (Index i = 0; i < ncon; ++i) {
        if (prob.constraints[i].sense != Sense::eq) {
            k.dual = std::max(k.dual, std::max(0.0, -duals(i)) / (1.0 + max_dual));
        }
    }
    const double pobj = (prob.c * x).trace().real();
    k.gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
    return k;
}

SdpSolution solve_sdp(const SdpProblem& prob, const SdpOptions& opt) {
    const Index n = prob.dim();
    if (n < 1 || prob.c.cols() != n) {
        throw numkit::DimensionError("solve_sdp: cost matrix must be square and non-empty");
    }
    if (prob.constraints.empty()) {
        throw numkit::DimensionError("solve_sdp: at least one constraint required");
    }
    for (const auto& con : prob.constraints) {
        if (con.a.rows() != n || con.a.cols() != n) {
            throw numkit::DimensionError("solve_sdp: constraint matrix size mismatch");
        }
        if (!numkit::is_hermitian(con.a, 1e-10)) {
            throw numkit::ContractViolation("solve_sdp: constraint matrix is not Hermitian");
        }
    }
    if (!numkit::is_hermitian(prob.c, 1e-10)) {
        throw numkit::ContractViolation("solve_sdp: cost matrix is not Hermitian");
    }

    Scaling scale;
    const RealProblem p = embed(prob, scale);
    // stop only once the residuals measured on the original complex data are met
    auto accept = [&](const RealIterate& it) {
        const SdpSolution s = finish(prob, scale, it);
        return s.kkt.primal <= opt.tol && s.kkt.dual <= opt.tol && s.kkt.gap <= opt.tol;
    };
    const RealIterate it = interior_point(p, opt.tol, opt.max_iter, accept);
    SdpSolution sol = finish(prob, scale, it);
    if (it.converged) {
        sol.status = SdpStatus::optimal;
        return sol;
    }
    sol.status = phase_one_infeasible(prob, opt) ? SdpStatus::infeasible : SdpStatus::max_iter;
    return sol;
}

}  // namespace ffrelay::solvers
