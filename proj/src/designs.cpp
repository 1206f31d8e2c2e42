#include "ffrelay/designs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "ffrelay/rng.hpp"
#include "ffrelay/solvers/bisect.hpp"
#include "ffrelay/solvers/lp.hpp"
#include "ffrelay/solvers/projections.hpp"

namespace ffrelay::designs {

using numkit::ContractViolation;
using numkit::DimensionError;
using solvers::Sense;
using solvers::SdpConstraint;
using solvers::SdpProblem;
using solvers::SdpStatus;

namespace {

// blkdiag(a, corner) for the margin variable of the feasibility SDPs
CMatrix with_corner(const CMatrix& a, double corner) {
    const Index n = a.rows();
    CMatrix out = CMatrix::Zero(n + 1, n + 1);
    out.topLeftCorner(n, n) = a;
    out(n, n) = corner;
    return out;
}

struct RankInfo {
    numkit::HermitianEig eig;
    double ratio = 0.0;
};

RankInfo rank_info(const CMatrix& r_mat) {
    RankInfo info;
    info.eig = numkit::hermitian_eig(numkit::hermitian_part(r_mat));
    const double top = info.eig.values(0);
    if (info.eig.values.size() < 2 || !(top > 0.0)) {
        info.ratio = top > 0.0 ? 0.0 : 1.0;
        return info;
    }
    info.ratio = std::max(0.0, info.eig.values(1)) / top;
    return info;
}

CVector principal(const RankInfo& info) {
    return std::sqrt(std::max(0.0, info.eig.values(0))) * info.eig.vectors.col(0);
}

// xi ~ CN(0, R) via the eigen factor of R
class GaussianDraws {
public:
    GaussianDraws(const RankInfo& info, std::uint64_t seed, std::uint64_t tag)
        : rng_(seed, {tag}), n_(info.eig.values.size()) {
        factor_ = info.eig.vectors;
        for (Index i = 0; i < n_; ++i) {
            factor_.col(i) *= std::sqrt(std::max(0.0, info.eig.values(i)));
        }
    }
    CVector next() {
        CVector z(n_);
        for (Index i = 0; i < n_; ++i) {
            z(i) = rng_.cnormal(1.0);
        }
        return factor_ * z;
    }

private:
    CounterRng rng_;
    Index n_;
    CMatrix factor_;
};

// smallest c^2 with SNR_k(c x) >= gamma_k on the active set; +inf if none
double min_scale_sq(const CVector& x, const QuadraticForms& forms, const std::vector<Index>& active,
                    const RVector& gamma) {
    double need = 0.0;
    for (std::size_t i = 0; i < active.size(); ++i) {
        const Index k = active[i];
        const double a = numkit::quad_form(forms.phi_s[k], x);
        const double b = numkit::quad_form(forms.phi_n[k], x);
        const double slope = a - gamma(static_cast<Index>(i)) * b;
        if (!(slope > 0.0)) {
            return std::numeric_limits<double>::infinity();
        }
        need = std::max(need, gamma(static_cast<Index>(i)) * forms.noise_dest / slope);
    }
    return need;
}

// an interior-point run that stalled near the optimum is still usable when
// its residuals are small; thin feasible sets stall around 1e-8
bool usable(const solvers::SdpSolution& sol, double loose) {
    if (sol.status == SdpStatus::optimal) {
        return true;
    }
    return sol.status == SdpStatus::max_iter && sol.kkt.primal <= loose && sol.kkt.dual <= loose &&
           sol.kkt.gap <= loose;
}

double worst_snr(const CVector& r, const QuadraticForms& forms) { return model::all_snr(r, forms).minCoeff(); }

CVector to_budget(const CVector& x, const CMatrix& phi_p, double budget) {
    const double level = numkit::quad_form(phi_p, x);
    if (!(level > 0.0)) {
        return x;
    }
    return x * std::sqrt(budget / level);
}

void check_forms(const QuadraticForms& forms) {
    if (forms.n_sub() < 1 || forms.lr() < 1) {
        throw DimensionError("empty quadratic forms");
    }
}

// Homogeneous test for Problem 1 feasibility at any power: is there R >= 0,
// tr R = 1, with tr(B_k R) > 0 for every active k?
double power_min_margin(const QuadraticForms& forms, const std::vector<Index>& active, const RVector& gamma,
                        double sdp_tol) {
    const Index lr = forms.lr();
    std::vector<CMatrix> b(active.size());
    double floor = 0.0;
    for (std::size_t i = 0; i < active.size(); ++i) {
        const Index k = active[i];
        b[i] = forms.phi_s[k] - gamma(static_cast<Index>(i)) * forms.phi_n[k];
        const double nrm = b[i].norm();
        if (nrm > 0.0) {
            b[i] /= nrm;
        }
        floor = std::min(floor, numkit::hermitian_eig(numkit::hermitian_part(b[i])).values.minCoeff());
    }
    const double shift = 1.0 - floor;  // keeps (I/lr, t = 0) strictly inside
    SdpProblem prob;
    prob.c = with_corner(CMatrix::Zero(lr, lr), -1.0);
    for (const auto& bi : b) {
        prob.constraints.push_back({with_corner(bi, -1.0), -shift, Sense::ge});
    }
    prob.constraints.push_back({with_corner(CMatrix::Identity(lr, lr), 0.0), 1.0, Sense::eq});
    const auto sol = solvers::solve_sdp(prob, {sdp_tol, 200});
    if (sol.status == SdpStatus::infeasible) {
        return -1.0;
    }
    return std::real(sol.x(lr, lr)) - shift;
}

}  // namespace

DesignResult design_power_min(const QuadraticForms& forms, const std::vector<Index>& active, const RVector& gamma,
                              const ExtractOptions& extract, double sdp_tol) {
    check_forms(forms);
    if (active.empty() || gamma.size() != static_cast<Index>(active.size())) {
        throw DimensionError("design_power_min: gamma must have one entry per active subcarrier");
    }
    for (std::size_t i = 0; i < active.size(); ++i) {
        if (active[i] < 0 || active[i] >= forms.n_sub()) {
            throw DimensionError("design_power_min: subcarrier index out of range");
        }
        if (!(gamma(static_cast<Index>(i)) > 0.0)) {
            throw ContractViolation("design_power_min: targets must be positive");
        }
    }
    const Index lr = forms.lr();
    DesignResult res;
    res.kind = Objective::relay_power;
    res.r = CVector::Zero(lr);

    const double margin = power_min_margin(forms, active, gamma, sdp_tol);
    if (!(margin > 1e-8)) {
        res.feasible = false;
        res.note = "SNR targets unreachable at any relay power";
        return res;
    }

    SdpProblem prob;
    prob.c = forms.phi_p;
    for (std::size_t i = 0; i < active.size(); ++i) {
        const Index k = active[i];
        const double g = gamma(static_cast<Index>(i));
        prob.constraints.push_back({forms.phi_s[k] - g * forms.phi_n[k], g * forms.noise_dest, Sense::ge});
    }
    const auto sol = solvers::solve_sdp(prob, {sdp_tol, 200});
    res.iterations = sol.iterations;
    res.duals = sol.duals;
    res.kkt = sol.kkt;
    if (!usable(sol, 1e-7)) {
        res.feasible = false;
        res.note = sol.status == SdpStatus::infeasible ? "SDP infeasible" : "SDP did not converge";
        return res;
    }
    res.sdp_value = sol.objective;

    const RankInfo info = rank_info(sol.x);
    res.rank_ratio = info.ratio;
    CVector best = principal(info);
    double best_scale = min_scale_sq(best, forms, active, gamma);
    double best_power = best_scale * numkit::quad_form(forms.phi_p, best);
    if (info.ratio > extract.rank_tol) {
        res.used_randomization = true;
        GaussianDraws draws(info, extract.seed, 0x504d);
        for (int d = 0; d < extract.draws; ++d) {
            const CVector xi = draws.next();
            const double s = min_scale_sq(xi, forms, active, gamma);
            const double power = s * numkit::quad_form(forms.phi_p, xi);
            if (power < best_power) {
                best = xi;
                best_scale = s;
                best_power = power;
            }
        }
    }
    if (!std::isfinite(best_power)) {
        res.feasible = false;
        res.note = "no candidate filter met the targets";
        return res;
    }
    res.r = best * std::sqrt(best_scale);
    res.objective = model::relay_power(res.r, forms);
    return res;
}

FeasibilityCheck worst_snr_feasible(const QuadraticForms& forms, double relay_budget, double tau, double sdp_tol) {
    check_forms(forms);
    if (!(relay_budget > 0.0)) {
        throw ContractViolation("worst_snr_feasible: relay budget must be positive");
    }
    const Index lr = forms.lr();
    // max t s.t. tr((Phi_S - tau Phi_N) R) - t >= -c, tr(Phi_P R) <= P.
    // The shift c keeps R = 0, t = c/2 strictly feasible; feasible iff t >= sigma_d^2 tau + c.
    const double need = forms.noise_dest * tau;
    const double shift = std::max(need, 1e-12);
    SdpProblem prob;
    prob.c = with_corner(CMatrix::Zero(lr, lr), -1.0);
    for (Index k = 0; k < forms.n_sub(); ++k) {
        prob.constraints.push_back({with_corner(forms.phi_s[k] - tau * forms.phi_n[k], -1.0), -shift, Sense::ge});
    }
    prob.constraints.push_back({with_corner(forms.phi_p, 0.0), relay_budget, Sense::le});
    const auto sol = solvers::solve_sdp(prob, {sdp_tol, 200});
    FeasibilityCheck out;
    out.status = sol.status;
    if (!usable(sol, 1e-6)) {
        return out;
    }
    out.margin = std::real(sol.x(lr, lr)) - (need + shift);
    out.feasible = out.margin >= -1e-9 * (need + shift);
    out.r_mat = sol.x.topLeftCorner(lr, lr);
    return out;
}

double worst_snr_upper_bound(const QuadraticForms& forms, double relay_budget) {
    check_forms(forms);
    const CMatrix power_term = (forms.noise_dest / relay_budget) * forms.phi_p;
    double bound = std::numeric_limits<double>::infinity();
    for (Index k = 0; k < forms.n_sub(); ++k) {
        const CMatrix denom = numkit::hermitian_part(forms.phi_n[k] + power_term);
        const Eigen::LLT<CMatrix> llt(denom);
        if (llt.info() != Eigen::Success) {
            throw ContractViolation("worst_snr_upper_bound: noise-plus-power form not positive definite");
        }
        const CMatrix l_inv = llt.matrixL().solve(CMatrix::Identity(denom.rows(), denom.cols()));
        const CMatrix pencil = numkit::hermitian_part(l_inv * forms.phi_s[k] * l_inv.adjoint());
        bound = std::min(bound, numkit::hermitian_eig(pencil).values(0));
    }
    return std::max(0.0, bound);
}

DesignResult design_worst_snr(const QuadraticForms& forms, double relay_budget, double eps,
                              const WorstSnrOptions& options) {
    check_forms(forms);
    if (!(relay_budget > 0.0)) {
        throw ContractViolation("design_worst_snr: relay budget must be positive");
    }
    if (!(eps > 0.0)) {
        throw ContractViolation("design_worst_snr: eps must be positive");
    }
    DesignResult res;
    res.kind = Objective::worst_snr;

    const double bound = worst_snr_upper_bound(forms, relay_budget);
    const double lo = std::max(0.0, options.known_feasible);
    const double hi = std::max(1.01 * bound + eps, lo + eps);
    if (!(std::isfinite(hi)) || lo > bound * (1.0 + 1e-9) + 1e-12) {
        throw solvers::BracketError("design_worst_snr: bracket [" + std::to_string(lo) + ", " + std::to_string(hi) +
                                    "] inconsistent with upper bound " + std::to_string(bound));
    }

    CMatrix last_r;
    double last_tau = -1.0;
    int sdp_calls = 0;
    auto feasible = [&](double tau) {
        ++sdp_calls;
        auto chk = worst_snr_feasible(forms, relay_budget, tau, options.sdp_tol);
        if (chk.feasible) {
            last_r = chk.r_mat;
            last_tau = tau;
        }
        return chk.feasible;
    };
    // lo is achievable by assumption and hi exceeds the analytic bound
    const auto bis = solvers::bisect(feasible, lo, hi, eps, true);
    res.sdp_value = bis.tau;
    if (last_tau < 0.0) {
        auto chk = worst_snr_feasible(forms, relay_budget, bis.tau, options.sdp_tol);
        ++sdp_calls;
        if (chk.r_mat.size() == 0) {
            throw solvers::BracketError("design_worst_snr: feasibility SDP failed at the lower bracket end " +
                                        std::to_string(bis.tau));
        }
        last_r = chk.r_mat;
    }
    res.iterations = sdp_calls;

    const RankInfo info = rank_info(last_r);
    res.rank_ratio = info.ratio;
    // SNR grows with the filter scale, so every candidate uses the whole budget
    CVector best = to_budget(principal(info), forms.phi_p, relay_budget);
    double best_val = worst_snr(best, forms);
    if (info.ratio > options.extract.rank_tol) {
        res.used_randomization = true;
        GaussianDraws draws(info, options.extract.seed, 0x5753);
        for (int d = 0; d < options.extract.draws; ++d) {
            const CVector xi = to_budget(draws.next(), forms.phi_p, relay_budget);
            const double val = worst_snr(xi, forms);
            if (val > best_val) {
                best = xi;
                best_val = val;
            }
        }
    }
    res.r = best;
    res.objective = best_val;
    res.trace.push_back(best_val);
    return res;
}

Allocation allocate_source_power(const CVector& r, const QuadraticBasis& basis, double tau0) {
    return allocate_from_coefficients(model::lp_coefficients(r, basis), basis.cfg.source_budget,
                                      basis.cfg.relay_budget, tau0);
}

Allocation allocate_from_coefficients(const model::LpCoefficients& coef, double source_budget, double relay_budget,
                                      double tau0) {
    const Index n = coef.c1.size();
    if (coef.c3.size() != n) {
        throw DimensionError("allocate_from_coefficients: c1 and c3 differ in length");
    }
    Allocation out;
    out.p_s = RVector::Zero(n);
    if (coef.c2 > relay_budget) {
        return out;
    }
    if ((coef.c3.array() <= 0.0).any()) {
        // tau is pinned to 0 by the dead subcarrier
        out.feasible = !(tau0 > 0.0);
        return out;
    }
    // variables [p_0 .. p_{N-1}, tau]
    RVector c = RVector::Zero(n + 1);
    c(n) = 1.0;
    std::vector<solvers::LpConstraint> cons;
    RVector row = RVector::Zero(n + 1);
    row.head(n).setOnes();
    cons.push_back({row, solvers::LpSense::le, source_budget});
    row.head(n) = coef.c1;
    cons.push_back({row, solvers::LpSense::le, relay_budget - coef.c2});
    for (Index k = 0; k < n; ++k) {
        row.setZero();
        row(k) = -coef.c3(k);
        row(n) = 1.0;
        cons.push_back({row, solvers::LpSense::le, 0.0});
    }
    row.setZero();
    row(n) = 1.0;
    cons.push_back({row, solvers::LpSense::ge, tau0});
    const auto lp = solvers::solve_lp(c, cons);
    if (lp.status != solvers::LpStatus::optimal) {
        return out;
    }
    out.tau = lp.x(n);
    out.p_s = out.tau * coef.c3.cwiseInverse();
    // guard the budgets against simplex rounding
    const double src = out.p_s.sum();
    const double rel = out.p_s.dot(coef.c1);
    double shrink = 1.0;
    if (src > source_budget) {
        shrink = std::min(shrink, source_budget / src);
    }
    if (rel > relay_budget - coef.c2 && rel > 0.0) {
        shrink = std::min(shrink, (relay_budget - coef.c2) / rel);
    }
    out.p_s *= shrink;
    out.tau *= shrink;
    out.feasible = true;
    return out;
}

Allocation allocate_source_power(const CVector& r, const SystemConfig& cfg, const CVector& f, double tau0) {
    return allocate_source_power(r, model::build_quadratic_basis(cfg, f), tau0);
}

DesignResult design_joint_worst_snr(const SystemConfig& cfg, const CVector& f, double eps,
                                    const JointOptions& options) {
    cfg.validate();
    const QuadraticBasis basis = model::build_quadratic_basis(cfg, f);
    const Index n = cfg.n_sub;
    RVector p = RVector::Constant(n, cfg.source_budget / static_cast<double>(n));

    DesignResult res;
    res.kind = Objective::worst_snr;
    WorstSnrOptions ws_opts;
    ws_opts.extract = options.extract;

    CVector r_cur = CVector::Zero(cfg.lr);
    double tau_lp = 0.0;  // achieved worst SNR of (r_cur, p)
    for (int it = 0; it < options.max_iter; ++it) {
        const QuadraticForms forms = basis.assemble(p);
        ws_opts.known_feasible = it == 0 ? 0.0 : tau_lp;
        DesignResult ws;
        try {
            ws = design_worst_snr(forms, cfg.relay_budget, eps, ws_opts);
        } catch (const std::exception& e) {
            res.warning = true;
            res.note = std::string("filter step failed: ") + e.what();
            break;
        }
        CVector r_new = ws.r;
        double tau_r = ws.objective;
        if (it > 0 && tau_r < tau_lp) {
            // extraction lost ground; the previous filter is still feasible for this p
            r_new = r_cur;
            tau_r = tau_lp;
        }
        res.iterations = it + 1;
        res.rank_ratio = ws.rank_ratio;
        res.used_randomization = res.used_randomization || ws.used_randomization;
        res.trace.push_back(tau_r);
        const bool converged = it > 0 && std::abs(tau_r - tau_lp) < eps;
        r_cur = r_new;
        if (it == 0) {
            res.sdp_value = ws.sdp_value;
        }
        if (converged) {
            tau_lp = tau_r;
            break;
        }

        const Allocation alloc = allocate_source_power(r_cur, basis, tau_r * (1.0 - 1e-9));
        if (!alloc.feasible) {
            res.warning = true;
            res.note = "power allocation LP infeasible";
            tau_lp = tau_r;
            break;
        }
        const double tau_new = worst_snr(r_cur, basis.assemble(alloc.p_s));
        if (tau_new >= tau_r) {
            p = alloc.p_s;
            tau_lp = tau_new;
        } else {
            tau_lp = tau_r;
        }
        res.trace.push_back(tau_lp);
    }
    res.r = r_cur;
    res.p_s = p;
    res.objective = worst_snr(r_cur, basis.assemble(p));
    return res;
}

namespace {

struct RateTerms {
    RVector b1;
    RVector b2;
};

RateTerms rate_terms(const CVector& r, const QuadraticBasis& basis) {
    const Index n = basis.cfg.n_sub;
    if (r.size() != basis.cfg.lr) {
        throw DimensionError("relay filter length mismatch");
    }
    RateTerms t{RVector(n), RVector(n)};
    for (Index k = 0; k < n; ++k) {
        t.b1(k) = std::max(0.0, numkit::quad_form(basis.unit_signal[k], r));
        t.b2(k) = std::max(0.0, numkit::quad_form(basis.phi_n[k], r)) + basis.cfg.noise_dest;
    }
    return t;
}

}  // namespace

double sum_rate(const RVector& p_s, const CVector& r, const QuadraticBasis& basis) {
    model::check_power_allocation(p_s, basis.cfg);
    const RateTerms t = rate_terms(r, basis);
    double acc = 0.0;
    for (Index k = 0; k < p_s.size(); ++k) {
        acc += std::log2(1.0 + p_s(k) * t.b1(k) / t.b2(k));
    }
    return acc;
}

double rate_cost(const RVector& p_s, const CVector& r, const QuadraticBasis& basis) {
    return -sum_rate(p_s, r, basis);
}

RateGradient rate_gradient(const RVector& p_s, const CVector& r, const QuadraticBasis& basis) {
    model::check_power_allocation(p_s, basis.cfg);
    const RateTerms t = rate_terms(r, basis);
    const Index n = basis.cfg.n_sub;
    const double inv_ln2 = 1.0 / std::numbers::ln2;
    RateGradient g;
    g.dp.resize(n);
    g.dr = CVector::Zero(r.size());
    for (Index k = 0; k < n; ++k) {
        const double rho = p_s(k) * t.b1(k) / t.b2(k);
        g.dp(k) = -inv_ln2 * (t.b1(k) / t.b2(k)) / (1.0 + rho);
        if (p_s(k) == 0.0) {
            continue;
        }
        // d rho / d r  with  d(r^H A r) = 2 A r  in the Re + j Im packing
        const CVector q1r = basis.unit_signal[k] * r;
        const CVector q2r = basis.phi_n[k] * r;
        const CVector drho = (2.0 * p_s(k) / (t.b2(k) * t.b2(k))) * (t.b2(k) * q1r - t.b1(k) * q2r);
        g.dr -= inv_ln2 * drho / (1.0 + rho);
    }
    return g;
}

namespace {

struct PgmPoint {
    RVector p;
    CVector r;
    double cost = 0.0;
};

}  // namespace

DesignResult design_rate_pgm(const QuadraticBasis& basis, const PgmOptions& options) {
    const SystemConfig& cfg = basis.cfg;
    const Index n = cfg.n_sub;
    const Index lr = cfg.lr;

    PgmPoint cur;
    cur.p = options.init_p.size() > 0 ? options.init_p
                                      : RVector::Constant(n, cfg.source_budget / static_cast<double>(n));
    if (options.init_r.size() > 0) {
        cur.r = options.init_r;
    } else {
        cur.r = CVector::Zero(lr);
        cur.r(0) = 1.0;
        cur.r = to_budget(cur.r, basis.relay_matrix(solvers::project_power_halfspace(cur.p, cfg.source_budget)),
                          cfg.relay_budget);
    }
    if (cur.p.size() != n || cur.r.size() != lr) {
        throw DimensionError("design_rate_pgm: initial point has the wrong size");
    }

    if (options.fix_filter) {
        const auto coef = model::lp_coefficients(cur.r, basis);
        if (cfg.source_budget * coef.c1.maxCoeff() + coef.c2 > cfg.relay_budget) {
            throw ContractViolation("design_rate_pgm: fixed filter can exceed the relay budget; the p-only "
                                    "problem is not a water-filling instance");
        }
    }

    auto project = [&](const RVector& p, const CVector& r) {
        PgmPoint out;
        out.p = solvers::project_power_halfspace(p, cfg.source_budget);
        out.r = options.fix_filter ? r : solvers::project_ellipsoid(r, basis.relay_matrix(out.p), cfg.relay_budget);
        out.cost = rate_cost(out.p, out.r, basis);
        return out;
    };
    cur = project(cur.p, cur.r);

    DesignResult res;
    res.kind = Objective::sum_rate;
    res.trace.push_back(cur.cost);
    int it = 0;
    for (; it < options.max_iter; ++it) {
        const RateGradient g = rate_gradient(cur.p, cur.r, basis);
        double alpha = options.step0;
        bool accepted = false;
        PgmPoint next;
        for (int bt = 0; bt < 60; ++bt, alpha *= options.backtrack) {
            next = project(cur.p - alpha * g.dp, options.fix_filter ? cur.r : CVector(cur.r - alpha * g.dr));
            double slope = g.dp.dot(next.p - cur.p);
            if (!options.fix_filter) {
                slope += std::real(g.dr.dot(next.r - cur.r));
            }
            // the successive projection is not a projection onto a convex set, so
            // require plain decrease as well
            if (next.cost <= cur.cost + options.armijo * slope && next.cost <= cur.cost) {
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            break;
        }
        const double change = std::abs(next.cost - cur.cost) / std::max(1.0, std::abs(cur.cost));
        cur = next;
        res.trace.push_back(cur.cost);
        if (options.on_accept) {
            options.on_accept(cur.p, cur.r);
        }
        if (change < options.rel_tol) {
            ++it;
            break;
        }
    }
    res.iterations = it;
    res.r = cur.r;
    res.p_s = cur.p;
    res.objective = -cur.cost;
    return res;
}

DesignResult design_rate_pgm(const SystemConfig& cfg, const CVector& f, const PgmOptions& options) {
    cfg.validate();
    return design_rate_pgm(model::build_quadratic_basis(cfg, f), options);
}

}  // namespace ffrelay::designs
