#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ffrelay/model.hpp"
#include "ffrelay/solvers/sdp.hpp"

namespace ffrelay::designs {

using model::QuadraticBasis;
using model::QuadraticForms;
using model::SystemConfig;
using numkit::CMatrix;
using numkit::CVector;
using numkit::Index;
using numkit::RVector;

enum class Objective { relay_power, worst_snr, sum_rate };

struct DesignResult {
    CVector r;
    RVector p_s;
    Objective kind = Objective::relay_power;
    double objective = 0.0;
    bool feasible = true;
    double rank_ratio = 0.0;  // sigma_2 / sigma_1 of the SDP matrix
    RVector duals;
    solvers::KktResiduals kkt;  // SDP paths
    std::vector<double> trace;
    bool used_randomization = false;
    bool warning = false;  // subproblem failure; result is the last good iterate
    int iterations = 0;
    double sdp_value = 0.0;  // power-min: SDP objective; worst-snr: bisection tau*
    std::string note;
};

struct ExtractOptions {
    double rank_tol = 1e-6;
    int draws = 1000;
    std::uint64_t seed = 1;
};

// Problem 1: minimize relay power subject to SNR_k >= gamma_k on the active set.
DesignResult design_power_min(const QuadraticForms& forms, const std::vector<Index>& active, const RVector& gamma,
                              const ExtractOptions& extract = {}, double sdp_tol = 1e-9);

// Feasibility test used by Algorithm 1: is min_k SNR_k >= tau reachable within
// the relay budget? Solves max t s.t. tr((Phi_S - tau Phi_N) R) >= t,
// tr(Phi_P R) <= budget, R PSD, and compares t against sigma_d^2 tau.
struct FeasibilityCheck {
    bool feasible = false;
    double margin = 0.0;  // t - sigma_d^2 tau
    CMatrix r_mat;
    solvers::SdpStatus status = solvers::SdpStatus::max_iter;
};
FeasibilityCheck worst_snr_feasible(const QuadraticForms& forms, double relay_budget, double tau,
                                    double sdp_tol = 1e-8);

// Upper bound on the worst-subcarrier SNR under the relay budget:
// min_k lambda_max(Phi_S(k), Phi_N(k) + sigma_d^2 Phi_P / budget).
double worst_snr_upper_bound(const QuadraticForms& forms, double relay_budget);

struct WorstSnrOptions {
    double known_feasible = 0.0;  // tau known to be achievable (lower bracket end)
    ExtractOptions extract;
    double sdp_tol = 1e-8;
};

// Algorithm 1: bisection on the feasibility SDP, then filter extraction.
DesignResult design_worst_snr(const QuadraticForms& forms, double relay_budget, double eps,
                              const WorstSnrOptions& options = {});

struct Allocation {
    RVector p_s;
    double tau = 0.0;
    bool feasible = false;
};

// Problem 2-2. Returns the minimal allocation p_k = tau* / C3(k); any power
// left under the source budget stays unused.
Allocation allocate_source_power(const CVector& r, const QuadraticBasis& basis, double tau0);
Allocation allocate_from_coefficients(const model::LpCoefficients& coef, double source_budget, double relay_budget,
                                      double tau0);
Allocation allocate_source_power(const CVector& r, const SystemConfig& cfg, const CVector& f, double tau0);

struct JointOptions {
    int max_iter = 30;
    ExtractOptions extract;
};

// Algorithm 2: alternate Algorithm 1 and Problem 2-2 from uniform power.
// trace holds the achieved worst SNR after every half step.
DesignResult design_joint_worst_snr(const SystemConfig& cfg, const CVector& f, double eps,
                                    const JointOptions& options = {});

struct RateGradient {
    RVector dp;
    CVector dr;  // d/dRe r + j d/dIm r
};

// phi(p, r) = -sum_k log2(1 + p_k B1_k / B2_k)
double rate_cost(const RVector& p_s, const CVector& r, const QuadraticBasis& basis);
RateGradient rate_gradient(const RVector& p_s, const CVector& r, const QuadraticBasis& basis);
double sum_rate(const RVector& p_s, const CVector& r, const QuadraticBasis& basis);

struct PgmOptions {
    int max_iter = 500;
    double rel_tol = 1e-7;
    double step0 = 1.0;
    double backtrack = 0.5;
    double armijo = 1e-4;
    bool fix_filter = false;  // optimize p only; the relay budget must be slack for every feasible p
    RVector init_p;           // empty: uniform
    CVector init_r;           // empty: first tap at full relay power
    std::function<void(const RVector&, const CVector&)> on_accept;  // sees every accepted iterate
};

// Problem 3: projected gradient with successive projections.
DesignResult design_rate_pgm(const SystemConfig& cfg, const CVector& f, const PgmOptions& options = {});
DesignResult design_rate_pgm(const QuadraticBasis& basis, const PgmOptions& options = {});

}  // namespace ffrelay::designs
