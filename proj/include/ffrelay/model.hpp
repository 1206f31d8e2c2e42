#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "ffrelay/numkit.hpp"

namespace ffrelay::model {

using numkit::CMatrix;
using numkit::CVector;
using numkit::Index;
using numkit::RVector;

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// All powers and variances are linear. The CP length defaults to the smallest
// value that keeps the end-to-end channel circular.
struct SystemConfig {
    int n_sub = 32;
    int lf = 3;
    int lg = 3;
    int lr = 4;
    int cp_len = -1;  // < 0: use min_cp()
    double noise_relay = 1.0;
    double noise_dest = 1.0;
    double tap_var = 1.0;
    RVector tap_profile;  // per-tap RD variances; empty means iid tap_var
    double source_budget = 100.0;
    double relay_budget = 100.0;
    double tolerance = 1e-3;
    std::uint64_t seed = 1;

    int min_cp() const { return lf + lr + lg - 3; }
    int cp() const { return cp_len < 0 ? min_cp() : cp_len; }
    RVector rd_profile() const;

    // Throws ConfigError naming the offending field.
    void validate() const;

    // derived sizes
    Index relay_in_len() const { return n_sub + lg + lr - 2; }  // Lt: rows of F
    Index relay_out_len() const { return n_sub + lg - 1; }      // rows of R
    Index source_len() const { return n_sub + lg + lr + lf - 3; }  // length of x~
};

// Designer-visible RD knowledge: only the tap variance profile.
struct RdStatistics {
    RVector tap_var;
    Index lg() const { return tap_var.size(); }
};

struct ChannelRealization {
    CVector f;
    CVector g;  // simulator only
    RdStatistics rd;
};

struct Selectors {
    CMatrix e1;  // vec(R^T) = E1^H r
    CMatrix e2;  // vec(R)   = E2^H r
    CMatrix t;   // [I_N; 0]
};

Selectors build_selectors(const SystemConfig& cfg);

// Throws ContractViolation on a negative entry or a size mismatch.
void check_power_allocation(const RVector& p_s, const SystemConfig& cfg);

struct SourceCovariance {
    CMatrix sigma_x;     // N x N
    CMatrix sigma_xext;  // CP-extended, source_len() square
};

SourceCovariance source_covariance(const RVector& p_s, const SystemConfig& cfg);

struct QuadraticForms {
    std::vector<CMatrix> phi_s;  // per subcarrier, includes p_k
    std::vector<CMatrix> phi_n;  // per subcarrier, excludes sigma_d^2
    CMatrix phi_p;
    double noise_dest = 1.0;
    // intermediates kept for inspection
    std::vector<CMatrix> k_mats;
    std::vector<CMatrix> m_mats;

    Index n_sub() const { return static_cast<Index>(phi_s.size()); }
    Index lr() const { return phi_p.rows(); }
};

QuadraticForms build_quadratic_forms(const SystemConfig& cfg, const CVector& f, const RVector& p_s);

// The p-independent pieces. phi_s(k) = p_k * unit_signal[k] and
// phi_p(p) = sum_k p_k relay_terms[k] + relay_floor * I.
struct QuadraticBasis {
    SystemConfig cfg;
    std::vector<CMatrix> unit_signal;
    std::vector<CMatrix> phi_n;
    std::vector<CMatrix> relay_terms;
    double relay_floor = 0.0;
    numkit::CMatrix fw;  // F * W~, relay_in_len() x N

    QuadraticForms assemble(const RVector& p_s) const;
    CMatrix relay_matrix(const RVector& p_s) const;
};

QuadraticBasis build_quadratic_basis(const SystemConfig& cfg, const CVector& f);

double subcarrier_snr(const CVector& r, const QuadraticForms& forms, Index k);
RVector all_snr(const CVector& r, const QuadraticForms& forms);
double relay_power(const CVector& r, const QuadraticForms& forms);

struct LpCoefficients {
    RVector c1;
    double c2 = 0.0;
    RVector c3;
};

// c1 and c2 are evaluated from the Toeplitz filter matrix directly, so
// sum_k p_k c1(k) + c2 reproduces relay_power only if both routes agree.
LpCoefficients lp_coefficients(const CVector& r, const QuadraticBasis& basis);
LpCoefficients lp_coefficients(const CVector& r, const SystemConfig& cfg, const CVector& f);

// End-to-end per-subcarrier coefficient for a fixed RD realization g:
// sqrt(N) w_k^H T^T F^T R^T g~.
CVector subcarrier_gains(const SystemConfig& cfg, const CVector& f, const CVector& r, const CVector& g);

// Full linear convolution a * b.
CVector convolve(const CVector& a, const CVector& b);

}  // namespace ffrelay::model
