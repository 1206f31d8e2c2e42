#include "ffrelay/model.hpp"

#include <cmath>
#include <string>

namespace ffrelay::model {

using numkit::cplx;
using numkit::ContractViolation;
using numkit::DimensionError;

RVector SystemConfig::rd_profile() const {
    if (tap_profile.size() > 0) {
        return tap_profile;
    }
    return RVector::Constant(lg, tap_var);
}

void SystemConfig::validate() const {
    auto fail = [](const std::string& field, const std::string& why) {
        throw ConfigError(field + ": " + why);
    };
    if (n_sub < 2) fail("n_sub", "must be at least 2");
    if (lf < 1) fail("lf", "must be at least 1");
    if (lg < 1) fail("lg", "must be at least 1");
    if (lr < 1) fail("lr", "must be at least 1");
    if (min_cp() > n_sub) fail("n_sub", "must be at least lf + lg + lr - 3");
    if (cp() < min_cp()) {
        fail("cp_len", "must be at least lf + lg + lr - 3 = " + std::to_string(min_cp()));
    }
    if (!(noise_relay > 0.0)) fail("noise_relay", "must be positive");
    if (!(noise_dest > 0.0)) fail("noise_dest", "must be positive");
    if (!(tap_var > 0.0)) fail("tap_var", "must be positive");
    if (tap_profile.size() > 0) {
        if (tap_profile.size() != lg) fail("tap_profile", "length must equal lg");
        if (!(tap_profile.minCoeff() > 0.0)) fail("tap_profile", "entries must be positive");
    }
    if (!(source_budget > 0.0)) fail("source_budget", "must be positive");
    if (!(relay_budget > 0.0)) fail("relay_budget", "must be positive");
    if (!(tolerance > 0.0)) fail("tolerance", "must be positive");
}

Selectors build_selectors(const SystemConfig& cfg) {
    cfg.validate();
    const Index lr = cfg.lr;
    const Index rows = cfg.relay_out_len();
    const Index cols = cfg.relay_in_len();
    Selectors s;
    s.e1 = CMatrix::Zero(lr, rows * cols);
    s.e2 = CMatrix::Zero(lr, rows * cols);
    for (Index row = 0; row < rows; ++row) {
        for (Index i = 0; i < lr; ++i) {
            const Index c = row + i;
            s.e1(i, row * cols + c) = 1.0;  // R^T(c, row)
            s.e2(i, c * rows + row) = 1.0;  // R(row, c)
        }
    }
    s.t = CMatrix::Zero(cfg.source_len(), cfg.n_sub);
    s.t.topRows(cfg.n_sub).setIdentity();
    return s;
}

void check_power_allocation(const RVector& p_s, const SystemConfig& cfg) {
    if (p_s.size() != cfg.n_sub) {
        throw DimensionError("power allocation length must equal n_sub");
    }
    for (Index k = 0; k < p_s.size(); ++k) {
        if (!(p_s(k) >= 0.0)) {
            throw ContractViolation("power allocation must be nonnegative");
        }
    }
}

SourceCovariance source_covariance(const RVector& p_s, const SystemConfig& cfg) {
    check_power_allocation(p_s, cfg);
    const Index n = cfg.n_sub;
    const auto dft = numkit::dft_rows(n, cfg.source_len() - n);
    const CMatrix& w = dft.idft;
    SourceCovariance out;
    out.sigma_x = w.adjoint() * p_s.cast<cplx>().asDiagonal() * w;
    const CMatrix& wt = dft.cp_extended;
    out.sigma_xext = wt * p_s.cast<cplx>().asDiagonal() * wt.adjoint();
    return out;
}

namespace {

// sum_l weight(l) * A[l:l+len, l:l+len]
CMatrix diagonal_block_sum(const CMatrix& a, const RVector& weight, Index len) {
    CMatrix out = CMatrix::Zero(len, len);
    for (Index l = 0; l < weight.size(); ++l) {
        out += weight(l) * a.block(l, l, len, len);
    }
    return out;
}

CMatrix unit_signal_form(const CVector& v, const RVector& prof, Index lr, Index n) {
    const Index lg = prof.size();
    CMatrix out = CMatrix::Zero(lr, lr);
    for (Index l = 0; l < lg; ++l) {
        const auto seg = v.segment(l, lr);
        out += prof(l) * (seg * seg.adjoint());
    }
    return static_cast<double>(n) * out;
}

// E{G^H u u^H G} for G = Toeplitz(g, N) with independent taps of variance prof(l)
CMatrix expected_outer(const CVector& u, const RVector& prof, Index out_len) {
    const Index n = u.size();
    CMatrix m = CMatrix::Zero(out_len, out_len);
    for (Index l = 0; l < prof.size(); ++l) {
        for (Index a = l; a < l + n; ++a) {
            for (Index b = l; b < l + n; ++b) {
                m(a, b) += prof(l) * u(a - l) * std::conj(u(b - l));
            }
        }
    }
    return m;
}

// Phi_N[i, j] = sigma_r^2 sum_c M[c - i, c - j]
CMatrix noise_form(const CMatrix& m, double noise_relay, Index lr, Index in_len) {
    const Index out_len = m.rows();
    CMatrix out = CMatrix::Zero(lr, lr);
    for (Index i = 0; i < lr; ++i) {
        for (Index j = 0; j < lr; ++j) {
            cplx acc{0.0, 0.0};
            for (Index c = std::max(i, j); c < in_len; ++c) {
                if (c - i < out_len && c - j < out_len) {
                    acc += m(c - i, c - j);
                }
            }
            out(i, j) = noise_relay * acc;
        }
    }
    return out;
}

}  // namespace

QuadraticForms build_quadratic_forms(const SystemConfig& cfg, const CVector& f, const RVector& p_s) {
    cfg.validate();
    if (f.size() != cfg.lf) {
        throw DimensionError("SR channel length must equal lf");
    }
    check_power_allocation(p_s, cfg);
    const Index n = cfg.n_sub;
    const Index lr = cfg.lr;
    const Index in_len = cfg.relay_in_len();
    const Index out_len = cfg.relay_out_len();
    const RVector prof = cfg.rd_profile();

    const CMatrix fmat = numkit::toeplitz_filter(f, in_len);
    const auto dft = numkit::dft_rows(n, cfg.source_len() - n);
    const CMatrix f_conj_t = fmat.leftCols(n).conjugate();

    QuadraticForms forms;
    forms.noise_dest = cfg.noise_dest;
    forms.phi_s.reserve(n);
    forms.phi_n.reserve(n);
    for (Index k = 0; k < n; ++k) {
        const CVector wk = dft.idft.row(k).transpose();
        const CVector v = f_conj_t * wk;
        const CMatrix kk = v * v.adjoint();
        forms.phi_s.push_back(static_cast<double>(n) * p_s(k) * diagonal_block_sum(kk, prof, lr));
        forms.k_mats.push_back(kk);

        const CMatrix mk = expected_outer(wk.conjugate(), prof, out_len);
        forms.phi_n.push_back(noise_form(mk, cfg.noise_relay, lr, in_len));
        forms.m_mats.push_back(mk);
    }

    const SourceCovariance cov = source_covariance(p_s, cfg);
    CMatrix pi = fmat * cov.sigma_xext * fmat.adjoint();
    pi.diagonal().array() += cfg.noise_relay;
    forms.phi_p = numkit::hermitian_part(diagonal_block_sum(pi.conjugate(), RVector::Ones(out_len), lr));
    return forms;
}

QuadraticBasis build_quadratic_basis(const SystemConfig& cfg, const CVector& f) {
    cfg.validate();
    if (f.size() != cfg.lf) {
        throw DimensionError("SR channel length must equal lf");
    }
    const Index n = cfg.n_sub;
    const Index lr = cfg.lr;
    const Index in_len = cfg.relay_in_len();
    const Index out_len = cfg.relay_out_len();
    const RVector prof = cfg.rd_profile();

    const CMatrix fmat = numkit::toeplitz_filter(f, in_len);
    const auto dft = numkit::dft_rows(n, cfg.source_len() - n);
    const CMatrix f_conj_t = fmat.leftCols(n).conjugate();

    QuadraticBasis basis;
    basis.cfg = cfg;
    basis.fw = fmat * dft.cp_extended;
    basis.relay_floor = cfg.noise_relay * static_cast<double>(out_len);
    for (Index k = 0; k < n; ++k) {
        const CVector wk = dft.idft.row(k).transpose();
        basis.unit_signal.push_back(unit_signal_form(f_conj_t * wk, prof, lr, n));
        basis.phi_n.push_back(noise_form(expected_outer(wk.conjugate(), prof, out_len), cfg.noise_relay, lr, in_len));

        const CVector q = basis.fw.col(k);
        CMatrix a = CMatrix::Zero(lr, lr);
        for (Index l = 0; l < out_len; ++l) {
            const CVector seg = q.segment(l, lr).conjugate();
            a += seg * seg.adjoint();
        }
        basis.relay_terms.push_back(a);
    }
    return basis;
}

CMatrix QuadraticBasis::relay_matrix(const RVector& p_s) const {
    const Index lr = cfg.lr;
    CMatrix out = relay_floor * CMatrix::Identity(lr, lr);
    for (Index k = 0; k < p_s.size(); ++k) {
        if (p_s(k) != 0.0) {
            out += p_s(k) * relay_terms[k];
        }
    }
    return numkit::hermitian_part(out);
}

QuadraticForms QuadraticBasis::assemble(const RVector& p_s) const {
    check_power_allocation(p_s, cfg);
    QuadraticForms forms;
    forms.noise_dest = cfg.noise_dest;
    forms.phi_n = phi_n;
    forms.phi_s.reserve(unit_signal.size());
    for (std::size_t k = 0; k < unit_signal.size(); ++k) {
        forms.phi_s.push_back(p_s(static_cast<Index>(k)) * unit_signal[k]);
    }
    forms.phi_p = relay_matrix(p_s);
    return forms;
}

double subcarrier_snr(const CVector& r, const QuadraticForms& forms, Index k) {
    if (r.size() != forms.lr()) {
        throw DimensionError("relay filter length mismatch");
    }
    const double sig = std::max(0.0, numkit::quad_form(forms.phi_s[k], r));
    const double noise = std::max(0.0, numkit::quad_form(forms.phi_n[k], r));
    return sig / (noise + forms.noise_dest);
}

RVector all_snr(const CVector& r, const QuadraticForms& forms) {
    RVector out(forms.n_sub());
    for (Index k = 0; k < forms.n_sub(); ++k) {
        out(k) = subcarrier_snr(r, forms, k);
    }
    return out;
}

double relay_power(const CVector& r, const QuadraticForms& forms) {
    if (r.size() != forms.lr()) {
        throw DimensionError("relay filter length mismatch");
    }
    return std::max(0.0, numkit::quad_form(forms.phi_p, r));
}

LpCoefficients lp_coefficients(const CVector& r, const QuadraticBasis& basis) {
    const SystemConfig& cfg = basis.cfg;
    if (r.size() != cfg.lr) {
        throw DimensionError("relay filter length mismatch");
    }
    const Index n = cfg.n_sub;
    const CMatrix rmat = numkit::toeplitz_filter(r, cfg.relay_out_len());
    const CMatrix rfw = rmat * basis.fw;
    LpCoefficients out;
    out.c1 = rfw.colwise().squaredNorm().transpose();
    out.c2 = cfg.noise_relay * rmat.squaredNorm();
    out.c3.resize(n);
    for (Index k = 0; k < n; ++k) {
        const double sig = std::max(0.0, numkit::quad_form(basis.unit_signal[k], r));
        const double noise = std::max(0.0, numkit::quad_form(basis.phi_n[k], r));
        out.c3(k) = sig / (noise + cfg.noise_dest);
    }
    return out;
}

LpCoefficients lp_coefficients(const CVector& r, const SystemConfig& cfg, const CVector& f) {
    return lp_coefficients(r, build_quadratic_basis(cfg, f));
}

CVector subcarrier_gains(const SystemConfig& cfg, const CVector& f, const CVector& r, const CVector& g) {
    cfg.validate();
    if (f.size() != cfg.lf || r.size() != cfg.lr || g.size() != cfg.lg) {
        throw DimensionError("subcarrier_gains: channel or filter length mismatch");
    }
    const Index n = cfg.n_sub;
    const CMatrix fmat = numkit::toeplitz_filter(f, cfg.relay_in_len());
    const CMatrix rmat = numkit::toeplitz_filter(r, cfg.relay_out_len());
    CVector g_ext = CVector::Zero(cfg.relay_out_len());
    g_ext.head(cfg.lg) = g;
    const CVector h = (rmat * fmat.leftCols(n)).transpose() * g_ext;
    const CMatrix w = numkit::dft_rows(n, 0).idft;
    return std::sqrt(static_cast<double>(n)) * (w.conjugate() * h);
}

CVector convolve(const CVector& a, const CVector& b) {
    if (a.size() < 1 || b.size() < 1) {
        throw DimensionError("convolve: empty operand");
    }
    CVector out = CVector::Zero(a.size() + b.size() - 1);
    for (Index i = 0; i < a.size(); ++i) {
        for (Index j = 0; j < b.size(); ++j) {
            out(i + j) += a(i) * b(j);
        }
    }
    return out;
}

}  // namespace ffrelay::model
