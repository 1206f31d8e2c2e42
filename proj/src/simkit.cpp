#include "ffrelay/simkit.hpp"

#include <cmath>
#include <numbers>

#include "ffrelay/rng.hpp"

namespace ffrelay::simkit {

using numkit::ContractViolation;
using numkit::cplx;
using numkit::DimensionError;

namespace {

constexpr double kModSign = 1.0;  // sign of the exponent at the transmitter

// samples indexed from a negative start time
class Signal {
public:
    Signal(Index start, Index len) : start_(start), v_(CVector::Zero(len)) {}
    cplx& at(Index t) { return v_(t - start_); }
    cplx get(Index t) const {
        const Index i = t - start_;
        return (i >= 0 && i < v_.size()) ? v_(i) : cplx(0.0, 0.0);
    }
    Index start() const { return start_; }
    Index end() const { return start_ + v_.size(); }
    CVector slice(Index from, Index len) const {
        CVector out(len);
        for (Index i = 0; i < len; ++i) out(i) = get(from + i);
        return out;
    }

private:
    Index start_;
    CVector v_;
};

void check_link(const SystemConfig& cfg, const CVector& f, const CVector& g, const CVector& r) {
    if (cfg.cp() < cfg.min_cp()) {
        throw ContractViolation("cyclic prefix shorter than the end-to-end channel memory");
    }
    cfg.validate();
    if (f.size() != cfg.lf || g.size() != cfg.lg || r.size() != cfg.lr) {
        throw DimensionError("channel or filter length does not match the configuration");
    }
}

}  // namespace

FrameOutput propagate_frame(const SystemConfig& cfg, const CVector& f, const CVector& g, const CVector& r,
                            const CVector& s, const CVector& relay_noise, const CVector& dest_noise) {
    check_link(cfg, f, g, r);
    const Index n = cfg.n_sub;
    const Index cp = cfg.cp();
    if (s.size() != n || relay_noise.size() != cfg.relay_in_len() || dest_noise.size() != n) {
        throw DimensionError("propagate_frame: frame buffer sizes");
    }
    const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(n));
    const double step = 2.0 * std::numbers::pi / static_cast<double>(n);

    // transmitter: IDFT then cyclic prefix
    Signal x(-cp, n + cp);
    for (Index t = -cp; t < n; ++t) {
        const Index tt = ((t % n) + n) % n;
        cplx acc(0.0, 0.0);
        for (Index k = 0; k < n; ++k) {
            acc += std::polar(1.0, kModSign * step * static_cast<double>((k * tt) % n)) * s(k);
        }
        x.at(t) = acc * inv_sqrt_n;
    }

    // relay input, only the span that reaches the relay output window
    const Index in_start = -(cfg.lg + cfg.lr - 2);
    Signal u(in_start, n - in_start);
    for (Index t = in_start; t < n; ++t) {
        cplx acc = relay_noise(t - in_start);
        for (Index i = 0; i < cfg.lf; ++i) {
            acc += f(i) * x.get(t - i);
        }
        u.at(t) = acc;
    }

    const Index out_start = -(cfg.lg - 1);
    Signal y(out_start, n - out_start);
    for (Index t = out_start; t < n; ++t) {
        cplx acc(0.0, 0.0);
        for (Index j = 0; j < cfg.lr; ++j) {
            acc += r(j) * u.get(t - j);
        }
        y.at(t) = acc;
    }

    Signal z(0, n);
    for (Index t = 0; t < n; ++t) {
        cplx acc = dest_noise(t);
        for (Index l = 0; l < cfg.lg; ++l) {
            acc += g(l) * y.get(t - l);
        }
        z.at(t) = acc;
    }

    FrameOutput out;
    out.demod.resize(n);
    for (Index k = 0; k < n; ++k) {
        cplx acc(0.0, 0.0);
        for (Index t = 0; t < n; ++t) {
            acc += std::polar(1.0, -kModSign * step * static_cast<double>((k * t) % n)) * z.get(t);
        }
        out.demod(k) = acc * inv_sqrt_n;
    }
    out.relay_window = y.slice(out_start, n - out_start);
    return out;
}

CVector propagate_noiseless(const SystemConfig& cfg, const CVector& f, const CVector& g, const CVector& r,
                            const CVector& s) {
    return propagate_frame(cfg, f, g, r, s, CVector::Zero(cfg.relay_in_len()), CVector::Zero(cfg.n_sub)).demod;
}

std::vector<CVector> draw_rd_channels(const RVector& profile, int count, bool moment_match, std::uint64_t seed) {
    const Index lg = profile.size();
    if (count < 1 || lg < 1) {
        throw ContractViolation("draw_rd_channels: need at least one draw and one tap");
    }
    if (moment_match && count < lg) {
        throw ContractViolation("draw_rd_channels: moment matching needs at least as many draws as taps");
    }
    CMatrix gm(lg, count);
    for (int d = 0; d < count; ++d) {
        CounterRng rng(seed, {0x7264ULL, static_cast<std::uint64_t>(d)});
        for (Index l = 0; l < lg; ++l) gm(l, d) = rng.cnormal(1.0);
    }
    if (moment_match) {
        // G <- diag(sqrt(prof)) S^{-1/2} G with S the sample second moment
        const CMatrix sample = gm * gm.adjoint() / static_cast<double>(count);
        const auto eig = numkit::hermitian_eig(numkit::hermitian_part(sample));
        CMatrix inv_root = eig.vectors * eig.values.cwiseSqrt().cwiseInverse().asDiagonal() * eig.vectors.adjoint();
        gm = profile.cwiseSqrt().asDiagonal() * inv_root * gm;
    } else {
        gm = profile.cwiseSqrt().asDiagonal() * gm;
    }
    std::vector<CVector> out(count);
    for (int d = 0; d < count; ++d) out[d] = gm.col(d);
    return out;
}

namespace {

// linear response of the frame map to unit inputs, built from propagate_frame
struct Responses {
    CMatrix demod_signal;  // N x N
    CMatrix demod_relay;   // N x Lt
    CMatrix demod_dest;    // N x N
    CMatrix win_signal;    // Lw x N
    CMatrix win_relay;     // Lw x Lt
};

Responses responses(const SystemConfig& cfg, const CVector& f, const CVector& g, const CVector& r) {
    const Index n = cfg.n_sub;
    const Index lt = cfg.relay_in_len();
    const Index lw = cfg.relay_out_len();
    Responses out;
    out.demod_signal.resize(n, n);
    out.demod_relay.resize(n, lt);
    out.demod_dest.resize(n, n);
    out.win_signal.resize(lw, n);
    out.win_relay.resize(lw, lt);
    const CVector zn = CVector::Zero(n);
    const CVector zt = CVector::Zero(lt);
    for (Index k = 0; k < n; ++k) {
        CVector e = zn;
        e(k) = 1.0;
        const auto fo = propagate_frame(cfg, f, g, r, e, zt, zn);
        out.demod_signal.col(k) = fo.demod;
        out.win_signal.col(k) = fo.relay_window;
        out.demod_dest.col(k) = propagate_frame(cfg, f, g, r, zn, zt, e).demod;
    }
    for (Index i = 0; i < lt; ++i) {
        CVector e = zt;
        e(i) = 1.0;
        const auto fo = propagate_frame(cfg, f, g, r, zn, e, zn);
        out.demod_relay.col(i) = fo.demod;
        out.win_relay.col(i) = fo.relay_window;
    }
    return out;
}

CMatrix noise_block(std::uint64_t seed, std::uint64_t purpose, std::uint64_t draw, int first, int count, Index rows,
                    const RVector& var) {
    CMatrix out(rows, count);
    for (int c = 0; c < count; ++c) {
        CounterRng rng(seed, {purpose, draw, static_cast<std::uint64_t>(first + c)});
        for (Index i = 0; i < rows; ++i) out(i, c) = rng.cnormal(var(i));
    }
    return out;
}

constexpr int kChunk = 2048;

}  // namespace

SimReport simulate_link(const SystemConfig& cfg, const CVector& f, const GSource& g_source, const CVector& r,
                        const RVector& p_s, const SimOptions& options) {
    if (cfg.cp() < cfg.min_cp()) {
        throw ContractViolation("cyclic prefix shorter than the end-to-end channel memory");
    }
    cfg.validate();
    model::check_power_allocation(p_s, cfg);
    if (options.frames < 1 || options.g_draws < 1) {
        throw ContractViolation("simulate_link: frames and g_draws must be positive");
    }
    const Index n = cfg.n_sub;
    const Index lt = cfg.relay_in_len();

    std::vector<CVector> gs;
    if (g_source.fixed.size() > 0) {
        gs.push_back(g_source.fixed);
    } else {
        const RVector prof = g_source.profile.size() > 0 ? g_source.profile : cfg.rd_profile();
        if (prof.size() != cfg.lg) {
            throw DimensionError("simulate_link: RD profile length differs from lg");
        }
        gs = draw_rd_channels(prof, options.g_draws, g_source.moment_match, options.seed);
    }

    SimReport rep;
    rep.seed = options.seed;
    rep.frames_used = options.frames;
    rep.g_draws_used = static_cast<int>(gs.size());

    const RVector relay_var = RVector::Constant(lt, cfg.noise_relay);
    const RVector dest_var = RVector::Constant(n, cfg.noise_dest);

    RVector signal_acc = RVector::Zero(n);
    RVector noise_acc = RVector::Zero(n);
    double relay_acc = 0.0;
    for (std::size_t d = 0; d < gs.size(); ++d) {
        const Responses resp = responses(cfg, f, gs[d], r);
        const CVector coef = resp.demod_signal.diagonal();
        CMatrix off = resp.demod_signal;
        off.diagonal().setZero();
        rep.max_ici = std::max(rep.max_ici, off.cwiseAbs().maxCoeff());
        signal_acc += p_s.cwiseProduct(coef.cwiseAbs2());

        // signal-free frames
        for (int first = 0; first < options.frames; first += kChunk) {
            const int count = std::min(kChunk, options.frames - first);
            const CMatrix nr = noise_block(options.seed, 1, d, first, count, lt, relay_var);
            const CMatrix nd = noise_block(options.seed, 2, d, first, count, n, dest_var);
            const CMatrix z = resp.demod_relay * nr + resp.demod_dest * nd;
            noise_acc += z.cwiseAbs2().rowwise().sum();
        }

        if (d == 0) {
            // the relay window does not see g
            for (int first = 0; first < options.frames; first += kChunk) {
                const int count = std::min(kChunk, options.frames - first);
                const CMatrix s = noise_block(options.seed, 3, 0, first, count, n, p_s);
                const CMatrix nr = noise_block(options.seed, 4, 0, first, count, lt, relay_var);
                const CMatrix y = resp.win_signal * s + resp.win_relay * nr;
                relay_acc += y.cwiseAbs2().sum();
            }
        }
    }
    const double draws = static_cast<double>(gs.size());
    const RVector signal = signal_acc / draws;
    const RVector noise = noise_acc / (draws * options.frames);
    rep.empirical_snr = signal.cwiseQuotient(noise);
    rep.empirical_relay_power = relay_acc / options.frames;

    const auto forms = model::build_quadratic_forms(cfg, f, p_s);
    rep.analytic_snr = model::all_snr(r, forms);
    rep.analytic_relay_power = model::relay_power(r, forms);
    rep.ber_overall = mean_ber(rep.empirical_snr);
    rep.ber_analytic = mean_ber(rep.analytic_snr);
    return rep;
}

double ber_uncoded_qpsk(double snr) {
    if (!(snr >= 0.0)) {
        throw ContractViolation("ber_uncoded_qpsk: snr must be nonnegative");
    }
    return 0.5 * std::erfc(std::sqrt(snr / 2.0));
}

double mean_ber(const RVector& snr) {
    double acc = 0.0;
    for (Index k = 0; k < snr.size(); ++k) acc += ber_uncoded_qpsk(std::max(0.0, snr(k)));
    return snr.size() > 0 ? acc / static_cast<double>(snr.size()) : 0.0;
}

}  // namespace ffrelay::simkit
