#pragma once

#include <cstdint>

#include "ffrelay/model.hpp"
#include "ffrelay/table.hpp"

namespace ffrelay::simkit {

using model::SystemConfig;
using numkit::CMatrix;
using numkit::CVector;
using numkit::Index;
using numkit::RVector;

// Time runs forward here: x(t) for t = -cp .. N-1, x(t) = x(t mod N), with
// x(t) = sum_k e^{+j 2 pi k t / N} s_k / sqrt(N) and the receiver taking
// y_k = sum_t e^{-j 2 pi k t / N} z(t) / sqrt(N) over t = 0 .. N-1.
struct FrameOutput {
    CVector demod;         // N subcarrier outputs
    CVector relay_window;  // relay transmit samples t = -(lg-1) .. N-1
};

// One frame, sample by sample. relay_noise covers relay input times
// t = -(lg+lr-2) .. N-1 (relay_in_len samples), dest_noise t = 0 .. N-1.
FrameOutput propagate_frame(const SystemConfig& cfg, const CVector& f, const CVector& g, const CVector& r,
                            const CVector& s, const CVector& relay_noise, const CVector& dest_noise);

CVector propagate_noiseless(const SystemConfig& cfg, const CVector& f, const CVector& g, const CVector& r,
                            const CVector& s);

struct GSource {
    CVector fixed;         // used when non-empty
    RVector profile;       // tap variances when sampling; empty: cfg.rd_profile()
    bool moment_match = true;  // whiten each batch of draws to the exact second moment
};

struct SimOptions {
    int frames = 10000;  // noise frames per g draw; relay power uses the same count
    int g_draws = 50;
    std::uint64_t seed = 1;
};

struct SimReport {
    RVector empirical_snr;
    RVector analytic_snr;
    double empirical_relay_power = 0.0;  // per OFDM symbol, summed over the relay window
    double analytic_relay_power = 0.0;
    double ber_overall = 0.0;           // from the empirical SNRs
    double ber_analytic = 0.0;
    double max_ici = 0.0;               // largest off-diagonal demod coefficient seen
    int frames_used = 0;
    int g_draws_used = 0;
    std::uint64_t seed = 0;
};

SimReport simulate_link(const SystemConfig& cfg, const CVector& f, const GSource& g_source, const CVector& r,
                        const RVector& p_s, const SimOptions& options = {});

// Draws of the RD channel with E{g g^H} = diag(profile); with moment_match the
// sample second moment over the batch equals diag(profile) exactly.
std::vector<CVector> draw_rd_channels(const RVector& profile, int count, bool moment_match, std::uint64_t seed);

// Trial channel taps ~ CN(0, var), keyed by (seed, trial, tag) so every sweep
// point of a trial sees the same realization.
CVector draw_taps(std::uint64_t seed, std::uint64_t trial, std::uint64_t tag, Index len, double var = 1.0);
constexpr std::uint64_t kTagSr = 1;
constexpr std::uint64_t kTagRd = 2;
constexpr std::uint64_t kTagSrError = 3;

// What the designer assumes (or what is true) about the two hops.
struct ChannelSpec {
    int lg = 3;
    RVector profile;       // RD tap variances; empty means cfg.tap_var on every tap
    double sr_error = 0.0;  // variance of the SR estimate error (rho)
};

enum class MismatchAlgorithm { joint_worst_snr, rate_pgm };

struct MismatchOptions {
    int sim_frames = 0;  // 0 skips the Monte Carlo check of the mismatched design
    int sim_draws = 20;
};

// Per trial: design with the assumed statistics and f^ = f + df, design again
// with the true ones, evaluate both under the truth. One row per trial plus
// an aggregate row; degradation = matched - mismatched objective.
Table run_mismatch_experiment(const SystemConfig& cfg, const ChannelSpec& truth, const ChannelSpec& assumed,
                              MismatchAlgorithm algorithm, int trials, std::uint64_t seed,
                              const MismatchOptions& options = {});

// Q(sqrt(snr)): per-bit error rate of Gray-coded QPSK at symbol SNR snr.
double ber_uncoded_qpsk(double snr);
double mean_ber(const RVector& snr);

}  // namespace ffrelay::simkit
