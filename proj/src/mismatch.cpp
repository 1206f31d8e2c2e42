#include <cmath>

#include "ffrelay/designs.hpp"
#include "ffrelay/rng.hpp"
#include "ffrelay/simkit.hpp"

namespace ffrelay::simkit {

CVector draw_taps(std::uint64_t seed, std::uint64_t trial, std::uint64_t tag, Index len, double var) {
    CounterRng rng(seed, {0x6368ULL, trial, tag});
    CVector out(len);
    for (Index i = 0; i < len; ++i) out(i) = rng.cnormal(var);
    return out;
}

namespace {

SystemConfig with_rd(SystemConfig cfg, const ChannelSpec& spec) {
    cfg.lg = spec.lg;
    cfg.tap_profile = spec.profile;
    return cfg;
}

struct Evaluated {
    double objective = 0.0;
    double relay_power = 0.0;
    RVector snr;
};

Evaluated evaluate(const designs::DesignResult& d, MismatchAlgorithm alg, const SystemConfig& truth_cfg,
                   const CVector& f) {
    const auto forms = model::build_quadratic_forms(truth_cfg, f, d.p_s);
    Evaluated e;
    e.snr = model::all_snr(d.r, forms);
    e.relay_power = model::relay_power(d.r, forms);
    if (alg == MismatchAlgorithm::joint_worst_snr) {
        e.objective = e.snr.minCoeff();
    } else {
        e.objective = 0.0;
        for (Index k = 0; k < e.snr.size(); ++k) e.objective += std::log2(1.0 + e.snr(k));
    }
    return e;
}

designs::DesignResult design(MismatchAlgorithm alg, const SystemConfig& cfg, const CVector& f) {
    if (alg == MismatchAlgorithm::joint_worst_snr) {
        return designs::design_joint_worst_snr(cfg, f, cfg.tolerance);
    }
    return designs::design_rate_pgm(cfg, f);
}

}  // namespace

Table run_mismatch_experiment(const SystemConfig& cfg, const ChannelSpec& truth, const ChannelSpec& assumed,
                              MismatchAlgorithm algorithm, int trials, std::uint64_t seed,
                              const MismatchOptions& options) {
    if (trials < 1) {
        throw numkit::ContractViolation("run_mismatch_experiment: trials must be positive");
    }
    SystemConfig truth_cfg = with_rd(cfg, truth);
    SystemConfig assumed_cfg = with_rd(cfg, assumed);
    // one prefix long enough for either RD length
    const int cp = std::max({cfg.cp(), truth_cfg.min_cp(), assumed_cfg.min_cp()});
    truth_cfg.cp_len = cp;
    assumed_cfg.cp_len = cp;
    truth_cfg.validate();
    assumed_cfg.validate();

    Table t;
    t.header = {"row_type",   "trial",          "rho",        "objective_matched", "objective_mismatched",
                "degradation", "relative_degradation", "relay_power_true", "empirical_worst_snr",
                "empirical_relay_power"};
    double sum_m = 0.0, sum_mm = 0.0, sum_d = 0.0, sum_rel = 0.0;
    for (int trial = 0; trial < trials; ++trial) {
        const auto tr = static_cast<std::uint64_t>(trial);
        const CVector f = draw_taps(seed, tr, kTagSr, cfg.lf);
        CVector f_hat = f;
        if (assumed.sr_error > 0.0) {
            f_hat += draw_taps(seed, tr, kTagSrError, cfg.lf, assumed.sr_error);
        }
        const auto matched = design(algorithm, truth_cfg, f);
        const auto mismatched = design(algorithm, assumed_cfg, f_hat);
        const Evaluated em = evaluate(matched, algorithm, truth_cfg, f);
        const Evaluated ex = evaluate(mismatched, algorithm, truth_cfg, f);
        const double deg = em.objective - ex.objective;
        const double rel = em.objective > 0.0 ? deg / em.objective : 0.0;
        std::vector<Cell> row = {std::string("trial"), std::int64_t{trial}, assumed.sr_error, em.objective,
                                 ex.objective, deg, rel, ex.relay_power, std::monostate{}, std::monostate{}};
        if (options.sim_frames > 0) {
            GSource src;
            src.profile = truth_cfg.rd_profile();
            const auto rep = simulate_link(truth_cfg, f, src, mismatched.r, mismatched.p_s,
                                           SimOptions{options.sim_frames, options.sim_draws, seed ^ (tr + 1)});
            row[8] = rep.empirical_snr.minCoeff();
            row[9] = rep.empirical_relay_power;
        }
        t.rows.push_back(std::move(row));
        sum_m += em.objective;
        sum_mm += ex.objective;
        sum_d += deg;
        sum_rel += rel;
    }
    const double n = static_cast<double>(trials);
    t.rows.push_back({std::string("aggregate"), std::monostate{}, assumed.sr_error, sum_m / n, sum_mm / n, sum_d / n,
                      sum_rel / n, std::monostate{}, std::monostate{}, std::monostate{}});
    return t;
}

}  // namespace ffrelay::simkit
