#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <mutex>
#include <thread>

#include "ffrelay/designs.hpp"
#include "ffrelay/experiment.hpp"

namespace ffrelay::experiment {

using numkit::CVector;
using numkit::Index;
using numkit::RVector;
using numkit::cplx;

namespace {

double to_db(double v) { return 10.0 * std::log10(v); }

std::uint64_t trial_seed(std::uint64_t seed, int trial) {
    return seed ^ (0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(trial) + 1));
}

RVector uniform_power(const SystemConfig& cfg) {
    return RVector::Constant(cfg.n_sub, cfg.source_budget / cfg.n_sub);
}

// columns shared by every row of a sweep point
std::vector<Cell> point_cells(const ExperimentSpec& spec, const SweepPoint& point) {
    const SystemConfig& c = point.cfg;
    return {std::int64_t{c.n_sub},         std::int64_t{c.lf}, std::int64_t{c.lg}, std::int64_t{c.lr},
            to_db(c.source_budget),        to_db(c.relay_budget), point.gamma_db,
            spec.mode == Mode::mismatch ? Cell{point.rho} : Cell{}, c.tap_var};
}

const std::vector<std::string> kPointFields = {"n_sub",           "lf",       "lg",  "lr",     "source_budget_db",
                                               "relay_budget_db", "gamma_db", "rho", "tap_var"};

// aggregate rows average the columns from here up to feasible_count
constexpr std::size_t kFirstMetric = 16;

enum Col : std::size_t {
    c_row_type = 0,
    c_mode,
    c_point,
    c_trial,
    c_seed,
    c_hash,
    c_feasible = 15,
    c_objective,
    c_worst_snr,
    c_mean_snr,
    c_worst_snr_emp,
    c_mean_snr_emp,
    c_relay_power,
    c_relay_power_emp,
    c_source_power,
    c_sum_rate,
    c_rate_per_sub,
    c_ber,
    c_ber_emp,
    c_rank_ratio,
    c_iterations,
    c_used_rand,
    c_warning,
    c_feasible_count,
    c_infeasible_count,
    c_wall_time,
    c_note,
    c_count
};

std::vector<Cell> empty_row(const ExperimentSpec& spec, const SweepPoint& point, std::size_t point_index,
                            const std::string& hash) {
    std::vector<Cell> row(c_count);
    row[c_row_type] = std::string("trial");
    row[c_mode] = mode_name(spec.mode);
    row[c_point] = static_cast<std::int64_t>(point_index);
    row[c_seed] = static_cast<std::int64_t>(spec.seed);
    row[c_hash] = hash;
    const auto pc = point_cells(spec, point);
    std::copy(pc.begin(), pc.end(), row.begin() + 6);
    return row;
}

designs::DesignResult run_design(const ExperimentSpec& spec, const SweepPoint& point, int trial, const CVector& f) {
    const SystemConfig& cfg = point.cfg;
    designs::ExtractOptions extract;
    extract.seed = trial_seed(spec.seed, trial);
    switch (spec.mode) {
        case Mode::power_min: {
            const auto forms = model::build_quadratic_forms(cfg, f, uniform_power(cfg));
            std::vector<Index> active;
            if (spec.active.empty()) {
                for (int k = 0; k < cfg.n_sub; ++k) active.push_back(k);
            } else {
                for (int k : spec.active) active.push_back(k);
            }
            const RVector gamma =
                RVector::Constant(static_cast<Index>(active.size()), std::pow(10.0, point.gamma_db / 10.0));
            auto res = designs::design_power_min(forms, active, gamma, extract);
            res.p_s = uniform_power(cfg);
            return res;
        }
        case Mode::worst_snr: {
            const auto forms = model::build_quadratic_forms(cfg, f, uniform_power(cfg));
            designs::WorstSnrOptions opt;
            opt.extract = extract;
            auto res = designs::design_worst_snr(forms, cfg.relay_budget, cfg.tolerance, opt);
            res.p_s = uniform_power(cfg);
            return res;
        }
        case Mode::worst_snr_joint: {
            designs::JointOptions opt;
            opt.extract = extract;
            return designs::design_joint_worst_snr(cfg, f, cfg.tolerance, opt);
        }
        case Mode::rate_max:
            return designs::design_rate_pgm(cfg, f);
        default:
            throw ConfigError("mode: " + mode_name(spec.mode) + " is not a design mode");
    }
}

std::vector<Cell> trial_row(const ExperimentSpec& spec, const SweepPoint& point, std::size_t point_index, int trial,
                            const std::string& hash) {
    auto row = empty_row(spec, point, point_index, hash);
    row[c_trial] = std::int64_t{trial};
    const auto start = std::chrono::steady_clock::now();
    try {
        const SystemConfig& cfg = point.cfg;
        const CVector f = simkit::draw_taps(spec.seed, static_cast<std::uint64_t>(trial), simkit::kTagSr, cfg.lf,
                                            cfg.tap_var);
        const auto res = run_design(spec, point, trial, f);
        row[c_feasible] = std::int64_t{res.feasible ? 1 : 0};
        row[c_rank_ratio] = res.rank_ratio;
        row[c_iterations] = std::int64_t{res.iterations};
        row[c_used_rand] = std::int64_t{res.used_randomization ? 1 : 0};
        row[c_warning] = std::int64_t{res.warning ? 1 : 0};
        if (!res.note.empty()) row[c_note] = res.note;
        if (res.feasible) {
            const auto forms = model::build_quadratic_forms(cfg, f, res.p_s);
            const RVector snr = model::all_snr(res.r, forms);
            double rate = 0.0;
            for (Index k = 0; k < snr.size(); ++k) rate += std::log2(1.0 + snr(k));
            const double power = model::relay_power(res.r, forms);
            row[c_worst_snr] = snr.minCoeff();
            row[c_mean_snr] = snr.mean();
            row[c_relay_power] = power;
            row[c_source_power] = res.p_s.sum();
            row[c_sum_rate] = rate;
            row[c_rate_per_sub] = rate / cfg.n_sub;
            row[c_ber] = simkit::mean_ber(snr);
            switch (spec.mode) {
                case Mode::power_min: row[c_objective] = power; break;
                case Mode::rate_max: row[c_objective] = rate; break;
                default: row[c_objective] = snr.minCoeff(); break;
            }
            if (spec.simulate) {
                simkit::GSource src;
                src.profile = cfg.rd_profile();
                const auto rep = simkit::simulate_link(
                    cfg, f, src, res.r, res.p_s,
                    simkit::SimOptions{spec.sim_frames, spec.sim_draws, trial_seed(spec.seed, trial) + 1});
                row[c_worst_snr_emp] = rep.empirical_snr.minCoeff();
                row[c_mean_snr_emp] = rep.empirical_snr.mean();
                row[c_relay_power_emp] = rep.empirical_relay_power;
                row[c_ber_emp] = rep.ber_overall;
            }
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        row[c_feasible] = std::int64_t{0};
        row[c_warning] = std::int64_t{1};
        row[c_note] = std::string("error: ") + e.what();
    }
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    row[c_wall_time] = spec.timing ? elapsed : 0.0;
    return row;
}

std::vector<Cell> aggregate_row(const ExperimentSpec& spec, const SweepPoint& point, std::size_t point_index,
                                const std::string& hash, const std::vector<std::vector<Cell>>& trials) {
    auto row = empty_row(spec, point, point_index, hash);
    row[c_row_type] = std::string("aggregate");
    std::int64_t feasible = 0;
    for (const auto& t : trials) feasible += std::get<std::int64_t>(t[c_feasible]);
    row[c_feasible_count] = feasible;
    row[c_infeasible_count] = static_cast<std::int64_t>(trials.size()) - feasible;
    row[c_feasible] = static_cast<double>(feasible) / static_cast<double>(trials.size());
    for (std::size_t c = kFirstMetric; c < c_feasible_count; ++c) {
        double sum = 0.0;
        int n = 0;
        for (const auto& t : trials) {
            if (std::get<std::int64_t>(t[c_feasible]) == 0) continue;
            const double v = cell_number(t[c]);
            if (std::isnan(v)) continue;
            sum += v;
            ++n;
        }
        if (n > 0) row[c] = sum / n;
    }
    double wall = 0.0;
    for (const auto& t : trials) wall += cell_number(t[c_wall_time]);
    row[c_wall_time] = wall;
    return row;
}

template <class Fn>
void parallel_for(std::size_t count, int threads, Fn fn) {
    std::size_t workers = threads > 0 ? static_cast<std::size_t>(threads) : std::thread::hardware_concurrency();
    workers = std::max<std::size_t>(1, std::min(workers, count));
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto work = [&] {
        for (std::size_t i = next++; i < count; i = next++) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

Table run_mismatch(const ExperimentSpec& spec) {
    const std::string hash = config_hash(spec);
    Table out;
    out.header = {"row_type", "mode", "point", "seed", "config_hash", "n_sub", "lf", "lg", "lr",
                  "source_budget_db", "relay_budget_db", "tap_var"};
    const auto points = sweep_points(spec);
    for (std::size_t i = 0; i < points.size(); ++i) {
        const SweepPoint& p = points[i];
        simkit::ChannelSpec truth = spec.truth;
        simkit::ChannelSpec assumed = spec.assumed;
        if (truth.lg == 0) truth.lg = p.cfg.lg;
        if (assumed.lg == 0) assumed.lg = p.cfg.lg;
        if (truth.profile.size() == 0 && truth.lg == p.cfg.lg) truth.profile = p.cfg.tap_profile;
        if (assumed.profile.size() == 0 && assumed.lg == p.cfg.lg) assumed.profile = p.cfg.tap_profile;
        truth.sr_error = 0.0;
        assumed.sr_error = p.rho;
        simkit::MismatchOptions opt;
        opt.sim_frames = spec.simulate ? spec.sim_frames : 0;
        opt.sim_draws = spec.sim_draws;
        const Table t = simkit::run_mismatch_experiment(p.cfg, truth, assumed, spec.algorithm, spec.trials,
                                                        spec.seed, opt);
        if (i == 0) out.header.insert(out.header.end(), t.header.begin() + 1, t.header.end());
        for (const auto& r : t.rows) {
            std::vector<Cell> row = {r[0],
                                     mode_name(spec.mode),
                                     static_cast<std::int64_t>(i),
                                     static_cast<std::int64_t>(spec.seed),
                                     hash,
                                     std::int64_t{p.cfg.n_sub},
                                     std::int64_t{p.cfg.lf},
                                     std::int64_t{p.cfg.lg},
                                     std::int64_t{p.cfg.lr},
                                     to_db(p.cfg.source_budget),
                                     to_db(p.cfg.relay_budget),
                                     p.cfg.tap_var};
            row.insert(row.end(), r.begin() + 1, r.end());
            out.rows.push_back(std::move(row));
        }
    }
    return out;
}

}  // namespace

CVector fixture_sr() {
    CVector f(3);
    f << cplx(-0.0477, 0.7546), cplx(0.1938, 0.2019), cplx(-0.4832, -0.2111);
    return f;
}

CVector fixture_rd() {
    CVector g(3);
    g << cplx(-0.8370, -0.2463), cplx(-0.3438, 0.1734), cplx(-0.5136, 0.4147);
    return g;
}

const std::vector<std::string>& result_columns() {
    static const std::vector<std::string> cols = [] {
        std::vector<std::string> c = {"row_type", "mode", "point", "trial", "seed", "config_hash"};
        c.insert(c.end(), kPointFields.begin(), kPointFields.end());
        c.insert(c.end(), {"feasible", "objective", "worst_snr", "mean_snr", "worst_snr_empirical",
                           "mean_snr_empirical", "relay_power", "relay_power_empirical", "source_power", "sum_rate",
                           "rate_per_subcarrier", "ber", "ber_empirical", "rank_ratio", "iterations",
                           "used_randomization", "warning", "feasible_count", "infeasible_count", "wall_time",
                           "note"});
        return c;
    }();
    return cols;
}

std::vector<Cell> run_trial(const ExperimentSpec& spec, const SweepPoint& point, std::size_t point_index, int trial) {
    return trial_row(spec, point, point_index, trial, config_hash(spec));
}

Table run_experiment(const ExperimentSpec& spec) {
    spec.validate();
    if (spec.mode == Mode::validate) return run_validation(spec);
    if (spec.mode == Mode::mismatch) return run_mismatch(spec);

    const std::string hash = config_hash(spec);
    const auto points = sweep_points(spec);
    const std::size_t trials = static_cast<std::size_t>(spec.trials);
    std::vector<std::vector<Cell>> rows(points.size() * trials);
    parallel_for(rows.size(), spec.threads, [&](std::size_t i) {
        const std::size_t p = i / trials;
        rows[i] = trial_row(spec, points[p], p, static_cast<int>(i % trials), hash);
    });

    Table t;
    t.header = result_columns();
    for (std::size_t p = 0; p < points.size(); ++p) {
        const auto first = rows.begin() + static_cast<std::ptrdiff_t>(p * trials);
        std::vector<std::vector<Cell>> block(first, first + static_cast<std::ptrdiff_t>(trials));
        t.rows.insert(t.rows.end(), block.begin(), block.end());
        t.rows.push_back(aggregate_row(spec, points[p], p, hash, block));
    }
    return t;
}

Table run_validation(const ExperimentSpec& spec) {
    const std::string hash = config_hash(spec);
    Table t;
    t.header = {"row_type", "point",  "seed",     "config_hash",    "n_sub",        "lr",
                "subcarrier", "response_fg_db", "response_frg_db", "p_s", "snr_analytic", "snr_empirical"};
    const auto points = sweep_points(spec);
    for (std::size_t i = 0; i < points.size(); ++i) {
        const SystemConfig& cfg = points[i].cfg;
        CVector f, g;
        if (spec.channel == "fixture") {
            if (cfg.lf != 3 || cfg.lg != 3) {
                throw ConfigError("[experiment] channel: the fixture channel needs lf = lg = 3");
            }
            f = fixture_sr();
            g = fixture_rd();
        } else {
            f = simkit::draw_taps(spec.seed, 0, simkit::kTagSr, cfg.lf, cfg.tap_var);
            g = simkit::draw_taps(spec.seed, 0, simkit::kTagRd, cfg.lg);
            const RVector prof = cfg.rd_profile();
            for (Index l = 0; l < g.size(); ++l) g(l) *= std::sqrt(prof(l));
        }
        const RVector p = uniform_power(cfg);
        const auto forms = model::build_quadratic_forms(cfg, f, p);
        designs::WorstSnrOptions opt;
        opt.extract.seed = trial_seed(spec.seed, 0);
        const auto res = designs::design_worst_snr(forms, cfg.relay_budget, cfg.tolerance, opt);
        const RVector snr = model::all_snr(res.r, forms);
        RVector emp;
        if (spec.simulate) {
            simkit::GSource src;
            src.profile = cfg.rd_profile();
            emp = simkit::simulate_link(cfg, f, src, res.r, p,
                                        simkit::SimOptions{spec.sim_frames, spec.sim_draws, trial_seed(spec.seed, 1)})
                      .empirical_snr;
        }
        const CVector fg = model::convolve(f, g);
        const CVector frg = model::convolve(model::convolve(f, res.r), g);
        const double pi = std::acos(-1.0);
        auto response = [&](const CVector& h, int k) {
            cplx acc = 0.0;
            for (Index l = 0; l < h.size(); ++l) {
                acc += h(l) * std::polar(1.0, -2.0 * pi * k * static_cast<double>(l) / cfg.n_sub);
            }
            return 10.0 * std::log10(std::max(std::norm(acc), 1e-300));
        };
        for (int k = 0; k < cfg.n_sub; ++k) {
            t.rows.push_back({std::string("subcarrier"), static_cast<std::int64_t>(i),
                              static_cast<std::int64_t>(spec.seed), hash, std::int64_t{cfg.n_sub},
                              std::int64_t{cfg.lr}, std::int64_t{k}, response(fg, k), response(frg, k), p(k),
                              snr(k), emp.size() > 0 ? Cell{emp(k)} : Cell{}});
        }
    }
    return t;
}

}  // namespace ffrelay::experiment
