// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <algorithm>
#include <random>
#include <sstream>
#include <string>
#include <unistd.h>

#include "ffrelay/designs.hpp"
#include "ffrelay/experiment.hpp"
#include "ffrelay/simkit.hpp"

using namespace ffrelay;
using numkit::CVector;
using numkit::Index;
using numkit::RVector;
using numkit::cplx;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

CVector crandn(std::mt19937_64& gen, Index n, double var = 1.0) {
    std::normal_distribution<double> nd(0.0, std::sqrt(var / 2.0));
    CVector v(n);
    for (Index i = 0; i < n; ++i) v(i) = cplx(nd(gen), nd(gen));
    return v;
}

RVector runif(std::mt19937_64& gen, Index n, double lo, double hi) {
    std::uniform_real_distribution<double> ud(lo, hi);
    RVector v(n);
    for (Index i = 0; i < n; ++i) v(i) = ud(gen);
    return v;
}

model::SystemConfig config(int n, int lr, double ps = 100.0, double pr = 100.0) {
    model::SystemConfig cfg;
    cfg.n_sub = n;
    cfg.lf = 3;
    cfg.lg = 3;
    cfg.lr = lr;
    cfg.source_budget = ps;
    cfg.relay_budget = pr;
    return cfg;
}

RVector uniform_power(const model::SystemConfig& cfg) {
    return RVector::Constant(cfg.n_sub, cfg.source_budget / cfg.n_sub);
}

double rel(double a, double b) {
    const double s = std::max(std::abs(a), std::abs(b));
    return s == 0.0 ? 0.0 : std::abs(a - b) / s;
}

struct Outcome {
    bool pass = true;
    std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const std::function<Outcome()>& body) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("%s criterion %d (%s): %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

// Criteria 1 and 2 share the Monte Carlo runs.
struct OracleRuns {
    double worst_snr_err = 0.0;
    double worst_power_err = 0.0;
    double seconds = 0.0;
};

OracleRuns oracle_runs() {
    OracleRuns out;
    std::mt19937_64 gen(101);
    const auto t0 = Clock::now();
    for (int i = 0; i < 20; ++i) {
        const int n = i < 10 ? 16 : 32;
        const auto cfg = config(n, 1 + i % 6);
        const CVector f = crandn(gen, cfg.lf);
        const CVector r = crandn(gen, cfg.lr);
        RVector p = runif(gen, n, 0.2, 1.0);
        p *= cfg.source_budget / p.sum();
        simkit::GSource src;
        const auto rep = simkit::simulate_link(cfg, f, src, r, p, simkit::SimOptions{10000, 50, 500 + static_cast<std::uint64_t>(i)});
        for (Index k = 0; k < n; ++k) {
            out.worst_snr_err = std::max(out.worst_snr_err, rel(rep.empirical_snr(k), rep.analytic_snr(k)));
        }
        out.worst_power_err =
            std::max(out.worst_power_err, rel(rep.empirical_relay_power, rep.analytic_relay_power));
    }
    out.seconds = seconds_since(t0);
    return out;
}

experiment::ExperimentSpec trend_spec(experiment::Mode mode, std::vector<double> lrs) {
    experiment::ExperimentSpec spec;
    spec.mode = mode;
    spec.base = config(32, 1);
    spec.trials = 200;
    spec.seed = 2024;
    spec.base.seed = spec.seed;
    spec.axes.push_back({"lr", std::move(lrs)});
    return spec;
}

// per-point trial rows of a sweep table
std::vector<std::vector<const std::vector<Cell>*>> trials_by_point(const Table& t, std::size_t points) {
    std::vector<std::vector<const std::vector<Cell>*>> out(points);
    const std::size_t type = t.column("row_type");
    const std::size_t point = t.column("point");
    for (const auto& row : t.rows) {
        if (std::get<std::string>(row[type]) != "trial") continue;
        out[static_cast<std::size_t>(std::get<std::int64_t>(row[point]))].push_back(&row);
    }
    return out;
}

double mean_column(const Table& t, const std::vector<const std::vector<Cell>*>& rows, const std::string& name) {
    const std::size_t c = t.column(name);
    double acc = 0.0;
    for (const auto* r : rows) acc += cell_number((*r)[c]);
    return acc / static_cast<double>(rows.size());
}

}  // namespace

int main() {
    const auto start = Clock::now();
    OracleRuns mc;
    bool mc_ok = true;
    std::string mc_error;
    try {
        mc = oracle_runs();
    } catch (const std::exception& e) {
        mc_ok = false;
        mc_error = e.what();
    }

    report(1, "analytic vs simulated SNR", [&] {
        if (!mc_ok) return Outcome{false, "exception: " + mc_error};
        return Outcome{mc.worst_snr_err <= 0.03 && mc.seconds <= 120.0,
                       fmt("max per-subcarrier relative error %.4f (limit 0.03), 20 fixtures in %.1f s (limit 120)",
                           mc.worst_snr_err, mc.seconds)};
    });

    report(2, "relay power oracle and LP identity", [&] {
        if (!mc_ok) return Outcome{false, "exception: " + mc_error};
        std::mt19937_64 gen(202);
        double worst_identity = 0.0;
        for (int i = 0; i < 100; ++i) {
            const auto cfg = config(i % 2 ? 16 : 32, 1 + i % 8);
            const auto basis = model::build_quadratic_basis(cfg, crandn(gen, cfg.lf));
            const CVector r = crandn(gen, cfg.lr);
            const RVector p = runif(gen, cfg.n_sub, 0.0, 8.0);
            const auto coef = model::lp_coefficients(r, basis);
            const double lp = p.dot(coef.c1) + coef.c2;
            worst_identity = std::max(worst_identity, rel(lp, model::relay_power(r, basis.assemble(p))));
        }
        return Outcome{mc.worst_power_err <= 0.02 && worst_identity <= 1e-10,
                       fmt("max empirical power error %.4f (limit 0.02); identity max relative %.2e (limit 1e-10)",
                           mc.worst_power_err, worst_identity)};
    });

    report(3, "noiseless chain diagonalization", [] {
        std::mt19937_64 gen(303);
        double worst = 0.0;
        const double pi = std::acos(-1.0);
        for (int i = 0; i < 10; ++i) {
            const auto cfg = config(i % 2 ? 16 : 32, 1 + i % 6);
            const CVector f = crandn(gen, cfg.lf), g = crandn(gen, cfg.lg), r = crandn(gen, cfg.lr);
            const CVector s = crandn(gen, cfg.n_sub);
            // h = f * r * g by direct sums
            CVector fr = CVector::Zero(cfg.lf + cfg.lr - 1);
            for (Index a = 0; a < cfg.lf; ++a)
                for (Index b = 0; b < cfg.lr; ++b) fr(a + b) += f(a) * r(b);
            CVector h = CVector::Zero(fr.size() + cfg.lg - 1);
            for (Index a = 0; a < fr.size(); ++a)
                for (Index b = 0; b < cfg.lg; ++b) h(a + b) += fr(a) * g(b);
            const CVector out = simkit::propagate_noiseless(cfg, f, g, r, s);
            double scale = 0.0, err = 0.0;
            for (int k = 0; k < cfg.n_sub; ++k) {
                cplx d = 0.0;
                for (Index l = 0; l < h.size(); ++l) d += h(l) * std::polar(1.0, -2.0 * pi * k * l / cfg.n_sub);
                err = std::max(err, std::abs(out(k) - d * s(k)));
                scale = std::max(scale, std::abs(d * s(k)));
            }
            worst = std::max(worst, err / scale);
        }
        return Outcome{worst <= 1e-10, fmt("max error %.2e relative to the largest output (limit 1e-10)", worst)};
    });

    report(4, "power-min SDP certificates", [] {
        std::mt19937_64 gen(404);
        double worst_kkt = 0.0, worst_violation = 0.0, worst_single_rank = 0.0;
        int single = 0, infeasible = 0;
        for (int i = 0; i < 50; ++i) {
            const auto cfg = config(i % 2 ? 16 : 32, 1 + i % 6);
            const CVector f = crandn(gen, cfg.lf);
            const RVector p = runif(gen, cfg.n_sub, 0.5, 1.5) * (cfg.source_budget / cfg.n_sub);
            const auto forms = model::build_quadratic_forms(cfg, f, p);
            // a random full-budget filter already clears every target: strictly feasible
            CVector r0 = crandn(gen, cfg.lr);
            r0 *= std::sqrt(cfg.relay_budget / model::relay_power(r0, forms));
            const RVector snr0 = model::all_snr(r0, forms);
            std::vector<Index> all(static_cast<std::size_t>(cfg.n_sub));
            std::iota(all.begin(), all.end(), 0);
            std::shuffle(all.begin(), all.end(), gen);
            const std::size_t count = 1 + static_cast<std::size_t>(i % 8);
            std::vector<Index> active(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(count));
            std::sort(active.begin(), active.end());
            const RVector frac = runif(gen, static_cast<Index>(count), 0.05, 0.8);
            RVector gamma(static_cast<Index>(count));
            for (std::size_t j = 0; j < count; ++j) gamma(static_cast<Index>(j)) = frac(static_cast<Index>(j)) * snr0(active[j]);

            designs::ExtractOptions ex;
            ex.seed = 404 + static_cast<std::uint64_t>(i);
            const auto res = designs::design_power_min(forms, active, gamma, ex);
            if (!res.feasible) {
                ++infeasible;
                continue;
            }
            worst_kkt = std::max({worst_kkt, res.kkt.primal, res.kkt.dual, res.kkt.gap});
            const RVector snr = model::all_snr(res.r, forms);
            for (std::size_t j = 0; j < count; ++j) {
                const double g = gamma(static_cast<Index>(j));
                worst_violation = std::max(worst_violation, (g - snr(active[j])) / g);
            }
            const double top = res.duals.maxCoeff();
            if ((res.duals.array() > 1e-6 * top).count() == 1) {
                ++single;
                worst_single_rank = std::max(worst_single_rank, res.rank_ratio);
            }
        }
        const bool ok = infeasible == 0 && worst_kkt <= 1e-6 && worst_violation <= 1e-6 && worst_single_rank <= 1e-6;
        return Outcome{ok, fmt("max KKT residual %.2e, max relative SNR shortfall %.2e, %g single-active instances "
                               "with max rank ratio %.2e",
                               worst_kkt, std::max(0.0, worst_violation), single, worst_single_rank) +
                               (infeasible ? " (" + std::to_string(infeasible) + " reported infeasible)" : "")};
    });

    report(5, "bisection sandwich", [] {
        std::mt19937_64 gen(505);
        const double eps = 1e-3;
        int bad = 0;
        for (int i = 0; i < 20; ++i) {
            const auto cfg = config(32, 1 + i % 6);
            const auto forms = model::build_quadratic_forms(cfg, crandn(gen, cfg.lf), uniform_power(cfg));
            const auto res = designs::design_worst_snr(forms, cfg.relay_budget, eps);
            const double tau = res.sdp_value;
            const bool below = designs::worst_snr_feasible(forms, cfg.relay_budget, tau - eps).feasible;
            const bool above = designs::worst_snr_feasible(forms, cfg.relay_budget, tau + eps).feasible;
            if (!below || above) ++bad;
        }
        return Outcome{bad == 0, std::to_string(20 - bad) + " of 20 channels feasible at tau*-eps and infeasible at tau*+eps"};
    });

    report(6, "joint design monotonicity", [] {
        std::mt19937_64 gen(606);
        const double eps = 1e-3;
        double worst_drop = 0.0, worst_gap = -1e300;
        for (int i = 0; i < 100; ++i) {
            const auto cfg = config(32, 1 + i % 6);
            const CVector f = crandn(gen, cfg.lf);
            const auto res = designs::design_joint_worst_snr(cfg, f, eps);
            for (std::size_t j = 1; j < res.trace.size(); ++j) {
                worst_drop = std::max(worst_drop, res.trace[j - 1] - res.trace[j]);
            }
            const auto alg1 =
                designs::design_worst_snr(model::build_quadratic_forms(cfg, f, uniform_power(cfg)), cfg.relay_budget, eps);
            worst_gap = std::max(worst_gap, alg1.objective - eps - res.objective);
        }
        return Outcome{worst_drop <= 1e-7 && worst_gap <= 0.0,
                       fmt("largest trace decrease %.2e (limit 1e-7); largest shortfall below filter-only - eps %.2e",
                           worst_drop, std::max(0.0, worst_gap))};
    });

    report(7, "projected gradient soundness", [] {
        std::mt19937_64 gen(707);
        double worst_budget = 0.0, worst_rise = 0.0, worst_grad = 0.0, worst_wf = 0.0;
        for (int i = 0; i < 10; ++i) {
            const auto cfg = config(i % 2 ? 16 : 32, 1 + i % 6);
            const auto basis = model::build_quadratic_basis(cfg, crandn(gen, cfg.lf));
            designs::PgmOptions opt;
            opt.on_accept = [&](const RVector& p, const CVector& r) {
                worst_budget = std::max(worst_budget, p.sum() / cfg.source_budget - 1.0);
                worst_budget = std::max(worst_budget, -p.minCoeff() / cfg.source_budget);
                worst_budget = std::max(worst_budget,
                                        numkit::quad_form(basis.relay_matrix(p), r) / cfg.relay_budget - 1.0);
            };
            const auto res = designs::design_rate_pgm(basis, opt);
            for (std::size_t j = 1; j < res.trace.size(); ++j) {
                worst_rise = std::max(worst_rise, res.trace[j] - res.trace[j - 1]);
            }
        }
        for (int i = 0; i < 30; ++i) {
            const auto cfg = config(8 + 8 * (i % 3), 1 + i % 5);
            const auto basis = model::build_quadratic_basis(cfg, crandn(gen, cfg.lf));
            const RVector p = runif(gen, cfg.n_sub, 0.5, 20.0);
            const CVector r = crandn(gen, cfg.lr);
            const auto g = designs::rate_gradient(p, r, basis);
            auto check = [&](double analytic, double fd) { worst_grad = std::max(worst_grad, rel(analytic, fd)); };
            for (Index k = 0; k < cfg.n_sub; ++k) {
                const double h = 1e-6 * std::max(1.0, p(k));
                RVector pp = p, pm = p;
                pp(k) += h;
                pm(k) -= h;
                check(g.dp(k), (designs::rate_cost(pp, r, basis) - designs::rate_cost(pm, r, basis)) / (2 * h));
            }
            for (Index l = 0; l < cfg.lr; ++l) {
                for (cplx dir : {cplx(1, 0), cplx(0, 1)}) {
                    const double h = 1e-6 * std::max(1.0, std::abs(r(l)));
                    CVector rp = r, rm = r;
                    rp(l) += h * dir;
                    rm(l) -= h * dir;
                    const double fd = (designs::rate_cost(p, rp, basis) - designs::rate_cost(p, rm, basis)) / (2 * h);
                    check(dir.real() != 0.0 ? g.dr(l).real() : g.dr(l).imag(), fd);
                }
            }
        }
        for (int i = 0; i < 10; ++i) {
            const auto cfg = config(16, 1 + i % 4);
            const CVector r = crandn(gen, cfg.lr);
            auto basis = model::build_quadratic_basis(cfg, crandn(gen, cfg.lf));
            const auto coef = model::lp_coefficients(r, basis);
            basis.cfg.relay_budget = cfg.source_budget * coef.c1.maxCoeff() + coef.c2 + 1.0;
            designs::PgmOptions opt;
            opt.fix_filter = true;
            opt.init_r = r;
            const auto res = designs::design_rate_pgm(basis, opt);
            // water level by bisection
            const RVector c = coef.c3;
            double lo = 0.0, hi = cfg.source_budget + 1.0 / c.minCoeff() + 1.0;
            for (int it = 0; it < 200; ++it) {
                const double mu = 0.5 * (lo + hi);
                const double used = (mu - c.cwiseInverse().array()).cwiseMax(0.0).sum();
                (used > cfg.source_budget ? hi : lo) = mu;
            }
            double oracle = 0.0;
            for (Index k = 0; k < c.size(); ++k) oracle += std::log2(1.0 + std::max(0.0, lo - 1.0 / c(k)) * c(k));
            worst_wf = std::max(worst_wf, std::abs(res.objective - oracle) / std::max(1.0, oracle));
        }
        const bool ok = worst_budget <= 1e-8 && worst_rise <= 0.0 && worst_grad <= 1e-5 && worst_wf <= 1e-5;
        return Outcome{ok, fmt("budget excess %.2e (limit 1e-8), cost rise %.2e, gradient error %.2e (limit 1e-5), "
                               "water-filling gap %.2e (limit 1e-5)",
                               std::max(0.0, worst_budget), worst_rise, worst_grad, worst_wf)};
    });

    report(8, "trend reproduction", [] {
        const auto t0 = Clock::now();
        std::ostringstream msg;
        bool ok = true;

        // (a) feasibility of power-min does not depend on the filter, so the
        // common-feasible set is compared; gamma -5 dB keeps L_r = 1 above 50%
        auto pm = trend_spec(experiment::Mode::power_min, {1, 2, 4});
        pm.gamma_db = -5.0;
        for (int k = 0; k < 28; ++k) pm.active.push_back(k);
        const Table tp = experiment::run_experiment(pm);
        const auto pts = trials_by_point(tp, 3);
        const std::size_t feas = tp.column("feasible");
        std::vector<std::vector<const std::vector<Cell>*>> common(3);
        int af_feasible = 0;
        for (std::size_t t = 0; t < 200; ++t) {
            af_feasible += cell_number((*pts[0][t])[feas]) > 0.0;
            bool all = true;
            for (int p = 0; p < 3; ++p) all = all && cell_number((*pts[static_cast<std::size_t>(p)][t])[feas]) > 0.0;
            if (!all) continue;
            for (int p = 0; p < 3; ++p) common[static_cast<std::size_t>(p)].push_back(pts[static_cast<std::size_t>(p)][t]);
        }
        const double p1 = mean_column(tp, common[0], "objective"), p2 = mean_column(tp, common[1], "objective"),
                     p4 = mean_column(tp, common[2], "objective");
        const bool a = af_feasible > 100 && !common[0].empty() && p1 > p2 && p2 > p4;
        msg << "(a) " << (a ? "ok" : "FAILED") << fmt(": relay power %.4g > %.4g > %.4g", p1, p2, p4)
            << " over " << common[0].size() << " common-feasible trials, L_r=1 feasible " << af_feasible << "/200; ";
        ok = ok && a;

        auto ws = trend_spec(experiment::Mode::worst_snr, {1, 4});
        const Table tw = experiment::run_experiment(ws);
        const auto wpts = trials_by_point(tw, 2);
        const double w1 = mean_column(tw, wpts[0], "objective"), w4 = mean_column(tw, wpts[1], "objective");
        const bool b = w4 > w1;
        msg << "(b) " << (b ? "ok" : "FAILED") << fmt(": worst SNR %.4g (L_r=4) vs %.4g (L_r=1); ", w4, w1);
        ok = ok && b;

        auto joint = trend_spec(experiment::Mode::worst_snr_joint, {4});
        const Table tj = experiment::run_experiment(joint);
        const double j4 = mean_column(tj, trials_by_point(tj, 1)[0], "objective");
        const bool c = j4 > w4;
        msg << "(c) " << (c ? "ok" : "FAILED") << fmt(": joint %.4g vs filter-only %.4g; ", j4, w4);
        ok = ok && c;

        auto rate = trend_spec(experiment::Mode::rate_max, {1, 4});
        const Table tr = experiment::run_experiment(rate);
        const auto rpts = trials_by_point(tr, 2);
        const double r1 = mean_column(tr, rpts[0], "objective"), r4 = mean_column(tr, rpts[1], "objective");
        const bool d = r4 > r1;
        msg << "(d) " << (d ? "ok" : "FAILED") << fmt(": sum rate %.5g (L_r=4) vs %.5g (L_r=1); ", r4, r1);
        ok = ok && d;

        double worst_deg = 0.0;
        for (auto alg : {simkit::MismatchAlgorithm::joint_worst_snr, simkit::MismatchAlgorithm::rate_pgm}) {
            simkit::ChannelSpec truth, assumed;
            const Table tm = simkit::run_mismatch_experiment(config(32, 4), truth, assumed, alg, 200, 2024);
            const std::size_t deg = tm.column("relative_degradation");
            for (const auto& row : tm.rows) worst_deg = std::max(worst_deg, std::abs(cell_number(row[deg])));
        }
        const bool e = worst_deg <= 1e-6;
        msg << "(e) " << (e ? "ok" : "FAILED") << fmt(": max relative degradation at rho=0 %.2e", worst_deg);
        ok = ok && e;

        const double secs = seconds_since(t0);
        msg << fmt("; %.0f s (limit 1800)", secs);
        return Outcome{ok && secs <= 1800.0, msg.str()};
    });

    report(9, "determinism", [] {
        namespace fs = std::filesystem;
        const fs::path dir = fs::temp_directory_path() / ("ffrelay_accept_" + std::to_string(::getpid()));
        fs::create_directories(dir);
        bool same = true;
        int files = 0;
        auto read = [](const fs::path& p) {
            std::ifstream in(p, std::ios::binary);
            return std::string(std::istreambuf_iterator<char>(in), {});
        };
        for (auto mode : {experiment::Mode::power_min, experiment::Mode::worst_snr, experiment::Mode::worst_snr_joint,
                          experiment::Mode::rate_max, experiment::Mode::mismatch, experiment::Mode::validate}) {
            auto spec = trend_spec(mode, {1, 3});
            spec.base.n_sub = 16;
            spec.trials = 4;
            spec.simulate = true;
            spec.sim_frames = 500;
            spec.sim_draws = 5;
            if (mode == experiment::Mode::mismatch) spec.axes = {{"rho", {0.0, 0.05}}};
            for (auto format : {experiment::Format::csv, experiment::Format::json}) {
                const std::string ext = format == experiment::Format::csv ? ".csv" : ".json";
                const fs::path a = dir / (experiment::mode_name(mode) + "_a" + ext);
                const fs::path b = dir / (experiment::mode_name(mode) + "_b" + ext);
                spec.threads = 1;
                experiment::emit_report(experiment::run_experiment(spec), format, a.string());
                spec.threads = 4;
                experiment::emit_report(experiment::run_experiment(spec), format, b.string());
                same = same && read(a) == read(b) && !read(a).empty();
                files += 2;
            }
        }
        fs::remove_all(dir);
        return Outcome{same, std::to_string(files) + " output files from paired runs " +
                                 (same ? "are byte-identical" : "DIFFER")};
    });

    std::printf("%s: %d criteria failed, total %.0f s\n", failures ? "FAIL" : "PASS", failures, seconds_since(start));
    return failures ? 1 : 0;
}
