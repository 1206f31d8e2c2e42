#include "doctest.h"

#include <iostream>
#include <numbers>

#include "ffrelay/designs.hpp"
#include "ffrelay/solvers/sdp.hpp"
#include "support.hpp"

using namespace ffrelay;
using namespace ffrelay::designs;
using namespace testsupport;

namespace {

// p_k = max(0, mu - 1/c_k) with sum p_k = budget, mu by bisection
RVector water_fill(const RVector& c, double budget) {
    double lo = 0.0;
    double hi = budget + 1.0 / c.minCoeff() + 1.0;
    for (int i = 0; i < 200; ++i) {
        const double mu = 0.5 * (lo + hi);
        const double used = (mu - c.cwiseInverse().array()).cwiseMax(0.0).sum();
        (used > budget ? hi : lo) = mu;
    }
    return (lo - c.cwiseInverse().array()).cwiseMax(0.0).matrix();
}

double log_sum(const RVector& p, const RVector& c) {
    double acc = 0.0;
    for (Index k = 0; k < p.size(); ++k) acc += std::log2(1.0 + p(k) * c(k));
    return acc;
}

RVector uniform_power(const model::SystemConfig& cfg) {
    return RVector::Constant(cfg.n_sub, cfg.source_budget / cfg.n_sub);
}

}  // namespace

TEST_CASE("power-min AF single target matches scalar closed form") {
    std::mt19937_64 gen(11);
    for (int trial = 0; trial < 5; ++trial) {
        auto cfg = small_config(16, 3, 3, 1);
        const CVector f = crandn(gen, 3);
        const RVector p = runif(gen, 16, 1.0, 10.0);
        const auto forms = model::build_quadratic_forms(cfg, f, p);
        const Index k = trial * 3;
        // |d_k|^2 averages to |lambda_k(f)|^2 * sum(prof) over the RD taps
        CVector fpad = CVector::Zero(16);
        fpad.head(3) = f;
        const CVector lam = numkit::circulant_eigenvalues(fpad);
        const double a = p(k) * std::norm(lam(k)) * cfg.rd_profile().sum();
        const double b = cfg.noise_relay * cfg.rd_profile().sum();
        CHECK(rel_err(a, std::real(forms.phi_s[k](0, 0))) < 1e-10);
        CHECK(rel_err(b, std::real(forms.phi_n[k](0, 0))) < 1e-10);

        const double gamma = 0.5 * a / b;
        RVector g(1);
        g << gamma;
        const auto res = design_power_min(forms, {k}, g);
        REQUIRE(res.feasible);
        const double r2 = gamma * cfg.noise_dest / (a - gamma * b);
        const double expected = r2 * std::real(forms.phi_p(0, 0));
        CHECK(rel_err(res.objective, expected) < 1e-6);
        CHECK(rel_err(std::norm(res.r(0)), r2) < 1e-6);
        CHECK(res.rank_ratio == 0.0);
    }
}

TEST_CASE("power-min targets above the noise ceiling are infeasible") {
    auto cfg = small_config(16, 3, 3, 1);
    const auto forms = model::build_quadratic_forms(cfg, fixture_f(), uniform_power(cfg));
    const double ceiling = std::real(forms.phi_s[2](0, 0)) / std::real(forms.phi_n[2](0, 0));
    RVector g(1);
    g << 1.01 * ceiling;
    const auto res = design_power_min(forms, {2}, g);
    CHECK_FALSE(res.feasible);
    g << 0.99 * ceiling;
    CHECK(design_power_min(forms, {2}, g).feasible);
}

TEST_CASE("power-min vanishing targets give vanishing power") {
    auto cfg = small_config(16, 3, 3, 4);
    const auto forms = model::build_quadratic_forms(cfg, fixture_f(), uniform_power(cfg));
    double prev = std::numeric_limits<double>::infinity();
    for (double gamma : {1e-1, 1e-3, 1e-5}) {
        const auto res = design_power_min(forms, {0, 5, 9}, RVector::Constant(3, gamma));
        REQUIRE(res.feasible);
        CHECK(res.objective < prev);
        prev = res.objective;
    }
    CHECK(prev < 1e-3);
}

TEST_CASE("power-min random instances: KKT, constraints and rank-one law") {
    std::mt19937_64 gen(2024);
    int single_active = 0;
    int rank_one = 0;
    for (int trial = 0; trial < 30; ++trial) {
        auto cfg = small_config(16, 3, 3, 1 + trial % 6);
        const CVector f = crandn(gen, 3);
        const RVector p = runif(gen, 16, 2.0, 10.0);
        const auto forms = model::build_quadratic_forms(cfg, f, p);
        // targets half of what a random full-budget filter already reaches
        CVector r0 = crandn(gen, cfg.lr);
        r0 *= std::sqrt(100.0 / model::relay_power(r0, forms));
        const RVector snr0 = model::all_snr(r0, forms);
        std::vector<Index> active;
        for (Index k = trial % 2; k < 16 && active.size() < 8; k += 2) active.push_back(k);
        RVector gamma(active.size());
        // odd trials: one demanding target among easy ones
        for (std::size_t i = 0; i < active.size(); ++i) {
            gamma(i) = (trial % 2 == 0 || i == 3 ? 0.5 : 0.02) * snr0(active[i]);
        }

        const auto res = design_power_min(forms, active, gamma);
        INFO("trial " << trial << " lr " << cfg.lr << ": " << res.note);
        REQUIRE(res.feasible);
        CHECK(std::max({res.kkt.primal, res.kkt.dual, res.kkt.gap}) <= 1e-6);
        const RVector snr = model::all_snr(res.r, forms);
        for (std::size_t i = 0; i < active.size(); ++i) {
            CHECK(snr(active[i]) >= gamma(i) * (1.0 - 1e-6));
        }
        CHECK(res.objective <= model::relay_power(r0, forms) * (1 + 1e-6));
        const double top = res.duals.maxCoeff();
        const int active_duals = static_cast<int>((res.duals.array() > 1e-6 * top).count());
        if (active_duals == 1) {
            ++single_active;
            CHECK(res.rank_ratio <= 1e-6);
        }
        if (res.rank_ratio <= 1e-6) {
            ++rank_one;
            CHECK(rel_err(res.objective, res.sdp_value) < 1e-6);
        }
    }
    MESSAGE("single active dual: " << single_active << ", rank one: " << rank_one << " of 30");
}

TEST_CASE("worst-SNR AF matches 1-D grid search") {
    std::mt19937_64 gen(5);
    const double eps = 1e-3;
    for (int trial = 0; trial < 4; ++trial) {
        auto cfg = small_config(16, 3, 3, 1);
        const CVector f = crandn(gen, 3);
        const auto forms = model::build_quadratic_forms(cfg, f, uniform_power(cfg));
        const double budget = 100.0;
        const double top = budget / std::real(forms.phi_p(0, 0));
        double grid_best = 0.0;
        for (int i = 0; i <= 20000; ++i) {
            CVector r(1);
            r(0) = std::sqrt(top * i / 20000.0);
            grid_best = std::max(grid_best, model::all_snr(r, forms).minCoeff());
        }
        const auto res = design_worst_snr(forms, budget, eps);
        CHECK(std::abs(res.objective - grid_best) <= eps);
        CHECK(std::abs(res.sdp_value - grid_best) <= eps);
        CHECK(model::relay_power(res.r, forms) <= budget * (1 + 1e-8));
    }
}

TEST_CASE("worst-SNR vanishing budget and sandwich") {
    auto cfg = small_config(16, 3, 3, 4);
    const auto forms = model::build_quadratic_forms(cfg, fixture_f(), uniform_power(cfg));
    const auto tiny = design_worst_snr(forms, 1e-6, 1e-6);
    CHECK(tiny.objective < 1e-4);

    const double eps = 1e-3;
    const auto res = design_worst_snr(forms, 100.0, eps);
    CHECK(worst_snr_feasible(forms, 100.0, res.sdp_value - eps).feasible);
    CHECK_FALSE(worst_snr_feasible(forms, 100.0, res.sdp_value + eps).feasible);
    CHECK(res.objective <= res.sdp_value + eps);
    CHECK(res.sdp_value <= worst_snr_upper_bound(forms, 100.0));
}

TEST_CASE("worst-SNR longer filter nests shorter") {
    const double eps = 1e-3;
    double prev = 0.0;
    for (int lr : {1, 2, 4}) {
        auto cfg = small_config(32, 3, 3, lr);
        const auto forms = model::build_quadratic_forms(cfg, fixture_f(), uniform_power(cfg));
        const auto res = design_worst_snr(forms, 100.0, eps);
        CHECK(res.objective >= prev - eps);
        prev = res.objective;
    }
}

TEST_CASE("worst-SNR non-decreasing in relay budget") {
    auto cfg = small_config(16, 3, 3, 3);
    const auto forms = model::build_quadratic_forms(cfg, fixture_f(), uniform_power(cfg));
    double prev = 0.0;
    for (double budget : {1.0, 10.0, 100.0}) {
        const auto res = design_worst_snr(forms, budget, 1e-3);
        CHECK(res.objective >= prev - 1e-3);
        prev = res.objective;
    }
}

TEST_CASE("LP allocation: symmetric instance") {
    model::LpCoefficients coef{RVector::Ones(8), 0.0, RVector::Ones(8)};
    const auto a = allocate_from_coefficients(coef, 8.0, 8.0, 0.0);
    REQUIRE(a.feasible);
    CHECK(a.tau == doctest::Approx(1.0).epsilon(1e-12));
    CHECK((a.p_s.array() - 1.0).abs().maxCoeff() < 1e-12);
}

TEST_CASE("LP allocation: closed-form oracle and infeasibility") {
    std::mt19937_64 gen(99);
    for (int trial = 0; trial < 50; ++trial) {
        model::LpCoefficients coef{runif(gen, 12, 0.1, 5.0), runif(gen, 1, 0.0, 20.0)(0), runif(gen, 12, 0.05, 3.0)};
        const double ps = runif(gen, 1, 10.0, 200.0)(0);
        const double pr = runif(gen, 1, 25.0, 200.0)(0);
        const double oracle = std::min(ps / coef.c3.cwiseInverse().sum(),
                                       (pr - coef.c2) / coef.c1.cwiseQuotient(coef.c3).sum());
        const auto a = allocate_from_coefficients(coef, ps, pr, 0.5 * oracle);
        REQUIRE(a.feasible);
        CHECK(rel_err(a.tau, oracle) < 1e-9);
        CHECK(a.p_s.sum() <= ps * (1 + 1e-12));
        CHECK(a.p_s.dot(coef.c1) + coef.c2 <= pr * (1 + 1e-12));
        CHECK(((a.p_s.cwiseProduct(coef.c3).array() - a.tau).abs() < 1e-9 * a.tau).all());
        CHECK_FALSE(allocate_from_coefficients(coef, ps, pr, 1.001 * oracle).feasible);
    }
    model::LpCoefficients over{RVector::Ones(4), 11.0, RVector::Ones(4)};
    CHECK_FALSE(allocate_from_coefficients(over, 4.0, 10.0, 0.0).feasible);
    model::LpCoefficients dead{RVector::Ones(4), 0.0, RVector::Ones(4)};
    dead.c3(2) = 0.0;
    CHECK_FALSE(allocate_from_coefficients(dead, 4.0, 10.0, 0.1).feasible);
}

TEST_CASE("LP allocation from a filter reproduces the achieved SNR") {
    auto cfg = small_config(16, 3, 3, 3);
    std::mt19937_64 gen(7);
    const CVector r = 0.3 * crandn(gen, 3);
    const auto basis = model::build_quadratic_basis(cfg, fixture_f());
    const auto a = allocate_source_power(r, basis, 0.0);
    REQUIRE(a.feasible);
    const RVector snr = model::all_snr(r, basis.assemble(a.p_s));
    CHECK((snr.array() - a.tau).abs().maxCoeff() < 1e-9 * a.tau);
}

TEST_CASE("joint design: monotone trace and first-iterate bound") {
    std::mt19937_64 gen(31);
    const double eps = 1e-3;
    for (int trial = 0; trial < 4; ++trial) {
        auto cfg = small_config(16, 3, 3, 4);
        const CVector f = crandn(gen, 3);
        const auto res = design_joint_worst_snr(cfg, f, eps);
        INFO(res.note);
        CHECK_FALSE(res.warning);
        for (std::size_t i = 1; i < res.trace.size(); ++i) {
            CHECK(res.trace[i] >= res.trace[i - 1] - 1e-7);
        }
        const auto alg1 = design_worst_snr(model::build_quadratic_forms(cfg, f, uniform_power(cfg)), 100.0, eps);
        CHECK(res.objective >= alg1.objective - eps);
        CHECK(res.p_s.sum() <= cfg.source_budget * (1 + 1e-9));
        const auto basis = model::build_quadratic_basis(cfg, f);
        CHECK(model::relay_power(res.r, basis.assemble(res.p_s)) <= cfg.relay_budget * (1 + 1e-8));
    }
}

TEST_CASE("rate gradient matches central differences") {
    std::mt19937_64 gen(3);
    for (int trial = 0; trial < 5; ++trial) {
        auto cfg = small_config(8, 3, 3, 3);
        const auto basis = model::build_quadratic_basis(cfg, crandn(gen, 3));
        const RVector p = runif(gen, 8, 0.5, 20.0);
        const CVector r = crandn(gen, 3);
        const auto g = rate_gradient(p, r, basis);
        auto check = [](double analytic, double fd) {
            const double scale = std::max(std::abs(analytic), std::abs(fd));
            CHECK(std::abs(analytic - fd) <= 1e-5 * scale);
        };
        for (Index k = 0; k < 8; ++k) {
            const double h = 1e-6 * std::max(1.0, p(k));
            RVector pp = p, pm = p;
            pp(k) += h;
            pm(k) -= h;
            check(g.dp(k), (rate_cost(pp, r, basis) - rate_cost(pm, r, basis)) / (2 * h));
        }
        for (Index i = 0; i < 3; ++i) {
            for (cplx dir : {cplx(1, 0), cplx(0, 1)}) {
                const double h = 1e-6 * std::max(1.0, std::abs(r(i)));
                CVector rp = r, rm = r;
                rp(i) += h * dir;
                rm(i) -= h * dir;
                const double fd = (rate_cost(p, rp, basis) - rate_cost(p, rm, basis)) / (2 * h);
                check(dir.real() != 0 ? g.dr(i).real() : g.dr(i).imag(), fd);
            }
        }
    }
}

TEST_CASE("rate gradient at zero power") {
    auto cfg = small_config(8, 3, 3, 3);
    std::mt19937_64 gen(4);
    const auto basis = model::build_quadratic_basis(cfg, crandn(gen, 3));
    const CVector r = crandn(gen, 3);
    const auto g = rate_gradient(RVector::Zero(8), r, basis);
    CHECK(g.dr.norm() == 0.0);
    for (Index k = 0; k < 8; ++k) {
        const double b1 = numkit::quad_form(basis.unit_signal[k], r);
        const double b2 = numkit::quad_form(basis.phi_n[k], r) + cfg.noise_dest;
        CHECK(rel_err(g.dp(k), -(b1 / b2) / std::numbers::ln2) < 1e-12);
    }
}

TEST_CASE("negative gradient is a descent direction") {
    auto cfg = small_config(8, 3, 3, 3);
    std::mt19937_64 gen(8);
    const auto basis = model::build_quadratic_basis(cfg, crandn(gen, 3));
    const RVector p = runif(gen, 8, 1.0, 5.0);
    const CVector r = crandn(gen, 3);
    const auto g = rate_gradient(p, r, basis);
    const double t = 1e-6;
    CHECK(rate_cost(p - t * g.dp, r - t * g.dr, basis) < rate_cost(p, r, basis));
}

TEST_CASE("PGM with a fixed filter matches water-filling") {
    std::mt19937_64 gen(12);
    for (int trial = 0; trial < 5; ++trial) {
        auto cfg = small_config(16, 3, 3, 3);
        const CVector f = crandn(gen, 3);
        const CVector r = crandn(gen, 3);
        auto basis = model::build_quadratic_basis(cfg, f);
        const auto coef = model::lp_coefficients(r, basis);
        basis.cfg.relay_budget = cfg.source_budget * coef.c1.maxCoeff() + coef.c2 + 1.0;
        PgmOptions opt;
        opt.fix_filter = true;
        opt.init_r = r;
        const auto res = design_rate_pgm(basis, opt);
        const double oracle = log_sum(water_fill(coef.c3, cfg.source_budget), coef.c3);
        CHECK(std::abs(res.objective - oracle) <= 1e-5 * std::max(1.0, oracle));
        CHECK(res.r == r);
    }
    auto cfg = small_config(16, 3, 3, 3);
    auto basis = model::build_quadratic_basis(cfg, fixture_f());
    PgmOptions opt;
    opt.fix_filter = true;
    opt.init_r = CVector::Constant(3, 10.0);
    CHECK_THROWS_AS(design_rate_pgm(basis, opt), numkit::ContractViolation);
}

TEST_CASE("PGM AF with a huge relay budget approaches the noise-limited water-filling") {
    auto cfg = small_config(16, 3, 3, 1);
    cfg.relay_budget = 1e9;
    const auto basis = model::build_quadratic_basis(cfg, fixture_f());
    const auto res = design_rate_pgm(basis);
    RVector c(16);
    for (Index k = 0; k < 16; ++k) {
        c(k) = std::real(basis.unit_signal[k](0, 0)) / std::real(basis.phi_n[k](0, 0));
    }
    const double oracle = log_sum(water_fill(c, cfg.source_budget), c);
    CHECK(res.objective <= oracle);
    CHECK(std::abs(res.objective - oracle) <= 1e-4 * oracle);
}

TEST_CASE("PGM iterates stay feasible and the cost never increases") {
    std::mt19937_64 gen(77);
    for (int trial = 0; trial < 5; ++trial) {
        auto cfg = small_config(16, 3, 3, 4);
        const auto basis = model::build_quadratic_basis(cfg, crandn(gen, 3));
        int seen = 0;
        PgmOptions opt;
        opt.on_accept = [&](const RVector& p, const CVector& r) {
            ++seen;
            CHECK((p.array() >= 0.0).all());
            CHECK(p.sum() <= cfg.source_budget * (1 + 1e-8));
            CHECK(numkit::quad_form(basis.relay_matrix(p), r) <= cfg.relay_budget * (1 + 1e-8));
        };
        const auto res = design_rate_pgm(basis, opt);
        CHECK(seen > 0);
        for (std::size_t i = 1; i < res.trace.size(); ++i) {
            CHECK(res.trace[i] <= res.trace[i - 1]);
        }
        CHECK(res.objective == doctest::Approx(sum_rate(res.p_s, res.r, basis)));
    }
}
