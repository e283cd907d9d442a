#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "qfhs/inference.hpp"

using namespace qfhs;
using Catch::Approx;

namespace {

std::vector<double> garch_returns(std::uint64_t seed, std::size_t T) {
    DgpSpec dgp;
    dgp.T = T;
    return simulate_dgp(dgp, seed).returns;
}

std::vector<double> ig_path(std::span<const double> p, std::span<const double> r, double q0) {
    std::vector<double> q(r.size());
    double v = q0 * q0;
    for (std::size_t t = 0; t < r.size(); ++t) {
        if (t > 0) v = p[0] + p[1] * r[t - 1] * r[t - 1] + p[2] * v;
        q[t] = -std::sqrt(v);
    }
    return q;
}

}  // namespace

TEST_CASE("gradient closed forms") {
    const auto r = garch_returns(1, 200);
    const auto g = caviar_gradient(std::vector<double>{0.4, 0.0, 0.0}, r, -0.9);
    for (std::size_t t = 1; t < r.size(); ++t) CHECK(g.grad[t][0] == Approx(-1.0 / (2.0 * std::sqrt(0.4))).epsilon(1e-14));
    const auto h = caviar_gradient(std::vector<double>{0.05, 0.3, 0.0}, r, -0.9);
    for (std::size_t t = 1; t < r.size(); ++t)
        CHECK(h.grad[t][2] == Approx(h.q[t - 1] * h.q[t - 1] / (2.0 * h.q[t])).epsilon(1e-13));
}

TEST_CASE("gradient agrees with central differences") {
    const auto r = garch_returns(2, 500);
    const double m = std::pow(Distribution::normal().quantile(0.05), 2);
    const std::vector<double> p{0.01 * m, 0.10 * m, 0.89};
    const double q0 = -std::sqrt(m);
    const auto g = caviar_gradient(p, r, q0);
    double worst = 0;
    for (int k = 0; k < 3; ++k) {
        auto up = p, dn = p;
        up[k] += 1e-6;
        dn[k] -= 1e-6;
        const auto qu = ig_path(up, r, q0), qd = ig_path(dn, r, q0);
        for (std::size_t t = 1; t < r.size(); ++t) {
            const double fd = (qu[t] - qd[t]) / 2e-6;
            worst = std::max(worst, std::abs(fd - g.grad[t][k]) / std::max(std::abs(fd), 1e-3));
        }
    }
    CHECK(worst < 1e-4);
    CHECK_THROWS_AS(caviar_gradient(std::vector<double>{0.1, 0.1}, r, -1.0), LengthError);
}

TEST_CASE("asymptotic profile reproduces known optima") {
    struct Cell {
        Distribution d;
        double expected;
    };
    // Normal and t(5) with half the replicates; the table values are exact grid points.
    for (const auto& c : {Cell{Distribution::normal(), 0.0575}, Cell{Distribution::student_t(5), 0.0975},
                          Cell{Distribution::hansen_skew_t(2.1, 0.15), 0.1675}}) {
        AsymptoticConfig cfg;
        cfg.dgp.innovation = c.d;
        const auto prof = asymptotic_rse_profile(cfg);
        for (double a : prof.optimal_alpha) CHECK(a == Approx(c.expected).margin(0.0075));
        CHECK(prof.parameters.size() == 3);
        CHECK(prof.rse[prof.index("beta_c")].size() == prof.alpha_grid.size());
    }
}

TEST_CASE("degenerate single-point grid") {
    AsymptoticConfig cfg;
    cfg.alpha_grid = {0.07};
    cfg.n_reps = 3;
    const auto prof = asymptotic_rse_profile(cfg);
    CHECK(prof.alpha_grid.size() == 1);
    for (double a : prof.optimal_alpha) CHECK(a == 0.07);
    CHECK(make_grid(0.0025, 0.30, 0.0025).size() == 120);
    CHECK(make_grid(0.01, 0.30, 0.005).size() == 59);
    CHECK_THROWS_AS(make_grid(0.3, 0.1, 0.01), InvalidParameter);
}

TEST_CASE("loess reproduces quadratics and constants") {
    std::vector<double> x, yq, yc;
    for (int i = 0; i < 30; ++i) {
        x.push_back(0.01 * (i + 1));
        yq.push_back(3.0 - 20.0 * x.back() + 90.0 * x.back() * x.back());
        yc.push_back(2.5);
    }
    for (double span : {0.15, 0.3, 0.75, 1.0}) {
        const auto [fq, trq] = loess_fit(x, yq, span);
        const auto [fc, trc] = loess_fit(x, yc, span);
        for (std::size_t i = 0; i < x.size(); ++i) {
            CHECK(fq[i] == Approx(yq[i]).margin(1e-8));
            CHECK(fc[i] == Approx(2.5).margin(1e-10));
        }
        CHECK(trq > 2.9);
    }
    CHECK_THROWS_AS(loess_fit(x, yq, 0.1), SingularError);
    CHECK_THROWS_AS(loess_smooth(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 3}, default_loess_spans()),
                    LengthError);
}

TEST_CASE("smoothed argmin of a noisy convex curve") {
    const auto grid = make_grid(0.01, 0.30, 0.005);
    auto truth = [](double a) { return 1.0 + 40.0 * (a - 0.11) * (a - 0.11) + 2.0 * std::pow(a - 0.11, 4); };
    Rng rng(5);
    std::vector<double> y;
    for (double a : grid) y.push_back(truth(a) + 0.01 * rng.normal());
    const auto sm = loess_smooth(grid, y, default_loess_spans());
    const auto it = std::min_element(sm.fitted.begin(), sm.fitted.end());
    const double arg = grid[static_cast<std::size_t>(it - sm.fitted.begin())];
    CHECK(std::abs(arg - 0.11) <= 0.005 + 1e-12);
    CHECK(std::isfinite(sm.aicc));
}

TEST_CASE("Monte Carlo standard errors on a coarse grid") {
    McConfig cfg;
    cfg.dgp.innovation = Distribution::student_t(5);
    cfg.alpha_grid = make_grid(0.02, 0.29, 0.03);
    cfg.n_reps = 30;
    cfg.starts = 3;
    const auto prof = mc_se_experiment(cfg);
    CHECK(prof.parameters == std::vector<std::string>{"gamma", "beta"});
    CHECK(prof.smoothed.size() == 2);
    for (std::size_t k = 0; k < 2; ++k) {
        CHECK(prof.optimal_alpha[k] >= 0.05);
        CHECK(prof.optimal_alpha[k] <= 0.20);
        // sample sd with ddof = 1 is positive and finite
        for (double v : prof.se[k]) CHECK((v > 0 && std::isfinite(v)));
    }
    const auto repeat = mc_se_experiment(cfg);
    CHECK(repeat.se == prof.se);
}

TEST_CASE("bootstrap standard errors") {
    DgpSpec dgp;
    dgp.innovation = Distribution::student_t(5);
    const auto s = to_market_series(simulate_dgp(dgp, 21));
    BootstrapConfig one;
    one.alpha_grid = {0.05, 0.1};
    one.B = 1;
    one.starts = 3;
    const auto p1 = bootstrap_se(s, one);
    for (const auto& col : p1.se)
        for (double v : col) CHECK(v == 0.0);
    CHECK(!p1.warnings.empty());

    BootstrapConfig cfg;
    cfg.alpha_grid = make_grid(0.02, 0.29, 0.03);
    cfg.B = 40;
    cfg.starts = 3;
    cfg.refit_starts = 2;
    const auto p = bootstrap_se(s, cfg);
    for (std::size_t k = 0; k < 2; ++k) {
        CHECK(p.used[0] + p.failures[0] == 40);
        for (double v : p.se[k]) CHECK(v > 0);
    }
    // the profile near the middle of the grid beats the extreme tail level
    for (std::size_t k = 0; k < 2; ++k) CHECK(p.se[k][0] > *std::min_element(p.se[k].begin(), p.se[k].end()));
    CHECK_THROWS_AS(bootstrap_se(s.slice(0, 500), cfg), LengthError);
}
