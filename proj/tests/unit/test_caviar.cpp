#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "qfhs/caviar.hpp"
#include "qfhs/distributions.hpp"
#include "qfhs/simharness.hpp"
#include "qfhs/stats.hpp"

using namespace qfhs;
using Catch::Approx;

namespace {

MarketSeries garch_series(std::uint64_t seed, std::size_t T = 3000) {
    DgpSpec dgp;
    dgp.T = T;
    return to_market_series(simulate_dgp(dgp, seed));
}

MarketSeries ohlc_series(std::uint64_t seed, std::size_t T) {
    DgpSpec dgp;
    dgp.T = T;
    return to_market_series(simulate_ohlc(dgp, seed).ohlc);
}

double band(double a, std::size_t T) { return 2.0 * std::sqrt(a * (1 - a) / static_cast<double>(T)); }

}  // namespace

TEST_CASE("quantile loss identities") {
    const std::vector<double> r{-1.0, 0.5, 2.0, -3.0};
    CHECK(quantile_loss(0.05, r, r) == 0.0);
    const std::vector<double> q{-0.5, -0.5, 0.0, -1.0};
    double abs_sum = 0;
    for (std::size_t i = 0; i < r.size(); ++i) abs_sum += std::abs(r[i] - q[i]);
    CHECK(quantile_loss(0.5, r, q) == Approx(0.5 * abs_sum).epsilon(1e-15));
    CHECK(check_loss(0.1, 1.0, -1.0) == Approx(0.2));
    CHECK(check_loss(0.1, -2.0, -1.0) == Approx(0.9));
    CHECK_THROWS_AS(quantile_loss(0.1, r, std::vector<double>{1.0}), LengthError);
}

TEST_CASE("constant quantile minimizing the loss is the empirical quantile") {
    const auto x = Distribution::student_t(5).sample(11, 999);
    for (double a : {0.025, 0.1, 0.3}) {
        double best = std::numeric_limits<double>::infinity(), arg = 0;
        for (double c : x) {
            const std::vector<double> q(x.size(), c);
            const double l = quantile_loss(a, x, q);
            if (l < best) best = l, arg = c;
        }
        // unique minimizer: order statistic ceil(n a) when n a is not an integer
        auto sorted = x;
        std::sort(sorted.begin(), sorted.end());
        const auto k = static_cast<std::size_t>(std::ceil(a * static_cast<double>(x.size())));
        CHECK(arg == sorted[k - 1]);
    }
}

TEST_CASE("IG reductions") {
    const auto s = garch_series(1, 400);
    const CaviarSpec ig{CaviarFamily::IG, 0.05};
    const auto f = filter_caviar(ig, std::vector<double>{0.3, 0.0, 0.0}, s);
    CHECK(f.q[0] == f.q_init);
    CHECK(f.q_init == default_q_init(s, 0.05));
    for (std::size_t t = 1; t < s.size(); ++t) CHECK(f.q[t] == Approx(-std::sqrt(0.3)).epsilon(1e-15));

    const std::vector<double> p{0.02, 0.2, 0.85}, pj{0.02, 0.2, 0.0, 0.85};
    const auto a = filter_caviar(ig, p, s), b = filter_caviar(CaviarSpec{CaviarFamily::IGJR, 0.05}, pj, s);
    CHECK(a.q == b.q);
    CHECK(a.q_next == b.q_next);
}

TEST_CASE("IG with scaled GARCH coefficients reproduces the GARCH quantile path") {
    const auto s = garch_series(2, 1000);
    const double w = 0.02, g = 0.09, b = 0.9;
    const double qz = Distribution::normal().quantile(0.025), m = qz * qz;
    const double s2 = variance(s.returns, 1);
    const auto f = filter_caviar(CaviarSpec{CaviarFamily::IG, 0.025}, std::vector<double>{w * m, g * m, b}, s,
                                 -std::sqrt(m * s2));
    // GARCH recursion evaluated independently
    double v = s2;
    for (std::size_t t = 0; t < s.size(); ++t) {
        CHECK(f.q[t] == Approx(-std::sqrt(v) * std::abs(qz)).epsilon(1e-12));
        v = w + g * s.returns[t] * s.returns[t] + b * v;
    }
    CHECK(f.q_next == Approx(-std::sqrt(v) * std::abs(qz)).epsilon(1e-12));
}

TEST_CASE("realized recursions against hand evaluation") {
    const auto s = ohlc_series(3, 60);
    const std::vector<double> rec{-0.1, 0.3, 0.7, -0.5, 0.9, 0.05, 0.1, 0.2};
    const auto f = filter_caviar(CaviarSpec{CaviarFamily::ReC, 0.05}, rec, s, -1.5);
    double lq = std::log(1.5);
    for (std::size_t t = 0; t < s.size(); ++t) {
        if (t > 0) lq = rec[0] + rec[1] * std::log(s.realized[t - 1]) + rec[2] * lq;
        CHECK(f.q[t] == Approx(-std::exp(lq)).epsilon(1e-12));
        const double e = s.returns[t] / std::exp(lq);
        CHECK(f.u[t] == Approx(std::log(s.realized[t]) - rec[3] - rec[4] * lq - rec[5] * e - rec[6] * e * e)
                            .margin(1e-12));
    }
    const std::vector<double> lr{0.02, 0.9, -0.05, 0.03, 0.1, -0.6, 0.8, 0.04, 0.02, 0.1};
    const auto g = filter_caviar(CaviarSpec{CaviarFamily::LogReC, 0.05}, lr, s, -1.5);
    lq = std::log(1.5);
    double ep = 0, up = 0;
    for (std::size_t t = 0; t < s.size(); ++t) {
        if (t > 0) lq = lr[0] + lr[1] * lq + lr[2] * ep + lr[3] * ep * ep + lr[4] * up;
        CHECK(g.q[t] == Approx(-std::exp(lq)).epsilon(1e-12));
        ep = s.returns[t] / std::exp(lq);
        up = std::log(s.realized[t]) - lr[5] - lr[6] * lq - lr[7] * ep - lr[8] * ep * ep;
        CHECK(g.u[t] == Approx(up).margin(1e-12));
    }
}

TEST_CASE("IG estimation on GARCH data") {
    const std::size_t R = 100;
    std::vector<double> betas;
    CaviarFitOptions o;
    o.starts = 3;
    std::size_t in_band = 0;
    for (std::size_t r = 0; r < R; ++r) {
        const auto s = garch_series(derive_seed(300, {r}));
        const auto fit = fit_caviar(CaviarSpec{CaviarFamily::IG, 0.05}, s, o);
        betas.push_back(fit.param("beta_c"));
        // independent violation count
        std::size_t v = 0;
        for (std::size_t t = 0; t < s.size(); ++t) v += s.returns[t] < fit.q_series[t] ? 1 : 0;
        const double rate = static_cast<double>(v) / static_cast<double>(s.size());
        CHECK(rate == Approx(fit.violation_rate).margin(1e-15));
        in_band += std::abs(rate - 0.05) <= 0.01 ? 1 : 0;
        if (r == 0) CHECK(std::abs(rate - 0.05) <= 0.01);
    }
    CHECK(in_band >= 95);
    CHECK(std::abs(mean(betas) - 0.89) < 3.0 * std::sqrt(variance(betas, 1)));
}

TEST_CASE("fits are deterministic for every family") {
    const auto s = ohlc_series(4, 1500);
    for (auto fam : {CaviarFamily::IG, CaviarFamily::IGJR, CaviarFamily::ReC, CaviarFamily::LogReC}) {
        CaviarFitOptions o;
        o.starts = 3;
        const CaviarSpec spec{fam, 0.10};
        const auto a = fit_caviar(spec, s, o);
        const auto b = fit_caviar(spec, s, o);
        CHECK(a.params == b.params);
        CHECK(a.q_series == b.q_series);
        CHECK(a.objective == b.objective);
        CHECK(a.params.size() == param_names(fam).size());
        CHECK(std::abs(a.violation_rate - 0.10) <= band(0.10, s.size()));
        const auto obj = caviar_objective(spec, a.params, s, 1.0, PseudoLikelihood::Literal, a.q_init);
        CHECK(obj.value == Approx(a.objective).epsilon(1e-9));
        CHECK(obj.quantile_loss == Approx(a.quantile_loss).epsilon(1e-12));
    }
}

TEST_CASE("realized pseudo-likelihood variants") {
    const auto s = ohlc_series(5, 1200);
    CaviarFitOptions o;
    o.starts = 2;
    o.pseudo = PseudoLikelihood::AsymmetricLaplace;
    const auto al = fit_caviar(CaviarSpec{CaviarFamily::ReC, 0.05}, s, o);
    CHECK(std::isfinite(al.objective));
    o.pseudo = PseudoLikelihood::Literal;
    o.measurement_weight = 0.0;
    const auto w0 = fit_caviar(CaviarSpec{CaviarFamily::ReC, 0.05}, s, o);
    CHECK(w0.objective == Approx(w0.quantile_loss).epsilon(1e-12));
    CHECK_THROWS_AS(fit_caviar(CaviarSpec{CaviarFamily::ReC, 0.05}, garch_series(6, 500)), ValidationError);
}

TEST_CASE("variance-targeted IG") {
    std::vector<double> qe;
    for (std::uint64_t r = 0; r < 20; ++r) {
        const auto s = garch_series(derive_seed(400, {r}));
        VtFitOptions o;
        o.starts = 3;
        const auto vt = fit_vt_caviar(0.05, s, o);
        qe.push_back(vt.q_eps);
        const double s2 = variance(s.returns, 1);
        CHECK(vt.sample_variance == Approx(s2).epsilon(1e-15));
        CHECK(vt.omega == Approx((1 - vt.gamma - vt.beta) * s2).epsilon(1e-14));
        // implied quantiles equal the equivalent plain IG recursion
        const auto f = filter_caviar(CaviarSpec{CaviarFamily::IG, 0.05}, vt.equivalent_ig(), s,
                                     vt.equivalent_q_init());
        for (std::size_t t = 0; t < s.size(); ++t) CHECK(std::abs(f.q[t] - vt.q_series[t]) < 1e-10);
        CHECK(std::abs(f.q_next - vt.q_next) < 1e-10);
        const auto ig = as_caviar_fit(vt, s);
        CHECK(ig.quantile_loss == Approx(vt.objective).epsilon(1e-10));
    }
    const double se = std::sqrt(variance(qe, 1) / static_cast<double>(qe.size()));
    CHECK(std::abs(mean(qe) - Distribution::normal().quantile(0.05)) < 3.0 * se + 0.01);

    const auto s = garch_series(7, 800);
    const double s2 = variance(s.returns, 1);
    CHECK(std::isfinite(vt_caviar_loss(0.05, -1.6, 0.0, 0.0, s.returns, s2)));
    const auto flat = filter_vt_caviar(-1.6, 0.0, 0.0, s.returns, s2);
    for (double sig : flat.sigma) CHECK(sig == Approx(std::sqrt(s2)).epsilon(1e-14));
    VtFitOptions o;
    o.starts = 2;
    o.start = std::array<double, 3>{-1.6, 0.0, 0.0};
    CHECK(std::isfinite(fit_vt_caviar(0.05, s, o).objective));
    CHECK_THROWS_AS(fit_vt_caviar(0.6, s), InvalidParameter);
}

TEST_CASE("invalid inputs") {
    const auto s = garch_series(8, 400);
    CHECK_THROWS_AS(filter_caviar(CaviarSpec{CaviarFamily::IG, 0.05}, std::vector<double>{0.1, 0.1}, s), LengthError);
    CHECK_THROWS_AS(filter_caviar(CaviarSpec{CaviarFamily::IG, 0.05}, std::vector<double>{-0.1, 0.1, 0.5}, s),
                    InvalidParameter);
    CHECK_THROWS_AS(filter_caviar(CaviarSpec{CaviarFamily::ReC, 0.05}, std::vector<double>(8, 0.1), s),
                    ValidationError);
    CHECK_THROWS_AS(filter_caviar(CaviarSpec{CaviarFamily::IG, 0.05}, std::vector<double>{1e300, 1e300, 1e300}, s),
                    NonFiniteError);
    CHECK_THROWS_AS(fit_caviar(CaviarSpec{CaviarFamily::IG, 0.05}, garch_series(9, 100)), LengthError);
}
