#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "qfhs/qfhs.hpp"
#include "qfhs/simharness.hpp"

using namespace qfhs;
using Catch::Approx;

namespace {

MarketSeries garch_series(std::uint64_t seed, std::size_t T = 3000, Distribution d = Distribution::normal()) {
    DgpSpec dgp;
    dgp.T = T;
    dgp.innovation = d;
    return to_market_series(simulate_dgp(dgp, seed));
}

CaviarFit constant_fit(const MarketSeries& s, double alpha, double q) {
    CaviarFit fit;
    fit.spec = CaviarSpec{CaviarFamily::IG, alpha};
    fit.params = {q * q, 0.0, 0.0};
    const auto f = filter_caviar(fit.spec, fit.params, s, q);
    fit.q_series = f.q;
    fit.q_next = f.q_next;
    fit.q_init = q;
    return fit;
}

CaviarFitOptions quick() {
    CaviarFitOptions o;
    o.starts = 3;
    return o;
}

}  // namespace

TEST_CASE("scaled residual identities") {
    const auto s = garch_series(1, 300);
    const auto fit = constant_fit(s, 0.05, -1.0);
    CHECK(scaled_residuals(fit, s).eps == s.returns);

    auto fit2 = fit_caviar(CaviarSpec{CaviarFamily::IG, 0.05}, garch_series(2, 500), quick());
    auto s2 = garch_series(2, 500);
    s2.returns[17] = fit2.q_series[17];
    CHECK(scaled_residuals(fit2, s2).eps[17] == -1.0);
}

TEST_CASE("residual exceedances match the estimation level") {
    const auto s = garch_series(3);
    const auto fit = fit_caviar(CaviarSpec{CaviarFamily::IG, 0.05}, s, quick());
    const auto eps = scaled_residuals(fit, s).eps;
    const auto below = std::count_if(eps.begin(), eps.end(), [](double e) { return e < -1.0; });
    CHECK(std::abs(static_cast<double>(below) / 3000.0 - 0.05) <= 0.012);
}

TEST_CASE("exhaustive one-step ES equals the tail-average regression ES") {
    SimulationOptions ex;
    ex.mode = ResampleMode::Exhaustive;
    for (std::uint64_t k = 0; k < 5; ++k) {
        const auto s = garch_series(10 + k, 2000);
        const double a = 0.025 + 0.025 * static_cast<double>(k);
        const auto fit = fit_caviar(CaviarSpec{CaviarFamily::IG, a}, s, quick());
        const auto f = qfhs_forecast(fit, s, 1, 0, a, 1, ex);
        const auto em = em_regression_es(fit, s, EmEstimator::TailAverage);
        CHECK(std::abs(f.es - em.es_forecast) < 1e-10);
        CHECK(f.paths == s.size());
    }
}

TEST_CASE("constant quantile fit gives the empirical VaR") {
    const auto s = garch_series(4, 1600);
    const auto fit = constant_fit(s, 0.05, -1.7);
    SimulationOptions ex;
    ex.mode = ResampleMode::Exhaustive;
    const auto f = qfhs_forecast(fit, s, 1, 0, 0.05, 1, ex);
    auto r = s.returns;
    std::sort(r.begin(), r.end());
    CHECK(f.var == Approx(-r[79]).epsilon(1e-12));
}

TEST_CASE("ten-step QFHS forecast tracks the brute-force truth") {
    DgpSpec dgp;
    dgp.innovation = Distribution::student_t(5);
    const auto path = simulate_dgp(dgp, 5);
    const auto s = to_market_series(path);
    const auto truth = true_multistep_risk(dgp, path.sigma_next * path.sigma_next, 10, 0.01, 100000, 6);
    const auto fit = fit_caviar(CaviarSpec{CaviarFamily::IG, 0.10}, s, quick());
    const auto f = qfhs_forecast(fit, s, 10, 25000, 0.01, 7);
    CHECK(std::abs(f.var / truth.var - 1.0) < 0.15);
    CHECK(std::abs(f.es / truth.es - 1.0) < 0.20);
    CHECK(f.es >= f.var);
}

TEST_CASE("forecasts share one sample across levels and are seeded") {
    const auto s = garch_series(8, 1500);
    const auto fit = fit_caviar(CaviarSpec{CaviarFamily::IG, 0.10}, s, quick());
    const std::vector<double> a0{0.01, 0.025};
    const auto a = qfhs_forecast(fit, s, 5, 5000, a0, 42);
    const auto b = qfhs_forecast(fit, s, 5, 5000, a0, 42);
    const auto c = qfhs_forecast(fit, s, 5, 5000, a0, 43);
    CHECK(a[0].var == b[0].var);
    CHECK(a[1].es == b[1].es);
    CHECK(a[0].var != c[0].var);
    CHECK(a[0].sim_vol == a[1].sim_vol);
    CHECK(a[0].var > a[1].var);
    CHECK_THROWS_AS(qfhs_forecast(fit, s, 0, 5000, a0, 1), InvalidParameter);
    CHECK_THROWS(qfhs_forecast(fit, s, 1, 500, a0, 1));
}

TEST_CASE("realized families forecast through both measurement modes") {
    DgpSpec dgp;
    dgp.T = 1200;
    const auto s = to_market_series(simulate_ohlc(dgp, 9).ohlc);
    for (auto fam : {CaviarFamily::ReC, CaviarFamily::LogReC}) {
        const auto fit = fit_caviar(CaviarSpec{fam, 0.05}, s, quick());
        SimulationOptions g;
        g.gaussian_measurement = true;
        const auto paired = qfhs_forecast(fit, s, 10, 5000, 0.025, 1);
        const auto gauss = qfhs_forecast(fit, s, 10, 5000, 0.025, 1, g);
        CHECK(std::isfinite(paired.var));
        CHECK(std::isfinite(gauss.var));
        CHECK(paired.es >= paired.var);
        CHECK(paired.var > 0);
    }
}

TEST_CASE("regression ES estimators") {
    auto s = garch_series(11, 400);
    auto fit = constant_fit(s, 0.05, -1.0);
    for (std::size_t t = 0; t < s.size(); ++t) s.returns[t] = (t % 10 == 0) ? -1.3 : std::abs(s.returns[t]);
    auto fit2 = constant_fit(s, 0.05, -1.0);
    const auto em = em_regression_es(fit2, s, EmEstimator::Ols);
    CHECK(em.delta == Approx(1.3).epsilon(1e-14));
    CHECK(em.count == 40);
    CHECK(em.es_forecast == Approx(1.3).epsilon(1e-14));

    // through-the-origin OLS written out
    const auto s3 = garch_series(12, 2000);
    const auto f3 = fit_caviar(CaviarSpec{CaviarFamily::IG, 0.05}, s3, quick());
    double num = 0, den = 0;
    for (std::size_t t = 0; t < s3.size(); ++t)
        if (s3.returns[t] < f3.q_series[t]) num += f3.q_series[t] * s3.returns[t], den += f3.q_series[t] * f3.q_series[t];
    CHECK(em_regression_es(f3, s3).delta == Approx(num / den).epsilon(1e-13));
    CHECK_THROWS_AS(em_regression_es(fit, s, EmEstimator::Ols, 1000), EmptyTailError);
}

TEST_CASE("regression ES ratio on Gaussian data") {
    const auto N = Distribution::normal();
    const double q = N.quantile(0.025);
    auto xf = [&](double x) { return x * N.pdf(x); };
    const double tail = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(xf, -40.0, q) / 0.025;
    const double ratio = tail / q;
    CHECK(ratio == Approx(2.338 / 1.960).margin(1e-3));
    std::vector<double> d;
    for (std::uint64_t r = 0; r < 10; ++r) {
        const auto s = garch_series(derive_seed(500, {r}));
        d.push_back(em_regression_es(fit_caviar(CaviarSpec{CaviarFamily::IG, 0.025}, s, quick()), s).delta);
    }
    const double se = std::sqrt(variance(d, 1) / 10.0);
    CHECK(std::abs(mean(d) - ratio) < 3.0 * se + 0.02);
}

TEST_CASE("forecast records round trip through JSON") {
    RiskForecast f;
    f.date = Date{2021, 3, 4};
    f.horizon = 10;
    f.alpha0 = 0.025;
    f.var = 3.25;
    f.es = 4.5;
    f.sim_vol = 1.75;
    f.paths = 25000;
    f.seed = 99;
    std::string model;
    const auto back = risk_forecast_from_json(to_json(f, "IG5"), &model);
    CHECK(model == "IG5");
    CHECK(back.date == f.date);
    CHECK(back.horizon == 10);
    CHECK(back.var == f.var);
    CHECK(back.es == f.es);
    CHECK(back.paths == 25000);
    CHECK(back.seed == 99);
}
