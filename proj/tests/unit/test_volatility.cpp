#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "qfhs/simharness.hpp"
#include "qfhs/stats.hpp"
#include "qfhs/volatility.hpp"

using namespace qfhs;
using Catch::Approx;

namespace {

MarketSeries garch_series(std::uint64_t seed, std::size_t T = 3000, Distribution d = Distribution::normal()) {
    DgpSpec dgp;
    dgp.T = T;
    dgp.innovation = d;
    return to_market_series(simulate_dgp(dgp, seed));
}

MarketSeries ohlc_series(std::uint64_t seed, std::size_t T) {
    DgpSpec dgp;
    dgp.T = T;
    return to_market_series(simulate_ohlc(dgp, seed).ohlc);
}

}  // namespace

TEST_CASE("GARCH filter reductions") {
    const auto s = garch_series(1, 500);
    const std::vector<double> flat{0.7, 0.0, 0.0};
    const auto f = filter_volatility(VolSpec{VolFamily::Garch}, flat, s);
    CHECK(f.sigma[0] * f.sigma[0] == Approx(variance(s.returns, 1)).epsilon(1e-12));
    for (std::size_t t = 1; t < s.size(); ++t) CHECK(f.sigma[t] * f.sigma[t] == Approx(0.7).epsilon(1e-14));
    CHECK(f.sigma_next * f.sigma_next == Approx(0.7).epsilon(1e-14));

    DgpSpec dgp;
    CHECK(dgp.unconditional_variance() == Approx(1.0).epsilon(1e-12));

    const std::vector<double> g{0.02, 0.08, 0.9}, gjr{0.02, 0.08, 0.0, 0.9};
    const auto a = filter_volatility(VolSpec{VolFamily::Garch}, g, s);
    const auto b = filter_volatility(VolSpec{VolFamily::Gjr}, gjr, s);
    CHECK(a.sigma == b.sigma);
    CHECK(a.sigma_next == b.sigma_next);
}

TEST_CASE("GARCH filter recursion against hand evaluation") {
    const auto s = garch_series(2, 50);
    const std::vector<double> p{0.05, 0.12, 0.8}, pj{0.05, 0.06, 0.1, 0.8};
    const auto f = filter_volatility(VolSpec{VolFamily::Garch}, p, s);
    const auto fj = filter_volatility(VolSpec{VolFamily::Gjr}, pj, s);
    double s2 = variance(s.returns, 1), s2j = s2;
    for (std::size_t t = 0; t < s.size(); ++t) {
        CHECK(f.sigma[t] == Approx(std::sqrt(s2)).epsilon(1e-13));
        CHECK(fj.sigma[t] == Approx(std::sqrt(s2j)).epsilon(1e-13));
        CHECK(f.z[t] == Approx(s.returns[t] / std::sqrt(s2)).epsilon(1e-13));
        const double r = s.returns[t];
        s2 = 0.05 + 0.12 * r * r + 0.8 * s2;
        s2j = 0.05 + 0.06 * r * r + (r < 0 ? 0.1 * r * r : 0.0) + 0.8 * s2j;
    }
    CHECK(f.sigma_next == Approx(std::sqrt(s2)).epsilon(1e-13));
}

TEST_CASE("GARCH QML is consistent over replicates") {
    const std::size_t R = 100;
    std::vector<double> w, g, b;
    VolFitOptions o;
    o.starts = 3;
    for (std::size_t r = 0; r < R; ++r) {
        const auto fit = fit_qml(VolSpec{VolFamily::Garch}, garch_series(derive_seed(100, {r})), o);
        w.push_back(fit.param("omega"));
        g.push_back(fit.param("gamma"));
        b.push_back(fit.param("beta"));
    }
    const double truth[] = {0.01, 0.10, 0.89};
    const std::vector<double>* est[] = {&w, &g, &b};
    for (int k = 0; k < 3; ++k) {
        const double sd = std::sqrt(variance(*est[k], 1));
        CHECK(std::abs(mean(*est[k]) - truth[k]) < 3.0 * sd);
    }
}

namespace {

MarketSeries iid_series(std::uint64_t r) {
    MarketSeries s;
    s.returns = Distribution::normal().sample(derive_seed(200, {r}), 3000);
    s.dates = synthetic_dates(s.returns.size());
    return s;
}

double gaussian_loglik(std::span<const double> r, double w, double g, double b, double s0) {
    double s2 = s0, l = 0.0;
    for (std::size_t t = 0; t < r.size(); ++t) {
        if (t > 0) s2 = w + g * r[t - 1] * r[t - 1] + b * s2;
        l -= 0.5 * (std::log(2.0 * M_PI) + std::log(s2) + r[t] * r[t] / s2);
    }
    return l;
}

}  // namespace

// The exact maximizer exceeds 0.03 in about a tenth of samples (replicate 42 is
// one, confirmed below on a grid), so the 95% figure is reported, not enforced.
TEST_CASE("GARCH QML on iid data keeps gamma near zero", "[!mayfail]") {
    VolFitOptions o;
    o.starts = 3;
    std::size_t small = 0;
    for (std::size_t r = 0; r < 100; ++r)
        small += fit_qml(VolSpec{VolFamily::Garch}, iid_series(r), o).param("gamma") < 0.03 ? 1 : 0;
    CHECK(small >= 95);
}

TEST_CASE("GARCH QML on iid data finds the global maximum") {
    VolFitOptions o;
    o.starts = 3;
    const auto s = iid_series(42);
    const auto fit = fit_qml(VolSpec{VolFamily::Garch}, s, o);
    const double s0 = variance(s.returns, 1);
    CHECK(fit.loglik == Approx(gaussian_loglik(s.returns, fit.param("omega"), fit.param("gamma"), fit.param("beta"), s0))
                            .epsilon(1e-10));
    double grid = -std::numeric_limits<double>::infinity();
    for (double g = 0.0; g <= 0.15; g += 0.005)
        for (double b = 0.0; b <= 0.9; b += 0.05)
            for (double w = 0.3; w <= 1.5; w += 0.02)
                if (g + b < 1.0) grid = std::max(grid, gaussian_loglik(s.returns, w, g, b, s0));
    CHECK(fit.loglik >= grid - 1e-9);
    CHECK(fit.param("gamma") > 0.03);
}

TEST_CASE("fits are deterministic and reproduce their filter") {
    const auto s = ohlc_series(3, 1500);
    for (auto fam : {VolFamily::Garch, VolFamily::Gjr, VolFamily::RealizedGarch, VolFamily::RealizedEgarch}) {
        VolFitOptions o;
        o.starts = 3;
        const auto a = fit_qml(VolSpec{fam}, s, o);
        const auto b = fit_qml(VolSpec{fam}, s, o);
        CHECK(a.params == b.params);
        CHECK(a.sigma_series == b.sigma_series);
        CHECK(a.params.size() == param_names(fam).size());
        CHECK(std::isfinite(a.loglik));
        const auto f = filter_volatility(VolSpec{fam}, a.params, s);
        CHECK(f.sigma == a.sigma_series);
        CHECK(f.sigma_next == a.sigma_next);
        CHECK(f.loglik == Approx(a.loglik).epsilon(1e-10));
    }
}

TEST_CASE("realized families need a realized measure") {
    const auto s = garch_series(4, 500);
    CHECK_THROWS_AS(fit_qml(VolSpec{VolFamily::RealizedGarch}, s), ValidationError);
    CHECK_THROWS_AS(fit_qml(VolSpec{VolFamily::Garch}, garch_series(4, 100)), LengthError);
}

TEST_CASE("constant volatility exhaustive forecast is the scaled residual quantile") {
    const auto s = garch_series(5, 2000);
    VolFit fit;
    fit.spec = VolSpec{VolFamily::Garch};
    fit.params = {0.81, 0.0, 0.0};
    const auto f = filter_volatility(fit.spec, fit.params, s);
    fit.sigma_series = f.sigma;
    fit.z_series = f.z;
    fit.sigma_next = f.sigma_next;
    SimulationOptions sim;
    sim.mode = ResampleMode::Exhaustive;
    const std::vector<double> a0{0.01, 0.025, 0.05};
    const auto out = fhs_forecast(fit, s, 1, 1, a0, 1, sim);
    auto z = f.z;
    std::sort(z.begin(), z.end());
    for (std::size_t i = 0; i < a0.size(); ++i) {
        const std::size_t k = static_cast<std::size_t>(std::floor(a0[i] * 2000 + 1e-9));
        CHECK(out[i].var == Approx(-0.9 * z[k - 1]).epsilon(1e-12));
        double tail = 0;
        for (std::size_t j = 0; j < k; ++j) tail += z[j];
        CHECK(out[i].es == Approx(-0.9 * tail / static_cast<double>(k)).epsilon(1e-12));
        CHECK(out[i].es >= out[i].var);
    }
}

TEST_CASE("ten-step FHS forecast tracks the brute-force truth") {
    DgpSpec dgp;
    const auto path = simulate_dgp(dgp, 6);
    const auto s = to_market_series(path);
    const auto truth = true_multistep_risk(dgp, path.sigma_next * path.sigma_next, 10, 0.01, 100000, 7);
    VolFit fit;
    fit.spec = VolSpec{VolFamily::Garch};
    fit.params = {dgp.omega, dgp.gamma, dgp.beta};
    auto f = filter_volatility(fit.spec, fit.params, s, path.sigma[0] * path.sigma[0]);
    fit.sigma_series = f.sigma;
    fit.z_series = f.z;
    fit.sigma_next = f.sigma_next;
    CHECK(fit.sigma_next == Approx(path.sigma_next).epsilon(1e-10));
    const auto known = fhs_forecast(fit, s, 10, 25000, 0.01, 8);
    CHECK(std::abs(known.var / truth.var - 1.0) < 0.05);
    CHECK(std::abs(known.es / truth.es - 1.0) < 0.08);
    VolFitOptions o;
    o.starts = 4;
    const auto estimated = fhs_forecast(fit_qml(VolSpec{VolFamily::Garch}, s, o), s, 10, 25000, 0.01, 8);
    CHECK(std::abs(estimated.var / truth.var - 1.0) < 0.15);
    CHECK(estimated.es >= estimated.var);
    CHECK(estimated.horizon == 10);
    CHECK(estimated.paths == 25000);
}

TEST_CASE("forecast argument validation") {
    const auto s = garch_series(9, 600);
    const auto fit = fit_qml(VolSpec{VolFamily::Garch}, s, VolFitOptions{2});
    CHECK_THROWS_AS(fhs_forecast(fit, s, 0, 5000, 0.01, 1), InvalidParameter);
    CHECK_THROWS(fhs_forecast(fit, s, 1, 500, 0.01, 1));
    SimulationOptions ex;
    ex.mode = ResampleMode::Exhaustive;
    CHECK_THROWS(fhs_forecast(fit, s, 2, 5000, 0.01, 1, ex));
    CHECK_THROWS_AS(fhs_forecast(fit, garch_series(10, 700), 1, 5000, 0.01, 1), LengthError);
}
