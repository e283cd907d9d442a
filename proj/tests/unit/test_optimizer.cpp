#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "qfhs/caviar.hpp"
#include "qfhs/distributions.hpp"
#include "qfhs/optimizer.hpp"
#include "qfhs/simharness.hpp"
#include "qfhs/stats.hpp"

using namespace qfhs;
using Catch::Approx;

TEST_CASE("convex quadratic") {
    auto f = [](std::span<const double> x) { return (x[0] - 2.0) * (x[0] - 2.0); };
    const double start[] = {0.0};
    const auto r = minimize(f, start, ParamSpace::free(1));
    CHECK(std::abs(r.argmin[0] - 2.0) < 1e-6);
    CHECK(r.converged);
}

TEST_CASE("non-smooth absolute value") {
    auto f = [](std::span<const double> x) { return std::abs(x[0]); };
    const double start[] = {5.0};
    CHECK(std::abs(minimize(f, start, ParamSpace::free(1)).argmin[0]) < 1e-4);
}

TEST_CASE("constant quantile minimizes at the empirical quantile") {
    const auto x = Distribution::normal().sample(5, 2001);
    const double alpha = 0.1;
    auto f = [&](std::span<const double> q) {
        double s = 0;
        for (double r : x) s += check_loss(alpha, r, q[0]);
        return s;
    };
    const double start[] = {0.0};
    const auto r = minimize(f, start, ParamSpace::free(1));
    // oracle: any minimizer lies between the order statistics around alpha * n
    auto sorted = x;
    std::sort(sorted.begin(), sorted.end());
    const auto k = static_cast<std::size_t>(std::floor(alpha * static_cast<double>(x.size())));
    CHECK(r.argmin[0] >= sorted[k - 1] - 1e-6);
    CHECK(r.argmin[0] <= sorted[k + 1] + 1e-6);
}

TEST_CASE("transforms keep parameters in their domain") {
    const ParamSpace space({Transform::Positive, Transform::SimplexPair, Transform::UnitInterval, Transform::Free});
    CHECK(space.dim() == 5);
    const std::vector<double> theta{0.3, 0.2, 0.7, 0.4, -1.5};
    const auto back = space.to_constrained(space.to_unconstrained(theta));
    for (std::size_t i = 0; i < theta.size(); ++i) CHECK(back[i] == Approx(theta[i]).epsilon(1e-12));
    const std::vector<double> wild{40, -40, 40, -40, 3};
    const auto c = space.to_constrained(wild);
    CHECK(c[0] > 0);
    CHECK(c[1] > 0);
    CHECK(c[2] > 0);
    CHECK(c[1] + c[2] < 1);
    CHECK(c[3] > 0);
    CHECK(c[3] < 1);
    CHECK_THROWS_AS(space.to_unconstrained(std::vector<double>{-1, 0.2, 0.3, 0.4, 0}), InvalidParameter);
}

TEST_CASE("single start equals minimize") {
    auto f = [](std::span<const double> x) { return std::pow(x[0] - 1, 2) + 3 * std::pow(x[1] + 0.5, 2); };
    const std::vector<double> s{4.0, 4.0};
    const auto a = minimize(f, s, ParamSpace::free(2));
    const auto b = multi_start_minimize(f, {s}, ParamSpace::free(2));
    CHECK(a.argmin == b.argmin);
    CHECK(a.value == b.value);
}

TEST_CASE("best basin wins") {
    // basins at -2 (value 1) and +3 (value 0)
    auto f = [](std::span<const double> x) {
        return std::min(1.0 + (x[0] + 2) * (x[0] + 2), (x[0] - 3) * (x[0] - 3));
    };
    const auto r = multi_start_minimize(f, {{-2.5}, {2.5}}, ParamSpace::free(1));
    CHECK(r.argmin[0] == Approx(3.0).margin(1e-6));
    CHECK(r.value == Approx(0.0).margin(1e-10));
}

TEST_CASE("jittered multi-start on an IG loss surface is order independent") {
    DgpSpec dgp;
    dgp.T = 1500;
    const auto s = to_market_series(simulate_dgp(dgp, 77));
    const CaviarSpec spec{CaviarFamily::IG, 0.05};
    const double m = std::pow(Distribution::normal().quantile(0.05), 2);
    const std::vector<double> base{0.01 * m, 0.1 * m, 0.89};
    const ParamSpace space({Transform::Positive, Transform::Positive, Transform::UnitInterval});
    auto starts = jittered_starts(base, space, 20, 0.5, 3);
    CHECK(starts.size() == 20);
    CHECK(starts[0] == base);
    const double q0 = default_q_init(s, 0.05);
    auto f = [&](std::span<const double> p) {
        try {
            return caviar_objective(spec, p, s, 1.0, PseudoLikelihood::Literal, q0).value;
        } catch (const Error&) {
            return std::numeric_limits<double>::infinity();
        }
    };
    std::vector<double> values;
    Rng rng(1);
    for (int rep = 0; rep < 3; ++rep) {
        values.push_back(multi_start_minimize(f, starts, space).value);
        std::shuffle(starts.begin(), starts.end(), rng);
    }
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    CHECK(*hi - *lo < 1e-6);
}

TEST_CASE("optimizer failures") {
    auto inf = [](std::span<const double>) { return std::numeric_limits<double>::infinity(); };
    const double s[] = {0.0};
    CHECK_THROWS_AS(minimize(inf, s, ParamSpace::free(1)), OptimizerError);
    CHECK_THROWS_AS(multi_start_minimize(inf, {}, ParamSpace::free(1)), OptimizerError);
    CHECK_THROWS_AS(multi_start_minimize(inf, {{0.0}, {1.0}}, ParamSpace::free(1)), OptimizerError);
}
