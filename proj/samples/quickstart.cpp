// Simulates a GARCH(1,1) path, fits GARCH and the indirect GARCH quantile
// model at alpha_est = 0.05, and prints one-step and ten-step VaR/ES from
// filtered and quantile filtered historical simulation next to the truth.

#include <cstdio>

#include "qfhs/qfhs.hpp"
#include "qfhs/simharness.hpp"

int main() {
    using namespace qfhs;
    DgpSpec dgp;
    dgp.innovation = Distribution::student_t(5);
    dgp.T = 2000;
    const SimulatedPath path = simulate_dgp(dgp, 2024);
    const MarketSeries s = to_market_series(path);

    const VolFit garch = fit_qml(VolSpec{VolFamily::Garch}, s);
    const CaviarFit ig = fit_caviar(CaviarSpec{CaviarFamily::IG, 0.05}, s);
    std::printf("GARCH  omega %.4f gamma %.4f beta %.4f\n", garch.params[0], garch.params[1], garch.params[2]);
    std::printf("IG5    omega %.4f gamma %.4f beta %.4f  violations %.4f\n", ig.params[0], ig.params[1],
                ig.params[2], ig.violation_rate);

    for (std::size_t h : {1u, 10u}) {
        const auto truth = true_multistep_risk(dgp, path.sigma_next * path.sigma_next, h, 0.01, 100000, 7);
        const auto fhs = fhs_forecast(garch, s, h, 25000, 0.01, 11);
        const auto q = qfhs_forecast(ig, s, h, 25000, 0.01, 11);
        std::printf("h=%-2zu alpha0=0.01  truth VaR %.3f ES %.3f | FHS VaR %.3f ES %.3f | QFHS VaR %.3f ES %.3f\n", h,
                    truth.var, truth.es, fhs.var, fhs.es, q.var, q.es);
    }
}
