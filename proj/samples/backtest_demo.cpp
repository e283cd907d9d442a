// Compares two fixed-parameter forecasters on a simulated path with the
// quantile and joint losses and runs the model confidence set.

#include <cmath>
#include <cstdio>
#include <vector>

#include "qfhs/backtest.hpp"
#include "qfhs/simharness.hpp"

int main() {
    using namespace qfhs;
    DgpSpec dgp;
    dgp.T = 1500;
    const SimulatedPath path = simulate_dgp(dgp, 99);
    const MarketSeries realized = to_market_series(path);
    const double a0 = 0.025;

    ModelForecasts oracle{"oracle", {}}, flat{"constant", {}};
    const double s_flat = std::sqrt(dgp.unconditional_variance());
    for (std::size_t t = 0; t < realized.size(); ++t) {
        const auto o = true_onestep_risk(dgp, path.sigma[t], a0);
        const auto c = true_onestep_risk(dgp, s_flat, a0);
        oracle.forecasts.push_back({realized.dates[t], 1, a0, o.var, o.es, 0.0});
        flat.forecasts.push_back({realized.dates[t], 1, a0, c.var, c.es, 0.0});
    }
    const LossPanel panel = evaluate({oracle, flat}, realized, a0);
    const McsResult q = mcs(panel, LossKind::Quantile, 0.25, 2000, 10.0, 5);
    const McsResult j = mcs(panel, LossKind::Joint, 0.25, 2000, 10.0, 5);
    for (std::size_t m = 0; m < panel.models.size(); ++m)
        std::printf("%-9s quantile p %.3f%s   joint p %.3f%s\n", panel.models[m].c_str(), q.pvalues[m],
                    q.included[m] ? " (in set)" : "", j.pvalues[m], j.included[m] ? " (in set)" : "");
}
