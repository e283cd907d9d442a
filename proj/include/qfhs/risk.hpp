#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "qfhs/error.hpp"
#include "qfhs/format.hpp"
#include "qfhs/stats.hpp"
#include "qfhs/timeseries.hpp"

namespace qfhs {

/// VaR/ES forecast for one origin, horizon and target level. VaR and ES are
/// reported as positive losses.
struct RiskForecast {
    Date date;               ///< date of the period being forecast
    std::size_t horizon = 1;
    double alpha0 = 0.0;
    double var = 0.0;
    double es = 0.0;
    double sim_vol = 0.0;    ///< standard deviation of the simulated h-period returns
    std::size_t paths = 0;
    std::uint64_t seed = 0;
};

/// Minimum number of tail observations behind any VaR/ES estimate.
inline constexpr std::size_t kMinTailCount = 10;

/// VaR/ES at each target level from one simulated sample of h-period returns.
/// Order statistic floor(alpha0 M) is the quantile; the tail mean averages
/// the same observations. The sample is sorted in place.
[[nodiscard]] inline std::vector<RiskForecast> risk_from_sample(std::span<double> sample,
                                                                std::span<const double> alpha0s,
                                                                std::size_t min_tail = kMinTailCount) {
    const std::size_t m = sample.size();
    for (double a : alpha0s) {
        if (!(a > 0.0 && a < 1.0)) throw DomainError("target level must lie in (0, 1)");
        if (tail_count(a, m) < min_tail)
            throw EmptyTailError("floor(alpha0 * M) = " + std::to_string(tail_count(a, m)) + " < " +
                                 std::to_string(min_tail) + " at alpha0 = " + format_double(a));
    }
    std::sort(sample.begin(), sample.end());
    const double sd = std::sqrt(variance(sample, 1));
    std::vector<double> prefix(m + 1, 0.0);
    {
        double sum = 0.0, comp = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            const double y = sample[i] - comp;
            const double t = sum + y;
            comp = (t - sum) - y;
            sum = t;
            prefix[i + 1] = sum;
        }
    }
    std::vector<RiskForecast> out;
    out.reserve(alpha0s.size());
    for (double a : alpha0s) {
        const std::size_t k = tail_count(a, m);
        RiskForecast f;
        f.alpha0 = a;
        f.var = -sample[k - 1];
        // The tail mean is bounded by its own largest member; min() removes rounding noise.
        f.es = -std::min(prefix[k] / static_cast<double>(k), sample[k - 1]);
        f.sim_vol = sd;
        f.paths = m;
        out.push_back(f);
    }
    return out;
}

}  // namespace qfhs
