#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "qfhs/error.hpp"

namespace qfhs {

/// Neumaier-compensated sum.
[[nodiscard]] inline double compensated_sum(std::span<const double> x) noexcept {
    double sum = 0.0;
    double comp = 0.0;
    for (double v : x) {
        const double t = sum + v;
        if (std::abs(sum) >= std::abs(v)) {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    return sum + comp;
}

[[nodiscard]] inline double mean(std::span<const double> x) {
    if (x.empty()) throw LengthError("mean of an empty sample");
    return compensated_sum(x) / static_cast<double>(x.size());
}

/// Variance with divisor n (ddof = 0) or n - 1 (ddof = 1).
[[nodiscard]] inline double variance(std::span<const double> x, int ddof = 1) {
    if (x.size() <= static_cast<std::size_t>(ddof)) throw LengthError("variance: sample too short");
    const double m = mean(x);
    std::vector<double> sq(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) sq[i] = (x[i] - m) * (x[i] - m);
    return compensated_sum(sq) / static_cast<double>(x.size() - static_cast<std::size_t>(ddof));
}

/// Number of order statistics forming the lower alpha tail of an n-sample:
/// floor(alpha * n), guarded against representation error in alpha.
[[nodiscard]] inline std::size_t tail_count(double alpha, std::size_t n) noexcept {
    return static_cast<std::size_t>(std::floor(alpha * static_cast<double>(n) + 1e-9));
}

struct TailEstimate {
    double quantile = 0.0;   ///< k-th smallest observation
    double tail_mean = 0.0;  ///< mean of the k smallest observations
    std::size_t count = 0;   ///< k
};

/// Lower-tail quantile and tail mean using the k = floor(alpha n) convention:
/// the quantile is the k-th order statistic and the tail mean averages the same
/// k observations, so tail_mean <= quantile always holds. Reorders `sample`.
[[nodiscard]] inline TailEstimate lower_tail_inplace(std::span<double> sample, double alpha,
                                                     std::size_t min_count = 1) {
    const std::size_t k = tail_count(alpha, sample.size());
    if (k < min_count || k == 0) {
        throw EmptyTailError("lower tail holds " + std::to_string(k) + " observations, need at least " +
                             std::to_string(std::max<std::size_t>(min_count, 1)));
    }
    auto kth = sample.begin() + static_cast<std::ptrdiff_t>(k - 1);
    std::nth_element(sample.begin(), kth, sample.end());
    TailEstimate est;
    est.quantile = *kth;
    est.tail_mean = compensated_sum(std::span<const double>(sample.data(), k)) / static_cast<double>(k);
    est.count = k;
    return est;
}

[[nodiscard]] inline TailEstimate lower_tail(std::span<const double> sample, double alpha,
                                             std::size_t min_count = 1) {
    std::vector<double> copy(sample.begin(), sample.end());
    return lower_tail_inplace(copy, alpha, min_count);
}

/// Empirical alpha-quantile under the same convention, with k clamped to >= 1.
[[nodiscard]] inline double empirical_quantile(std::span<const double> sample, double alpha) {
    if (sample.empty()) throw LengthError("empirical_quantile of an empty sample");
    std::vector<double> copy(sample.begin(), sample.end());
    const std::size_t k = std::clamp<std::size_t>(tail_count(alpha, copy.size()), 1, copy.size());
    auto kth = copy.begin() + static_cast<std::ptrdiff_t>(k - 1);
    std::nth_element(copy.begin(), kth, copy.end());
    return *kth;
}

/// Average ranks (1 = smallest), ties receive the mean of the ranks they span.
[[nodiscard]] inline std::vector<double> average_ranks(std::span<const double> values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

}  // namespace qfhs
