#pragma once

// Quantile filtered historical simulation. The residuals e_t = r_t / (-Q_t)
// have alpha_est-quantile -1; resampling them through the fitted quantile
// recursion yields VaR/ES at any target level alpha0 and any horizon.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "qfhs/caviar.hpp"
#include "qfhs/error.hpp"
#include "qfhs/risk.hpp"
#include "qfhs/rng.hpp"
#include "qfhs/stats.hpp"
#include "qfhs/timeseries.hpp"
#include "qfhs/volatility.hpp"

namespace qfhs {

struct ScaledResiduals {
    std::vector<double> eps;
    double alpha_est = 0.0;
};

[[nodiscard]] inline ScaledResiduals scaled_residuals(const CaviarFit& fit, const MarketSeries& s) {
    if (fit.q_series.size() != s.size()) throw LengthError("fit was not filtered on this series");
    ScaledResiduals out;
    out.alpha_est = fit.spec.alpha_est;
    out.eps.resize(s.size());
    for (std::size_t t = 0; t < s.size(); ++t) {
        if (fit.q_series[t] == 0.0) throw DomainError("zero quantile at t=" + std::to_string(t));
        out.eps[t] = s.returns[t] / (-fit.q_series[t]);
    }
    return out;
}

/// All levels in `alpha0s` come from the same M simulated h-period returns.
/// Path j draws from the rng stream derive_seed(seed, {j}). Exhaustive mode
/// (h = 1) uses every residual once, so M = T.
[[nodiscard]] inline std::vector<RiskForecast> qfhs_forecast(const CaviarFit& fit, const MarketSeries& s,
                                                             std::size_t h, std::size_t paths,
                                                             std::span<const double> alpha0s, std::uint64_t seed,
                                                             const SimulationOptions& sim = {}) {
    if (h == 0) throw InvalidParameter("horizon must be at least 1");
    const ScaledResiduals res = scaled_residuals(fit, s);
    const auto& eps = res.eps;
    const auto& u = fit.u_series;
    const auto& p = fit.params;
    const std::size_t pool = eps.size();
    const double scale = -fit.q_next;
    std::vector<double> sample;
    if (sim.mode == ResampleMode::Exhaustive) {
        if (h != 1) throw InvalidParameter("exhaustive resampling is defined for h = 1 only");
        sample.resize(pool);
        for (std::size_t j = 0; j < pool; ++j) sample[j] = scale * eps[j];
    } else {
        if (paths < 1000) throw InvalidParameter("QFHS simulation needs at least 1000 paths");
        if (fit.spec.realized() && u.size() != pool) throw LengthError("measurement residuals missing from fit");
        sample.resize(paths);
        const double tau = fit.spec.realized() ? std::sqrt(p.back()) : 0.0;
        for (std::size_t j = 0; j < paths; ++j) {
            Rng rng(derive_seed(seed, {j}));
            double q = fit.q_next;
            double cum = 0.0;
            for (std::size_t step = 0; step < h; ++step) {
                const std::size_t idx = rng.index(pool);
                const double e = eps[idx];
                const double r = -q * e;
                cum += r;
                if (step + 1 == h) break;
                double uu = 0.0;
                if (fit.spec.realized()) uu = sim.gaussian_measurement ? tau * rng.normal() : u[idx];
                switch (fit.spec.family) {
                    case CaviarFamily::IG: q = -std::sqrt(p[0] + p[1] * r * r + p[2] * q * q); break;
                    case CaviarFamily::IGJR:
                        q = -std::sqrt(p[0] + (p[1] + (r < 0.0 ? p[2] : 0.0)) * r * r + p[3] * q * q);
                        break;
                    case CaviarFamily::ReC: {
                        const double lq = std::log(-q);
                        const double lx = p[3] + p[4] * lq + p[5] * e + p[6] * e * e + uu;
                        q = -std::exp(p[0] + p[1] * lx + p[2] * lq);
                        break;
                    }
                    case CaviarFamily::LogReC:
                        q = -std::exp(p[0] + p[1] * std::log(-q) + p[2] * e + p[3] * e * e + p[4] * uu);
                        break;
                }
                if (!(q < 0.0) || !std::isfinite(q))
                    throw NonFiniteError("QFHS path " + std::to_string(j) + " diverged", step + 1);
            }
            sample[j] = cum;
        }
    }
    auto out = risk_from_sample(sample, alpha0s);
    for (auto& f : out) {
        f.horizon = h;
        f.seed = seed;
    }
    return out;
}

[[nodiscard]] inline RiskForecast qfhs_forecast(const CaviarFit& fit, const MarketSeries& s, std::size_t h,
                                                std::size_t paths, double alpha0, std::uint64_t seed,
                                                const SimulationOptions& sim = {}) {
    const double a[] = {alpha0};
    return qfhs_forecast(fit, s, h, paths, a, seed, sim).front();
}

enum class EmEstimator {
    Ols,          ///< through-the-origin regression of exceedance returns on their quantiles
    TailAverage   ///< mean of the floor(alpha T) smallest scaled residuals
};

struct EmResult {
    double delta = 0.0;
    double es_forecast = 0.0;  ///< -delta * Q_{T+1}
    std::size_t count = 0;     ///< observations behind delta
};

/// Regression-based ES: ES_{T+1} = -delta Q_{T+1}.
[[nodiscard]] inline EmResult em_regression_es(const CaviarFit& fit, const MarketSeries& s,
                                               EmEstimator est = EmEstimator::Ols,
                                               std::size_t min_exceedances = kMinTailCount) {
    if (fit.q_series.size() != s.size()) throw LengthError("fit was not filtered on this series");
    EmResult out;
    if (est == EmEstimator::Ols) {
        double sqr = 0.0, sqq = 0.0;
        for (std::size_t t = 0; t < s.size(); ++t) {
            const double q = fit.q_series[t], r = s.returns[t];
            if (r < q) {
                sqr += q * r;
                sqq += q * q;
                ++out.count;
            }
        }
        if (out.count < min_exceedances)
            throw EmptyTailError("only " + std::to_string(out.count) + " exceedances; need " +
                                 std::to_string(min_exceedances));
        out.delta = sqr / sqq;
    } else {
        ScaledResiduals res = scaled_residuals(fit, s);
        const TailEstimate tail = lower_tail_inplace(res.eps, fit.spec.alpha_est, min_exceedances);
        out.delta = -tail.tail_mean;
        out.count = tail.count;
    }
    out.es_forecast = -out.delta * fit.q_next;
    return out;
}

/// One record of the forecast store: (date, model, h, alpha0) -> var, es, sim_vol, m, seed.
[[nodiscard]] inline nlohmann::json to_json(const RiskForecast& f, const std::string& model) {
    return nlohmann::json{{"date", f.date.iso()}, {"model", model},    {"h", f.horizon},
                          {"alpha0", f.alpha0},   {"var", f.var},      {"es", f.es},
                          {"sim_vol", f.sim_vol}, {"m", f.paths},      {"seed", f.seed}};
}

[[nodiscard]] inline RiskForecast risk_forecast_from_json(const nlohmann::json& j, std::string* model = nullptr) {
    RiskForecast f;
    const auto d = Date::parse(j.at("date").get<std::string>());
    if (!d) throw ParseError("bad forecast date '" + j.at("date").get<std::string>() + "'");
    f.date = *d;
    f.horizon = j.at("h").get<std::size_t>();
    f.alpha0 = j.at("alpha0").get<double>();
    f.var = j.at("var").get<double>();
    f.es = j.at("es").get<double>();
    f.sim_vol = j.at("sim_vol").get<double>();
    f.paths = j.value("m", std::size_t{0});
    f.seed = j.value("seed", std::uint64_t{0});
    if (model) *model = j.at("model").get<std::string>();
    return f;
}

}  // namespace qfhs
