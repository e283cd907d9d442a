#pragma once

// Volatility models estimated by Gaussian QML and the filtered historical
// simulation (FHS) forecaster built on their standardized residuals.
//
//   GARCH            s2_t = w + g r_{t-1}^2 + b s2_{t-1}
//   GJR              adds g- r_{t-1}^2 1{r_{t-1} < 0}
//   Realized GARCH   log s2_t = a0 + a1 log X_{t-1}^2 + b1 log s2_{t-1}
//                    log X_t^2 = xi + phi log s2_t + tau1 z_t + tau2 (z_t^2 - 1) + u_t
//   Realized EGARCH  log s2_t = a0 + b1 log s2_{t-1} + tau1 z_{t-1} + tau2 (z_{t-1}^2 - 1) + gam u_{t-1}
//                    log X_t^2 = xi + phi log s2_t + d1 z_t + d2 (z_t^2 - 1) + u_t

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qfhs/error.hpp"
#include "qfhs/linalg.hpp"
#include "qfhs/optimizer.hpp"
#include "qfhs/risk.hpp"
#include "qfhs/rng.hpp"
#include "qfhs/stats.hpp"
#include "qfhs/timeseries.hpp"

namespace qfhs {

enum class VolFamily { Garch, Gjr, RealizedGarch, RealizedEgarch };

struct VolSpec {
    VolFamily family = VolFamily::Garch;

    [[nodiscard]] bool realized() const noexcept {
        return family == VolFamily::RealizedGarch || family == VolFamily::RealizedEgarch;
    }
};

[[nodiscard]] inline std::vector<std::string> param_names(VolFamily f) {
    switch (f) {
        case VolFamily::Garch: return {"omega", "gamma", "beta"};
        case VolFamily::Gjr: return {"omega", "gamma", "gamma_neg", "beta"};
        case VolFamily::RealizedGarch: return {"a0", "a1", "b1", "xi", "phi", "tau1", "tau2", "tau2_var"};
        case VolFamily::RealizedEgarch:
            return {"a0", "b1", "tau1", "tau2", "gamma", "xi", "phi", "delta1", "delta2", "tau2_var"};
    }
    return {};
}

[[nodiscard]] inline std::string family_name(VolFamily f) {
    switch (f) {
        case VolFamily::Garch: return "GARCH";
        case VolFamily::Gjr: return "GJR";
        case VolFamily::RealizedGarch: return "RealizedGARCH";
        case VolFamily::RealizedEgarch: return "RealizedEGARCH";
    }
    return "?";
}

struct VolFilter {
    std::vector<double> sigma;  ///< sigma_t > 0
    std::vector<double> z;      ///< r_t / sigma_t
    std::vector<double> u;      ///< measurement residuals (realized families)
    double sigma_next = 0.0;    ///< one-step-ahead sigma_{T+1}
    double loglik = 0.0;        ///< Gaussian QML value (joint for realized families)
};

struct VolFit {
    VolSpec spec;
    std::vector<double> params;
    std::vector<double> sigma_series;
    std::vector<double> z_series;
    std::vector<double> u_series;
    double sigma_next = 0.0;
    double sigma2_init = 0.0;
    double loglik = 0.0;
    OptimResult optim;

    [[nodiscard]] double param(const std::string& name) const {
        const auto names = param_names(spec.family);
        for (std::size_t i = 0; i < names.size(); ++i)
            if (names[i] == name) return params[i];
        throw InvalidParameter("unknown parameter '" + name + "' for " + family_name(spec.family));
    }
};

namespace detail {

inline constexpr double kLog2Pi = 1.8378770664093454835606594728112;

inline void require_realized(const MarketSeries& s) {
    if (!s.has_realized()) throw ValidationError("realized family requires a realized measure");
    if (s.realized.size() != s.size()) throw LengthError("realized measure is not aligned with returns");
    for (std::size_t t = 0; t < s.size(); ++t)
        if (!(s.realized[t] > 0.0))
            throw ValidationError("realized measure must be strictly positive (t=" + std::to_string(t) + ")");
}

inline std::size_t expected_params(VolFamily f) { return param_names(f).size(); }

}  // namespace detail

/// Sample variance of the window; the default sigma_1^2.
[[nodiscard]] inline double default_sigma2_init(const MarketSeries& s) { return variance(s.returns, 1); }

/// Runs the volatility recursion with fixed parameters. When `sigma2_init` is
/// absent sigma_1^2 is the sample variance of the returns.
/// Throws NonFiniteError at the first t where sigma_t is not finite and positive.
[[nodiscard]] inline VolFilter filter_volatility(const VolSpec& spec, std::span<const double> params,
                                                 const MarketSeries& series,
                                                 std::optional<double> sigma2_init = std::nullopt) {
    if (params.size() != detail::expected_params(spec.family)) throw LengthError("wrong number of parameters");
    const std::size_t n = series.size();
    if (n < 2) throw LengthError("series too short to filter");
    if (spec.realized()) detail::require_realized(series);
    const auto& r = series.returns;
    const double s2_0 = sigma2_init.value_or(default_sigma2_init(series));
    if (!(s2_0 > 0.0)) throw InvalidParameter("initial variance must be positive");

    VolFilter out;
    out.sigma.resize(n);
    out.z.resize(n);
    if (spec.realized()) out.u.resize(n);
    double ll = 0.0, ll_meas_ss = 0.0;
    auto finish_step = [&](std::size_t t, double s2) {
        if (!(s2 > 0.0) || !std::isfinite(s2)) throw NonFiniteError("volatility recursion diverged", t);
        const double sd = std::sqrt(s2);
        out.sigma[t] = sd;
        out.z[t] = r[t] / sd;
        ll += -0.5 * (detail::kLog2Pi + std::log(s2) + r[t] * r[t] / s2);
    };

    switch (spec.family) {
        case VolFamily::Garch:
        case VolFamily::Gjr: {
            const bool gjr = spec.family == VolFamily::Gjr;
            const double w = params[0], g = params[1], gn = gjr ? params[2] : 0.0, b = params[gjr ? 3 : 2];
            double s2 = s2_0;
            for (std::size_t t = 0; t < n; ++t) {
                if (t > 0) {
                    const double rp = r[t - 1];
                    s2 = w + (g + (rp < 0.0 ? gn : 0.0)) * rp * rp + b * s2;
                }
                finish_step(t, s2);
            }
            const double rp = r[n - 1];
            out.sigma_next = std::sqrt(w + (g + (rp < 0.0 ? gn : 0.0)) * rp * rp + b * s2);
            break;
        }
        case VolFamily::RealizedGarch: {
            const double a0 = params[0], a1 = params[1], b1 = params[2], xi = params[3], phi = params[4],
                         tau1 = params[5], tau2 = params[6];
            double ls2 = std::log(s2_0);
            for (std::size_t t = 0; t < n; ++t) {
                if (t > 0) ls2 = a0 + a1 * 2.0 * std::log(series.realized[t - 1]) + b1 * ls2;
                finish_step(t, std::exp(ls2));
                const double z = out.z[t];
                out.u[t] = 2.0 * std::log(series.realized[t]) - xi - phi * ls2 - tau1 * z - tau2 * (z * z - 1.0);
                ll_meas_ss += out.u[t] * out.u[t];
            }
            out.sigma_next = std::exp(0.5 * (a0 + a1 * 2.0 * std::log(series.realized[n - 1]) + b1 * ls2));
            break;
        }
        case VolFamily::RealizedEgarch: {
            const double a0 = params[0], b1 = params[1], tau1 = params[2], tau2 = params[3], gam = params[4],
                         xi = params[5], phi = params[6], d1 = params[7], d2 = params[8];
            double ls2 = std::log(s2_0);
            for (std::size_t t = 0; t < n; ++t) {
                if (t > 0) {
                    const double zp = out.z[t - 1];
                    ls2 = a0 + b1 * ls2 + tau1 * zp + tau2 * (zp * zp - 1.0) + gam * out.u[t - 1];
                }
                finish_step(t, std::exp(ls2));
                const double z = out.z[t];
                out.u[t] = 2.0 * std::log(series.realized[t]) - xi - phi * ls2 - d1 * z - d2 * (z * z - 1.0);
                ll_meas_ss += out.u[t] * out.u[t];
            }
            const double zp = out.z[n - 1];
            out.sigma_next =
                std::exp(0.5 * (a0 + b1 * ls2 + tau1 * zp + tau2 * (zp * zp - 1.0) + gam * out.u[n - 1]));
            break;
        }
    }
    if (!std::isfinite(out.sigma_next) || !(out.sigma_next > 0.0))
        throw NonFiniteError("one-step volatility forecast diverged", n);
    if (spec.realized()) {
        const double tau2_var = params.back();
        if (!(tau2_var > 0.0)) throw InvalidParameter("measurement variance must be positive");
        ll += -0.5 * (static_cast<double>(n) * (detail::kLog2Pi + std::log(tau2_var)) + ll_meas_ss / tau2_var);
    }
    out.loglik = ll;
    return out;
}

struct VolFitOptions {
    std::size_t starts = 10;
    double jitter = 0.5;
    std::uint64_t seed = 20240101;
    std::size_t min_length = 250;
    OptimOptions optim{};
};

namespace detail {

inline constexpr double kInfLoss = std::numeric_limits<double>::infinity();

/// Negative Gaussian log-likelihood of GARCH/GJR; allocation-free.
inline double garch_negll(double w, double g, double gn, double b, std::span<const double> r, double s2_0) {
    double s2 = s2_0, acc = 0.0;
    for (std::size_t t = 0; t < r.size(); ++t) {
        if (t > 0) {
            const double rp = r[t - 1];
            s2 = w + (g + (rp < 0.0 ? gn : 0.0)) * rp * rp + b * s2;
        }
        if (!(s2 > 0.0) || !std::isfinite(s2)) return kInfLoss;
        acc += std::log(s2) + r[t] * r[t] / s2;
    }
    return 0.5 * (static_cast<double>(r.size()) * kLog2Pi + acc);
}

/// Realized GARCH likelihood with the measurement block concentrated out.
/// `lx2` holds log X_t^2. When `meas` is given it receives (xi, phi, tau1, tau2, tau^2).
inline double realized_garch_profile(std::span<const double> dyn, std::span<const double> r,
                                     std::span<const double> lx2, double s2_0,
                                     std::array<double, 5>* meas = nullptr) {
    const std::size_t n = r.size();
    NormalEquations ne(4);
    double ls2 = std::log(s2_0), acc = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        if (t > 0) ls2 = dyn[0] + dyn[1] * lx2[t - 1] + dyn[2] * ls2;
        const double s2 = std::exp(ls2);
        if (!(s2 > 0.0) || !std::isfinite(s2)) return kInfLoss;
        const double z = r[t] / std::sqrt(s2);
        acc += ls2 + r[t] * r[t] / s2;
        const std::array<double, 4> x{1.0, ls2, z, z * z - 1.0};
        ne.add(x, lx2[t]);
    }
    const double next = dyn[0] + dyn[1] * lx2[n - 1] + dyn[2] * ls2;
    if (!std::isfinite(std::exp(next))) return kInfLoss;
    std::vector<double> b;
    try {
        b = ne.solve();
    } catch (const SingularError&) {
        return kInfLoss;
    }
    const double v = ne.residual_ss(b) / static_cast<double>(n);
    if (!(v > 0.0)) return kInfLoss;
    if (meas) *meas = {b[0], b[1], b[2], b[3], v};
    const double dn = static_cast<double>(n);
    return 0.5 * (dn * kLog2Pi + acc) + 0.5 * dn * (kLog2Pi + std::log(v) + 1.0);
}

/// Realized EGARCH likelihood with tau^2 concentrated out; `p` excludes tau^2.
inline double realized_egarch_profile(std::span<const double> p, std::span<const double> r,
                                      std::span<const double> lx2, double s2_0, double* var = nullptr) {
    const std::size_t n = r.size();
    const double a0 = p[0], b1 = p[1], t1 = p[2], t2 = p[3], g = p[4], xi = p[5], phi = p[6], d1 = p[7], d2 = p[8];
    double ls2 = std::log(s2_0), acc = 0.0, ss = 0.0, zp = 0.0, up = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        if (t > 0) ls2 = a0 + b1 * ls2 + t1 * zp + t2 * (zp * zp - 1.0) + g * up;
        const double s2 = std::exp(ls2);
        if (!(s2 > 0.0) || !std::isfinite(s2)) return kInfLoss;
        const double z = r[t] / std::sqrt(s2);
        acc += ls2 + r[t] * r[t] / s2;
        const double u = lx2[t] - xi - phi * ls2 - d1 * z - d2 * (z * z - 1.0);
        ss += u * u;
        zp = z;
        up = u;
    }
    if (!std::isfinite(std::exp(a0 + b1 * ls2 + t1 * zp + t2 * (zp * zp - 1.0) + g * up))) return kInfLoss;
    const double dn = static_cast<double>(n);
    const double v = ss / dn;
    if (!(v > 0.0) || !std::isfinite(v)) return kInfLoss;
    if (var) *var = v;
    return 0.5 * (dn * kLog2Pi + acc) + 0.5 * dn * (kLog2Pi + std::log(v) + 1.0);
}

inline std::vector<double> log_squared(std::span<const double> x) {
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = 2.0 * std::log(x[i]);
    return out;
}

}  // namespace detail

/// Gaussian QML fit. For Realized GARCH the measurement coefficients are
/// concentrated out by OLS (the latent path does not depend on them); for
/// Realized EGARCH only the measurement variance is concentrated out.
[[nodiscard]] inline VolFit fit_qml(const VolSpec& spec, const MarketSeries& series, const VolFitOptions& opts = {}) {
    if (series.size() < opts.min_length)
        throw LengthError("fit_qml needs at least " + std::to_string(opts.min_length) + " observations");
    if (spec.realized()) detail::require_realized(series);
    const double s2 = default_sigma2_init(series);
    if (!(s2 > 0.0)) throw ValidationError("returns are constant; volatility is not identified");
    const std::span<const double> r(series.returns);

    VolFit fit;
    fit.spec = spec;
    fit.sigma2_init = s2;

    switch (spec.family) {
        case VolFamily::Garch: {
            ParamSpace space({Transform::Positive, Transform::SimplexPair});
            const std::vector<double> base{s2 * 0.05, 0.05, 0.90};
            auto starts = jittered_starts(base, space, opts.starts, opts.jitter, opts.seed);
            fit.optim = multi_start_minimize(
                [&](std::span<const double> p) { return detail::garch_negll(p[0], p[1], 0.0, p[2], r, s2); }, starts,
                space, opts.optim);
            fit.params = fit.optim.argmin;
            break;
        }
        case VolFamily::Gjr: {
            // Search space (omega, p, beta, share) with p = gamma + gamma_neg / 2.
            ParamSpace space({Transform::Positive, Transform::SimplexPair, Transform::UnitInterval});
            const std::vector<double> base{s2 * 0.05, 0.05, 0.90, 0.3};
            auto starts = jittered_starts(base, space, opts.starts, opts.jitter, opts.seed);
            fit.optim = multi_start_minimize(
                [&](std::span<const double> q) {
                    return detail::garch_negll(q[0], q[1] * q[3], 2.0 * q[1] * (1.0 - q[3]), q[2], r, s2);
                },
                starts, space, opts.optim);
            const auto& q = fit.optim.argmin;
            fit.params = {q[0], q[1] * q[3], 2.0 * q[1] * (1.0 - q[3]), q[2]};
            break;
        }
        case VolFamily::RealizedGarch: {
            const auto lx2 = detail::log_squared(series.realized);
            const double mean_lx2 = mean(lx2);
            ParamSpace space = ParamSpace::free(3);
            const double b1 = 0.55, a1 = 0.40;
            const std::vector<double> base{(1.0 - b1) * std::log(s2) - a1 * mean_lx2, a1, b1};
            auto starts = jittered_starts(base, space, opts.starts, opts.jitter * 0.2, opts.seed);
            fit.optim = multi_start_minimize(
                [&](std::span<const double> dyn) { return detail::realized_garch_profile(dyn, r, lx2, s2); }, starts,
                space, opts.optim);
            std::array<double, 5> m{};
            detail::realized_garch_profile(fit.optim.argmin, r, lx2, s2, &m);
            const auto& d = fit.optim.argmin;
            fit.params = {d[0], d[1], d[2], m[0], m[1], m[2], m[3], m[4]};
            break;
        }
        case VolFamily::RealizedEgarch: {
            // Start from a Realized GARCH fit: its path gives the measurement block.
            VolFitOptions pre = opts;
            pre.starts = std::max<std::size_t>(1, opts.starts / 3);
            const VolFit rg = fit_qml(VolSpec{VolFamily::RealizedGarch}, series, pre);
            const auto lx2 = detail::log_squared(series.realized);
            const double b1 = 0.95;
            double mean_ls2 = 0.0;
            for (double sd : rg.sigma_series) mean_ls2 += 2.0 * std::log(sd);
            mean_ls2 /= static_cast<double>(series.size());
            const std::vector<double> base{(1.0 - b1) * mean_ls2, b1, -0.05, 0.05, 0.3,
                                           rg.params[3], rg.params[4], rg.params[5], rg.params[6]};
            ParamSpace space = ParamSpace::free(9);
            auto starts = jittered_starts(base, space, opts.starts, opts.jitter * 0.1, opts.seed);
            fit.optim = multi_start_minimize(
                [&](std::span<const double> p) { return detail::realized_egarch_profile(p, r, lx2, s2); }, starts,
                space, opts.optim);
            double v = 0.0;
            detail::realized_egarch_profile(fit.optim.argmin, r, lx2, s2, &v);
            fit.params.assign(fit.optim.argmin.begin(), fit.optim.argmin.end());
            fit.params.push_back(v);
            break;
        }
    }
    const VolFilter f = filter_volatility(spec, fit.params, series, s2);
    fit.sigma_series = f.sigma;
    fit.z_series = f.z;
    fit.u_series = f.u;
    fit.sigma_next = f.sigma_next;
    fit.loglik = f.loglik;
    return fit;
}

enum class ResampleMode {
    Iid,        ///< M draws with replacement from the residual pool
    Exhaustive  ///< h = 1 only: every residual used exactly once (M = T)
};

struct SimulationOptions {
    ResampleMode mode = ResampleMode::Iid;
    bool gaussian_measurement = false;  ///< draw u ~ N(0, tau^2) instead of pairing it with z
};

/// FHS VaR/ES forecasts at every level in `alpha0s`, all from one simulated
/// sample of h-period returns. Path j uses the rng stream derive_seed(seed, {j}).
[[nodiscard]] inline std::vector<RiskForecast> fhs_forecast(const VolFit& fit, const MarketSeries& series,
                                                            std::size_t h, std::size_t paths,
                                                            std::span<const double> alpha0s, std::uint64_t seed,
                                                            const SimulationOptions& sim = {}) {
    if (h == 0) throw InvalidParameter("horizon must be at least 1");
    if (fit.z_series.size() != series.size()) throw LengthError("fit was not filtered on this series");
    const auto& z = fit.z_series;
    const auto& u = fit.u_series;
    const std::size_t pool = z.size();
    std::vector<double> sample;
    if (sim.mode == ResampleMode::Exhaustive) {
        if (h != 1) throw InvalidParameter("exhaustive resampling is defined for h = 1 only");
        sample.resize(pool);
        for (std::size_t j = 0; j < pool; ++j) sample[j] = fit.sigma_next * z[j];
    } else {
        if (paths < 1000) throw InvalidParameter("FHS simulation needs at least 1000 paths");
        sample.resize(paths);
        const auto& p = fit.params;
        const double tau = fit.spec.realized() ? std::sqrt(p.back()) : 0.0;
        for (std::size_t j = 0; j < paths; ++j) {
            Rng rng(derive_seed(seed, {j}));
            double cum = 0.0;
            double s2 = fit.sigma_next * fit.sigma_next;
            double ls2 = std::log(s2);
            for (std::size_t step = 0; step < h; ++step) {
                const std::size_t idx = rng.index(pool);
                const double zz = z[idx];
                double uu = 0.0;
                if (fit.spec.realized()) uu = sim.gaussian_measurement ? tau * rng.normal() : u[idx];
                const double r = std::sqrt(s2) * zz;
                cum += r;
                if (step + 1 == h) break;
                switch (fit.spec.family) {
                    case VolFamily::Garch: s2 = p[0] + p[1] * r * r + p[2] * s2; break;
                    case VolFamily::Gjr: s2 = p[0] + (p[1] + (r < 0.0 ? p[2] : 0.0)) * r * r + p[3] * s2; break;
                    case VolFamily::RealizedGarch: {
                        const double lx2 = p[3] + p[4] * ls2 + p[5] * zz + p[6] * (zz * zz - 1.0) + uu;
                        ls2 = p[0] + p[1] * lx2 + p[2] * ls2;
                        s2 = std::exp(ls2);
                        break;
                    }
                    case VolFamily::RealizedEgarch:
                        ls2 = p[0] + p[1] * ls2 + p[2] * zz + p[3] * (zz * zz - 1.0) + p[4] * uu;
                        s2 = std::exp(ls2);
                        break;
                }
                ls2 = std::log(s2);
                if (!std::isfinite(s2)) throw NonFiniteError("FHS path " + std::to_string(j) + " diverged", step);
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

[[nodiscard]] inline RiskForecast fhs_forecast(const VolFit& fit, const MarketSeries& series, std::size_t h,
                                               std::size_t paths, double alpha0, std::uint64_t seed,
                                               const SimulationOptions& sim = {}) {
    const double a[] = {alpha0};
    return fhs_forecast(fit, series, h, paths, a, seed, sim).front();
}

}  // namespace qfhs
