#pragma once

// Conditional quantile (CAViaR) models. Q_t < 0 is the alpha-quantile of r_t.
//
//   IG      Q_t = -sqrt(w + g r_{t-1}^2 + b Q_{t-1}^2)
//   IGJR    adds g- r_{t-1}^2 1{r_{t-1} < 0} under the root
//   ReC     log|Q_t| = a0 + a1 log X_{t-1} + b1 log|Q_{t-1}|
//           log X_t  = xi + phi log|Q_t| + tau1 e_t + tau2 e_t^2 + u_t
//   LogReC  log|Q_t| = a0 + b1 log|Q_{t-1}| + tau1 e_{t-1} + tau2 e_{t-1}^2 + gam u_{t-1}
//           log X_t  = xi + phi log|Q_t| + d1 e_t + d2 e_t^2 + u_t
//
// with e_t = r_t / (-Q_t).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qfhs/error.hpp"
#include "qfhs/format.hpp"
#include "qfhs/linalg.hpp"
#include "qfhs/optimizer.hpp"
#include "qfhs/stats.hpp"
#include "qfhs/timeseries.hpp"
#include "qfhs/volatility.hpp"

namespace qfhs {

enum class CaviarFamily { IG, IGJR, ReC, LogReC };

struct CaviarSpec {
    CaviarFamily family = CaviarFamily::IG;
    double alpha_est = 0.05;

    [[nodiscard]] bool realized() const noexcept {
        return family == CaviarFamily::ReC || family == CaviarFamily::LogReC;
    }
};

[[nodiscard]] inline std::vector<std::string> param_names(CaviarFamily f) {
    switch (f) {
        case CaviarFamily::IG: return {"omega_c", "gamma_c", "beta_c"};
        case CaviarFamily::IGJR: return {"omega_c", "gamma_c", "gamma_c_neg", "beta_c"};
        case CaviarFamily::ReC: return {"a0", "a1", "b1", "xi", "phi", "tau1", "tau2", "tau2_var"};
        case CaviarFamily::LogReC:
            return {"a0", "b1", "tau1", "tau2", "gamma", "xi", "phi", "delta1", "delta2", "tau2_var"};
    }
    return {};
}

[[nodiscard]] inline std::string family_name(CaviarFamily f) {
    switch (f) {
        case CaviarFamily::IG: return "IG";
        case CaviarFamily::IGJR: return "IGJR";
        case CaviarFamily::ReC: return "ReC";
        case CaviarFamily::LogReC: return "logReC";
    }
    return "?";
}

/// Check (pinball) loss of one observation.
[[nodiscard]] inline double check_loss(double alpha, double r, double q) noexcept {
    return (alpha - (r < q ? 1.0 : 0.0)) * (r - q);
}

/// Sum over t of (alpha - 1{r_t < q_t}) (r_t - q_t).
[[nodiscard]] inline double quantile_loss(double alpha, std::span<const double> returns, std::span<const double> q) {
    if (returns.size() != q.size()) throw LengthError("quantile_loss: returns and quantiles differ in length");
    double s = 0.0, c = 0.0;
    for (std::size_t t = 0; t < q.size(); ++t) {
        if (!std::isfinite(q[t])) throw NonFiniteError("quantile_loss: non-finite quantile", t);
        const double y = check_loss(alpha, returns[t], q[t]) - c;
        const double tot = s + y;
        c = (tot - s) - y;
        s = tot;
    }
    return s;
}

struct CaviarFilter {
    std::vector<double> q;   ///< Q_t < 0
    std::vector<double> u;   ///< measurement residuals (realized families)
    double q_next = 0.0;     ///< one-step-ahead Q_{T+1}
    double q_init = 0.0;
};

/// Initial quantile: empirical alpha-quantile of the first 50 returns.
[[nodiscard]] inline double default_q_init(const MarketSeries& s, double alpha) {
    const std::size_t n = std::min<std::size_t>(50, s.size());
    if (n == 0) throw LengthError("empty series");
    std::span<const double> head(s.returns.data(), n);
    double q = empirical_quantile(head, alpha);
    if (!(q < 0.0)) {
        const double sd = std::sqrt(variance(head, 1));
        if (!(sd > 0.0)) throw ValidationError("cannot initialize the quantile recursion on constant returns");
        q = -sd;
    }
    return q;
}

namespace detail {

inline void require_caviar_params(const CaviarSpec& spec, std::span<const double> p) {
    if (p.size() != param_names(spec.family).size()) throw LengthError("wrong number of CAViaR parameters");
    if (spec.family == CaviarFamily::IG || spec.family == CaviarFamily::IGJR) {
        if (!(p[0] > 0.0)) throw InvalidParameter("omega_c must be positive");
        for (std::size_t i = 1; i < p.size(); ++i)
            if (!(p[i] >= 0.0)) throw InvalidParameter("CAViaR-IG coefficients must be nonnegative");
    }
    if (spec.realized() && !(p.back() > 0.0)) throw InvalidParameter("measurement variance must be positive");
}

inline void require_caviar_series(const CaviarSpec& spec, const MarketSeries& s) {
    if (s.size() < 2) throw LengthError("series too short to filter");
    if (spec.realized()) {
        if (!s.has_realized()) throw ValidationError("realized family requires a realized measure");
        for (std::size_t t = 0; t < s.size(); ++t)
            if (!(s.realized[t] > 0.0))
                throw ValidationError("realized measure must be strictly positive (t=" + std::to_string(t) + ")");
    }
}

inline void check_q(double q, std::size_t t) {
    if (!(q < 0.0) || !std::isfinite(q)) throw NonFiniteError("quantile recursion diverged", t);
}

/// ReC quantile path; depends on (a0, a1, b1) only.
inline void rec_path(std::span<const double> p, const MarketSeries& s, double q_init, std::vector<double>& q,
                     double& q_next) {
    const std::size_t n = s.size();
    q.resize(n);
    double lq = std::log(-q_init);
    for (std::size_t t = 0; t < n; ++t) {
        if (t > 0) lq = p[0] + p[1] * std::log(s.realized[t - 1]) + p[2] * lq;
        q[t] = -std::exp(lq);
        check_q(q[t], t);
    }
    q_next = -std::exp(p[0] + p[1] * std::log(s.realized[n - 1]) + p[2] * lq);
}

}  // namespace detail

/// Runs the quantile recursion with fixed parameters. `q_init` defaults to
/// default_q_init(). Throws NonFiniteError at the first t where Q_t is not
/// finite and negative.
[[nodiscard]] inline CaviarFilter filter_caviar(const CaviarSpec& spec, std::span<const double> p,
                                                const MarketSeries& s, std::optional<double> q_init = std::nullopt) {
    detail::require_caviar_params(spec, p);
    detail::require_caviar_series(spec, s);
    const std::size_t n = s.size();
    const auto& r = s.returns;
    CaviarFilter f;
    f.q_init = q_init.value_or(default_q_init(s, spec.alpha_est));
    if (!(f.q_init < 0.0)) throw InvalidParameter("initial quantile must be negative");
    f.q.resize(n);
    switch (spec.family) {
        case CaviarFamily::IG:
        case CaviarFamily::IGJR: {
            const bool jr = spec.family == CaviarFamily::IGJR;
            const double w = p[0], g = p[1], gn = jr ? p[2] : 0.0, b = p[jr ? 3 : 2];
            double q2 = f.q_init * f.q_init;
            for (std::size_t t = 0; t < n; ++t) {
                if (t > 0) {
                    const double rp = r[t - 1];
                    q2 = w + (g + (rp < 0.0 ? gn : 0.0)) * rp * rp + b * q2;
                }
                f.q[t] = -std::sqrt(q2);
                detail::check_q(f.q[t], t);
            }
            const double rp = r[n - 1];
            f.q_next = -std::sqrt(w + (g + (rp < 0.0 ? gn : 0.0)) * rp * rp + b * q2);
            break;
        }
        case CaviarFamily::ReC: {
            detail::rec_path(p, s, f.q_init, f.q, f.q_next);
            f.u.resize(n);
            for (std::size_t t = 0; t < n; ++t) {
                const double e = r[t] / (-f.q[t]);
                f.u[t] = std::log(s.realized[t]) - p[3] - p[4] * std::log(-f.q[t]) - p[5] * e - p[6] * e * e;
            }
            break;
        }
        case CaviarFamily::LogReC: {
            f.u.resize(n);
            double lq = std::log(-f.q_init);
            double ep = 0.0;
            for (std::size_t t = 0; t < n; ++t) {
                if (t > 0) lq = p[0] + p[1] * lq + p[2] * ep + p[3] * ep * ep + p[4] * f.u[t - 1];
                f.q[t] = -std::exp(lq);
                detail::check_q(f.q[t], t);
                ep = r[t] / (-f.q[t]);
                f.u[t] = std::log(s.realized[t]) - p[5] - p[6] * lq - p[7] * ep - p[8] * ep * ep;
            }
            f.q_next = -std::exp(p[0] + p[1] * lq + p[2] * ep + p[3] * ep * ep + p[4] * f.u[n - 1]);
            break;
        }
    }
    if (!(f.q_next < 0.0) || !std::isfinite(f.q_next)) throw NonFiniteError("one-step quantile forecast diverged", n);
    return f;
}

enum class PseudoLikelihood {
    Literal,           ///< -quantile_loss + measurement log-likelihood
    AsymmetricLaplace  ///< quantile loss enters through a profiled asymmetric-Laplace scale
};

struct CaviarFitOptions {
    std::size_t starts = 10;
    double jitter = 0.5;
    std::uint64_t seed = 20240102;
    std::size_t min_length = 250;
    const VolFit* prefit = nullptr;          ///< volatility fit used for starting values; fitted if absent
    std::optional<std::vector<double>> start;  ///< replaces the heuristic start
    double measurement_weight = 1.0;
    PseudoLikelihood pseudo = PseudoLikelihood::Literal;
    std::optional<double> q_init;
    OptimOptions optim{};
};

struct CaviarFit {
    CaviarSpec spec;
    std::vector<double> params;
    std::vector<double> q_series;
    std::vector<double> u_series;
    double q_next = 0.0;
    double q_init = 0.0;
    double objective = 0.0;         ///< minimized value
    double quantile_loss = 0.0;     ///< quantile-loss component
    double measurement_loglik = 0.0;  ///< Gaussian measurement log-likelihood (realized families)
    double violation_rate = 0.0;
    std::vector<std::string> warnings;
    OptimResult optim;

    [[nodiscard]] double param(const std::string& name) const {
        const auto names = param_names(spec.family);
        for (std::size_t i = 0; i < names.size(); ++i)
            if (names[i] == name) return params[i];
        throw InvalidParameter("unknown parameter '" + name + "' for " + family_name(spec.family));
    }
};

[[nodiscard]] inline double violation_rate(std::span<const double> r, std::span<const double> q) {
    if (r.size() != q.size() || r.empty()) throw LengthError("violation_rate: length mismatch");
    std::size_t k = 0;
    for (std::size_t t = 0; t < r.size(); ++t) k += r[t] < q[t] ? 1 : 0;
    return static_cast<double>(k) / static_cast<double>(r.size());
}

[[nodiscard]] inline double gaussian_loglik(std::span<const double> u, double var) {
    double ss = 0.0;
    for (double x : u) ss += x * x;
    return -0.5 * (static_cast<double>(u.size()) * (detail::kLog2Pi + std::log(var)) + ss / var);
}

/// Objective value and its components for fixed parameters.
struct CaviarObjective {
    double value;
    double quantile_loss;
    double measurement_loglik;
};

[[nodiscard]] inline CaviarObjective caviar_objective(const CaviarSpec& spec, std::span<const double> p,
                                                      const MarketSeries& s, double measurement_weight = 1.0,
                                                      PseudoLikelihood pseudo = PseudoLikelihood::Literal,
                                                      std::optional<double> q_init = std::nullopt) {
    const CaviarFilter f = filter_caviar(spec, p, s, q_init);
    CaviarObjective o{};
    o.quantile_loss = quantile_loss(spec.alpha_est, s.returns, f.q);
    const double n = static_cast<double>(s.size());
    o.value = pseudo == PseudoLikelihood::Literal ? o.quantile_loss : n * std::log(o.quantile_loss / n);
    if (spec.realized()) {
        o.measurement_loglik = gaussian_loglik(f.u, p.back());
        o.value -= measurement_weight * o.measurement_loglik;
    }
    return o;
}

namespace detail {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Error quantile of the standardized residuals, used to map volatility
/// coefficients onto quantile coefficients.
inline double residual_quantile(const VolFit& v, double alpha) {
    const double qz = empirical_quantile(v.z_series, alpha);
    if (!(qz < 0.0)) throw ValidationError("standardized residual quantile is not negative");
    return qz;
}

inline VolFamily matching_vol_family(CaviarFamily f) {
    switch (f) {
        case CaviarFamily::IG: return VolFamily::Garch;
        case CaviarFamily::IGJR: return VolFamily::Gjr;
        case CaviarFamily::ReC: return VolFamily::RealizedGarch;
        case CaviarFamily::LogReC: return VolFamily::RealizedEgarch;
    }
    return VolFamily::Garch;
}

/// Quantile-model parameters implied by a volatility fit and the error quantile qz.
inline std::vector<double> start_from_volatility(CaviarFamily f, const VolFit& v, double qz) {
    const auto& p = v.params;
    const double m = qz * qz;
    const double c = std::log(-qz);
    switch (f) {
        case CaviarFamily::IG: return {p[0] * m, std::max(p[1], 1e-4) * m, std::min(p[2], 0.999)};
        case CaviarFamily::IGJR:
            return {p[0] * m, std::max(p[1], 1e-4) * m, std::max(p[2], 1e-4) * m, std::min(p[3], 0.999)};
        case CaviarFamily::ReC: {
            const double a0 = p[0], a1 = p[1], b1 = p[2], xi = p[3], phi = p[4], t1 = p[5], t2 = p[6], v2 = p[7];
            return {0.5 * a0 + c * (1.0 - b1), a1, b1, 0.5 * xi - phi * c - 0.5 * t2, phi, 0.5 * t1 * (-qz),
                    0.5 * t2 * m, 0.25 * v2};
        }
        case CaviarFamily::LogReC: {
            const double a0 = p[0], b1 = p[1], t1 = p[2], t2 = p[3], g = p[4], xi = p[5], phi = p[6], d1 = p[7],
                         d2 = p[8], v2 = p[9];
            return {c * (1.0 - b1) + 0.5 * a0 - 0.5 * t2, b1, 0.5 * t1 * (-qz), 0.5 * t2 * m, g,
                    0.5 * xi - phi * c - 0.5 * d2, phi, 0.5 * d1 * (-qz), 0.5 * d2 * m, 0.25 * v2};
        }
    }
    return {};
}

inline double ql_value(double ql, std::size_t n, PseudoLikelihood pseudo) {
    const double dn = static_cast<double>(n);
    return pseudo == PseudoLikelihood::Literal ? ql : dn * std::log(ql / dn);
}

/// IG/IGJR quantile loss; allocation-free.
inline double ig_loss(double w, double g, double gn, double b, std::span<const double> r, double q0, double alpha) {
    double q2 = q0 * q0, ql = 0.0;
    for (std::size_t t = 0; t < r.size(); ++t) {
        if (t > 0) {
            const double rp = r[t - 1];
            q2 = w + (g + (rp < 0.0 ? gn : 0.0)) * rp * rp + b * q2;
        }
        if (!(q2 > 0.0) || !std::isfinite(q2)) return kInf;
        ql += check_loss(alpha, r[t], -std::sqrt(q2));
    }
    return ql;
}

/// ReC objective with the measurement block concentrated out; `lx` holds log X_t.
inline double rec_profile(std::span<const double> dyn, std::span<const double> r, std::span<const double> lx,
                          double q0, double alpha, double weight, PseudoLikelihood pseudo,
                          std::array<double, 5>* meas = nullptr) {
    const std::size_t n = r.size();
    NormalEquations ne(4);
    double lq = std::log(-q0), ql = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        if (t > 0) lq = dyn[0] + dyn[1] * lx[t - 1] + dyn[2] * lq;
        const double aq = std::exp(lq);
        if (!(aq > 0.0) || !std::isfinite(aq)) return kInf;
        ql += check_loss(alpha, r[t], -aq);
        const double e = r[t] / aq;
        const std::array<double, 4> x{1.0, lq, e, e * e};
        ne.add(x, lx[t]);
    }
    if (!std::isfinite(std::exp(dyn[0] + dyn[1] * lx[n - 1] + dyn[2] * lq))) return kInf;
    double v = ql_value(ql, n, pseudo);
    if (weight != 0.0 || meas) {
        std::vector<double> b;
        try {
            b = ne.solve();
        } catch (const SingularError&) {
            return kInf;
        }
        const double var = ne.residual_ss(b) / static_cast<double>(n);
        if (!(var > 0.0)) return kInf;
        if (meas) *meas = {b[0], b[1], b[2], b[3], var};
        v -= weight * (-0.5 * static_cast<double>(n) * (kLog2Pi + std::log(var) + 1.0));
    }
    return v;
}

/// LogReC objective with tau^2 concentrated out; `p` excludes tau^2.
inline double logrec_profile(std::span<const double> p, std::span<const double> r, std::span<const double> lx,
                             double q0, double alpha, double weight, PseudoLikelihood pseudo, double* var = nullptr) {
    const std::size_t n = r.size();
    double lq = std::log(-q0), ql = 0.0, ss = 0.0, ep = 0.0, up = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        if (t > 0) lq = p[0] + p[1] * lq + p[2] * ep + p[3] * ep * ep + p[4] * up;
        const double aq = std::exp(lq);
        if (!(aq > 0.0) || !std::isfinite(aq)) return kInf;
        ql += check_loss(alpha, r[t], -aq);
        ep = r[t] / aq;
        up = lx[t] - p[5] - p[6] * lq - p[7] * ep - p[8] * ep * ep;
        ss += up * up;
    }
    if (!std::isfinite(std::exp(p[0] + p[1] * lq + p[2] * ep + p[3] * ep * ep + p[4] * up))) return kInf;
    const double v2 = ss / static_cast<double>(n);
    if (!(v2 > 0.0) || !std::isfinite(v2)) return kInf;
    if (var) *var = v2;
    return ql_value(ql, n, pseudo) - weight * (-0.5 * static_cast<double>(n) * (kLog2Pi + std::log(v2) + 1.0));
}

inline std::vector<double> log_of(std::span<const double> x) {
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::log(x[i]);
    return out;
}

inline std::vector<double> concat_params(std::span<const double> a, std::span<const double> b) {
    std::vector<double> out(a.begin(), a.end());
    out.insert(out.end(), b.begin(), b.end());
    return out;
}

}  // namespace detail

/// Estimates a CAViaR model. IG/IGJR minimize the quantile loss; ReC/LogReC
/// minimize quantile loss minus the Gaussian measurement log-likelihood.
/// ReC measurement coefficients are concentrated out by OLS (the quantile
/// path does not depend on them); LogReC concentrates out tau^2 only.
[[nodiscard]] inline CaviarFit fit_caviar(const CaviarSpec& spec, const MarketSeries& s,
                                          const CaviarFitOptions& opts = {}) {
    if (!(spec.alpha_est > 0.0 && spec.alpha_est < 0.5)) throw InvalidParameter("alpha_est must lie in (0, 0.5)");
    if (s.size() < opts.min_length)
        throw LengthError("fit_caviar needs at least " + std::to_string(opts.min_length) + " observations");
    detail::require_caviar_series(spec, s);
    const double q0 = opts.q_init.value_or(default_q_init(s, spec.alpha_est));
    const double a = spec.alpha_est;
    const double w = opts.measurement_weight;

    std::vector<double> base;
    if (opts.start) {
        base = *opts.start;
    } else {
        std::optional<VolFit> own;
        const VolFit* v = opts.prefit;
        if (v == nullptr || v->spec.family != detail::matching_vol_family(spec.family)) {
            VolFitOptions vo;
            vo.starts = std::max<std::size_t>(1, opts.starts / 2);
            vo.seed = derive_seed(opts.seed, {1});
            vo.min_length = opts.min_length;
            vo.optim = opts.optim;
            own = fit_qml(VolSpec{detail::matching_vol_family(spec.family)}, s, vo);
            v = &*own;
        }
        base = detail::start_from_volatility(spec.family, *v, detail::residual_quantile(*v, a));
    }
    if (base.size() != param_names(spec.family).size()) throw LengthError("start vector has the wrong size");

    CaviarFit fit;
    fit.spec = spec;

    switch (spec.family) {
        case CaviarFamily::IG:
        case CaviarFamily::IGJR: {
            ParamSpace space;
            for (std::size_t i = 0; i + 1 < base.size(); ++i) space.add(Transform::Positive);
            space.add(Transform::UnitInterval);
            for (std::size_t i = 1; i + 1 < base.size(); ++i) base[i] = std::max(base[i], 1e-6 * base[0]);
            base.back() = std::clamp(base.back(), 1e-4, 1.0 - 1e-4);
            const bool jr = spec.family == CaviarFamily::IGJR;
            const std::span<const double> r(s.returns);
            auto objective = [&](std::span<const double> p) {
                const double ql = detail::ig_loss(p[0], p[1], jr ? p[2] : 0.0, p[jr ? 3 : 2], r, q0, a);
                return std::isfinite(ql) ? detail::ql_value(ql, s.size(), opts.pseudo) : detail::kInf;
            };
            auto starts = jittered_starts(base, space, opts.starts, opts.jitter, opts.seed);
            fit.optim = multi_start_minimize(objective, starts, space, opts.optim);
            fit.params = fit.optim.argmin;
            break;
        }
        case CaviarFamily::ReC: {
            const auto lx = detail::log_of(s.realized);
            const std::span<const double> r(s.returns);
            ParamSpace space = ParamSpace::free(3);
            const std::vector<double> dyn0(base.begin(), base.begin() + 3);
            auto starts = jittered_starts(dyn0, space, opts.starts, opts.jitter * 0.1, opts.seed);
            fit.optim = multi_start_minimize(
                [&](std::span<const double> d) { return detail::rec_profile(d, r, lx, q0, a, w, opts.pseudo); },
                starts, space, opts.optim);
            std::array<double, 5> m{};
            detail::rec_profile(fit.optim.argmin, r, lx, q0, a, w, opts.pseudo, &m);
            fit.params = detail::concat_params(fit.optim.argmin, m);
            break;
        }
        case CaviarFamily::LogReC: {
            const auto lx = detail::log_of(s.realized);
            const std::span<const double> r(s.returns);
            ParamSpace space = ParamSpace::free(9);
            const std::vector<double> p0(base.begin(), base.begin() + 9);
            auto starts = jittered_starts(p0, space, opts.starts, opts.jitter * 0.05, opts.seed);
            fit.optim = multi_start_minimize(
                [&](std::span<const double> p) { return detail::logrec_profile(p, r, lx, q0, a, w, opts.pseudo); },
                starts, space, opts.optim);
            double var = 0.0;
            detail::logrec_profile(fit.optim.argmin, r, lx, q0, a, w, opts.pseudo, &var);
            fit.params.assign(fit.optim.argmin.begin(), fit.optim.argmin.end());
            fit.params.push_back(var);
            break;
        }
    }
    const CaviarFilter f = filter_caviar(spec, fit.params, s, q0);
    const CaviarObjective o = caviar_objective(spec, fit.params, s, w, opts.pseudo, q0);
    fit.q_series = f.q;
    fit.u_series = f.u;
    fit.q_next = f.q_next;
    fit.q_init = q0;
    fit.objective = o.value;
    fit.quantile_loss = o.quantile_loss;
    fit.measurement_loglik = o.measurement_loglik;
    fit.violation_rate = violation_rate(s.returns, f.q);
    const double band = 2.0 * std::sqrt(a * (1.0 - a) / static_cast<double>(s.size()));
    if (std::abs(fit.violation_rate - a) >= band)
        fit.warnings.push_back("in-sample violation rate " + format_double(fit.violation_rate, 4) +
                               " is outside alpha_est +/- " + format_double(band, 4));
    return fit;
}

// ---------------------------------------------------------------------------
// Variance-targeted CAViaR-IG:
//   Q_t = Q_eps sqrt(w + g r_{t-1}^2 + b s2_{t-1}),  w = (1 - g - b) s_r^2

struct VtCaviarFit {
    double alpha = 0.0;
    double q_eps = 0.0;   ///< error quantile, negative
    double gamma = 0.0;
    double beta = 0.0;
    double omega = 0.0;   ///< (1 - gamma - beta) s_r^2
    double sample_variance = 0.0;
    std::vector<double> sigma_series;
    std::vector<double> q_series;
    double q_next = 0.0;
    double objective = 0.0;
    OptimResult optim;

    /// Coefficients of the identical plain IG recursion.
    [[nodiscard]] std::vector<double> equivalent_ig() const {
        const double m = q_eps * q_eps;
        return {omega * m, gamma * m, beta};
    }
    /// Q_1 of the identical plain IG recursion.
    [[nodiscard]] double equivalent_q_init() const { return q_eps * std::sqrt(sample_variance); }
};

struct VtFilter {
    std::vector<double> sigma;
    std::vector<double> q;
    double q_next = 0.0;
};

/// Variance-targeted recursion with sigma_1^2 = s_r^2. Valid on the boundary gamma = beta = 0.
[[nodiscard]] inline VtFilter filter_vt_caviar(double q_eps, double gamma, double beta, std::span<const double> r,
                                               double s2) {
    if (!(q_eps < 0.0)) throw InvalidParameter("error quantile must be negative");
    if (!(gamma >= 0.0 && beta >= 0.0 && gamma + beta < 1.0))
        throw InvalidParameter("variance targeting needs gamma, beta >= 0 and gamma + beta < 1");
    if (!(s2 > 0.0)) throw InvalidParameter("sample variance must be positive");
    const double w = (1.0 - gamma - beta) * s2;
    VtFilter f;
    f.sigma.resize(r.size());
    f.q.resize(r.size());
    double v = s2;
    for (std::size_t t = 0; t < r.size(); ++t) {
        if (t > 0) v = w + gamma * r[t - 1] * r[t - 1] + beta * v;
        f.sigma[t] = std::sqrt(v);
        f.q[t] = q_eps * f.sigma[t];
    }
    if (!r.empty()) f.q_next = q_eps * std::sqrt(w + gamma * r.back() * r.back() + beta * v);
    return f;
}

[[nodiscard]] inline double vt_caviar_loss(double alpha, double q_eps, double gamma, double beta,
                                           std::span<const double> r, double s2) {
    if (!(q_eps < 0.0)) throw InvalidParameter("error quantile must be negative");
    if (!(gamma >= 0.0 && beta >= 0.0 && gamma + beta < 1.0))
        throw InvalidParameter("variance targeting needs gamma, beta >= 0 and gamma + beta < 1");
    if (!(s2 > 0.0)) throw InvalidParameter("sample variance must be positive");
    const double w = (1.0 - gamma - beta) * s2;
    double v = s2, ql = 0.0;
    for (std::size_t t = 0; t < r.size(); ++t) {
        if (t > 0) v = w + gamma * r[t - 1] * r[t - 1] + beta * v;
        ql += check_loss(alpha, r[t], q_eps * std::sqrt(v));
    }
    return ql;
}

struct VtFitOptions {
    std::size_t starts = 10;
    double jitter = 0.5;
    std::uint64_t seed = 20240103;
    std::size_t min_length = 250;
    std::optional<std::array<double, 3>> start;  ///< (q_eps, gamma, beta); replaces the heuristic start
    const VolFit* prefit = nullptr;
    OptimOptions optim{};
};

/// Minimizes the quantile loss of the variance-targeted IG model over (Q_eps, gamma, beta).
[[nodiscard]] inline VtCaviarFit fit_vt_caviar(double alpha, const MarketSeries& s, const VtFitOptions& opts = {}) {
    if (!(alpha > 0.0 && alpha < 0.5)) throw InvalidParameter("alpha must lie in (0, 0.5)");
    if (s.size() < opts.min_length)
        throw LengthError("fit_vt_caviar needs at least " + std::to_string(opts.min_length) + " observations");
    const auto& r = s.returns;
    const double s2 = variance(r, 1);
    if (!(s2 > 0.0)) throw ValidationError("returns are constant; variance targeting is not identified");

    std::array<double, 3> base{};
    if (opts.start) {
        base = *opts.start;
    } else {
        std::optional<VolFit> own;
        const VolFit* v = opts.prefit;
        if (v == nullptr || v->spec.family != VolFamily::Garch) {
            VolFitOptions vo;
            vo.starts = std::max<std::size_t>(1, opts.starts / 2);
            vo.seed = derive_seed(opts.seed, {1});
            vo.min_length = opts.min_length;
            vo.optim = opts.optim;
            own = fit_qml(VolSpec{VolFamily::Garch}, s, vo);
            v = &*own;
        }
        base = {detail::residual_quantile(*v, alpha), v->params[1], v->params[2]};
    }
    // Interior start: the transforms cannot represent the boundary.
    base[0] = std::min(base[0], -1e-6);
    base[1] = std::clamp(base[1], 1e-4, 0.98);
    base[2] = std::clamp(base[2], 1e-4, 0.999 - base[1]);
    if (base[1] + base[2] >= 0.9995) base[2] = 0.9995 - base[1];

    ParamSpace space({Transform::Positive, Transform::SimplexPair});
    auto objective = [&](std::span<const double> p) -> double {
        try {
            return vt_caviar_loss(alpha, -p[0], p[1], p[2], r, s2);
        } catch (const Error&) {
            return detail::kInf;
        }
    };
    const std::vector<double> start{-base[0], base[1], base[2]};
    auto starts = jittered_starts(start, space, opts.starts, opts.jitter, opts.seed);

    VtCaviarFit fit;
    fit.optim = multi_start_minimize(objective, starts, space, opts.optim);
    fit.alpha = alpha;
    fit.q_eps = -fit.optim.argmin[0];
    fit.gamma = fit.optim.argmin[1];
    fit.beta = fit.optim.argmin[2];
    fit.sample_variance = s2;
    fit.omega = (1.0 - fit.gamma - fit.beta) * s2;
    const VtFilter f = filter_vt_caviar(fit.q_eps, fit.gamma, fit.beta, r, s2);
    fit.sigma_series = f.sigma;
    fit.q_series = f.q;
    fit.q_next = f.q_next;
    fit.objective = fit.optim.value;
    return fit;
}

/// Plain IG fit that reproduces a variance-targeted fit exactly.
[[nodiscard]] inline CaviarFit as_caviar_fit(const VtCaviarFit& vt, const MarketSeries& s) {
    CaviarFit fit;
    fit.spec = CaviarSpec{CaviarFamily::IG, vt.alpha};
    fit.params = vt.equivalent_ig();
    fit.q_init = vt.equivalent_q_init();
    const CaviarFilter f = filter_caviar(fit.spec, fit.params, s, fit.q_init);
    fit.q_series = f.q;
    fit.q_next = f.q_next;
    fit.quantile_loss = quantile_loss(vt.alpha, s.returns, f.q);
    fit.objective = fit.quantile_loss;
    fit.violation_rate = violation_rate(s.returns, f.q);
    return fit;
}

}  // namespace qfhs
