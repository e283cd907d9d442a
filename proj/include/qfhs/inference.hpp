#pragma once

// Estimation efficiency of CAViaR-IG as a function of its quantile level:
// asymptotic standard errors, finite-sample Monte Carlo standard errors,
// loess smoothing of the resulting curves, and a residual bootstrap for data.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "qfhs/caviar.hpp"
#include "qfhs/distributions.hpp"
#include "qfhs/error.hpp"
#include "qfhs/format.hpp"
#include "qfhs/parallel.hpp"
#include "qfhs/rng.hpp"
#include "qfhs/simharness.hpp"
#include "qfhs/stats.hpp"
#include "qfhs/timeseries.hpp"
#include "qfhs/volatility.hpp"

namespace qfhs {

// ---------------------------------------------------------------------------
// Gradient of the IG quantile recursion

struct IgGradient {
    std::vector<double> q;
    std::vector<std::array<double, 3>> grad;  ///< dQ_t / d(omega_c, gamma_c, beta_c)
};

/// dQ_t/dtheta = (ds_t/dtheta) / (2 Q_t) with s_t = omega_c + gamma_c r_{t-1}^2 + beta_c Q_{t-1}^2.
/// Q_1 = q_init is treated as fixed.
[[nodiscard]] inline IgGradient caviar_gradient(std::span<const double> p, std::span<const double> r,
                                                double q_init) {
    if (p.size() != 3) throw LengthError("IG gradient needs (omega_c, gamma_c, beta_c)");
    if (!(p[0] > 0.0 && p[1] >= 0.0 && p[2] >= 0.0)) throw InvalidParameter("inadmissible IG parameters");
    if (!(q_init < 0.0)) throw InvalidParameter("initial quantile must be negative");
    const double w = p[0], g = p[1], b = p[2];
    IgGradient out;
    out.q.resize(r.size());
    out.grad.resize(r.size());
    double q = q_init;
    std::array<double, 3> dq{0.0, 0.0, 0.0};
    for (std::size_t t = 0; t < r.size(); ++t) {
        if (t > 0) {
            const double rp = r[t - 1];
            const double qn = -std::sqrt(w + g * rp * rp + b * q * q);
            const std::array<double, 3> ds{1.0 + 2.0 * b * q * dq[0], rp * rp + 2.0 * b * q * dq[1],
                                           q * q + 2.0 * b * q * dq[2]};
            for (int k = 0; k < 3; ++k) dq[k] = ds[k] / (2.0 * qn);
            q = qn;
        }
        out.q[t] = q;
        out.grad[t] = dq;
        for (double v : dq)
            if (!std::isfinite(v)) throw NonFiniteError("non-finite IG gradient", t);
    }
    return out;
}

[[nodiscard]] inline IgGradient caviar_gradient(const CaviarSpec& spec, std::span<const double> p,
                                                const MarketSeries& s, std::optional<double> q_init = std::nullopt) {
    if (spec.family != CaviarFamily::IG) throw InvalidParameter("analytic gradients are provided for IG only");
    return caviar_gradient(p, s.returns, q_init.value_or(default_q_init(s, spec.alpha_est)));
}

// ---------------------------------------------------------------------------
// Profiles

struct RseProfile {
    std::vector<double> alpha_grid;
    std::vector<std::string> parameters;
    std::vector<std::vector<double>> se;          ///< [parameter][alpha]
    std::vector<std::vector<double>> rse;         ///< [parameter][alpha]
    std::vector<std::vector<double>> normalized;  ///< rse / max rse
    std::vector<double> optimal_alpha;            ///< raw argmin per parameter
    std::vector<std::vector<double>> smoothed;    ///< loess-smoothed rse (empty if not computed)
    std::vector<double> smoothed_optimal_alpha;
    std::vector<double> spans;                    ///< chosen loess span per parameter
    std::vector<std::size_t> used;                ///< replicates (or resamples) behind each alpha
    std::vector<std::size_t> failures;            ///< dropped replicates per alpha
    std::vector<std::string> warnings;

    [[nodiscard]] std::size_t index(const std::string& name) const {
        for (std::size_t i = 0; i < parameters.size(); ++i)
            if (parameters[i] == name) return i;
        throw InvalidParameter("unknown profile parameter '" + name + "'");
    }
    [[nodiscard]] double average_optimal_alpha() const { return mean(optimal_alpha); }
    [[nodiscard]] double average_smoothed_optimal_alpha() const {
        if (smoothed_optimal_alpha.empty()) throw InvalidParameter("profile was not smoothed");
        return mean(smoothed_optimal_alpha);
    }

    void write_csv(std::ostream& out) const {
        out << "alpha,parameter,se,rse,smoothed_rse\n";
        for (std::size_t p = 0; p < parameters.size(); ++p)
            for (std::size_t i = 0; i < alpha_grid.size(); ++i) {
                out << format_double(alpha_grid[i]) << ',' << parameters[p] << ',' << format_double(se[p][i]) << ','
                    << format_double(rse[p][i]) << ',';
                if (!smoothed.empty()) out << format_double(smoothed[p][i]);
                out << '\n';
            }
    }

    [[nodiscard]] nlohmann::json summary() const {
        nlohmann::json j;
        for (std::size_t p = 0; p < parameters.size(); ++p) {
            nlohmann::json e{{"raw_argmin", optimal_alpha[p]}};
            if (!smoothed_optimal_alpha.empty()) {
                e["smoothed_argmin"] = smoothed_optimal_alpha[p];
                e["span"] = spans[p];
            }
            j["parameters"][parameters[p]] = e;
        }
        j["average_raw_argmin"] = average_optimal_alpha();
        if (!smoothed_optimal_alpha.empty()) j["average_smoothed_argmin"] = average_smoothed_optimal_alpha();
        j["failures"] = failures;
        j["warnings"] = warnings;
        return j;
    }
};

namespace detail {

inline void require_grid(std::span<const double> grid, double upper) {
    if (grid.empty()) throw InvalidParameter("alpha grid is empty");
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!(grid[i] > 0.0 && grid[i] < upper)) throw InvalidParameter("alpha grid point outside (0, upper)");
        if (i > 0 && !(grid[i] > grid[i - 1])) throw InvalidParameter("alpha grid must be strictly increasing");
    }
}

/// First grid point attaining the minimum.
inline double argmin_alpha(std::span<const double> grid, std::span<const double> y) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < y.size(); ++i)
        if (y[i] < y[best]) best = i;
    return grid[best];
}

inline void finish_profile(RseProfile& prof) {
    prof.normalized.assign(prof.parameters.size(), {});
    prof.optimal_alpha.assign(prof.parameters.size(), 0.0);
    for (std::size_t p = 0; p < prof.parameters.size(); ++p) {
        const double mx = *std::max_element(prof.rse[p].begin(), prof.rse[p].end());
        for (double v : prof.rse[p]) prof.normalized[p].push_back(mx > 0.0 ? v / mx : 0.0);
        prof.optimal_alpha[p] = argmin_alpha(prof.alpha_grid, prof.rse[p]);
    }
}

}  // namespace detail

/// Inclusive grid first, first + step, ..., last (default asymptotic grid: 0.0025 to 0.30 by 0.0025).
[[nodiscard]] inline std::vector<double> make_grid(double first, double last, double step) {
    if (!(step > 0.0) || !(last >= first)) throw InvalidParameter("bad grid bounds or step");
    std::vector<double> g;
    const auto n = static_cast<std::size_t>(std::floor((last - first) / step + 1e-9));
    for (std::size_t i = 0; i <= n; ++i) g.push_back(std::round((first + step * static_cast<double>(i)) * 1e10) / 1e10);
    return g;
}

// ---------------------------------------------------------------------------
// Asymptotic standard errors

struct AsymptoticMatrices {
    Eigen::Matrix3d A;
    Eigen::Matrix3d D;
    Eigen::Matrix3d cov;  ///< T^-1 D^-1 A D^-1
};

/// A = T^-1 sum alpha(1-alpha) g g', D = T^-1 sum h_t g g' with
/// h_t = f_eps(Q_eps) / sigma_t, evaluated on a path with known sigma_t.
[[nodiscard]] inline AsymptoticMatrices asymptotic_matrices(const DgpSpec& dgp, const SimulatedPath& path,
                                                            double alpha) {
    const double qe = dgp.innovation.quantile(alpha);
    const double m = qe * qe;
    const double fq = dgp.innovation.pdf(qe);
    const std::array<double, 3> p{dgp.omega * m, dgp.gamma * m, dgp.beta};
    const IgGradient g = caviar_gradient(p, path.returns, qe * path.sigma.front());
    Eigen::Matrix3d a = Eigen::Matrix3d::Zero(), d = Eigen::Matrix3d::Zero();
    for (std::size_t t = 0; t < g.grad.size(); ++t) {
        const Eigen::Vector3d v(g.grad[t][0], g.grad[t][1], g.grad[t][2]);
        const Eigen::Matrix3d outer = v * v.transpose();
        a += outer;
        d += (fq / path.sigma[t]) * outer;
    }
    const double n = static_cast<double>(g.grad.size());
    AsymptoticMatrices out;
    out.A = a * (alpha * (1.0 - alpha) / n);
    out.D = d / n;
    Eigen::FullPivLU<Eigen::Matrix3d> lu(out.D);
    if (!lu.isInvertible()) throw SingularError("D is singular at alpha = " + format_double(alpha));
    const Eigen::Matrix3d di = lu.inverse();
    out.cov = di * out.A * di / n;
    if (!out.cov.allFinite()) throw SingularError("non-finite covariance at alpha = " + format_double(alpha));
    return out;
}

struct AsymptoticConfig {
    DgpSpec dgp;
    std::vector<double> alpha_grid = make_grid(0.0025, 0.30, 0.0025);
    std::size_t n_reps = 50;
    std::uint64_t seed = 11;
    std::size_t jobs = 1;
};

/// rse(omega_c) = se / m_alpha, rse(gamma_c) = se / m_alpha, rse(beta_c) = se;
/// averaged over replicates.
[[nodiscard]] inline RseProfile asymptotic_rse_profile(const AsymptoticConfig& cfg) {
    detail::require_grid(cfg.alpha_grid, 0.5);
    if (cfg.n_reps < 1) throw InvalidParameter("need at least one replicate");
    cfg.dgp.validate();
    const std::size_t na = cfg.alpha_grid.size();
    std::vector<std::vector<std::array<double, 3>>> se(cfg.n_reps, std::vector<std::array<double, 3>>(na));
    parallel_for(cfg.n_reps, cfg.jobs, [&](std::size_t r) {
        const SimulatedPath path = simulate_dgp(cfg.dgp, derive_seed(cfg.seed, {r}));
        for (std::size_t i = 0; i < na; ++i) {
            AsymptoticMatrices mats;
            try {
                mats = asymptotic_matrices(cfg.dgp, path, cfg.alpha_grid[i]);
            } catch (const SingularError& e) {
                throw SingularError(std::string(e.what()) + " (replicate " + std::to_string(r) + ")");
            }
            for (int k = 0; k < 3; ++k) se[r][i][static_cast<std::size_t>(k)] = std::sqrt(mats.cov(k, k));
        }
    });
    RseProfile prof;
    prof.alpha_grid = cfg.alpha_grid;
    prof.parameters = {"omega_c", "gamma_c", "beta_c"};
    prof.se.assign(3, std::vector<double>(na, 0.0));
    prof.rse.assign(3, std::vector<double>(na, 0.0));
    prof.used.assign(na, cfg.n_reps);
    prof.failures.assign(na, 0);
    for (std::size_t i = 0; i < na; ++i) {
        const double q = cfg.dgp.innovation.quantile(cfg.alpha_grid[i]);
        const double m = q * q;
        for (std::size_t k = 0; k < 3; ++k) {
            std::vector<double> col(cfg.n_reps);
            for (std::size_t r = 0; r < cfg.n_reps; ++r) col[r] = se[r][i][k];
            prof.se[k][i] = mean(col);
            prof.rse[k][i] = k < 2 ? prof.se[k][i] / m : prof.se[k][i];
        }
    }
    detail::finish_profile(prof);
    return prof;
}

// ---------------------------------------------------------------------------
// Loess

struct LoessResult {
    std::vector<double> fitted;
    double span = 0.0;
    double aicc = 0.0;
};

/// Local quadratic fit with tricube weights at a fixed span; returns the
/// fitted values and the trace of the smoother matrix.
[[nodiscard]] inline std::pair<std::vector<double>, double> loess_fit(std::span<const double> x,
                                                                      std::span<const double> y, double span) {
    const std::size_t n = x.size();
    if (!(span > 0.0 && span <= 1.0)) throw InvalidParameter("loess span must lie in (0, 1]");
    const auto q = static_cast<std::size_t>(std::floor(span * static_cast<double>(n) + 1e-9));
    if (q < 4) throw SingularError("loess span " + format_double(span) + " leaves fewer than 4 points per window");
    std::vector<double> fitted(n), dist(n);
    double trace = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) dist[j] = std::abs(x[j] - x[i]);
        std::vector<double> sorted = dist;
        std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(q - 1), sorted.end());
        double h = sorted[q - 1];
        if (q >= n) h = std::max(h, *std::max_element(dist.begin(), dist.end())) * (1.0 + 1e-12);
        if (!(h > 0.0)) throw SingularError("loess window has zero width");
        Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
        std::vector<double> w(n, 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            const double u = dist[j] / h;
            if (u >= 1.0) continue;
            const double c = 1.0 - u * u * u;
            w[j] = c * c * c;
            const double z = (x[j] - x[i]) / h;
            const Eigen::Vector3d v(1.0, z, z * z);
            m += w[j] * v * v.transpose();
        }
        Eigen::FullPivLU<Eigen::Matrix3d> lu(m);
        lu.setThreshold(1e-12);
        if (!lu.isInvertible()) throw SingularError("loess local design is rank deficient");
        const Eigen::RowVector3d row0 = lu.inverse().row(0);
        double fit = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (w[j] == 0.0) continue;
            const double z = (x[j] - x[i]) / h;
            const double lij = w[j] * (row0(0) + row0(1) * z + row0(2) * z * z);
            fit += lij * y[j];
            if (j == i) trace += lij;
        }
        fitted[i] = fit;
    }
    return {fitted, trace};
}

/// Span chosen by AICc among candidates leaving at least 4 points per window;
/// AICc = log(RSS/n) + 1 + 2(tr L + 1)/(n - tr L - 2).
[[nodiscard]] inline LoessResult loess_smooth(std::span<const double> x, std::span<const double> y,
                                              std::span<const double> spans) {
    if (x.size() != y.size()) throw LengthError("loess: x and y differ in length");
    if (x.size() < 10) throw LengthError("loess needs at least 10 points");
    if (spans.empty()) throw InvalidParameter("no loess span candidates");
    const double n = static_cast<double>(x.size());
    LoessResult best;
    bool have = false;
    for (double s : spans) {
        if (std::floor(s * n + 1e-9) < 4.0) continue;
        auto [fitted, tr] = loess_fit(x, y, s);
        double rss = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) rss += (y[i] - fitted[i]) * (y[i] - fitted[i]);
        const double denom = n - tr - 2.0;
        const double aicc = denom > 0.0 ? std::log(rss / n) + 1.0 + 2.0 * (tr + 1.0) / denom
                                        : std::numeric_limits<double>::infinity();
        if (!have || aicc < best.aicc) {
            best = {std::move(fitted), s, aicc};
            have = true;
        }
    }
    if (!have) throw LengthError("no loess span leaves 4 points per window");
    return best;
}

[[nodiscard]] inline std::vector<double> default_loess_spans() { return {0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9}; }

namespace detail {

inline void smooth_profile(RseProfile& prof, std::span<const double> spans) {
    if (prof.alpha_grid.size() < 10) {
        prof.warnings.push_back("grid too short for loess smoothing");
        return;
    }
    prof.smoothed.assign(prof.parameters.size(), {});
    prof.smoothed_optimal_alpha.assign(prof.parameters.size(), 0.0);
    prof.spans.assign(prof.parameters.size(), 0.0);
    for (std::size_t p = 0; p < prof.parameters.size(); ++p) {
        const LoessResult lr = loess_smooth(prof.alpha_grid, prof.rse[p], spans);
        prof.smoothed[p] = lr.fitted;
        prof.spans[p] = lr.span;
        prof.smoothed_optimal_alpha[p] = argmin_alpha(prof.alpha_grid, lr.fitted);
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Monte Carlo standard errors of the variance-targeted model

struct McConfig {
    DgpSpec dgp;
    std::vector<double> alpha_grid = make_grid(0.01, 0.30, 0.005);
    std::size_t n_reps = 200;
    std::uint64_t seed = 12;
    std::size_t jobs = 1;
    std::size_t starts = 10;
    std::vector<double> spans = default_loess_spans();
};

/// Per replicate and alpha, fit_vt_caviar; SE = Monte Carlo standard deviation
/// of (gamma, beta). A replicate failing at some alpha is dropped there only.
[[nodiscard]] inline RseProfile mc_se_experiment(const McConfig& cfg) {
    detail::require_grid(cfg.alpha_grid, 0.5);
    if (cfg.n_reps < 2) throw InvalidParameter("Monte Carlo standard errors need at least two replicates");
    cfg.dgp.validate();
    const std::size_t na = cfg.alpha_grid.size();
    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::vector<std::vector<std::array<double, 2>>> est(cfg.n_reps,
                                                        std::vector<std::array<double, 2>>(na, {nan, nan}));
    parallel_for(cfg.n_reps, cfg.jobs, [&](std::size_t r) {
        const std::uint64_t rs = derive_seed(cfg.seed, {r});
        const MarketSeries s = to_market_series(simulate_dgp(cfg.dgp, rs));
        std::optional<VolFit> pre;
        try {
            VolFitOptions vo;
            vo.starts = cfg.starts;
            vo.seed = derive_seed(rs, {1});
            pre = fit_qml(VolSpec{VolFamily::Garch}, s, vo);
        } catch (const Error&) {
        }
        for (std::size_t i = 0; i < na; ++i) {
            try {
                VtFitOptions o;
                o.starts = cfg.starts;
                o.seed = derive_seed(rs, {2, i});
                if (pre) o.prefit = &*pre;
                const VtCaviarFit f = fit_vt_caviar(cfg.alpha_grid[i], s, o);
                est[r][i] = {f.gamma, f.beta};
            } catch (const Error&) {
            }
        }
    });
    RseProfile prof;
    prof.alpha_grid = cfg.alpha_grid;
    prof.parameters = {"gamma", "beta"};
    prof.se.assign(2, std::vector<double>(na, 0.0));
    prof.used.assign(na, 0);
    prof.failures.assign(na, 0);
    for (std::size_t i = 0; i < na; ++i) {
        std::array<std::vector<double>, 2> cols;
        for (std::size_t r = 0; r < cfg.n_reps; ++r) {
            if (std::isnan(est[r][i][0])) {
                ++prof.failures[i];
                continue;
            }
            for (std::size_t k = 0; k < 2; ++k) cols[k].push_back(est[r][i][k]);
        }
        prof.used[i] = cols[0].size();
        if (cols[0].size() < 2) throw OptimizerError("fewer than two successful fits at alpha = " +
                                                     format_double(cfg.alpha_grid[i]));
        for (std::size_t k = 0; k < 2; ++k) prof.se[k][i] = std::sqrt(variance(cols[k], 1));
    }
    prof.rse = prof.se;
    detail::finish_profile(prof);
    detail::smooth_profile(prof, cfg.spans);
    return prof;
}

// ---------------------------------------------------------------------------
// Residual bootstrap on observed data

struct BootstrapConfig {
    std::vector<double> alpha_grid = make_grid(0.005, 0.25, 0.005);
    std::size_t B = 500;
    std::uint64_t seed = 13;
    std::size_t jobs = 1;
    std::size_t starts = 10;
    std::size_t refit_starts = 3;
    std::size_t min_length = 1000;
    std::vector<double> spans = default_loess_spans();
};

/// One resample of the returns: r*_t = -Q*_t e*_t where e* is drawn iid from
/// the fitted scaled residuals and Q*_t follows the fitted recursion.
[[nodiscard]] inline std::vector<double> qfhs_resample(const VtCaviarFit& fit, std::span<const double> r,
                                                       Rng& rng) {
    std::vector<double> eps(r.size());
    for (std::size_t t = 0; t < r.size(); ++t) eps[t] = r[t] / (-fit.q_series[t]);
    std::vector<double> out(r.size());
    double v = fit.sample_variance;
    for (std::size_t t = 0; t < r.size(); ++t) {
        if (t > 0) v = fit.omega + fit.gamma * out[t - 1] * out[t - 1] + fit.beta * v;
        out[t] = -(fit.q_eps * std::sqrt(v)) * eps[rng.index(eps.size())];
    }
    return out;
}

/// SE = sqrt(B^-1 sum_b (theta_b - mean theta)^2) of (gamma, beta) at each alpha.
[[nodiscard]] inline RseProfile bootstrap_se(const MarketSeries& s, const BootstrapConfig& cfg) {
    detail::require_grid(cfg.alpha_grid, 0.5);
    if (cfg.B < 1) throw InvalidParameter("bootstrap needs B >= 1");
    if (s.size() < cfg.min_length)
        throw LengthError("bootstrap_se needs at least " + std::to_string(cfg.min_length) + " observations");
    const std::size_t na = cfg.alpha_grid.size();
    VolFitOptions vo;
    vo.starts = cfg.starts;
    vo.seed = derive_seed(cfg.seed, {0});
    const VolFit pre = fit_qml(VolSpec{VolFamily::Garch}, s, vo);
    std::vector<VtCaviarFit> base(na);
    for (std::size_t i = 0; i < na; ++i) {
        VtFitOptions o;
        o.starts = cfg.starts;
        o.seed = derive_seed(cfg.seed, {1, i});
        o.prefit = &pre;
        o.min_length = std::min(o.min_length, s.size());
        base[i] = fit_vt_caviar(cfg.alpha_grid[i], s, o);
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::vector<std::vector<std::array<double, 2>>> est(na, std::vector<std::array<double, 2>>(cfg.B, {nan, nan}));
    parallel_for(na * cfg.B, cfg.jobs, [&](std::size_t job) {
        const std::size_t i = job / cfg.B, b = job % cfg.B;
        Rng rng(derive_seed(cfg.seed, {2, i, b}));
        MarketSeries rs;
        rs.returns = qfhs_resample(base[i], s.returns, rng);
        rs.dates = s.dates;
        try {
            VtFitOptions o;
            o.starts = cfg.refit_starts;
            o.seed = derive_seed(cfg.seed, {3, i, b});
            o.start = std::array<double, 3>{base[i].q_eps, base[i].gamma, base[i].beta};
            o.min_length = std::min(o.min_length, s.size());
            const VtCaviarFit f = fit_vt_caviar(cfg.alpha_grid[i], rs, o);
            est[i][b] = {f.gamma, f.beta};
        } catch (const Error&) {
        }
    });
    RseProfile prof;
    prof.alpha_grid = cfg.alpha_grid;
    prof.parameters = {"gamma", "beta"};
    prof.se.assign(2, std::vector<double>(na, 0.0));
    prof.used.assign(na, 0);
    prof.failures.assign(na, 0);
    for (std::size_t i = 0; i < na; ++i) {
        std::array<std::vector<double>, 2> cols;
        for (std::size_t b = 0; b < cfg.B; ++b) {
            if (std::isnan(est[i][b][0])) {
                ++prof.failures[i];
                continue;
            }
            for (std::size_t k = 0; k < 2; ++k) cols[k].push_back(est[i][b][k]);
        }
        prof.used[i] = cols[0].size();
        if (cols[0].empty())
            throw OptimizerError("every bootstrap refit failed at alpha = " + format_double(cfg.alpha_grid[i]));
        for (std::size_t k = 0; k < 2; ++k) prof.se[k][i] = std::sqrt(variance(cols[k], 0));
    }
    if (cfg.B == 1) prof.warnings.push_back("B = 1: bootstrap standard errors are identically zero");
    prof.rse = prof.se;
    detail::finish_profile(prof);
    if (cfg.B > 1) detail::smooth_profile(prof, cfg.spans);
    return prof;
}

}  // namespace qfhs
