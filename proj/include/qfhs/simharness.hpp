#pragma once

// Simulation from the GARCH(1,1) data generating process, DGP-implied true
// risk, and the accuracy study comparing GARCH FHS with IG-QFHS.

#include <boost/math/quadrature/exp_sinh.hpp>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "qfhs/caviar.hpp"
#include "qfhs/distributions.hpp"
#include "qfhs/error.hpp"
#include "qfhs/format.hpp"
#include "qfhs/parallel.hpp"
#include "qfhs/qfhs.hpp"
#include "qfhs/risk.hpp"
#include "qfhs/rng.hpp"
#include "qfhs/stats.hpp"
#include "qfhs/timeseries.hpp"
#include "qfhs/volatility.hpp"

namespace qfhs {

/// sigma_t^2 = omega + gamma r_{t-1}^2 + beta sigma_{t-1}^2, r_t = sigma_t eps_t.
struct DgpSpec {
    double omega = 0.01;
    double gamma = 0.10;
    double beta = 0.89;
    Distribution innovation = Distribution::normal();
    std::size_t T = 3000;

    void validate() const {
        if (!(omega > 0.0)) throw InvalidParameter("DGP omega must be positive");
        if (!(gamma >= 0.0 && beta >= 0.0)) throw InvalidParameter("DGP gamma and beta must be nonnegative");
        if (!(gamma + beta < 1.0)) throw InvalidParameter("DGP requires gamma + beta < 1");
        if (T < 2) throw InvalidParameter("DGP length must be at least 2");
    }
    [[nodiscard]] double unconditional_variance() const { return omega / (1.0 - gamma - beta); }
    [[nodiscard]] double next_variance(double r, double s2) const { return omega + gamma * r * r + beta * s2; }
};

struct SimulatedPath {
    std::vector<double> returns;
    std::vector<double> sigma;   ///< true sigma_t
    double sigma_next = 0.0;     ///< true sigma_{T+1}
};

/// T returns with sigma_1^2 equal to the unconditional variance.
[[nodiscard]] inline SimulatedPath simulate_dgp(const DgpSpec& dgp, std::uint64_t seed) {
    dgp.validate();
    Rng rng(seed);
    SimulatedPath p;
    p.returns.resize(dgp.T);
    p.sigma.resize(dgp.T);
    double s2 = dgp.unconditional_variance();
    for (std::size_t t = 0; t < dgp.T; ++t) {
        if (t > 0) s2 = dgp.next_variance(p.returns[t - 1], s2);
        p.sigma[t] = std::sqrt(s2);
        p.returns[t] = p.sigma[t] * dgp.innovation.draw(rng);
    }
    p.sigma_next = std::sqrt(dgp.next_variance(p.returns.back(), s2));
    return p;
}

/// Consecutive calendar dates starting at `first`.
[[nodiscard]] inline std::vector<Date> synthetic_dates(std::size_t n, Date first = Date{2000, 1, 3}) {
    std::vector<Date> d(n);
    for (std::size_t i = 0; i < n; ++i) {
        d[i] = first;
        first = first.next();
    }
    return d;
}

[[nodiscard]] inline MarketSeries to_market_series(const SimulatedPath& p, Date first = Date{2000, 1, 3}) {
    MarketSeries m;
    m.returns = p.returns;
    m.dates = synthetic_dates(p.returns.size(), first);
    return m;
}

struct SimulatedOhlc {
    OhlcSeries ohlc;
    SimulatedPath path;
};

/// OHLC bars carrying the simulated percent returns as close-to-close log
/// changes. Row 0 is a flat anchor bar. Each later bar opens at the previous
/// close and extends beyond max/min(open, close) by kappa sigma_t |N| percent,
/// so the log range tracks the true volatility.
[[nodiscard]] inline SimulatedOhlc simulate_ohlc(const DgpSpec& dgp, std::uint64_t seed, double kappa = 0.5,
                                                 double start_price = 100.0, Date first = Date{2000, 1, 3}) {
    if (!(kappa > 0.0)) throw InvalidParameter("range multiplier must be positive");
    if (!(start_price > 0.0)) throw InvalidParameter("start price must be positive");
    SimulatedOhlc out;
    out.path = simulate_dgp(dgp, seed);
    Rng rng(derive_seed(seed, {0x6f68u}));
    const auto dates = synthetic_dates(dgp.T + 1, first);
    auto& o = out.ohlc;
    o.dates = dates;
    o.open.push_back(start_price);
    o.high.push_back(start_price);
    o.low.push_back(start_price);
    o.close.push_back(start_price);
    double lc = std::log(start_price);
    for (std::size_t t = 0; t < dgp.T; ++t) {
        const double lopen = lc;
        lc += out.path.returns[t] / 100.0;
        const double ext_hi = kappa * out.path.sigma[t] * std::abs(rng.normal()) / 100.0;
        const double ext_lo = kappa * out.path.sigma[t] * std::abs(rng.normal()) / 100.0;
        o.open.push_back(std::exp(lopen));
        o.close.push_back(std::exp(lc));
        o.high.push_back(std::exp(std::max(lopen, lc) + ext_hi));
        o.low.push_back(std::exp(std::min(lopen, lc) - ext_lo));
    }
    return out;
}

struct TrueRisk {
    double var = 0.0;
    double es = 0.0;
};

/// VaR = -sigma Q_D(alpha0); ES = -sigma E[eps | eps < Q_D(alpha0)] by numeric integration.
[[nodiscard]] inline TrueRisk true_onestep_risk(const Distribution& d, double sigma_next, double alpha0) {
    if (!(sigma_next > 0.0)) throw InvalidParameter("sigma_next must be positive");
    if (!(alpha0 > 0.0 && alpha0 < 1.0)) throw DomainError("alpha0 must lie in (0, 1)");
    const double q = d.quantile(alpha0);
    boost::math::quadrature::exp_sinh<double> integrator;
    double err = 0.0, l1 = 0.0;
    const double tail =
        integrator.integrate([&](double y) { return (q - y) * d.pdf(q - y); }, 0.0,
                             std::numeric_limits<double>::infinity(), 1e-12, &err, &l1);
    if (!std::isfinite(tail) || !(err <= 1e-6 * std::max(1.0, std::abs(tail))))
        throw Error("tail integration failed at alpha0 = " + format_double(alpha0));
    return {-sigma_next * q, -sigma_next * tail / alpha0};
}

[[nodiscard]] inline TrueRisk true_onestep_risk(const DgpSpec& dgp, double sigma_next, double alpha0) {
    return true_onestep_risk(dgp.innovation, sigma_next, alpha0);
}

/// Brute-force h-step VaR/ES of cumulated returns from the DGP, starting at
/// sigma^2_{T+1} = sigma2_next. Path j uses derive_seed(seed, {j}).
[[nodiscard]] inline std::vector<TrueRisk> true_multistep_risk(const DgpSpec& dgp, double sigma2_next,
                                                               std::size_t h, std::span<const double> alpha0s,
                                                               std::size_t n_paths, std::uint64_t seed) {
    dgp.validate();
    if (h == 0) throw InvalidParameter("horizon must be at least 1");
    if (!(sigma2_next > 0.0)) throw InvalidParameter("sigma2_next must be positive");
    std::vector<double> sample(n_paths);
    for (std::size_t j = 0; j < n_paths; ++j) {
        Rng rng(derive_seed(seed, {j}));
        double s2 = sigma2_next, cum = 0.0;
        for (std::size_t k = 0; k < h; ++k) {
            const double r = std::sqrt(s2) * dgp.innovation.draw(rng);
            cum += r;
            s2 = dgp.next_variance(r, s2);
        }
        sample[j] = cum;
    }
    const auto f = risk_from_sample(sample, alpha0s);
    std::vector<TrueRisk> out;
    for (const auto& x : f) out.push_back({x.var, x.es});
    return out;
}

[[nodiscard]] inline TrueRisk true_multistep_risk(const DgpSpec& dgp, double sigma2_next, std::size_t h,
                                                  double alpha0, std::size_t n_paths, std::uint64_t seed) {
    const double a[] = {alpha0};
    return true_multistep_risk(dgp, sigma2_next, h, a, n_paths, seed).front();
}

// ---------------------------------------------------------------------------
// Accuracy study

struct AccuracyConfig {
    DgpSpec dgp;
    std::vector<double> alpha_est{0.01, 0.025, 0.05, 0.10, 0.15, 0.20};
    std::vector<double> alpha0{0.01, 0.025};
    std::size_t h = 1;
    std::size_t n_reps = 50;
    std::size_t paths = 25000;
    std::size_t truth_paths = 100000;
    std::uint64_t seed = 1;
    std::size_t jobs = 1;
    std::size_t vol_starts = 10;
    std::size_t caviar_starts = 10;
};

struct AccuracyReport {
    std::vector<std::string> methods;     ///< "GHS", then "IG<100 alpha_est>"
    std::vector<std::string> quantities;  ///< "VaR@a", "ES@a" for each alpha0
    std::vector<std::vector<double>> rmse;   ///< [method][quantity]
    std::vector<std::vector<double>> ranks;  ///< [method][quantity], average ranks for ties
    std::vector<double> average_rank;        ///< [method]
    std::vector<std::size_t> failures;       ///< replicates excluded per method
    std::size_t n_reps = 0;
    std::size_t h = 1;
    std::string dgp;

    [[nodiscard]] std::size_t method_index(const std::string& name) const {
        for (std::size_t i = 0; i < methods.size(); ++i)
            if (methods[i] == name) return i;
        throw InvalidParameter("unknown method '" + name + "'");
    }

    void write_csv(std::ostream& out) const {
        out << "method";
        for (const auto& q : quantities) out << ",rmse_" << q;
        for (const auto& q : quantities) out << ",rank_" << q;
        out << ",average_rank,failures\n";
        for (std::size_t m = 0; m < methods.size(); ++m) {
            out << methods[m];
            for (double v : rmse[m]) out << ',' << format_double(v);
            for (double v : ranks[m]) out << ',' << format_double(v);
            out << ',' << format_double(average_rank[m]) << ',' << failures[m] << '\n';
        }
    }
};

[[nodiscard]] inline std::string ig_method_name(double alpha_est) {
    return "IG" + format_double(100.0 * alpha_est, 6);
}

/// Per replicate: simulate, fit GARCH (GHS) and IG at each alpha_est, forecast
/// h-step VaR/ES and compare with the DGP truth (analytic for h = 1, brute
/// force otherwise). A method that fails on a replicate is excluded from that
/// replicate only.
[[nodiscard]] inline AccuracyReport run_accuracy_study(const AccuracyConfig& cfg) {
    if (cfg.n_reps < 1) throw InvalidParameter("accuracy study needs at least one replicate");
    cfg.dgp.validate();
    const std::size_t n_methods = 1 + cfg.alpha_est.size();
    const std::size_t n_q = 2 * cfg.alpha0.size();

    AccuracyReport rep;
    rep.n_reps = cfg.n_reps;
    rep.h = cfg.h;
    rep.dgp = cfg.dgp.innovation.describe();
    rep.methods.push_back("GHS");
    for (double a : cfg.alpha_est) rep.methods.push_back(ig_method_name(a));
    for (double a : cfg.alpha0) rep.quantities.push_back("VaR@" + format_double(a));
    for (double a : cfg.alpha0) rep.quantities.push_back("ES@" + format_double(a));

    // sq[rep][method][quantity]; NaN marks a failed fit.
    std::vector<std::vector<std::vector<double>>> sq(
        cfg.n_reps, std::vector<std::vector<double>>(n_methods, std::vector<double>(n_q, 0.0)));
    parallel_for(cfg.n_reps, cfg.jobs, [&](std::size_t r) {
        const std::uint64_t rs = derive_seed(cfg.seed, {r});
        const SimulatedPath path = simulate_dgp(cfg.dgp, rs);
        const MarketSeries s = to_market_series(path);
        std::vector<TrueRisk> truth;
        if (cfg.h == 1) {
            for (double a : cfg.alpha0) truth.push_back(true_onestep_risk(cfg.dgp, path.sigma_next, a));
        } else {
            truth = true_multistep_risk(cfg.dgp, path.sigma_next * path.sigma_next, cfg.h, cfg.alpha0,
                                        cfg.truth_paths, derive_seed(rs, {1}));
        }
        auto record = [&](std::size_t m, const std::vector<RiskForecast>& f) {
            for (std::size_t k = 0; k < cfg.alpha0.size(); ++k) {
                sq[r][m][k] = (f[k].var - truth[k].var) * (f[k].var - truth[k].var);
                sq[r][m][cfg.alpha0.size() + k] = (f[k].es - truth[k].es) * (f[k].es - truth[k].es);
            }
        };
        auto fail = [&](std::size_t m) {
            for (auto& v : sq[r][m]) v = std::numeric_limits<double>::quiet_NaN();
        };
        std::optional<VolFit> garch;
        try {
            VolFitOptions vo;
            vo.starts = cfg.vol_starts;
            vo.seed = derive_seed(rs, {2});
            garch = fit_qml(VolSpec{VolFamily::Garch}, s, vo);
            record(0, fhs_forecast(*garch, s, cfg.h, cfg.paths, cfg.alpha0, derive_seed(rs, {3, 0})));
        } catch (const Error&) {
            fail(0);
        }
        for (std::size_t i = 0; i < cfg.alpha_est.size(); ++i) {
            try {
                CaviarFitOptions co;
                co.starts = cfg.caviar_starts;
                co.seed = derive_seed(rs, {4, i});
                if (garch) co.prefit = &*garch;
                const CaviarFit fit = fit_caviar(CaviarSpec{CaviarFamily::IG, cfg.alpha_est[i]}, s, co);
                record(1 + i, qfhs_forecast(fit, s, cfg.h, cfg.paths, cfg.alpha0, derive_seed(rs, {3, 1 + i})));
            } catch (const Error&) {
                fail(1 + i);
            }
        }
    });

    rep.rmse.assign(n_methods, std::vector<double>(n_q, 0.0));
    rep.failures.assign(n_methods, 0);
    for (std::size_t m = 0; m < n_methods; ++m) {
        std::vector<std::vector<double>> cols(n_q);
        for (std::size_t r = 0; r < cfg.n_reps; ++r) {
            if (std::isnan(sq[r][m][0])) {
                ++rep.failures[m];
                continue;
            }
            for (std::size_t q = 0; q < n_q; ++q) cols[q].push_back(sq[r][m][q]);
        }
        for (std::size_t q = 0; q < n_q; ++q)
            rep.rmse[m][q] = cols[q].empty() ? std::numeric_limits<double>::infinity() : std::sqrt(mean(cols[q]));
    }
    rep.ranks.assign(n_methods, std::vector<double>(n_q, 0.0));
    rep.average_rank.assign(n_methods, 0.0);
    for (std::size_t q = 0; q < n_q; ++q) {
        std::vector<double> col(n_methods);
        for (std::size_t m = 0; m < n_methods; ++m) col[m] = rep.rmse[m][q];
        const auto rk = average_ranks(col);
        for (std::size_t m = 0; m < n_methods; ++m) {
            rep.ranks[m][q] = rk[m];
            rep.average_rank[m] += rk[m] / static_cast<double>(n_q);
        }
    }
    return rep;
}

}  // namespace qfhs
