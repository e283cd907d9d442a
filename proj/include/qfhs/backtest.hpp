#pragma once

// Out-of-sample scoring: per-period quantile and joint (VaR, ES) losses, the
// loss panel, rankings and the Model Confidence Set.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "qfhs/caviar.hpp"
#include "qfhs/error.hpp"
#include "qfhs/format.hpp"
#include "qfhs/parallel.hpp"
#include "qfhs/risk.hpp"
#include "qfhs/rng.hpp"
#include "qfhs/stats.hpp"
#include "qfhs/timeseries.hpp"

namespace qfhs {

[[nodiscard]] inline double period_quantile_loss(double alpha0, double r, double var) {
    return check_loss(alpha0, r, -var);
}

/// Asymmetric-Laplace joint score with q = -VaR, e = -ES:
///   -log((alpha0 - 1) / e) - (r - q)(alpha0 - 1{r < q}) / (alpha0 e)
[[nodiscard]] inline double period_joint_loss(double alpha0, double r, double var, double es) {
    if (!(es > 0.0)) throw DomainError("joint loss needs ES > 0");
    const double q = -var, e = -es;
    const double hit = r < q ? 1.0 : 0.0;
    return -std::log((alpha0 - 1.0) / e) - (r - q) * (alpha0 - hit) / (alpha0 * e);
}

enum class LossKind { Quantile, Joint };

[[nodiscard]] inline std::string loss_name(LossKind k) { return k == LossKind::Quantile ? "quantile" : "joint"; }

struct LossPanel {
    std::vector<std::string> models;
    std::vector<Date> dates;
    std::size_t horizon = 1;
    double alpha0 = 0.0;
    std::vector<std::vector<double>> quantile;  ///< [model][period]
    std::vector<std::vector<double>> joint;     ///< [model][period]

    [[nodiscard]] const std::vector<std::vector<double>>& losses(LossKind k) const {
        return k == LossKind::Quantile ? quantile : joint;
    }
    [[nodiscard]] std::size_t periods() const noexcept { return dates.size(); }
    [[nodiscard]] std::vector<double> totals(LossKind k) const {
        std::vector<double> out;
        for (const auto& row : losses(k)) out.push_back(compensated_sum(row));
        return out;
    }
    [[nodiscard]] std::vector<double> averages(LossKind k) const {
        auto t = totals(k);
        for (auto& v : t) v /= static_cast<double>(periods());
        return t;
    }

    /// Long format: date,model,h,alpha0,quantile_loss,joint_loss.
    void write_csv(std::ostream& out) const {
        out << "date,model,h,alpha0,quantile_loss,joint_loss\n";
        for (std::size_t t = 0; t < periods(); ++t)
            for (std::size_t m = 0; m < models.size(); ++m)
                out << dates[t].iso() << ',' << models[m] << ',' << horizon << ',' << format_double(alpha0) << ','
                    << format_double(quantile[m][t], 15) << ',' << format_double(joint[m][t], 15) << '\n';
    }
};

struct ModelForecasts {
    std::string model;
    std::vector<RiskForecast> forecasts;
};

/// Scores every model's forecasts at level alpha0 against the realized
/// returns of the same dates. All models must cover identical dates.
[[nodiscard]] inline LossPanel evaluate(const std::vector<ModelForecasts>& models, const MarketSeries& realized,
                                        double alpha0) {
    if (models.empty()) throw AlignmentError("no models to evaluate");
    std::map<Date, double> ret;
    for (std::size_t t = 0; t < realized.size(); ++t) ret[realized.dates[t]] = realized.returns[t];
    LossPanel panel;
    panel.alpha0 = alpha0;
    std::vector<std::map<Date, const RiskForecast*>> by_date(models.size());
    std::map<std::string, int> seen;
    for (std::size_t m = 0; m < models.size(); ++m) {
        if (seen[models[m].model]++ > 0) throw AlignmentError("duplicate model id '" + models[m].model + "'");
        panel.models.push_back(models[m].model);
        for (const auto& f : models[m].forecasts) {
            if (std::abs(f.alpha0 - alpha0) > 1e-12) continue;
            if (!by_date[m].emplace(f.date, &f).second)
                throw AlignmentError("duplicate forecast for (" + models[m].model + ", " + f.date.iso() + ")");
            panel.horizon = f.horizon;
        }
    }
    std::map<Date, int> all;
    for (const auto& d : by_date)
        for (const auto& [date, f] : d) all[date] = 1;
    std::string missing;
    std::size_t n_missing = 0;
    for (const auto& [date, one] : all) {
        if (!ret.count(date)) {
            if (n_missing++ < 20) missing += " (realized, " + date.iso() + ")";
        }
        for (std::size_t m = 0; m < models.size(); ++m)
            if (!by_date[m].count(date) && n_missing++ < 20) missing += " (" + models[m].model + ", " + date.iso() + ")";
    }
    if (all.empty()) throw AlignmentError("no forecasts at alpha0 = " + format_double(alpha0));
    if (n_missing > 0) throw AlignmentError("missing (model, date) pairs:" + missing);
    panel.quantile.assign(models.size(), {});
    panel.joint.assign(models.size(), {});
    for (const auto& [date, one] : all) {
        panel.dates.push_back(date);
        const double r = ret.at(date);
        for (std::size_t m = 0; m < models.size(); ++m) {
            const RiskForecast& f = *by_date[m].at(date);
            const double ql = period_quantile_loss(alpha0, r, f.var);
            const double jl = period_joint_loss(alpha0, r, f.var, f.es);
            if (!std::isfinite(ql) || !std::isfinite(jl))
                throw NonFiniteError("non-finite loss for " + models[m].model + " at " + date.iso(),
                                     panel.dates.size() - 1);
            panel.quantile[m].push_back(ql);
            panel.joint[m].push_back(jl);
        }
    }
    return panel;
}

// ---------------------------------------------------------------------------
// Model Confidence Set

struct McsResult {
    std::vector<std::string> models;
    std::vector<double> pvalues;            ///< MCS p-value per model (input order)
    std::vector<bool> included;
    std::vector<std::string> elimination;   ///< models in elimination order; survivor last
    std::size_t B = 0;
    double mean_block = 0.0;
    double level = 0.0;
    std::vector<std::string> warnings;

    [[nodiscard]] std::size_t included_count() const {
        return static_cast<std::size_t>(std::count(included.begin(), included.end(), true));
    }
    [[nodiscard]] nlohmann::json to_json() const {
        nlohmann::json j;
        j["models"] = models;
        j["pvalues"] = pvalues;
        std::vector<std::string> inc;
        for (std::size_t i = 0; i < models.size(); ++i)
            if (included[i]) inc.push_back(models[i]);
        j["included"] = inc;
        j["elimination_order"] = elimination;
        j["B"] = B;
        j["mean_block"] = mean_block;
        j["level"] = level;
        j["warnings"] = warnings;
        return j;
    }
};

/// Stationary bootstrap index sequence with expected block length mean_block.
[[nodiscard]] inline std::vector<std::size_t> stationary_bootstrap_indices(std::size_t n, double mean_block,
                                                                           Rng& rng) {
    std::vector<std::size_t> idx(n);
    const double p = 1.0 / mean_block;
    for (std::size_t t = 0; t < n; ++t) {
        if (t == 0 || rng.uniform() < p)
            idx[t] = rng.index(n);
        else
            idx[t] = idx[t - 1] + 1 == n ? 0 : idx[t - 1] + 1;
    }
    return idx;
}

/// Sequential elimination with the T_max statistic. Elimination continues to
/// a single survivor so that every model receives a monotonized p-value;
/// models with p-value below `level` are excluded.
[[nodiscard]] inline McsResult mcs(const std::vector<std::string>& models,
                                   const std::vector<std::vector<double>>& losses, double level, std::size_t B,
                                   double mean_block, std::uint64_t seed, std::size_t jobs = 1,
                                   std::size_t min_periods = 50) {
    const std::size_t k = models.size();
    if (k == 0 || losses.size() != k) throw InvalidParameter("MCS needs one loss vector per model");
    if (!(level > 0.0 && level < 1.0)) throw InvalidParameter("MCS level must lie in (0, 1)");
    if (B < 1) throw InvalidParameter("MCS needs B >= 1");
    if (!(mean_block >= 1.0)) throw InvalidParameter("mean block length must be at least 1");
    McsResult res;
    res.models = models;
    res.B = B;
    res.mean_block = mean_block;
    res.level = level;
    res.pvalues.assign(k, 1.0);
    res.included.assign(k, true);
    if (k == 1) {
        res.elimination = {models[0]};
        return res;
    }
    const std::size_t n = losses[0].size();
    for (const auto& l : losses)
        if (l.size() != n) throw LengthError("MCS loss vectors differ in length");
    if (n < min_periods) throw LengthError("MCS needs at least " + std::to_string(min_periods) + " periods");
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = i + 1; j < k; ++j)
            if (losses[i] == losses[j])
                res.warnings.push_back("identical losses for " + models[i] + " and " + models[j] +
                                       "; tie broken by id order");

    std::vector<double> bar(k);
    for (std::size_t i = 0; i < k; ++i) bar[i] = mean(losses[i]);
    // boot[b][i]: mean loss of model i on resample b.
    std::vector<std::vector<double>> boot(B, std::vector<double>(k, 0.0));
    parallel_for(B, jobs, [&](std::size_t b) {
        Rng rng(derive_seed(seed, {b}));
        const auto idx = stationary_bootstrap_indices(n, mean_block, rng);
        for (std::size_t i = 0; i < k; ++i) {
            double s = 0.0;
            for (std::size_t t : idx) s += losses[i][t];
            boot[b][i] = s / static_cast<double>(n);
        }
    });

    std::vector<std::size_t> alive(k);
    for (std::size_t i = 0; i < k; ++i) alive[i] = i;
    double running = 0.0;
    while (alive.size() > 1) {
        const double m = static_cast<double>(alive.size());
        double avg = 0.0;
        for (std::size_t i : alive) avg += bar[i];
        avg /= m;
        std::vector<double> d(alive.size()), var(alive.size(), 0.0);
        for (std::size_t a = 0; a < alive.size(); ++a) d[a] = bar[alive[a]] - avg;
        std::vector<std::vector<double>> dstar(B, std::vector<double>(alive.size()));
        for (std::size_t b = 0; b < B; ++b) {
            double bavg = 0.0;
            for (std::size_t i : alive) bavg += boot[b][i];
            bavg /= m;
            for (std::size_t a = 0; a < alive.size(); ++a) {
                dstar[b][a] = boot[b][alive[a]] - bavg - d[a];
                var[a] += dstar[b][a] * dstar[b][a];
            }
        }
        for (auto& v : var) v /= static_cast<double>(B);
        std::vector<double> tstat(alive.size(), 0.0);
        for (std::size_t a = 0; a < alive.size(); ++a) tstat[a] = var[a] > 0.0 ? d[a] / std::sqrt(var[a]) : 0.0;
        // Ties go to the later id so that the earlier id survives.
        std::size_t worst = 0;
        for (std::size_t a = 1; a < alive.size(); ++a)
            if (tstat[a] >= tstat[worst]) worst = a;
        const double tmax = tstat[worst];
        std::size_t exceed = 0;
        for (std::size_t b = 0; b < B; ++b) {
            double mx = -std::numeric_limits<double>::infinity();
            for (std::size_t a = 0; a < alive.size(); ++a)
                mx = std::max(mx, var[a] > 0.0 ? dstar[b][a] / std::sqrt(var[a]) : 0.0);
            if (mx >= tmax) ++exceed;
        }
        const double p = static_cast<double>(exceed) / static_cast<double>(B);
        running = std::max(running, p);
        const std::size_t out = alive[worst];
        res.pvalues[out] = running;
        res.elimination.push_back(models[out]);
        alive.erase(alive.begin() + static_cast<std::ptrdiff_t>(worst));
    }
    res.pvalues[alive.front()] = 1.0;
    res.elimination.push_back(models[alive.front()]);
    for (std::size_t i = 0; i < k; ++i) res.included[i] = res.pvalues[i] >= level;
    return res;
}

[[nodiscard]] inline McsResult mcs(const LossPanel& panel, LossKind kind, double level, std::size_t B,
                                   double mean_block, std::uint64_t seed, std::size_t jobs = 1) {
    return mcs(panel.models, panel.losses(kind), level, B, mean_block, seed, jobs);
}

/// Rank of each model by total loss (1 = best, ties averaged).
[[nodiscard]] inline std::vector<double> rank_models(const LossPanel& panel, LossKind kind) {
    return average_ranks(panel.totals(kind));
}

/// Mean over assets of the within-asset ranks. Panels must share the model list.
[[nodiscard]] inline std::vector<double> average_rank_across(std::span<const LossPanel> panels, LossKind kind) {
    if (panels.empty()) throw InvalidParameter("no panels to rank");
    std::vector<double> acc(panels[0].models.size(), 0.0);
    for (const auto& p : panels) {
        if (p.models != panels[0].models) throw AlignmentError("panels have different model lists");
        const auto r = rank_models(p, kind);
        for (std::size_t i = 0; i < r.size(); ++i) acc[i] += r[i] / static_cast<double>(panels.size());
    }
    return acc;
}

/// One row per model: average losses, ranks, MCS p-values and inclusion flags.
inline void write_backtest_table(std::ostream& out, const LossPanel& panel, const McsResult& mq,
                                 const McsResult& mj) {
    const auto aq = panel.averages(LossKind::Quantile), aj = panel.averages(LossKind::Joint);
    const auto rq = rank_models(panel, LossKind::Quantile), rj = rank_models(panel, LossKind::Joint);
    out << "model,Q,J,rank_Q,rank_J,mcs_p_Q,mcs_p_J,in_mcs_Q,in_mcs_J\n";
    for (std::size_t m = 0; m < panel.models.size(); ++m)
        out << panel.models[m] << ',' << format_double(aq[m]) << ',' << format_double(aj[m]) << ','
            << format_double(rq[m]) << ',' << format_double(rj[m]) << ',' << format_double(mq.pvalues[m]) << ','
            << format_double(mj.pvalues[m]) << ',' << (mq.included[m] ? 1 : 0) << ',' << (mj.included[m] ? 1 : 0)
            << '\n';
}

}  // namespace qfhs
