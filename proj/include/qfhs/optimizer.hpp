#pragma once

// Derivative-free minimization for non-smooth objectives. The search runs in
// an unconstrained space; ParamSpace maps it bijectively onto the model's
// constrained parameter space.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "qfhs/error.hpp"
#include "qfhs/rng.hpp"

namespace qfhs {

enum class Transform {
    Free,          ///< identity
    Positive,      ///< theta = exp(u)
    UnitInterval,  ///< theta = logistic(u)
    SimplexPair    ///< two slots: a = logistic(u1), b = (1 - a) logistic(u2); a, b > 0, a + b < 1
};

class ParamSpace {
public:
    ParamSpace() = default;
    explicit ParamSpace(std::vector<Transform> blocks) : blocks_(std::move(blocks)) {}

    static ParamSpace free(std::size_t n) { return ParamSpace(std::vector<Transform>(n, Transform::Free)); }

    ParamSpace& add(Transform t) {
        blocks_.push_back(t);
        return *this;
    }

    [[nodiscard]] std::size_t dim() const noexcept {
        std::size_t n = 0;
        for (auto b : blocks_) n += (b == Transform::SimplexPair) ? 2 : 1;
        return n;
    }

    [[nodiscard]] std::vector<double> to_constrained(std::span<const double> u) const {
        check_dim(u.size());
        std::vector<double> theta(u.size());
        std::size_t i = 0;
        for (auto b : blocks_) {
            switch (b) {
                case Transform::Free: theta[i] = u[i]; ++i; break;
                case Transform::Positive: theta[i] = std::exp(u[i]); ++i; break;
                case Transform::UnitInterval: theta[i] = logistic(u[i]); ++i; break;
                case Transform::SimplexPair: {
                    const double a = logistic(u[i]);
                    theta[i] = a;
                    theta[i + 1] = (1.0 - a) * logistic(u[i + 1]);
                    i += 2;
                    break;
                }
            }
        }
        return theta;
    }

    /// Throws InvalidParameter when theta is outside the constrained space.
    [[nodiscard]] std::vector<double> to_unconstrained(std::span<const double> theta) const {
        check_dim(theta.size());
        std::vector<double> u(theta.size());
        std::size_t i = 0;
        for (auto b : blocks_) {
            switch (b) {
                case Transform::Free: u[i] = theta[i]; ++i; break;
                case Transform::Positive:
                    if (!(theta[i] > 0.0)) throw InvalidParameter("positive parameter expected");
                    u[i] = std::log(theta[i]);
                    ++i;
                    break;
                case Transform::UnitInterval:
                    if (!(theta[i] > 0.0 && theta[i] < 1.0)) throw InvalidParameter("parameter in (0,1) expected");
                    u[i] = logit(theta[i]);
                    ++i;
                    break;
                case Transform::SimplexPair: {
                    const double a = theta[i], c = theta[i + 1];
                    if (!(a > 0.0 && c > 0.0 && a + c < 1.0))
                        throw InvalidParameter("simplex pair requires a, b > 0 and a + b < 1");
                    u[i] = logit(a);
                    u[i + 1] = logit(c / (1.0 - a));
                    i += 2;
                    break;
                }
            }
        }
        return u;
    }

    [[nodiscard]] const std::vector<Transform>& blocks() const noexcept { return blocks_; }

private:
    // |u| <= 30 keeps the image strictly inside (0, 1) in double precision
    static double logistic(double u) {
        u = std::clamp(u, -30.0, 30.0);
        return u >= 0 ? 1.0 / (1.0 + std::exp(-u)) : std::exp(u) / (1.0 + std::exp(u));
    }
    static double logit(double p) { return std::log(p) - std::log1p(-p); }

    void check_dim(std::size_t n) const {
        if (n != dim()) throw LengthError("parameter vector has the wrong dimension for its ParamSpace");
    }

    std::vector<Transform> blocks_;
};

struct OptimOptions {
    double xtol = 1e-8;           ///< simplex diameter (unconstrained space) for convergence
    std::size_t max_evals = 20000;
    double initial_step = 0.25;   ///< edge length of the initial simplex in unconstrained units
    std::size_t max_restarts = 2; ///< restarts from the best vertex after convergence
    double restart_ftol = 1e-10;  ///< relative improvement below which restarts stop
    std::size_t jobs = 1;         ///< concurrent starts in multi_start_minimize
};

struct OptimResult {
    std::vector<double> argmin;  ///< constrained space
    double value = std::numeric_limits<double>::infinity();
    bool converged = false;
    std::size_t restarts = 0;
    std::size_t evaluations = 0;
    std::size_t failed_starts = 0;
};

using Objective = std::function<double(std::span<const double>)>;

namespace detail {

struct SimplexRun {
    std::vector<double> best;
    double value;
    bool converged;
    std::size_t evals;
};

inline SimplexRun nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                              std::vector<double> x0, double step, double xtol, std::size_t max_evals) {
    const std::size_t n = x0.size();
    const double dn = static_cast<double>(n);
    // Adaptive coefficients (Gao & Han); the 1-D case keeps the classic ones.
    const double rho = 1.0;
    const double chi = n >= 2 ? 1.0 + 2.0 / dn : 2.0;
    const double gam = n >= 2 ? 0.75 - 0.5 / dn : 0.5;
    const double sig = n >= 2 ? 1.0 - 1.0 / dn : 0.5;

    std::vector<std::vector<double>> pts(n + 1, x0);
    std::vector<double> fv(n + 1);
    std::size_t evals = 0;
    auto eval = [&](const std::vector<double>& x) {
        ++evals;
        const double v = f(x);
        return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
    };
    for (std::size_t i = 0; i < n; ++i) pts[i + 1][i] += step;
    for (std::size_t i = 0; i <= n; ++i) fv[i] = eval(pts[i]);

    std::vector<std::size_t> order(n + 1);
    std::vector<double> centroid(n), xr(n), xe(n), xc(n);
    bool converged = false;
    while (true) {
        for (std::size_t i = 0; i <= n; ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
        const std::size_t best = order[0], worst = order[n], second = order[n - 1];

        double diam = 0.0;
        for (std::size_t i = 1; i <= n; ++i)
            for (std::size_t k = 0; k < n; ++k) diam = std::max(diam, std::abs(pts[order[i]][k] - pts[best][k]));
        if (diam < xtol && std::isfinite(fv[best])) {
            converged = true;
            break;
        }
        if (evals >= max_evals) break;

        std::fill(centroid.begin(), centroid.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < n; ++k) centroid[k] += pts[order[i]][k] / dn;

        for (std::size_t k = 0; k < n; ++k) xr[k] = centroid[k] + rho * (centroid[k] - pts[worst][k]);
        const double fr = eval(xr);
        if (fr < fv[best]) {
            for (std::size_t k = 0; k < n; ++k) xe[k] = centroid[k] + chi * (xr[k] - centroid[k]);
            const double fe = eval(xe);
            if (fe < fr) {
                pts[worst] = xe;
                fv[worst] = fe;
            } else {
                pts[worst] = xr;
                fv[worst] = fr;
            }
            continue;
        }
        if (fr < fv[second]) {
            pts[worst] = xr;
            fv[worst] = fr;
            continue;
        }
        bool accepted = false;
        if (fr < fv[worst]) {
            for (std::size_t k = 0; k < n; ++k) xc[k] = centroid[k] + gam * (xr[k] - centroid[k]);
            const double fc = eval(xc);
            if (fc <= fr) {
                pts[worst] = xc;
                fv[worst] = fc;
                accepted = true;
            }
        } else {
            for (std::size_t k = 0; k < n; ++k) xc[k] = centroid[k] - gam * (centroid[k] - pts[worst][k]);
            const double fc = eval(xc);
            if (fc < fv[worst]) {
                pts[worst] = xc;
                fv[worst] = fc;
                accepted = true;
            }
        }
        if (!accepted) {
            for (std::size_t i = 1; i <= n; ++i) {
                auto& p = pts[order[i]];
                for (std::size_t k = 0; k < n; ++k) p[k] = pts[best][k] + sig * (p[k] - pts[best][k]);
                fv[order[i]] = eval(p);
            }
        }
    }
    const auto it = std::min_element(fv.begin(), fv.end());
    const auto idx = static_cast<std::size_t>(it - fv.begin());
    return {pts[idx], fv[idx], converged, evals};
}

}  // namespace detail

/// Nelder-Mead in the unconstrained space of `space`, restarted from the best
/// vertex until a restart no longer improves the objective.
[[nodiscard]] inline OptimResult minimize(const Objective& objective, std::span<const double> start,
                                          const ParamSpace& space, const OptimOptions& opts = {}) {
    auto f = [&](const std::vector<double>& u) {
        std::vector<double> theta = space.to_constrained(u);
        return objective(theta);
    };
    std::vector<double> u = space.to_unconstrained(start);
    {
        // The initial simplex must contain at least one finite vertex.
        bool any_finite = std::isfinite(f(u));
        for (std::size_t i = 0; i < u.size() && !any_finite; ++i) {
            auto v = u;
            v[i] += opts.initial_step;
            any_finite = std::isfinite(f(v));
        }
        if (!any_finite) throw OptimizerError("objective is non-finite at every vertex of the initial simplex");
    }
    OptimResult res;
    std::size_t budget = opts.max_evals;
    auto run = detail::nelder_mead(f, u, opts.initial_step, opts.xtol, budget);
    res.evaluations = run.evals + u.size() + 1;
    res.converged = run.converged;
    double best = run.value;
    std::vector<double> best_u = run.best;
    while (res.restarts < opts.max_restarts && res.evaluations < opts.max_evals) {
        budget = opts.max_evals - res.evaluations;
        auto again = detail::nelder_mead(f, best_u, opts.initial_step, opts.xtol, budget);
        res.evaluations += again.evals;
        ++res.restarts;
        const double improvement = best - again.value;
        if (again.value <= best) {
            best = again.value;
            best_u = again.best;
            res.converged = again.converged;
        }
        if (!(improvement > opts.restart_ftol * std::max(1.0, std::abs(best)))) break;
    }
    res.value = best;
    res.argmin = space.to_constrained(best_u);
    return res;
}

/// Best of independent minimize() runs. Ties resolve to the earliest start,
/// so the result is independent of the order in which runs complete.
[[nodiscard]] inline OptimResult multi_start_minimize(const Objective& objective,
                                                      const std::vector<std::vector<double>>& starts,
                                                      const ParamSpace& space, const OptimOptions& opts = {}) {
    if (starts.empty()) throw OptimizerError("multi_start_minimize needs at least one start");
    std::vector<OptimResult> results(starts.size());
    std::vector<char> ok(starts.size(), 0);
    auto work = [&](std::size_t i) {
        try {
            results[i] = minimize(objective, starts[i], space, opts);
            ok[i] = std::isfinite(results[i].value) ? 1 : 0;
        } catch (const Error&) {
            ok[i] = 0;
        }
    };
    const std::size_t jobs = std::max<std::size_t>(1, std::min(opts.jobs, starts.size()));
    if (jobs == 1) {
        for (std::size_t i = 0; i < starts.size(); ++i) work(i);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t j = 0; j < jobs; ++j)
            pool.emplace_back([&, j] {
                for (std::size_t i = j; i < starts.size(); i += jobs) work(i);
            });
        for (auto& t : pool) t.join();
    }
    OptimResult best;
    bool found = false;
    std::size_t total_evals = 0, failed = 0;
    for (std::size_t i = 0; i < starts.size(); ++i) {
        if (!ok[i]) {
            ++failed;
            continue;
        }
        total_evals += results[i].evaluations;
        if (!found || results[i].value < best.value) {
            best = results[i];
            found = true;
        }
    }
    if (!found) throw OptimizerError("all " + std::to_string(starts.size()) + " starts failed");
    best.evaluations = total_evals;
    best.failed_starts = failed;
    return best;
}

/// `count` starts: `base` itself followed by Gaussian jitters of size `scale`
/// in the unconstrained space (log-space for positive parameters).
[[nodiscard]] inline std::vector<std::vector<double>> jittered_starts(std::span<const double> base,
                                                                      const ParamSpace& space, std::size_t count,
                                                                      double scale, std::uint64_t seed) {
    std::vector<std::vector<double>> starts;
    if (count == 0) return starts;
    starts.emplace_back(base.begin(), base.end());
    const std::vector<double> u0 = space.to_unconstrained(base);
    Rng rng(seed);
    for (std::size_t s = 1; s < count; ++s) {
        auto u = u0;
        for (auto& v : u) v += scale * rng.normal();
        starts.push_back(space.to_constrained(u));
    }
    return starts;
}

}  // namespace qfhs
