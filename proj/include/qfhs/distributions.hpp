#pragma once

// Standardized (zero mean, unit variance) innovation laws: Normal, Student-t
// and Hansen's skewed Student-t. The skew-t is built from a symmetric
// unit-variance kernel k (Normal or rescaled Student-t):
//
//   g(z) = b k((b z + a) / (1 - xi))   for z < -a/b
//   g(z) = b k((b z + a) / (1 + xi))   for z >= -a/b
//
// with a = 2 xi E|w|, b^2 = 1 + 3 xi^2 - a^2 and w ~ k. For the Student-t
// kernel E|w| = 2 c (nu - 2) / (nu - 1), c = k(0), which reproduces Hansen's
// constants; nu = infinity gives the skewed Normal limit.

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "qfhs/error.hpp"
#include "qfhs/rng.hpp"

namespace qfhs {

enum class DistKind { Normal, StudentT, HansenSkewT };

class Distribution {
public:
    static Distribution normal() { return Distribution(DistKind::Normal, kInf, 0.0); }

    /// nu = infinity yields the Normal variant.
    static Distribution student_t(double nu) {
        if (std::isinf(nu) && nu > 0) return normal();
        return Distribution(DistKind::StudentT, nu, 0.0);
    }

    /// nu = infinity yields Hansen's skewed Normal limit.
    static Distribution hansen_skew_t(double nu, double xi) {
        return Distribution(DistKind::HansenSkewT, nu, xi);
    }

    [[nodiscard]] DistKind kind() const noexcept { return kind_; }
    [[nodiscard]] double nu() const noexcept { return nu_; }
    [[nodiscard]] double xi() const noexcept { return xi_; }
    [[nodiscard]] bool normal_kernel() const noexcept { return std::isinf(nu_); }

    /// Fourth moment exists only for nu > 4.
    [[nodiscard]] bool has_fourth_moment() const noexcept { return nu_ > 4.0; }

    [[nodiscard]] double pdf(double x) const {
        const double y = b_ * x + a_;
        const double scale = (x < threshold_) ? (1.0 - xi_) : (1.0 + xi_);
        return b_ * kernel_pdf(y / scale);
    }

    [[nodiscard]] double cdf(double x) const {
        if (std::isinf(x)) return x < 0 ? 0.0 : 1.0;
        const double y = b_ * x + a_;
        if (x < threshold_) return (1.0 - xi_) * kernel_cdf(y / (1.0 - xi_));
        return 0.5 * (1.0 - xi_) + (1.0 + xi_) * (kernel_cdf(y / (1.0 + xi_)) - 0.5);
    }

    [[nodiscard]] double quantile(double p) const {
        if (!(p > 0.0 && p < 1.0)) {
            throw DomainError("quantile: probability must lie in (0, 1), got " + std::to_string(p));
        }
        const double left_mass = 0.5 * (1.0 - xi_);
        if (p < left_mass) {
            const double y = kernel_quantile(p / (1.0 - xi_));
            return ((1.0 - xi_) * y - a_) / b_;
        }
        const double y = kernel_quantile(0.5 + (p - left_mass) / (1.0 + xi_));
        return ((1.0 + xi_) * y - a_) / b_;
    }

    /// One draw: |w| from the kernel, side chosen with the left-tail mass.
    double draw(Rng& rng) const {
        const double w = std::abs(normal_kernel() ? rng.normal() : rng.student_t(nu_) * t_scale_);
        if (kind_ != DistKind::HansenSkewT) {
            return rng.uniform() < 0.5 ? -w : w;
        }
        const double u = rng.uniform();
        const double y = (u < 0.5 * (1.0 - xi_)) ? -(1.0 - xi_) * w : (1.0 + xi_) * w;
        return (y - a_) / b_;
    }

    [[nodiscard]] std::vector<double> sample(Rng& rng, std::size_t n) const {
        if (n == 0) throw DomainError("sample: n must be at least 1");
        std::vector<double> out(n);
        for (auto& v : out) v = draw(rng);
        return out;
    }

    [[nodiscard]] std::vector<double> sample(std::uint64_t seed, std::size_t n) const {
        Rng rng(seed);
        return sample(rng, n);
    }

    [[nodiscard]] std::string describe() const {
        switch (kind_) {
            case DistKind::Normal: return "N";
            case DistKind::StudentT: return "t(" + format_nu() + ")";
            case DistKind::HansenSkewT: return "skt(" + format_nu() + "," + trim(std::to_string(xi_)) + ")";
        }
        return "?";
    }

private:
    static constexpr double kInf = std::numeric_limits<double>::infinity();

    Distribution(DistKind kind, double nu, double xi) : kind_(kind), nu_(nu), xi_(xi) {
        if (std::isnan(nu) || !(nu > 2.0)) {
            throw InvalidParameter("degrees of freedom must exceed 2, got " + std::to_string(nu));
        }
        if (std::isnan(xi) || !(std::abs(xi) < 1.0)) {
            throw InvalidParameter("skewness must lie in (-1, 1), got " + std::to_string(xi));
        }
        if (kind == DistKind::Normal && xi != 0.0) throw InvalidParameter("Normal law has no skewness");
        if (kind == DistKind::StudentT && xi != 0.0) throw InvalidParameter("Student-t law has no skewness");

        double abs_mean;
        if (normal_kernel()) {
            c_ = 1.0 / std::sqrt(2.0 * std::numbers::pi);
            abs_mean = 2.0 * c_;
        } else {
            t_scale_ = std::sqrt((nu_ - 2.0) / nu_);
            c_ = std::exp(std::lgamma(0.5 * (nu_ + 1.0)) - std::lgamma(0.5 * nu_)) /
                 std::sqrt(std::numbers::pi * (nu_ - 2.0));
            abs_mean = 2.0 * c_ * (nu_ - 2.0) / (nu_ - 1.0);
            tdist_ = boost::math::students_t_distribution<double>(nu_);
        }
        a_ = 2.0 * xi_ * abs_mean;
        b_ = std::sqrt(1.0 + 3.0 * xi_ * xi_ - a_ * a_);
        threshold_ = -a_ / b_;
    }

    [[nodiscard]] double kernel_pdf(double y) const {
        if (normal_kernel()) return c_ * std::exp(-0.5 * y * y);
        return c_ * std::pow(1.0 + y * y / (nu_ - 2.0), -0.5 * (nu_ + 1.0));
    }

    [[nodiscard]] double kernel_cdf(double y) const {
        if (normal_kernel()) return boost::math::cdf(boost::math::normal_distribution<double>(), y);
        return boost::math::cdf(tdist_, y / t_scale_);
    }

    [[nodiscard]] double kernel_quantile(double p) const {
        if (normal_kernel()) return boost::math::quantile(boost::math::normal_distribution<double>(), p);
        return boost::math::quantile(tdist_, p) * t_scale_;
    }

    [[nodiscard]] std::string format_nu() const { return trim(std::to_string(nu_)); }

    static std::string trim(std::string s) {
        if (s.find('.') != std::string::npos) {
            while (!s.empty() && s.back() == '0') s.pop_back();
            if (!s.empty() && s.back() == '.') s.pop_back();
        }
        return s;
    }

    DistKind kind_;
    double nu_;
    double xi_;
    double a_ = 0.0;
    double b_ = 1.0;
    double c_ = 0.0;
    double threshold_ = 0.0;
    double t_scale_ = 1.0;
    boost::math::students_t_distribution<double> tdist_{3.0};
};

}  // namespace qfhs
