#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#include "qfhs/error.hpp"

namespace qfhs {

/// Accumulates X'X and X'y row by row for small least-squares problems.
class NormalEquations {
public:
    explicit NormalEquations(std::size_t k) : xtx_(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k))),
                                              xty_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(k))) {}

    void add(std::span<const double> x, double y, double w = 1.0) {
        const auto k = xty_.size();
        for (Eigen::Index i = 0; i < k; ++i) {
            const double wxi = w * x[static_cast<std::size_t>(i)];
            xty_(i) += wxi * y;
            for (Eigen::Index j = 0; j <= i; ++j) xtx_(i, j) += wxi * x[static_cast<std::size_t>(j)];
        }
        yy_ += w * y * y;
        ++rows_;
    }

    /// Solves for the coefficients; throws SingularError on rank deficiency.
    [[nodiscard]] std::vector<double> solve() const {
        Eigen::MatrixXd a = xtx_.selfadjointView<Eigen::Lower>();
        Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
        if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
            ldlt.vectorD().minCoeff() <= 1e-12 * std::max(1.0, ldlt.vectorD().maxCoeff())) {
            throw SingularError("least-squares design is rank deficient");
        }
        Eigen::VectorXd b = ldlt.solve(xty_);
        return {b.data(), b.data() + b.size()};
    }

    [[nodiscard]] std::size_t rows() const noexcept { return rows_; }

    /// Weighted residual sum of squares at the solution `b`.
    [[nodiscard]] double residual_ss(std::span<const double> b) const {
        double fit = 0.0;
        for (Eigen::Index i = 0; i < xty_.size(); ++i) fit += b[static_cast<std::size_t>(i)] * xty_(i);
        return std::max(0.0, yy_ - fit);
    }

private:
    Eigen::MatrixXd xtx_;
    Eigen::VectorXd xty_;
    double yy_ = 0.0;
    std::size_t rows_ = 0;
};

}  // namespace qfhs
