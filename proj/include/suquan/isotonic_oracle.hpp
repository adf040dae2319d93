#pragma once

// Brute-force reference solver for the isotonic proximal problems. Test use only.

#include <cstddef>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "suquan/error.hpp"
#include "suquan/isotonic.hpp"

namespace suquan {

struct ProxProblem {
    std::vector<double> target;
    double gamma = 0.0;
};

/**
 * Solves argmin_{f non-decreasing} 1/2|f - target|^2 + gamma sum (f[j+1]-f[j])^2
 * by enumerating all 2^(p-1) tie patterns. Each pattern is an
 * equality-constrained quadratic, solved densely in the reduced block
 * coordinates; the lowest-objective feasible pattern optimum is returned.
 */
inline std::vector<double> qp_oracle_prox(const ProxProblem& problem)
{
    const auto& v = problem.target;
    const std::size_t p = v.size();
    if (p == 0) throw InvalidInput("qp_oracle_prox: empty target");
    if (p > 12) throw InvalidInput("qp_oracle_prox: p > 12 is not supported");
    if (!(problem.gamma >= 0.0)) throw InvalidInput("qp_oracle_prox: gamma must be non-negative");
    detail::require_finite("qp_oracle_prox", v);

    // Full-space quadratic: 1/2 f^T H f - v^T f, H = I + 2 gamma D^T D.
    Eigen::MatrixXd diff = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p > 1 ? p - 1 : 0),
                                                 static_cast<Eigen::Index>(p));
    for (std::size_t j = 0; j + 1 < p; ++j) {
        diff(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)) = -1.0;
        diff(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j + 1)) = 1.0;
    }
    const Eigen::MatrixXd hessian = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p)) +
                                    2.0 * problem.gamma * diff.transpose() * diff;
    const Eigen::Map<const Eigen::VectorXd> target(v.data(), static_cast<Eigen::Index>(p));

    double best_value = std::numeric_limits<double>::infinity();
    Eigen::VectorXd best;
    const std::size_t patterns = std::size_t{1} << (p - 1);
    for (std::size_t mask = 0; mask < patterns; ++mask) {
        // Block indicator matrix: bit j set ties f[j] to f[j+1].
        std::vector<Eigen::Index> block_of(p);
        Eigen::Index blocks = 0;
        for (std::size_t j = 0; j < p; ++j) {
            if (j > 0 && !((mask >> (j - 1)) & 1u)) ++blocks;
            block_of[j] = blocks;
        }
        ++blocks;
        Eigen::MatrixXd basis = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p), blocks);
        for (std::size_t j = 0; j < p; ++j) basis(static_cast<Eigen::Index>(j), block_of[j]) = 1.0;

        const Eigen::MatrixXd reduced = basis.transpose() * hessian * basis;
        const Eigen::VectorXd g = reduced.ldlt().solve(basis.transpose() * target);
        const Eigen::VectorXd f = basis * g;

        bool feasible = true;
        for (std::size_t j = 0; j + 1 < p; ++j) {
            feasible = feasible && f(static_cast<Eigen::Index>(j + 1)) >= f(static_cast<Eigen::Index>(j)) - 1e-12;
        }
        if (!feasible) continue;
        const double value = 0.5 * f.dot(hessian * f) - target.dot(f);
        if (value < best_value) {
            best_value = value;
            best = f;
        }
    }
    return {best.data(), best.data() + best.size()};
}

} // namespace suquan
