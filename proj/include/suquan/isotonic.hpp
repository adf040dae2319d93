#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "suquan/error.hpp"

namespace suquan {

namespace detail {

inline void require_finite(const char* what, std::span<const double> v)
{
    for (std::size_t j = 0; j < v.size(); ++j) {
        if (!std::isfinite(v[j])) {
            throw InvalidInput(std::string(what) + ": non-finite entry at index " + std::to_string(j));
        }
    }
}

inline double max_abs(std::span<const double> v)
{
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

} // namespace detail

/// Euclidean projection onto non-decreasing vectors (pool adjacent violators).
inline std::vector<double> pava(std::span<const double> v)
{
    detail::require_finite("pava", v);
    struct Block {
        double sum;
        std::size_t count;
        double mean() const { return sum / static_cast<double>(count); }
    };
    std::vector<Block> stack;
    stack.reserve(v.size());
    for (double x : v) {
        stack.push_back({x, 1});
        while (stack.size() > 1 && stack[stack.size() - 2].mean() > stack.back().mean()) {
            const Block top = stack.back();
            stack.pop_back();
            stack.back().sum += top.sum;
            stack.back().count += top.count;
        }
    }
    std::vector<double> out;
    out.reserve(v.size());
    for (const Block& b : stack) out.insert(out.end(), b.count, b.mean());
    return out;
}

/// 1/2 |f - v|^2 + gamma * sum_j (f[j+1] - f[j])^2
inline double spav_objective(std::span<const double> f, std::span<const double> v, double gamma)
{
    double fit = 0.0;
    for (std::size_t j = 0; j < f.size(); ++j) fit += (f[j] - v[j]) * (f[j] - v[j]);
    double rough = 0.0;
    for (std::size_t j = 0; j + 1 < f.size(); ++j) rough += (f[j + 1] - f[j]) * (f[j + 1] - f[j]);
    return 0.5 * fit + gamma * rough;
}

namespace detail {

// Minimizer of the spav objective with f[j] == f[j+1] imposed wherever tight[j].
// Contiguous tied runs form blocks; the block values g solve the tridiagonal
// system (diag(size) + 2 gamma * path Laplacian) g = block sums.
inline void solve_tied(std::span<const double> v, double gamma, const std::vector<char>& tight,
                       std::vector<double>& out)
{
    const std::size_t p = v.size();
    std::vector<std::size_t> start;
    std::vector<double> sums;
    std::vector<double> sizes;
    for (std::size_t j = 0; j < p; ++j) {
        if (j == 0 || !tight[j - 1]) {
            start.push_back(j);
            sums.push_back(0.0);
            sizes.push_back(0.0);
        }
        sums.back() += v[j];
        sizes.back() += 1.0;
    }
    const std::size_t k = start.size();
    const double off = -2.0 * gamma;
    std::vector<double> diag(k), rhs(sums);
    for (std::size_t b = 0; b < k; ++b) {
        const double degree = (b > 0 ? 1.0 : 0.0) + (b + 1 < k ? 1.0 : 0.0);
        diag[b] = sizes[b] + 2.0 * gamma * degree;
    }
    // Thomas algorithm; the matrix is strictly diagonally dominant.
    for (std::size_t b = 1; b < k; ++b) {
        const double m = off / diag[b - 1];
        diag[b] -= m * off;
        rhs[b] -= m * rhs[b - 1];
    }
    std::vector<double> g(k);
    g[k - 1] = rhs[k - 1] / diag[k - 1];
    for (std::size_t b = k - 1; b-- > 0;) g[b] = (rhs[b] - off * g[b + 1]) / diag[b];

    out.resize(p);
    for (std::size_t b = 0; b < k; ++b) {
        const std::size_t end = (b + 1 < k) ? start[b + 1] : p;
        std::fill(out.begin() + static_cast<std::ptrdiff_t>(start[b]),
                  out.begin() + static_cast<std::ptrdiff_t>(end), g[b]);
    }
}

} // namespace detail

/**
 * Proximal operator of gamma * sum (f[j+1]-f[j])^2 restricted to
 * non-decreasing vectors:
 *
 *   argmin_{f non-decreasing} 1/2 |f - v|^2 + gamma * sum_j (f[j+1] - f[j])^2
 *
 * Primal active-set method over the tie pattern f[j] == f[j+1]. Each working
 * set is solved in O(p) by a tridiagonal solve over the tied blocks. Starts
 * from the PAVA block structure when that pattern is feasible, otherwise from
 * the fully pooled vector. Constraints whose multiplier turns negative are
 * released; blocking constraints are added along the step.
 *
 * gamma == 0 reduces to pava(v).
 */
inline std::vector<double> spav_prox(std::span<const double> v, double gamma)
{
    detail::require_finite("spav_prox", v);
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) {
        throw InvalidInput("spav_prox: gamma must be finite and non-negative");
    }
    if (gamma == 0.0 || v.size() < 2) return pava(v);

    const std::size_t p = v.size();
    const double scale = std::max(1.0, detail::max_abs(v));
    const double feas_tol = 1e-13 * scale;
    const double mult_tol = 1e-12 * scale;

    std::vector<char> tight(p - 1, 0);
    {
        const auto iso = pava(v);
        for (std::size_t j = 0; j + 1 < p; ++j) tight[j] = (iso[j] == iso[j + 1]) ? 1 : 0;
    }
    std::vector<double> x;
    detail::solve_tied(v, gamma, tight, x);
    bool feasible = true;
    for (std::size_t j = 0; j + 1 < p; ++j) feasible = feasible && (x[j + 1] - x[j] >= -feas_tol);
    if (!feasible) {
        std::fill(tight.begin(), tight.end(), 1);
        detail::solve_tied(v, gamma, tight, x);
    }

    std::vector<double> candidate;
    const std::size_t max_steps = 50 * p + 100;
    for (std::size_t step = 0; step < max_steps; ++step) {
        // mu[j] = prefix sum of -(x - v + 2 gamma D^T D x), the multiplier of f[j] <= f[j+1].
        std::size_t release = p;
        double most_negative = -mult_tol;
        double mu = 0.0;
        for (std::size_t j = 0; j + 1 < p; ++j) {
            const double left = (j > 0) ? x[j] - x[j - 1] : 0.0;
            const double right = x[j + 1] - x[j];
            mu -= (x[j] - v[j]) + 2.0 * gamma * (left - right);
            if (tight[j] && mu < most_negative) {
                most_negative = mu;
                release = j;
            }
        }
        if (release == p) break;
        tight[release] = 0;

        for (;;) {
            detail::solve_tied(v, gamma, tight, candidate);
            double alpha = 1.0;
            std::size_t blocking = p;
            for (std::size_t j = 0; j + 1 < p; ++j) {
                if (tight[j]) continue;
                const double dn = candidate[j + 1] - candidate[j];
                if (dn >= -feas_tol) continue;
                const double dx = x[j + 1] - x[j];
                const double a = std::max(0.0, dx) / (dx - dn);
                if (a < alpha) {
                    alpha = a;
                    blocking = j;
                }
            }
            if (blocking == p) {
                x.swap(candidate);
                break;
            }
            for (std::size_t j = 0; j < p; ++j) x[j] += alpha * (candidate[j] - x[j]);
            tight[blocking] = 1;
        }
    }
    // Round-off repair: tied entries are exactly equal already.
    for (std::size_t j = 0; j + 1 < p; ++j) x[j + 1] = std::max(x[j + 1], x[j]);
    return x;
}

} // namespace suquan
