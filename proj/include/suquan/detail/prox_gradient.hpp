#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "suquan/error.hpp"

namespace suquan {

struct ProxGradientOptions {
    double rel_tol = 1e-9;      ///< stop when (F_prev - F) <= rel_tol * |F_prev|
    double grad_tol = 1e-7;     ///< stop when the gradient-mapping norm drops below this
    std::size_t max_iter = 5000;
};

struct ProxGradientResult {
    std::vector<double> x;
    double objective = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
    std::vector<double> trace;  ///< objective after every accepted step, starting at x0
};

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b)
{
    double s = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) s += a[j] * b[j];
    return s;
}

/**
 * Accelerated proximal gradient with backtracking and adaptive restart.
 *
 * Minimizes smooth(x) + penalty(x) where prox(v, step) solves
 * argmin_u penalty(u) + |u - v|^2 / (2 step). Steps that would increase the
 * objective reset the momentum and are retried from the last accepted point,
 * so the accepted objective sequence never increases.
 *
 * smooth(x, grad) must return the value and write the gradient.
 */
template <class Smooth, class Prox, class Penalty>
ProxGradientResult accelerated_prox_gradient(Smooth&& smooth, Prox&& prox, Penalty&& penalty,
                                             std::vector<double> x0, double lipschitz,
                                             const ProxGradientOptions& options)
{
    const std::size_t dim = x0.size();
    std::vector<double> grad(dim), grad_z(dim), step(dim);

    ProxGradientResult res;
    res.x = std::move(x0);
    double fx = smooth(std::span<const double>(res.x), std::span<double>(grad)) + penalty(std::span<const double>(res.x));
    if (!std::isfinite(fx)) throw NumericError("proximal gradient: non-finite objective at the starting point");
    res.trace.push_back(fx);

    double lip = std::max(lipschitz, 1e-12);
    std::vector<double> y = res.x;
    std::vector<double> x_prev;
    double t = 1.0;
    bool momentum = false;

    for (res.iterations = 0; res.iterations < options.max_iter; ++res.iterations) {
        const double gy = smooth(std::span<const double>(y), std::span<double>(grad));
        if (!std::isfinite(gy)) throw NumericError("proximal gradient: non-finite objective during iteration");

        std::vector<double> z;
        double gz = 0.0;
        double dist2 = 0.0;
        for (;;) {
            for (std::size_t j = 0; j < dim; ++j) step[j] = y[j] - grad[j] / lip;
            z = prox(std::span<const double>(step), 1.0 / lip);
            gz = smooth(std::span<const double>(z), std::span<double>(grad_z));
            double lin = 0.0;
            dist2 = 0.0;
            for (std::size_t j = 0; j < dim; ++j) {
                const double d = z[j] - y[j];
                lin += grad[j] * d;
                dist2 += d * d;
            }
            const double slack = 1e-13 * std::max(1.0, std::abs(gy));
            if (std::isfinite(gz) && gz <= gy + lin + 0.5 * lip * dist2 + slack) break;
            lip *= 2.0;
            if (lip > 1e300) throw NumericError("proximal gradient: step size underflow in line search");
        }
        const double fz = gz + penalty(std::span<const double>(z));
        const double gradient_mapping = lip * std::sqrt(dist2);

        if (!(fz <= fx)) {
            if (momentum) {
                y = res.x;
                t = 1.0;
                momentum = false;
                continue;
            }
            // A plain step from the accepted point cannot decrease further.
            res.converged = true;
            break;
        }

        x_prev.swap(res.x);
        res.x = std::move(z);
        const double f_prev = fx;
        fx = fz;
        res.trace.push_back(fx);

        if (gradient_mapping < options.grad_tol || (f_prev - fx) <= options.rel_tol * std::abs(f_prev)) {
            res.converged = true;
            ++res.iterations;
            break;
        }

        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        const double beta = (t - 1.0) / t_next;
        for (std::size_t j = 0; j < dim; ++j) y[j] = res.x[j] + beta * (res.x[j] - x_prev[j]);
        t = t_next;
        momentum = beta != 0.0;
    }
    res.objective = fx;
    return res;
}

} // namespace detail
} // namespace suquan
