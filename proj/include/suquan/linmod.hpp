#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "suquan/detail/prox_gradient.hpp"
#include "suquan/error.hpp"
#include "suquan/perm.hpp"

namespace suquan {

enum class LossKind { logistic, squared };

inline std::string_view loss_name(LossKind kind)
{
    return kind == LossKind::logistic ? "logistic" : "squared";
}

/// Loss kind plus the responses: +/-1 for logistic, any real for squared.
struct LossSpec {
    LossKind kind = LossKind::logistic;
    std::vector<double> labels;

    void validate() const
    {
        if (labels.empty()) throw InvalidInput("loss: no labels");
        for (double y : labels) {
            if (!std::isfinite(y)) throw InvalidInput("loss: non-finite label");
            if (kind == LossKind::logistic && y != 1.0 && y != -1.0) {
                throw InvalidInput("logistic loss requires labels in {-1, +1}");
            }
        }
    }
};

struct LinearModel {
    std::vector<double> w;
    double b = 0.0;
    LossKind loss = LossKind::logistic;
    double lambda = 0.0;
};

// ---------------------------------------------------------------------------
// Designs: row providers for an implicit n x p feature matrix.

template <class D>
concept LinearDesign = requires(const D& d, std::size_t i, std::span<const double> v, double a,
                                std::span<double> out) {
    { d.rows() } -> std::convertible_to<std::size_t>;
    { d.cols() } -> std::convertible_to<std::size_t>;
    { d.dot(i, v) } -> std::convertible_to<double>;
    d.axpy(i, a, out);
};

/// Row-major dense matrix.
class DenseDesign {
public:
    DenseDesign(std::span<const double> data, std::size_t n, std::size_t p) : data_(data), n_(n), p_(p)
    {
        require_same_size("dense design", n * p, data.size());
    }
    std::size_t rows() const noexcept { return n_; }
    std::size_t cols() const noexcept { return p_; }
    double dot(std::size_t i, std::span<const double> v) const
    {
        const double* r = data_.data() + i * p_;
        double s = 0.0;
        for (std::size_t j = 0; j < p_; ++j) s += r[j] * v[j];
        return s;
    }
    void axpy(std::size_t i, double a, std::span<double> out) const
    {
        const double* r = data_.data() + i * p_;
        for (std::size_t j = 0; j < p_; ++j) out[j] += a * r[j];
    }

private:
    std::span<const double> data_;
    std::size_t n_, p_;
};

/// Rows f[rank_i]: the samples quantile normalized to f.
class QuantileDesign {
public:
    QuantileDesign(std::span<const SortedSample> samples, std::span<const double> f) : samples_(samples), f_(f)
    {
        for (const auto& s : samples_) require_same_size("quantile design", f_.size(), s.size());
    }
    std::size_t rows() const noexcept { return samples_.size(); }
    std::size_t cols() const noexcept { return f_.size(); }
    double dot(std::size_t i, std::span<const double> w) const { return bilinear_pi(samples_[i], w, f_); }
    void axpy(std::size_t i, double a, std::span<double> out) const
    {
        const auto rank = samples_[i].rank();
        for (std::size_t j = 0; j < rank.size(); ++j) out[j] += a * f_[rank[j]];
    }

private:
    std::span<const SortedSample> samples_;
    std::span<const double> f_;
};

/// Rows w[order_i]: the design seen by the target quantile when w is fixed.
class PermutedWeightsDesign {
public:
    PermutedWeightsDesign(std::span<const SortedSample> samples, std::span<const double> w) : samples_(samples), w_(w)
    {
        for (const auto& s : samples_) require_same_size("permuted weights design", w_.size(), s.size());
    }
    std::size_t rows() const noexcept { return samples_.size(); }
    std::size_t cols() const noexcept { return w_.size(); }
    double dot(std::size_t i, std::span<const double> f) const { return bilinear_pi(samples_[i], w_, f); }
    void axpy(std::size_t i, double a, std::span<double> out) const
    {
        const auto order = samples_[i].order();
        for (std::size_t k = 0; k < order.size(); ++k) out[k] += a * w_[order[k]];
    }

private:
    std::span<const SortedSample> samples_;
    std::span<const double> w_;
};

// ---------------------------------------------------------------------------
// Losses

namespace detail {

// log(1 + exp(z)) without overflow
inline double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

// 1 / (1 + exp(-z))
inline double sigmoid(double z)
{
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

inline double loss_at(LossKind kind, double y, double u)
{
    return kind == LossKind::logistic ? softplus(-y * u) : (y - u) * (y - u);
}

inline double loss_derivative(LossKind kind, double y, double u)
{
    return kind == LossKind::logistic ? -y * sigmoid(-y * u) : -2.0 * (y - u);
}

// Upper bound on the loss second derivative.
inline double loss_curvature(LossKind kind) { return kind == LossKind::logistic ? 0.25 : 2.0; }

} // namespace detail

/// Mean loss over the margins and the per-sample derivatives l_i'(u_i).
inline std::pair<double, std::vector<double>> loss_value_grad(const LossSpec& spec, std::span<const double> margins)
{
    spec.validate();
    require_same_size("loss_value_grad", spec.labels.size(), margins.size());
    const std::size_t n = margins.size();
    std::vector<double> deriv(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(margins[i])) throw InvalidInput("loss_value_grad: non-finite margin");
        total += detail::loss_at(spec.kind, spec.labels[i], margins[i]);
        deriv[i] = detail::loss_derivative(spec.kind, spec.labels[i], margins[i]);
    }
    return {total / static_cast<double>(n), std::move(deriv)};
}

/// w^T z_i + b for every row.
template <LinearDesign D>
std::vector<double> decision_values(const LinearModel& model, const D& design)
{
    require_same_size("decision_values", design.cols(), model.w.size());
    std::vector<double> out(design.rows());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = design.dot(i, model.w) + model.b;
    return out;
}

/// (1/n) sum l_i(w^T z_i + b) + lambda |w|^2; writes the gradient in (w, b) when grad is non-empty.
template <LinearDesign D>
double linear_objective(const D& design, const LossSpec& spec, double lambda, std::span<const double> w, double b,
                        std::span<double> grad = {})
{
    const std::size_t n = design.rows();
    const std::size_t p = design.cols();
    const double inv_n = 1.0 / static_cast<double>(n);
    double value = 0.0;
    if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0);
    double grad_b = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double u = design.dot(i, w) + b;
        const double y = spec.labels[i];
        value += detail::loss_at(spec.kind, y, u);
        if (!grad.empty()) {
            const double d = detail::loss_derivative(spec.kind, y, u) * inv_n;
            design.axpy(i, d, grad.first(p));
            grad_b += d;
        }
    }
    double norm2 = 0.0;
    for (std::size_t j = 0; j < p; ++j) norm2 += w[j] * w[j];
    if (!grad.empty()) {
        for (std::size_t j = 0; j < p; ++j) grad[j] += 2.0 * lambda * w[j];
        grad[p] = grad_b;
    }
    return value * inv_n + lambda * norm2;
}

namespace detail {

// Largest eigenvalue of A^T A / n with A = [Z 1], by a few power iterations.
template <LinearDesign D>
double design_spectral_estimate(const D& design, std::size_t iterations = 20)
{
    const std::size_t n = design.rows();
    const std::size_t p = design.cols();
    std::vector<double> v(p + 1, 1.0 / std::sqrt(static_cast<double>(p + 1)));
    std::vector<double> next(p + 1);
    double estimate = 0.0;
    for (std::size_t it = 0; it < iterations; ++it) {
        std::fill(next.begin(), next.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double u = design.dot(i, std::span<const double>(v).first(p)) + v[p];
            design.axpy(i, u, std::span<double>(next).first(p));
            next[p] += u;
        }
        const double norm = std::sqrt(dot(next, next));
        if (norm == 0.0) return 0.0;
        estimate = norm / static_cast<double>(n);
        for (std::size_t j = 0; j <= p; ++j) v[j] = next[j] / norm;
    }
    return estimate;
}

inline void require_both_classes(const LossSpec& spec)
{
    if (spec.kind != LossKind::logistic) return;
    const bool pos = std::any_of(spec.labels.begin(), spec.labels.end(), [](double y) { return y > 0; });
    const bool neg = std::any_of(spec.labels.begin(), spec.labels.end(), [](double y) { return y < 0; });
    if (!pos || !neg) throw DegenerateLabels("logistic fit needs both classes");
}

} // namespace detail

struct FitReport {
    LinearModel model;
    double objective = 0.0;
    std::size_t iterations = 0;
    bool converged = false;      ///< false: max_iter reached, best iterate returned
    std::vector<double> trace;   ///< objective after every accepted iteration
};

/**
 * L2-penalized linear model with unpenalized intercept:
 *
 *   min_{w,b} (1/n) sum_i l_i(w^T z_i + b) + lambda |w|^2
 *
 * Full-batch accelerated gradient with backtracking. Starts from (0, 0)
 * unless warm is given.
 */
template <LinearDesign D>
FitReport fit_linear(const D& design, const LossSpec& spec, double lambda, const ProxGradientOptions& options = {},
                     const LinearModel* warm = nullptr)
{
    spec.validate();
    const std::size_t n = design.rows();
    const std::size_t p = design.cols();
    require_same_size("fit_linear labels", n, spec.labels.size());
    if (n < 2) throw InvalidInput("fit_linear: need at least two samples");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InvalidInput("fit_linear: lambda must be finite and >= 0");
    detail::require_both_classes(spec);

    std::vector<double> x0(p + 1, 0.0);
    if (warm != nullptr) {
        require_same_size("fit_linear warm start", p, warm->w.size());
        std::copy(warm->w.begin(), warm->w.end(), x0.begin());
        x0[p] = warm->b;
    }
    const double lipschitz = detail::loss_curvature(spec.kind) * detail::design_spectral_estimate(design) + 2.0 * lambda;

    auto smooth = [&](std::span<const double> x, std::span<double> grad) {
        return linear_objective(design, spec, lambda, x.first(p), x[p], grad);
    };
    auto identity = [](std::span<const double> v, double) { return std::vector<double>(v.begin(), v.end()); };
    auto zero = [](std::span<const double>) { return 0.0; };

    auto res = detail::accelerated_prox_gradient(smooth, identity, zero, std::move(x0), lipschitz, options);

    FitReport report;
    report.model.w.assign(res.x.begin(), res.x.begin() + static_cast<std::ptrdiff_t>(p));
    report.model.b = res.x[p];
    report.model.loss = spec.kind;
    report.model.lambda = lambda;
    report.objective = res.objective;
    report.iterations = res.iterations;
    report.converged = res.converged;
    report.trace = std::move(res.trace);
    return report;
}

/// Area under the ROC curve via the Mann-Whitney statistic; ties count 1/2.
inline double auc(std::span<const double> scores, std::span<const double> labels)
{
    require_same_size("auc", scores.size(), labels.size());
    const std::size_t n = scores.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (double s : scores) {
        if (std::isnan(s)) throw InvalidInput("auc: NaN score");
    }
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    double positives = 0.0;
    double rank_sum = 0.0;
    for (std::size_t k = 0; k < n;) {
        std::size_t end = k;
        while (end < n && scores[idx[end]] == scores[idx[k]]) ++end;
        const double mid_rank = 0.5 * static_cast<double>(k + 1 + end);
        for (std::size_t m = k; m < end; ++m) {
            const double y = labels[idx[m]];
            if (y != 1.0 && y != -1.0) throw InvalidInput("auc: labels must be +/-1");
            if (y > 0) {
                positives += 1.0;
                rank_sum += mid_rank;
            }
        }
        k = end;
    }
    const double negatives = static_cast<double>(n) - positives;
    if (positives == 0.0 || negatives == 0.0) throw DegenerateLabels("auc: both classes are required");
    return (rank_sum - positives * (positives + 1.0) / 2.0) / (positives * negatives);
}

} // namespace suquan
