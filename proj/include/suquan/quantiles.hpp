#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "suquan/dataset.hpp"
#include "suquan/error.hpp"
#include "suquan/isotonic.hpp"
#include "suquan/perm.hpp"

namespace suquan {

inline bool is_non_decreasing(std::span<const double> v)
{
    for (std::size_t j = 0; j + 1 < v.size(); ++j) {
        if (v[j + 1] < v[j]) return false;
    }
    return true;
}

/// |sum v| <= 1e-9 * p * max(1, max|v|)
inline bool is_centered(std::span<const double> v)
{
    double sum = 0.0;
    for (double x : v) sum += x;
    const double tol = 1e-9 * static_cast<double>(v.size()) * std::max(1.0, detail::max_abs(v));
    return std::abs(sum) <= tol;
}

/// Target quantile vector f with certified properties.
class TargetQuantile {
public:
    TargetQuantile() = default;

    /// Throws InvalidInput if a requested flag does not hold for values.
    explicit TargetQuantile(std::vector<double> values, bool monotone = false, bool centered = false)
        : values_(std::move(values)), monotone_(monotone), centered_(centered)
    {
        if (values_.empty()) throw InvalidInput("target quantile is empty");
        detail::require_finite("target quantile", values_);
        if (monotone_ && !is_non_decreasing(values_)) {
            throw InvalidInput("target quantile flagged monotone is not non-decreasing");
        }
        if (centered_ && !is_centered(values_)) {
            throw InvalidInput("target quantile flagged centered does not sum to zero");
        }
    }

    std::span<const double> values() const noexcept { return values_; }
    std::size_t size() const noexcept { return values_.size(); }
    bool monotone() const noexcept { return monotone_; }
    bool centered() const noexcept { return centered_; }

private:
    std::vector<double> values_;
    bool monotone_ = false;
    bool centered_ = false;
};

/// Quantile normalization: the entries of f placed in the rank order of x.
inline std::vector<double> quantile_normalize(std::span<const double> x, const TargetQuantile& f)
{
    require_same_size("quantile_normalize", f.size(), x.size());
    return apply_pi(sort_sample(x), f.values());
}

enum class Family { gaussian, cauchy, exponential, uniform, bimodal_gaussian };

inline std::string_view family_name(Family family)
{
    switch (family) {
    case Family::gaussian: return "gaussian";
    case Family::cauchy: return "cauchy";
    case Family::exponential: return "exponential";
    case Family::uniform: return "uniform";
    case Family::bimodal_gaussian: return "bimodal-gaussian";
    }
    return "unknown";
}

inline std::optional<Family> parse_family(std::string_view name)
{
    for (Family f : {Family::gaussian, Family::cauchy, Family::exponential, Family::uniform,
                     Family::bimodal_gaussian}) {
        if (family_name(f) == name) return f;
    }
    return std::nullopt;
}

/// Equal-weight mixture of N(-separation, sd^2) and N(+separation, sd^2).
struct BimodalParams {
    double separation = 2.0;
    double sd = 1.0;
};

namespace detail {

inline double standard_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

inline double bimodal_inverse_cdf(double u, const BimodalParams& params)
{
    const auto cdf = [&](double x) {
        return 0.5 * standard_normal_cdf((x + params.separation) / params.sd) +
               0.5 * standard_normal_cdf((x - params.separation) / params.sd);
    };
    double lo = -params.separation - 40.0 * params.sd;
    double hi = params.separation + 40.0 * params.sd;
    while (hi - lo > 1e-10) {
        const double mid = 0.5 * (lo + hi);
        if (cdf(mid) < u) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

inline double inverse_cdf(Family family, double u, const BimodalParams& params)
{
    switch (family) {
    case Family::gaussian: return boost::math::quantile(boost::math::normal_distribution<double>(), u);
    case Family::cauchy: return std::tan(std::numbers::pi * (u - 0.5));
    case Family::exponential: return -std::log1p(-u);
    case Family::uniform: return u;
    case Family::bimodal_gaussian: return bimodal_inverse_cdf(u, params);
    }
    throw InvalidInput("unknown quantile family");
}

inline void center(std::vector<double>& v)
{
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    for (double& x : v) x -= mean;
}

inline double mean_square(std::span<const double> v)
{
    double s = 0.0;
    for (double x : v) s += x * x;
    return s / static_cast<double>(v.size());
}

// Centers, then shrinks radially onto {(1/p) sum f^2 <= 1}. Never inflates.
inline void center_and_shrink(std::vector<double>& v)
{
    center(v);
    const double ms = mean_square(v);
    if (ms > 1.0) {
        const double s = 1.0 / std::sqrt(ms);
        for (double& x : v) x *= s;
    }
}

inline bool is_degenerate(std::span<const double> centered, std::span<const double> original)
{
    return detail::max_abs(centered) <= 1e-12 * std::max(1.0, detail::max_abs(original));
}

// Projection onto non-decreasing, centered, rms <= 1. May return the zero vector.
inline std::vector<double> project_bnd_values(std::span<const double> f)
{
    auto out = pava(f);
    center_and_shrink(out);
    return out;
}

} // namespace detail

/// f[j] = InverseCDF((j + 0.5) / p), centered.
inline TargetQuantile make_distribution_quantile(Family family, std::size_t p, const BimodalParams& params = {})
{
    if (p < 2) throw InvalidInput("make_distribution_quantile: p must be at least 2");
    std::vector<double> f(p);
    for (std::size_t j = 0; j < p; ++j) {
        const double u = (static_cast<double>(j) + 0.5) / static_cast<double>(p);
        f[j] = detail::inverse_cdf(family, u, params);
    }
    detail::center(f);
    return TargetQuantile(std::move(f), true, true);
}

/// Columnwise median of the sorted rows, centered.
inline TargetQuantile median_quantile(const Dataset& data)
{
    const std::size_t n = data.n();
    const std::size_t p = data.p();
    if (n == 0) throw InvalidInput("median_quantile: empty dataset");
    std::vector<double> column(n);
    std::vector<double> f(p);
    for (std::size_t j = 0; j < p; ++j) {
        for (std::size_t i = 0; i < n; ++i) column[i] = data.row(i)[data.sorted(i).order()[j]];
        const auto mid = column.begin() + static_cast<std::ptrdiff_t>(n / 2);
        std::nth_element(column.begin(), mid, column.end());
        double med = *mid;
        if (n % 2 == 0) med = 0.5 * (med + *std::max_element(column.begin(), mid));
        f[j] = med;
    }
    detail::center(f);
    // Centering shifts every entry by the same amount; order is preserved.
    for (std::size_t j = 0; j + 1 < p; ++j) f[j + 1] = std::max(f[j + 1], f[j]);
    return TargetQuantile(std::move(f), true, true);
}

/// Centers f and shrinks it into the ball (1/p) sum f^2 <= 1.
inline TargetQuantile project_F0(std::span<const double> f)
{
    if (f.empty()) throw InvalidInput("project_F0: empty vector");
    detail::require_finite("project_F0", f);
    std::vector<double> out(f.begin(), f.end());
    detail::center_and_shrink(out);
    if (detail::is_degenerate(out, f)) throw DegenerateQuantile("project_F0: vector is constant");
    return TargetQuantile(std::move(out), is_non_decreasing(f), true);
}

/// Euclidean projection onto non-decreasing, centered vectors with rms <= 1.
inline TargetQuantile project_FBND(std::span<const double> f)
{
    if (f.empty()) throw InvalidInput("project_FBND: empty vector");
    detail::require_finite("project_FBND", f);
    auto out = detail::project_bnd_values(f);
    if (detail::is_degenerate(out, f)) {
        throw DegenerateQuantile("project_FBND: isotonic projection is constant");
    }
    return TargetQuantile(std::move(out), true, true);
}

} // namespace suquan
