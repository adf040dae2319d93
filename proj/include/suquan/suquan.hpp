#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "suquan/dataset.hpp"
#include "suquan/detail/prox_gradient.hpp"
#include "suquan/error.hpp"
#include "suquan/isotonic.hpp"
#include "suquan/linmod.hpp"
#include "suquan/perm.hpp"
#include "suquan/quantiles.hpp"

namespace suquan {

enum class Variant { svd, bnd, spav };

inline std::string_view variant_name(Variant v)
{
    switch (v) {
    case Variant::svd: return "svd";
    case Variant::bnd: return "bnd";
    case Variant::spav: return "spav";
    }
    return "unknown";
}

inline std::optional<Variant> parse_variant(std::string_view name)
{
    for (Variant v : {Variant::svd, Variant::bnd, Variant::spav}) {
        if (variant_name(v) == name) return v;
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// LDA matrix in permutation space

/**
 * M = sum_i c_i P_{x_i} with c_i = y_i / n_{y_i}: the difference between the
 * class means of the permutation matrices. Held as the sorted samples and
 * their coefficients; products cost O(np).
 */
class ImplicitLdaMatrix {
public:
    explicit ImplicitLdaMatrix(const Dataset& data) : samples_(data.sorted()), p_(data.p())
    {
        std::size_t n_pos = 0, n_neg = 0;
        for (double y : data.labels()) {
            if (y == 1.0) ++n_pos;
            else if (y == -1.0) ++n_neg;
            else throw InvalidInput("LDA matrix needs labels in {-1, +1}");
        }
        if (n_pos == 0 || n_neg == 0) throw DegenerateLabels("LDA matrix needs both classes");
        coefficients_.reserve(data.n());
        for (double y : data.labels()) {
            coefficients_.push_back(y > 0 ? 1.0 / static_cast<double>(n_pos) : -1.0 / static_cast<double>(n_neg));
        }
    }

    std::size_t p() const noexcept { return p_; }
    std::size_t n() const noexcept { return samples_.size(); }
    std::span<const double> coefficients() const noexcept { return coefficients_; }

    /// M v
    std::vector<double> matvec(std::span<const double> v) const
    {
        require_same_size("lda_matvec", p_, v.size());
        std::vector<double> out(p_, 0.0);
        for (std::size_t i = 0; i < samples_.size(); ++i) {
            const double c = coefficients_[i];
            const auto rank = samples_[i].rank();
            for (std::size_t j = 0; j < p_; ++j) out[j] += c * v[rank[j]];
        }
        return out;
    }

    /// M^T u
    std::vector<double> matvec_transpose(std::span<const double> u) const
    {
        require_same_size("lda_matvec_transpose", p_, u.size());
        std::vector<double> out(p_, 0.0);
        for (std::size_t i = 0; i < samples_.size(); ++i) {
            const double c = coefficients_[i];
            const auto order = samples_[i].order();
            for (std::size_t k = 0; k < p_; ++k) out[k] += c * u[order[k]];
        }
        return out;
    }

    /// Row-major p x p accumulation; O(np + p^2) memory p^2.
    std::vector<double> dense() const
    {
        std::vector<double> m(p_ * p_, 0.0);
        for (std::size_t i = 0; i < samples_.size(); ++i) {
            const auto rank = samples_[i].rank();
            for (std::size_t j = 0; j < p_; ++j) m[j * p_ + rank[j]] += coefficients_[i];
        }
        return m;
    }

private:
    std::span<const SortedSample> samples_;
    std::vector<double> coefficients_;
    std::size_t p_;
};

inline std::vector<double> lda_matvec(const ImplicitLdaMatrix& m, std::span<const double> v) { return m.matvec(v); }

inline std::vector<double> lda_matvec_transpose(const ImplicitLdaMatrix& m, std::span<const double> u)
{
    return m.matvec_transpose(u);
}

// ---------------------------------------------------------------------------
// SVD learner

enum class SvdPath { automatic, implicit, dense };

struct SvdOptions {
    double tol = 1e-10;            ///< on |v_{k+1} - v_k|
    std::size_t max_iter = 10000;
    SvdPath path = SvdPath::automatic;
};

struct SvdResult {
    TargetQuantile quantile;
    std::vector<double> singular_vector;  ///< unit norm, sign fixed
    double sigma = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
    bool near_degenerate = false;         ///< leading singular gap too small to resolve reliably
    bool dense_path = false;
    std::vector<double> rayleigh;         ///< |M v_k|^2 per iteration
};

/**
 * Top right singular vector of the LDA matrix by power iteration on M^T M.
 *
 * The implicit O(np) product is used when n < p, otherwise M is accumulated
 * densely (O(p^2) per iteration), unless options.path forces one of them.
 * The sign is fixed so that the vector correlates non-negatively with the
 * index sequence. Result is passed through project_F0.
 */
inline SvdResult suquan_svd(const Dataset& data, const SvdOptions& options = {})
{
    const ImplicitLdaMatrix lda(data);
    const std::size_t p = lda.p();
    if (p < 2) throw InvalidInput("suquan_svd: need at least two features");

    SvdResult res;
    res.dense_path = options.path == SvdPath::dense ||
                     (options.path == SvdPath::automatic && data.n() >= p);
    std::vector<double> dense;
    if (res.dense_path) dense = lda.dense();

    auto mul = [&](std::span<const double> v) {
        if (!res.dense_path) return lda.matvec(v);
        std::vector<double> out(p, 0.0);
        for (std::size_t j = 0; j < p; ++j) out[j] = detail::dot(std::span<const double>(dense).subspan(j * p, p), v);
        return out;
    };
    auto mul_t = [&](std::span<const double> u) {
        if (!res.dense_path) return lda.matvec_transpose(u);
        std::vector<double> out(p, 0.0);
        for (std::size_t j = 0; j < p; ++j) {
            const double uj = u[j];
            const double* row = dense.data() + j * p;
            for (std::size_t k = 0; k < p; ++k) out[k] += uj * row[k];
        }
        return out;
    };
    auto normalize_centered = [](std::vector<double>& v) {
        detail::center(v);
        const double norm = std::sqrt(detail::dot(v, v));
        for (double& x : v) x /= norm;
    };

    // Start from the centered index ramp; fall back to a second deterministic
    // centered vector if the ramp happens to lie in the null space.
    std::vector<double> v(p);
    for (std::size_t j = 0; j < p; ++j) v[j] = static_cast<double>(j + 1);
    normalize_centered(v);
    if (std::sqrt(detail::dot(mul(v), mul(v))) < 1e-10) {
        for (std::size_t j = 0; j < p; ++j) v[j] = std::sin(1.2345 * static_cast<double>(j + 1) * static_cast<double>(j + 1));
        normalize_centered(v);
        if (std::sqrt(detail::dot(mul(v), mul(v))) < 1e-10) {
            throw DegenerateQuantile("suquan_svd: LDA matrix is zero (classes have identical rank statistics)");
        }
    }

    double last_diff = 0.0;
    double ratio = 0.0;
    for (res.iterations = 0; res.iterations < options.max_iter; ++res.iterations) {
        const auto u = mul(v);
        res.rayleigh.push_back(detail::dot(u, u));
        auto next = mul_t(u);
        const double norm = std::sqrt(detail::dot(next, next));
        if (!(norm > 0.0) || !std::isfinite(norm)) throw NumericError("suquan_svd: power iteration broke down");
        double diff2 = 0.0;
        for (std::size_t j = 0; j < p; ++j) {
            next[j] /= norm;
            diff2 += (next[j] - v[j]) * (next[j] - v[j]);
        }
        v.swap(next);
        const double diff = std::sqrt(diff2);
        if (last_diff > 0.0) ratio = diff / last_diff;
        last_diff = diff;
        if (diff < options.tol) {
            res.converged = true;
            ++res.iterations;
            break;
        }
    }
    const auto mv = mul(v);
    res.sigma = std::sqrt(detail::dot(mv, mv));
    if (res.sigma < 1e-10) throw DegenerateQuantile("suquan_svd: leading singular value is zero");

    // Rayleigh quotients of a PSD operator never decrease under power iteration;
    // a visible drop or a contraction ratio near one flags a near-tied top pair.
    bool oscillating = false;
    for (std::size_t k = 1; k < res.rayleigh.size(); ++k) {
        if (res.rayleigh[k] < res.rayleigh[k - 1] * (1.0 - 1e-12)) oscillating = true;
    }
    res.near_degenerate = !res.converged || oscillating || ratio > 0.999;

    const double mid = 0.5 * static_cast<double>(p - 1);
    double corr = 0.0;
    for (std::size_t j = 0; j < p; ++j) corr += (static_cast<double>(j) - mid) * v[j];
    bool flip = corr < 0.0;
    if (std::abs(corr) <= 1e-14) {
        const auto first = std::find_if(v.begin(), v.end(), [](double x) { return x != 0.0; });
        flip = first != v.end() && *first < 0.0;
    }
    if (flip) {
        for (double& x : v) x = -x;
    }
    res.quantile = project_F0(v);
    res.singular_vector = std::move(v);
    return res;
}

// ---------------------------------------------------------------------------
// Alternating learners

struct AltOptions {
    std::size_t rounds = 1;
    /// Refit (w, b) on the learned quantile after the last f-step.
    bool refit = true;
    ProxGradientOptions w_step{};
    ProxGradientOptions f_step{1e-8, 1e-9, 2000};
};

struct SuquanModel {
    TargetQuantile quantile;
    LinearModel model;
    Variant variant = Variant::bnd;
    double gamma = 0.0;
    std::size_t rounds = 0;
    /// Monitored objective after each half-step (w-step, f-step, ..., refit).
    std::vector<double> objective_history;
    bool converged = true;  ///< every inner solve met its tolerance
};

inline double roughness(std::span<const double> f)
{
    double s = 0.0;
    for (std::size_t j = 0; j + 1 < f.size(); ++j) s += (f[j + 1] - f[j]) * (f[j + 1] - f[j]);
    return s;
}

/// (1/n) sum l_i(w^T f[rank_i] + b) as a function of f with (w, b) fixed; gradient into grad if non-empty.
inline double f_step_loss(std::span<const SortedSample> samples, const LossSpec& spec, std::span<const double> w,
                          double b, std::span<const double> f, std::span<double> grad = {})
{
    const PermutedWeightsDesign design(samples, w);
    const double inv_n = 1.0 / static_cast<double>(samples.size());
    if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0);
    double value = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double u = design.dot(i, f) + b;
        value += detail::loss_at(spec.kind, spec.labels[i], u);
        if (!grad.empty()) design.axpy(i, detail::loss_derivative(spec.kind, spec.labels[i], u) * inv_n, grad);
    }
    return value * inv_n;
}

/// Loss + lambda |w|^2 (+ gamma * roughness(f) for spav).
inline double suquan_objective(std::span<const SortedSample> samples, const LossSpec& spec, const LinearModel& model,
                               std::span<const double> f, Variant variant, double gamma)
{
    double value = f_step_loss(samples, spec, model.w, model.b, f);
    for (double x : model.w) value += model.lambda * x * x;
    if (variant == Variant::spav) value += gamma * roughness(f);
    return value;
}

/**
 * Alternating minimization in (w, b) and f.
 *
 * Each round fits (w, b) on the samples normalized to the current f, then
 * minimizes the loss in f with (w, b) held fixed by accelerated proximal
 * gradient. bnd projects onto non-decreasing, centered, rms <= 1 vectors;
 * spav uses the smoothed isotonic prox with weight gamma and recenters f at
 * the end, moving the shift into b so that margins are unchanged.
 *
 * f_init is first projected onto the bnd set.
 */
inline SuquanModel suquan_alt(const Dataset& data, const TargetQuantile& f_init, double lambda, double gamma,
                              Variant variant, LossKind loss = LossKind::logistic, const AltOptions& options = {})
{
    if (variant == Variant::svd) throw InvalidInput("suquan_alt: variant must be bnd or spav");
    require_same_size("suquan_alt initial quantile", data.p(), f_init.size());
    if (!f_init.monotone()) throw InvalidInput("suquan_alt: initial quantile must be non-decreasing");
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw InvalidInput("suquan_alt: gamma must be finite and >= 0");

    const LossSpec spec{loss, std::vector<double>(data.labels().begin(), data.labels().end())};
    spec.validate();
    detail::require_both_classes(spec);
    const auto samples = data.sorted();
    const std::size_t p = data.p();

    SuquanModel out;
    out.variant = variant;
    out.gamma = gamma;
    const auto start = project_FBND(f_init.values());
    std::vector<double> f(start.values().begin(), start.values().end());

    auto objective = [&]() { return suquan_objective(samples, spec, out.model, f, variant, gamma); };
    auto context = [](std::size_t round, const char* step, const Error& e) {
        return "round " + std::to_string(round + 1) + ", " + step + ": " + e.what();
    };
    auto w_step = [&](std::size_t round, bool warm) {
        try {
            auto fit = fit_linear(QuantileDesign(samples, f), spec, lambda, options.w_step, warm ? &out.model : nullptr);
            out.converged = out.converged && fit.converged;
            out.model = std::move(fit.model);
        } catch (const NumericError& e) {
            throw NumericError(context(round, "w-step", e));
        }
        out.objective_history.push_back(objective());
    };

    for (std::size_t round = 0; round < std::max<std::size_t>(options.rounds, 1); ++round) {
        w_step(round, round > 0);

        const std::span<const double> w = out.model.w;
        const double b = out.model.b;
        const PermutedWeightsDesign design(samples, w);
        const double lipschitz = detail::loss_curvature(loss) * detail::design_spectral_estimate(design);

        auto smooth = [&](std::span<const double> x, std::span<double> grad) {
            return f_step_loss(samples, spec, w, b, x, grad);
        };
        ProxGradientResult res;
        try {
            if (variant == Variant::bnd) {
                auto prox = [](std::span<const double> v, double) { return detail::project_bnd_values(v); };
                auto none = [](std::span<const double>) { return 0.0; };
                res = detail::accelerated_prox_gradient(smooth, prox, none, f, lipschitz, options.f_step);
            } else {
                auto prox = [gamma](std::span<const double> v, double step) { return spav_prox(v, gamma * step); };
                auto penalty = [gamma](std::span<const double> x) { return gamma * roughness(x); };
                res = detail::accelerated_prox_gradient(smooth, prox, penalty, f, lipschitz, options.f_step);
            }
        } catch (const NumericError& e) {
            throw NumericError(context(round, "f-step", e));
        }
        out.converged = out.converged && res.converged;
        f = std::move(res.x);

        if (variant == Variant::spav) {
            double mean = 0.0;
            for (double x : f) mean += x;
            mean /= static_cast<double>(p);
            double wsum = 0.0;
            for (double x : w) wsum += x;
            for (double& x : f) x -= mean;
            out.model.b += mean * wsum;
        }
        if (detail::is_degenerate(f, f_init.values())) {
            throw DegenerateQuantile("round " + std::to_string(round + 1) + ", f-step: learned quantile is constant");
        }
        out.objective_history.push_back(objective());
        out.rounds = round + 1;
    }
    if (options.refit) w_step(out.rounds - 1, true);

    out.quantile = TargetQuantile(std::move(f), true, true);
    return out;
}

/// SVD quantile followed by an L2 linear fit on the normalized samples.
inline SuquanModel suquan_svd_model(const Dataset& data, double lambda, LossKind loss = LossKind::logistic,
                                    const SvdOptions& svd_options = {}, const ProxGradientOptions& fit_options = {})
{
    auto svd = suquan_svd(data, svd_options);
    const LossSpec spec{loss, std::vector<double>(data.labels().begin(), data.labels().end())};
    auto fit = fit_linear(QuantileDesign(data.sorted(), svd.quantile.values()), spec, lambda, fit_options);
    SuquanModel out;
    out.variant = Variant::svd;
    out.rounds = 1;
    out.converged = svd.converged && fit.converged;
    out.objective_history.push_back(fit.objective);
    out.model = std::move(fit.model);
    out.quantile = std::move(svd.quantile);
    return out;
}

} // namespace suquan
