#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "suquan/linmod.hpp"
#include "suquan/perm.hpp"

using namespace suquan;

namespace {

struct Problem {
    std::vector<double> z;
    std::vector<double> y;
    std::size_t n, p;
};

Problem logistic_problem(std::mt19937_64& gen, std::size_t n, std::size_t p)
{
    Problem pr{oracle::random_vector(gen, n * p), {}, n, p};
    const auto w = oracle::random_vector(gen, p);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        double m = 0.3;
        for (std::size_t j = 0; j < p; ++j) m += pr.z[i * p + j] * w[j];
        pr.y.push_back(u(gen) < 1.0 / (1.0 + std::exp(-m)) ? 1.0 : -1.0);
    }
    return pr;
}

double pairwise_auc(const std::vector<double>& s, const std::vector<double>& y)
{
    double num = 0, den = 0;
    for (std::size_t a = 0; a < s.size(); ++a) {
        for (std::size_t b = 0; b < s.size(); ++b) {
            if (y[a] > 0 && y[b] < 0) {
                den += 1;
                num += s[a] > s[b] ? 1.0 : (s[a] == s[b] ? 0.5 : 0.0);
            }
        }
    }
    return num / den;
}

} // namespace

TEST(Loss, LogisticAtZeroMargin)
{
    const LossSpec spec{LossKind::logistic, {1.0}};
    const auto [value, deriv] = loss_value_grad(spec, std::vector<double>{0.0});
    EXPECT_NEAR(value, std::log(2.0), 1e-15);
    EXPECT_NEAR(deriv[0], -0.5, 1e-15);
}

TEST(Loss, SquaredAndStability)
{
    const LossSpec sq{LossKind::squared, {2.0, -1.0}};
    const auto [v, d] = loss_value_grad(sq, std::vector<double>{0.5, 1.0});
    EXPECT_NEAR(v, (2.25 + 4.0) / 2.0, 1e-15);
    EXPECT_NEAR(d[0], -3.0, 1e-15);
    EXPECT_NEAR(d[1], 4.0, 1e-15);

    const LossSpec lg{LossKind::logistic, {1.0, -1.0}};
    const auto [big, dbig] = loss_value_grad(lg, std::vector<double>{-800.0, -800.0});
    EXPECT_TRUE(std::isfinite(big));
    EXPECT_NEAR(big, 400.0, 1e-9);
    EXPECT_NEAR(dbig[0], -1.0, 1e-15);
    EXPECT_NEAR(dbig[1], 0.0, 1e-15);
}

TEST(Loss, Validation)
{
    EXPECT_THROW(loss_value_grad(LossSpec{LossKind::logistic, {0.5}}, std::vector<double>{0.0}), InvalidInput);
    EXPECT_THROW(loss_value_grad(LossSpec{LossKind::logistic, {1.0}}, std::vector<double>{0.0, 1.0}), DimensionMismatch);
    EXPECT_THROW(loss_value_grad(LossSpec{LossKind::logistic, {1.0}}, std::vector<double>{NAN}), InvalidInput);
}

TEST(LinearObjective, GradientMatchesFiniteDifference)
{
    std::mt19937_64 gen(4);
    for (LossKind kind : {LossKind::logistic, LossKind::squared}) {
        auto pr = logistic_problem(gen, 25, 5);
        const DenseDesign design(pr.z, pr.n, pr.p);
        const LossSpec spec{kind, pr.y};
        const auto x = oracle::random_vector(gen, pr.p + 1);
        std::vector<double> grad(pr.p + 1);
        linear_objective(design, spec, 0.3, std::span<const double>(x).first(pr.p), x[pr.p], grad);
        const auto fd = oracle::finite_difference(
            [&](std::span<const double> v) { return linear_objective(design, spec, 0.3, v.first(pr.p), v[pr.p]); }, x);
        for (std::size_t j = 0; j <= pr.p; ++j) EXPECT_NEAR(grad[j], fd[j], 1e-6);
    }
}

TEST(LinearObjective, ImplicitDesignsMatchDense)
{
    std::mt19937_64 gen(6);
    const std::size_t n = 12, p = 6;
    std::vector<SortedSample> samples;
    for (std::size_t i = 0; i < n; ++i) samples.push_back(sort_sample(oracle::random_vector(gen, p)));
    const auto f = oracle::random_vector(gen, p);
    std::vector<double> z;
    for (const auto& s : samples) {
        const auto row = apply_pi(s, f);
        z.insert(z.end(), row.begin(), row.end());
    }
    const QuantileDesign qd(samples, f);
    const DenseDesign dd(z, n, p);
    const auto w = oracle::random_vector(gen, p);
    std::vector<double> ga(p, 0.0), gb(p, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        EXPECT_NEAR(qd.dot(i, w), dd.dot(i, w), 1e-14);
        qd.axpy(i, 0.7, ga);
        dd.axpy(i, 0.7, gb);
    }
    for (std::size_t j = 0; j < p; ++j) EXPECT_NEAR(ga[j], gb[j], 1e-13);

    // <w, P f> = <P^T w, f>: the permuted-weights design reads f through the rows
    const PermutedWeightsDesign pw(samples, w);
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(pw.dot(i, f), qd.dot(i, w), 1e-13);
}

TEST(FitLinear, RidgeMatchesClosedForm)
{
    std::mt19937_64 gen(10);
    const std::size_t n = 30, p = 4;
    auto z = oracle::random_vector(gen, n * p);
    auto y = oracle::random_vector(gen, n);
    Eigen::MatrixXd zm(n, p);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < p; ++j) zm(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = z[i * p + j];
    for (double lambda : {0.0, 0.01, 1.0}) {
        const auto [w_ref, b_ref] = oracle::ridge(zm, oracle::to_eigen(y), lambda);
        const auto fit = fit_linear(DenseDesign(z, n, p), LossSpec{LossKind::squared, y}, lambda,
                                    ProxGradientOptions{1e-15, 1e-10, 20000});
        for (std::size_t j = 0; j < p; ++j) EXPECT_NEAR(fit.model.w[j], w_ref(static_cast<Eigen::Index>(j)), 1e-6);
        EXPECT_NEAR(fit.model.b, b_ref, 1e-6);
    }
}

TEST(FitLinear, HeavyPenaltyGivesLogOdds)
{
    std::mt19937_64 gen(12);
    auto pr = logistic_problem(gen, 60, 3);
    double pos = 0;
    for (double y : pr.y) pos += y > 0;
    const double neg = static_cast<double>(pr.n) - pos;
    const auto fit = fit_linear(DenseDesign(pr.z, pr.n, pr.p), LossSpec{LossKind::logistic, pr.y}, 1e6,
                                ProxGradientOptions{1e-15, 1e-12, 20000});
    for (double w : fit.model.w) EXPECT_LT(std::abs(w), 1e-5);
    EXPECT_NEAR(fit.model.b, std::log(pos / neg), 1e-5);
}

TEST(FitLinear, TraceIsMonotoneAndStationary)
{
    std::mt19937_64 gen(14);
    auto pr = logistic_problem(gen, 80, 6);
    const DenseDesign design(pr.z, pr.n, pr.p);
    const LossSpec spec{LossKind::logistic, pr.y};
    const auto fit = fit_linear(design, spec, 0.01);
    EXPECT_TRUE(fit.converged);
    for (std::size_t k = 1; k < fit.trace.size(); ++k) ASSERT_LE(fit.trace[k], fit.trace[k - 1] + 1e-15);
    std::vector<double> grad(pr.p + 1);
    linear_objective(design, spec, 0.01, fit.model.w, fit.model.b, grad);
    for (double g : grad) EXPECT_LT(std::abs(g), 1e-5);
}

TEST(FitLinear, WarmStartReachesSameSolution)
{
    std::mt19937_64 gen(15);
    auto pr = logistic_problem(gen, 50, 4);
    const DenseDesign design(pr.z, pr.n, pr.p);
    const LossSpec spec{LossKind::logistic, pr.y};
    const ProxGradientOptions tight{1e-14, 1e-9, 20000};
    const auto cold = fit_linear(design, spec, 0.05, tight);
    const auto warm = fit_linear(design, spec, 0.05, tight, &cold.model);
    EXPECT_NEAR(cold.objective, warm.objective, 1e-11);
    for (std::size_t j = 0; j < pr.p; ++j) EXPECT_NEAR(cold.model.w[j], warm.model.w[j], 1e-5);
    EXPECT_LE(warm.iterations, cold.iterations);
}

TEST(FitLinear, Errors)
{
    const std::vector<double> z{1, 2, 3, 4};
    EXPECT_THROW(fit_linear(DenseDesign(z, 2, 2), LossSpec{LossKind::logistic, {1, 1}}, 0.1), DegenerateLabels);
    EXPECT_THROW(fit_linear(DenseDesign(z, 2, 2), LossSpec{LossKind::logistic, {1, -1}}, -0.1), InvalidInput);
    EXPECT_THROW(fit_linear(DenseDesign(z, 2, 2), LossSpec{LossKind::logistic, {1, -1, 1}}, 0.1), DimensionMismatch);
}

TEST(Auc, PerfectAndReversed)
{
    const std::vector<double> y{-1, -1, 1, 1};
    EXPECT_EQ(auc(std::vector<double>{0.1, 0.2, 0.8, 0.9}, y), 1.0);
    EXPECT_EQ(auc(std::vector<double>{0.9, 0.8, 0.2, 0.1}, y), 0.0);
    EXPECT_EQ(auc(std::vector<double>{0.5, 0.5, 0.5, 0.5}, y), 0.5);
}

TEST(Auc, Errors)
{
    EXPECT_THROW(auc(std::vector<double>{0.1, 0.2}, std::vector<double>{1, 1}), DegenerateLabels);
    EXPECT_THROW(auc(std::vector<double>{0.1, NAN}, std::vector<double>{1, -1}), InvalidInput);
    EXPECT_THROW(auc(std::vector<double>{0.1, 0.2}, std::vector<double>{1, 0}), InvalidInput);
}

TEST(Auc, MatchesPairwiseCountAndIsRankInvariant)
{
    std::mt19937_64 gen(16);
    std::uniform_int_distribution<int> coarse(0, 5);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 4 + trial % 30;
        std::vector<double> s(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = coarse(gen);
            y[i] = i % 2 ? 1.0 : -1.0;
        }
        const double a = auc(s, y);
        ASSERT_NEAR(a, pairwise_auc(s, y), 1e-14);
        std::vector<double> t(n), neg(n);
        for (std::size_t i = 0; i < n; ++i) {
            t[i] = std::exp(0.3 * s[i]) - 7.0;
            neg[i] = -s[i];
        }
        ASSERT_NEAR(auc(t, y), a, 1e-14);
        ASSERT_NEAR(auc(neg, y), 1.0 - a, 1e-14);
    }
}
