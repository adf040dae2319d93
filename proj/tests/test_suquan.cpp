#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "suquan/harness.hpp"
#include "suquan/suquan.hpp"

using namespace suquan;

namespace {

struct Rows {
    std::vector<std::vector<double>> rows;
    std::vector<double> labels;

    Dataset dataset() const
    {
        std::vector<double> flat;
        for (const auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
        return Dataset(flat, rows.size(), rows.front().size(), labels);
    }
};

// Rows whose positives lean increasing in the first half of the coordinates.
Rows random_rows(std::mt19937_64& gen, std::size_t n, std::size_t p)
{
    Rows out;
    for (std::size_t i = 0; i < n; ++i) {
        auto r = oracle::random_vector(gen, p);
        const double y = i % 2 ? 1.0 : -1.0;
        if (y > 0) {
            for (std::size_t j = 0; j < p / 2; ++j) r[j] += 0.8 * static_cast<double>(j) / static_cast<double>(p);
        }
        out.rows.push_back(std::move(r));
        out.labels.push_back(y);
    }
    return out;
}

double cosine(std::span<const double> a, const Eigen::VectorXd& b)
{
    double ab = 0, aa = 0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        ab += a[j] * b(static_cast<Eigen::Index>(j));
        aa += a[j] * a[j];
    }
    return ab / std::sqrt(aa * b.squaredNorm());
}

} // namespace

TEST(LdaMatrix, CoefficientSums)
{
    std::mt19937_64 gen(1);
    const auto rows = random_rows(gen, 9, 4);
    const auto data = rows.dataset();
    const ImplicitLdaMatrix m(data);
    double pos = 0, neg = 0;
    for (std::size_t i = 0; i < data.n(); ++i) (data.labels()[i] > 0 ? pos : neg) += m.coefficients()[i];
    EXPECT_NEAR(pos, 1.0, 1e-15);
    EXPECT_NEAR(neg, -1.0, 1e-15);
}

TEST(LdaMatrix, IdenticalPermutationsGiveZero)
{
    const Rows rows{{{1, 2, 3}, {1, 2, 3}, {4, 5, 6}, {0, 1, 2}}, {1, -1, 1, -1}};
    const auto data = rows.dataset();
    const ImplicitLdaMatrix m(data);
    for (double x : lda_matvec(m, std::vector<double>{0.3, -1.0, 2.0})) EXPECT_EQ(x, 0.0);
}

TEST(LdaMatrix, HandBuiltCaseMatchesDense)
{
    const Rows rows{{{0.4, 0.1, 0.3, 0.2}, {1, 2, 3, 4}, {9, 7, 8, 6}}, {1, -1, -1}};
    const auto data = rows.dataset();
    const ImplicitLdaMatrix m(data);
    Eigen::MatrixXd dense = oracle::permutation_matrix(rows.rows[0]) -
                            0.5 * oracle::permutation_matrix(rows.rows[1]) -
                            0.5 * oracle::permutation_matrix(rows.rows[2]);
    const std::vector<double> v{1.0, -2.0, 0.5, 3.0};
    const Eigen::VectorXd mv = dense * oracle::to_eigen(v);
    const Eigen::VectorXd mtv = dense.transpose() * oracle::to_eigen(v);
    const auto fast = lda_matvec(m, v);
    const auto fast_t = lda_matvec_transpose(m, v);
    for (std::size_t j = 0; j < 4; ++j) {
        EXPECT_NEAR(fast[j], mv(static_cast<Eigen::Index>(j)), 1e-15);
        EXPECT_NEAR(fast_t[j], mtv(static_cast<Eigen::Index>(j)), 1e-15);
    }
    const auto ones = lda_matvec(m, std::vector<double>(4, 1.0));
    for (double x : ones) EXPECT_NEAR(x, 0.0, 1e-15);
    const auto d = m.dense();
    for (std::size_t j = 0; j < 16; ++j) {
        EXPECT_NEAR(d[j], dense(static_cast<Eigen::Index>(j / 4), static_cast<Eigen::Index>(j % 4)), 1e-15);
    }
    EXPECT_THROW(lda_matvec(m, std::vector<double>{1, 2}), DimensionMismatch);
}

TEST(LdaMatrix, NeedsBothClasses)
{
    const Rows rows{{{1, 2}, {2, 1}}, {1, 1}};
    EXPECT_THROW(ImplicitLdaMatrix(rows.dataset()), DegenerateLabels);
}

TEST(SuquanSvd, MatchesDenseOracle)
{
    std::mt19937_64 gen(3);
    int flagged = 0;
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t n = 4 + trial % 17;
        const std::size_t p = 2 + trial % 14;
        const auto rows = random_rows(gen, n, p);
        const auto data = rows.dataset();
        const auto ref = oracle::dense_lda_top_right_singular_vector(rows.rows, rows.labels);
        for (SvdPath path : {SvdPath::implicit, SvdPath::dense}) {
            SvdOptions opts;
            opts.path = path;
            if (oracle::dense_lda_singular_values(rows.rows, rows.labels)(0) < 1e-12) {
                EXPECT_THROW(suquan_svd(data, opts), DegenerateQuantile);
                continue;
            }
            const auto res = suquan_svd(data, opts);
            flagged += res.near_degenerate;
            EXPECT_GE(std::abs(cosine(res.singular_vector, ref)), 1.0 - 1e-10) << "trial " << trial;
        }
    }
    EXPECT_EQ(flagged, 0);
}

TEST(SuquanSvd, SignAndProjection)
{
    std::mt19937_64 gen(5);
    const auto data = random_rows(gen, 40, 10).dataset();
    const auto res = suquan_svd(data);
    double corr = 0;
    for (std::size_t j = 0; j < 10; ++j) corr += (static_cast<double>(j) - 4.5) * res.singular_vector[j];
    EXPECT_GE(corr, 0.0);
    // unit vector of length p has mean square 1/p, so project_F0 only centers
    for (std::size_t j = 0; j < 10; ++j) EXPECT_NEAR(res.quantile.values()[j], res.singular_vector[j], 1e-12);
    EXPECT_TRUE(res.quantile.centered());
    EXPECT_TRUE(res.dense_path);
}

TEST(SuquanSvd, RayleighQuotientNonDecreasing)
{
    std::mt19937_64 gen(7);
    for (int trial = 0; trial < 20; ++trial) {
        const auto data = random_rows(gen, 15, 12).dataset();
        const auto res = suquan_svd(data);
        for (std::size_t k = 1; k < res.rayleigh.size(); ++k) {
            ASSERT_GE(res.rayleigh[k], res.rayleigh[k - 1] * (1.0 - 1e-12));
        }
    }
}

TEST(SuquanSvd, Degenerate)
{
    const Rows same{{{1, 2, 3}, {3, 2, 1}, {1, 2, 3}, {3, 2, 1}}, {1, 1, -1, -1}};
    EXPECT_THROW(suquan_svd(same.dataset()), DegenerateQuantile);
    const Rows one{{{1, 2, 3}, {3, 2, 1}}, {1, 1}};
    EXPECT_THROW(suquan_svd(one.dataset()), DegenerateLabels);
}

TEST(SuquanAlt, HalfStepObjectivesNonIncreasing)
{
    std::mt19937_64 gen(9);
    for (int trial = 0; trial < 10; ++trial) {
        const auto data = random_rows(gen, 30, 8).dataset();
        const auto f0 = median_quantile(data);
        AltOptions opts;
        opts.rounds = 3;
        for (Variant v : {Variant::bnd, Variant::spav}) {
            const auto m = suquan_alt(data, f0, 0.1, 1.0, v, LossKind::logistic, opts);
            ASSERT_EQ(m.objective_history.size(), 2 * opts.rounds + 1);
            for (std::size_t k = 1; k < m.objective_history.size(); ++k) {
                ASSERT_LE(m.objective_history[k], m.objective_history[k - 1] + 1e-9) << variant_name(v);
            }
        }
    }
}

TEST(SuquanAlt, BndOutputIsFeasible)
{
    std::mt19937_64 gen(11);
    const auto data = random_rows(gen, 40, 12).dataset();
    const auto m = suquan_alt(data, median_quantile(data), 0.01, 0.0, Variant::bnd);
    const auto f = m.quantile.values();
    double ms = 0;
    for (double x : f) ms += x * x / static_cast<double>(f.size());
    EXPECT_LE(ms, 1.0 + 1e-12);
    EXPECT_TRUE(is_non_decreasing(f));
    EXPECT_TRUE(is_centered(f));
    EXPECT_TRUE(m.quantile.monotone());
}

TEST(SuquanAlt, HugeLambdaKeepsInitialQuantile)
{
    std::mt19937_64 gen(13);
    const auto data = random_rows(gen, 30, 6).dataset();
    const auto f0 = make_distribution_quantile(Family::gaussian, 6);
    const auto start = project_FBND(f0.values());
    const auto m = suquan_alt(data, f0, 1e8, 0.0, Variant::bnd);
    for (double w : m.model.w) EXPECT_LT(std::abs(w), 1e-6);
    for (std::size_t j = 0; j < 6; ++j) EXPECT_NEAR(m.quantile.values()[j], start.values()[j], 1e-6);
}

TEST(SuquanAlt, SpavCenteringKeepsMargins)
{
    std::mt19937_64 gen(15);
    const auto data = random_rows(gen, 30, 8).dataset();
    AltOptions opts;
    opts.refit = false;
    const auto m = suquan_alt(data, median_quantile(data), 0.05, 10.0, Variant::spav, LossKind::logistic, opts);
    EXPECT_TRUE(is_centered(m.quantile.values()));
    EXPECT_TRUE(is_non_decreasing(m.quantile.values()));
    // last entry is the objective after the f-step and its recentering
    const LossSpec spec{LossKind::logistic, {data.labels().begin(), data.labels().end()}};
    EXPECT_NEAR(suquan_objective(data.sorted(), spec, m.model, m.quantile.values(), Variant::spav, 10.0),
                m.objective_history.back(), 1e-12);
}

TEST(SuquanAlt, Errors)
{
    std::mt19937_64 gen(17);
    const auto data = random_rows(gen, 10, 4).dataset();
    EXPECT_THROW(suquan_alt(data, TargetQuantile({1, 1, 1, 1}, true), 0.1, 0.0, Variant::bnd), DegenerateQuantile);
    EXPECT_THROW(suquan_alt(data, TargetQuantile({1, 2, 3}, true), 0.1, 0.0, Variant::bnd), DimensionMismatch);
    EXPECT_THROW(suquan_alt(data, TargetQuantile({2, 1, 3, 4}), 0.1, 0.0, Variant::bnd), InvalidInput);
    EXPECT_THROW(suquan_alt(data, median_quantile(data), 0.1, 0.0, Variant::svd), InvalidInput);
    const Rows one{{{1, 2}, {2, 1}}, {-1, -1}};
    EXPECT_THROW(suquan_alt(one.dataset(), TargetQuantile({-1, 1}, true), 0.1, 0.0, Variant::bnd), DegenerateLabels);
}

TEST(Suquan, RankOneFrobeniusConsistency)
{
    std::mt19937_64 gen(19);
    const auto rows = random_rows(gen, 10, 5);
    const auto data = rows.dataset();
    const auto m = suquan_alt(data, median_quantile(data), 0.1, 0.0, Variant::bnd);
    const Eigen::MatrixXd wf = oracle::to_eigen(m.model.w) * oracle::to_eigen(m.quantile.values()).transpose();
    const auto margins = decision_values(m.model, QuantileDesign(data.sorted(), m.quantile.values()));
    for (std::size_t i = 0; i < 10; ++i) {
        const double frob = wf.cwiseProduct(oracle::permutation_matrix(rows.rows[i])).sum() + m.model.b;
        EXPECT_NEAR(margins[i], frob, 1e-12);
    }
}

TEST(Suquan, GlobalFeatureRelabelingLeavesAucUnchanged)
{
    SimulationSpec spec;
    spec.p = 30;
    spec.n_train = 120;
    spec.n_test = 200;
    spec.corruption = Family::exponential;
    spec.seed = 4;
    const auto sim = simulate(spec);

    std::vector<std::size_t> sigma(spec.p);
    std::iota(sigma.begin(), sigma.end(), std::size_t{0});
    std::mt19937_64 gen(21);
    std::shuffle(sigma.begin(), sigma.end(), gen);
    auto relabel = [&](const Dataset& d) {
        std::vector<double> flat(d.n() * d.p());
        for (std::size_t i = 0; i < d.n(); ++i)
            for (std::size_t j = 0; j < d.p(); ++j) flat[i * d.p() + sigma[j]] = d.row(i)[j];
        return Dataset(flat, d.n(), d.p(), {d.labels().begin(), d.labels().end()});
    };
    const auto train_r = relabel(sim.train);
    const auto test_r = relabel(sim.test);

    for (Method method : {Method::suquan_svd, Method::suquan_bnd, Method::suquan_spav}) {
        LearnerSpec learner;
        learner.method = method;
        const auto a = train(learner, sim.train, 0.01, 10.0);
        const auto b = train(learner, train_r, 0.01, 10.0);
        const double auc_a = auc(predict(a, sim.test), sim.test.labels());
        const double auc_b = auc(predict(b, test_r), test_r.labels());
        EXPECT_NEAR(auc_a, auc_b, 1e-12) << method_name(method);
        for (std::size_t j = 0; j < spec.p; ++j) EXPECT_NEAR(a.model.w[j], b.model.w[sigma[j]], 1e-6);
    }
}

TEST(Suquan, LearnedQuantileApproachesTruthUnderCauchyCorruption)
{
    SimulationSpec spec;
    spec.p = 200;
    spec.n_train = 1000;
    spec.n_test = 10;
    spec.corruption = Family::cauchy;
    spec.seed = 0;
    const auto sim = simulate(spec);
    const auto m = suquan_alt(sim.train, median_quantile(sim.train), 1e-2, 0.0, Variant::bnd);
    const double learned = quantile_distance(m.quantile, sim.truth.f_true);
    const double corrupt = quantile_distance(*sim.truth.corrupting, sim.truth.f_true);
    EXPECT_LT(learned, corrupt);
}
