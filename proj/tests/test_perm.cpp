#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "suquan/perm.hpp"

using namespace suquan;

namespace {

std::vector<index_t> to_vec(std::span<const index_t> s) { return {s.begin(), s.end()}; }

// Random vector with deliberate duplicates.
std::vector<double> random_with_ties(std::mt19937_64& gen, std::size_t p)
{
    std::uniform_int_distribution<int> d(0, static_cast<int>(p / 2));
    std::vector<double> x(p);
    for (double& v : x) v = d(gen);
    return x;
}

} // namespace

TEST(SortSample, WorkedExample)
{
    const std::vector<double> x{4.5, 1.2, 10.1, 8.9};
    const auto s = sort_sample(x);
    EXPECT_EQ(to_vec(s.rank()), (std::vector<index_t>{1, 0, 3, 2}));
    EXPECT_EQ(to_vec(s.order()), (std::vector<index_t>{1, 0, 3, 2}));
}

TEST(SortSample, AlreadySorted)
{
    const auto s = sort_sample(std::vector<double>{1, 2, 3});
    EXPECT_EQ(to_vec(s.rank()), (std::vector<index_t>{0, 1, 2}));
    EXPECT_EQ(to_vec(s.order()), (std::vector<index_t>{0, 1, 2}));
}

TEST(SortSample, TiesBrokenByIndex)
{
    const auto s = sort_sample(std::vector<double>{5, 5, 1});
    EXPECT_EQ(to_vec(s.rank()), (std::vector<index_t>{1, 2, 0}));
    EXPECT_EQ(to_vec(s.order()), (std::vector<index_t>{2, 0, 1}));
}

TEST(SortSample, RejectsBadInput)
{
    EXPECT_THROW(sort_sample(std::vector<double>{}), InvalidInput);
    EXPECT_THROW(sort_sample(std::vector<double>{1.0, std::numeric_limits<double>::quiet_NaN()}), InvalidInput);
    EXPECT_THROW(sort_sample(std::vector<double>{std::numeric_limits<double>::infinity()}), InvalidInput);
    EXPECT_THROW(SortedSample::from_rank({0, 0, 1}), InvalidInput);
    EXPECT_THROW(SortedSample::from_rank({0, 3, 1}), InvalidInput);
}

TEST(SortSample, RankOrderInverseProperty)
{
    std::mt19937_64 gen(11);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t p = 1 + trial % 17;
        const auto x = random_with_ties(gen, p);
        const auto s = sort_sample(x);
        std::vector<char> seen(p, 0);
        for (std::size_t j = 0; j < p; ++j) {
            ASSERT_EQ(s.order()[s.rank()[j]], j);
            seen[s.rank()[j]] = 1;
        }
        ASSERT_TRUE(std::all_of(seen.begin(), seen.end(), [](char c) { return c; }));
        // sorted ascending, stable in index
        for (std::size_t k = 0; k + 1 < p; ++k) {
            const auto a = s.order()[k], b = s.order()[k + 1];
            ASSERT_TRUE(x[a] < x[b] || (x[a] == x[b] && a < b));
        }
        EXPECT_EQ(SortedSample::from_rank(to_vec(s.rank())), s);
    }
}

TEST(ApplyPi, WorkedExample)
{
    const auto s = SortedSample::from_rank({1, 0, 3, 2});
    EXPECT_EQ(apply_pi(s, std::vector<double>{0, 1, 3, 4}), (std::vector<double>{1, 0, 4, 3}));
}

TEST(ApplyPi, IdentityLeavesVectorUnchanged)
{
    const std::vector<double> f{3.0, -1.0, 2.5, 7.0};
    EXPECT_EQ(apply_pi(SortedSample::identity(4), f), f);
    EXPECT_EQ(apply_pi_transpose(SortedSample::identity(4), f), f);
}

TEST(ApplyPi, TransposeExample)
{
    const auto s = SortedSample::from_rank({1, 0, 3, 2});
    EXPECT_EQ(apply_pi_transpose(s, std::vector<double>{10, 20, 30, 40}), (std::vector<double>{20, 10, 40, 30}));
}

TEST(ApplyPi, DimensionMismatch)
{
    const auto s = SortedSample::identity(3);
    EXPECT_THROW(apply_pi(s, std::vector<double>{1, 2}), DimensionMismatch);
    EXPECT_THROW(apply_pi_transpose(s, std::vector<double>{1, 2, 3, 4}), DimensionMismatch);
    EXPECT_THROW(pi_inner_product(s, SortedSample::identity(4)), DimensionMismatch);
}

TEST(ApplyPi, MatchesDenseOracleRandom)
{
    std::mt19937_64 gen(3);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t p = 1 + trial % 8;
        const auto x = random_with_ties(gen, p);
        const auto f = oracle::random_vector(gen, p);
        const auto s = sort_sample(x);
        const Eigen::MatrixXd pm = oracle::permutation_matrix(x);
        const Eigen::VectorXd dense = pm * oracle::to_eigen(f);
        const Eigen::VectorXd dense_t = pm.transpose() * oracle::to_eigen(f);
        const auto fast = apply_pi(s, f);
        const auto fast_t = apply_pi_transpose(s, f);
        for (std::size_t j = 0; j < p; ++j) {
            ASSERT_EQ(fast[j], dense(static_cast<Eigen::Index>(j)));
            ASSERT_EQ(fast_t[j], dense_t(static_cast<Eigen::Index>(j)));
        }
        // P^T P = I
        EXPECT_EQ(apply_pi_transpose(s, apply_pi(s, f)), f);
        // multiset preserved
        auto a = fast, b = f;
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        EXPECT_EQ(a, b);
    }
}

TEST(PiInnerProduct, SelfAndReversal)
{
    const auto a = SortedSample::identity(4);
    EXPECT_EQ(pi_inner_product(a, a), 4u);
    const auto rev = sort_sample(std::vector<double>{4, 3, 2, 1});
    EXPECT_EQ(pi_inner_product(a, rev), 0u);
}

TEST(PiInnerProduct, ExhaustiveSmallPermutations)
{
    // Every pair of permutations for p <= 5 against the dense Frobenius product.
    for (std::size_t p = 1; p <= 5; ++p) {
        std::vector<double> base(p);
        std::iota(base.begin(), base.end(), 0.0);
        std::vector<std::vector<double>> perms;
        do {
            perms.push_back(base);
        } while (std::next_permutation(base.begin(), base.end()));
        for (const auto& x : perms) {
            const auto sx = sort_sample(x);
            const auto px = oracle::permutation_matrix(x);
            for (const auto& y : perms) {
                const double dense = px.cwiseProduct(oracle::permutation_matrix(y)).sum();
                ASSERT_EQ(static_cast<double>(pi_inner_product(sx, sort_sample(y))), dense);
            }
            // apply_pi on a distinct-valued f equals the dense product exactly
            const auto f = oracle::to_eigen(std::vector<double>(x.rbegin(), x.rend()));
            const Eigen::VectorXd d = px * f;
            const auto fast = apply_pi(sx, std::vector<double>(x.rbegin(), x.rend()));
            for (std::size_t j = 0; j < p; ++j) ASSERT_EQ(fast[j], d(static_cast<Eigen::Index>(j)));
        }
    }
}

TEST(PiInnerProduct, RandomPairsAgainstDense)
{
    std::mt19937_64 gen(5);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t p = 7;
        const auto x = random_with_ties(gen, p);
        const auto y = oracle::random_vector(gen, p);
        const double dense = oracle::permutation_matrix(x).cwiseProduct(oracle::permutation_matrix(y)).sum();
        EXPECT_EQ(static_cast<double>(pi_inner_product(sort_sample(x), sort_sample(y))), dense);
    }
}
