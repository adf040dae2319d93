#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "suquan/error.hpp"

namespace suquan {

using index_t = std::uint32_t;

/**
 * Permutation induced by sorting the entries of a sample.
 *
 * Both arrays are 0-based. rank()[j] is the position of entry j once the
 * sample is sorted ascending; order()[k] is the index of the k-th smallest
 * entry. The two are inverse permutations: order()[rank()[j]] == j.
 *
 * This is the sparse form of the permutation matrix P_x with P_x f = f[rank]
 * and P_x^T w = w[order]. The dense matrix is never built outside of tests.
 */
class SortedSample {
public:
    SortedSample() = default;

    /// Builds from a rank array; throws InvalidInput unless it is a permutation.
    static SortedSample from_rank(std::vector<index_t> rank)
    {
        const std::size_t p = rank.size();
        std::vector<index_t> order(p, 0);
        std::vector<char> seen(p, 0);
        for (std::size_t j = 0; j < p; ++j) {
            const index_t r = rank[j];
            if (r >= p || seen[r]) {
                throw InvalidInput("rank array is not a permutation of 0.." + std::to_string(p == 0 ? 0 : p - 1));
            }
            seen[r] = 1;
            order[r] = static_cast<index_t>(j);
        }
        return SortedSample(std::move(rank), std::move(order));
    }

    static SortedSample identity(std::size_t p)
    {
        std::vector<index_t> idx(p);
        std::iota(idx.begin(), idx.end(), index_t{0});
        return SortedSample(idx, idx);
    }

    std::size_t size() const noexcept { return rank_.size(); }
    std::span<const index_t> rank() const noexcept { return rank_; }
    std::span<const index_t> order() const noexcept { return order_; }

    friend bool operator==(const SortedSample&, const SortedSample&) = default;

private:
    SortedSample(std::vector<index_t> rank, std::vector<index_t> order)
        : rank_(std::move(rank)), order_(std::move(order)) {}

    friend SortedSample sort_sample(std::span<const double> x);

    std::vector<index_t> rank_;
    std::vector<index_t> order_;
};

/// Sorts x ascending; equal entries keep their original index order.
inline SortedSample sort_sample(std::span<const double> x)
{
    const std::size_t p = x.size();
    if (p == 0) throw InvalidInput("sort_sample: empty sample");
    if (p > std::numeric_limits<index_t>::max()) throw InvalidInput("sort_sample: sample too long");
    for (std::size_t j = 0; j < p; ++j) {
        if (!std::isfinite(x[j])) {
            throw InvalidInput("sort_sample: non-finite entry at index " + std::to_string(j));
        }
    }
    std::vector<index_t> order(p);
    std::iota(order.begin(), order.end(), index_t{0});
    std::sort(order.begin(), order.end(), [x](index_t a, index_t b) {
        return x[a] < x[b] || (x[a] == x[b] && a < b);
    });
    std::vector<index_t> rank(p);
    for (std::size_t k = 0; k < p; ++k) rank[order[k]] = static_cast<index_t>(k);
    return SortedSample(std::move(rank), std::move(order));
}

/// out[j] = f[rank[j]]
inline void apply_pi(const SortedSample& s, std::span<const double> f, std::span<double> out)
{
    require_same_size("apply_pi", s.size(), f.size());
    require_same_size("apply_pi output", s.size(), out.size());
    const auto rank = s.rank();
    for (std::size_t j = 0; j < rank.size(); ++j) out[j] = f[rank[j]];
}

inline std::vector<double> apply_pi(const SortedSample& s, std::span<const double> f)
{
    std::vector<double> out(s.size());
    apply_pi(s, f, out);
    return out;
}

/// out[j] = w[order[j]]
inline void apply_pi_transpose(const SortedSample& s, std::span<const double> w, std::span<double> out)
{
    require_same_size("apply_pi_transpose", s.size(), w.size());
    require_same_size("apply_pi_transpose output", s.size(), out.size());
    const auto order = s.order();
    for (std::size_t j = 0; j < order.size(); ++j) out[j] = w[order[j]];
}

inline std::vector<double> apply_pi_transpose(const SortedSample& s, std::span<const double> w)
{
    std::vector<double> out(s.size());
    apply_pi_transpose(s, w, out);
    return out;
}

/// w^T P_x f without forming either product.
inline double bilinear_pi(const SortedSample& s, std::span<const double> w, std::span<const double> f)
{
    const auto rank = s.rank();
    double acc = 0.0;
    for (std::size_t j = 0; j < rank.size(); ++j) acc += w[j] * f[rank[j]];
    return acc;
}

/// Frobenius inner product of the two permutation matrices: the number of
/// entries ranked at the same position in both samples.
inline std::size_t pi_inner_product(const SortedSample& a, const SortedSample& b)
{
    require_same_size("pi_inner_product", a.size(), b.size());
    const auto ra = a.rank();
    const auto rb = b.rank();
    std::size_t count = 0;
    for (std::size_t j = 0; j < ra.size(); ++j) count += (ra[j] == rb[j]) ? 1 : 0;
    return count;
}

} // namespace suquan
