#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "suquan/error.hpp"
#include "suquan/perm.hpp"

namespace suquan {

/// Row-major n x p sample matrix, its labels, and the sorted form of every row.
class Dataset {
public:
    Dataset() = default;

    Dataset(std::vector<double> features, std::size_t n, std::size_t p,
            std::vector<double> labels, std::string name = {})
        : features_(std::move(features)), labels_(std::move(labels)),
          n_(n), p_(p), name_(std::move(name))
    {
        if (n_ == 0) throw InvalidInput("dataset '" + name_ + "' has no samples");
        if (p_ == 0) throw InvalidInput("dataset '" + name_ + "' has no features");
        require_same_size("dataset feature buffer", n_ * p_, features_.size());
        require_same_size("dataset labels", n_, labels_.size());
        for (double y : labels_) {
            if (!std::isfinite(y)) throw InvalidInput("dataset '" + name_ + "': non-finite label");
        }
        sorted_.reserve(n_);
        for (std::size_t i = 0; i < n_; ++i) sorted_.push_back(sort_sample(row(i)));
    }

    std::size_t n() const noexcept { return n_; }
    std::size_t p() const noexcept { return p_; }
    const std::string& name() const noexcept { return name_; }

    std::span<const double> row(std::size_t i) const { return {features_.data() + i * p_, p_}; }
    std::span<const double> features() const noexcept { return features_; }
    std::span<const double> labels() const noexcept { return labels_; }
    const SortedSample& sorted(std::size_t i) const { return sorted_[i]; }
    std::span<const SortedSample> sorted() const noexcept { return sorted_; }

    /// Rows listed in idx, in that order.
    Dataset subset(std::span<const std::size_t> idx, std::string name = {}) const
    {
        Dataset out;
        out.n_ = idx.size();
        out.p_ = p_;
        out.name_ = name.empty() ? name_ : std::move(name);
        if (out.n_ == 0) throw InvalidInput("empty subset of dataset '" + name_ + "'");
        out.features_.reserve(out.n_ * p_);
        out.labels_.reserve(out.n_);
        out.sorted_.reserve(out.n_);
        for (std::size_t i : idx) {
            if (i >= n_) throw InvalidInput("subset index out of range");
            const auto r = row(i);
            out.features_.insert(out.features_.end(), r.begin(), r.end());
            out.labels_.push_back(labels_[i]);
            out.sorted_.push_back(sorted_[i]);
        }
        return out;
    }

private:
    std::vector<double> features_;
    std::vector<double> labels_;
    std::vector<SortedSample> sorted_;
    std::size_t n_ = 0;
    std::size_t p_ = 0;
    std::string name_;
};

} // namespace suquan
