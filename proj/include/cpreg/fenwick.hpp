#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace cpreg {

/* Fenwick tree over non-negative integer weights with prefix-search sampling.
   Supports the O(log n) per-event bookkeeping of the next-event engine. */
class FenwickSampler {
public:
    explicit FenwickSampler(std::size_t n = 0) { reset(n); }

    void reset(std::size_t n) {
        n_ = n;
        tree_.assign(n + 1, 0);
        total_ = 0;
    }

    /* Grow geometrically, preserving weights; amortized O(log n) per element. */
    void grow(std::size_t n) {
        if (n <= n_) return;
        const std::size_t target = std::max(n, 2 * n_);
        std::vector<std::int64_t> weights(target, 0);
        std::int64_t prev = 0;
        for (std::size_t i = 0; i < n_; ++i) {
            const std::int64_t cur = prefix_sum(i + 1);
            weights[i] = cur - prev;
            prev = cur;
        }
        n_ = target;
        tree_.assign(target + 1, 0);
        total_ = 0;
        for (std::size_t i = 0; i < target; ++i)
            if (weights[i] != 0) add(i, weights[i]);
    }

    std::size_t size() const { return n_; }
    std::int64_t total() const { return total_; }

    void add(std::size_t i, std::int64_t delta) {
        total_ += delta;
        for (std::size_t j = i + 1; j <= n_; j += j & (~j + 1)) tree_[j] += delta;
    }

    std::int64_t prefix_sum(std::size_t count) const {
        std::int64_t s = 0;
        for (std::size_t j = count; j > 0; j -= j & (~j + 1)) s += tree_[j];
        return s;
    }

    std::int64_t weight(std::size_t i) const { return prefix_sum(i + 1) - prefix_sum(i); }

    /* Smallest index i with prefix_sum(i+1) > target, for 0 <= target < total. */
    std::size_t find(std::int64_t target) const {
        if (target < 0 || target >= total_)
            throw std::out_of_range("FenwickSampler::find: target outside mass");
        std::size_t pos = 0;
        std::size_t step = 1;
        while ((step << 1) <= n_) step <<= 1;
        for (; step > 0; step >>= 1) {
            const std::size_t next = pos + step;
            if (next <= n_ && tree_[next] <= target) {
                pos = next;
                target -= tree_[next];
            }
        }
        return pos;  // 0-based index
    }

private:
    std::size_t n_ = 0;
    std::vector<std::int64_t> tree_;
    std::int64_t total_ = 0;
};

}  // namespace cpreg
