#pragma once

// Brute-force reference for greedy closest-pair selection. It enumerates every
// ordered sequence of k disjoint filter pairs and keeps the lexicographically
// smallest sequence of (distance, i, j) keys, which is what "repeatedly take
// the closest remaining pair" produces. Written without the library's code.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <tuple>
#include <vector>

#include "lcnn/tensor.hpp"

namespace lcnn::testing {

inline double oracle_cosine_distance(const Tensor& w, std::size_t i, std::size_t j) {
    const std::size_t len = w.size() / w.dim(0);
    double dot = 0.0;
    double ni = 0.0;
    double nj = 0.0;
    for (std::size_t t = 0; t < len; ++t) {
        const double a = w[i * len + t];
        const double b = w[j * len + t];
        dot += a * b;
        ni += a * a;
        nj += b * b;
    }
    if (ni == 0.0 && nj == 0.0) return 0.0;
    if (ni == 0.0 || nj == 0.0) return 1.0;
    // Distance is bounded to [0, 2]; rounding must not order exact duplicates.
    return std::clamp(1.0 - dot / (std::sqrt(ni) * std::sqrt(nj)), 0.0, 2.0);
}

using PairKey = std::tuple<double, std::size_t, std::size_t>;

inline void oracle_search(const std::vector<PairKey>& all, std::vector<bool>& used, std::size_t k,
                          std::vector<PairKey>& current, std::vector<PairKey>& best, bool& have_best) {
    if (current.size() == k) {
        if (!have_best || current < best) {
            best = current;
            have_best = true;
        }
        return;
    }
    for (const PairKey& p : all) {
        const auto [d, i, j] = p;
        if (used[i] || used[j]) continue;
        used[i] = used[j] = true;
        current.push_back(p);
        oracle_search(all, used, k, current, best, have_best);
        current.pop_back();
        used[i] = used[j] = false;
    }
}

// Removed (higher) indices in selection order.
inline std::vector<std::size_t> oracle_plan(const Tensor& weights, std::size_t k) {
    const std::size_t n = weights.dim(0);
    std::vector<PairKey> all;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) all.emplace_back(oracle_cosine_distance(weights, i, j), i, j);
    }
    std::vector<bool> used(n, false);
    std::vector<PairKey> current;
    std::vector<PairKey> best;
    bool have_best = false;
    oracle_search(all, used, k, current, best, have_best);
    std::vector<std::size_t> removed;
    for (const auto& [d, i, j] : best) removed.push_back(j);
    return removed;
}

}  // namespace lcnn::testing
