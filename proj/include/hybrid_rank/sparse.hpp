#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

namespace hybrid_rank {

/// Sparse non-negative vector with entries sorted by term id. Zero weights
/// are never stored; `norm` caches the L2 norm.
struct SparseVector {
    std::vector<std::uint32_t> ids;
    std::vector<double> weights;
    double norm = 0.0;

    [[nodiscard]] std::size_t size() const noexcept { return ids.size(); }
    [[nodiscard]] bool empty() const noexcept { return ids.empty(); }

    /// Builds from (id, weight) entries that are already sorted by id.
    static SparseVector from_sorted(std::vector<std::pair<std::uint32_t, double>> entries) {
        SparseVector v;
        v.ids.reserve(entries.size());
        v.weights.reserve(entries.size());
        for (auto [id, w] : entries) {
            if (w != 0.0) {
                v.ids.push_back(id);
                v.weights.push_back(w);
            }
        }
        v.recompute_norm();
        return v;
    }

    void recompute_norm() {
        double s = 0.0;
        for (double w : weights) {
            s += w * w;
        }
        norm = std::sqrt(s);
    }

    /// Scales to unit L2 norm; the zero vector stays zero.
    void normalize() {
        if (norm == 0.0) {
            return;
        }
        const double inv = 1.0 / norm;
        for (double& w : weights) {
            w *= inv;
        }
        recompute_norm();
    }

    bool operator==(const SparseVector&) const = default;
};

/// Merge-join dot product.
inline double dot(const SparseVector& a, const SparseVector& b) {
    double s = 0.0;
    std::size_t i = 0;
    std::size_t j = 0;
    while (i < a.ids.size() && j < b.ids.size()) {
        if (a.ids[i] < b.ids[j]) {
            ++i;
        } else if (a.ids[i] > b.ids[j]) {
            ++j;
        } else {
            s += a.weights[i++] * b.weights[j++];
        }
    }
    return s;
}

}  // namespace hybrid_rank
