#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

namespace hybrid_rank {

struct ScoredDoc {
    std::int64_t doc_id = 0;
    double score = 0.0;

    bool operator==(const ScoredDoc&) const = default;
};

/// Orders by descending score, ties by ascending doc id.
inline bool ranks_before(const ScoredDoc& a, const ScoredDoc& b) {
    if (a.score != b.score) {
        return a.score > b.score;
    }
    return a.doc_id < b.doc_id;
}

/// Top-k of `scores`, where `doc_ids[i]` names the document scored at i.
/// Returns min(k, n) entries.
inline std::vector<ScoredDoc> top_k(std::span<const double> scores, std::span<const std::int64_t> doc_ids, std::size_t k) {
    std::vector<ScoredDoc> all(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
        all[i] = {doc_ids[i], scores[i]};
    }
    k = std::min(k, all.size());
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(), ranks_before);
    all.resize(k);
    return all;
}

/// Top-k where the document id is the position in `scores`.
inline std::vector<ScoredDoc> top_k(std::span<const double> scores, std::size_t k) {
    std::vector<std::int64_t> ids(scores.size());
    std::iota(ids.begin(), ids.end(), 0);
    return top_k(scores, ids, k);
}

/// 1-based rank of position `target` under the same ordering, without sorting.
inline std::size_t rank_of(std::span<const double> scores, std::span<const std::int64_t> doc_ids, std::size_t target) {
    const ScoredDoc t{doc_ids[target], scores[target]};
    std::size_t rank = 1;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (i != target && ranks_before({doc_ids[i], scores[i]}, t)) {
            ++rank;
        }
    }
    return rank;
}

}  // namespace hybrid_rank
