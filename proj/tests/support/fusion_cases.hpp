#pragma once

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "hybrid_rank/fusion.hpp"
#include "hybrid_rank/rng.hpp"
#include "hybrid_rank/util.hpp"

namespace hybrid_rank::testing {

/// Document order of one row: descending score, ties by id.
inline std::vector<std::string> ranking(const fusion::ScoreMatrix& m, std::size_t q) {
    std::vector<std::size_t> idx(m.n_docs());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        if (m.at(q, a) != m.at(q, b)) {
            return m.at(q, a) > m.at(q, b);
        }
        return id_less(m.doc_ids[a], m.doc_ids[b]);
    });
    std::vector<std::string> out;
    for (auto i : idx) {
        out.push_back(m.doc_ids[i]);
    }
    return out;
}

/// Random matrix of multiples of 1/64 in [-1/8, 1/8], so sums and shifts are exact.
inline fusion::ScoreMatrix random_dyadic(Rng& rng, std::size_t nq, std::size_t nd, const std::string& label) {
    std::vector<std::string> q, d;
    for (std::size_t i = 0; i < nq; ++i) {
        q.push_back(std::to_string(i));
    }
    for (std::size_t j = 0; j < nd; ++j) {
        d.push_back(std::to_string(j));
    }
    fusion::ScoreMatrix m(q, d, label);
    for (auto& s : m.scores) {
        // Narrow range so ties are common.
        s = (static_cast<double>(uniform_index(rng, 17)) - 8.0) / 64.0;
    }
    return m;
}

}  // namespace hybrid_rank::testing
