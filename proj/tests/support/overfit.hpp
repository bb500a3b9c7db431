#pragma once

// Memorization check: train on a small synthetic set and measure how often
// each training query ranks its own article first among all training
// articles.

#include <string>
#include <vector>

#include "hybrid_rank/boe.hpp"
#include "hybrid_rank/evalx.hpp"
#include "synthetic.hpp"

namespace hybrid_rank::testing {

/// Precision@1 of `table` when every query of `pairs` ranks every article.
inline double training_p_at_1(const std::vector<QueryArticlePair>& pairs, const boe::EmbeddingTable& table) {
    std::vector<boe::Encoding> q, a;
    std::vector<std::string> ids;
    for (const auto& p : pairs) {
        q.push_back(boe::encode(p.query.tokens, table));
        a.push_back(boe::encode(p.article.tokens, table));
        ids.push_back(std::to_string(p.pair_id));
    }
    std::size_t hits = 0;
    std::vector<double> row(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        for (std::size_t j = 0; j < pairs.size(); ++j) {
            row[j] = boe::score_embed(q[i].unit, a[j].unit);
        }
        hits += evalx::gold_rank(row, ids, i) == 1;
    }
    return static_cast<double>(hits) / static_cast<double>(pairs.size());
}

struct OverfitResult {
    std::size_t vocab_size = 0;
    double untrained_p_at_1 = 0.0;
    double trained_p_at_1 = 0.0;
};

/// 200 pairs over a vocabulary of about 500 words, d = 32, batch 32,
/// hardest-max negatives.
inline OverfitResult overfit_run(std::size_t epochs) {
    DatasetSplit split;
    split.train = synthetic::memorization_pairs(200, 250, 250, 6, 20, 99);
    boe::TrainConfig cfg;
    cfg.dim = 32;
    cfg.batch_size = 32;
    cfg.lr = 0.001;
    cfg.min_count = 1;
    cfg.neg_strategy = boe::NegativeStrategy::hardest_max;
    OverfitResult r;
    auto untrained_cfg = cfg;
    untrained_cfg.epochs = 0;
    const auto untrained = boe::train(split, untrained_cfg);
    r.vocab_size = untrained.table.vocab.size();
    r.untrained_p_at_1 = training_p_at_1(split.train, untrained.table);
    cfg.epochs = epochs;
    r.trained_p_at_1 = training_p_at_1(split.train, boe::train(split, cfg).table);
    return r;
}

}  // namespace hybrid_rank::testing
