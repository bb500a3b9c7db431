#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "hybrid_rank/errors.hpp"
#include "hybrid_rank/fusion.hpp"
#include "hybrid_rank/problex.hpp"
#include "hybrid_rank/ranking.hpp"
#include "hybrid_rank/util.hpp"

namespace hybrid_rank::evalx {

struct RankOutcome {
    std::string query_id;
    std::size_t rank_of_relevant = 0;

    bool operator==(const RankOutcome&) const = default;
};

struct EvalReport {
    double mrr = 0.0;
    std::map<std::size_t, double> p_at;
    std::size_t n_queries = 0;
    std::size_t pool_size = 0;
    std::vector<RankOutcome> per_query;

    bool operator==(const EvalReport&) const = default;
};

/// Rank of the gold document within one score row, counting documents that
/// score higher or tie with a smaller id.
inline std::size_t gold_rank(std::span<const double> row, std::span<const std::string> doc_ids, std::size_t gold) {
    const double g = row[gold];
    std::size_t rank = 1;
    for (std::size_t j = 0; j < row.size(); ++j) {
        if (j == gold) {
            continue;
        }
        if (row[j] > g || (row[j] == g && id_less(doc_ids[j], doc_ids[gold]))) {
            ++rank;
        }
    }
    return rank;
}

/// Builds a report from per-query ranks.
inline EvalReport summarize(std::vector<RankOutcome> outcomes, std::size_t pool_size,
                            std::span<const std::size_t> ks = std::array<std::size_t, 3>{1, 3, 10}) {
    EvalReport r;
    r.n_queries = outcomes.size();
    r.pool_size = pool_size;
    if (outcomes.empty()) {
        for (auto k : ks) {
            r.p_at[k] = 0.0;
        }
        return r;
    }
    double rr = 0.0;
    for (const auto& o : outcomes) {
        rr += 1.0 / static_cast<double>(o.rank_of_relevant);
    }
    r.mrr = rr / static_cast<double>(outcomes.size());
    for (auto k : ks) {
        const auto hits = std::count_if(outcomes.begin(), outcomes.end(),
                                        [k](const RankOutcome& o) { return o.rank_of_relevant <= k; });
        r.p_at[k] = static_cast<double>(hits) / static_cast<double>(outcomes.size());
    }
    r.per_query = std::move(outcomes);
    return r;
}

/// MRR and P@k of `scores` against one relevant document per query. Every
/// query row must have a gold entry present among the matrix's doc ids.
inline EvalReport evaluate(const fusion::ScoreMatrix& scores, const std::unordered_map<std::string, std::string>& gold,
                           std::span<const std::size_t> ks = std::array<std::size_t, 3>{1, 3, 10},
                           unsigned threads = 1) {
    scores.validate();
    std::unordered_map<std::string, std::size_t> doc_pos;
    for (std::size_t j = 0; j < scores.doc_ids.size(); ++j) {
        doc_pos.emplace(scores.doc_ids[j], j);
    }
    std::vector<std::size_t> gold_col(scores.n_queries());
    for (std::size_t q = 0; q < scores.n_queries(); ++q) {
        auto g = gold.find(scores.query_ids[q]);
        if (g == gold.end()) {
            throw MissingGold("no relevant document for query '" + scores.query_ids[q] + "'");
        }
        auto d = doc_pos.find(g->second);
        if (d == doc_pos.end()) {
            throw MissingGold("relevant document '" + g->second + "' of query '" + scores.query_ids[q] +
                              "' is not in the score matrix");
        }
        gold_col[q] = d->second;
    }
    std::vector<RankOutcome> outcomes(scores.n_queries());
    parallel_for(scores.n_queries(), threads, [&](std::size_t q) {
        outcomes[q] = {scores.query_ids[q], gold_rank(scores.row(q), scores.doc_ids, gold_col[q])};
    });
    return summarize(std::move(outcomes), scores.n_docs(), ks);
}

inline nlohmann::json to_json(const EvalReport& r) {
    nlohmann::json j{{"mrr", r.mrr}, {"n_queries", r.n_queries}, {"pool_size", r.pool_size}};
    for (const auto& [k, v] : r.p_at) {
        j["p_at_" + std::to_string(k)] = v;
    }
    return j;
}

/// query_id<TAB>rank rows with a header line.
inline std::string per_query_tsv(const EvalReport& r) {
    std::string out = "#query_id\trank\n";
    for (const auto& o : r.per_query) {
        out += o.query_id + '\t' + std::to_string(o.rank_of_relevant) + '\n';
    }
    return out;
}

// ---------------------------------------------------------------------------
// Grid search
// ---------------------------------------------------------------------------

template <typename Params>
struct GridPoint {
    Params params;
    double objective = 0.0;
};

template <typename Params>
struct TuneResult {
    Params best;
    double best_objective = 0.0;
    std::vector<GridPoint<Params>> grid;
};

/// Evaluates `objective` on every candidate and returns the maximizer. Ties
/// go to the lexicographically smallest parameter tuple.
template <typename Params, typename Objective>
TuneResult<Params> grid_search(std::span<const Params> candidates, Objective&& objective) {
    if (candidates.empty()) {
        throw UsageError("grid search needs at least one candidate");
    }
    TuneResult<Params> out;
    out.grid.reserve(candidates.size());
    bool first = true;
    for (const auto& p : candidates) {
        const double v = objective(p);
        out.grid.push_back({p, v});
        if (first || v > out.best_objective || (v == out.best_objective && p < out.best)) {
            out.best = p;
            out.best_objective = v;
            first = false;
        }
    }
    return out;
}

/// k1 in 0.5..5.0 step 0.5 crossed with b in 0.3..0.9 step 0.1 (70 points).
inline std::vector<problex::Bm25Params> bm25_grid() {
    std::vector<problex::Bm25Params> g;
    for (int i = 1; i <= 10; ++i) {
        for (int j = 3; j <= 9; ++j) {
            g.push_back({i * 0.5, j / 10.0});
        }
    }
    return g;
}

inline std::vector<problex::DirichletParams> mu_grid() {
    std::vector<problex::DirichletParams> g;
    for (double mu : {100.0, 200.0, 300.0, 400.0, 500.0, 1000.0, 1500.0, 2000.0, 2500.0, 3000.0}) {
        g.push_back({mu});
    }
    return g;
}

/// A ranking problem over documents of a LexStats collection: each query
/// is scored against `pool` and its relevant document is `pool[gold[i]]`.
struct LexTask {
    std::vector<problex::PreparedQuery> queries;
    std::vector<std::size_t> gold;
    std::vector<std::size_t> pool;
    /// Tie-break key of each pool entry (ascending wins).
    std::vector<std::int64_t> pool_ids;
};

template <typename Scorer>
double task_mrr(const LexTask& task, Scorer&& scorer, unsigned threads = 1) {
    if (task.queries.empty()) {
        return 0.0;
    }
    std::vector<double> rr(task.queries.size());
    parallel_for(task.queries.size(), threads, [&](std::size_t i) {
        std::vector<double> scores(task.pool.size());
        for (std::size_t j = 0; j < task.pool.size(); ++j) {
            scores[j] = scorer(task.queries[i], task.pool[j]);
        }
        rr[i] = 1.0 / static_cast<double>(rank_of(scores, task.pool_ids, task.gold[i]));
    });
    double sum = 0.0;
    for (double x : rr) {
        sum += x;
    }
    return sum / static_cast<double>(rr.size());
}

/// Grid search of BM25 (k1, b) by dev MRR.
inline TuneResult<problex::Bm25Params> tune_bm25(const LexTask& dev, const problex::LexStats& stats, unsigned threads = 1) {
    if (dev.queries.empty()) {
        throw EmptyCorpus("BM25 tuning needs at least one dev query");
    }
    const auto grid = bm25_grid();
    return grid_search<problex::Bm25Params>(grid, [&](const problex::Bm25Params& p) {
        return task_mrr(dev, [&](const problex::PreparedQuery& q, std::size_t d) { return problex::bm25_score(q, d, stats, p); },
                        threads);
    });
}

/// Grid search of the Dirichlet mu by dev MRR.
inline TuneResult<problex::DirichletParams> tune_mu(const LexTask& dev, const problex::LexStats& stats, unsigned threads = 1) {
    if (dev.queries.empty()) {
        throw EmptyCorpus("Dirichlet tuning needs at least one dev query");
    }
    const auto grid = mu_grid();
    return grid_search<problex::DirichletParams>(grid, [&](const problex::DirichletParams& p) {
        return task_mrr(
            dev, [&](const problex::PreparedQuery& q, std::size_t d) { return problex::lm_dirichlet_score(q, d, stats, p); },
            threads);
    });
}

}  // namespace hybrid_rank::evalx
