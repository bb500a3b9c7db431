#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"

#include "hybrid_rank/binary_io.hpp"
#include "hybrid_rank/corpus.hpp"
#include "hybrid_rank/errors.hpp"
#include "hybrid_rank/ranking.hpp"
#include "hybrid_rank/rng.hpp"
#include "hybrid_rank/util.hpp"

/// Bag-of-embeddings dual encoder: a text is the L2-normalized mean of its
/// token embeddings, and query/article relevance is the dot product of the
/// two unit vectors. Training minimizes a hinge loss against one in-batch
/// negative per query with (lazy) Adam.
namespace hybrid_rank::boe {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

enum class NegativeStrategy { per_paper_min, hardest_max, random };
enum class LossScore { cosine, sigmoid_cosine };

inline const char* to_string(NegativeStrategy s) {
    switch (s) {
    case NegativeStrategy::per_paper_min: return "per-paper-min";
    case NegativeStrategy::hardest_max: return "hardest-max";
    case NegativeStrategy::random: return "random";
    }
    return "?";
}

inline const char* to_string(LossScore s) { return s == LossScore::cosine ? "cosine" : "sigmoid-cosine"; }

inline NegativeStrategy parse_negative_strategy(std::string_view s) {
    if (s == "per-paper-min") {
        return NegativeStrategy::per_paper_min;
    }
    if (s == "hardest-max") {
        return NegativeStrategy::hardest_max;
    }
    if (s == "random") {
        return NegativeStrategy::random;
    }
    throw ConfigError("unknown negative strategy '" + std::string(s) + "'");
}

inline LossScore parse_loss_score(std::string_view s) {
    if (s == "cosine") {
        return LossScore::cosine;
    }
    if (s == "sigmoid-cosine") {
        return LossScore::sigmoid_cosine;
    }
    throw ConfigError("unknown loss score '" + std::string(s) + "'");
}

struct TrainConfig {
    double delta = 0.5;
    double lr = 0.001;
    std::size_t dim = 64;
    std::size_t batch_size = 64;
    std::size_t epochs = 10;
    NegativeStrategy neg_strategy = NegativeStrategy::per_paper_min;
    LossScore loss_score = LossScore::cosine;
    std::uint64_t seed = 42;
    std::size_t max_article_len = 1000;
    /// Tokens seen fewer times than this in the training split are OOV.
    std::size_t min_count = 2;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    void validate() const {
        if (!(delta > 0.0)) {
            throw ConfigError("delta must be > 0");
        }
        if (!(lr > 0.0)) {
            throw ConfigError("lr must be > 0");
        }
        if (dim < 1) {
            throw ConfigError("dim must be >= 1");
        }
        if (batch_size < 2) {
            throw ConfigError("batch_size must be >= 2");
        }
        if (max_article_len < 1) {
            throw ConfigError("max_article_len must be >= 1");
        }
    }

    [[nodiscard]] nlohmann::json to_json() const {
        return {{"delta", delta},
                {"lr", lr},
                {"dim", dim},
                {"batch_size", batch_size},
                {"epochs", epochs},
                {"neg_strategy", to_string(neg_strategy)},
                {"loss_score", to_string(loss_score)},
                {"seed", seed},
                {"max_article_len", max_article_len},
                {"min_count", min_count},
                {"beta1", beta1},
                {"beta2", beta2},
                {"eps", eps}};
    }

    [[nodiscard]] std::uint64_t hash() const { return fnv1a(to_json().dump()); }
};

// ---------------------------------------------------------------------------
// Embedding table
// ---------------------------------------------------------------------------

struct EmbeddingTable {
    std::unordered_map<std::string, std::uint32_t> vocab;
    std::vector<std::string> tokens;  // row id -> token
    std::size_t dim = 0;
    std::vector<double> weights;      // row-major |V| x dim

    [[nodiscard]] std::size_t rows() const noexcept { return tokens.size(); }

    [[nodiscard]] std::span<double> row(std::size_t r) { return {weights.data() + r * dim, dim}; }
    [[nodiscard]] std::span<const double> row(std::size_t r) const { return {weights.data() + r * dim, dim}; }

    [[nodiscard]] std::optional<std::uint32_t> lookup(const std::string& token) const {
        auto it = vocab.find(token);
        if (it == vocab.end()) {
            return std::nullopt;
        }
        return it->second;
    }

    bool operator==(const EmbeddingTable& o) const {
        return tokens == o.tokens && dim == o.dim && weights == o.weights;
    }
};

/// Sorted tokens of the training split (queries and truncated articles)
/// occurring at least `min_count` times.
inline std::vector<std::string> build_vocab(std::span<const QueryArticlePair> train, std::size_t min_count,
                                            std::size_t max_article_len) {
    std::unordered_map<std::string, std::size_t> freq;
    for (const auto& p : train) {
        for (const auto& t : p.query.tokens) {
            ++freq[t];
        }
        const auto n = std::min(p.article.tokens.size(), max_article_len);
        for (std::size_t i = 0; i < n; ++i) {
            ++freq[p.article.tokens[i]];
        }
    }
    std::vector<std::string> out;
    for (const auto& [t, c] : freq) {
        if (c >= min_count) {
            out.push_back(t);
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

/// Entries drawn i.i.d. uniform in [-0.05, 0.05) from `seed`.
inline EmbeddingTable init_table(std::span<const std::string> vocab, std::size_t dim, std::uint64_t seed) {
    if (vocab.empty()) {
        throw EmptyCorpus("cannot initialize an embedding table with an empty vocabulary");
    }
    if (dim < 1) {
        throw ConfigError("embedding dimension must be >= 1");
    }
    EmbeddingTable t;
    t.dim = dim;
    t.tokens.assign(vocab.begin(), vocab.end());
    for (std::uint32_t i = 0; i < t.tokens.size(); ++i) {
        if (!t.vocab.emplace(t.tokens[i], i).second) {
            throw ConfigError("duplicate vocabulary token '" + t.tokens[i] + "'");
        }
    }
    t.weights.resize(t.tokens.size() * dim);
    Rng rng(seed);
    for (double& w : t.weights) {
        w = (2.0 * uniform01(rng) - 1.0) * 0.05;
    }
    return t;
}

// ---------------------------------------------------------------------------
// Encoding and scoring
// ---------------------------------------------------------------------------

/// Token sequence reduced to (row, count) pairs over in-vocabulary tokens.
struct Bag {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> rows;
    std::uint32_t total = 0;
};

inline Bag make_bag(std::span<const std::string> tokens, const EmbeddingTable& table) {
    std::unordered_map<std::uint32_t, std::uint32_t> counts;
    Bag bag;
    for (const auto& t : tokens) {
        if (auto r = table.lookup(t)) {
            ++counts[*r];
            ++bag.total;
        }
    }
    bag.rows.assign(counts.begin(), counts.end());
    std::sort(bag.rows.begin(), bag.rows.end());
    return bag;
}

/// Unit-length encoding. `raw_norm` is the norm of the mean embedding;
/// zero means the input had no usable tokens and `unit` is all zeros.
struct Encoding {
    std::vector<double> unit;
    double raw_norm = 0.0;

    [[nodiscard]] bool degenerate() const noexcept { return raw_norm == 0.0; }
};

inline Encoding encode(const Bag& bag, const EmbeddingTable& table) {
    Encoding e;
    e.unit.assign(table.dim, 0.0);
    if (bag.total == 0) {
        return e;
    }
    for (auto [r, c] : bag.rows) {
        const auto w = table.row(r);
        const double cd = static_cast<double>(c);
        for (std::size_t k = 0; k < table.dim; ++k) {
            e.unit[k] += cd * w[k];
        }
    }
    const double inv_n = 1.0 / static_cast<double>(bag.total);
    double sq = 0.0;
    for (double& x : e.unit) {
        x *= inv_n;
        sq += x * x;
    }
    e.raw_norm = std::sqrt(sq);
    if (e.raw_norm == 0.0) {
        return e;
    }
    for (double& x : e.unit) {
        x /= e.raw_norm;
    }
    return e;
}

/// Mean of in-vocabulary token embeddings, L2-normalized. All-OOV or empty
/// input yields the zero vector.
inline Encoding encode(std::span<const std::string> tokens, const EmbeddingTable& table) {
    return encode(make_bag(tokens, table), table);
}

inline double raw_dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        s += a[k] * b[k];
    }
    return s;
}

/// Dot product of two encodings, in [-1, 1]; 0 if either is degenerate.
inline double score_embed(std::span<const double> q, std::span<const double> a) {
    return std::clamp(raw_dot(q, a), -1.0, 1.0);
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double score_sigmoid(std::span<const double> q, std::span<const double> a) { return sigmoid(score_embed(q, a)); }

/// max(0, delta - s_p + s_n)
inline double loss(double s_p, double s_n, double delta) { return std::max(0.0, delta - s_p + s_n); }

struct LossSample {
    double s_p = 0.0;
    double s_n = 0.0;
    double loss = 0.0;
};

// ---------------------------------------------------------------------------
// Negative selection
// ---------------------------------------------------------------------------

/// Picks the negative article for query `q_index` from a batch, given the
/// query's similarity to every article in the batch. The query's own
/// article is never chosen; ties go to the lower index.
inline std::size_t select_negative(std::span<const double> similarities, std::size_t q_index,
                                   NegativeStrategy strategy, Rng& rng) {
    const std::size_t n = similarities.size();
    if (n < 2) {
        throw SizeError("negative selection needs a batch of at least 2");
    }
    if (strategy == NegativeStrategy::random) {
        auto j = static_cast<std::size_t>(uniform_index(rng, n - 1));
        return j >= q_index ? j + 1 : j;
    }
    std::size_t best = q_index == 0 ? 1 : 0;
    for (std::size_t j = best + 1; j < n; ++j) {
        if (j == q_index) {
            continue;
        }
        const bool better = strategy == NegativeStrategy::per_paper_min ? similarities[j] < similarities[best]
                                                                       : similarities[j] > similarities[best];
        if (better) {
            best = j;
        }
    }
    return best;
}

/// Convenience overload that encodes the batch with `table` first.
inline std::size_t select_negative(std::span<const QueryArticlePair> batch, std::size_t q_index,
                                   const EmbeddingTable& table, NegativeStrategy strategy, Rng& rng) {
    const auto q = encode(batch[q_index].query.tokens, table);
    std::vector<double> sims(batch.size());
    for (std::size_t j = 0; j < batch.size(); ++j) {
        sims[j] = raw_dot(q.unit, encode(batch[j].article.tokens, table).unit);
    }
    return select_negative(sims, q_index, strategy, rng);
}

// ---------------------------------------------------------------------------
// Gradients and optimization
// ---------------------------------------------------------------------------

/// Bags of one training pair; articles are already truncated.
struct PairBags {
    Bag query;
    Bag article;
};

inline PairBags make_pair_bags(const QueryArticlePair& p, const EmbeddingTable& table, std::size_t max_article_len) {
    const auto n = std::min(p.article.tokens.size(), max_article_len);
    return {make_bag(p.query.tokens, table), make_bag(std::span(p.article.tokens).first(n), table)};
}

/// Sparse gradient of the summed batch loss: `rows` is sorted and `values`
/// holds dim entries per row.
struct BatchGradient {
    std::vector<std::uint32_t> rows;
    std::vector<double> values;
    std::vector<LossSample> samples;
    std::vector<std::size_t> negatives;
    double loss_sum = 0.0;

    [[nodiscard]] std::span<const double> row(std::size_t i, std::size_t dim) const {
        return {values.data() + i * dim, dim};
    }
};

namespace detail {

inline double score_value(double cosine, LossScore mode) { return mode == LossScore::cosine ? cosine : sigmoid(cosine); }

inline double score_slope(double cosine, LossScore mode) {
    if (mode == LossScore::cosine) {
        return 1.0;
    }
    const double s = sigmoid(cosine);
    return s * (1.0 - s);
}

inline bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace detail

/// Negatives for every query of a batch under `strategy`.
inline std::vector<std::size_t> choose_negatives(std::span<const Encoding> queries, std::span<const Encoding> articles,
                                                 NegativeStrategy strategy, Rng& rng) {
    std::vector<std::size_t> out(queries.size());
    std::vector<double> sims(articles.size());
    for (std::size_t i = 0; i < queries.size(); ++i) {
        for (std::size_t j = 0; j < articles.size(); ++j) {
            sims[j] = raw_dot(queries[i].unit, articles[j].unit);
        }
        out[i] = select_negative(sims, i, strategy, rng);
    }
    return out;
}

/// Loss and analytic gradient of sum_i max(0, delta - s(q_i, a_i) + s(q_i, a_neg(i)))
/// with the negatives held fixed. Gradients flow through the query, the
/// positive article and the negative article encodings.
inline BatchGradient batch_gradient(std::span<const PairBags> batch, const EmbeddingTable& table,
                                    const TrainConfig& cfg, std::span<const std::size_t> negatives) {
    const std::size_t n = batch.size();
    const std::size_t dim = table.dim;
    std::vector<Encoding> q_enc(n);
    std::vector<Encoding> a_enc(n);
    for (std::size_t i = 0; i < n; ++i) {
        q_enc[i] = encode(batch[i].query, table);
        a_enc[i] = encode(batch[i].article, table);
    }

    BatchGradient g;
    g.negatives.assign(negatives.begin(), negatives.end());
    g.samples.resize(n);
    std::vector<double> grad_q(n * dim, 0.0);
    std::vector<double> grad_a(n * dim, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = negatives[i];
        const double c_p = raw_dot(q_enc[i].unit, a_enc[i].unit);
        const double c_n = raw_dot(q_enc[i].unit, a_enc[j].unit);
        auto& s = g.samples[i];
        s.s_p = detail::score_value(c_p, cfg.loss_score);
        s.s_n = detail::score_value(c_n, cfg.loss_score);
        s.loss = loss(s.s_p, s.s_n, cfg.delta);
        if (!std::isfinite(s.loss)) {
            throw NonFiniteGradient(i, "non-finite loss for sample " + std::to_string(i));
        }
        g.loss_sum += s.loss;
        if (s.loss <= 0.0) {
            continue;
        }
        const double d_p = -detail::score_slope(c_p, cfg.loss_score);
        const double d_n = detail::score_slope(c_n, cfg.loss_score);
        for (std::size_t k = 0; k < dim; ++k) {
            grad_q[i * dim + k] += d_p * a_enc[i].unit[k] + d_n * a_enc[j].unit[k];
            grad_a[i * dim + k] += d_p * q_enc[i].unit[k];
            grad_a[j * dim + k] += d_n * q_enc[i].unit[k];
        }
    }

    // Back through normalization and the mean into embedding rows.
    std::unordered_map<std::uint32_t, std::size_t> slot;
    std::vector<double> acc;
    std::vector<double> g_mean(dim);
    auto backprop = [&](const Bag& bag, const Encoding& e, std::span<const double> g_unit, std::size_t sample) {
        if (e.degenerate() || std::all_of(g_unit.begin(), g_unit.end(), [](double x) { return x == 0.0; })) {
            return;
        }
        const double proj = raw_dot(e.unit, g_unit);
        for (std::size_t k = 0; k < dim; ++k) {
            g_mean[k] = (g_unit[k] - e.unit[k] * proj) / e.raw_norm;
        }
        if (!detail::all_finite(g_mean)) {
            throw NonFiniteGradient(sample, "non-finite gradient for sample " + std::to_string(sample));
        }
        const double inv_n = 1.0 / static_cast<double>(bag.total);
        for (auto [r, c] : bag.rows) {
            auto [it, inserted] = slot.emplace(r, acc.size() / dim);
            if (inserted) {
                acc.resize(acc.size() + dim, 0.0);
            }
            double* dst = acc.data() + it->second * dim;
            const double scale = static_cast<double>(c) * inv_n;
            for (std::size_t k = 0; k < dim; ++k) {
                dst[k] += scale * g_mean[k];
            }
        }
    };
    for (std::size_t i = 0; i < n; ++i) {
        backprop(batch[i].query, q_enc[i], std::span<const double>(grad_q).subspan(i * dim, dim), i);
    }
    for (std::size_t i = 0; i < n; ++i) {
        backprop(batch[i].article, a_enc[i], std::span<const double>(grad_a).subspan(i * dim, dim), i);
    }

    std::vector<std::pair<std::uint32_t, std::size_t>> order(slot.begin(), slot.end());
    std::sort(order.begin(), order.end());
    g.rows.reserve(order.size());
    g.values.reserve(order.size() * dim);
    for (auto [r, s] : order) {
        g.rows.push_back(r);
        g.values.insert(g.values.end(), acc.begin() + static_cast<std::ptrdiff_t>(s * dim),
                        acc.begin() + static_cast<std::ptrdiff_t>((s + 1) * dim));
    }
    if (!detail::all_finite(g.values)) {
        throw NonFiniteGradient(0, "non-finite accumulated gradient");
    }
    return g;
}

/// Adam moments for every table entry. Updates are lazy: only rows with a
/// nonzero gradient in a step are touched, while the bias-correction step
/// counter advances every step.
struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t t = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    static AdamState for_table(const EmbeddingTable& table, const TrainConfig& cfg) {
        AdamState s;
        s.m.assign(table.weights.size(), 0.0);
        s.v.assign(table.weights.size(), 0.0);
        s.beta1 = cfg.beta1;
        s.beta2 = cfg.beta2;
        s.eps = cfg.eps;
        return s;
    }
};

inline void apply_adam(const BatchGradient& g, EmbeddingTable& table, AdamState& adam, double lr) {
    if (adam.m.size() != table.weights.size() || adam.v.size() != table.weights.size()) {
        throw ShapeMismatch("Adam state does not match the embedding table");
    }
    ++adam.t;
    const double bc1 = 1.0 - std::pow(adam.beta1, static_cast<double>(adam.t));
    const double bc2 = 1.0 - std::pow(adam.beta2, static_cast<double>(adam.t));
    const std::size_t dim = table.dim;
    for (std::size_t i = 0; i < g.rows.size(); ++i) {
        const auto grad = g.row(i, dim);
        if (std::all_of(grad.begin(), grad.end(), [](double x) { return x == 0.0; })) {
            continue;
        }
        const std::size_t base = static_cast<std::size_t>(g.rows[i]) * dim;
        for (std::size_t k = 0; k < dim; ++k) {
            double& m = adam.m[base + k];
            double& v = adam.v[base + k];
            m = adam.beta1 * m + (1.0 - adam.beta1) * grad[k];
            v = adam.beta2 * v + (1.0 - adam.beta2) * grad[k] * grad[k];
            table.weights[base + k] -= lr * (m / bc1) / (std::sqrt(v / bc2) + adam.eps);
        }
    }
}

struct StepResult {
    double mean_loss = 0.0;
    std::vector<std::size_t> negatives;
};

/// One optimization step on a batch of bags: select negatives, compute the
/// gradient, apply Adam. The table is left untouched if the gradient is not
/// finite.
inline StepResult grad_step(std::span<const PairBags> batch, EmbeddingTable& table, AdamState& adam,
                            const TrainConfig& cfg, Rng& rng) {
    if (batch.size() < 2) {
        throw SizeError("a training batch needs at least 2 pairs");
    }
    std::vector<Encoding> q(batch.size());
    std::vector<Encoding> a(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        q[i] = encode(batch[i].query, table);
        a[i] = encode(batch[i].article, table);
    }
    auto negatives = choose_negatives(q, a, cfg.neg_strategy, rng);
    const auto g = batch_gradient(batch, table, cfg, negatives);
    apply_adam(g, table, adam, cfg.lr);
    return {g.loss_sum / static_cast<double>(batch.size()), std::move(negatives)};
}

inline StepResult grad_step(std::span<const QueryArticlePair> batch, EmbeddingTable& table, AdamState& adam,
                            const TrainConfig& cfg, Rng& rng) {
    std::vector<PairBags> bags;
    bags.reserve(batch.size());
    for (const auto& p : batch) {
        bags.push_back(make_pair_bags(p, table, cfg.max_article_len));
    }
    return grad_step(bags, table, adam, cfg, rng);
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

/// MRR of ranking every article of `pairs` for each query of `pairs`; the
/// relevant article is the query's own. Ties break on ascending pair id.
inline double pool_mrr(std::span<const QueryArticlePair> pairs, const EmbeddingTable& table) {
    if (pairs.empty()) {
        return 0.0;
    }
    std::vector<Encoding> q(pairs.size());
    std::vector<Encoding> a(pairs.size());
    std::vector<std::int64_t> ids(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        q[i] = encode(pairs[i].query.tokens, table);
        a[i] = encode(pairs[i].article.tokens, table);
        ids[i] = pairs[i].pair_id;
    }
    double sum = 0.0;
    std::vector<double> scores(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        for (std::size_t j = 0; j < pairs.size(); ++j) {
            scores[j] = score_embed(q[i].unit, a[j].unit);
        }
        sum += 1.0 / static_cast<double>(rank_of(scores, ids, i));
    }
    return sum / static_cast<double>(pairs.size());
}

struct EpochLog {
    std::size_t epoch = 0;
    double mean_loss = 0.0;
    std::optional<double> dev_mrr;
};

inline nlohmann::json to_json(const EpochLog& e) {
    nlohmann::json j{{"epoch", e.epoch}, {"mean_loss", e.mean_loss}};
    j["dev_mrr"] = e.dev_mrr ? nlohmann::json(*e.dev_mrr) : nlohmann::json(nullptr);
    return j;
}

struct TrainResult {
    EmbeddingTable table;
    std::vector<EpochLog> log;
    /// Epoch whose table was kept (0 = the initial table).
    std::size_t best_epoch = 0;
};

/// Trains on `split.train` for `cfg.epochs` seeded, shuffled epochs. With a
/// dev split the table of the epoch with the best dev MRR is returned
/// (earliest on ties); otherwise the final table.
inline TrainResult train(const DatasetSplit& split, const TrainConfig& cfg,
                         const std::function<void(const EpochLog&)>& on_epoch = {}) {
    cfg.validate();
    if (split.train.empty()) {
        throw EmptyCorpus("training split is empty");
    }
    const auto vocab = build_vocab(split.train, cfg.min_count, cfg.max_article_len);
    if (vocab.empty()) {
        throw EmptyCorpus("no training token reaches min_count " + std::to_string(cfg.min_count));
    }
    TrainResult result;
    result.table = init_table(vocab, cfg.dim, derive_seed(cfg.seed, "init"));
    if (cfg.epochs == 0) {
        return result;
    }

    std::vector<PairBags> bags;
    bags.reserve(split.train.size());
    for (const auto& p : split.train) {
        bags.push_back(make_pair_bags(p, result.table, cfg.max_article_len));
    }
    EmbeddingTable table = result.table;
    AdamState adam = AdamState::for_table(table, cfg);
    Rng shuffle_rng(derive_seed(cfg.seed, "shuffle"));
    Rng negative_rng(derive_seed(cfg.seed, "negatives"));
    std::vector<std::size_t> order(bags.size());
    std::vector<PairBags> batch;
    double best_mrr = -1.0;

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        shuffle(std::span<std::size_t>(order), shuffle_rng);
        double loss_sum = 0.0;
        std::size_t seen = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            if (end - start < 2) {
                continue;
            }
            batch.clear();
            for (std::size_t i = start; i < end; ++i) {
                batch.push_back(bags[order[i]]);
            }
            const auto step = grad_step(batch, table, adam, cfg, negative_rng);
            loss_sum += step.mean_loss * static_cast<double>(batch.size());
            seen += batch.size();
        }
        EpochLog entry;
        entry.epoch = epoch;
        entry.mean_loss = seen == 0 ? 0.0 : loss_sum / static_cast<double>(seen);
        if (!split.dev.empty()) {
            entry.dev_mrr = pool_mrr(split.dev, table);
            if (*entry.dev_mrr > best_mrr) {
                best_mrr = *entry.dev_mrr;
                result.table = table;
                result.best_epoch = epoch;
            }
        }
        result.log.push_back(entry);
        if (on_epoch) {
            on_epoch(entry);
        }
    }
    if (split.dev.empty()) {
        result.table = std::move(table);
        result.best_epoch = cfg.epochs;
    }
    return result;
}

inline std::string serialize_training_log(std::span<const EpochLog> log) {
    std::string out;
    for (const auto& e : log) {
        out += to_json(e).dump();
        out += '\n';
    }
    return out;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

inline constexpr std::uint32_t checkpoint_format_version = 1;

struct Checkpoint {
    EmbeddingTable table;
    std::uint64_t seed = 0;
    std::uint64_t config_hash = 0;
};

/// Header (magic, version, dim, |V|, seed, config hash), the vocabulary in
/// row order, then the row-major weights as little-endian doubles.
inline std::string serialize_checkpoint(const EmbeddingTable& table, std::uint64_t seed, std::uint64_t config_hash) {
    ByteWriter w;
    write_header(w, "HRBOECK1", checkpoint_format_version);
    w.put(static_cast<std::uint64_t>(table.dim));
    w.put(static_cast<std::uint64_t>(table.rows()));
    w.put(seed);
    w.put(config_hash);
    for (const auto& t : table.tokens) {
        w.put_string(t);
    }
    w.put_array(std::span<const double>(table.weights));
    return w.bytes();
}

inline Checkpoint parse_checkpoint(std::string_view bytes) {
    ByteReader r(bytes);
    read_header(r, "HRBOECK1", checkpoint_format_version);
    Checkpoint c;
    c.table.dim = r.get<std::uint64_t>();
    const auto n = r.get<std::uint64_t>();
    c.seed = r.get<std::uint64_t>();
    c.config_hash = r.get<std::uint64_t>();
    if (c.table.dim == 0) {
        throw FormatError("checkpoint has zero embedding dimension");
    }
    if (n > bytes.size() || c.table.dim > bytes.size()) {
        throw FormatError("checkpoint header declares more data than the file holds");
    }
    c.table.tokens.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        c.table.tokens.push_back(r.get_string());
        if (!c.table.vocab.emplace(c.table.tokens.back(), static_cast<std::uint32_t>(i)).second) {
            throw FormatError("checkpoint vocabulary has a duplicate token");
        }
    }
    c.table.weights = r.get_array<double>(n * c.table.dim);
    if (!r.at_end()) {
        throw FormatError("trailing bytes after checkpoint payload");
    }
    if (!detail::all_finite(c.table.weights)) {
        throw FormatError("checkpoint contains non-finite weights");
    }
    return c;
}

}  // namespace hybrid_rank::boe
