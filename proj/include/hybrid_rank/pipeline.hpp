#pragma once

#include <cstdlib>
#include <filesystem>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "hybrid_rank/boe.hpp"
#include "hybrid_rank/config.hpp"
#include "hybrid_rank/corpus.hpp"
#include "hybrid_rank/errors.hpp"
#include "hybrid_rank/evalx.hpp"
#include "hybrid_rank/fusion.hpp"
#include "hybrid_rank/problex.hpp"
#include "hybrid_rank/ranking.hpp"
#include "hybrid_rank/rng.hpp"
#include "hybrid_rank/stopwords.hpp"
#include "hybrid_rank/tfidf.hpp"
#include "hybrid_rank/util.hpp"

/// Command implementations behind the `hybrid-rank` CLI. Each command reads
/// the artifacts of earlier stages, writes its own atomically and returns a
/// JSON summary.
namespace hybrid_rank::pipeline {

namespace fs = std::filesystem;

inline constexpr const char* cache_dir_env = "HYBRID_RANK_CACHE_DIR";

struct Paths {
    fs::path out;
    fs::path cache;

    explicit Paths(const RunConfig& cfg) : out(cfg.output_dir) {
        const char* env = std::getenv(cache_dir_env);
        cache = env != nullptr && *env != '\0' ? fs::path(env) : out;
    }

    [[nodiscard]] fs::path corpus_cache() const { return cache / "corpus.cache.jsonl"; }
    [[nodiscard]] fs::path manifest() const { return cache / "split_manifest.jsonl"; }
    [[nodiscard]] fs::path ingest_report() const { return out / "ingest_report.json"; }
    [[nodiscard]] fs::path tfidf_vocab() const { return out / "tfidf.vocab.tsv"; }
    [[nodiscard]] fs::path tfidf_index() const { return out / "tfidf.index.csr"; }
    [[nodiscard]] fs::path lex_stats() const { return out / "lexstats.bin"; }
    [[nodiscard]] fs::path checkpoint() const { return out / "boe.checkpoint.bin"; }
    [[nodiscard]] fs::path train_log() const { return out / "train_log.jsonl"; }
    [[nodiscard]] fs::path tuned() const { return out / "tuned_params.json"; }
    [[nodiscard]] fs::path scores(std::string_view ranker) const { return out / ("scores." + std::string(ranker) + ".tsv"); }
    [[nodiscard]] fs::path topk(std::string_view ranker) const { return out / ("topk." + std::string(ranker) + ".tsv"); }
    [[nodiscard]] fs::path report(std::string_view name) const { return out / ("report." + std::string(name) + ".json"); }
    [[nodiscard]] fs::path per_query(std::string_view name) const { return out / ("per_query." + std::string(name) + ".tsv"); }
};

inline void require(const fs::path& p, std::string_view producer) {
    if (!fs::exists(p)) {
        throw MissingArtifact(p.string() + " not found; run `hybrid-rank " + std::string(producer) + "` first");
    }
}

inline std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// Loading shared state
// ---------------------------------------------------------------------------

/// All pairs (indexed by pair id) and the split they were assigned to.
struct Corpus {
    std::vector<QueryArticlePair> pairs;
    DatasetSplit split;
};

inline Corpus load_corpus(const RunConfig& cfg) {
    const Paths paths(cfg);
    require(paths.corpus_cache(), "ingest");
    require(paths.manifest(), "ingest");
    Corpus c;
    c.pairs = parse_corpus_cache(read_file(paths.corpus_cache()));
    for (std::size_t i = 0; i < c.pairs.size(); ++i) {
        if (c.pairs[i].pair_id != static_cast<std::int64_t>(i)) {
            throw FormatError("tokenized corpus pair ids are not dense");
        }
        if (cfg.truncate_everywhere) {
            c.pairs[i] = truncate_article(std::move(c.pairs[i]), cfg.model.max_article_len);
        }
    }
    c.split = parse_manifest(read_file(paths.manifest()), c.pairs);
    return c;
}

/// Every article of the corpus; TF-IDF and lexical statistics are fitted on
/// this collection and document index == pair id.
inline std::vector<Document> collection(const Corpus& c) {
    std::vector<Document> docs;
    docs.reserve(c.pairs.size());
    for (const auto& p : c.pairs) {
        docs.push_back(p.article);
    }
    return docs;
}

/// Test pairs that are ranked: the whole test split, or a seeded sample of
/// `pool_size` of them. Returned in ascending pair id order.
inline std::vector<QueryArticlePair> evaluation_pool(const RunConfig& cfg, const DatasetSplit& split) {
    std::vector<QueryArticlePair> pool = split.test;
    if (cfg.pool_size != 0 && cfg.pool_size < pool.size()) {
        Rng rng(cfg.pool_seed());
        shuffle(std::span<QueryArticlePair>(pool), rng);
        pool.resize(cfg.pool_size);
    }
    std::sort(pool.begin(), pool.end(), [](const auto& a, const auto& b) { return a.pair_id < b.pair_id; });
    return pool;
}

inline std::vector<std::string> pair_ids(const std::vector<QueryArticlePair>& pairs) {
    std::vector<std::string> ids;
    ids.reserve(pairs.size());
    for (const auto& p : pairs) {
        ids.push_back(std::to_string(p.pair_id));
    }
    return ids;
}

/// BM25 / LM parameters: tuned values when a tuning artifact exists,
/// otherwise the config.
struct LexParams {
    problex::Bm25Params bm25;
    problex::DirichletParams lm;
    bool tuned = false;
};

inline LexParams lex_params(const RunConfig& cfg) {
    const Paths paths(cfg);
    LexParams p{cfg.bm25, cfg.lm, false};
    if (fs::exists(paths.tuned())) {
        auto j = nlohmann::json::parse(read_file(paths.tuned()), nullptr, false);
        if (j.is_discarded()) {
            throw FormatError(paths.tuned().string() + " is not valid JSON");
        }
        p.bm25 = {j.at("bm25").at("k1").get<double>(), j.at("bm25").at("b").get<double>()};
        p.lm = {j.at("lm").at("mu").get<double>()};
        p.tuned = true;
    }
    return p;
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

inline nlohmann::json cmd_ingest(const RunConfig& cfg) {
    const Paths paths(cfg);
    auto ingested = ingest(cfg.corpus_path, cfg.corpus_format, cfg.fields, cfg.threads);
    PairConfig pc;
    pc.tokenizer = cfg.tokenizer;
    pc.min_query_len = cfg.min_query_len;
    auto built = build_pairs(ingested.records, cfg.corpus_format, pc, cfg.threads);
    auto split = make_splits(built.pairs, cfg.splits, cfg.split_seed());

    write_file_atomic(paths.corpus_cache(), serialize_corpus_cache(built.pairs));
    write_file_atomic(paths.manifest(), serialize_manifest(split));

    nlohmann::json reasons = nlohmann::json::object();
    for (const auto& [k, v] : built.reject_reasons) {
        reasons[k] = v;
    }
    nlohmann::json report{{"command", "ingest"},
                          {"records", ingested.records.size()},
                          {"lines", ingested.lines},
                          {"malformed", ingested.malformed},
                          {"warnings", ingested.warnings},
                          {"pairs", built.pairs.size()},
                          {"rejected", built.rejected},
                          {"reject_reasons", reasons},
                          {"splits", {{"train", split.train.size()}, {"dev", split.dev.size()}, {"test", split.test.size()}}}};
    write_file_atomic(paths.ingest_report(), dump(report));
    return report;
}

inline nlohmann::json cmd_fit(const RunConfig& cfg) {
    const Paths paths(cfg);
    const auto corpus = load_corpus(cfg);
    const auto docs = collection(corpus);
    const auto model = tfidf::fit(docs, default_stopwords());
    const auto index = tfidf::build_index(docs, model, cfg.threads);
    const auto stats = problex::build_lex_stats(docs, default_stopwords());
    write_file_atomic(paths.tfidf_vocab(), tfidf::serialize_model(model));
    write_file_atomic(paths.tfidf_index(), tfidf::serialize_index(index));
    write_file_atomic(paths.lex_stats(), problex::serialize_lex_stats(stats));
    return {{"command", "fit"},
            {"n_docs", model.n_docs},
            {"tfidf_terms", model.vocab_size()},
            {"lex_terms", stats.terms.size()},
            {"avg_doc_len", stats.avg_doc_len}};
}

inline nlohmann::json cmd_train(const RunConfig& cfg) {
    const Paths paths(cfg);
    const auto corpus = load_corpus(cfg);
    auto result = boe::train(corpus.split, cfg.model);
    write_file_atomic(paths.checkpoint(), boe::serialize_checkpoint(result.table, cfg.model.seed, cfg.model.hash()));
    write_file_atomic(paths.train_log(), boe::serialize_training_log(result.log));
    nlohmann::json j{{"command", "train"},
                     {"epochs", result.log.size()},
                     {"best_epoch", result.best_epoch},
                     {"vocab", result.table.rows()},
                     {"dim", result.table.dim}};
    if (!result.log.empty()) {
        j["final_mean_loss"] = result.log.back().mean_loss;
    }
    return j;
}

/// Dev ranking task for tuning: the first `tuning_dev_queries` dev queries
/// against every dev article.
inline evalx::LexTask dev_task(const RunConfig& cfg, const Corpus& corpus, const problex::LexStats& stats) {
    evalx::LexTask task;
    const auto& dev = corpus.split.dev;
    for (const auto& p : dev) {
        task.pool.push_back(static_cast<std::size_t>(p.pair_id));
        task.pool_ids.push_back(p.pair_id);
    }
    const std::size_t n = std::min(cfg.tuning_dev_queries, dev.size());
    for (std::size_t i = 0; i < n; ++i) {
        task.queries.push_back(problex::prepare_query(dev[i].query.tokens, stats));
        task.gold.push_back(i);
    }
    return task;
}

inline nlohmann::json cmd_tune(const RunConfig& cfg) {
    const Paths paths(cfg);
    require(paths.lex_stats(), "fit");
    const auto corpus = load_corpus(cfg);
    if (corpus.split.dev.empty()) {
        throw SizeError("tuning needs a non-empty dev split");
    }
    const auto stats = problex::parse_lex_stats(read_file(paths.lex_stats()));
    const auto task = dev_task(cfg, corpus, stats);
    const auto bm25 = evalx::tune_bm25(task, stats, cfg.threads);
    const auto lm = evalx::tune_mu(task, stats, cfg.threads);

    nlohmann::json bm25_grid = nlohmann::json::array();
    for (const auto& g : bm25.grid) {
        bm25_grid.push_back({{"k1", g.params.k1}, {"b", g.params.b}, {"mrr", g.objective}});
    }
    nlohmann::json lm_grid = nlohmann::json::array();
    for (const auto& g : lm.grid) {
        lm_grid.push_back({{"mu", g.params.mu}, {"mrr", g.objective}});
    }
    nlohmann::json j{{"format", "hybrid-rank.tuned-params"},
                     {"version", 1},
                     {"objective", "mrr"},
                     {"n_dev_queries", task.queries.size()},
                     {"pool_size", task.pool.size()},
                     {"bm25", {{"k1", bm25.best.k1}, {"b", bm25.best.b}, {"dev_mrr", bm25.best_objective}, {"grid", bm25_grid}}},
                     {"lm", {{"mu", lm.best.mu}, {"dev_mrr", lm.best_objective}, {"grid", lm_grid}}}};
    write_file_atomic(paths.tuned(), dump(j));
    return {{"command", "tune"},
            {"bm25", {{"k1", bm25.best.k1}, {"b", bm25.best.b}, {"dev_mrr", bm25.best_objective}}},
            {"lm", {{"mu", lm.best.mu}, {"dev_mrr", lm.best_objective}}}};
}

/// Score matrix of `ranker` over the evaluation pool (queries x articles,
/// ids are pair ids).
inline fusion::ScoreMatrix score_matrix(const RunConfig& cfg, Ranker ranker) {
    const Paths paths(cfg);
    const auto corpus = load_corpus(cfg);
    const auto pool = evaluation_pool(cfg, corpus.split);
    const auto ids = pair_ids(pool);
    fusion::ScoreMatrix m(ids, ids, to_string(ranker));
    const std::size_t n = pool.size();

    switch (ranker) {
    case Ranker::tfidf: {
        require(paths.tfidf_vocab(), "fit");
        require(paths.tfidf_index(), "fit");
        const auto model = tfidf::parse_model(read_file(paths.tfidf_vocab()));
        const auto index = tfidf::parse_index(read_file(paths.tfidf_index()));
        if (index.rows.size() != corpus.pairs.size()) {
            throw FormatError("TF-IDF index does not match the tokenized corpus");
        }
        parallel_for(n, cfg.threads, [&](std::size_t q) {
            const auto v = tfidf::transform(pool[q].query, model);
            for (std::size_t d = 0; d < n; ++d) {
                m.at(q, d) = tfidf::score(v, index.rows[static_cast<std::size_t>(pool[d].pair_id)]);
            }
        });
        break;
    }
    case Ranker::bm25:
    case Ranker::lm: {
        require(paths.lex_stats(), "fit");
        const auto stats = problex::parse_lex_stats(read_file(paths.lex_stats()));
        if (stats.n_docs != corpus.pairs.size()) {
            throw FormatError("lexical statistics do not match the tokenized corpus");
        }
        const auto params = lex_params(cfg);
        parallel_for(n, cfg.threads, [&](std::size_t q) {
            const auto pq = problex::prepare_query(pool[q].query.tokens, stats);
            for (std::size_t d = 0; d < n; ++d) {
                const auto doc = static_cast<std::size_t>(pool[d].pair_id);
                m.at(q, d) = ranker == Ranker::bm25 ? problex::bm25_score(pq, doc, stats, params.bm25)
                                                    : problex::lm_dirichlet_score(pq, doc, stats, params.lm);
            }
        });
        break;
    }
    case Ranker::boe: {
        require(paths.checkpoint(), "train");
        const auto ck = boe::parse_checkpoint(read_file(paths.checkpoint()));
        std::vector<boe::Encoding> articles(n);
        parallel_for(n, cfg.threads, [&](std::size_t d) { articles[d] = boe::encode(pool[d].article.tokens, ck.table); });
        parallel_for(n, cfg.threads, [&](std::size_t q) {
            const auto v = boe::encode(pool[q].query.tokens, ck.table);
            for (std::size_t d = 0; d < n; ++d) {
                m.at(q, d) = boe::score_embed(v.unit, articles[d].unit);
            }
        });
        break;
    }
    case Ranker::fused: {
        auto a = score_matrix(cfg, Ranker::tfidf);
        auto b = score_matrix(cfg, Ranker::boe);
        if (cfg.minmax_before_fusion) {
            a = fusion::minmax_normalize(a);
            b = fusion::minmax_normalize(b);
        }
        m = fusion::fuse(a, b);
        break;
    }
    }
    return fusion::normalize_order(m);
}

/// query_id, rank, doc_id, score, source_id for the top-k of every query.
inline std::string topk_listing(const fusion::ScoreMatrix& m, std::size_t k,
                                const std::unordered_map<std::string, std::string>& source_ids) {
    std::string out = "#query_id\trank\tdoc_id\tscore\tsource_id\n";
    std::vector<std::int64_t> cols(m.n_docs());
    std::iota(cols.begin(), cols.end(), std::int64_t{0});
    for (std::size_t q = 0; q < m.n_queries(); ++q) {
        const auto top = top_k(m.row(q), cols, k);
        for (std::size_t r = 0; r < top.size(); ++r) {
            const auto& doc = m.doc_ids[static_cast<std::size_t>(top[r].doc_id)];
            auto src = source_ids.find(doc);
            out += m.query_ids[q] + '\t' + std::to_string(r + 1) + '\t' + doc + '\t' + format_double(top[r].score) +
                   '\t' + (src == source_ids.end() ? std::string() : src->second) + '\n';
        }
    }
    return out;
}

inline nlohmann::json cmd_rank(const RunConfig& cfg, Ranker ranker) {
    const Paths paths(cfg);
    const auto m = score_matrix(cfg, ranker);
    const auto corpus = load_corpus(cfg);
    std::unordered_map<std::string, std::string> sources;
    for (const auto& p : corpus.pairs) {
        sources.emplace(std::to_string(p.pair_id), p.article.source_id);
    }
    fusion::export_scores(m, paths.scores(to_string(ranker)));
    write_file_atomic(paths.topk(to_string(ranker)), topk_listing(m, cfg.top_k, sources));
    return {{"command", "rank"},
            {"ranker", to_string(ranker)},
            {"n_queries", m.n_queries()},
            {"pool_size", m.n_docs()},
            {"scores", paths.scores(to_string(ranker)).string()},
            {"topk", paths.topk(to_string(ranker)).string()}};
}

inline nlohmann::json cmd_fuse(const RunConfig& cfg, const std::vector<fs::path>& inputs, const fs::path& out_path) {
    std::vector<fusion::ScoreMatrix> matrices;
    for (const auto& p : inputs) {
        if (!fs::exists(p)) {
            throw MissingArtifact(p.string() + " not found");
        }
        auto m = fusion::import_scores(p);
        matrices.push_back(cfg.minmax_before_fusion ? fusion::minmax_normalize(m) : std::move(m));
    }
    const auto fused = fusion::fuse_all(matrices);
    fusion::export_scores(fused, out_path);
    return {{"command", "fuse"},
            {"inputs", inputs.size()},
            {"source", fused.source},
            {"n_queries", fused.n_queries()},
            {"pool_size", fused.n_docs()},
            {"output", out_path.string()}};
}

/// Gold mapping: every query id is relevant to the article with the same
/// pair id, unless a query_id<TAB>doc_id file is given.
inline std::unordered_map<std::string, std::string> load_gold(const fusion::ScoreMatrix& m, const fs::path& gold_path) {
    std::unordered_map<std::string, std::string> gold;
    if (gold_path.empty()) {
        for (const auto& q : m.query_ids) {
            gold.emplace(q, q);
        }
        return gold;
    }
    std::istringstream in(read_file(gold_path));
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line.front() == '#') {
            continue;
        }
        const auto tab = line.find('\t');
        if (tab == std::string::npos) {
            throw ParseError(line_no, "gold file expects query_id<TAB>doc_id");
        }
        gold[line.substr(0, tab)] = line.substr(tab + 1);
    }
    return gold;
}

/// Evaluates either an existing score file or a ranker computed on the fly.
inline nlohmann::json cmd_evaluate(const RunConfig& cfg, const fs::path& scores_path, std::optional<Ranker> ranker,
                                   const fs::path& gold_path = {}, bool write_per_query = true) {
    const Paths paths(cfg);
    fusion::ScoreMatrix m;
    std::string name;
    if (!scores_path.empty()) {
        if (!fs::exists(scores_path)) {
            throw MissingArtifact(scores_path.string() + " not found");
        }
        m = fusion::import_scores(scores_path);
        name = scores_path.stem().string();
    } else {
        const Ranker r = ranker.value_or(cfg.ranker);
        m = score_matrix(cfg, r);
        name = to_string(r);
    }
    const auto report = evalx::evaluate(m, load_gold(m, gold_path), cfg.eval_ks, cfg.threads);
    const auto j = evalx::to_json(report);
    write_file_atomic(paths.report(name), dump(j));
    if (write_per_query) {
        write_file_atomic(paths.per_query(name), evalx::per_query_tsv(report));
    }
    return j;
}

}  // namespace hybrid_rank::pipeline
