#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "hybrid_rank/boe.hpp"
#include "hybrid_rank/corpus.hpp"
#include "hybrid_rank/errors.hpp"
#include "hybrid_rank/problex.hpp"
#include "hybrid_rank/util.hpp"

namespace hybrid_rank {

enum class Ranker { tfidf, bm25, lm, boe, fused };

inline Ranker parse_ranker(std::string_view s) {
    if (s == "tfidf") {
        return Ranker::tfidf;
    }
    if (s == "bm25") {
        return Ranker::bm25;
    }
    if (s == "lm") {
        return Ranker::lm;
    }
    if (s == "boe") {
        return Ranker::boe;
    }
    if (s == "fused") {
        return Ranker::fused;
    }
    throw UsageError("unknown ranker '" + std::string(s) + "' (expected tfidf|bm25|lm|boe|fused)");
}

inline const char* to_string(Ranker r) {
    switch (r) {
    case Ranker::tfidf: return "tfidf";
    case Ranker::bm25: return "bm25";
    case Ranker::lm: return "lm";
    case Ranker::boe: return "boe";
    case Ranker::fused: return "fused";
    }
    return "?";
}

/// Everything a pipeline run needs. Loaded from one JSON file; unknown keys
/// are rejected and relative paths resolve against the file's directory.
struct RunConfig {
    std::filesystem::path corpus_path;
    CorpusFormat corpus_format = CorpusFormat::news;
    FieldMap fields;

    TokenizerConfig tokenizer;
    std::size_t min_query_len = 5;
    /// Truncate articles to max_article_len for indexing and evaluation too.
    bool truncate_everywhere = false;

    SplitSizes splits{0, 0, 0};

    boe::TrainConfig model;
    problex::Bm25Params bm25;
    problex::DirichletParams lm;
    std::size_t tuning_dev_queries = 100;

    Ranker ranker = Ranker::fused;
    std::size_t top_k = 10;
    /// 0 ranks the full test pool; otherwise a seeded sample of this many pairs.
    std::size_t pool_size = 0;
    bool minmax_before_fusion = false;
    std::vector<std::size_t> eval_ks{1, 3, 10};

    std::filesystem::path output_dir = "out";
    std::uint64_t seed = 42;
    unsigned threads = 1;
    bool deterministic = true;

    void validate() const {
        if (corpus_path.empty()) {
            throw ConfigError("corpus.path is required");
        }
        if (splits.train == 0) {
            throw ConfigError("splits.train must be > 0");
        }
        if (min_query_len == 0) {
            throw ConfigError("tokenizer.min_query_len must be >= 1");
        }
        if (top_k == 0) {
            throw ConfigError("ranking.top_k must be >= 1");
        }
        if (!(bm25.k1 > 0.0) || bm25.b < 0.0 || bm25.b > 1.0) {
            throw ConfigError("bm25 needs k1 > 0 and b in [0, 1]");
        }
        if (!(lm.mu > 0.0)) {
            throw ConfigError("lm.mu must be > 0");
        }
        if (tuning_dev_queries == 0) {
            throw ConfigError("tuning.dev_queries must be >= 1");
        }
        if (eval_ks.empty()) {
            throw ConfigError("eval.ks must not be empty");
        }
        for (auto k : eval_ks) {
            if (k == 0) {
                throw ConfigError("eval.ks entries must be >= 1");
            }
        }
        if (threads == 0) {
            throw ConfigError("threads must be >= 1");
        }
        model.validate();
    }

    /// Named sub-seeds; every random stage draws from its own stream.
    [[nodiscard]] std::uint64_t split_seed() const { return derive_seed(seed, "split"); }
    [[nodiscard]] std::uint64_t train_seed() const { return derive_seed(seed, "train"); }
    [[nodiscard]] std::uint64_t pool_seed() const { return derive_seed(seed, "pool"); }
};

namespace detail {

/// Walks a JSON object, handing each known key to `handler` and rejecting
/// the rest.
template <typename Handler>
void for_each_key(const nlohmann::json& obj, std::string_view where, const std::set<std::string, std::less<>>& allowed,
                  Handler&& handler) {
    if (!obj.is_object()) {
        throw ConfigError(std::string(where) + " must be an object");
    }
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (!allowed.contains(it.key())) {
            throw ConfigError("unknown config key '" + std::string(where) + (where.empty() ? "" : ".") + it.key() + "'");
        }
        try {
            handler(it.key(), it.value());
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("bad value for '" + std::string(where) + (where.empty() ? "" : ".") + it.key() +
                              "': " + e.what());
        }
    }
}

inline std::size_t as_count(const nlohmann::json& v) {
    if (v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
        return v.get<std::size_t>();
    }
    throw ConfigError("expected a non-negative integer, got " + v.dump());
}

}  // namespace detail

/// Builds a RunConfig from parsed JSON. `base_dir` anchors relative paths.
inline RunConfig parse_run_config(const nlohmann::json& root, const std::filesystem::path& base_dir = {}) {
    RunConfig c;
    auto resolve = [&](const std::string& p) {
        std::filesystem::path path(p);
        return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
    };
    detail::for_each_key(
        root, "",
        {"corpus", "tokenizer", "splits", "model", "bm25", "lm", "tuning", "ranking", "eval", "output_dir", "seed",
         "threads", "deterministic"},
        [&](const std::string& key, const nlohmann::json& v) {
            if (key == "corpus") {
                detail::for_each_key(v, "corpus", {"path", "format", "fields"}, [&](const std::string& k, const nlohmann::json& x) {
                    if (k == "path") {
                        c.corpus_path = resolve(x.get<std::string>());
                    } else if (k == "format") {
                        c.corpus_format = parse_corpus_format(x.get<std::string>());
                    } else {
                        detail::for_each_key(x, "corpus.fields", {"id", "title", "body", "question", "article"},
                                             [&](const std::string& f, const nlohmann::json& name) {
                                                 auto s = name.get<std::string>();
                                                 if (f == "id") {
                                                     c.fields.id = s;
                                                 } else if (f == "title") {
                                                     c.fields.title = s;
                                                 } else if (f == "body") {
                                                     c.fields.body = s;
                                                 } else if (f == "question") {
                                                     c.fields.question = s;
                                                 } else {
                                                     c.fields.article = s;
                                                 }
                                             });
                    }
                });
            } else if (key == "tokenizer") {
                detail::for_each_key(v, "tokenizer", {"lowercase", "keep_numeric", "min_query_len", "truncate_everywhere"},
                                     [&](const std::string& k, const nlohmann::json& x) {
                                         if (k == "lowercase") {
                                             c.tokenizer.lowercase = x.get<bool>();
                                         } else if (k == "keep_numeric") {
                                             c.tokenizer.keep_numeric = x.get<bool>();
                                         } else if (k == "min_query_len") {
                                             c.min_query_len = detail::as_count(x);
                                         } else {
                                             c.truncate_everywhere = x.get<bool>();
                                         }
                                     });
            } else if (key == "splits") {
                detail::for_each_key(v, "splits", {"train", "dev", "test"}, [&](const std::string& k, const nlohmann::json& x) {
                    (k == "train" ? c.splits.train : k == "dev" ? c.splits.dev : c.splits.test) = detail::as_count(x);
                });
            } else if (key == "model") {
                detail::for_each_key(v, "model",
                                     {"delta", "lr", "dim", "batch_size", "epochs", "neg_strategy", "loss_score",
                                      "max_article_len", "min_count", "beta1", "beta2", "eps"},
                                     [&](const std::string& k, const nlohmann::json& x) {
                                         auto& m = c.model;
                                         if (k == "delta") {
                                             m.delta = x.get<double>();
                                         } else if (k == "lr") {
                                             m.lr = x.get<double>();
                                         } else if (k == "dim") {
                                             m.dim = detail::as_count(x);
                                         } else if (k == "batch_size") {
                                             m.batch_size = detail::as_count(x);
                                         } else if (k == "epochs") {
                                             m.epochs = detail::as_count(x);
                                         } else if (k == "neg_strategy") {
                                             m.neg_strategy = boe::parse_negative_strategy(x.get<std::string>());
                                         } else if (k == "loss_score") {
                                             m.loss_score = boe::parse_loss_score(x.get<std::string>());
                                         } else if (k == "max_article_len") {
                                             m.max_article_len = detail::as_count(x);
                                         } else if (k == "min_count") {
                                             m.min_count = detail::as_count(x);
                                         } else if (k == "beta1") {
                                             m.beta1 = x.get<double>();
                                         } else if (k == "beta2") {
                                             m.beta2 = x.get<double>();
                                         } else {
                                             m.eps = x.get<double>();
                                         }
                                     });
            } else if (key == "bm25") {
                detail::for_each_key(v, "bm25", {"k1", "b"}, [&](const std::string& k, const nlohmann::json& x) {
                    (k == "k1" ? c.bm25.k1 : c.bm25.b) = x.get<double>();
                });
            } else if (key == "lm") {
                detail::for_each_key(v, "lm", {"mu"}, [&](const std::string&, const nlohmann::json& x) { c.lm.mu = x.get<double>(); });
            } else if (key == "tuning") {
                detail::for_each_key(v, "tuning", {"dev_queries"}, [&](const std::string&, const nlohmann::json& x) {
                    c.tuning_dev_queries = detail::as_count(x);
                });
            } else if (key == "ranking") {
                detail::for_each_key(v, "ranking", {"ranker", "top_k", "pool_size", "minmax_before_fusion"},
                                     [&](const std::string& k, const nlohmann::json& x) {
                                         if (k == "ranker") {
                                             c.ranker = parse_ranker(x.get<std::string>());
                                         } else if (k == "top_k") {
                                             c.top_k = detail::as_count(x);
                                         } else if (k == "pool_size") {
                                             c.pool_size = detail::as_count(x);
                                         } else {
                                             c.minmax_before_fusion = x.get<bool>();
                                         }
                                     });
            } else if (key == "eval") {
                detail::for_each_key(v, "eval", {"ks"}, [&](const std::string&, const nlohmann::json& x) {
                    c.eval_ks.clear();
                    for (const auto& k : x) {
                        c.eval_ks.push_back(detail::as_count(k));
                    }
                });
            } else if (key == "output_dir") {
                c.output_dir = resolve(v.get<std::string>());
            } else if (key == "seed") {
                c.seed = v.get<std::uint64_t>();
            } else if (key == "threads") {
                c.threads = static_cast<unsigned>(detail::as_count(v));
            } else {
                c.deterministic = v.get<bool>();
            }
        });
    c.model.seed = c.train_seed();
    return c;
}

/// Applies a dotted-path override ("model.epochs=5") to raw config JSON.
/// The value is parsed as JSON when possible, otherwise taken as a string.
inline void apply_override(nlohmann::json& root, std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos || eq == 0) {
        throw UsageError("override must look like key.path=value, got '" + std::string(assignment) + "'");
    }
    const std::string path(assignment.substr(0, eq));
    const std::string text(assignment.substr(eq + 1));
    nlohmann::json value = nlohmann::json::parse(text, nullptr, false);
    if (value.is_discarded()) {
        value = text;
    }
    nlohmann::json* node = &root;
    std::size_t start = 0;
    while (true) {
        const auto dot = path.find('.', start);
        const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (key.empty()) {
            throw UsageError("bad override path '" + path + "'");
        }
        if (dot == std::string::npos) {
            (*node)[key] = value;
            break;
        }
        node = &(*node)[key];
        if (!node->is_object()) {
            *node = nlohmann::json::object();
        }
        start = dot + 1;
    }
}

inline nlohmann::json read_config_json(const std::filesystem::path& path) {
    std::string text;
    try {
        text = read_file(path);
    } catch (const IoError&) {
        throw ConfigError("cannot read config file " + path.string());
    }
    auto j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded()) {
        throw ConfigError("config file " + path.string() + " is not valid JSON");
    }
    return j;
}

/// Loads, overrides and validates a config file.
inline RunConfig load_run_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {}) {
    auto j = read_config_json(path);
    for (const auto& o : overrides) {
        apply_override(j, o);
    }
    auto c = parse_run_config(j, path.parent_path());
    c.validate();
    return c;
}

}  // namespace hybrid_rank
