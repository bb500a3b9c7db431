#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <variant>
#include <vector>

#include "json.hpp"

#include "hybrid_rank/errors.hpp"
#include "hybrid_rank/rng.hpp"
#include "hybrid_rank/util.hpp"

namespace hybrid_rank {

// ---------------------------------------------------------------------------
// Tokenization
// ---------------------------------------------------------------------------

struct TokenizerConfig {
    bool lowercase = true;
    /// Keep tokens made only of digits ("2012").
    bool keep_numeric = true;
};

namespace detail {

/// Decodes one UTF-8 sequence starting at `i`. Returns the code point and
/// advances `i`; malformed bytes decode to U+FFFD one byte at a time.
inline char32_t next_code_point(std::string_view s, std::size_t& i) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    int len = 0;
    char32_t cp = 0;
    if (b0 < 0x80) {
        ++i;
        return b0;
    } else if ((b0 & 0xE0) == 0xC0) {
        len = 2;
        cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
        len = 3;
        cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
        len = 4;
        cp = b0 & 0x07;
    } else {
        ++i;
        return 0xFFFD;
    }
    if (i + len > s.size()) {
        ++i;
        return 0xFFFD;
    }
    for (int k = 1; k < len; ++k) {
        const auto b = static_cast<unsigned char>(s[i + k]);
        if ((b & 0xC0) != 0x80) {
            ++i;
            return 0xFFFD;
        }
        cp = (cp << 6) | (b & 0x3F);
    }
    i += len;
    return cp;
}

/// Word characters: ASCII letters and digits plus non-ASCII code points
/// outside the common punctuation, symbol and space blocks.
inline bool is_word_code_point(char32_t cp) {
    if (cp < 0x80) {
        return (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z') || (cp >= '0' && cp <= '9');
    }
    if (cp <= 0xBF || cp == 0xD7 || cp == 0xF7) {
        return false;  // Latin-1 controls, punctuation and symbols
    }
    if (cp >= 0x2000 && cp <= 0x2BFF) {
        return false;  // general punctuation through misc symbols
    }
    if ((cp >= 0x3000 && cp <= 0x303F) || cp == 0xFEFF || cp == 0xFFFD) {
        return false;
    }
    return true;
}

inline bool all_digits(std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

}  // namespace detail

/// Lowercases ASCII letters and splits on every maximal run of non-word
/// characters. Empty input yields an empty sequence.
inline std::vector<std::string> tokenize(std::string_view text, const TokenizerConfig& cfg = {}) {
    std::vector<std::string> tokens;
    std::string current;
    auto flush = [&] {
        if (!current.empty()) {
            if (cfg.keep_numeric || !detail::all_digits(current)) {
                tokens.push_back(std::move(current));
            }
            current.clear();
        }
    };
    std::size_t i = 0;
    while (i < text.size()) {
        const std::size_t start = i;
        const char32_t cp = detail::next_code_point(text, i);
        if (!detail::is_word_code_point(cp)) {
            flush();
            continue;
        }
        if (cp < 0x80) {
            char c = static_cast<char>(cp);
            if (cfg.lowercase && c >= 'A' && c <= 'Z') {
                c = static_cast<char>(c - 'A' + 'a');
            }
            current.push_back(c);
        } else {
            current.append(text.substr(start, i - start));
        }
    }
    flush();
    return tokens;
}

// ---------------------------------------------------------------------------
// Records, documents, pairs
// ---------------------------------------------------------------------------

struct RawRecord {
    std::string id;
    std::optional<std::string> title;
    std::string body;
    /// Explicit query text for QA-style corpora; such records skip sentence
    /// splitting and use this verbatim.
    std::optional<std::string> query;
};

struct Document {
    std::int64_t doc_id = 0;
    std::vector<std::string> tokens;
    std::string source_id;

    bool operator==(const Document&) const = default;
};

struct QueryArticlePair {
    Document query;
    Document article;
    std::int64_t pair_id = 0;

    bool operator==(const QueryArticlePair&) const = default;
};

struct SentenceSplit {
    std::string query_text;
    std::string article_text;
};

namespace detail {

inline bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && is_space(s.front())) {
        s.remove_prefix(1);
    }
    while (!s.empty() && is_space(s.back())) {
        s.remove_suffix(1);
    }
    return s;
}

}  // namespace detail

/// The first sentence ends at the first '.', '!' or '?' that is followed by
/// whitespace or the end of the text. The query keeps its terminator.
/// Throws RecordRejected when the body is a single sentence or the query has
/// fewer than `min_query_len` tokens.
inline SentenceSplit split_first_sentence(const RawRecord& record, std::size_t min_query_len = 5,
                                          const TokenizerConfig& tok = {}) {
    const std::string_view body = detail::trim(record.body);
    std::size_t end = std::string_view::npos;
    for (std::size_t i = 0; i < body.size(); ++i) {
        const char c = body[i];
        if ((c == '.' || c == '!' || c == '?') && (i + 1 == body.size() || detail::is_space(body[i + 1]))) {
            end = i;
            break;
        }
    }
    if (end == std::string_view::npos || end + 1 == body.size()) {
        throw RecordRejected(RejectReason::single_sentence, "record " + record.id + ": body is a single sentence");
    }
    SentenceSplit out;
    out.query_text = std::string(body.substr(0, end + 1));
    out.article_text = std::string(detail::trim(body.substr(end + 1)));
    if (out.article_text.empty()) {
        throw RecordRejected(RejectReason::single_sentence, "record " + record.id + ": body is a single sentence");
    }
    const auto n = tokenize(out.query_text, tok).size();
    if (n < min_query_len) {
        throw RecordRejected(RejectReason::query_too_short, "record " + record.id + ": query too short (" +
                                                                std::to_string(n) + " tokens)");
    }
    return out;
}

// ---------------------------------------------------------------------------
// Ingestion
// ---------------------------------------------------------------------------

enum class CorpusFormat { news, qa };

inline CorpusFormat parse_corpus_format(std::string_view s) {
    if (s == "news") {
        return CorpusFormat::news;
    }
    if (s == "qa") {
        return CorpusFormat::qa;
    }
    throw ConfigError("unknown corpus format '" + std::string(s) + "' (expected news|qa)");
}

inline const char* to_string(CorpusFormat f) { return f == CorpusFormat::news ? "news" : "qa"; }

/// JSON field names for each corpus schema.
struct FieldMap {
    std::string id = "id";
    std::string title = "title";
    std::string body = "body";
    std::string question = "question";
    std::string article = "article";
};

struct IngestResult {
    std::vector<RawRecord> records;
    std::size_t lines = 0;  // non-blank lines seen
    std::size_t malformed = 0;
    std::vector<std::string> warnings;
};

namespace detail {

inline std::optional<std::string> string_field(const nlohmann::json& obj, const std::string& key) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) {
        return std::nullopt;
    }
    if (it->is_string()) {
        return it->get<std::string>();
    }
    if (it->is_number_integer() || it->is_number_unsigned()) {
        return it->dump();
    }
    return std::nullopt;
}

/// Parses one JSONL line; returns the record or an error description.
inline std::variant<RawRecord, std::string> parse_record(std::string_view line, CorpusFormat format,
                                                         const FieldMap& fields) {
    nlohmann::json obj = nlohmann::json::parse(line, nullptr, false);
    if (obj.is_discarded() || !obj.is_object()) {
        return std::string("not a JSON object");
    }
    RawRecord r;
    auto id = string_field(obj, fields.id);
    if (!id || id->empty()) {
        return std::string("missing or empty '" + fields.id + "'");
    }
    r.id = std::move(*id);
    if (format == CorpusFormat::news) {
        auto body = string_field(obj, fields.body);
        if (!body || trim(*body).empty()) {
            return std::string("missing or empty '" + fields.body + "'");
        }
        r.body = std::move(*body);
        r.title = string_field(obj, fields.title);
    } else {
        auto q = string_field(obj, fields.question);
        auto a = string_field(obj, fields.article);
        if (!q || trim(*q).empty()) {
            return std::string("missing or empty '" + fields.question + "'");
        }
        if (!a || trim(*a).empty()) {
            return std::string("missing or empty '" + fields.article + "'");
        }
        r.query = std::move(*q);
        r.body = std::move(*a);
    }
    return r;
}

}  // namespace detail

/// Reads a JSON Lines corpus. Malformed lines (bad JSON, missing fields,
/// duplicate ids) are skipped and reported; more than half malformed is a
/// FormatError. Output order follows input line order.
inline IngestResult ingest(const std::filesystem::path& path, CorpusFormat format, const FieldMap& fields = {},
                           unsigned threads = 1) {
    const std::string content = read_file(path);
    std::vector<std::string_view> lines;
    std::vector<std::size_t> line_numbers;
    std::size_t pos = 0;
    std::size_t line_no = 0;
    while (pos <= content.size()) {
        auto nl = content.find('\n', pos);
        if (nl == std::string::npos) {
            nl = content.size();
        }
        ++line_no;
        const std::string_view line(content.data() + pos, nl - pos);
        if (!detail::trim(line).empty()) {
            lines.push_back(line);
            line_numbers.push_back(line_no);
        }
        pos = nl + 1;
    }

    std::vector<std::variant<RawRecord, std::string>> parsed(lines.size());
    parallel_for(lines.size(), threads, [&](std::size_t i) { parsed[i] = detail::parse_record(lines[i], format, fields); });

    IngestResult out;
    out.lines = lines.size();
    std::unordered_set<std::string> seen;
    for (std::size_t i = 0; i < parsed.size(); ++i) {
        if (auto* err = std::get_if<std::string>(&parsed[i])) {
            ++out.malformed;
            out.warnings.push_back(path.filename().string() + ":" + std::to_string(line_numbers[i]) + ": " + *err);
            continue;
        }
        auto& rec = std::get<RawRecord>(parsed[i]);
        if (!seen.insert(rec.id).second) {
            ++out.malformed;
            out.warnings.push_back(path.filename().string() + ":" + std::to_string(line_numbers[i]) +
                                   ": duplicate id '" + rec.id + "'");
            continue;
        }
        out.records.push_back(std::move(rec));
    }
    if (out.malformed * 2 > out.lines) {
        throw FormatError(path.string() + ": " + std::to_string(out.malformed) + " of " + std::to_string(out.lines) +
                          " lines malformed");
    }
    return out;
}

// ---------------------------------------------------------------------------
// Pair construction
// ---------------------------------------------------------------------------

struct PairConfig {
    TokenizerConfig tokenizer;
    std::size_t min_query_len = 5;
};

struct PairBuildResult {
    std::vector<QueryArticlePair> pairs;
    std::size_t rejected = 0;
    std::unordered_map<std::string, std::size_t> reject_reasons;
};

/// Turns records into tokenized query/article pairs with dense pair ids in
/// input order. News records take their first sentence as the query; QA
/// records use their question verbatim.
inline PairBuildResult build_pairs(std::span<const RawRecord> records, CorpusFormat format, const PairConfig& cfg = {},
                                   unsigned threads = 1) {
    struct Slot {
        std::optional<QueryArticlePair> pair;
        std::optional<RejectReason> reason;
    };
    std::vector<Slot> slots(records.size());
    parallel_for(records.size(), threads, [&](std::size_t i) {
        const auto& rec = records[i];
        std::string query_text;
        std::string article_text;
        try {
            if (format == CorpusFormat::qa || rec.query) {
                query_text = rec.query.value_or("");
                article_text = rec.body;
                if (tokenize(query_text, cfg.tokenizer).size() < cfg.min_query_len) {
                    throw RecordRejected(RejectReason::query_too_short, "query too short");
                }
            } else {
                auto split = split_first_sentence(rec, cfg.min_query_len, cfg.tokenizer);
                query_text = std::move(split.query_text);
                article_text = std::move(split.article_text);
            }
        } catch (const RecordRejected& e) {
            slots[i].reason = e.reason();
            return;
        }
        QueryArticlePair p;
        p.query.tokens = tokenize(query_text, cfg.tokenizer);
        p.article.tokens = tokenize(article_text, cfg.tokenizer);
        if (p.article.tokens.empty()) {
            slots[i].reason = RejectReason::empty_article;
            return;
        }
        p.query.source_id = rec.id;
        p.article.source_id = rec.id;
        slots[i].pair = std::move(p);
    });

    PairBuildResult out;
    for (auto& s : slots) {
        if (s.pair) {
            auto id = static_cast<std::int64_t>(out.pairs.size());
            s.pair->pair_id = id;
            s.pair->query.doc_id = id;
            s.pair->article.doc_id = id;
            out.pairs.push_back(std::move(*s.pair));
        } else {
            ++out.rejected;
            ++out.reject_reasons[to_string(*s.reason)];
        }
    }
    return out;
}

/// Copy of `pair` with the article cut to its first `max_len` tokens.
inline QueryArticlePair truncate_article(QueryArticlePair pair, std::size_t max_len) {
    if (pair.article.tokens.size() > max_len) {
        pair.article.tokens.resize(max_len);
    }
    return pair;
}

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

struct SplitSizes {
    std::size_t train = 0;
    std::size_t dev = 0;
    std::size_t test = 0;
};

struct DatasetSplit {
    std::vector<QueryArticlePair> train;
    std::vector<QueryArticlePair> dev;
    std::vector<QueryArticlePair> test;
    std::uint64_t seed = 0;
};

/// Seeded shuffle, then consecutive train/dev/test blocks.
inline DatasetSplit make_splits(std::span<const QueryArticlePair> pairs, SplitSizes sizes, std::uint64_t seed) {
    const std::size_t wanted = sizes.train + sizes.dev + sizes.test;
    if (wanted > pairs.size()) {
        throw SizeError("split sizes " + std::to_string(sizes.train) + "+" + std::to_string(sizes.dev) + "+" +
                        std::to_string(sizes.test) + " exceed " + std::to_string(pairs.size()) + " pairs");
    }
    std::vector<std::size_t> order(pairs.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        order[i] = i;
    }
    Rng rng(seed);
    shuffle(std::span<std::size_t>(order), rng);

    DatasetSplit out;
    out.seed = seed;
    std::size_t k = 0;
    for (auto* dst : {&out.train, &out.dev, &out.test}) {
        const std::size_t n = dst == &out.train ? sizes.train : dst == &out.dev ? sizes.dev : sizes.test;
        dst->reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            dst->push_back(pairs[order[k++]]);
        }
    }
    return out;
}

inline constexpr int manifest_format_version = 1;
inline constexpr int corpus_cache_format_version = 1;

/// JSONL manifest: a header line, then {"pair_id","split"} in split order
/// (train, dev, test), each block in shuffled order.
inline std::string serialize_manifest(const DatasetSplit& split) {
    std::string out = nlohmann::json{{"format", "hybrid-rank.split-manifest"},
                                     {"version", manifest_format_version},
                                     {"seed", split.seed},
                                     {"sizes", {{"train", split.train.size()}, {"dev", split.dev.size()}, {"test", split.test.size()}}}}
                          .dump() +
                      "\n";
    auto emit = [&](const std::vector<QueryArticlePair>& part, const char* name) {
        for (const auto& p : part) {
            out += nlohmann::json{{"pair_id", p.pair_id}, {"split", name}}.dump();
            out += '\n';
        }
    };
    emit(split.train, "train");
    emit(split.dev, "dev");
    emit(split.test, "test");
    return out;
}

/// Rebuilds a split from a manifest and the tokenized pairs it refers to.
inline DatasetSplit parse_manifest(std::string_view text, std::span<const QueryArticlePair> pairs) {
    std::unordered_map<std::int64_t, const QueryArticlePair*> by_id;
    for (const auto& p : pairs) {
        by_id[p.pair_id] = &p;
    }
    DatasetSplit out;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    std::unordered_set<std::int64_t> used;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) {
            continue;
        }
        auto obj = nlohmann::json::parse(line, nullptr, false);
        if (obj.is_discarded() || !obj.is_object()) {
            throw ParseError(line_no, "manifest line is not a JSON object");
        }
        if (line_no == 1) {
            if (obj.value("format", "") != "hybrid-rank.split-manifest" || obj.value("version", 0) != manifest_format_version) {
                throw FormatError("unsupported split manifest header");
            }
            out.seed = obj.value("seed", std::uint64_t{0});
            continue;
        }
        if (!obj.contains("pair_id") || !obj.contains("split")) {
            throw ParseError(line_no, "manifest entry needs pair_id and split");
        }
        const auto id = obj["pair_id"].get<std::int64_t>();
        const auto name = obj["split"].get<std::string>();
        auto it = by_id.find(id);
        if (it == by_id.end()) {
            throw ParseError(line_no, "unknown pair_id " + std::to_string(id));
        }
        if (!used.insert(id).second) {
            throw ParseError(line_no, "pair_id " + std::to_string(id) + " listed twice");
        }
        if (name == "train") {
            out.train.push_back(*it->second);
        } else if (name == "dev") {
            out.dev.push_back(*it->second);
        } else if (name == "test") {
            out.test.push_back(*it->second);
        } else {
            throw ParseError(line_no, "unknown split '" + name + "'");
        }
    }
    return out;
}

/// Tokenized corpus cache: a versioned header line followed by one pair per line.
inline std::string serialize_corpus_cache(std::span<const QueryArticlePair> pairs) {
    std::string out = nlohmann::json{{"format", "hybrid-rank.tokenized-corpus"},
                                     {"version", corpus_cache_format_version},
                                     {"n_pairs", pairs.size()}}
                          .dump() +
                      "\n";
    for (const auto& p : pairs) {
        out += nlohmann::json{{"pair_id", p.pair_id},
                              {"source_id", p.query.source_id},
                              {"query", p.query.tokens},
                              {"article", p.article.tokens}}
                   .dump();
        out += '\n';
    }
    return out;
}

inline std::vector<QueryArticlePair> parse_corpus_cache(std::string_view text) {
    std::vector<QueryArticlePair> pairs;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    std::size_t expected = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) {
            continue;
        }
        auto obj = nlohmann::json::parse(line, nullptr, false);
        if (obj.is_discarded() || !obj.is_object()) {
            throw ParseError(line_no, "cache line is not a JSON object");
        }
        if (line_no == 1) {
            if (obj.value("format", "") != "hybrid-rank.tokenized-corpus" ||
                obj.value("version", 0) != corpus_cache_format_version) {
                throw FormatError("unsupported tokenized corpus header");
            }
            expected = obj.value("n_pairs", std::size_t{0});
            continue;
        }
        try {
            QueryArticlePair p;
            p.pair_id = obj.at("pair_id").get<std::int64_t>();
            p.query.doc_id = p.pair_id;
            p.article.doc_id = p.pair_id;
            p.query.source_id = obj.at("source_id").get<std::string>();
            p.article.source_id = p.query.source_id;
            p.query.tokens = obj.at("query").get<std::vector<std::string>>();
            p.article.tokens = obj.at("article").get<std::vector<std::string>>();
            pairs.push_back(std::move(p));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(line_no, e.what());
        }
    }
    if (pairs.size() != expected) {
        throw FormatError("tokenized corpus declares " + std::to_string(expected) + " pairs, found " +
                          std::to_string(pairs.size()));
    }
    return pairs;
}

}  // namespace hybrid_rank
