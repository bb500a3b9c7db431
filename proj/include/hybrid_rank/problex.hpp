#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "hybrid_rank/binary_io.hpp"
#include "hybrid_rank/corpus.hpp"
#include "hybrid_rank/errors.hpp"
#include "hybrid_rank/stopwords.hpp"
#include "hybrid_rank/util.hpp"

namespace hybrid_rank::problex {

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;

    bool operator==(const Bm25Params&) const = default;
    auto operator<=>(const Bm25Params&) const = default;
};

struct DirichletParams {
    double mu = 1000.0;

    bool operator==(const DirichletParams&) const = default;
    auto operator<=>(const DirichletParams&) const = default;
};

/// Sufficient statistics shared by BM25 and the Dirichlet LM, plus a forward
/// index of per-document term counts (sorted by term id).
struct LexStats {
    std::unordered_map<std::string, std::uint32_t> term_index;
    std::vector<std::string> terms;
    std::vector<std::uint32_t> doc_len;
    double avg_doc_len = 0.0;
    std::vector<std::uint64_t> collection_tf;
    std::uint64_t collection_len = 0;
    std::vector<std::uint32_t> df;
    std::size_t n_docs = 0;
    std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>> doc_terms;
    StopwordSet stopwords;

    /// Count of `term` in document `doc`.
    [[nodiscard]] std::uint32_t tf(std::size_t doc, std::uint32_t term) const {
        const auto& row = doc_terms[doc];
        auto it = std::lower_bound(row.begin(), row.end(), std::pair<std::uint32_t, std::uint32_t>{term, 0});
        return it != row.end() && it->first == term ? it->second : 0;
    }
};

inline std::vector<std::string> filter_stopwords(std::span<const std::string> tokens, const StopwordSet& stopwords) {
    std::vector<std::string> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) {
        if (!stopwords.contains(t)) {
            out.push_back(t);
        }
    }
    return out;
}

/// Builds statistics over stopword-filtered token streams. Term ids are
/// assigned in sorted term order.
inline LexStats build_lex_stats(std::span<const Document> documents, StopwordSet stopwords) {
    if (documents.empty()) {
        throw EmptyCorpus("cannot build lexical statistics on an empty collection");
    }
    std::vector<std::vector<std::string>> filtered(documents.size());
    std::unordered_map<std::string, std::uint32_t> seen;
    for (std::size_t d = 0; d < documents.size(); ++d) {
        filtered[d] = filter_stopwords(documents[d].tokens, stopwords);
        for (const auto& t : filtered[d]) {
            seen.emplace(t, 0);
        }
    }
    LexStats s;
    s.stopwords = std::move(stopwords);
    s.n_docs = documents.size();
    s.terms.reserve(seen.size());
    for (const auto& [t, _] : seen) {
        s.terms.push_back(t);
    }
    std::sort(s.terms.begin(), s.terms.end());
    for (std::uint32_t id = 0; id < s.terms.size(); ++id) {
        s.term_index.emplace(s.terms[id], id);
    }
    s.collection_tf.assign(s.terms.size(), 0);
    s.df.assign(s.terms.size(), 0);
    s.doc_len.resize(documents.size());
    s.doc_terms.resize(documents.size());
    for (std::size_t d = 0; d < documents.size(); ++d) {
        std::unordered_map<std::uint32_t, std::uint32_t> counts;
        for (const auto& t : filtered[d]) {
            ++counts[s.term_index.at(t)];
        }
        auto& row = s.doc_terms[d];
        row.assign(counts.begin(), counts.end());
        std::sort(row.begin(), row.end());
        for (auto [id, c] : row) {
            s.collection_tf[id] += c;
            ++s.df[id];
        }
        s.doc_len[d] = static_cast<std::uint32_t>(filtered[d].size());
        s.collection_len += filtered[d].size();
    }
    s.avg_doc_len = static_cast<double>(s.collection_len) / static_cast<double>(s.n_docs);
    return s;
}

/// Query reduced to known term ids: unique terms with their query counts.
/// Terms never seen in the collection are dropped.
struct PreparedQuery {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> terms;
};

inline PreparedQuery prepare_query(std::span<const std::string> tokens, const LexStats& stats) {
    std::unordered_map<std::uint32_t, std::uint32_t> counts;
    for (const auto& t : tokens) {
        if (stats.stopwords.contains(t)) {
            continue;
        }
        auto it = stats.term_index.find(t);
        if (it != stats.term_index.end()) {
            ++counts[it->second];
        }
    }
    PreparedQuery q;
    q.terms.assign(counts.begin(), counts.end());
    std::sort(q.terms.begin(), q.terms.end());
    return q;
}

/// ln(1 + (n - df + 0.5) / (df + 0.5)); never negative.
inline double bm25_idf(const LexStats& stats, std::uint32_t term) {
    const double n = static_cast<double>(stats.n_docs);
    const double df = static_cast<double>(stats.df[term]);
    return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
}

/// Okapi BM25 over unique query terms. Terms missing from the document
/// contribute nothing.
inline double bm25_score(const PreparedQuery& q, std::size_t doc, const LexStats& stats, const Bm25Params& p) {
    const double len_norm = 1.0 - p.b + p.b * static_cast<double>(stats.doc_len[doc]) / stats.avg_doc_len;
    double score = 0.0;
    for (auto [term, _] : q.terms) {
        const auto f = stats.tf(doc, term);
        if (f == 0) {
            continue;
        }
        const double fd = static_cast<double>(f);
        score += bm25_idf(stats, term) * fd * (p.k1 + 1.0) / (fd + p.k1 * len_norm);
    }
    return score;
}

inline double bm25_score(std::span<const std::string> query, std::size_t doc, const LexStats& stats, const Bm25Params& p) {
    return bm25_score(prepare_query(query, stats), doc, stats, p);
}

/// Query likelihood with Dirichlet smoothing, summed over query-term
/// occurrences: ln((f + mu * p(t|C)) / (|d| + mu)).
inline double lm_dirichlet_score(const PreparedQuery& q, std::size_t doc, const LexStats& stats,
                                 const DirichletParams& p) {
    const double denom = std::log(static_cast<double>(stats.doc_len[doc]) + p.mu);
    const double clen = static_cast<double>(stats.collection_len);
    double score = 0.0;
    for (auto [term, count] : q.terms) {
        const double p_c = static_cast<double>(stats.collection_tf[term]) / clen;
        const double f = static_cast<double>(stats.tf(doc, term));
        score += static_cast<double>(count) * (std::log(f + p.mu * p_c) - denom);
    }
    return score;
}

inline double lm_dirichlet_score(std::span<const std::string> query, std::size_t doc, const LexStats& stats,
                                 const DirichletParams& p) {
    return lm_dirichlet_score(prepare_query(query, stats), doc, stats, p);
}

/// Scores of one query against each document in `pool`.
template <typename Scorer>
std::vector<double> score_pool(const PreparedQuery& q, std::span<const std::size_t> pool, Scorer&& scorer) {
    std::vector<double> out(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i) {
        out[i] = scorer(q, pool[i]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

inline constexpr std::uint32_t lexstats_format_version = 1;

inline std::string serialize_lex_stats(const LexStats& s) {
    ByteWriter w;
    write_header(w, "HRLEXST1", lexstats_format_version);
    w.put(static_cast<std::uint64_t>(s.n_docs));
    w.put(static_cast<std::uint64_t>(s.terms.size()));
    w.put(stopword_hash(s.stopwords));
    std::vector<std::string> sw(s.stopwords.begin(), s.stopwords.end());
    std::sort(sw.begin(), sw.end());
    w.put(static_cast<std::uint64_t>(sw.size()));
    for (const auto& x : sw) {
        w.put_string(x);
    }
    for (const auto& t : s.terms) {
        w.put_string(t);
    }
    w.put_array(std::span<const std::uint32_t>(s.doc_len));
    for (const auto& row : s.doc_terms) {
        w.put(static_cast<std::uint32_t>(row.size()));
        for (auto [id, c] : row) {
            w.put(id);
            w.put(c);
        }
    }
    return w.bytes();
}

/// Derived fields (df, collection_tf, lengths) are recomputed from the
/// forward index on load.
inline LexStats parse_lex_stats(std::string_view bytes) {
    ByteReader r(bytes);
    read_header(r, "HRLEXST1", lexstats_format_version);
    LexStats s;
    s.n_docs = r.get<std::uint64_t>();
    const auto n_terms = r.get<std::uint64_t>();
    const auto hash = r.get<std::uint64_t>();
    const auto n_sw = r.get<std::uint64_t>();
    if (s.n_docs > bytes.size() || n_terms > bytes.size() || n_sw > bytes.size()) {
        throw FormatError("lexical statistics header declares more data than the file holds");
    }
    for (std::uint64_t i = 0; i < n_sw; ++i) {
        s.stopwords.insert(r.get_string());
    }
    if (stopword_hash(s.stopwords) != hash) {
        throw FormatError("lexical statistics stopword list does not match its hash");
    }
    s.terms.reserve(n_terms);
    for (std::uint64_t i = 0; i < n_terms; ++i) {
        s.terms.push_back(r.get_string());
        s.term_index.emplace(s.terms.back(), static_cast<std::uint32_t>(i));
    }
    s.doc_len = r.get_array<std::uint32_t>(s.n_docs);
    s.collection_tf.assign(n_terms, 0);
    s.df.assign(n_terms, 0);
    s.doc_terms.resize(s.n_docs);
    for (std::size_t d = 0; d < s.n_docs; ++d) {
        const auto n = r.get<std::uint32_t>();
        auto& row = s.doc_terms[d];
        row.reserve(n);
        std::uint64_t len = 0;
        for (std::uint32_t k = 0; k < n; ++k) {
            const auto id = r.get<std::uint32_t>();
            const auto c = r.get<std::uint32_t>();
            if (id >= n_terms) {
                throw FormatError("lexical statistics term id out of range");
            }
            row.emplace_back(id, c);
            s.collection_tf[id] += c;
            ++s.df[id];
            len += c;
        }
        if (len != s.doc_len[d]) {
            throw FormatError("lexical statistics document length mismatch");
        }
        s.collection_len += len;
    }
    if (!r.at_end()) {
        throw FormatError("trailing bytes after lexical statistics");
    }
    s.avg_doc_len = s.n_docs == 0 ? 0.0 : static_cast<double>(s.collection_len) / static_cast<double>(s.n_docs);
    return s;
}

}  // namespace hybrid_rank::problex
