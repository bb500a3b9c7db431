#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "hybrid_rank/binary_io.hpp"
#include "hybrid_rank/corpus.hpp"
#include "hybrid_rank/errors.hpp"
#include "hybrid_rank/ranking.hpp"
#include "hybrid_rank/sparse.hpp"
#include "hybrid_rank/stopwords.hpp"
#include "hybrid_rank/util.hpp"

namespace hybrid_rank::tfidf {

/// Unigram and bigram vocabulary with document frequencies.
struct TfIdfModel {
    std::unordered_map<std::string, std::uint32_t> term_index;
    std::vector<std::string> terms;  // term id -> term, sorted
    std::vector<std::uint32_t> df;
    std::size_t n_docs = 0;
    StopwordSet stopwords;

    [[nodiscard]] std::size_t vocab_size() const noexcept { return terms.size(); }

    /// ln((1 + n) / (1 + df)) + 1
    [[nodiscard]] double idf(std::uint32_t term) const {
        return std::log((1.0 + static_cast<double>(n_docs)) / (1.0 + static_cast<double>(df[term]))) + 1.0;
    }

    [[nodiscard]] std::optional<std::uint32_t> lookup(const std::string& term) const {
        auto it = term_index.find(term);
        if (it == term_index.end()) {
            return std::nullopt;
        }
        return it->second;
    }
};

/// Unigrams of the stopword-filtered stream followed by its bigrams, joined
/// with a single space. Stopwords are removed before bigrams are formed, so
/// a removed word does not break adjacency.
inline std::vector<std::string> features(std::span<const std::string> tokens, const StopwordSet& stopwords) {
    std::vector<std::string> kept;
    kept.reserve(tokens.size());
    for (const auto& t : tokens) {
        if (!stopwords.contains(t)) {
            kept.push_back(t);
        }
    }
    std::vector<std::string> out;
    out.reserve(kept.size() * 2);
    for (const auto& t : kept) {
        out.push_back(t);
    }
    for (std::size_t i = 1; i < kept.size(); ++i) {
        out.push_back(kept[i - 1] + ' ' + kept[i]);
    }
    return out;
}

inline TfIdfModel fit(std::span<const Document> documents, StopwordSet stopwords) {
    if (documents.empty()) {
        throw EmptyCorpus("cannot fit TF-IDF on an empty document collection");
    }
    std::unordered_map<std::string, std::uint32_t> counts;
    for (const auto& doc : documents) {
        auto f = features(doc.tokens, stopwords);
        std::sort(f.begin(), f.end());
        f.erase(std::unique(f.begin(), f.end()), f.end());
        for (auto& term : f) {
            ++counts[std::move(term)];
        }
    }
    TfIdfModel model;
    model.n_docs = documents.size();
    model.stopwords = std::move(stopwords);
    model.terms.reserve(counts.size());
    for (const auto& [term, _] : counts) {
        model.terms.push_back(term);
    }
    std::sort(model.terms.begin(), model.terms.end());
    model.df.reserve(model.terms.size());
    for (std::uint32_t id = 0; id < model.terms.size(); ++id) {
        model.term_index.emplace(model.terms[id], id);
        model.df.push_back(counts[model.terms[id]]);
    }
    return model;
}

/// L2-normalized vector of (1 + ln f) * idf over in-vocabulary terms.
/// Documents with no known terms map to the zero vector.
inline SparseVector transform(std::span<const std::string> tokens, const TfIdfModel& model) {
    std::unordered_map<std::uint32_t, std::uint32_t> freq;
    for (const auto& term : features(tokens, model.stopwords)) {
        if (auto id = model.lookup(term)) {
            ++freq[*id];
        }
    }
    std::vector<std::pair<std::uint32_t, double>> entries;
    entries.reserve(freq.size());
    for (auto [id, f] : freq) {
        entries.emplace_back(id, (1.0 + std::log(static_cast<double>(f))) * model.idf(id));
    }
    std::sort(entries.begin(), entries.end());
    auto v = SparseVector::from_sorted(std::move(entries));
    v.normalize();
    return v;
}

inline SparseVector transform(const Document& doc, const TfIdfModel& model) { return transform(doc.tokens, model); }

/// Cosine of two normalized vectors, clamped into [0, 1].
inline double score(const SparseVector& q, const SparseVector& a) {
    if (q.norm == 0.0 || a.norm == 0.0) {
        return 0.0;
    }
    return std::clamp(dot(q, a), 0.0, 1.0);
}

/// Row-per-document collection of normalized TF-IDF vectors.
struct TfIdfIndex {
    std::vector<SparseVector> rows;
    std::size_t n_cols = 0;

    bool operator==(const TfIdfIndex&) const = default;
};

inline TfIdfIndex build_index(std::span<const Document> documents, const TfIdfModel& model, unsigned threads = 1) {
    TfIdfIndex index;
    index.n_cols = model.vocab_size();
    index.rows.resize(documents.size());
    parallel_for(documents.size(), threads, [&](std::size_t i) { index.rows[i] = transform(documents[i], model); });
    return index;
}

/// Top-k documents of `index` for `q`; the doc id is the row number.
inline std::vector<ScoredDoc> rank(const SparseVector& q, std::span<const SparseVector> index, std::size_t k) {
    if (k == 0) {
        throw UsageError("rank needs k >= 1");
    }
    std::vector<double> scores(index.size());
    for (std::size_t i = 0; i < index.size(); ++i) {
        scores[i] = score(q, index[i]);
    }
    return top_k(scores, k);
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

inline constexpr int vocab_format_version = 1;
inline constexpr std::uint32_t index_format_version = 1;

/// Text vocabulary: one header line, then "term<TAB>term_id<TAB>df" rows.
/// The stopword list itself is written after the terms so the model can be
/// reloaded without the original data file.
inline std::string serialize_model(const TfIdfModel& model) {
    std::ostringstream out;
    out << "#hybrid-rank tfidf-vocab version=" << vocab_format_version << " n_docs=" << model.n_docs
        << " n_terms=" << model.terms.size() << " stopwords_hash=" << hex64(stopword_hash(model.stopwords))
        << " n_stopwords=" << model.stopwords.size() << '\n';
    for (std::uint32_t id = 0; id < model.terms.size(); ++id) {
        out << model.terms[id] << '\t' << id << '\t' << model.df[id] << '\n';
    }
    std::vector<std::string> sw(model.stopwords.begin(), model.stopwords.end());
    std::sort(sw.begin(), sw.end());
    for (const auto& w : sw) {
        out << "#stopword\t" << w << '\n';
    }
    return out.str();
}

inline TfIdfModel parse_model(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line.rfind("#hybrid-rank tfidf-vocab ", 0) != 0) {
        throw FormatError("missing tfidf vocabulary header");
    }
    std::unordered_map<std::string, std::string> header;
    {
        std::istringstream hs(line.substr(25));
        std::string kv;
        while (hs >> kv) {
            auto eq = kv.find('=');
            if (eq != std::string::npos) {
                header[kv.substr(0, eq)] = kv.substr(eq + 1);
            }
        }
    }
    if (header["version"] != std::to_string(vocab_format_version)) {
        throw FormatError("unsupported tfidf vocabulary version");
    }
    TfIdfModel model;
    try {
        model.n_docs = std::stoull(header.at("n_docs"));
        const auto n_terms = std::stoull(header.at("n_terms"));
        model.terms.reserve(n_terms);
        model.df.reserve(n_terms);
    } catch (const std::exception&) {
        throw FormatError("malformed tfidf vocabulary header");
    }
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.rfind("#stopword\t", 0) == 0) {
            model.stopwords.insert(line.substr(10));
            continue;
        }
        const auto t1 = line.find('\t');
        const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
        if (t2 == std::string::npos) {
            throw ParseError(line_no, "expected term<TAB>id<TAB>df");
        }
        const auto id = std::stoul(line.substr(t1 + 1, t2 - t1 - 1));
        if (id != model.terms.size()) {
            throw ParseError(line_no, "term ids must be dense and ordered");
        }
        model.terms.push_back(line.substr(0, t1));
        model.df.push_back(static_cast<std::uint32_t>(std::stoul(line.substr(t2 + 1))));
        model.term_index.emplace(model.terms.back(), static_cast<std::uint32_t>(id));
    }
    if (model.terms.size() != std::stoull(header["n_terms"])) {
        throw FormatError("tfidf vocabulary term count does not match header");
    }
    if (hex64(stopword_hash(model.stopwords)) != header["stopwords_hash"]) {
        throw FormatError("tfidf stopword list does not match its pinned hash");
    }
    return model;
}

/// Compressed sparse rows: header, row pointers, column ids, values.
inline std::string serialize_index(const TfIdfIndex& index) {
    ByteWriter w;
    write_header(w, "HRTFIDX1", index_format_version);
    std::uint64_t nnz = 0;
    for (const auto& r : index.rows) {
        nnz += r.size();
    }
    w.put(static_cast<std::uint64_t>(index.rows.size()));
    w.put(static_cast<std::uint64_t>(index.n_cols));
    w.put(nnz);
    std::uint64_t ptr = 0;
    w.put(ptr);
    for (const auto& r : index.rows) {
        ptr += r.size();
        w.put(ptr);
    }
    for (const auto& r : index.rows) {
        w.put_array(std::span<const std::uint32_t>(r.ids));
    }
    for (const auto& r : index.rows) {
        w.put_array(std::span<const double>(r.weights));
    }
    return w.bytes();
}

inline TfIdfIndex parse_index(std::string_view bytes) {
    ByteReader r(bytes);
    read_header(r, "HRTFIDX1", index_format_version);
    const auto n_rows = r.get<std::uint64_t>();
    TfIdfIndex index;
    index.n_cols = r.get<std::uint64_t>();
    const auto nnz = r.get<std::uint64_t>();
    if (n_rows >= bytes.size()) {
        throw FormatError("tfidf index header declares more rows than the file holds");
    }
    const auto ptr = r.get_array<std::uint64_t>(n_rows + 1);
    if (ptr.front() != 0 || ptr.back() != nnz || !std::is_sorted(ptr.begin(), ptr.end())) {
        throw FormatError("corrupt CSR row pointers");
    }
    const auto cols = r.get_array<std::uint32_t>(nnz);
    const auto vals = r.get_array<double>(nnz);
    index.rows.resize(n_rows);
    for (std::size_t i = 0; i < n_rows; ++i) {
        auto& row = index.rows[i];
        row.ids.assign(cols.begin() + static_cast<std::ptrdiff_t>(ptr[i]), cols.begin() + static_cast<std::ptrdiff_t>(ptr[i + 1]));
        row.weights.assign(vals.begin() + static_cast<std::ptrdiff_t>(ptr[i]), vals.begin() + static_cast<std::ptrdiff_t>(ptr[i + 1]));
        row.recompute_norm();
    }
    return index;
}

}  // namespace hybrid_rank::tfidf
