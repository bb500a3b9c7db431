#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "hybrid_rank/errors.hpp"
#include "hybrid_rank/util.hpp"

namespace hybrid_rank::fusion {

/// Dense query x document score table. Entries absent from an imported
/// file are 0.
struct ScoreMatrix {
    std::vector<std::string> query_ids;
    std::vector<std::string> doc_ids;
    std::vector<double> scores;  // row-major, query_ids.size() x doc_ids.size()
    std::string source;

    ScoreMatrix() = default;
    ScoreMatrix(std::vector<std::string> queries, std::vector<std::string> docs, std::string label = {})
        : query_ids(std::move(queries)), doc_ids(std::move(docs)), scores(query_ids.size() * doc_ids.size(), 0.0),
          source(std::move(label)) {}

    [[nodiscard]] std::size_t n_queries() const noexcept { return query_ids.size(); }
    [[nodiscard]] std::size_t n_docs() const noexcept { return doc_ids.size(); }

    [[nodiscard]] double& at(std::size_t q, std::size_t d) { return scores[q * doc_ids.size() + d]; }
    [[nodiscard]] double at(std::size_t q, std::size_t d) const { return scores[q * doc_ids.size() + d]; }

    [[nodiscard]] std::span<const double> row(std::size_t q) const {
        return {scores.data() + q * doc_ids.size(), doc_ids.size()};
    }

    /// Same ids and scores; the source label is not compared.
    [[nodiscard]] bool same_content(const ScoreMatrix& o) const {
        return query_ids == o.query_ids && doc_ids == o.doc_ids && scores == o.scores;
    }

    void validate() const {
        if (scores.size() != query_ids.size() * doc_ids.size()) {
            throw ShapeMismatch("score matrix has " + std::to_string(scores.size()) + " entries for " +
                                std::to_string(query_ids.size()) + "x" + std::to_string(doc_ids.size()));
        }
        for (double s : scores) {
            if (!std::isfinite(s)) {
                throw FormatError("score matrix '" + source + "' has a non-finite entry");
            }
        }
    }
};

namespace detail {

inline std::vector<std::size_t> id_order(const std::vector<std::string>& ids) {
    std::vector<std::size_t> order(ids.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return id_less(ids[a], ids[b]); });
    return order;
}

}  // namespace detail

/// Copy with rows and columns sorted by `id_less`.
inline ScoreMatrix normalize_order(const ScoreMatrix& m) {
    const auto qo = detail::id_order(m.query_ids);
    const auto dord = detail::id_order(m.doc_ids);
    ScoreMatrix out;
    out.source = m.source;
    out.query_ids.reserve(qo.size());
    out.doc_ids.reserve(dord.size());
    for (auto i : qo) {
        out.query_ids.push_back(m.query_ids[i]);
    }
    for (auto j : dord) {
        out.doc_ids.push_back(m.doc_ids[j]);
    }
    out.scores.resize(m.scores.size());
    for (std::size_t qi = 0; qi < qo.size(); ++qi) {
        for (std::size_t dj = 0; dj < dord.size(); ++dj) {
            out.scores[qi * dord.size() + dj] = m.at(qo[qi], dord[dj]);
        }
    }
    return out;
}

namespace detail {

inline std::vector<std::string> symmetric_difference(std::vector<std::string> a, std::vector<std::string> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::vector<std::string> out;
    std::set_symmetric_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

}  // namespace detail

/// Elementwise sum of two matrices over the same query and document ids.
/// Both inputs are order-normalized first, so id order in the inputs does
/// not matter.
inline ScoreMatrix fuse(const ScoreMatrix& a, const ScoreMatrix& b) {
    a.validate();
    b.validate();
    if (a.n_queries() != b.n_queries() || a.n_docs() != b.n_docs()) {
        throw ShapeMismatch("cannot fuse " + std::to_string(a.n_queries()) + "x" + std::to_string(a.n_docs()) +
                            " with " + std::to_string(b.n_queries()) + "x" + std::to_string(b.n_docs()));
    }
    const auto na = normalize_order(a);
    const auto nb = normalize_order(b);
    if (na.query_ids != nb.query_ids || na.doc_ids != nb.doc_ids) {
        auto bad = detail::symmetric_difference(na.query_ids, nb.query_ids);
        auto bad_docs = detail::symmetric_difference(na.doc_ids, nb.doc_ids);
        bad.insert(bad.end(), bad_docs.begin(), bad_docs.end());
        std::string list;
        for (std::size_t i = 0; i < bad.size() && i < 10; ++i) {
            list += (i ? ", " : "") + bad[i];
        }
        throw IdMismatch(std::move(bad), "score matrices disagree on ids: " + list);
    }
    ScoreMatrix out = na;
    out.source = a.source + "+" + b.source;
    for (std::size_t i = 0; i < out.scores.size(); ++i) {
        out.scores[i] = na.scores[i] + nb.scores[i];
    }
    return out;
}

/// Left fold of `fuse` over two or more matrices.
inline ScoreMatrix fuse_all(const std::vector<ScoreMatrix>& inputs) {
    if (inputs.size() < 2) {
        throw UsageError("fusion needs at least two score matrices");
    }
    ScoreMatrix acc = fuse(inputs[0], inputs[1]);
    for (std::size_t i = 2; i < inputs.size(); ++i) {
        acc = fuse(acc, inputs[i]);
    }
    return acc;
}

/// Per-query min-max rescaling into [0, 1]; constant rows become 0. Off by
/// default in the pipeline, where raw scores are added.
inline ScoreMatrix minmax_normalize(const ScoreMatrix& m) {
    ScoreMatrix out = m;
    for (std::size_t q = 0; q < m.n_queries(); ++q) {
        const auto r = m.row(q);
        if (r.empty()) {
            continue;
        }
        const auto [lo, hi] = std::minmax_element(r.begin(), r.end());
        const double span = *hi - *lo;
        for (std::size_t d = 0; d < m.n_docs(); ++d) {
            out.at(q, d) = span > 0.0 ? (m.at(q, d) - *lo) / span : 0.0;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// TSV interchange
// ---------------------------------------------------------------------------

inline constexpr std::string_view tsv_header = "#query_id\tdoc_id\tscore";

inline std::string serialize_scores(const ScoreMatrix& m) {
    m.validate();
    std::string out(tsv_header);
    out += '\n';
    for (std::size_t q = 0; q < m.n_queries(); ++q) {
        for (std::size_t d = 0; d < m.n_docs(); ++d) {
            out += m.query_ids[q];
            out += '\t';
            out += m.doc_ids[d];
            out += '\t';
            out += format_double(m.at(q, d));
            out += '\n';
        }
    }
    return out;
}

/// Parses score TSV. Lines starting with '#' are comments; each data line
/// is query_id<TAB>doc_id<TAB>score. The result is order-normalized.
inline ScoreMatrix parse_scores(std::string_view text, std::string source = {}) {
    std::vector<std::string> queries;
    std::vector<std::string> docs;
    std::unordered_map<std::string, std::size_t> qpos;
    std::unordered_map<std::string, std::size_t> dpos;
    std::map<std::pair<std::size_t, std::size_t>, double> entries;

    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) {
            nl = text.size();
        }
        std::string_view line = text.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.remove_suffix(1);
        }
        if (line.empty() || line.front() == '#') {
            continue;
        }
        const auto t1 = line.find('\t');
        const auto t2 = t1 == std::string_view::npos ? t1 : line.find('\t', t1 + 1);
        if (t2 == std::string_view::npos || line.find('\t', t2 + 1) != std::string_view::npos) {
            throw ParseError(line_no, "expected 3 tab-separated fields");
        }
        const std::string q(line.substr(0, t1));
        const std::string d(line.substr(t1 + 1, t2 - t1 - 1));
        const std::string value(line.substr(t2 + 1));
        if (q.empty() || d.empty()) {
            throw ParseError(line_no, "empty query or document id");
        }
        char* end = nullptr;
        const double s = std::strtod(value.c_str(), &end);
        if (value.empty() || end != value.c_str() + value.size() || !std::isfinite(s)) {
            throw ParseError(line_no, "bad score '" + value + "'");
        }
        auto [qi, qnew] = qpos.emplace(q, queries.size());
        if (qnew) {
            queries.push_back(q);
        }
        auto [di, dnew] = dpos.emplace(d, docs.size());
        if (dnew) {
            docs.push_back(d);
        }
        if (!entries.emplace(std::pair{qi->second, di->second}, s).second) {
            throw ParseError(line_no, "duplicate entry for (" + q + ", " + d + ")");
        }
    }
    ScoreMatrix m(std::move(queries), std::move(docs), std::move(source));
    for (const auto& [key, s] : entries) {
        m.at(key.first, key.second) = s;
    }
    return normalize_order(m);
}

inline void export_scores(const ScoreMatrix& m, const std::filesystem::path& path) {
    write_file_atomic(path, serialize_scores(m));
}

inline ScoreMatrix import_scores(const std::filesystem::path& path) {
    return parse_scores(read_file(path), path.stem().string());
}

}  // namespace hybrid_rank::fusion
