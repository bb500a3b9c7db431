#pragma once

// Finite-difference check of the BOE batch gradient. The loss used for the
// numeric side is written out here from scratch rather than reusing the
// library's encoder.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "hybrid_rank/boe.hpp"
#include "hybrid_rank/rng.hpp"

namespace hybrid_rank::testing {

struct GradCheckCase {
    boe::EmbeddingTable table;
    std::vector<QueryArticlePair> batch;
    std::vector<std::size_t> negatives;
    boe::TrainConfig cfg;
};

/// Mean-pool, normalize, score; zero vector when nothing is in vocabulary.
inline std::vector<double> reference_encode(const std::vector<std::string>& tokens, const boe::EmbeddingTable& t,
                                            const std::vector<double>& w) {
    std::vector<double> v(t.dim, 0.0);
    double n = 0.0;
    for (const auto& tok : tokens) {
        auto it = t.vocab.find(tok);
        if (it == t.vocab.end()) {
            continue;
        }
        for (std::size_t k = 0; k < t.dim; ++k) {
            v[k] += w[it->second * t.dim + k];
        }
        n += 1.0;
    }
    if (n == 0.0) {
        return v;
    }
    double sq = 0.0;
    for (auto& x : v) {
        x /= n;
        sq += x * x;
    }
    const double norm = std::sqrt(sq);
    for (auto& x : v) {
        x /= norm;
    }
    return v;
}

inline double reference_score(const std::vector<double>& a, const std::vector<double>& b, boe::LossScore mode) {
    double c = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        c += a[k] * b[k];
    }
    return mode == boe::LossScore::cosine ? c : 1.0 / (1.0 + std::exp(-c));
}

/// Hinge margins delta - s_p + s_n of every sample (before clipping at 0).
inline std::vector<double> reference_margins(const GradCheckCase& c, const std::vector<double>& w) {
    std::vector<std::vector<double>> q, a;
    for (const auto& p : c.batch) {
        q.push_back(reference_encode(p.query.tokens, c.table, w));
        a.push_back(reference_encode(p.article.tokens, c.table, w));
    }
    std::vector<double> out;
    for (std::size_t i = 0; i < c.batch.size(); ++i) {
        out.push_back(c.cfg.delta - reference_score(q[i], a[i], c.cfg.loss_score) +
                      reference_score(q[i], a[c.negatives[i]], c.cfg.loss_score));
    }
    return out;
}

inline double reference_loss(const GradCheckCase& c, const std::vector<double>& w) {
    double s = 0.0;
    for (double m : reference_margins(c, w)) {
        s += std::max(0.0, m);
    }
    return s;
}

/// Random small batch with weights in [-1, 1] so that many hinges are active.
inline GradCheckCase random_case(Rng& rng, std::size_t dim, boe::LossScore mode) {
    GradCheckCase c;
    const std::size_t vocab = 4 + uniform_index(rng, 9);
    std::vector<std::string> words;
    for (std::size_t i = 0; i < vocab; ++i) {
        words.push_back("t" + std::to_string(i));
    }
    c.table = boe::init_table(words, dim, rng());
    for (auto& x : c.table.weights) {
        x = 2.0 * uniform01(rng) - 1.0;
    }
    auto draw = [&](std::size_t max_len) {
        std::vector<std::string> t;
        const auto len = 1 + uniform_index(rng, max_len);
        for (std::size_t k = 0; k < len; ++k) {
            // One in eight tokens is out of vocabulary.
            t.push_back(uniform_index(rng, 8) == 0 ? "oov" : words[uniform_index(rng, vocab)]);
        }
        return t;
    };
    const std::size_t n = 2 + uniform_index(rng, 4);
    for (std::size_t i = 0; i < n; ++i) {
        QueryArticlePair p;
        p.pair_id = static_cast<std::int64_t>(i);
        p.query.tokens = draw(4);
        p.article.tokens = draw(8);
        c.batch.push_back(std::move(p));
    }
    for (std::size_t i = 0; i < n; ++i) {
        auto j = uniform_index(rng, n - 1);
        c.negatives.push_back(j >= i ? j + 1 : j);
    }
    c.cfg.dim = dim;
    c.cfg.loss_score = mode;
    c.cfg.delta = 0.5;
    return c;
}

struct GradCheckResult {
    bool usable = false;  // false when a hinge or an encoding norm is near its kink
    double rel_error = 0.0;
    double analytic_norm = 0.0;
};

inline GradCheckResult check_gradient(const GradCheckCase& c, double h = 1e-5) {
    GradCheckResult r;
    const auto& w0 = c.table.weights;
    for (double m : reference_margins(c, w0)) {
        if (std::abs(m) < 1e-3) {
            return r;
        }
    }
    // Encodings whose mean is nearly zero make normalization ill-conditioned.
    for (const auto& p : c.batch) {
        for (const auto* toks : {&p.query.tokens, &p.article.tokens}) {
            const auto bag = boe::make_bag(*toks, c.table);
            if (bag.total > 0 && boe::encode(bag, c.table).raw_norm < 1e-2) {
                return r;
            }
        }
    }
    std::vector<boe::PairBags> bags;
    for (const auto& p : c.batch) {
        bags.push_back(boe::make_pair_bags(p, c.table, c.cfg.max_article_len));
    }
    const auto g = boe::batch_gradient(bags, c.table, c.cfg, c.negatives);
    std::vector<double> analytic(w0.size(), 0.0);
    for (std::size_t i = 0; i < g.rows.size(); ++i) {
        const auto row = g.row(i, c.table.dim);
        std::copy(row.begin(), row.end(), analytic.begin() + static_cast<std::ptrdiff_t>(g.rows[i] * c.table.dim));
    }
    std::vector<double> w = w0;
    double diff = 0.0, na = 0.0, nn = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
        w[k] = w0[k] + h;
        const double up = reference_loss(c, w);
        w[k] = w0[k] - h;
        const double down = reference_loss(c, w);
        w[k] = w0[k];
        const double numeric = (up - down) / (2.0 * h);
        diff += (numeric - analytic[k]) * (numeric - analytic[k]);
        na += analytic[k] * analytic[k];
        nn += numeric * numeric;
    }
    r.usable = true;
    r.analytic_norm = std::sqrt(na);
    const double scale = std::max(std::sqrt(na), std::sqrt(nn));
    // Both sides at roundoff level (e.g. terms that cancel exactly) agree on zero.
    r.rel_error = scale < 1e-8 ? 0.0 : std::sqrt(diff) / scale;
    return r;
}

}  // namespace hybrid_rank::testing
