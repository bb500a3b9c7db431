#include <cmath>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "hybrid_rank/errors.hpp"
#include "hybrid_rank/problex.hpp"
#include "hybrid_rank/stopwords.hpp"
#include "toy.hpp"

namespace hr = hybrid_rank;
namespace px = hybrid_rank::problex;

namespace {

struct ToyLex : ::testing::Test {
    hr::testing::Toy toy = hr::testing::load_toy(HR_FIXTURES);
    px::LexStats stats = px::build_lex_stats(toy.documents, hr::default_stopwords());
};

}  // namespace

TEST_F(ToyLex, StatisticsAreConsistent) {
    EXPECT_EQ(stats.n_docs, 5u);
    std::uint64_t total = 0;
    for (std::size_t d = 0; d < stats.n_docs; ++d) {
        std::uint64_t len = 0;
        for (auto [id, c] : stats.doc_terms[d]) {
            len += c;
            EXPECT_EQ(stats.tf(d, id), c);
        }
        EXPECT_EQ(len, stats.doc_len[d]);
        total += len;
    }
    EXPECT_EQ(total, stats.collection_len);
    EXPECT_TRUE(std::is_sorted(stats.terms.begin(), stats.terms.end()));
    const auto cat = stats.term_index.at("cat");
    EXPECT_EQ(stats.df[cat], 3u);
    EXPECT_EQ(stats.collection_tf[cat], 4u);
    EXPECT_EQ(stats.tf(0, cat), 2u);
    EXPECT_FALSE(stats.term_index.contains("the"));
}

TEST_F(ToyLex, Bm25MatchesReference) {
    for (const auto& [key, table] : toy.oracle["bm25"].items()) {
        const auto comma = key.find(',');
        const px::Bm25Params p{std::stod(key.substr(0, comma)), std::stod(key.substr(comma + 1))};
        for (std::size_t q = 0; q < toy.queries.size(); ++q) {
            for (std::size_t d = 0; d < stats.n_docs; ++d) {
                EXPECT_NEAR(px::bm25_score(toy.queries[q], d, stats, p), table[q][d].get<double>(), 1e-9)
                    << key << " q" << q << " d" << d;
            }
        }
    }
}

TEST_F(ToyLex, DirichletLmMatchesReference) {
    for (const auto& [key, table] : toy.oracle["lm"].items()) {
        const px::DirichletParams p{std::stod(key)};
        for (std::size_t q = 0; q < toy.queries.size(); ++q) {
            for (std::size_t d = 0; d < stats.n_docs; ++d) {
                EXPECT_NEAR(px::lm_dirichlet_score(toy.queries[q], d, stats, p), table[q][d].get<double>(), 1e-9)
                    << key << " q" << q << " d" << d;
            }
        }
    }
}

TEST_F(ToyLex, Bm25IdfIsNonNegativeEvenForUbiquitousTerms) {
    std::vector<hr::Document> docs(3);
    for (auto& d : docs) {
        d.tokens = {"everywhere", "x"};
    }
    docs[0].tokens.push_back("rare");
    const auto s = px::build_lex_stats(docs, {});
    EXPECT_GT(px::bm25_idf(s, s.term_index.at("everywhere")), 0.0);
    EXPECT_GT(px::bm25_idf(s, s.term_index.at("rare")), px::bm25_idf(s, s.term_index.at("everywhere")));
}

TEST_F(ToyLex, Bm25CountsUniqueQueryTermsOnly) {
    const std::vector<std::string> once{"dog", "garden"};
    const std::vector<std::string> twice{"dog", "dog", "garden"};
    const px::Bm25Params p;
    EXPECT_EQ(px::bm25_score(once, 1, stats, p), px::bm25_score(twice, 1, stats, p));
}

TEST_F(ToyLex, LmCountsEveryQueryOccurrence) {
    const std::vector<std::string> once{"dog"};
    const std::vector<std::string> twice{"dog", "dog"};
    const px::DirichletParams p{100.0};
    EXPECT_NEAR(px::lm_dirichlet_score(twice, 1, stats, p), 2.0 * px::lm_dirichlet_score(once, 1, stats, p), 1e-12);
}

TEST_F(ToyLex, UnknownAndStopwordQueryTermsAreIgnored) {
    const std::vector<std::string> noise{"the", "zebra", "of"};
    for (std::size_t d = 0; d < stats.n_docs; ++d) {
        EXPECT_EQ(px::bm25_score(noise, d, stats, {}), 0.0);
        EXPECT_EQ(px::lm_dirichlet_score(noise, d, stats, {}), 0.0);
    }
    EXPECT_TRUE(px::prepare_query(noise, stats).terms.empty());
}

TEST_F(ToyLex, LmPrefersDocumentsContainingTheTerm) {
    const std::vector<std::string> q{"bank"};
    const px::DirichletParams p{10.0};
    EXPECT_GT(px::lm_dirichlet_score(q, 2, stats, p), px::lm_dirichlet_score(q, 0, stats, p));
}

TEST_F(ToyLex, ScorePoolFollowsPoolOrder) {
    const auto q = px::prepare_query(toy.queries[1], stats);
    const std::vector<std::size_t> pool{4, 2, 3};
    const auto s = px::score_pool(q, pool, [&](const px::PreparedQuery& pq, std::size_t d) {
        return px::bm25_score(pq, d, stats, {});
    });
    ASSERT_EQ(s.size(), 3u);
    EXPECT_EQ(s[1], px::bm25_score(q, 2, stats, {}));
    EXPECT_EQ(s[0], 0.0);
}

TEST_F(ToyLex, PersistenceRoundTrips) {
    const auto bytes = px::serialize_lex_stats(stats);
    const auto back = px::parse_lex_stats(bytes);
    EXPECT_EQ(back.terms, stats.terms);
    EXPECT_EQ(back.doc_terms, stats.doc_terms);
    EXPECT_EQ(back.df, stats.df);
    EXPECT_EQ(back.collection_tf, stats.collection_tf);
    EXPECT_EQ(back.collection_len, stats.collection_len);
    EXPECT_EQ(back.avg_doc_len, stats.avg_doc_len);
    EXPECT_EQ(back.stopwords, stats.stopwords);
    EXPECT_EQ(px::serialize_lex_stats(back), bytes);
    EXPECT_THROW((void)px::parse_lex_stats(bytes.substr(0, bytes.size() / 2)), hr::FormatError);
    EXPECT_THROW((void)px::parse_lex_stats(bytes + "x"), hr::FormatError);
}

TEST(Lex, EmptyCollectionIsAnError) {
    EXPECT_THROW((void)px::build_lex_stats(std::vector<hr::Document>{}, {}), hr::EmptyCorpus);
}
