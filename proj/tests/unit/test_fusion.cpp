#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "hybrid_rank/errors.hpp"
#include "hybrid_rank/fusion.hpp"
#include "hybrid_rank/ranking.hpp"
#include "hybrid_rank/rng.hpp"
#include "fusion_cases.hpp"
#include "temp_dir.hpp"

namespace hr = hybrid_rank;
namespace fusion = hybrid_rank::fusion;
using Ids = std::vector<std::string>;

namespace {

fusion::ScoreMatrix matrix(Ids q, Ids d, std::vector<double> s, std::string label = "m") {
    fusion::ScoreMatrix m(std::move(q), std::move(d), std::move(label));
    m.scores = std::move(s);
    return m;
}

}  // namespace

TEST(Fusion, SumPromotesDocumentRankedSecondByBoth) {
    // Each source puts a different document first and d2 second.
    const auto a = matrix({"q1", "q2", "q3"}, {"d1", "d2", "d3"}, {0.9, 0.8, 0.1, 0.9, 0.8, 0.1, 0.5, 0.4, 0.3}, "a");
    const auto b = matrix({"q1", "q2", "q3"}, {"d1", "d2", "d3"}, {0.1, 0.8, 0.9, 0.1, 0.8, 0.9, 0.3, 0.4, 0.5}, "b");
    for (std::size_t q = 0; q < 3; ++q) {
        EXPECT_EQ(hr::testing::ranking(a, q)[1], "d2");
        EXPECT_EQ(hr::testing::ranking(b, q)[1], "d2");
    }
    const auto f = fusion::fuse(a, b);
    EXPECT_EQ(f.source, "a+b");
    for (std::size_t q = 0; q < 3; ++q) {
        // Exhaustive: the document maximizing a + b over all three.
        std::string best;
        double best_s = -1e300;
        for (std::size_t d = 0; d < 3; ++d) {
            const double s = a.at(q, d) + b.at(q, d);
            if (s > best_s) {
                best_s = s;
                best = a.doc_ids[d];
            }
        }
        EXPECT_EQ(hr::testing::ranking(f, q)[0], best);
    }
    EXPECT_EQ(hr::testing::ranking(f, 0)[0], "d2");
    EXPECT_EQ(hr::testing::ranking(f, 1)[0], "d2");
    // In q3 all fused scores tie at 0.8; the id tie-break decides.
    EXPECT_EQ(hr::testing::ranking(f, 2), (Ids{"d1", "d2", "d3"}));
}

TEST(Fusion, ConstantShiftsNeverChangeRankings) {
    hr::Rng rng(31337);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto nq = 1 + hr::uniform_index(rng, 5);
        const auto nd = 2 + hr::uniform_index(rng, 8);
        const auto a = hr::testing::random_dyadic(rng, nq, nd, "a");
        const auto b = hr::testing::random_dyadic(rng, nq, nd, "b");
        auto a2 = a;
        auto b2 = b;
        const double ca = (static_cast<double>(hr::uniform_index(rng, 129)) - 64.0) / 16.0;
        const double cb = (static_cast<double>(hr::uniform_index(rng, 129)) - 64.0) / 16.0;
        for (auto& s : a2.scores) {
            s += ca;
        }
        for (auto& s : b2.scores) {
            s += cb;
        }
        // A per-query shift of one source is also rank-preserving.
        auto b3 = b;
        for (std::size_t q = 0; q < nq; ++q) {
            const double c = (static_cast<double>(hr::uniform_index(rng, 33)) - 16.0) / 8.0;
            for (std::size_t d = 0; d < nd; ++d) {
                b3.at(q, d) += c;
            }
        }
        const auto f = fusion::fuse(a, b);
        const auto f2 = fusion::fuse(a2, b2);
        const auto f3 = fusion::fuse(a, b3);
        for (std::size_t q = 0; q < nq; ++q) {
            ASSERT_EQ(hr::testing::ranking(f, q), hr::testing::ranking(f2, q)) << "trial " << trial;
            ASSERT_EQ(hr::testing::ranking(f, q), hr::testing::ranking(f3, q)) << "trial " << trial;
        }
    }
}

TEST(Fusion, InputOrderDoesNotMatter) {
    const auto a = matrix({"2", "10"}, {"b", "a", "c"}, {1, 2, 3, 4, 5, 6});
    // Same content with rows and columns permuted.
    const auto a_perm = matrix({"10", "2"}, {"c", "b", "a"}, {6, 4, 5, 3, 1, 2});
    const auto b = matrix({"10", "2"}, {"a", "b", "c"}, {0.5, 0.25, 0.125, 1, 1, 1});
    const auto f = fusion::fuse(a, b);
    EXPECT_TRUE(f.same_content(fusion::fuse(a_perm, b)));
    EXPECT_EQ(f.query_ids, (Ids{"2", "10"}));  // numeric ids order numerically
    EXPECT_EQ(f.doc_ids, (Ids{"a", "b", "c"}));
    EXPECT_EQ(f.at(0, 0), 2 + 1);
    EXPECT_EQ(f.at(1, 2), 6 + 0.125);
}

TEST(Fusion, IsCommutativeAndFoldsOverManyInputs) {
    hr::Rng rng(5);
    const auto a = hr::testing::random_dyadic(rng, 3, 4, "a");
    const auto b = hr::testing::random_dyadic(rng, 3, 4, "b");
    const auto c = hr::testing::random_dyadic(rng, 3, 4, "c");
    EXPECT_TRUE(fusion::fuse(a, b).same_content(fusion::fuse(b, a)));
    const auto abc = fusion::fuse_all({a, b, c});
    for (std::size_t i = 0; i < abc.scores.size(); ++i) {
        EXPECT_EQ(abc.scores[i], a.scores[i] + b.scores[i] + c.scores[i]);
    }
    EXPECT_THROW((void)fusion::fuse_all({a}), hr::UsageError);
}

TEST(Fusion, ShapeAndIdMismatchesAreReported) {
    const auto a = matrix({"q1"}, {"d1", "d2"}, {1, 2});
    const auto wider = matrix({"q1"}, {"d1", "d2", "d3"}, {1, 2, 3});
    const auto other = matrix({"q1"}, {"d1", "d9"}, {1, 2});
    EXPECT_THROW((void)fusion::fuse(a, wider), hr::ShapeMismatch);
    try {
        (void)fusion::fuse(a, other);
        FAIL() << "expected IdMismatch";
    } catch (const hr::IdMismatch& e) {
        EXPECT_EQ(e.ids(), (Ids{"d2", "d9"}));
    }
    auto broken = a;
    broken.scores.pop_back();
    EXPECT_THROW((void)fusion::fuse(broken, a), hr::ShapeMismatch);
}

TEST(Fusion, MinmaxRescalesEachQuery) {
    const auto m = fusion::minmax_normalize(matrix({"q1", "q2"}, {"a", "b", "c"}, {2, 4, 3, 5, 5, 5}));
    EXPECT_EQ(m.scores, (std::vector<double>{0, 1, 0.5, 0, 0, 0}));
}

TEST(ScoreTsv, RoundTripsBitExactly) {
    hr::Rng rng(8);
    fusion::ScoreMatrix m({"1", "2", "3"}, {"1", "2", "3", "4"}, "x");
    for (auto& s : m.scores) {
        s = hr::uniform01(rng) * 1e3 - 500.0;
    }
    m.scores[0] = 0.1;
    m.scores[1] = -0.0;
    m.scores[2] = 1e-300;
    const auto text = fusion::serialize_scores(m);
    EXPECT_EQ(text.substr(0, fusion::tsv_header.size()), fusion::tsv_header);
    const auto back = fusion::parse_scores(text, "x");
    EXPECT_TRUE(back.same_content(m));
    EXPECT_EQ(fusion::serialize_scores(back), text);
}

TEST(ScoreTsv, MissingEntriesAreZero) {
    const auto m = fusion::parse_scores("#query_id\tdoc_id\tscore\nq1\td1\t0.5\nq2\td2\t0.25\n");
    EXPECT_EQ(m.query_ids, (Ids{"q1", "q2"}));
    EXPECT_EQ(m.doc_ids, (Ids{"d1", "d2"}));
    EXPECT_EQ(m.scores, (std::vector<double>{0.5, 0.0, 0.0, 0.25}));
}

TEST(ScoreTsv, ParseErrorsCarryLineNumbers) {
    auto line_of = [](const std::string& text) -> std::size_t {
        try {
            (void)fusion::parse_scores(text);
        } catch (const hr::ParseError& e) {
            return e.line();
        }
        return 0;
    };
    EXPECT_EQ(line_of("#h\nq\td\t1\nq\td\n"), 3u);
    EXPECT_EQ(line_of("q\td\tabc\n"), 1u);
    EXPECT_EQ(line_of("q\td\t1\nq\td2\tnan\n"), 2u);
    EXPECT_EQ(line_of("q\td\tinf\n"), 1u);
    EXPECT_EQ(line_of("q\td\t1\nq\td\t2\n"), 2u);
    EXPECT_EQ(line_of("q\td\t1\textra\n"), 1u);
    EXPECT_EQ(line_of("\td\t1\n"), 1u);
    EXPECT_EQ(line_of("q\td\t1 \n"), 1u);
}

TEST(ScoreTsv, ExportImportThroughFiles) {
    hr::testing::TempDir dir;
    const auto m = matrix({"q"}, {"a", "b"}, {0.3, 0.7}, "orig");
    fusion::export_scores(m, dir.path() / "scores.test.tsv");
    const auto back = fusion::import_scores(dir.path() / "scores.test.tsv");
    EXPECT_TRUE(back.same_content(m));
    EXPECT_EQ(back.source, "scores.test");
    EXPECT_THROW((void)fusion::import_scores(dir.path() / "missing.tsv"), hr::IoError);
}
