#include <algorithm>
#include <map>
#include <set>
#include <sstream>
#include <numeric>
#include <string>
#include <unordered_map>
#include <vector>

#include <gtest/gtest.h>

#include "hybrid_rank/errors.hpp"
#include "hybrid_rank/evalx.hpp"
#include "hybrid_rank/fusion.hpp"
#include "hybrid_rank/problex.hpp"
#include "hybrid_rank/rng.hpp"
#include "hybrid_rank/util.hpp"
#include "planted.hpp"

namespace hr = hybrid_rank;
namespace evalx = hybrid_rank::evalx;
namespace fusion = hybrid_rank::fusion;
namespace px = hybrid_rank::problex;

namespace {

std::unordered_map<std::string, std::string> read_gold(const std::string& path) {
    std::unordered_map<std::string, std::string> gold;
    std::istringstream in(hr::read_file(path));
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') {
            continue;
        }
        const auto tab = line.find('\t');
        gold[line.substr(0, tab)] = line.substr(tab + 1);
    }
    return gold;
}

}  // namespace

TEST(Evaluate, RanksOneTwoFourFixture) {
    const auto m = fusion::import_scores(std::string(HR_FIXTURES) + "/ranks_124.tsv");
    const auto r = evalx::evaluate(m, read_gold(std::string(HR_FIXTURES) + "/ranks_124.gold.tsv"));
    ASSERT_EQ(r.per_query.size(), 3u);
    EXPECT_EQ(r.per_query[0].rank_of_relevant, 1u);
    EXPECT_EQ(r.per_query[1].rank_of_relevant, 2u);
    EXPECT_EQ(r.per_query[2].rank_of_relevant, 4u);
    EXPECT_EQ(r.mrr, 7.0 / 12.0);
    EXPECT_EQ(r.p_at.at(1), 1.0 / 3.0);
    EXPECT_EQ(r.p_at.at(3), 2.0 / 3.0);
    EXPECT_EQ(r.p_at.at(10), 1.0);
    EXPECT_EQ(r.n_queries, 3u);
    EXPECT_EQ(r.pool_size, 5u);
    const auto j = evalx::to_json(r);
    EXPECT_EQ(j["p_at_3"].get<double>(), 2.0 / 3.0);
    EXPECT_EQ(evalx::per_query_tsv(r), "#query_id\trank\nq1\t1\nq2\t2\nq3\t4\n");
}

TEST(Evaluate, MatchesSortBasedOracleOnRandomMatrix) {
    hr::Rng rng(99);
    const std::size_t nq = 200, nd = 30;
    std::vector<std::string> qs, ds;
    for (std::size_t i = 0; i < nq; ++i) {
        qs.push_back("q" + std::to_string(i));
    }
    for (std::size_t j = 0; j < nd; ++j) {
        ds.push_back(std::to_string(j));
    }
    fusion::ScoreMatrix m(qs, ds);
    std::unordered_map<std::string, std::string> gold;
    std::vector<std::size_t> gold_col(nq);
    for (std::size_t q = 0; q < nq; ++q) {
        for (std::size_t d = 0; d < nd; ++d) {
            m.at(q, d) = static_cast<double>(hr::uniform_index(rng, 10)) / 4.0;  // many ties
        }
        gold_col[q] = hr::uniform_index(rng, nd);
        gold[qs[q]] = ds[gold_col[q]];
    }
    double rr = 0.0;
    std::map<std::size_t, std::size_t> hits;
    for (std::size_t q = 0; q < nq; ++q) {
        std::vector<std::size_t> order(nd);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return m.at(q, a) > m.at(q, b); });
        const auto rank = static_cast<std::size_t>(std::find(order.begin(), order.end(), gold_col[q]) - order.begin()) + 1;
        rr += 1.0 / static_cast<double>(rank);
        for (std::size_t k : {1u, 3u, 10u}) {
            hits[k] += rank <= k;
        }
    }
    for (unsigned threads : {1u, 4u}) {
        const auto r = evalx::evaluate(m, gold, std::array<std::size_t, 3>{1, 3, 10}, threads);
        EXPECT_EQ(r.mrr, rr / static_cast<double>(nq));
        for (std::size_t k : {1u, 3u, 10u}) {
            EXPECT_EQ(r.p_at.at(k), static_cast<double>(hits[k]) / static_cast<double>(nq));
        }
    }
}

TEST(Evaluate, IsInvariantToRowAndColumnOrder) {
    const auto m = fusion::import_scores(std::string(HR_FIXTURES) + "/ranks_124.tsv");
    const auto gold = read_gold(std::string(HR_FIXTURES) + "/ranks_124.gold.tsv");
    auto text = fusion::serialize_scores(m);
    // Reverse the data lines; the parser re-normalizes order.
    std::vector<std::string> lines;
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        lines.push_back(line);
    }
    std::reverse(lines.begin(), lines.end());
    std::string reversed = "#query_id\tdoc_id\tscore\n";
    for (const auto& l : lines) {
        reversed += l + "\n";
    }
    EXPECT_EQ(evalx::evaluate(fusion::parse_scores(reversed), gold), evalx::evaluate(m, gold));
}

TEST(Evaluate, MissingGoldIsAnError) {
    const auto m = fusion::import_scores(std::string(HR_FIXTURES) + "/ranks_124.tsv");
    EXPECT_THROW((void)evalx::evaluate(m, {{"q1", "d1"}}), hr::MissingGold);
    EXPECT_THROW((void)evalx::evaluate(m, {{"q1", "d1"}, {"q2", "d1"}, {"q3", "nope"}}), hr::MissingGold);
}

TEST(Evaluate, EmptySummaryIsZero) {
    const auto r = evalx::summarize({}, 0);
    EXPECT_EQ(r.mrr, 0.0);
    EXPECT_EQ(r.p_at.at(10), 0.0);
}

TEST(GridSearch, GridSizes) {
    const auto g = evalx::bm25_grid();
    EXPECT_EQ(g.size(), 70u);
    EXPECT_EQ(g.front(), (px::Bm25Params{0.5, 0.3}));
    EXPECT_EQ(g.back(), (px::Bm25Params{5.0, 0.9}));
    std::set<std::pair<double, double>> unique;
    for (const auto& p : g) {
        unique.emplace(p.k1, p.b);
    }
    EXPECT_EQ(unique.size(), 70u);
    const auto mu = evalx::mu_grid();
    EXPECT_EQ(mu.size(), 10u);
    EXPECT_TRUE(std::is_sorted(mu.begin(), mu.end()));
}

TEST(GridSearch, RecoversPlantedObjectiveOptimum) {
    const auto grid = evalx::bm25_grid();
    for (const auto& planted : grid) {
        const auto r = evalx::grid_search<px::Bm25Params>(grid, [&](const px::Bm25Params& p) {
            return -std::abs(p.k1 - planted.k1) - std::abs(p.b - planted.b);
        });
        ASSERT_EQ(r.best, planted);
        EXPECT_EQ(r.grid.size(), 70u);
    }
}

TEST(GridSearch, TiesGoToSmallestParameters) {
    const auto grid = evalx::bm25_grid();
    const auto r = evalx::grid_search<px::Bm25Params>(grid, [](const px::Bm25Params& p) { return p.k1 >= 2.0 ? 1.0 : 0.0; });
    EXPECT_EQ(r.best, (px::Bm25Params{2.0, 0.3}));
    const auto mus = evalx::mu_grid();
    const auto m = evalx::grid_search<px::DirichletParams>(mus, [](const px::DirichletParams&) { return 0.5; });
    EXPECT_EQ(m.best.mu, 100.0);
    EXPECT_THROW((void)evalx::grid_search<px::DirichletParams>(std::vector<px::DirichletParams>{},
                                                               [](const px::DirichletParams&) { return 0.0; }),
                 hr::UsageError);
}

namespace {

struct PlantedFixture : ::testing::Test {
    static void SetUpTestSuite() {
        docs = new std::vector<hr::Document>(hr::testing::planted_documents(1000, 17));
        stats = new px::LexStats(px::build_lex_stats(*docs, {}));
    }
    static void TearDownTestSuite() {
        delete docs;
        delete stats;
    }
    static std::vector<hr::Document>* docs;
    static px::LexStats* stats;
};

std::vector<hr::Document>* PlantedFixture::docs = nullptr;
px::LexStats* PlantedFixture::stats = nullptr;

}  // namespace

TEST_F(PlantedFixture, TuneBm25RecoversPlantedParameters) {
    for (const px::Bm25Params planted : {px::Bm25Params{2.5, 0.5}, px::Bm25Params{1.0, 0.8}}) {
        const auto p = hr::testing::plant_bm25(*docs, *stats, planted, 5);
        ASSERT_TRUE(p.complete) << "could not rule out every grid point after " << p.n_candidates << " candidates";
        const auto r = evalx::tune_bm25(p.task, *stats, 4);
        EXPECT_EQ(r.best, planted);
        EXPECT_EQ(r.best_objective, 1.0);
        for (const auto& g : r.grid) {
            if (!(g.params == planted)) {
                EXPECT_LT(g.objective, 1.0);
            }
        }
    }
}

TEST_F(PlantedFixture, TuneMuRecoversPlantedParameter) {
    for (const double mu : {500.0, 2000.0}) {
        const auto p = hr::testing::plant_mu(*docs, *stats, {mu}, 6);
        ASSERT_TRUE(p.complete) << "could not rule out every grid point after " << p.n_candidates << " candidates";
        const auto r = evalx::tune_mu(p.task, *stats, 4);
        EXPECT_EQ(r.best.mu, mu);
        EXPECT_EQ(r.best_objective, 1.0);
    }
}

TEST_F(PlantedFixture, TaskMrrMatchesReferenceScorer) {
    const hr::testing::ReferenceCollection ref(*docs);
    hr::Rng rng(4);
    evalx::LexTask task;
    std::vector<std::vector<std::string>> raw;
    for (std::size_t i = 0; i < 20; ++i) {
        raw.push_back({"w" + std::to_string(hr::uniform_index(rng, 50)), "w" + std::to_string(hr::uniform_index(rng, 50))});
        task.queries.push_back(px::prepare_query(raw.back(), *stats));
        task.gold.push_back(hr::uniform_index(rng, 100));
    }
    for (std::size_t d = 0; d < 100; ++d) {
        task.pool.push_back(d * 3);
        task.pool_ids.push_back(static_cast<std::int64_t>(d * 3));
    }
    const px::Bm25Params p{1.5, 0.6};
    double rr = 0.0;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const double g = ref.bm25(raw[i], task.pool[task.gold[i]], p.k1, p.b);
        std::size_t rank = 1;
        for (std::size_t j = 0; j < task.pool.size(); ++j) {
            const double s = ref.bm25(raw[i], task.pool[j], p.k1, p.b);
            // Near-equal scores are ties broken by pool position (= id order).
            const bool tie = std::abs(s - g) <= 1e-12 * std::max(1.0, std::abs(g));
            if (j != task.gold[i] && ((!tie && s > g) || (tie && j < task.gold[i]))) {
                ++rank;
            }
        }
        rr += 1.0 / static_cast<double>(rank);
    }
    const double got = evalx::task_mrr(task, [&](const px::PreparedQuery& q, std::size_t d) { return px::bm25_score(q, d, *stats, p); });
    EXPECT_NEAR(got, rr / static_cast<double>(raw.size()), 1e-12);
    EXPECT_THROW((void)evalx::tune_bm25(evalx::LexTask{}, *stats), hr::EmptyCorpus);
}
