#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "qin/rsu.hpp"

using qin::RelevanceIndex;
using qin::RsuConfig;
using qin::RsuVariant;
using qin::ScoredPos;
using qin::Selected;
using qin::SeqWindow;

namespace {

// item i gets query-relevance scores[i-1]; vectors live on the unit circle so
// the dot product reproduces the requested score exactly in float
RelevanceIndex line_index(const std::vector<double>& scores, const std::vector<double>& target_scores = {}) {
    std::vector<float> items{0.f, 0.f};
    for (double s : scores) {
        items.push_back(static_cast<float>(s));
        items.push_back(static_cast<float>(std::sqrt(std::max(0.0, 1.0 - s * s))));
    }
    std::vector<float> queries{0.f, 0.f, 1.f, 0.f};
    (void)target_scores;
    return RelevanceIndex(2, std::move(items), std::move(queries));
}

SeqWindow window_of(const std::vector<int>& items) {
    SeqWindow w;
    const int L = static_cast<int>(items.size());
    w.items = items;
    w.engagement.assign(L, 1);
    w.queries.assign(L, 0);
    w.live.assign(L, 1);
    w.timestamps.assign(L, 0);
    for (int p = 0; p < L; ++p) {
        w.timestamps[p] = p + 1;
        if (items[p] == 0)
            w.live[p] = 0;
        else
            ++w.n_live;
    }
    return w;
}

Selected oracle_select(std::vector<ScoredPos> cands, int k) {
    std::sort(cands.begin(), cands.end(), [](const ScoredPos& a, const ScoredPos& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.pos > b.pos;
    });
    if (static_cast<int>(cands.size()) > k) cands.resize(k);
    std::sort(cands.begin(), cands.end(), [](const ScoredPos& a, const ScoredPos& b) { return a.pos < b.pos; });
    Selected s;
    for (const auto& c : cands) {
        s.positions.push_back(c.pos);
        s.scores.push_back(c.score);
    }
    return s;
}

}  // namespace

TEST_CASE("top-k keeps the best scores in chronological order", "[rsu]") {
    std::vector<ScoredPos> cands{{0.9, 0}, {0.1, 1}, {0.5, 2}};
    auto s = qin::select_top_k(cands, 2);
    REQUIRE(s.positions == std::vector<int>{0, 2});
    REQUIRE(s.scores == std::vector<double>{0.9, 0.5});

    auto all = qin::select_top_k(cands, 10);
    REQUIRE(all.positions == std::vector<int>{0, 1, 2});
}

TEST_CASE("score ties fall to the most recent behaviors", "[rsu]") {
    std::vector<ScoredPos> cands;
    for (int p = 0; p < 5; ++p) cands.push_back({0.5, p});
    auto s = qin::select_top_k(cands, 2);
    REQUIRE(s.positions == std::vector<int>{3, 4});

    // a tie at the cut: equal-score earlier item loses to the later one
    std::vector<ScoredPos> mixed{{0.9, 0}, {0.5, 1}, {0.5, 3}, {0.1, 4}};
    auto m = qin::select_top_k(mixed, 2);
    REQUIRE(m.positions == std::vector<int>{0, 3});
}

TEST_CASE("random instances match the full-sort oracle", "[rsu]") {
    const std::vector<double> pool{-1.0, -0.5, -0.25, 0.0, 0.25, 0.5, 0.75, 1.0};
    qin::Rng rng(2024);
    for (int inst = 0; inst < 1200; ++inst) {
        const int n = 1 + static_cast<int>(rng.below(200));
        const int n_vals = 1 + static_cast<int>(rng.below(6));  // few distinct values -> many ties
        std::vector<double> scores(n);
        std::vector<ScoredPos> cands;
        for (int i = 0; i < n; ++i) {
            scores[i] = pool[rng.below(n_vals)];
            cands.push_back({scores[i], i});
        }
        const int k = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(n) + 5));

        auto got = qin::select_top_k(cands, k);
        auto want = oracle_select(cands, k);
        REQUIRE(got.positions == want.positions);
        REQUIRE(got.scores == want.scores);

        // the same selection through the index-backed query stage
        auto ix = line_index(scores);
        std::vector<int> ids(n);
        for (int i = 0; i < n; ++i) ids[i] = i + 1;
        auto via_index = qin::stage_one(ix, 1, window_of(ids), k);
        std::vector<ScoredPos> float_cands;
        for (int i = 0; i < n; ++i)
            float_cands.push_back({static_cast<double>(static_cast<float>(scores[i])), i});
        auto float_want = oracle_select(float_cands, k);
        REQUIRE(via_index.positions == float_want.positions);

        // growing k never drops a selected position
        auto bigger = qin::select_top_k(cands, k + 1);
        std::set<int> big(bigger.positions.begin(), bigger.positions.end());
        for (int p : got.positions) REQUIRE(big.count(p) == 1);
    }
}

TEST_CASE("stage two keeps a subset of stage one and matches composition", "[rsu]") {
    qin::Rng rng(7);
    for (int inst = 0; inst < 200; ++inst) {
        const int n = 5 + static_cast<int>(rng.below(60));
        std::vector<double> scores(n);
        for (auto& s : scores) s = -1.0 + 2.0 * rng.uniform01();
        auto ix = line_index(scores);
        std::vector<int> ids(n);
        for (int i = 0; i < n; ++i) ids[i] = i + 1;
        auto w = window_of(ids);

        const int k1 = 2 + static_cast<int>(rng.below(10));
        const int k2 = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(k1) - 1));
        const int target = 1 + static_cast<int>(rng.below(n));

        auto s1 = qin::stage_one(ix, 1, w, k1);
        auto s2 = qin::stage_two(ix, target, w, s1, k2);
        std::set<int> s1set(s1.positions.begin(), s1.positions.end());
        for (int p : s2.positions) REQUIRE(s1set.count(p) == 1);

        RsuConfig cfg;
        cfg.k1 = k1;
        cfg.k2 = k2;
        cfg.variant = RsuVariant::TwoStage;
        auto combined = qin::run_variant(cfg, ix, {}, 1, target, w);
        REQUIRE(combined.positions == s2.positions);
        REQUIRE(combined.scores == s2.scores);
    }
}

TEST_CASE("a query-irrelevant but target-relevant item splits the variants", "[rsu]") {
    // item 1 aligns with the query, item 2 with the target
    std::vector<float> items{0.f, 0.f, /*item1*/ 1.f, 0.f, /*item2*/ 0.f, 1.f};
    std::vector<float> queries{0.f, 0.f, /*query1*/ 1.f, 0.f};
    RelevanceIndex ix(2, items, queries);
    auto w = window_of({1, 2});

    // query stage keeps item 1 only, so the target stage can never see item 2
    auto s1 = qin::stage_one(ix, 1, w, 1);
    REQUIRE(s1.positions == std::vector<int>{0});
    auto s2 = qin::stage_two(ix, 2, w, s1, 1);
    REQUIRE(s2.positions == std::vector<int>{0});

    RsuConfig sim;
    sim.k2 = 1;
    sim.variant = RsuVariant::OneStageTarget;
    auto direct = qin::run_variant(sim, ix, {}, 1, 2, w);
    REQUIRE(direct.positions == std::vector<int>{1});
}

TEST_CASE("one-stage query variant selects k2 directly", "[rsu]") {
    auto ix = line_index({0.9, 0.1, 0.5, 0.7});
    auto w = window_of({1, 2, 3, 4});
    RsuConfig cfg;
    cfg.k2 = 2;
    cfg.variant = RsuVariant::OneStageQuery;
    auto s = qin::run_variant(cfg, ix, {}, 1, 3, w);
    REQUIRE(s.positions == std::vector<int>{0, 3});
}

TEST_CASE("full-length one-stage selection is the identity", "[rsu]") {
    auto ix = line_index({0.3, 0.8, -0.5});
    auto w = window_of({1, 2, 3});
    RsuConfig cfg;
    cfg.k2 = 3;
    cfg.variant = RsuVariant::OneStageTarget;
    auto s = qin::run_variant(cfg, ix, {}, 1, 2, w);
    REQUIRE(s.positions == std::vector<int>{0, 1, 2});
}

TEST_CASE("hard search scores attribute equality", "[rsu]") {
    auto ix = line_index({0.1, 0.2, 0.3, 0.4});
    auto w = window_of({1, 2, 3, 4});
    std::vector<int> attr{0, 7, 9, 7, 9};  // items 1,3 share attr 7; 2,4 share 9
    RsuConfig cfg;
    cfg.k2 = 2;
    cfg.variant = RsuVariant::OneStageTarget;
    cfg.hard_search = true;
    auto s = qin::run_variant(cfg, ix, attr, 1, /*target=*/1, w);
    REQUIRE(s.positions == std::vector<int>{0, 2});
    REQUIRE(s.scores == std::vector<double>{1.0, 1.0});

    REQUIRE_THROWS_AS(qin::run_variant(cfg, ix, {}, 1, 1, w), std::invalid_argument);
}

TEST_CASE("empty and padded windows yield empty selections", "[rsu]") {
    auto ix = line_index({0.5});
    auto empty = window_of({0, 0, 0});
    REQUIRE(qin::stage_one(ix, 1, empty, 5).positions.empty());
    RsuConfig cfg;
    cfg.k1 = 5;
    cfg.k2 = 2;
    REQUIRE(qin::run_variant(cfg, ix, {}, 1, 1, empty).positions.empty());
}

TEST_CASE("a masked query degrades to recency selection", "[rsu]") {
    auto ix = line_index({0.9, 0.1, 0.5});
    auto w = window_of({1, 2, 3});
    auto s = qin::stage_one(ix, /*query=*/0, w, 2);  // zero vector: all scores 0
    REQUIRE(s.positions == std::vector<int>{1, 2});
}

TEST_CASE("config validation rejects a non-shrinking two-stage", "[rsu]") {
    RsuConfig cfg;
    cfg.k1 = 5;
    cfg.k2 = 5;
    REQUIRE_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg.k2 = 0;
    REQUIRE_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg.k1 = 6;
    cfg.k2 = 5;
    REQUIRE_NOTHROW(cfg.validate());
}

TEST_CASE("complexity benchmark reports the analytic ratio honestly", "[rsu]") {
    auto rep = qin::complexity_bench(400, 8, 4, 20, 5, 3, 1);
    REQUIRE(rep.analytic_ratio == Catch::Approx(400.0 * 8 / (400 + 8 * 20)).margin(1e-12));
    REQUIRE(rep.two_stage_mean_ns > 0);
    REQUIRE(rep.per_target_mean_ns > 0);
    REQUIRE(rep.measured_ratio > 0);

    // single target: the analytic model predicts two-stage overhead, not a win
    auto single = qin::complexity_bench(400, 1, 4, 20, 5, 2, 1);
    REQUIRE(single.analytic_ratio == Catch::Approx(400.0 / 420.0).margin(1e-12));
    REQUIRE(single.analytic_ratio < 1.0);

    const double big = qin::complexity_bench(10000, 100, 8, 50, 10, 1, 1).analytic_ratio;
    REQUIRE(big == Catch::Approx(1e6 / 1.5e4).margin(1e-9));

    REQUIRE_THROWS_AS(qin::complexity_bench(10, 5, 4, 20, 5, 1, 1), std::invalid_argument);

    const std::string csv = rep.csv();
    REQUIRE(csv.find("two_stage,400,8,4,20,5,") != std::string::npos);
    REQUIRE(csv.find("per_target,400,8,4,20,5,") != std::string::npos);
}
