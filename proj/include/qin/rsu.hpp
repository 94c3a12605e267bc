#pragma once
// Retrieval over behavior windows: a query-conditioned top-K1 stage followed
// by a target-conditioned top-K2 stage, plus one-stage variants. Ties are
// broken toward recency (larger window position), and selections are returned
// in chronological order.

#include <cstdint>
#include <queue>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "qin/common.hpp"
#include "qin/dataset.hpp"
#include "qin/relevance_index.hpp"

namespace qin {

enum class RsuVariant { TwoStage, OneStageQuery, OneStageTarget };

struct RsuConfig {
    int k1 = 50;
    int k2 = 10;
    RsuVariant variant = RsuVariant::TwoStage;
    bool hard_search = false;  // OneStageTarget only: attribute equality instead of dot products

    void validate() const {
        if (k2 < 1) throw std::invalid_argument("rsu: k2 must be >= 1");
        if (variant == RsuVariant::TwoStage && k1 <= k2)
            throw std::invalid_argument(cat("rsu: two-stage needs k1 > k2, got k1=", k1, " k2=", k2));
    }
};

struct ScoredPos {
    double score = 0;
    int pos = 0;
};

struct Selected {
    std::vector<int> positions;   // strictly increasing
    std::vector<double> scores;   // parallel to positions
};

// Top-k by (score desc, position desc), result re-sorted by position.
inline Selected select_top_k(std::span<const ScoredPos> cands, int k) {
    if (k < 0) throw std::invalid_argument("select_top_k: negative k");
    auto better = [](const ScoredPos& x, const ScoredPos& y) {
        return x.score > y.score || (x.score == y.score && x.pos > y.pos);
    };
    std::priority_queue<ScoredPos, std::vector<ScoredPos>, decltype(better)> worst_on_top(better);
    for (const auto& c : cands) {
        if (static_cast<int>(worst_on_top.size()) < k) {
            worst_on_top.push(c);
        } else if (k > 0 && better(c, worst_on_top.top())) {
            worst_on_top.pop();
            worst_on_top.push(c);
        }
    }
    std::vector<ScoredPos> kept;
    kept.reserve(worst_on_top.size());
    while (!worst_on_top.empty()) {
        kept.push_back(worst_on_top.top());
        worst_on_top.pop();
    }
    std::sort(kept.begin(), kept.end(), [](const ScoredPos& a, const ScoredPos& b) { return a.pos < b.pos; });
    Selected out;
    for (const auto& c : kept) {
        out.positions.push_back(c.pos);
        out.scores.push_back(c.score);
    }
    return out;
}

inline Selected stage_one(const RelevanceIndex& ix, int query, const SeqWindow& w, int k1) {
    std::vector<ScoredPos> cands;
    cands.reserve(w.items.size());
    const auto qv = ix.query_vec(query);
    for (int p = 0; p < static_cast<int>(w.items.size()); ++p) {
        if (!w.live[p] || w.items[p] == 0) continue;
        cands.push_back({RelevanceIndex::relevance(qv, ix.item_vec(w.items[p])), p});
    }
    return select_top_k(cands, k1);
}

inline Selected stage_two(const RelevanceIndex& ix, int target_item, const SeqWindow& w, const Selected& s1, int k2) {
    std::vector<ScoredPos> cands;
    cands.reserve(s1.positions.size());
    const auto tv = ix.item_vec(target_item);
    for (int p : s1.positions) cands.push_back({RelevanceIndex::relevance(tv, ix.item_vec(w.items[p])), p});
    return select_top_k(cands, k2);
}

// One-stage variants score the full window directly and keep k2.
inline Selected run_variant(const RsuConfig& cfg, const RelevanceIndex& ix, std::span<const int> item_attr,
                            int query, int target_item, const SeqWindow& w) {
    cfg.validate();
    switch (cfg.variant) {
        case RsuVariant::TwoStage:
            return stage_two(ix, target_item, w, stage_one(ix, query, w, cfg.k1), cfg.k2);
        case RsuVariant::OneStageQuery:
            return stage_one(ix, query, w, cfg.k2);
        case RsuVariant::OneStageTarget: {
            std::vector<ScoredPos> cands;
            if (cfg.hard_search) {
                if (item_attr.empty()) throw std::invalid_argument("rsu: hard search needs item attributes");
                const int want = item_attr[target_item];
                for (int p = 0; p < static_cast<int>(w.items.size()); ++p) {
                    if (!w.live[p] || w.items[p] == 0) continue;
                    cands.push_back({item_attr[w.items[p]] == want ? 1.0 : 0.0, p});
                }
            } else {
                const auto tv = ix.item_vec(target_item);
                for (int p = 0; p < static_cast<int>(w.items.size()); ++p) {
                    if (!w.live[p] || w.items[p] == 0) continue;
                    cands.push_back({RelevanceIndex::relevance(tv, ix.item_vec(w.items[p])), p});
                }
            }
            return select_top_k(cands, cfg.k2);
        }
    }
    throw std::invalid_argument("rsu: unknown variant");
}

// ---------------------------------------------------------------------------
// complexity benchmark

struct BenchReport {
    int n = 0, m = 0, d = 0, k1 = 0, k2 = 0, trials = 0;
    double two_stage_mean_ns = 0, two_stage_std_ns = 0;
    double per_target_mean_ns = 0, per_target_std_ns = 0;
    double analytic_ratio = 0;  // (N*M) / (N + M*K1)
    double measured_ratio = 0;

    std::string csv() const {
        return cat("variant,N,M,D,K1,K2,mean_ns,std_ns,analytic_ratio\n",
                   "two_stage,", n, ",", m, ",", d, ",", k1, ",", k2, ",",
                   static_cast<long long>(two_stage_mean_ns), ",", static_cast<long long>(two_stage_std_ns), ",",
                   analytic_ratio, "\n",
                   "per_target,", n, ",", m, ",", d, ",", k1, ",", k2, ",",
                   static_cast<long long>(per_target_mean_ns), ",", static_cast<long long>(per_target_std_ns), ",",
                   analytic_ratio, "\n");
    }
};

// Times the retrieval score passes themselves: two-stage shares one query
// pass of N scores across M targets (then M passes over K1), while the
// per-target baseline rescans all N behaviors for every target.
inline BenchReport complexity_bench(int n, int m, int d, int k1, int k2, int trials, std::uint64_t seed) {
    if (!(n >= k1 && k1 > k2 && k2 >= 1)) throw std::invalid_argument("complexity_bench: need N >= K1 > K2 >= 1");
    if (m < 1 || d < 1 || trials < 1) throw std::invalid_argument("complexity_bench: bad M, D, or trials");

    Rng rng(mix64(seed));
    auto unit_rows = [&](int rows) {
        std::vector<float> v(static_cast<std::size_t>(rows) * d);
        for (int r = 0; r < rows; ++r) {
            double norm = 0;
            for (int j = 0; j < d; ++j) {
                const double x = rng.gaussian();
                v[static_cast<std::size_t>(r) * d + j] = static_cast<float>(x);
                norm += x * x;
            }
            norm = std::sqrt(norm);
            for (int j = 0; j < d; ++j) v[static_cast<std::size_t>(r) * d + j] /= static_cast<float>(norm);
        }
        return v;
    };
    const std::vector<float> behaviors = unit_rows(n);
    const std::vector<float> targets = unit_rows(m);
    const std::vector<float> query = unit_rows(1);

    auto row = [&](const std::vector<float>& v, int r) {
        return std::span<const float>(v.data() + static_cast<std::size_t>(r) * d, static_cast<std::size_t>(d));
    };

    volatile double sink = 0;
    BenchReport rep;
    rep.n = n;
    rep.m = m;
    rep.d = d;
    rep.k1 = k1;
    rep.k2 = k2;
    rep.trials = trials;
    rep.analytic_ratio = static_cast<double>(n) * m / (static_cast<double>(n) + static_cast<double>(m) * k1);

    std::vector<double> t_two(trials), t_one(trials);
    std::vector<ScoredPos> cands;
    cands.reserve(n);
    Stopwatch sw;
    for (int t = 0; t < trials; ++t) {
        sw.restart();
        {
            cands.clear();
            const auto qv = row(query, 0);
            for (int i = 0; i < n; ++i) cands.push_back({RelevanceIndex::relevance(qv, row(behaviors, i)), i});
            Selected s1 = select_top_k(cands, k1);
            for (int j = 0; j < m; ++j) {
                const auto tv = row(targets, j);
                cands.clear();
                for (int p : s1.positions) cands.push_back({RelevanceIndex::relevance(tv, row(behaviors, p)), p});
                Selected s2 = select_top_k(cands, k2);
                for (double s : s2.scores) sink = sink + s;
            }
        }
        t_two[t] = sw.nanos();

        sw.restart();
        for (int j = 0; j < m; ++j) {
            const auto tv = row(targets, j);
            cands.clear();
            for (int i = 0; i < n; ++i) cands.push_back({RelevanceIndex::relevance(tv, row(behaviors, i)), i});
            Selected s2 = select_top_k(cands, k2);
            for (double s : s2.scores) sink = sink + s;
        }
        t_one[t] = sw.nanos();
    }

    auto mean_std = [&](const std::vector<double>& xs, double& mean, double& stddev) {
        mean = 0;
        for (double x : xs) mean += x;
        mean /= xs.size();
        double var = 0;
        for (double x : xs) var += (x - mean) * (x - mean);
        stddev = std::sqrt(var / xs.size());
    };
    mean_std(t_two, rep.two_stage_mean_ns, rep.two_stage_std_ns);
    mean_std(t_one, rep.per_target_mean_ns, rep.per_target_std_ns);
    rep.measured_ratio = rep.per_target_mean_ns / rep.two_stage_mean_ns;
    return rep;
}

}  // namespace qin
