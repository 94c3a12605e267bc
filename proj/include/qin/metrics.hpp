#pragma once
// Ranking metrics for the 1-positive-vs-N-negatives evaluation protocol.
// Each evaluation group scores the held-out item against sampled negatives;
// the positive's 1-based rank drives NDCG/MRR/HR at fixed cutoffs. Ties are
// broken by candidate id ascending so the positive gets no favorable
// treatment and results are deterministic.

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qin/common.hpp"
#include "qin/dataset.hpp"

namespace qin {

inline constexpr std::array<int, 3> kMetricCutoffs{4, 8, 20};

namespace detail {
inline void check_rank_args(int rank, int n) {
    if (rank < 1) throw std::invalid_argument(cat("metrics: rank ", rank, " must be >= 1"));
    if (n < 1) throw std::invalid_argument(cat("metrics: cutoff ", n, " must be >= 1"));
}
}  // namespace detail

inline double hr_at(int rank, int n) {
    detail::check_rank_args(rank, n);
    return rank <= n ? 1.0 : 0.0;
}

inline double ndcg_at(int rank, int n) {
    detail::check_rank_args(rank, n);
    return rank <= n ? 1.0 / std::log2(static_cast<double>(rank) + 1.0) : 0.0;
}

inline double mrr_at(int rank, int n) {
    detail::check_rank_args(rank, n);
    return rank <= n ? 1.0 / static_cast<double>(rank) : 0.0;
}

/// 1-based rank of the candidate at positive_index under score-descending,
/// id-ascending ordering: 1 + #{better score} + #{equal score, smaller id}.
template <class Real>
int rank_of_positive(std::span<const int> ids, std::span<const Real> scores, std::size_t positive_index) {
    if (ids.size() != scores.size()) throw std::invalid_argument("rank_of_positive: ids/scores length mismatch");
    if (positive_index >= ids.size()) throw std::invalid_argument("rank_of_positive: positive index out of range");
    const Real ps = scores[positive_index];
    const int pid = ids[positive_index];
    int rank = 1;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i == positive_index) continue;
        if (scores[i] > ps || (scores[i] == ps && ids[i] < pid)) ++rank;
    }
    return rank;
}

/// Mean NDCG/MRR/HR at each cutoff over a set of per-sample ranks.
struct MetricReport {
    std::array<double, 3> ndcg{}, mrr{}, hr{};
    int n_samples = 0;

    double at(const char* metric, int n) const {
        for (std::size_t i = 0; i < kMetricCutoffs.size(); ++i)
            if (kMetricCutoffs[i] == n) {
                std::string m(metric);
                if (m == "ndcg") return ndcg[i];
                if (m == "mrr") return mrr[i];
                if (m == "hr") return hr[i];
                break;
            }
        throw std::invalid_argument(cat("MetricReport: no metric ", metric, "@", n));
    }
};

inline MetricReport report_from_ranks(std::span<const int> ranks) {
    MetricReport r;
    r.n_samples = static_cast<int>(ranks.size());
    for (int rank : ranks)
        for (std::size_t i = 0; i < kMetricCutoffs.size(); ++i) {
            r.ndcg[i] += ndcg_at(rank, kMetricCutoffs[i]);
            r.mrr[i] += mrr_at(rank, kMetricCutoffs[i]);
            r.hr[i] += hr_at(rank, kMetricCutoffs[i]);
        }
    if (r.n_samples > 0)
        for (std::size_t i = 0; i < kMetricCutoffs.size(); ++i) {
            r.ndcg[i] /= r.n_samples;
            r.mrr[i] /= r.n_samples;
            r.hr[i] /= r.n_samples;
        }
    return r;
}

inline nlohmann::json results_json(const std::string& dataset, const std::string& variant, std::uint64_t seed,
                                   const MetricReport& r) {
    nlohmann::json metrics;
    for (std::size_t i = 0; i < kMetricCutoffs.size(); ++i) {
        const std::string key = std::to_string(kMetricCutoffs[i]);
        metrics["ndcg"][key] = r.ndcg[i];
        metrics["mrr"][key] = r.mrr[i];
        metrics["hr"][key] = r.hr[i];
    }
    return nlohmann::json{{"dataset", dataset}, {"variant", variant}, {"seed", seed}, {"metrics", metrics}};
}

/// Runs the per-sample evaluation loop over one split (1 = validation,
/// 2 = test). For each sample the scorer receives the sample, its visible
/// behavior window, and the candidate list (positive first), and returns one
/// score per candidate. Negatives are deterministic per (neg_seed, global
/// interaction index).
template <class ScoreFn>
std::vector<int> collect_ranks(const Dataset& ds, int split, int l_max, int n_neg, std::uint64_t neg_seed,
                               ScoreFn&& score) {
    if (split != 1 && split != 2) throw std::invalid_argument("collect_ranks: split must be 1 or 2");
    if (l_max < 1 || n_neg < 1) throw std::invalid_argument("collect_ranks: l_max and n_neg must be positive");
    std::vector<int> ranks;
    for (std::size_t k = 0; k < ds.interactions.size(); ++k) {
        const Interaction& it = ds.interactions[k];
        if (it.split != split) continue;
        SeqWindow w = visible_window(ds.histories[static_cast<std::size_t>(it.user)], it.timestamp, l_max);
        std::vector<int> cands{it.item};
        for (int neg : sample_negatives(ds.n_items, it.item, n_neg, neg_seed, k)) cands.push_back(neg);
        std::vector<double> scores = score(it, w, std::span<const int>(cands));
        if (scores.size() != cands.size()) throw std::runtime_error("collect_ranks: scorer returned wrong count");
        ranks.push_back(rank_of_positive<double>(cands, scores, 0));
    }
    return ranks;
}

}  // namespace qin
