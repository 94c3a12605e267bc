#pragma once
// Training loop: grouped binary cross-entropy over one positive and its
// sampled negatives, Adam updates per batch of groups, query dropout, and
// early stopping on validation NDCG@4 with best-weights restore.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "qin/checkpoint.hpp"
#include "qin/common.hpp"
#include "qin/dataset.hpp"
#include "qin/graph.hpp"
#include "qin/metrics.hpp"
#include "qin/model.hpp"
#include "qin/optimizer.hpp"
#include "qin/relevance_index.hpp"
#include "qin/rsu.hpp"

namespace qin {

// Stream tags feeding hash_combine so each consumer of the run seed gets an
// independent deterministic stream.
inline constexpr std::uint64_t kShuffleStream = 0xA11C;
inline constexpr std::uint64_t kMaskStream = 0xD07;
inline constexpr std::uint64_t kValNegStream = 0xEBA1;
inline constexpr std::uint64_t kTestNegStream = 0x7E57;

struct TrainConfig {
    double lr = 1e-3;
    int batch = 512;
    int epochs = 50;
    int patience = 5;
    int n_neg = 100;
    int l_max = 10;
    double p_query_mask = 0.1;
    std::uint64_t seed = 1;
    RsuConfig rsu;
    ModelConfig model;

    void validate() const {
        model.validate();
        rsu.validate();
        if (lr < 0) throw std::invalid_argument("training: lr must be >= 0");
        if (batch < 1 || epochs < 1 || patience < 1)
            throw std::invalid_argument("training: batch, epochs, patience must be >= 1");
        if (n_neg < 1 || l_max < 1) throw std::invalid_argument("training: n_neg and l_max must be >= 1");
        if (p_query_mask < 0.0 || p_query_mask > 1.0)
            throw std::invalid_argument(cat("training: p_query_mask ", p_query_mask, " outside [0,1]"));
        if (model.seq_len != rsu.k2)
            throw std::invalid_argument(cat("training: model seq_len ", model.seq_len,
                                            " must equal retrieval k2 ", rsu.k2));
    }
};

struct EpochStats {
    int epoch = 0;
    double train_loss = 0;  // mean summed-group loss
    double val_ndcg4 = 0;
    double val_mrr4 = 0;
    double val_hr4 = 0;
    double wall_seconds = 0;
};

struct TrainResult {
    std::vector<EpochStats> history;
    int best_epoch = 0;  // 1-based; 0 only if no epoch ran
    double best_val_ndcg4 = 0;
    int epochs_run = 0;
};

inline std::string history_csv(const std::vector<EpochStats>& history) {
    std::string out = "epoch,train_loss,val_ndcg4,val_mrr4,val_hr4,wall_seconds\n";
    char line[192];
    for (const auto& e : history) {
        std::snprintf(line, sizeof(line), "%d,%.17g,%.17g,%.17g,%.17g,%.17g\n", e.epoch, e.train_loss,
                      e.val_ndcg4, e.val_mrr4, e.val_hr4, e.wall_seconds);
        out += line;
    }
    return out;
}

// Reusable right-aligned sequence buffers for one candidate's model input.
struct SeqSlots {
    std::vector<int> items, attrs, eng;
    std::vector<std::uint8_t> live;
    int n_live = 0;

    explicit SeqSlots(int seq_len)
        : items(static_cast<std::size_t>(seq_len), 0),
          attrs(static_cast<std::size_t>(seq_len), 0),
          eng(static_cast<std::size_t>(seq_len), 0),
          live(static_cast<std::size_t>(seq_len), 0) {
        if (seq_len < 1) throw std::invalid_argument("SeqSlots: seq_len must be >= 1");
    }

    void fill(const SeqWindow& w, const Selected& sel, const std::vector<int>& item_attr) {
        const int L = static_cast<int>(items.size());
        const int n_sel = static_cast<int>(sel.positions.size());
        if (n_sel > L) throw std::invalid_argument(cat("SeqSlots: ", n_sel, " selections exceed capacity ", L));
        std::fill(items.begin(), items.end(), 0);
        std::fill(attrs.begin(), attrs.end(), 0);
        std::fill(eng.begin(), eng.end(), 0);
        std::fill(live.begin(), live.end(), 0);
        const int pad = L - n_sel;
        for (int k = 0; k < n_sel; ++k) {
            const int pos = sel.positions[static_cast<std::size_t>(k)];
            const int item = w.items.at(static_cast<std::size_t>(pos));
            items[static_cast<std::size_t>(pad + k)] = item;
            attrs[static_cast<std::size_t>(pad + k)] = item_attr.at(static_cast<std::size_t>(item));
            eng[static_cast<std::size_t>(pad + k)] = w.engagement.at(static_cast<std::size_t>(pos));
            live[static_cast<std::size_t>(pad + k)] = 1;
        }
        n_live = n_sel;
    }

    CandidateInput input(int user, int query, int target_item, int target_attr) const {
        CandidateInput in;
        in.seq_items = items;
        in.seq_attrs = attrs;
        in.seq_engagement = eng;
        in.live = live;
        in.n_live = n_live;
        in.user = user;
        in.query = query;
        in.target_item = target_item;
        in.target_attr = target_attr;
        return in;
    }
};

// The first retrieval pass depends only on the query, so one result is shared
// across every candidate scored against the same window.
inline std::optional<Selected> shared_stage_one(const RsuConfig& rsu, const RelevanceIndex& ix, int query,
                                                const SeqWindow& w) {
    rsu.validate();
    switch (rsu.variant) {
        case RsuVariant::TwoStage:
            return stage_one(ix, query, w, rsu.k1);
        case RsuVariant::OneStageQuery:
            return stage_one(ix, query, w, rsu.k2);
        case RsuVariant::OneStageTarget:
            return std::nullopt;
    }
    throw std::invalid_argument("shared_stage_one: unknown variant");
}

inline Selected select_for_candidate(const RsuConfig& rsu, const RelevanceIndex& ix,
                                     const std::vector<int>& item_attr, int query, int target_item,
                                     const SeqWindow& w, const std::optional<Selected>& shared) {
    switch (rsu.variant) {
        case RsuVariant::TwoStage:
            return stage_two(ix, target_item, w, shared.value(), rsu.k2);
        case RsuVariant::OneStageQuery:
            return shared.value();
        case RsuVariant::OneStageTarget:
            return run_variant(rsu, ix, item_attr, query, target_item, w);
    }
    throw std::invalid_argument("select_for_candidate: unknown variant");
}

// Summed BCE over the positive and each negative, all in one graph.
template <class Real>
int build_group_loss(Graph<Real>& g, QinParams<Real>& params, const TrainConfig& cfg, const RelevanceIndex& ix,
                     const Dataset& ds, const SeqWindow& w, int user, int query, int positive,
                     std::span<const int> negatives, SeqSlots& slots) {
    const auto shared = shared_stage_one(cfg.rsu, ix, query, w);
    std::vector<int> terms;
    terms.reserve(negatives.size() + 1);
    auto add = [&](int target, Real label) {
        const Selected sel = select_for_candidate(cfg.rsu, ix, ds.item_attr, query, target, w, shared);
        slots.fill(w, sel, ds.item_attr);
        const int p = build_forward(g, params, cfg.model,
                                    slots.input(user, query, target, ds.item_attr.at(static_cast<std::size_t>(target))));
        terms.push_back(g.bce(p, label));
    };
    add(positive, Real(1));
    for (int neg : negatives) add(neg, Real(0));
    return g.sum_scalars(terms);
}

// Evaluation scorer for collect_ranks. Queries are never masked here.
template <class Real>
struct ModelScorer {
    const TrainConfig& cfg;
    const RelevanceIndex& ix;
    const Dataset& ds;
    QinParams<Real>& params;
    Graph<Real> g;
    SeqSlots slots;

    ModelScorer(const TrainConfig& cfg_, const RelevanceIndex& ix_, const Dataset& ds_, QinParams<Real>& params_)
        : cfg(cfg_), ix(ix_), ds(ds_), params(params_), slots(cfg_.model.seq_len) {}

    std::vector<double> operator()(const Interaction& it, const SeqWindow& w, std::span<const int> cands) {
        const auto shared = shared_stage_one(cfg.rsu, ix, it.query, w);
        std::vector<double> out;
        out.reserve(cands.size());
        for (int c : cands) {
            g.reset();
            const Selected sel = select_for_candidate(cfg.rsu, ix, ds.item_attr, it.query, c, w, shared);
            slots.fill(w, sel, ds.item_attr);
            const int p = build_forward(g, params, cfg.model,
                                        slots.input(it.user, it.query, c, ds.item_attr.at(static_cast<std::size_t>(c))));
            out.push_back(static_cast<double>(g.scalar(p)));
        }
        return out;
    }
};

template <class Real>
TrainResult train_model(const Dataset& ds, const RelevanceIndex& ix, const TrainConfig& cfg,
                        QinParams<Real>& params) {
    cfg.validate();
    if (ds.n_items <= cfg.n_neg)
        throw std::invalid_argument(cat("train_model: need n_items > n_neg, got ", ds.n_items, " <= ", cfg.n_neg));

    std::vector<std::size_t> train_idx;
    for (std::size_t k = 0; k < ds.interactions.size(); ++k)
        if (ds.interactions[k].split == 0) train_idx.push_back(k);
    if (train_idx.empty()) throw std::invalid_argument("train_model: no training interactions");

    const auto plist = params.all();
    Adam<Real> opt(static_cast<Real>(cfg.lr));
    Graph<Real> g;
    SeqSlots slots(cfg.model.seq_len);
    ModelScorer<Real> scorer(cfg, ix, ds, params);
    const std::uint64_t val_seed = hash_combine(cfg.seed, kValNegStream);

    TrainResult res;
    std::vector<Mat<Real>> best;
    double best_metric = -1.0;  // any first epoch improves on this
    int since_improve = 0;
    std::vector<std::size_t> order = train_idx;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        Stopwatch sw;
        Rng shuffle_rng(hash_combine(hash_combine(cfg.seed, kShuffleStream), static_cast<std::uint64_t>(epoch)));
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.below(i)]);
        Rng mask_rng(hash_combine(hash_combine(cfg.seed, kMaskStream), static_cast<std::uint64_t>(epoch)));

        double loss_sum = 0;
        std::size_t n_groups = 0;
        for (std::size_t b0 = 0; b0 < order.size(); b0 += static_cast<std::size_t>(cfg.batch)) {
            const std::size_t b1 = std::min(order.size(), b0 + static_cast<std::size_t>(cfg.batch));
            params.zero_grads();
            for (std::size_t i = b0; i < b1; ++i) {
                const std::size_t k = order[i];
                const Interaction& it = ds.interactions[k];
                const SeqWindow w = visible_window(ds.histories[static_cast<std::size_t>(it.user)], it.timestamp,
                                                   cfg.l_max);
                int query = it.query;
                if (cfg.p_query_mask > 0.0 && mask_rng.uniform01() < cfg.p_query_mask) query = 0;
                const auto negs = sample_negatives(ds.n_items, it.item, cfg.n_neg, cfg.seed, k);
                g.reset();
                const int loss = build_group_loss(g, params, cfg, ix, ds, w, it.user, query, it.item, negs, slots);
                const double lv = static_cast<double>(g.scalar(loss));
                if (!std::isfinite(lv)) {
                    Real worst = Real(0);
                    for (const auto* p : plist)
                        for (const Real v : p->value.a) worst = std::max(worst, std::abs(v));
                    throw std::runtime_error(cat("train_model: non-finite loss at epoch ", epoch, ", group ", i,
                                                 ", lr ", cfg.lr, ", max |param| ", worst));
                }
                g.backward(loss);
                loss_sum += lv;
                ++n_groups;
            }
            opt.step(plist);
        }

        const auto ranks = collect_ranks(ds, 1, cfg.l_max, cfg.n_neg, val_seed, scorer);
        const MetricReport rep = report_from_ranks(ranks);

        EpochStats es;
        es.epoch = epoch;
        es.train_loss = loss_sum / static_cast<double>(n_groups);
        es.val_ndcg4 = rep.at("ndcg", 4);
        es.val_mrr4 = rep.at("mrr", 4);
        es.val_hr4 = rep.at("hr", 4);
        es.wall_seconds = sw.seconds();
        res.history.push_back(es);
        res.epochs_run = epoch;

        if (es.val_ndcg4 > best_metric) {
            best_metric = es.val_ndcg4;
            res.best_epoch = epoch;
            res.best_val_ndcg4 = es.val_ndcg4;
            best = snapshot_values(plist);
            since_improve = 0;
        } else if (++since_improve >= cfg.patience) {
            break;
        }
    }
    if (!best.empty()) restore_values(plist, best);
    return res;
}

}  // namespace qin
