#pragma once
// The ranking network. A candidate forward pass embeds the retrieved behavior
// subsequence, runs one self attention unit with decoupled ID/attribute
// scores fused under an engagement gate, stacks one target attention unit on
// top, and feeds the flattened representation with user/query/target
// embeddings through a small MLP to a click probability.
//
// Pooling variants swap the two attention stages for simpler summaries while
// sharing one prediction head and one parameter inventory. Attention variants
// expose their updated sequence rows to the head; pure pooling variants
// compress the sequence into the summary alone and leave the sequence block
// of the head input at zero, keeping its shape.

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "qin/common.hpp"
#include "qin/graph.hpp"
#include "qin/matrix.hpp"

namespace qin {

enum class GateMode { VectorSoftmax, ScalarSigmoid, Off };
enum class ValueSource { FusedFields, IdOnly };
enum class Pooling { Fau, Mean, DinStyle, SelfAttnStyle, DifStyle };

struct FauConfig {
    double alpha = 0.5;
    int heads = 2;
    GateMode gate = GateMode::VectorSoftmax;
    ValueSource value_source = ValueSource::FusedFields;
    Pooling pooling = Pooling::Fau;
    int gate_hidden = 8;
    int din_hidden = 8;
};

struct ModelConfig {
    int d = 8;
    int seq_len = 10;  // L: retrieval output padded to this length
    int mlp1 = 16;
    int mlp2 = 8;
    FauConfig fau;

    int head_dim() const { return d / fau.heads; }
    int predict_in() const { return (seq_len + 5) * d; }

    void validate() const {
        if (d < 1 || seq_len < 1 || mlp1 < 1 || mlp2 < 1) throw std::invalid_argument("model: dims must be positive");
        if (fau.heads < 1 || d % fau.heads != 0)
            throw std::invalid_argument(cat("model: d=", d, " not divisible by heads=", fau.heads));
        if (fau.alpha < 0.0 || fau.alpha > 1.0) throw std::invalid_argument(cat("model: alpha ", fau.alpha, " outside [0,1]"));
        if (fau.gate_hidden < 1 || fau.din_hidden < 1) throw std::invalid_argument("model: hidden sizes must be positive");
    }
};

template <class Real>
struct AttnHead {
    Param<Real> wq_id, wk_id, wq_attr, wk_attr, wv;
};

template <class Real>
struct CoupledHead {
    Param<Real> wq, wk, wv;
};

// One candidate's model inputs; sequence spans are padded to cfg.seq_len.
struct CandidateInput {
    std::span<const int> seq_items;
    std::span<const int> seq_attrs;
    std::span<const int> seq_engagement;
    std::span<const std::uint8_t> live;
    int n_live = 0;
    int user = 0;
    int query = 0;
    int target_item = 0;
    int target_attr = 0;
};

template <class Real>
class QinParams {
public:
    QinParams(const ModelConfig& cfg, int n_users, int n_items, int n_attrs, int n_queries, std::uint64_t seed)
        : cfg_(cfg), n_users_(n_users), n_items_(n_items), n_attrs_(n_attrs), n_queries_(n_queries) {
        cfg.validate();
        if (n_users < 0 || n_items < 1 || n_attrs < 0 || n_queries < 0)
            throw std::invalid_argument("params: bad vocabulary sizes");
        const int d = cfg.d, dh = cfg.head_dim();
        std::uint64_t ordinal = 0;
        auto init = [&](const std::string& name, int rows, int cols) {
            auto m = xavier_init<Real>(rows, cols, mix64(hash_combine(seed, ++ordinal)));
            return Param<Real>(name, std::move(m));
        };
        auto init_table = [&](const std::string& name, int rows, int cols) {
            auto p = init(name, rows, cols);
            p.frozen_row0 = true;
            for (auto& v : p.value.row(0)) v = Real(0);
            return p;
        };
        auto init_zero = [&](const std::string& name, int rows, int cols) {
            ++ordinal;
            return Param<Real>(name, Mat<Real>(rows, cols));
        };

        emb_item = init_table("emb_item", n_items + 1, d);
        emb_attr = init_table("emb_attr", n_attrs + 1, d);
        emb_eng = init_table("emb_eng", 16, d);  // 15 engagement ids + padding
        emb_user = init_table("emb_user", n_users + 1, d);
        emb_query = init_table("emb_query", n_queries + 1, d);

        self_heads.reserve(cfg.fau.heads);
        tgt_heads.reserve(cfg.fau.heads);
        sa_heads.reserve(cfg.fau.heads);
        sat_heads.reserve(cfg.fau.heads);
        for (int h = 0; h < cfg.fau.heads; ++h) {
            AttnHead<Real> s;
            s.wq_id = init(cat("self_h", h, "_wq_id"), d, dh);
            s.wk_id = init(cat("self_h", h, "_wk_id"), d, dh);
            s.wq_attr = init(cat("self_h", h, "_wq_attr"), d, dh);
            s.wk_attr = init(cat("self_h", h, "_wk_attr"), d, dh);
            s.wv = init(cat("self_h", h, "_wv"), d, dh);
            self_heads.push_back(std::move(s));
            AttnHead<Real> t;
            t.wq_id = init(cat("tgt_h", h, "_wq_id"), d, dh);
            t.wk_id = init(cat("tgt_h", h, "_wk_id"), d, dh);
            t.wq_attr = init(cat("tgt_h", h, "_wq_attr"), d, dh);
            t.wk_attr = init(cat("tgt_h", h, "_wk_attr"), d, dh);
            t.wv = init(cat("tgt_h", h, "_wv"), d, dh);
            tgt_heads.push_back(std::move(t));
            CoupledHead<Real> a;
            a.wq = init(cat("sa_h", h, "_wq"), d, dh);
            a.wk = init(cat("sa_h", h, "_wk"), d, dh);
            a.wv = init(cat("sa_h", h, "_wv"), d, dh);
            sa_heads.push_back(std::move(a));
            CoupledHead<Real> at;
            at.wq = init(cat("sat_h", h, "_wq"), d, dh);
            at.wk = init(cat("sat_h", h, "_wk"), d, dh);
            at.wv = init(cat("sat_h", h, "_wv"), d, dh);
            sat_heads.push_back(std::move(at));
        }

        self_gate_w1 = init("self_gate_w1", d, cfg.fau.gate_hidden);
        self_gate_w2 = init("self_gate_w2", cfg.fau.gate_hidden, 1);
        tgt_gate_w1 = init("tgt_gate_w1", d, cfg.fau.gate_hidden);
        tgt_gate_w2 = init("tgt_gate_w2", cfg.fau.gate_hidden, 1);

        din_w1 = init("din_w1", 4 * d, cfg.fau.din_hidden);
        din_b1 = init_zero("din_b1", 1, cfg.fau.din_hidden);
        din_w2 = init("din_w2", cfg.fau.din_hidden, 1);
        din_b2 = init_zero("din_b2", 1, 1);

        mlp_w1 = init("mlp_w1", cfg.predict_in(), cfg.mlp1);
        mlp_b1 = init_zero("mlp_b1", 1, cfg.mlp1);
        mlp_w2 = init("mlp_w2", cfg.mlp1, cfg.mlp2);
        mlp_b2 = init_zero("mlp_b2", 1, cfg.mlp2);
        mlp_w3 = init("mlp_w3", cfg.mlp2, 1);
        mlp_b3 = init_zero("mlp_b3", 1, 1);
    }

    QinParams(const QinParams&) = delete;
    QinParams& operator=(const QinParams&) = delete;

    std::vector<Param<Real>*> all() {
        std::vector<Param<Real>*> ps{&emb_item, &emb_attr, &emb_eng, &emb_user, &emb_query};
        for (auto& h : self_heads) ps.insert(ps.end(), {&h.wq_id, &h.wk_id, &h.wq_attr, &h.wk_attr, &h.wv});
        for (auto& h : tgt_heads) ps.insert(ps.end(), {&h.wq_id, &h.wk_id, &h.wq_attr, &h.wk_attr, &h.wv});
        for (auto& h : sa_heads) ps.insert(ps.end(), {&h.wq, &h.wk, &h.wv});
        for (auto& h : sat_heads) ps.insert(ps.end(), {&h.wq, &h.wk, &h.wv});
        ps.insert(ps.end(), {&self_gate_w1, &self_gate_w2, &tgt_gate_w1, &tgt_gate_w2});
        ps.insert(ps.end(), {&din_w1, &din_b1, &din_w2, &din_b2});
        ps.insert(ps.end(), {&mlp_w1, &mlp_b1, &mlp_w2, &mlp_b2, &mlp_w3, &mlp_b3});
        return ps;
    }

    void zero_grads() {
        for (auto* p : all()) p->zero_grad();
    }

    const ModelConfig& config() const { return cfg_; }
    int n_users() const { return n_users_; }
    int n_items() const { return n_items_; }
    int n_attrs() const { return n_attrs_; }
    int n_queries() const { return n_queries_; }

    Param<Real> emb_item, emb_attr, emb_eng, emb_user, emb_query;
    std::vector<AttnHead<Real>> self_heads, tgt_heads;
    std::vector<CoupledHead<Real>> sa_heads, sat_heads;
    Param<Real> self_gate_w1, self_gate_w2, tgt_gate_w1, tgt_gate_w2;
    Param<Real> din_w1, din_b1, din_w2, din_b2;
    Param<Real> mlp_w1, mlp_b1, mlp_w2, mlp_b2, mlp_w3, mlp_b3;

private:
    ModelConfig cfg_;
    int n_users_, n_items_, n_attrs_, n_queries_;
};

// ---------------------------------------------------------------------------
// building blocks (also driven directly by tests with hand-set weights)

/// att_f = (E_f Wq_f)(E_f Wk_f)^T / sqrt(d_h), one matrix per field.
template <class Real>
std::pair<int, int> decoupled_scores(Graph<Real>& g, int e_id, int e_attr, AttnHead<Real>& head, int d_h) {
    const Real s = Real(1) / std::sqrt(static_cast<Real>(d_h));
    int att_id = g.scale(g.matmul(g.matmul(e_id, g.param(head.wq_id)), g.transpose(g.matmul(e_id, g.param(head.wk_id)))), s);
    int att_attr =
        g.scale(g.matmul(g.matmul(e_attr, g.param(head.wq_attr)), g.transpose(g.matmul(e_attr, g.param(head.wk_attr)))), s);
    return {att_id, att_attr};
}

/// One scalar per key position from its engagement embedding: 1 x L.
/// VectorSoftmax normalizes over live positions (padding exactly 0);
/// ScalarSigmoid squashes per position and zeroes padding; Off is all ones.
template <class Real>
int engagement_gate(Graph<Real>& g, int e_eng, Param<Real>& w1, Param<Real>& w2, GateMode mode,
                    std::span<const std::uint8_t> live) {
    const int L = static_cast<int>(live.size());
    int n_live = 0;
    for (auto m : live) n_live += (m != 0);
    if (n_live == 0) return g.zeros(1, L);
    if (mode == GateMode::Off) return g.constant(Mat<Real>::filled(1, L, Real(1)));
    int logits = g.transpose(g.matmul(g.relu(g.matmul(e_eng, g.param(w1))), g.param(w2)));  // 1 x L
    if (mode == GateMode::VectorSoftmax) return g.softmax_masked_rows(logits, live);
    Mat<Real> mask(1, L);
    for (int p = 0; p < L; ++p) mask.at(0, p) = live[p] ? Real(1) : Real(0);
    return g.hadamard(g.sigmoid(logits), g.constant(mask));
}

/// gate[c] * (alpha*att_id[r][c] + (1-alpha)*att_attr[r][c]). At the alpha
/// endpoints the unused field's score matrix is absent so no gradient can
/// reach its projections.
template <class Real>
int fuse_scores(Graph<Real>& g, std::optional<int> att_id, std::optional<int> att_attr, int gate, double alpha) {
    int mixed;
    if (alpha == 1.0) {
        if (!att_id) throw std::invalid_argument("fuse_scores: alpha=1 needs ID scores");
        mixed = *att_id;
    } else if (alpha == 0.0) {
        if (!att_attr) throw std::invalid_argument("fuse_scores: alpha=0 needs attribute scores");
        mixed = *att_attr;
    } else {
        if (!att_id || !att_attr) throw std::invalid_argument("fuse_scores: interior alpha needs both scores");
        mixed = g.add(g.scale(*att_id, static_cast<Real>(alpha)), g.scale(*att_attr, static_cast<Real>(1.0 - alpha)));
    }
    return g.colscale(mixed, gate);
}

namespace detail {

// Decoupled-and-fused attention rows for an arbitrary query side (L rows for
// the self stage, 1 row for the target stage), shared by both FAU stages.
template <class Real>
int fused_head_probs(Graph<Real>& g, int q_id, int q_attr, int e_id, int e_attr, AttnHead<Real>& head, int gate,
                     double alpha, int d_h, std::span<const std::uint8_t> live) {
    const Real s = Real(1) / std::sqrt(static_cast<Real>(d_h));
    std::optional<int> att_id, att_attr;
    if (alpha > 0.0)
        att_id = g.scale(g.matmul(g.matmul(q_id, g.param(head.wq_id)), g.transpose(g.matmul(e_id, g.param(head.wk_id)))), s);
    if (alpha < 1.0)
        att_attr = g.scale(
            g.matmul(g.matmul(q_attr, g.param(head.wq_attr)), g.transpose(g.matmul(e_attr, g.param(head.wk_attr)))), s);
    int fused = fuse_scores(g, att_id, att_attr, gate, alpha);
    return g.softmax_masked_rows(fused, live);
}

}  // namespace detail

/// Self attention unit: L x d updated sequence representation, padding rows zero.
template <class Real>
int fau_layer(Graph<Real>& g, QinParams<Real>& P, const ModelConfig& cfg, int e_id, int e_attr, int e_value, int e_eng,
              std::span<const std::uint8_t> live) {
    bool any_live = false;
    for (auto m : live) any_live |= (m != 0);
    if (!any_live) return g.zeros(static_cast<int>(live.size()), cfg.d);
    const double alpha = cfg.fau.alpha;
    const GateMode gmode = cfg.fau.pooling == Pooling::DifStyle ? GateMode::Off : cfg.fau.gate;
    int gate = engagement_gate(g, e_eng, P.self_gate_w1, P.self_gate_w2, gmode, live);
    std::vector<int> heads;
    heads.reserve(cfg.fau.heads);
    for (int h = 0; h < cfg.fau.heads; ++h) {
        int probs = detail::fused_head_probs(g, e_id, e_attr, e_id, e_attr, P.self_heads[h], gate, alpha,
                                             cfg.head_dim(), live);
        heads.push_back(g.matmul(probs, g.matmul(e_value, g.param(P.self_heads[h].wv))));
    }
    return g.rowmask(g.concat_cols(heads), live);
}

/// Target attention unit: 1 x d summary. Queries come from the target item's
/// field embeddings, keys from the sequence's field embeddings, values from
/// the self-stage representation.
template <class Real>
int target_fau(Graph<Real>& g, QinParams<Real>& P, const ModelConfig& cfg, int t_id, int t_attr, int e_id, int e_attr,
               int e_eng, int repr, std::span<const std::uint8_t> live) {
    bool any_live = false;
    for (auto m : live) any_live |= (m != 0);
    if (!any_live) return g.zeros(1, cfg.d);
    const double alpha = cfg.fau.alpha;
    const GateMode gmode = cfg.fau.pooling == Pooling::DifStyle ? GateMode::Off : cfg.fau.gate;
    int gate = engagement_gate(g, e_eng, P.tgt_gate_w1, P.tgt_gate_w2, gmode, live);
    std::vector<int> heads;
    heads.reserve(cfg.fau.heads);
    for (int h = 0; h < cfg.fau.heads; ++h) {
        int probs = detail::fused_head_probs(g, t_id, t_attr, e_id, e_attr, P.tgt_heads[h], gate, alpha,
                                             cfg.head_dim(), live);
        heads.push_back(g.matmul(probs, g.matmul(repr, g.param(P.tgt_heads[h].wv))));
    }
    return g.concat_cols(heads);
}

/// concat -> FC(mlp1) ReLU -> FC(mlp2) ReLU -> FC(1) -> sigmoid.
template <class Real>
int predict_head(Graph<Real>& g, QinParams<Real>& P, std::span<const int> parts) {
    int x = g.concat_cols(parts);
    int h1 = g.relu(g.add_rowvec(g.matmul(x, g.param(P.mlp_w1)), g.param(P.mlp_b1)));
    int h2 = g.relu(g.add_rowvec(g.matmul(h1, g.param(P.mlp_w2)), g.param(P.mlp_b2)));
    int logit = g.add_rowvec(g.matmul(h2, g.param(P.mlp_w3)), g.param(P.mlp_b3));
    return g.sigmoid(logit);
}

namespace detail {

template <class Real>
int din_pool(Graph<Real>& g, QinParams<Real>& P, int t_value, int e_value, std::span<const std::uint8_t> live) {
    const int L = static_cast<int>(live.size());
    int t_rows = g.broadcast_rows(t_value, L);
    std::vector<int> parts{t_rows, e_value, g.add(t_rows, g.scale(e_value, Real(-1))), g.hadamard(t_rows, e_value)};
    int x = g.concat_cols(parts);
    int h = g.relu(g.add_rowvec(g.matmul(x, g.param(P.din_w1)), g.param(P.din_b1)));
    int logits = g.transpose(g.add_rowvec(g.matmul(h, g.param(P.din_w2)), g.param(P.din_b2)));  // 1 x L
    int weights = g.softmax_masked_rows(logits, live);
    return g.matmul(weights, g.rowmask(e_value, live));
}

template <class Real>
int coupled_probs(Graph<Real>& g, int q, int e_value, CoupledHead<Real>& head, int d_h,
                  std::span<const std::uint8_t> live) {
    const Real s = Real(1) / std::sqrt(static_cast<Real>(d_h));
    int att = g.scale(g.matmul(g.matmul(q, g.param(head.wq)), g.transpose(g.matmul(e_value, g.param(head.wk)))), s);
    return g.softmax_masked_rows(att, live);
}

}  // namespace detail

/// Full candidate forward pass to a 1x1 probability node.
template <class Real>
int build_forward(Graph<Real>& g, QinParams<Real>& P, const ModelConfig& cfg, const CandidateInput& in) {
    const int L = cfg.seq_len, d = cfg.d;
    if (static_cast<int>(in.seq_items.size()) != L || static_cast<int>(in.seq_attrs.size()) != L ||
        static_cast<int>(in.seq_engagement.size()) != L || static_cast<int>(in.live.size()) != L)
        throw std::invalid_argument(cat("build_forward: sequence spans must have length ", L));

    std::array<int, 1> tid{in.target_item}, tattr{in.target_attr}, uid{in.user}, qid{in.query};
    int t_id = g.rows_of(P.emb_item, tid);
    int t_attr = g.rows_of(P.emb_attr, tattr);
    int user_e = g.rows_of(P.emb_user, uid);
    int query_e = g.rows_of(P.emb_query, qid);

    int repr = -1, summary = -1;
    if (in.n_live == 0) {
        repr = g.zeros(L, d);
        summary = g.zeros(1, d);
    } else {
        int e_id = g.rows_of(P.emb_item, in.seq_items);
        int e_attr = g.rows_of(P.emb_attr, in.seq_attrs);
        int e_eng = g.rows_of(P.emb_eng, in.seq_engagement);
        int e_value = cfg.fau.value_source == ValueSource::IdOnly ? e_id : g.add(e_id, e_attr);
        int t_value = cfg.fau.value_source == ValueSource::IdOnly ? t_id : g.add(t_id, t_attr);
        switch (cfg.fau.pooling) {
            case Pooling::Fau:
            case Pooling::DifStyle:
                repr = fau_layer(g, P, cfg, e_id, e_attr, e_value, e_eng, in.live);
                summary = target_fau(g, P, cfg, t_id, t_attr, e_id, e_attr, e_eng, repr, in.live);
                break;
            case Pooling::Mean:
                repr = g.zeros(L, d);
                summary = g.mean_rows_masked(e_value, in.live);
                break;
            case Pooling::DinStyle:
                repr = g.zeros(L, d);
                summary = detail::din_pool(g, P, t_value, e_value, in.live);
                break;
            case Pooling::SelfAttnStyle: {
                std::vector<int> heads, theads;
                for (int h = 0; h < cfg.fau.heads; ++h) {
                    int probs = detail::coupled_probs(g, e_value, e_value, P.sa_heads[h], cfg.head_dim(), in.live);
                    heads.push_back(g.matmul(probs, g.matmul(e_value, g.param(P.sa_heads[h].wv))));
                }
                repr = g.rowmask(g.concat_cols(heads), in.live);
                for (int h = 0; h < cfg.fau.heads; ++h) {
                    int probs = detail::coupled_probs(g, t_value, e_value, P.sat_heads[h], cfg.head_dim(), in.live);
                    theads.push_back(g.matmul(probs, g.matmul(repr, g.param(P.sat_heads[h].wv))));
                }
                summary = g.concat_cols(theads);
                break;
            }
            default:
                throw std::invalid_argument("build_forward: unknown pooling variant");
        }
    }

    std::array<int, 6> parts{g.flatten_row(repr), summary, user_e, query_e, t_id, t_attr};
    return predict_head(g, P, parts);
}

}  // namespace qin
