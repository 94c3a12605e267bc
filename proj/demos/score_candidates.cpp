// Walks one request through the pipeline by hand: take a user's behavior
// window, narrow it with the two retrieval stages, and score a few candidate
// items with a freshly initialized model. Shows the serving-path wiring; the
// probabilities themselves are untrained.

#include <iostream>

#include "qin/qin.hpp"

using namespace qin;

int main() {
    SynthConfig sc;
    sc.n_users = 20;
    sc.n_items = 200;
    sc.n_clusters = 5;
    sc.n_queries = 10;
    sc.events_min = 12;
    sc.events_max = 18;
    sc.seed = 4;
    const Dataset ds = generate_synthetic(sc);
    const RelevanceIndex ix = RelevanceIndex::build(ds, 24, sc.seed);

    ModelConfig mc;
    mc.d = 8;
    mc.seq_len = 4;
    RsuConfig rsu;
    rsu.k1 = 8;
    rsu.k2 = 4;
    QinParams<float> params(mc, ds.n_users, ds.n_items, ds.n_attrs, ds.n_queries, 1);

    // last test interaction: its window is the user's full earlier history
    const Interaction* req = nullptr;
    for (const auto& it : ds.interactions)
        if (it.split == 2) req = &it;
    if (!req) return 1;

    const SeqWindow w = visible_window(ds.histories[static_cast<std::size_t>(req->user)], req->timestamp, 12);
    std::cout << "user " << req->user << ", query \"" << ds.query_names[static_cast<std::size_t>(req->query)]
              << "\", " << w.n_live << " visible behaviors\n";

    const auto stage1 = shared_stage_one(rsu, ix, req->query, w);
    std::cout << "stage 1 keeps " << stage1->positions.size() << " of " << w.n_live << " (query match)\n";

    const int candidates[] = {req->item, req->item % ds.n_items + 1, (req->item + 7) % ds.n_items + 1};
    Graph<float> g;
    SeqSlots slots(mc.seq_len);
    for (const int cand : candidates) {
        const Selected kept = select_for_candidate(rsu, ix, ds.item_attr, req->query, cand, w, stage1);
        slots.fill(w, kept, ds.item_attr);
        g.reset();
        const int p = build_forward(g, params, mc,
                                    slots.input(req->user, req->query, cand,
                                                ds.item_attr[static_cast<std::size_t>(cand)]));
        std::cout << "candidate " << ds.item_names[static_cast<std::size_t>(cand)] << ": stage 2 kept positions [";
        for (std::size_t i = 0; i < kept.positions.size(); ++i)
            std::cout << (i ? " " : "") << kept.positions[i];
        std::cout << "], p = " << g.scalar(p) << (cand == req->item ? "  (held-out positive)" : "") << "\n";
    }
    return 0;
}
