// Trains a small ranking model on generated interactions and reports
// held-out metrics, driving the library directly rather than the CLI.

#include <iostream>

#include "qin/qin.hpp"

using namespace qin;

int main() {
    SynthConfig sc;
    sc.n_users = 40;
    sc.n_items = 300;
    sc.n_clusters = 6;
    sc.n_queries = 12;
    sc.events_min = 10;
    sc.events_max = 16;
    sc.seed = 9;
    const Dataset ds = generate_synthetic(sc);
    std::cout << "dataset: " << ds.n_users << " users, " << ds.n_items << " items, " << ds.interactions.size()
              << " interactions\n";

    const RelevanceIndex ix = RelevanceIndex::build(ds, 24, sc.seed);

    TrainConfig tc;
    tc.model.d = 8;
    tc.model.seq_len = 4;
    tc.rsu.k1 = 8;
    tc.rsu.k2 = 4;
    tc.l_max = 12;
    tc.n_neg = 50;
    tc.batch = 64;
    tc.epochs = 6;
    tc.patience = 3;
    tc.seed = 1;

    QinParams<float> params(tc.model, ds.n_users, ds.n_items, ds.n_attrs, ds.n_queries, tc.seed);
    const TrainResult res = train_model(ds, ix, tc, params);
    std::cout << history_csv(res.history) << "best epoch " << res.best_epoch << ", val ndcg@4 "
              << res.best_val_ndcg4 << "\n\n";

    ModelScorer<float> scorer(tc, ix, ds, params);
    const auto ranks = collect_ranks(ds, 2, tc.l_max, tc.n_neg, hash_combine(tc.seed, kTestNegStream), scorer);
    const MetricReport rep = report_from_ranks(ranks);
    std::cout << "test split, " << rep.n_samples << " samples:\n";
    for (int n : kMetricCutoffs)
        std::cout << "  ndcg@" << n << " " << rep.at("ndcg", n) << "  mrr@" << n << " " << rep.at("mrr", n)
                  << "  hr@" << n << " " << rep.at("hr", n) << "\n";
    return 0;
}
