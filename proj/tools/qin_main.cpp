// Operator entry point: prepare a dataset cache, train and evaluate ranking
// models, run the variant matrix, the retrieval benchmark, and the fusion
// weight sweep. Every run writes its fully resolved config next to its
// outputs so experiments stay diff-able.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qin/checkpoint.hpp"
#include "qin/config.hpp"
#include "qin/dataset_cache.hpp"
#include "qin/metrics.hpp"
#include "qin/training.hpp"

namespace fs = std::filesystem;
using namespace qin;

namespace {

constexpr const char* kUsage = R"(usage: qin <command> [--config FILE] [--workers N] [--keys] [key=value ...]

commands:
  prepare      build a dataset cache (synthetic by default, or data.raw=reviews.json[.gz])
  train        train a ranking model against a prepared cache
  eval         score a saved checkpoint on a held-out split
  ablate       train and evaluate the model-variant matrix across seeds
  bench        time two-stage retrieval against per-target rescans
  sweep-alpha  train and evaluate across score fusion weights

Settings are flat key=value pairs with section prefixes (model.d=8, train.lr=0.001).
Precedence: command line over --config file over built-in defaults.
`qin <command> --keys` lists every key the command accepts, with its default.
The cache root comes from $QIN_CACHE_ROOT when data.cache_dir is unset.
)";

std::map<std::string, std::string> defaults_for(const std::string& command) {
    std::map<std::string, std::string> d{{"workers", "1"}};
    auto merge = [&](std::map<std::string, std::string> m) { d.merge(m); };
    if (command == "prepare") {
        merge(data_defaults());
        merge(synth_defaults());
        merge(relevance_defaults());
        return d;
    }
    d["out.dir"] = "";  // empty: runs/<command>
    if (command == "train" || command == "eval" || command == "ablate" || command == "sweep-alpha") {
        merge(data_defaults());
        merge(model_defaults());
        merge(train_defaults());
        if (command == "eval") {
            d["eval.checkpoint"] = "runs/train/model.ckpt";
            d["eval.split"] = "test";
        }
        if (command == "ablate") d["ablate.seeds"] = "1,2,3";
        if (command == "sweep-alpha") d["sweep.alphas"] = "0,0.25,0.5,0.75,1";
        return d;
    }
    if (command == "bench") {
        d.merge(std::map<std::string, std::string>{
            {"bench.n", "10000"}, {"bench.m", "100"}, {"bench.d", "8"}, {"bench.k1", "50"},
            {"bench.k2", "10"}, {"bench.trials", "5"}, {"bench.seed", "1"},
        });
        return d;
    }
    throw UsageError(cat("unknown command: ", command));
}

struct Cli {
    std::string command;
    KvConfig cfg;
    bool list_keys = false;
};

Cli parse_cli(int argc, char** argv) {
    if (argc < 2) throw UsageError("missing command");
    Cli cli{argv[1], KvConfig(defaults_for(argv[1])), false};
    std::vector<std::pair<std::string, std::string>> overrides;
    for (int i = 2; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--config") {
            if (++i >= argc) throw UsageError("--config needs a file path");
            cli.cfg.load_file(argv[i]);
        } else if (a == "--workers") {
            if (++i >= argc) throw UsageError("--workers needs a count");
            overrides.emplace_back("workers", argv[i]);
        } else if (a == "--keys") {
            cli.list_keys = true;
        } else if (const auto eq = a.find('='); a[0] != '-' && eq != std::string::npos && eq > 0) {
            overrides.emplace_back(a.substr(0, eq), a.substr(eq + 1));
        } else {
            throw UsageError(cat("unrecognized argument: ", a));
        }
    }
    for (const auto& [k, v] : overrides) cli.cfg.set(k, v);
    return cli;
}

void write_text(const fs::path& p, const std::string& content) {
    std::ofstream f(p, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error(cat("cannot write ", p.string()));
    f << content;
    if (!f) throw std::runtime_error(cat("write failed for ", p.string()));
}

void write_resolved(const fs::path& dir, const std::string& command, const KvConfig& cfg) {
    write_text(dir / "resolved_config.txt", cat("command=", command, "\n", cfg.resolved()));
}

fs::path cache_dir_of(const KvConfig& cfg) {
    const std::string dir = cfg.str("data.cache_dir");
    if (!dir.empty()) return dir;
    const char* root = std::getenv("QIN_CACHE_ROOT");
    return fs::path(root && *root ? root : "cache") / cfg.str("data.name");
}

fs::path out_dir_of(const KvConfig& cfg, const std::string& command) {
    std::string dir = cfg.str("out.dir");
    if (dir.empty()) dir = cat("runs/", command);
    fs::create_directories(dir);
    return dir;
}

std::string g17(double v) {
    char b[40];
    std::snprintf(b, sizeof(b), "%.17g", v);
    return b;
}

constexpr const char* kMetricHeader = "ndcg4,ndcg8,ndcg20,mrr4,mrr8,mrr20,hr4,hr8,hr20";

std::string metric_cells(const MetricReport& r) {
    std::string out;
    for (const char* m : {"ndcg", "mrr", "hr"})
        for (int n : kMetricCutoffs) out += cat(out.empty() ? "" : ",", g17(r.at(m, n)));
    return out;
}

// ---------------------------------------------------------------------------

int cmd_prepare(const KvConfig& cfg) {
    const fs::path cache = cache_dir_of(cfg);
    Dataset ds;
    std::string source;
    if (const std::string raw = cfg.str("data.raw"); !raw.empty()) {
        if (!fs::exists(raw)) throw UsageError(cat("data.raw not found: ", raw));
        LoadStats ls;
        ds = load_amazon_dataset(raw, &ls);
        source = cat(raw, " (", ls.lines, " lines, ", ls.malformed, " skipped)");
    } else {
        try {
            ds = generate_synthetic(synth_config_from(cfg));
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
        source = "synthetic";
    }
    fs::create_directories(cache);
    save_dataset(ds, cache.string());
    const RelevanceIndex ix =
        RelevanceIndex::build(ds, cfg.get_int("relevance.dim", 4, 4096), cfg.get_seed("relevance.seed"));
    ix.save((cache / "relevance.idx").string());
    const std::string stats = cat("users=", ds.n_users, "\nqueries=", ds.n_queries, "\nitems=", ds.n_items,
                                  "\ninteractions=", ds.interactions.size(),
                                  "\nusers_excluded_from_eval=", ds.users_excluded_from_eval, "\n");
    write_text(cache / "stats.txt", stats);
    write_resolved(cache, "prepare", cfg);
    std::cout << "cache " << cache.string() << " from " << source << "\n" << stats;
    return 0;
}

struct LoadedData {
    Dataset ds;
    RelevanceIndex ix;
};

LoadedData load_prepared(const KvConfig& cfg) {
    const fs::path cache = cache_dir_of(cfg);
    if (!fs::exists(cache / "manifest.json"))
        throw UsageError(cat("no dataset cache at ", cache.string(), "; run `qin prepare` first"));
    const fs::path idx = cache / "relevance.idx";
    if (!fs::exists(idx))
        throw UsageError(cat("no relevance index at ", idx.string(), "; run `qin prepare` first"));
    return {load_dataset(cache.string()), RelevanceIndex::load(idx.string())};
}

std::string variant_label(const TrainConfig& tc) {
    std::string s = cat(to_string(tc.rsu.variant), "/", to_string(tc.model.fau.pooling));
    if (tc.rsu.hard_search) s += "+hard";
    if (tc.model.fau.value_source == ValueSource::IdOnly) s += "+id_values";
    return s;
}

MetricReport eval_report(const LoadedData& ld, const TrainConfig& tc, QinParams<float>& params, int split) {
    ModelScorer<float> scorer(tc, ld.ix, ld.ds, params);
    const std::uint64_t seed = hash_combine(tc.seed, split == 2 ? kTestNegStream : kValNegStream);
    return report_from_ranks(collect_ranks(ld.ds, split, tc.l_max, tc.n_neg, seed, scorer));
}

int cmd_train(const KvConfig& cfg) {
    const TrainConfig tc = train_config_from(cfg);
    const LoadedData ld = load_prepared(cfg);
    const fs::path out = out_dir_of(cfg, "train");
    QinParams<float> params(tc.model, ld.ds.n_users, ld.ds.n_items, ld.ds.n_attrs, ld.ds.n_queries, tc.seed);
    const TrainResult res = train_model(ld.ds, ld.ix, tc, params);
    save_checkpoint((out / "model.ckpt").string(), params.all());
    write_text(out / "history.csv", history_csv(res.history));
    write_resolved(out, "train", cfg);
    std::cout << "trained " << res.epochs_run << " epochs; best epoch " << res.best_epoch << ", val ndcg@4 "
              << g17(res.best_val_ndcg4) << "\ncheckpoint " << (out / "model.ckpt").string() << "\n";
    return 0;
}

int cmd_eval(const KvConfig& cfg) {
    const TrainConfig tc = train_config_from(cfg);
    const std::string split_name = cfg.str("eval.split");
    if (split_name != "val" && split_name != "test")
        throw UsageError(cat("eval.split=", split_name, " (want val or test)"));
    const int split = split_name == "test" ? 2 : 1;
    const std::string ckpt = cfg.str("eval.checkpoint");
    if (!fs::exists(ckpt)) throw UsageError(cat("checkpoint not found: ", ckpt, "; run `qin train` first"));
    const LoadedData ld = load_prepared(cfg);
    QinParams<float> params(tc.model, ld.ds.n_users, ld.ds.n_items, ld.ds.n_attrs, ld.ds.n_queries, tc.seed);
    load_checkpoint(ckpt, params.all());
    const MetricReport rep = eval_report(ld, tc, params, split);
    const nlohmann::json j = results_json(cfg.str("data.name"), variant_label(tc), tc.seed, rep);
    const fs::path out = out_dir_of(cfg, "eval");
    write_text(out / "results.json", j.dump(2) + "\n");
    write_resolved(out, "eval", cfg);
    std::cout << j.dump(2) << "\n";
    return 0;
}

struct Ablation {
    std::string label;
    std::function<void(TrainConfig&)> apply;
};

std::vector<Ablation> ablation_matrix() {
    return {
        {"full", [](TrainConfig&) {}},
        {"retrieve_query_only", [](TrainConfig& t) { t.rsu.variant = RsuVariant::OneStageQuery; }},
        {"retrieve_target_only", [](TrainConfig& t) { t.rsu.variant = RsuVariant::OneStageTarget; }},
        {"retrieve_target_hard",
         [](TrainConfig& t) {
             t.rsu.variant = RsuVariant::OneStageTarget;
             t.rsu.hard_search = true;
         }},
        {"no_gate", [](TrainConfig& t) { t.model.fau.pooling = Pooling::DifStyle; }},
        {"id_values", [](TrainConfig& t) { t.model.fau.value_source = ValueSource::IdOnly; }},
        {"mean_pool", [](TrainConfig& t) { t.model.fau.pooling = Pooling::Mean; }},
        {"din_pool", [](TrainConfig& t) { t.model.fau.pooling = Pooling::DinStyle; }},
        {"self_attn_pool", [](TrainConfig& t) { t.model.fau.pooling = Pooling::SelfAttnStyle; }},
    };
}

int cmd_ablate(const KvConfig& cfg) {
    const TrainConfig base = train_config_from(cfg);
    const auto seeds = cfg.get_seeds("ablate.seeds");
    const LoadedData ld = load_prepared(cfg);
    const fs::path out = out_dir_of(cfg, "ablate");

    std::string csv = cat("variant,seed,", kMetricHeader, "\n");
    for (const Ablation& ab : ablation_matrix()) {
        TrainConfig tc = base;
        ab.apply(tc);
        std::vector<MetricReport> reps;
        for (const std::uint64_t seed : seeds) {
            tc.seed = seed;
            QinParams<float> params(tc.model, ld.ds.n_users, ld.ds.n_items, ld.ds.n_attrs, ld.ds.n_queries, seed);
            train_model(ld.ds, ld.ix, tc, params);
            reps.push_back(eval_report(ld, tc, params, 2));
            csv += cat(ab.label, ",", seed, ",", metric_cells(reps.back()), "\n");
        }
        MetricReport mean, sd;
        for (std::size_t i = 0; i < kMetricCutoffs.size(); ++i) {
            auto moments = [&](auto pick) {
                double m = 0, v = 0;
                for (const auto& r : reps) m += pick(r)[i];
                m /= static_cast<double>(reps.size());
                for (const auto& r : reps) v += (pick(r)[i] - m) * (pick(r)[i] - m);
                return std::pair{m, std::sqrt(v / static_cast<double>(reps.size()))};
            };
            std::tie(mean.ndcg[i], sd.ndcg[i]) = moments([](const MetricReport& r) { return r.ndcg; });
            std::tie(mean.mrr[i], sd.mrr[i]) = moments([](const MetricReport& r) { return r.mrr; });
            std::tie(mean.hr[i], sd.hr[i]) = moments([](const MetricReport& r) { return r.hr; });
        }
        csv += cat(ab.label, ",mean,", metric_cells(mean), "\n");
        csv += cat(ab.label, ",std,", metric_cells(sd), "\n");
    }
    write_text(out / "ablation.csv", csv);
    write_resolved(out, "ablate", cfg);
    std::cout << csv;
    return 0;
}

int cmd_sweep_alpha(const KvConfig& cfg) {
    const auto alphas = cfg.get_doubles("sweep.alphas", 0.0, 1.0);
    const TrainConfig base = train_config_from(cfg);
    const LoadedData ld = load_prepared(cfg);
    const fs::path out = out_dir_of(cfg, "sweep-alpha");

    std::string csv = cat("alpha,", kMetricHeader, "\n");
    for (const double a : alphas) {
        TrainConfig tc = base;
        tc.model.fau.alpha = a;
        QinParams<float> params(tc.model, ld.ds.n_users, ld.ds.n_items, ld.ds.n_attrs, ld.ds.n_queries, tc.seed);
        train_model(ld.ds, ld.ix, tc, params);
        csv += cat(g17(a), ",", metric_cells(eval_report(ld, tc, params, 2)), "\n");
    }
    write_text(out / "sweep_alpha.csv", csv);
    write_resolved(out, "sweep-alpha", cfg);
    std::cout << csv;
    return 0;
}

int cmd_bench(const KvConfig& cfg) {
    BenchReport rep;
    try {
        rep = complexity_bench(cfg.get_int("bench.n", 1, 100000000), cfg.get_int("bench.m", 1, 1000000),
                               cfg.get_int("bench.d", 1, 4096), cfg.get_int("bench.k1", 1, 1000000),
                               cfg.get_int("bench.k2", 1, 1000000), cfg.get_int("bench.trials", 1, 100000),
                               cfg.get_seed("bench.seed"));
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    const fs::path out = out_dir_of(cfg, "bench");
    write_text(out / "bench.csv", rep.csv());
    write_resolved(out, "bench", cfg);
    std::cout << rep.csv() << "measured speedup " << g17(rep.measured_ratio) << "x, analytic "
              << g17(rep.analytic_ratio) << "x\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        if (argc >= 2) {
            const std::string a1 = argv[1];
            if (a1 == "--help" || a1 == "-h" || a1 == "help") {
                std::cout << kUsage;
                return 0;
            }
        }
        const Cli cli = parse_cli(argc, argv);
        if (cli.list_keys) {
            std::cout << cli.cfg.resolved();
            return 0;
        }
        // workers is validated and recorded in the resolved config; every
        // command currently runs its work on one thread.
        cli.cfg.get_int("workers", 1, 4096);
        if (cli.command == "prepare") return cmd_prepare(cli.cfg);
        if (cli.command == "train") return cmd_train(cli.cfg);
        if (cli.command == "eval") return cmd_eval(cli.cfg);
        if (cli.command == "ablate") return cmd_ablate(cli.cfg);
        if (cli.command == "sweep-alpha") return cmd_sweep_alpha(cli.cfg);
        if (cli.command == "bench") return cmd_bench(cli.cfg);
        throw UsageError(cat("unknown command: ", cli.command));
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\nrun `qin --help` for usage\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
