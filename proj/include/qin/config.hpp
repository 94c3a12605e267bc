#pragma once
// Flat key=value run configuration. Keys carry a section prefix (model.d,
// train.lr, ...). Three layers, later wins: built-in defaults, config file,
// command line. Every key must be declared up front so typos fail loudly, and
// the fully resolved set can be dumped next to a run's outputs.

#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "qin/common.hpp"
#include "qin/model.hpp"
#include "qin/rsu.hpp"
#include "qin/training.hpp"

namespace qin {

// Bad invocation or bad configuration, as opposed to a failure while running.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

class KvConfig {
public:
    explicit KvConfig(std::map<std::string, std::string> defaults) : vals_(std::move(defaults)) {}

    void set(const std::string& key, const std::string& value) {
        auto it = vals_.find(key);
        if (it == vals_.end()) throw UsageError(cat("unknown config key: ", key));
        it->second = value;
    }

    void load_file(const std::string& path) {
        std::ifstream f(path);
        if (!f) throw UsageError(cat("cannot open config file ", path));
        std::string line;
        int lineno = 0;
        while (std::getline(f, line)) {
            ++lineno;
            const std::string t = trim(line);
            if (t.empty() || t[0] == '#') continue;
            const auto eq = t.find('=');
            if (eq == std::string::npos)
                throw UsageError(cat(path, ":", lineno, ": expected key=value, got '", t, "'"));
            set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
        }
    }

    const std::string& str(const std::string& key) const {
        auto it = vals_.find(key);
        if (it == vals_.end()) throw UsageError(cat("unknown config key: ", key));
        return it->second;
    }

    int get_int(const std::string& key, long lo, long hi) const {
        const long v = parse_long(key, str(key));
        if (v < lo || v > hi) throw UsageError(cat(key, "=", v, " outside [", lo, ", ", hi, "]"));
        return static_cast<int>(v);
    }

    std::uint64_t get_seed(const std::string& key) const {
        const std::string& s = str(key);
        try {
            std::size_t used = 0;
            const unsigned long long v = std::stoull(s, &used);
            if (used != s.size()) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            throw UsageError(cat(key, "=", s, " is not a valid seed"));
        }
    }

    double get_double(const std::string& key, double lo, double hi) const {
        const double v = parse_double(key, str(key));
        if (!(v >= lo && v <= hi)) throw UsageError(cat(key, "=", v, " outside [", lo, ", ", hi, "]"));
        return v;
    }

    bool get_bool(const std::string& key) const {
        const std::string& s = str(key);
        if (s == "1" || s == "true") return true;
        if (s == "0" || s == "false") return false;
        throw UsageError(cat(key, "=", s, " is not a boolean (use true/false or 1/0)"));
    }

    std::vector<double> get_doubles(const std::string& key, double lo, double hi) const {
        std::vector<double> out;
        for (const auto& piece : split_commas(key, str(key))) {
            const double v = parse_double(key, piece);
            if (!(v >= lo && v <= hi)) throw UsageError(cat(key, ": ", v, " outside [", lo, ", ", hi, "]"));
            out.push_back(v);
        }
        return out;
    }

    std::vector<std::uint64_t> get_seeds(const std::string& key) const {
        std::vector<std::uint64_t> out;
        for (const auto& piece : split_commas(key, str(key))) {
            try {
                std::size_t used = 0;
                const unsigned long long v = std::stoull(piece, &used);
                if (used != piece.size()) throw std::invalid_argument(piece);
                out.push_back(v);
            } catch (const std::exception&) {
                throw UsageError(cat(key, ": '", piece, "' is not a valid seed"));
            }
        }
        return out;
    }

    // Sorted key=value lines; the record written next to every run's outputs.
    std::string resolved() const {
        std::string out;
        for (const auto& [k, v] : vals_) out += cat(k, "=", v, "\n");
        return out;
    }

private:
    static std::string trim(const std::string& s) {
        std::size_t b = 0, e = s.size();
        while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
        while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
        return s.substr(b, e - b);
    }

    static long parse_long(const std::string& key, const std::string& s) {
        try {
            std::size_t used = 0;
            const long v = std::stol(s, &used);
            if (used != s.size()) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            throw UsageError(cat(key, "=", s, " is not an integer"));
        }
    }

    static double parse_double(const std::string& key, const std::string& s) {
        try {
            std::size_t used = 0;
            const double v = std::stod(s, &used);
            if (used != s.size()) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            throw UsageError(cat(key, "=", s, " is not a number"));
        }
    }

    std::vector<std::string> split_commas(const std::string& key, const std::string& s) const {
        std::vector<std::string> out;
        std::stringstream ss(s);
        std::string piece;
        while (std::getline(ss, piece, ',')) {
            piece = trim(piece);
            if (!piece.empty()) out.push_back(piece);
        }
        if (out.empty()) throw UsageError(cat(key, " is an empty list"));
        return out;
    }

    std::map<std::string, std::string> vals_;
};

// ---------------------------------------------------------------------------
// enum <-> string, shared by the command line and result tables

inline GateMode gate_from_string(const std::string& s) {
    if (s == "vector_softmax") return GateMode::VectorSoftmax;
    if (s == "scalar_sigmoid") return GateMode::ScalarSigmoid;
    if (s == "off") return GateMode::Off;
    throw UsageError(cat("model.gate=", s, " (want vector_softmax, scalar_sigmoid, or off)"));
}

inline const char* to_string(GateMode g) {
    switch (g) {
        case GateMode::VectorSoftmax: return "vector_softmax";
        case GateMode::ScalarSigmoid: return "scalar_sigmoid";
        case GateMode::Off: return "off";
    }
    return "?";
}

inline ValueSource values_from_string(const std::string& s) {
    if (s == "fused") return ValueSource::FusedFields;
    if (s == "id_only") return ValueSource::IdOnly;
    throw UsageError(cat("model.values=", s, " (want fused or id_only)"));
}

inline const char* to_string(ValueSource v) {
    return v == ValueSource::FusedFields ? "fused" : "id_only";
}

inline Pooling pooling_from_string(const std::string& s) {
    if (s == "fau") return Pooling::Fau;
    if (s == "mean") return Pooling::Mean;
    if (s == "din") return Pooling::DinStyle;
    if (s == "self_attn") return Pooling::SelfAttnStyle;
    if (s == "dif") return Pooling::DifStyle;
    throw UsageError(cat("model.pooling=", s, " (want fau, mean, din, self_attn, or dif)"));
}

inline const char* to_string(Pooling p) {
    switch (p) {
        case Pooling::Fau: return "fau";
        case Pooling::Mean: return "mean";
        case Pooling::DinStyle: return "din";
        case Pooling::SelfAttnStyle: return "self_attn";
        case Pooling::DifStyle: return "dif";
    }
    return "?";
}

inline RsuVariant rsu_variant_from_string(const std::string& s) {
    if (s == "two_stage") return RsuVariant::TwoStage;
    if (s == "one_stage_query") return RsuVariant::OneStageQuery;
    if (s == "one_stage_target") return RsuVariant::OneStageTarget;
    throw UsageError(cat("rsu.variant=", s, " (want two_stage, one_stage_query, or one_stage_target)"));
}

inline const char* to_string(RsuVariant v) {
    switch (v) {
        case RsuVariant::TwoStage: return "two_stage";
        case RsuVariant::OneStageQuery: return "one_stage_query";
        case RsuVariant::OneStageTarget: return "one_stage_target";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// default key sets and typed extraction

inline std::map<std::string, std::string> data_defaults() {
    return {
        {"data.name", "synthetic"},
        {"data.cache_dir", ""},  // empty: <cache root>/<data.name>
        {"data.raw", ""},        // empty: generate from synth.*
    };
}

inline std::map<std::string, std::string> synth_defaults() {
    return {
        {"synth.n_users", "100"},    {"synth.n_items", "500"},   {"synth.n_clusters", "10"},
        {"synth.n_queries", "20"},   {"synth.latent_dim", "8"},  {"synth.events_min", "20"},
        {"synth.events_max", "40"},  {"synth.rho", "0.8"},       {"synth.search_ratio", "1.0"},
        {"synth.noise_ratio", "0.1"},{"synth.temperature", "1.0"},{"synth.seed", "1"},
    };
}

inline std::map<std::string, std::string> relevance_defaults() {
    return {{"relevance.dim", "32"}, {"relevance.seed", "1"}};
}

inline std::map<std::string, std::string> model_defaults() {
    return {
        {"model.d", "8"},           {"model.seq_len", "10"},  {"model.heads", "2"},
        {"model.alpha", "0.5"},     {"model.gate", "vector_softmax"},
        {"model.values", "fused"},  {"model.pooling", "fau"},
        {"model.gate_hidden", "8"}, {"model.din_hidden", "8"},
        {"model.mlp1", "16"},       {"model.mlp2", "8"},
        {"rsu.variant", "two_stage"}, {"rsu.k1", "50"}, {"rsu.k2", "10"}, {"rsu.hard_search", "false"},
    };
}

inline std::map<std::string, std::string> train_defaults() {
    return {
        {"train.lr", "0.001"},   {"train.batch", "512"},       {"train.epochs", "50"},
        {"train.patience", "5"}, {"train.n_neg", "100"},       {"train.l_max", "10"},
        {"train.p_query_mask", "0.1"}, {"train.seed", "1"},
    };
}

inline SynthConfig synth_config_from(const KvConfig& c) {
    SynthConfig sc;
    sc.n_users = c.get_int("synth.n_users", 1, 1000000);
    sc.n_items = c.get_int("synth.n_items", 1, 1000000);
    sc.n_clusters = c.get_int("synth.n_clusters", 1, 100000);
    sc.n_queries = c.get_int("synth.n_queries", 1, 1000000);
    sc.latent_dim = c.get_int("synth.latent_dim", 1, 4096);
    sc.events_min = c.get_int("synth.events_min", 1, 100000);
    sc.events_max = c.get_int("synth.events_max", 1, 100000);
    sc.rho = c.get_double("synth.rho", 0.0, 1.0);
    sc.search_ratio = c.get_double("synth.search_ratio", 0.0, 1.0);
    sc.noise_ratio = c.get_double("synth.noise_ratio", 0.0, 1.0);
    sc.temperature = c.get_double("synth.temperature", 1e-6, 1e6);
    sc.seed = c.get_seed("synth.seed");
    return sc;
}

inline TrainConfig train_config_from(const KvConfig& c) {
    TrainConfig tc;
    tc.lr = c.get_double("train.lr", 0.0, 1e9);
    tc.batch = c.get_int("train.batch", 1, 1 << 20);
    tc.epochs = c.get_int("train.epochs", 1, 100000);
    tc.patience = c.get_int("train.patience", 1, 100000);
    tc.n_neg = c.get_int("train.n_neg", 1, 1 << 20);
    tc.l_max = c.get_int("train.l_max", 1, 100000);
    tc.p_query_mask = c.get_double("train.p_query_mask", 0.0, 1.0);
    tc.seed = c.get_seed("train.seed");
    tc.rsu.variant = rsu_variant_from_string(c.str("rsu.variant"));
    tc.rsu.k1 = c.get_int("rsu.k1", 1, 1 << 20);
    tc.rsu.k2 = c.get_int("rsu.k2", 1, 1 << 20);
    tc.rsu.hard_search = c.get_bool("rsu.hard_search");
    tc.model.d = c.get_int("model.d", 1, 4096);
    tc.model.seq_len = c.get_int("model.seq_len", 1, 100000);
    tc.model.mlp1 = c.get_int("model.mlp1", 1, 1 << 16);
    tc.model.mlp2 = c.get_int("model.mlp2", 1, 1 << 16);
    tc.model.fau.alpha = c.get_double("model.alpha", 0.0, 1.0);
    tc.model.fau.heads = c.get_int("model.heads", 1, 256);
    tc.model.fau.gate = gate_from_string(c.str("model.gate"));
    tc.model.fau.value_source = values_from_string(c.str("model.values"));
    tc.model.fau.pooling = pooling_from_string(c.str("model.pooling"));
    tc.model.fau.gate_hidden = c.get_int("model.gate_hidden", 1, 1 << 16);
    tc.model.fau.din_hidden = c.get_int("model.din_hidden", 1, 1 << 16);
    try {
        tc.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    return tc;
}

}  // namespace qin
