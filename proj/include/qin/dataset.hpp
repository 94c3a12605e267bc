#pragma once
// Dataset construction: review ingestion, query extraction from category
// paths, engagement bucketing, per-user chronological histories with
// leave-one-out splits, and a planted-factor synthetic generator.
//
// Index 0 is reserved as padding for items, queries, users, attributes, and
// engagement ids alike; real entities start at 1.

#include <zlib.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "qin/common.hpp"

namespace qin {

struct RawReview {
    std::string user_id;
    std::string item_id;
    int rating = 0;
    int helpful_up = 0;
    int helpful_total = 0;
    std::int64_t timestamp = 0;
    std::vector<std::string> category_path;
    std::string title;
};

struct Interaction {
    int user = 0;
    int query = 0;
    int item = 0;
    int engagement = 0;
    std::int64_t timestamp = 0;
    std::uint8_t label = 1;
    std::uint8_t split = 0;  // 0 train, 1 val, 2 test
    std::uint8_t query_issued = 1;
};

struct UserHistory {
    std::vector<int> items;  // chronological
    std::vector<int> engagement_ids;
    std::vector<int> queries;
    std::vector<std::uint8_t> query_issued;
    std::vector<std::int64_t> timestamps;
};

struct SynthTruth {
    int dim = 0;
    std::vector<std::vector<float>> user_vecs;  // [n_users+1][dim], row 0 zero
    std::vector<std::vector<float>> item_vecs;
};

struct Dataset {
    int n_users = 0;    // excluding padding slot
    int n_items = 0;
    int n_queries = 0;
    int n_attrs = 0;
    int n_engagement = 15;

    // vocab[0] is the reserved padding entry ""
    std::vector<std::string> user_names, item_names, query_names, attr_names;
    std::vector<int> item_attr;                        // item index -> attr index
    std::vector<std::vector<std::string>> item_terms;  // relevance-index terms per item

    std::vector<Interaction> interactions;  // grouped by user, time-ordered
    std::vector<UserHistory> histories;     // indexed by user, [0] unused
    int users_excluded_from_eval = 0;

    std::optional<SynthTruth> truth;  // synthetic only, never serialized

    std::vector<std::string> query_terms(int q) const {
        std::vector<std::string> out;
        std::string_view s = query_names[q];
        std::size_t i = 0;
        while (i < s.size()) {
            std::size_t j = s.find(' ', i);
            if (j == std::string_view::npos) j = s.size();
            if (j > i) out.emplace_back(s.substr(i, j - i));
            i = j + 1;
        }
        return out;
    }
};

// ---------------------------------------------------------------------------
// ingestion

namespace detail {

template <class Fn>
void for_each_line(const std::string& path, Fn&& fn) {
    gzFile f = gzopen(path.c_str(), "rb");  // reads plain files too
    if (!f) throw std::runtime_error(cat("cannot open ", path));
    std::string line;
    std::array<char, 1 << 16> buf;
    while (true) {
        char* got = gzgets(f, buf.data(), static_cast<int>(buf.size()));
        if (!got) break;
        line += got;
        if (!line.empty() && line.back() == '\n') {
            line.pop_back();
            if (!line.empty() && line.back() == '\r') line.pop_back();
            fn(line);
            line.clear();
        }
    }
    int err = 0;
    gzerror(f, &err);
    gzclose(f);
    if (err != Z_OK && err != Z_STREAM_END) throw std::runtime_error(cat("read error in ", path));
    if (!line.empty()) fn(line);  // final line without trailing newline
}

}  // namespace detail

struct LoadStats {
    long lines = 0;
    long malformed = 0;
};

// Parses one record per line. A line is malformed when it is not JSON or
// lacks a usable user, item, rating, or timestamp; such lines are skipped and
// counted. More than one bad line AND more than 1% bad aborts the load.
std::vector<RawReview> load_reviews(const std::string& path, LoadStats* stats_out = nullptr);

inline int bucket_engagement(int rating, int helpful_up, int helpful_total) {
    if (rating < 1 || rating > 5) throw std::invalid_argument(cat("bucket_engagement: rating ", rating, " out of range"));
    const double ratio = static_cast<double>(helpful_up) / static_cast<double>(std::max(helpful_total, 1));
    const int tercile = ratio >= 2.0 / 3.0 ? 2 : ratio >= 1.0 / 3.0 ? 1 : 0;
    return (rating - 1) * 3 + tercile + 1;
}

inline std::vector<RawReview> five_core_filter(std::vector<RawReview> reviews) {
    bool changed = true;
    while (changed) {
        std::unordered_map<std::string, int> uc, ic;
        for (const auto& r : reviews) {
            ++uc[r.user_id];
            ++ic[r.item_id];
        }
        std::vector<RawReview> kept;
        kept.reserve(reviews.size());
        for (auto& r : reviews)
            if (uc[r.user_id] >= 5 && ic[r.item_id] >= 5) kept.push_back(std::move(r));
        changed = kept.size() != reviews.size();
        reviews = std::move(kept);
    }
    return reviews;
}

// Lowercase alphanumeric tokens, fixed stopword list, duplicates removed with
// first-occurrence order preserved.
inline std::vector<std::string> normalize_terms(std::span<const std::string> phrases) {
    static const std::unordered_set<std::string> kStop{
        "a", "an", "and", "as", "at", "by", "for", "from", "in", "of",
        "on", "or", "the", "to", "with"};
    std::vector<std::string> out;
    std::unordered_set<std::string> seen;
    for (const auto& phrase : phrases) {
        std::string tok;
        auto flush = [&] {
            if (!tok.empty() && !kStop.count(tok) && seen.insert(tok).second) out.push_back(tok);
            tok.clear();
        };
        for (char ch : phrase) {
            if (std::isalnum(static_cast<unsigned char>(ch)))
                tok += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
            else
                flush();
        }
        flush();
    }
    return out;
}

inline std::string join_terms(const std::vector<std::string>& terms) {
    std::string s;
    for (const auto& t : terms) {
        if (!s.empty()) s += ' ';
        s += t;
    }
    return s;
}

// ---------------------------------------------------------------------------
// splits, windows, negatives

inline void leave_one_out_split(std::vector<Interaction>& interactions, int n_users, int* excluded_out) {
    std::vector<std::vector<int>> per_user(static_cast<std::size_t>(n_users) + 1);
    for (int i = 0; i < static_cast<int>(interactions.size()); ++i)
        per_user[interactions[i].user].push_back(i);
    int excluded = 0;
    for (int u = 1; u <= n_users; ++u) {
        auto& idx = per_user[u];
        if (idx.size() < 3) {
            if (!idx.empty()) ++excluded;
            continue;  // all stay train
        }
        interactions[idx[idx.size() - 1]].split = 2;
        interactions[idx[idx.size() - 2]].split = 1;
    }
    if (excluded_out) *excluded_out = excluded;
}

struct SeqWindow {
    std::vector<int> items, engagement, queries;  // length l_max, left-padded with 0
    std::vector<std::uint8_t> live;
    std::vector<std::int64_t> timestamps;  // 0 at padding
    int n_live = 0;
};

// Behaviors strictly before `t`, most recent l_max, chronological, left-padded.
inline SeqWindow visible_window(const UserHistory& h, std::int64_t t, int l_max) {
    if (l_max < 1) throw std::invalid_argument("visible_window: l_max must be positive");
    SeqWindow w;
    w.items.assign(l_max, 0);
    w.engagement.assign(l_max, 0);
    w.queries.assign(l_max, 0);
    w.live.assign(l_max, 0);
    w.timestamps.assign(l_max, 0);
    int end = 0;  // count of events with timestamp < t (history is chronological)
    while (end < static_cast<int>(h.timestamps.size()) && h.timestamps[end] < t) ++end;
    const int start = std::max(0, end - l_max);
    w.n_live = end - start;
    const int pad = l_max - w.n_live;
    for (int k = 0; k < w.n_live; ++k) {
        w.items[pad + k] = h.items[start + k];
        w.engagement[pad + k] = h.engagement_ids[start + k];
        w.queries[pad + k] = h.queries[start + k];
        w.timestamps[pad + k] = h.timestamps[start + k];
        w.live[pad + k] = 1;
    }
    return w;
}

// Uniform without replacement from {1..n_items} minus the positive;
// deterministic per (seed, sample_id).
inline std::vector<int> sample_negatives(int n_items, int positive, int n, std::uint64_t seed, std::uint64_t sample_id) {
    if (n_items <= n) throw std::invalid_argument(cat("sample_negatives: vocabulary ", n_items, " <= requested ", n));
    Rng rng(hash_combine(seed, sample_id));
    std::vector<int> out;
    out.reserve(n);
    std::unordered_set<int> used{positive};
    while (static_cast<int>(out.size()) < n) {
        int cand = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(n_items)));
        if (used.insert(cand).second) out.push_back(cand);
    }
    return out;
}

// ---------------------------------------------------------------------------
// pipeline from raw reviews to a Dataset

namespace detail {

class Interner {
public:
    // index 0 is the reserved padding entry
    Interner() { names_.push_back(""); }
    int get(const std::string& s) {
        auto [it, fresh] = map_.try_emplace(s, static_cast<int>(names_.size()));
        if (fresh) names_.push_back(s);
        return it->second;
    }
    int lookup(const std::string& s) const {
        auto it = map_.find(s);
        return it == map_.end() ? 0 : it->second;
    }
    std::vector<std::string> take() { return std::move(names_); }
    int count() const { return static_cast<int>(names_.size()) - 1; }

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, int> map_;
};

}  // namespace detail

inline void rebuild_histories(Dataset& ds) {
    ds.histories.assign(static_cast<std::size_t>(ds.n_users) + 1, {});
    for (const auto& it : ds.interactions) {
        auto& h = ds.histories[it.user];
        h.items.push_back(it.item);
        h.engagement_ids.push_back(it.engagement);
        h.queries.push_back(it.query);
        h.query_issued.push_back(it.query_issued);
        h.timestamps.push_back(it.timestamp);
    }
}

inline Dataset build_dataset(std::vector<RawReview> reviews) {
    reviews = five_core_filter(std::move(reviews));

    std::stable_sort(reviews.begin(), reviews.end(), [](const RawReview& a, const RawReview& b) {
        if (a.user_id != b.user_id) return a.user_id < b.user_id;
        return a.timestamp < b.timestamp;
    });

    Dataset ds;
    detail::Interner users, items, queries, attrs;
    std::unordered_map<int, int> item_attr;
    std::unordered_map<int, std::vector<std::string>> item_terms;

    for (const auto& r : reviews) {
        const int u = users.get(r.user_id);
        const int i = items.get(r.item_id);
        auto terms = normalize_terms(r.category_path);
        const std::string qstr = join_terms(terms);
        const int q = qstr.empty() ? 0 : queries.get(qstr);
        const int a = qstr.empty() ? 0 : attrs.get(qstr);
        if (!item_attr.count(i)) {
            item_attr[i] = a;
            auto full = terms;
            if (!r.title.empty()) {
                std::vector<std::string> tp{r.title};
                for (auto& t : normalize_terms(tp))
                    if (std::find(full.begin(), full.end(), t) == full.end()) full.push_back(t);
            }
            item_terms[i] = std::move(full);
        }
        Interaction it;
        it.user = u;
        it.query = q;
        it.item = i;
        it.engagement = bucket_engagement(r.rating, r.helpful_up, r.helpful_total);
        it.timestamp = r.timestamp;
        it.label = 1;
        it.query_issued = q != 0;
        ds.interactions.push_back(it);
    }

    ds.n_users = users.count();
    ds.n_items = items.count();
    ds.n_queries = queries.count();
    ds.n_attrs = attrs.count();
    ds.user_names = users.take();
    ds.item_names = items.take();
    ds.query_names = queries.take();
    ds.attr_names = attrs.take();
    ds.item_attr.assign(static_cast<std::size_t>(ds.n_items) + 1, 0);
    ds.item_terms.assign(static_cast<std::size_t>(ds.n_items) + 1, {});
    for (auto& [i, a] : item_attr) ds.item_attr[i] = a;
    for (auto& [i, t] : item_terms) ds.item_terms[i] = std::move(t);

    leave_one_out_split(ds.interactions, ds.n_users, &ds.users_excluded_from_eval);
    rebuild_histories(ds);
    return ds;
}

inline Dataset load_amazon_dataset(const std::string& path, LoadStats* stats_out = nullptr) {
    return build_dataset(load_reviews(path, stats_out));
}

// ---------------------------------------------------------------------------
// synthetic generator

struct SynthConfig {
    int n_users = 100;
    int n_items = 500;
    int n_clusters = 10;
    int n_queries = 20;  // must be a multiple of n_clusters
    int latent_dim = 8;
    int events_min = 20;
    int events_max = 40;
    double rho = 0.8;          // engagement-affinity correlation in [0,1]
    double search_ratio = 1.0; // fraction of behaviors carrying an issued query
    double noise_ratio = 0.1;  // fraction of uniform-random item picks
    double temperature = 1.0;
    std::uint64_t seed = 1;
};

inline double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

inline Dataset generate_synthetic(const SynthConfig& cfg) {
    if (cfg.n_users < 1 || cfg.n_items < 1 || cfg.n_clusters < 1 || cfg.latent_dim < 1)
        throw std::invalid_argument("generate_synthetic: counts must be positive");
    if (cfg.n_queries % cfg.n_clusters != 0)
        throw std::invalid_argument(cat("generate_synthetic: n_queries ", cfg.n_queries, " not a multiple of n_clusters ", cfg.n_clusters));
    if (cfg.events_min < 1 || cfg.events_max < cfg.events_min)
        throw std::invalid_argument("generate_synthetic: bad event count range");
    if (cfg.rho < 0 || cfg.rho > 1) throw std::invalid_argument("generate_synthetic: rho must be in [0,1]");
    if (cfg.n_items < cfg.events_max)
        throw std::invalid_argument("generate_synthetic: need more items than events per user");

    const int n_sub = cfg.n_queries / cfg.n_clusters;
    Dataset ds;
    ds.n_users = cfg.n_users;
    ds.n_items = cfg.n_items;
    ds.n_queries = cfg.n_queries;
    ds.n_attrs = cfg.n_clusters;

    ds.user_names.resize(static_cast<std::size_t>(cfg.n_users) + 1);
    for (int u = 1; u <= cfg.n_users; ++u) ds.user_names[u] = cat("u", u);
    ds.item_names.resize(static_cast<std::size_t>(cfg.n_items) + 1);
    ds.attr_names.resize(static_cast<std::size_t>(cfg.n_clusters) + 1);
    for (int c = 1; c <= cfg.n_clusters; ++c) ds.attr_names[c] = cat("c", c - 1);
    ds.query_names.resize(static_cast<std::size_t>(cfg.n_queries) + 1);
    for (int q = 1; q <= cfg.n_queries; ++q) {
        const int c = (q - 1) / n_sub, s = (q - 1) % n_sub;
        ds.query_names[q] = cat("c", c, " s", s);
    }

    // cluster centers: random unit vectors
    Rng center_rng(mix64(hash_combine(cfg.seed, 0xC1)));
    std::vector<std::vector<double>> centers(cfg.n_clusters, std::vector<double>(cfg.latent_dim));
    for (auto& c : centers) {
        double norm = 0;
        for (auto& x : c) {
            x = center_rng.gaussian();
            norm += x * x;
        }
        norm = std::sqrt(norm);
        for (auto& x : c) x /= norm;
    }

    SynthTruth truth;
    truth.dim = cfg.latent_dim;
    truth.item_vecs.assign(static_cast<std::size_t>(cfg.n_items) + 1, std::vector<float>(cfg.latent_dim, 0.f));
    truth.user_vecs.assign(static_cast<std::size_t>(cfg.n_users) + 1, std::vector<float>(cfg.latent_dim, 0.f));

    ds.item_attr.assign(static_cast<std::size_t>(cfg.n_items) + 1, 0);
    ds.item_terms.assign(static_cast<std::size_t>(cfg.n_items) + 1, {});
    std::vector<int> item_query(static_cast<std::size_t>(cfg.n_items) + 1, 0);
    Rng item_rng(mix64(hash_combine(cfg.seed, 0x17)));
    for (int i = 1; i <= cfg.n_items; ++i) {
        const int c = (i - 1) % cfg.n_clusters;
        const int s = ((i - 1) / cfg.n_clusters) % n_sub;
        ds.item_attr[i] = c + 1;
        ds.item_names[i] = cat("i", i);
        ds.item_terms[i] = {cat("c", c), cat("s", s), cat("i", i)};
        item_query[i] = c * n_sub + s + 1;
        std::vector<double> v(cfg.latent_dim);
        double norm = 0;
        for (int d = 0; d < cfg.latent_dim; ++d) {
            v[d] = centers[c][d] + 0.4 * item_rng.gaussian();
            norm += v[d] * v[d];
        }
        norm = std::sqrt(norm);
        for (int d = 0; d < cfg.latent_dim; ++d) truth.item_vecs[i][d] = static_cast<float>(v[d] / norm);
    }

    std::vector<double> probs(static_cast<std::size_t>(cfg.n_items) + 1);
    for (int u = 1; u <= cfg.n_users; ++u) {
        Rng rng(mix64(hash_combine(cfg.seed, 0xF00D + static_cast<std::uint64_t>(u))));
        std::vector<double> uv(cfg.latent_dim);
        for (int d = 0; d < cfg.latent_dim; ++d) {
            uv[d] = rng.gaussian();
            truth.user_vecs[u][d] = static_cast<float>(uv[d]);
        }

        // softmax over items of affinity/temperature
        double mx = -1e300;
        std::vector<double> aff(static_cast<std::size_t>(cfg.n_items) + 1, 0.0);
        for (int i = 1; i <= cfg.n_items; ++i) {
            double a = 0;
            for (int d = 0; d < cfg.latent_dim; ++d) a += uv[d] * truth.item_vecs[i][d];
            aff[i] = a;
            mx = std::max(mx, a / cfg.temperature);
        }
        double denom = 0;
        for (int i = 1; i <= cfg.n_items; ++i) {
            probs[i] = std::exp(aff[i] / cfg.temperature - mx);
            denom += probs[i];
        }

        const int n_ev = rng.uniform_int(cfg.events_min, cfg.events_max);
        std::unordered_set<int> used;
        for (int t = 0; t < n_ev; ++t) {
            int pick = 0;
            for (int attempt = 0; attempt < 200 && pick == 0; ++attempt) {
                int cand;
                if (rng.uniform01() < cfg.noise_ratio) {
                    cand = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.n_items)));
                } else {
                    double r = rng.uniform01() * denom;
                    cand = cfg.n_items;
                    for (int i = 1; i <= cfg.n_items; ++i) {
                        r -= probs[i];
                        if (r <= 0) {
                            cand = i;
                            break;
                        }
                    }
                }
                if (!used.count(cand)) pick = cand;
            }
            if (pick == 0)  // dense user; fall back to the first unused item
                for (int i = 1; i <= cfg.n_items && pick == 0; ++i)
                    if (!used.count(i)) pick = i;
            used.insert(pick);

            const double e_raw = cfg.rho * aff[pick] + std::sqrt(1.0 - cfg.rho * cfg.rho) * rng.gaussian();
            const int eng = 1 + std::min(14, static_cast<int>(std_normal_cdf(e_raw) * 15.0));

            Interaction it;
            it.user = u;
            it.item = pick;
            it.query = item_query[pick];
            it.query_issued = rng.uniform01() < cfg.search_ratio ? 1 : 0;
            it.engagement = eng;
            it.timestamp = static_cast<std::int64_t>(u) * 100000 + t;
            it.label = 1;
            ds.interactions.push_back(it);
        }
    }

    leave_one_out_split(ds.interactions, ds.n_users, &ds.users_excluded_from_eval);
    rebuild_histories(ds);
    ds.truth = std::move(truth);
    return ds;
}

}  // namespace qin

#include <nlohmann/json.hpp>

namespace qin {

inline std::vector<RawReview> load_reviews(const std::string& path, LoadStats* stats_out) {
    std::vector<RawReview> out;
    LoadStats st;
    detail::for_each_line(path, [&](const std::string& line) {
        ++st.lines;
        bool blank = line.find_first_not_of(" \t") == std::string::npos;
        if (blank) {
            --st.lines;
            return;
        }
        nlohmann::json j = nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
        if (j.is_discarded() || !j.is_object()) {
            ++st.malformed;
            return;
        }
        RawReview r;
        auto str_field = [&](const char* a, const char* b) -> std::string {
            if (j.contains(a) && j[a].is_string()) return j[a].get<std::string>();
            if (b && j.contains(b) && j[b].is_string()) return j[b].get<std::string>();
            return {};
        };
        r.user_id = str_field("reviewerID", "user_id");
        r.item_id = str_field("asin", "item_id");
        double rating = -1;
        for (const char* k : {"overall", "rating"})
            if (j.contains(k) && j[k].is_number()) rating = j[k].get<double>();
        std::int64_t ts = std::numeric_limits<std::int64_t>::min();
        for (const char* k : {"unixReviewTime", "timestamp"})
            if (j.contains(k) && j[k].is_number_integer()) ts = j[k].get<std::int64_t>();
        r.rating = static_cast<int>(std::lround(rating));
        r.timestamp = ts;
        if (r.user_id.empty() || r.item_id.empty() || r.rating < 1 || r.rating > 5 ||
            ts == std::numeric_limits<std::int64_t>::min()) {
            ++st.malformed;
            return;
        }
        if (j.contains("helpful") && j["helpful"].is_array() && j["helpful"].size() == 2 &&
            j["helpful"][0].is_number() && j["helpful"][1].is_number()) {
            r.helpful_up = j["helpful"][0].get<int>();
            r.helpful_total = j["helpful"][1].get<int>();
        }
        if (r.helpful_up < 0) r.helpful_up = 0;
        if (r.helpful_total < r.helpful_up) r.helpful_total = r.helpful_up;
        if (j.contains("categories") && j["categories"].is_array() && !j["categories"].empty() &&
            j["categories"][0].is_array()) {
            for (const auto& c : j["categories"][0])
                if (c.is_string()) r.category_path.push_back(c.get<std::string>());
        } else {
            for (const char* k : {"category", "category_path"})
                if (j.contains(k) && j[k].is_array())
                    for (const auto& c : j[k])
                        if (c.is_string()) r.category_path.push_back(c.get<std::string>());
        }
        if (j.contains("title") && j["title"].is_string()) r.title = j["title"].get<std::string>();
        out.push_back(std::move(r));
    });
    if (st.malformed > 1 && st.malformed * 100 > st.lines)
        throw std::runtime_error(cat("load_reviews: ", st.malformed, " malformed of ", st.lines, " lines in ", path));
    if (stats_out) *stats_out = st;
    return out;
}

}  // namespace qin
