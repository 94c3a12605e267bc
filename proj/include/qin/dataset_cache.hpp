#pragma once
// On-disk dataset cache: vocab text files, an items table, binary interaction
// and sequence records, and human-readable stats. Writing the same dataset
// twice produces byte-identical files.

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <stdexcept>
#include <string>
#include <vector>

#include "qin/dataset.hpp"

namespace qin {

namespace detail {

inline void write_i32(std::ofstream& f, std::int32_t v) { f.write(reinterpret_cast<const char*>(&v), 4); }
inline void write_i64(std::ofstream& f, std::int64_t v) { f.write(reinterpret_cast<const char*>(&v), 8); }
inline void write_u8(std::ofstream& f, std::uint8_t v) { f.write(reinterpret_cast<const char*>(&v), 1); }
inline std::int32_t read_i32(std::ifstream& f) {
    std::int32_t v = 0;
    f.read(reinterpret_cast<char*>(&v), 4);
    return v;
}
inline std::int64_t read_i64(std::ifstream& f) {
    std::int64_t v = 0;
    f.read(reinterpret_cast<char*>(&v), 8);
    return v;
}
inline std::uint8_t read_u8(std::ifstream& f) {
    std::uint8_t v = 0;
    f.read(reinterpret_cast<char*>(&v), 1);
    return v;
}

inline void write_vocab(const std::filesystem::path& p, const std::vector<std::string>& names) {
    std::ofstream f(p);
    if (!f) throw std::runtime_error(cat("cannot write ", p.string()));
    for (std::size_t i = 1; i < names.size(); ++i) f << names[i] << '\n';
}

inline std::vector<std::string> read_vocab(const std::filesystem::path& p) {
    std::ifstream f(p);
    if (!f) throw std::runtime_error(cat("cannot open ", p.string()));
    std::vector<std::string> names{""};
    std::string line;
    while (std::getline(f, line)) names.push_back(line);
    return names;
}

}  // namespace detail

inline void save_dataset(const Dataset& ds, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const fs::path root(dir);

    detail::write_vocab(root / "vocab_users.txt", ds.user_names);
    detail::write_vocab(root / "vocab_items.txt", ds.item_names);
    detail::write_vocab(root / "vocab_queries.txt", ds.query_names);
    detail::write_vocab(root / "vocab_attrs.txt", ds.attr_names);

    {
        std::ofstream f(root / "items.tsv");
        if (!f) throw std::runtime_error("cannot write items.tsv");
        for (int i = 1; i <= ds.n_items; ++i) {
            f << ds.item_names[i] << '\t' << ds.item_attr[i] << '\t';
            for (std::size_t t = 0; t < ds.item_terms[i].size(); ++t) {
                if (t) f << ' ';
                f << ds.item_terms[i][t];
            }
            f << '\n';
        }
    }

    {
        std::ofstream f(root / "interactions.bin", std::ios::binary);
        if (!f) throw std::runtime_error("cannot write interactions.bin");
        f.write("QINDAT01", 8);
        detail::write_i64(f, static_cast<std::int64_t>(ds.interactions.size()));
        for (const auto& it : ds.interactions) {
            detail::write_i32(f, it.user);
            detail::write_i32(f, it.query);
            detail::write_i32(f, it.item);
            detail::write_i32(f, it.engagement);
            detail::write_i64(f, it.timestamp);
            detail::write_u8(f, it.label);
            detail::write_u8(f, it.split);
            detail::write_u8(f, it.query_issued);
            detail::write_u8(f, 0);
        }
    }

    {
        std::ofstream f(root / "sequences.bin", std::ios::binary);
        if (!f) throw std::runtime_error("cannot write sequences.bin");
        f.write("QINSEQ01", 8);
        detail::write_i32(f, ds.n_users);
        for (int u = 1; u <= ds.n_users; ++u) {
            const auto& h = ds.histories[u];
            detail::write_i32(f, static_cast<std::int32_t>(h.items.size()));
            for (std::size_t k = 0; k < h.items.size(); ++k) {
                detail::write_i32(f, h.items[k]);
                detail::write_i32(f, h.engagement_ids[k]);
                detail::write_i32(f, h.queries[k]);
                detail::write_u8(f, h.query_issued[k]);
                detail::write_i64(f, h.timestamps[k]);
            }
        }
    }

    nlohmann::json stats{
        {"users", ds.n_users},
        {"queries", ds.n_queries},
        {"items", ds.n_items},
        {"interactions", ds.interactions.size()},
        {"attrs", ds.n_attrs},
        {"users_excluded_from_eval", ds.users_excluded_from_eval},
    };
    std::ofstream(root / "stats.json") << stats.dump(2) << '\n';

    nlohmann::json manifest{
        {"format", 1},
        {"files", {"vocab_users.txt", "vocab_items.txt", "vocab_queries.txt", "vocab_attrs.txt",
                   "items.tsv", "interactions.bin", "sequences.bin", "stats.json"}},
    };
    std::ofstream(root / "manifest.json") << manifest.dump(2) << '\n';
}

inline Dataset load_dataset(const std::string& dir) {
    namespace fs = std::filesystem;
    const fs::path root(dir);
    if (!fs::exists(root / "manifest.json")) throw std::runtime_error(cat("no dataset cache at ", dir));

    Dataset ds;
    ds.user_names = detail::read_vocab(root / "vocab_users.txt");
    ds.item_names = detail::read_vocab(root / "vocab_items.txt");
    ds.query_names = detail::read_vocab(root / "vocab_queries.txt");
    ds.attr_names = detail::read_vocab(root / "vocab_attrs.txt");
    ds.n_users = static_cast<int>(ds.user_names.size()) - 1;
    ds.n_items = static_cast<int>(ds.item_names.size()) - 1;
    ds.n_queries = static_cast<int>(ds.query_names.size()) - 1;
    ds.n_attrs = static_cast<int>(ds.attr_names.size()) - 1;

    ds.item_attr.assign(static_cast<std::size_t>(ds.n_items) + 1, 0);
    ds.item_terms.assign(static_cast<std::size_t>(ds.n_items) + 1, {});
    {
        std::ifstream f(root / "items.tsv");
        if (!f) throw std::runtime_error("cannot open items.tsv");
        std::string line;
        int i = 0;
        while (std::getline(f, line)) {
            ++i;
            if (i > ds.n_items) throw std::runtime_error("items.tsv has more rows than the item vocabulary");
            const auto t1 = line.find('\t');
            const auto t2 = line.find('\t', t1 + 1);
            if (t1 == std::string::npos || t2 == std::string::npos)
                throw std::runtime_error(cat("items.tsv: bad row ", i));
            ds.item_attr[i] = std::stoi(line.substr(t1 + 1, t2 - t1 - 1));
            std::string terms = line.substr(t2 + 1);
            std::size_t p = 0;
            while (p < terms.size()) {
                auto q = terms.find(' ', p);
                if (q == std::string::npos) q = terms.size();
                if (q > p) ds.item_terms[i].push_back(terms.substr(p, q - p));
                p = q + 1;
            }
        }
    }

    {
        std::ifstream f(root / "interactions.bin", std::ios::binary);
        if (!f) throw std::runtime_error("cannot open interactions.bin");
        char magic[8];
        f.read(magic, 8);
        if (!f || std::memcmp(magic, "QINDAT01", 8) != 0) throw std::runtime_error("bad interactions.bin header");
        const std::int64_t n = detail::read_i64(f);
        ds.interactions.resize(static_cast<std::size_t>(n));
        for (auto& it : ds.interactions) {
            it.user = detail::read_i32(f);
            it.query = detail::read_i32(f);
            it.item = detail::read_i32(f);
            it.engagement = detail::read_i32(f);
            it.timestamp = detail::read_i64(f);
            it.label = detail::read_u8(f);
            it.split = detail::read_u8(f);
            it.query_issued = detail::read_u8(f);
            detail::read_u8(f);
        }
        if (!f) throw std::runtime_error("truncated interactions.bin");
    }

    {
        std::ifstream f(root / "sequences.bin", std::ios::binary);
        if (!f) throw std::runtime_error("cannot open sequences.bin");
        char magic[8];
        f.read(magic, 8);
        if (!f || std::memcmp(magic, "QINSEQ01", 8) != 0) throw std::runtime_error("bad sequences.bin header");
        const int n_users = detail::read_i32(f);
        if (n_users != ds.n_users) throw std::runtime_error("sequences.bin user count disagrees with vocabulary");
        ds.histories.assign(static_cast<std::size_t>(ds.n_users) + 1, {});
        for (int u = 1; u <= ds.n_users; ++u) {
            const int n = detail::read_i32(f);
            auto& h = ds.histories[u];
            for (int k = 0; k < n; ++k) {
                h.items.push_back(detail::read_i32(f));
                h.engagement_ids.push_back(detail::read_i32(f));
                h.queries.push_back(detail::read_i32(f));
                h.query_issued.push_back(detail::read_u8(f));
                h.timestamps.push_back(detail::read_i64(f));
            }
        }
        if (!f) throw std::runtime_error("truncated sequences.bin");
    }

    {
        std::ifstream f(root / "stats.json");
        nlohmann::json stats = nlohmann::json::parse(f, nullptr, false);
        if (!stats.is_discarded() && stats.contains("users_excluded_from_eval"))
            ds.users_excluded_from_eval = stats["users_excluded_from_eval"].get<int>();
    }
    return ds;
}

}  // namespace qin
