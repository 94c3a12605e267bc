#pragma once
// Frozen query/item unit vectors in a shared hashed term space, used by the
// retrieval stages for query-item and item-item relevance. Each term maps to
// one signed bucket; a document vector is the idf-weighted bucket sum,
// L2-normalized. Row 0 is the all-zero padding vector.

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "qin/common.hpp"
#include "qin/dataset.hpp"

namespace qin {

class RelevanceIndex {
public:
    RelevanceIndex() = default;

    // Pluggable construction from precomputed vectors (flat row-major, row 0 padding).
    RelevanceIndex(int dim, std::vector<float> item_vecs, std::vector<float> query_vecs)
        : dim_(dim), item_vecs_(std::move(item_vecs)), query_vecs_(std::move(query_vecs)) {
        if (dim < 1) throw std::invalid_argument("RelevanceIndex: dim must be positive");
        if (item_vecs_.size() % dim_ != 0 || query_vecs_.size() % dim_ != 0)
            throw std::invalid_argument("RelevanceIndex: vector payload not a multiple of dim");
    }

    static RelevanceIndex build(const Dataset& ds, int dim, std::uint64_t seed) {
        if (dim < 4) throw std::invalid_argument(cat("RelevanceIndex: dim ", dim, " < 4"));
        RelevanceIndex ix;
        ix.dim_ = dim;

        std::unordered_map<std::string, int> df;
        for (int i = 1; i <= ds.n_items; ++i)
            for (const auto& t : ds.item_terms[i]) ++df[t];
        const double n_docs = static_cast<double>(ds.n_items);
        auto idf = [&](const std::string& t) {
            auto it = df.find(t);
            const double d = it == df.end() ? 0.0 : static_cast<double>(it->second);
            return std::log((1.0 + n_docs) / (1.0 + d)) + 1.0;
        };
        const std::uint64_t salt = mix64(seed);
        auto accumulate = [&](std::span<const std::string> terms, std::vector<double>& acc) {
            std::fill(acc.begin(), acc.end(), 0.0);
            for (const auto& t : terms) {
                const std::uint64_t h = mix64(fnv1a(t) ^ salt);
                const int bucket = static_cast<int>(h % static_cast<std::uint64_t>(dim));
                const double sign = (h >> 32) & 1 ? 1.0 : -1.0;
                acc[bucket] += sign * idf(t);
            }
        };
        auto emit = [&](const std::vector<double>& acc, std::vector<float>& out) {
            double norm = 0;
            for (double v : acc) norm += v * v;
            norm = std::sqrt(norm);
            for (double v : acc) out.push_back(norm > 0 ? static_cast<float>(v / norm) : 0.f);
        };

        std::vector<double> acc(dim);
        ix.item_vecs_.reserve(static_cast<std::size_t>(ds.n_items + 1) * dim);
        ix.item_vecs_.insert(ix.item_vecs_.end(), dim, 0.f);
        for (int i = 1; i <= ds.n_items; ++i) {
            accumulate(ds.item_terms[i], acc);
            emit(acc, ix.item_vecs_);
        }
        ix.query_vecs_.reserve(static_cast<std::size_t>(ds.n_queries + 1) * dim);
        ix.query_vecs_.insert(ix.query_vecs_.end(), dim, 0.f);
        for (int q = 1; q <= ds.n_queries; ++q) {
            auto terms = ds.query_terms(q);
            accumulate(terms, acc);
            emit(acc, ix.query_vecs_);
        }
        return ix;
    }

    int dim() const { return dim_; }
    int n_item_rows() const { return static_cast<int>(item_vecs_.size()) / dim_; }
    int n_query_rows() const { return static_cast<int>(query_vecs_.size()) / dim_; }

    std::span<const float> item_vec(int i) const {
        if (i < 0 || i >= n_item_rows()) throw std::invalid_argument(cat("item_vec: index ", i, " out of range"));
        return {item_vecs_.data() + static_cast<std::size_t>(i) * dim_, static_cast<std::size_t>(dim_)};
    }
    std::span<const float> query_vec(int q) const {
        if (q < 0 || q >= n_query_rows()) throw std::invalid_argument(cat("query_vec: index ", q, " out of range"));
        return {query_vecs_.data() + static_cast<std::size_t>(q) * dim_, static_cast<std::size_t>(dim_)};
    }

    static double relevance(std::span<const float> a, std::span<const float> b) {
        if (a.size() != b.size())
            throw std::invalid_argument(cat("relevance: dim mismatch ", a.size(), " vs ", b.size()));
        double acc = 0;
        for (std::size_t i = 0; i < a.size(); ++i) acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
        return acc;
    }

    void save(const std::string& path) const {
        std::ofstream f(path, std::ios::binary);
        if (!f) throw std::runtime_error(cat("cannot write ", path));
        f.write(kMagic, 8);
        write_u32(f, 1);
        write_u32(f, static_cast<std::uint32_t>(dim_));
        write_u32(f, static_cast<std::uint32_t>(n_item_rows()));
        write_u32(f, static_cast<std::uint32_t>(n_query_rows()));
        write_f32s(f, item_vecs_);
        write_f32s(f, query_vecs_);
        if (!f) throw std::runtime_error(cat("write failed for ", path));
    }

    static RelevanceIndex load(const std::string& path) {
        std::ifstream f(path, std::ios::binary);
        if (!f) throw std::runtime_error(cat("cannot open ", path));
        char magic[8];
        f.read(magic, 8);
        if (!f || std::memcmp(magic, kMagic, 8) != 0) throw std::runtime_error(cat("bad index file ", path));
        const std::uint32_t version = read_u32(f);
        if (version != 1) throw std::runtime_error(cat("unsupported index version ", version));
        RelevanceIndex ix;
        ix.dim_ = static_cast<int>(read_u32(f));
        const std::uint32_t ni = read_u32(f);
        const std::uint32_t nq = read_u32(f);
        ix.item_vecs_ = read_f32s(f, static_cast<std::size_t>(ni) * ix.dim_);
        ix.query_vecs_ = read_f32s(f, static_cast<std::size_t>(nq) * ix.dim_);
        if (!f) throw std::runtime_error(cat("truncated index file ", path));
        return ix;
    }

private:
    static constexpr const char kMagic[9] = "QINRELIX";

    static void write_u32(std::ofstream& f, std::uint32_t v) { f.write(reinterpret_cast<const char*>(&v), 4); }
    static std::uint32_t read_u32(std::ifstream& f) {
        std::uint32_t v = 0;
        f.read(reinterpret_cast<char*>(&v), 4);
        return v;
    }
    static void write_f32s(std::ofstream& f, const std::vector<float>& v) {
        f.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(float)));
    }
    static std::vector<float> read_f32s(std::ifstream& f, std::size_t n) {
        std::vector<float> v(n);
        f.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(float)));
        return v;
    }

    int dim_ = 0;
    std::vector<float> item_vecs_;   // (rows) x dim, row-major
    std::vector<float> query_vecs_;
};

}  // namespace qin
