#pragma once
// Parameter snapshots. On disk: a versioned header followed by one blob per
// parameter (name, shape, float32 values, little-endian, row-major), in the
// model's fixed allocation order. Loading is strict: count, names, and shapes
// must match the receiving parameter set.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "qin/common.hpp"
#include "qin/matrix.hpp"

namespace qin {

inline constexpr char kCheckpointMagic[8] = {'Q', 'I', 'N', 'C', 'K', 'P', 'T', '1'};

namespace detail {

template <class T>
void write_pod(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::istream& is) {
    T v;
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    return v;
}

}  // namespace detail

template <class Real>
void save_checkpoint(const std::string& path, const std::vector<Param<Real>*>& params) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error(cat("checkpoint: cannot write ", path));
    os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    detail::write_pod(os, static_cast<std::uint32_t>(params.size()));
    std::vector<float> buf;
    for (const auto* p : params) {
        detail::write_pod(os, static_cast<std::uint32_t>(p->name.size()));
        os.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
        detail::write_pod(os, static_cast<std::int32_t>(p->value.rows));
        detail::write_pod(os, static_cast<std::int32_t>(p->value.cols));
        buf.resize(p->value.size());
        for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = static_cast<float>(p->value.a[i]);
        os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
    }
    if (!os) throw std::runtime_error(cat("checkpoint: write failed for ", path));
}

template <class Real>
void load_checkpoint(const std::string& path, const std::vector<Param<Real>*>& params) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error(cat("checkpoint: cannot open ", path));
    char magic[sizeof(kCheckpointMagic)];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
        throw std::runtime_error(cat("checkpoint: bad magic in ", path));
    const auto count = detail::read_pod<std::uint32_t>(is);
    if (count != params.size())
        throw std::runtime_error(cat("checkpoint: holds ", count, " params, model expects ", params.size()));
    std::vector<float> buf;
    for (auto* p : params) {
        const auto name_len = detail::read_pod<std::uint32_t>(is);
        std::string name(name_len, '\0');
        is.read(name.data(), static_cast<std::streamsize>(name_len));
        const auto rows = detail::read_pod<std::int32_t>(is);
        const auto cols = detail::read_pod<std::int32_t>(is);
        if (!is) throw std::runtime_error("checkpoint: truncated file");
        if (name != p->name) throw std::runtime_error(cat("checkpoint: found param ", name, ", expected ", p->name));
        if (rows != p->value.rows || cols != p->value.cols)
            throw std::runtime_error(cat("checkpoint: ", name, " is ", rows, "x", cols, ", model expects ",
                                         shape_str(p->value)));
        buf.resize(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols));
        is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
        if (!is) throw std::runtime_error("checkpoint: truncated file");
        for (std::size_t i = 0; i < buf.size(); ++i) p->value.a[i] = static_cast<Real>(buf[i]);
    }
}

template <class Real>
std::vector<Mat<Real>> snapshot_values(const std::vector<Param<Real>*>& params) {
    std::vector<Mat<Real>> out;
    out.reserve(params.size());
    for (const auto* p : params) out.push_back(p->value);
    return out;
}

template <class Real>
void restore_values(const std::vector<Param<Real>*>& params, const std::vector<Mat<Real>>& snap) {
    if (snap.size() != params.size()) throw std::invalid_argument("restore_values: size mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!snap[i].same_shape(params[i]->value)) throw std::invalid_argument("restore_values: shape mismatch");
        params[i]->value = snap[i];
    }
}

}  // namespace qin
