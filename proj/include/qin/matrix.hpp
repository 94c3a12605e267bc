#pragma once
// Dense row-major 2-D matrices and the elementwise/matmul kernels the model
// graph is built from. Everything is value-semantic; Real is float in
// training and double in gradient-checking mode.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "qin/common.hpp"

namespace qin {

template <class Real>
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<Real> a;  // row-major, rows*cols entries

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, Real(0)) {
        if (r < 0 || c < 0) throw std::invalid_argument("Mat: negative dimension");
    }
    Mat(int r, int c, std::initializer_list<Real> vals) : Mat(r, c) {
        if (vals.size() != a.size()) throw std::invalid_argument("Mat: initializer size mismatch");
        std::copy(vals.begin(), vals.end(), a.begin());
    }

    static Mat filled(int r, int c, Real v) {
        Mat m(r, c);
        std::fill(m.a.begin(), m.a.end(), v);
        return m;
    }

    static Mat identity(int n) {
        Mat m(n, n);
        for (int i = 0; i < n; ++i) m.at(i, i) = Real(1);
        return m;
    }

    std::size_t size() const { return a.size(); }

    Real& at(int r, int c) { return a[static_cast<std::size_t>(r) * cols + c]; }
    Real at(int r, int c) const { return a[static_cast<std::size_t>(r) * cols + c]; }

    std::span<Real> row(int r) { return {a.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)}; }
    std::span<const Real> row(int r) const { return {a.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)}; }

    bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }
};

using MatF = Mat<float>;
using MatD = Mat<double>;

template <class Real>
std::string shape_str(const Mat<Real>& m) {
    return cat(m.rows, "x", m.cols);
}

template <class Real>
bool all_finite(const Mat<Real>& m) {
    for (Real v : m.a)
        if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
}

template <class Real>
double max_abs_diff(const Mat<Real>& x, const Mat<Real>& y) {
    if (!x.same_shape(y)) throw std::invalid_argument(cat("max_abs_diff: shape mismatch ", shape_str(x), " vs ", shape_str(y)));
    double m = 0.0;
    for (std::size_t i = 0; i < x.a.size(); ++i)
        m = std::max(m, std::abs(static_cast<double>(x.a[i]) - static_cast<double>(y.a[i])));
    return m;
}

template <class Real>
Mat<Real> matmul(const Mat<Real>& x, const Mat<Real>& y) {
    if (x.cols != y.rows)
        throw std::invalid_argument(cat("matmul: shape mismatch ", shape_str(x), " * ", shape_str(y)));
    Mat<Real> out(x.rows, y.cols);
    for (int i = 0; i < x.rows; ++i) {
        for (int k = 0; k < x.cols; ++k) {
            const Real xik = x.at(i, k);
            if (xik == Real(0)) continue;
            const Real* yr = y.a.data() + static_cast<std::size_t>(k) * y.cols;
            Real* orow = out.a.data() + static_cast<std::size_t>(i) * out.cols;
            for (int j = 0; j < y.cols; ++j) orow[j] += xik * yr[j];
        }
    }
    return out;
}

template <class Real>
Mat<Real> transpose(const Mat<Real>& x) {
    Mat<Real> out(x.cols, x.rows);
    for (int i = 0; i < x.rows; ++i)
        for (int j = 0; j < x.cols; ++j) out.at(j, i) = x.at(i, j);
    return out;
}

template <class Real>
Mat<Real> add(const Mat<Real>& x, const Mat<Real>& y) {
    if (!x.same_shape(y)) throw std::invalid_argument(cat("add: shape mismatch ", shape_str(x), " vs ", shape_str(y)));
    Mat<Real> out = x;
    for (std::size_t i = 0; i < out.a.size(); ++i) out.a[i] += y.a[i];
    return out;
}

template <class Real>
Mat<Real> scale(const Mat<Real>& x, Real s) {
    Mat<Real> out = x;
    for (Real& v : out.a) v *= s;
    return out;
}

template <class Real>
Mat<Real> hadamard(const Mat<Real>& x, const Mat<Real>& y) {
    if (!x.same_shape(y)) throw std::invalid_argument(cat("hadamard: shape mismatch ", shape_str(x), " vs ", shape_str(y)));
    Mat<Real> out = x;
    for (std::size_t i = 0; i < out.a.size(); ++i) out.a[i] *= y.a[i];
    return out;
}

template <class Real>
Mat<Real> relu(const Mat<Real>& x) {
    Mat<Real> out = x;
    for (Real& v : out.a) v = v > Real(0) ? v : Real(0);
    return out;
}

template <class Real>
Mat<Real> sigmoid(const Mat<Real>& x) {
    Mat<Real> out = x;
    for (Real& v : out.a) v = Real(1) / (Real(1) + std::exp(-v));
    return out;
}

/// Row-wise softmax over the unmasked columns. mask[c] != 0 means column c is
/// live; masked entries come out exactly 0. Stabilized by row-max subtraction.
/// A fully masked row violates the contract.
template <class Real>
Mat<Real> masked_softmax(const Mat<Real>& logits, std::span<const std::uint8_t> mask) {
    if (static_cast<int>(mask.size()) != logits.cols)
        throw std::invalid_argument(cat("masked_softmax: mask length ", mask.size(), " != cols ", logits.cols));
    bool any_live = false;
    for (auto m : mask) any_live = any_live || (m != 0);
    if (!any_live) throw std::invalid_argument("masked_softmax: fully masked row pattern");

    Mat<Real> out(logits.rows, logits.cols);
    for (int r = 0; r < logits.rows; ++r) {
        Real mx = -std::numeric_limits<Real>::infinity();
        for (int c = 0; c < logits.cols; ++c)
            if (mask[c]) mx = std::max(mx, logits.at(r, c));
        Real denom = Real(0);
        for (int c = 0; c < logits.cols; ++c) {
            if (!mask[c]) continue;
            const Real e = std::exp(logits.at(r, c) - mx);
            out.at(r, c) = e;
            denom += e;
        }
        for (int c = 0; c < logits.cols; ++c)
            if (mask[c]) out.at(r, c) /= denom;
    }
    return out;
}

/// Xavier uniform init: values in ±sqrt(6/(rows+cols)), deterministic per seed.
template <class Real>
Mat<Real> xavier_init(int rows, int cols, std::uint64_t seed) {
    if (rows <= 0 || cols <= 0)
        throw std::invalid_argument(cat("xavier_init: dimensions must be positive, got ", rows, "x", cols));
    const double bound = std::sqrt(6.0 / (rows + cols));
    Rng rng(mix64(seed));
    Mat<Real> out(rows, cols);
    for (Real& v : out.a) v = static_cast<Real>(rng.uniform(-bound, bound));
    return out;
}

/// A named trainable tensor. grad accumulates across backward passes until the
/// optimizer consumes it. frozen_row0 marks embedding tables whose padding row
/// must stay all-zero.
template <class Real>
struct Param {
    std::string name;
    Mat<Real> value;
    Mat<Real> grad;
    bool frozen_row0 = false;

    Param() = default;
    Param(std::string n, Mat<Real> v, bool frozen0 = false)
        : name(std::move(n)), value(std::move(v)), grad(value.rows, value.cols), frozen_row0(frozen0) {}

    void zero_grad() { std::fill(grad.a.begin(), grad.a.end(), Real(0)); }
};

}  // namespace qin
