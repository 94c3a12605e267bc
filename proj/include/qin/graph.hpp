#pragma once
// Define-by-run reverse-mode tape over Mat<Real>. The graph is rebuilt per
// sample group and reset afterwards; node payloads live in one flat slab so a
// steady-state training loop does no per-node allocation.
//
// Gradients of a node are zero-initialized at creation; backward() walks the
// tape in reverse creation order, so by the time a node is visited every
// consumer has already deposited its contribution.

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "qin/matrix.hpp"

namespace qin {

template <class Real>
class Graph {
public:
    Graph() {
        slab_.reserve(1 << 20);
        islab_.reserve(1 << 14);
        nodes_.reserve(1 << 12);
    }

    // ---- leaves ----

    int constant(const Mat<Real>& m) {
        int id = alloc(Op::Constant, m.rows, m.cols);
        copy_in(id, m);
        return id;
    }

    int zeros(int rows, int cols) { return alloc(Op::Constant, rows, cols); }

    int param(Param<Real>& p) {
        int id = alloc(Op::ParamLeaf, p.value.rows, p.value.cols);
        nodes_[id].par = &p;
        copy_in(id, p.value);
        return id;
    }

    /// Gather rows of an embedding table; ids.size() output rows. Gradient
    /// scatters back into the table, skipping the frozen padding row 0.
    int rows_of(Param<Real>& table, std::span<const int> ids) {
        int id = alloc(Op::RowsOf, static_cast<int>(ids.size()), table.value.cols);
        nodes_[id].par = &table;
        nodes_[id].i0 = push_ints(ids);
        nodes_[id].ilen = static_cast<int>(ids.size());
        Real* out = val(id);
        for (std::size_t t = 0; t < ids.size(); ++t) {
            if (ids[t] < 0 || ids[t] >= table.value.rows)
                throw std::invalid_argument(cat("rows_of: index ", ids[t], " out of range for ", table.name));
            auto r = table.value.row(ids[t]);
            std::copy(r.begin(), r.end(), out + t * table.value.cols);
        }
        return id;
    }

    // ---- elementwise / structural ----

    int matmul(int a, int b) {
        check(a);
        check(b);
        const auto& na = nodes_[a];
        const auto& nb = nodes_[b];
        if (na.cols != nb.rows)
            throw std::invalid_argument(cat("matmul: shape mismatch ", na.rows, "x", na.cols, " * ", nb.rows, "x", nb.cols));
        int id = alloc(Op::Matmul, na.rows, nb.cols, a, b);
        mm_nn(val(a), nodes_[a].rows, nodes_[a].cols, val(b), nodes_[b].cols, val(id), false);
        return id;
    }

    int transpose(int a) {
        check(a);
        int id = alloc(Op::Transpose, nodes_[a].cols, nodes_[a].rows, a);
        const Real* x = val(a);
        Real* y = val(id);
        const int r = nodes_[a].rows, c = nodes_[a].cols;
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j) y[static_cast<std::size_t>(j) * r + i] = x[static_cast<std::size_t>(i) * c + j];
        return id;
    }

    int add(int a, int b) {
        same_shape(a, b, "add");
        int id = alloc(Op::Add, nodes_[a].rows, nodes_[a].cols, a, b);
        const Real* x = val(a);
        const Real* y = val(b);
        Real* z = val(id);
        for (std::size_t i = 0; i < count(id); ++i) z[i] = x[i] + y[i];
        return id;
    }

    int scale(int a, Real s) {
        check(a);
        int id = alloc(Op::Scale, nodes_[a].rows, nodes_[a].cols, a);
        nodes_[id].s = s;
        const Real* x = val(a);
        Real* z = val(id);
        for (std::size_t i = 0; i < count(id); ++i) z[i] = s * x[i];
        return id;
    }

    int hadamard(int a, int b) {
        same_shape(a, b, "hadamard");
        int id = alloc(Op::Hadamard, nodes_[a].rows, nodes_[a].cols, a, b);
        const Real* x = val(a);
        const Real* y = val(b);
        Real* z = val(id);
        for (std::size_t i = 0; i < count(id); ++i) z[i] = x[i] * y[i];
        return id;
    }

    int relu(int a) {
        check(a);
        int id = alloc(Op::Relu, nodes_[a].rows, nodes_[a].cols, a);
        const Real* x = val(a);
        Real* z = val(id);
        for (std::size_t i = 0; i < count(id); ++i) z[i] = x[i] > Real(0) ? x[i] : Real(0);
        return id;
    }

    int sigmoid(int a) {
        check(a);
        int id = alloc(Op::Sigmoid, nodes_[a].rows, nodes_[a].cols, a);
        const Real* x = val(a);
        Real* z = val(id);
        for (std::size_t i = 0; i < count(id); ++i) z[i] = Real(1) / (Real(1) + std::exp(-x[i]));
        return id;
    }

    /// Row-wise softmax over live columns; masked columns exactly 0.
    int softmax_masked_rows(int a, std::span<const std::uint8_t> live) {
        check(a);
        const auto& na = nodes_[a];
        if (static_cast<int>(live.size()) != na.cols)
            throw std::invalid_argument(cat("softmax_masked_rows: mask length ", live.size(), " != cols ", na.cols));
        int n_live = 0;
        for (auto m : live) n_live += (m != 0);
        if (n_live == 0) throw std::invalid_argument("softmax_masked_rows: fully masked row pattern");
        int id = alloc(Op::SoftmaxMasked, na.rows, na.cols, a);
        store_mask(id, live);
        const int rows = na.rows, cols = na.cols;
        for (int r = 0; r < rows; ++r) {
            const Real* x = val(a) + static_cast<std::size_t>(r) * cols;
            Real* y = val(id) + static_cast<std::size_t>(r) * cols;
            Real mx = x[0];
            bool first = true;
            for (int c = 0; c < cols; ++c)
                if (live[c]) {
                    mx = first ? x[c] : std::max(mx, x[c]);
                    first = false;
                }
            Real denom = Real(0);
            for (int c = 0; c < cols; ++c) {
                if (!live[c]) continue;
                y[c] = std::exp(x[c] - mx);
                denom += y[c];
            }
            for (int c = 0; c < cols; ++c)
                if (live[c]) y[c] /= denom;
        }
        return id;
    }

    /// out[r][c] = a[r][c] * s[0][c]  (per-column scaling by a 1 x cols row)
    int colscale(int a, int srow) {
        check(a);
        check(srow);
        const auto& na = nodes_[a];
        const auto& ns = nodes_[srow];
        if (ns.rows != 1 || ns.cols != na.cols)
            throw std::invalid_argument(cat("colscale: scaler must be 1x", na.cols, ", got ", ns.rows, "x", ns.cols));
        int id = alloc(Op::ColScale, na.rows, na.cols, a, srow);
        const Real* x = val(a);
        const Real* s = val(srow);
        Real* z = val(id);
        for (int r = 0; r < na.rows; ++r)
            for (int c = 0; c < na.cols; ++c) z[static_cast<std::size_t>(r) * na.cols + c] = x[static_cast<std::size_t>(r) * na.cols + c] * s[c];
        return id;
    }

    /// Zero out the rows whose live flag is unset.
    int rowmask(int a, std::span<const std::uint8_t> live) {
        check(a);
        const auto& na = nodes_[a];
        if (static_cast<int>(live.size()) != na.rows)
            throw std::invalid_argument(cat("rowmask: mask length ", live.size(), " != rows ", na.rows));
        int id = alloc(Op::RowMask, na.rows, na.cols, a);
        store_mask(id, live);
        const Real* x = val(a);
        Real* z = val(id);
        for (int r = 0; r < na.rows; ++r)
            for (int c = 0; c < na.cols; ++c)
                z[static_cast<std::size_t>(r) * na.cols + c] = live[r] ? x[static_cast<std::size_t>(r) * na.cols + c] : Real(0);
        return id;
    }

    /// Broadcast-add a 1 x cols row vector to every row of a.
    int add_rowvec(int a, int b) {
        check(a);
        check(b);
        const auto& na = nodes_[a];
        const auto& nb = nodes_[b];
        if (nb.rows != 1 || nb.cols != na.cols)
            throw std::invalid_argument(cat("add_rowvec: vector must be 1x", na.cols, ", got ", nb.rows, "x", nb.cols));
        int id = alloc(Op::AddRowVec, na.rows, na.cols, a, b);
        const Real* x = val(a);
        const Real* v = val(b);
        Real* z = val(id);
        for (int r = 0; r < na.rows; ++r)
            for (int c = 0; c < na.cols; ++c) z[static_cast<std::size_t>(r) * na.cols + c] = x[static_cast<std::size_t>(r) * na.cols + c] + v[c];
        return id;
    }

    int concat_cols(std::span<const int> parts) {
        if (parts.empty()) throw std::invalid_argument("concat_cols: no parts");
        int rows = -1, cols = 0;
        for (int p : parts) {
            check(p);
            if (rows < 0) rows = nodes_[p].rows;
            if (nodes_[p].rows != rows)
                throw std::invalid_argument(cat("concat_cols: row mismatch ", nodes_[p].rows, " vs ", rows));
            cols += nodes_[p].cols;
        }
        int id = alloc(Op::ConcatCols, rows, cols);
        nodes_[id].i0 = push_ints(parts);
        nodes_[id].ilen = static_cast<int>(parts.size());
        Real* z = val(id);
        int off = 0;
        for (int p : parts) {
            const Real* x = val(p);
            const int pc = nodes_[p].cols;
            for (int r = 0; r < rows; ++r)
                std::copy(x + static_cast<std::size_t>(r) * pc, x + static_cast<std::size_t>(r) * pc + pc,
                          z + static_cast<std::size_t>(r) * cols + off);
            off += pc;
        }
        return id;
    }

    /// Reshape rows x cols into 1 x (rows*cols); row-major order is preserved.
    int flatten_row(int a) {
        check(a);
        int id = alloc(Op::FlattenRow, 1, nodes_[a].rows * nodes_[a].cols, a);
        const Real* x = val(a);
        std::copy(x, x + count(id), val(id));
        return id;
    }

    int broadcast_rows(int a, int nrows) {
        check(a);
        const auto& na = nodes_[a];
        if (na.rows != 1) throw std::invalid_argument(cat("broadcast_rows: input must be a row vector, got ", na.rows, "x", na.cols));
        int id = alloc(Op::BroadcastRows, nrows, na.cols, a);
        const Real* x = val(a);
        Real* z = val(id);
        for (int r = 0; r < nrows; ++r) std::copy(x, x + na.cols, z + static_cast<std::size_t>(r) * na.cols);
        return id;
    }

    /// Mean over live rows -> 1 x cols. Requires at least one live row.
    int mean_rows_masked(int a, std::span<const std::uint8_t> live) {
        check(a);
        const auto& na = nodes_[a];
        if (static_cast<int>(live.size()) != na.rows)
            throw std::invalid_argument(cat("mean_rows_masked: mask length ", live.size(), " != rows ", na.rows));
        int n_live = 0;
        for (auto m : live) n_live += (m != 0);
        if (n_live == 0) throw std::invalid_argument("mean_rows_masked: no live rows");
        int id = alloc(Op::MeanRowsMasked, 1, na.cols, a);
        store_mask(id, live);
        nodes_[id].s = Real(1) / static_cast<Real>(n_live);
        const Real* x = val(a);
        Real* z = val(id);
        for (int r = 0; r < na.rows; ++r) {
            if (!live[r]) continue;
            for (int c = 0; c < na.cols; ++c) z[c] += x[static_cast<std::size_t>(r) * na.cols + c];
        }
        for (int c = 0; c < na.cols; ++c) z[c] *= nodes_[id].s;
        return id;
    }

    int sum_all(int a) {
        check(a);
        int id = alloc(Op::SumAll, 1, 1, a);
        const Real* x = val(a);
        Real acc = Real(0);
        for (std::size_t i = 0; i < count(a); ++i) acc += x[i];
        *val(id) = acc;
        return id;
    }

    /// Binary cross-entropy of a 1x1 probability against label y, with the
    /// probability clamped to [1e-7, 1-1e-7]. Clamped inputs get zero gradient.
    int bce(int p, Real y) {
        check(p);
        if (nodes_[p].rows != 1 || nodes_[p].cols != 1)
            throw std::invalid_argument("bce: probability must be 1x1");
        int id = alloc(Op::Bce, 1, 1, p);
        nodes_[id].s = y;
        const Real eps = Real(1e-7);
        Real pv = *val(p);
        Real pc = std::min(Real(1) - eps, std::max(eps, pv));
        *val(id) = -(y * std::log(pc) + (Real(1) - y) * std::log(Real(1) - pc));
        return id;
    }

    int sum_scalars(std::span<const int> terms) {
        if (terms.empty()) throw std::invalid_argument("sum_scalars: no terms");
        for (int t : terms) {
            check(t);
            if (nodes_[t].rows != 1 || nodes_[t].cols != 1) throw std::invalid_argument("sum_scalars: terms must be 1x1");
        }
        int id = alloc(Op::SumScalars, 1, 1);
        nodes_[id].i0 = push_ints(terms);
        nodes_[id].ilen = static_cast<int>(terms.size());
        Real acc = Real(0);
        for (int t : terms) acc += *val(t);
        *val(id) = acc;
        return id;
    }

    // ---- execution ----

    void backward(int loss) {
        check(loss);
        if (nodes_[loss].rows != 1 || nodes_[loss].cols != 1)
            throw std::invalid_argument("backward: loss must be 1x1");
        *grd(loss) = Real(1);
        for (int id = loss; id >= 0; --id) step_backward(id);
    }

    Real scalar(int id) const {
        check(id);
        if (nodes_[id].rows != 1 || nodes_[id].cols != 1) throw std::invalid_argument("scalar: node is not 1x1");
        return slab_[nodes_[id].val];
    }

    Mat<Real> value_of(int id) const {
        check(id);
        Mat<Real> m(nodes_[id].rows, nodes_[id].cols);
        const Real* x = cval(id);
        std::copy(x, x + m.size(), m.a.begin());
        return m;
    }

    Mat<Real> grad_of(int id) const {
        check(id);
        Mat<Real> m(nodes_[id].rows, nodes_[id].cols);
        const Real* x = cgrd(id);
        std::copy(x, x + m.size(), m.a.begin());
        return m;
    }

    int rows(int id) const { check(id); return nodes_[id].rows; }
    int cols(int id) const { check(id); return nodes_[id].cols; }
    std::size_t node_count() const { return nodes_.size(); }

    void reset() {
        nodes_.clear();
        slab_.clear();
        islab_.clear();
    }

private:
    enum class Op : std::uint8_t {
        Constant, ParamLeaf, RowsOf, Matmul, Transpose, Add, Scale, Hadamard,
        Relu, Sigmoid, SoftmaxMasked, ColScale, RowMask, AddRowVec, ConcatCols,
        FlattenRow, BroadcastRows, MeanRowsMasked, SumAll, Bce, SumScalars,
    };

    struct NodeRec {
        Op op;
        int rows, cols;
        std::size_t val, grd;  // slab offsets
        int a = -1, b = -1;    // parent ids
        int i0 = -1, ilen = 0; // islab range (ids / masks / parts)
        Real s = Real(0);      // scalar payload (scale factor, label, 1/n_live)
        Param<Real>* par = nullptr;
    };

    int alloc(Op op, int rows, int cols, int a = -1, int b = -1) {
        NodeRec n;
        n.op = op;
        n.rows = rows;
        n.cols = cols;
        n.a = a;
        n.b = b;
        const std::size_t need = static_cast<std::size_t>(rows) * cols;
        n.val = slab_.size();
        slab_.resize(slab_.size() + need);
        n.grd = slab_.size();
        slab_.resize(slab_.size() + need, Real(0));
        // slab reuse after reset(): the value range is fully written by each op,
        // but the grad range must be re-zeroed explicitly.
        std::fill(slab_.begin() + n.grd, slab_.begin() + n.grd + need, Real(0));
        nodes_.push_back(n);
        return static_cast<int>(nodes_.size()) - 1;
    }

    void check(int id) const {
        if (id < 0 || id >= static_cast<int>(nodes_.size())) throw std::invalid_argument("graph: bad node id");
    }

    void same_shape(int a, int b, const char* op) {
        check(a);
        check(b);
        if (nodes_[a].rows != nodes_[b].rows || nodes_[a].cols != nodes_[b].cols)
            throw std::invalid_argument(cat(op, ": shape mismatch ", nodes_[a].rows, "x", nodes_[a].cols, " vs ", nodes_[b].rows, "x", nodes_[b].cols));
    }

    std::size_t count(int id) const { return static_cast<std::size_t>(nodes_[id].rows) * nodes_[id].cols; }

    Real* val(int id) { return slab_.data() + nodes_[id].val; }
    Real* grd(int id) { return slab_.data() + nodes_[id].grd; }
    const Real* cval(int id) const { return slab_.data() + nodes_[id].val; }
    const Real* cgrd(int id) const { return slab_.data() + nodes_[id].grd; }

    int push_ints(std::span<const int> xs) {
        int off = static_cast<int>(islab_.size());
        islab_.insert(islab_.end(), xs.begin(), xs.end());
        return off;
    }

    void store_mask(int id, std::span<const std::uint8_t> live) {
        nodes_[id].i0 = static_cast<int>(islab_.size());
        nodes_[id].ilen = static_cast<int>(live.size());
        for (auto m : live) islab_.push_back(m ? 1 : 0);
    }

    const int* ints(int id) const { return islab_.data() + nodes_[id].i0; }

    void copy_in(int id, const Mat<Real>& m) {
        if (m.rows != nodes_[id].rows || m.cols != nodes_[id].cols)
            throw std::invalid_argument("graph: copy_in shape mismatch");
        std::copy(m.a.begin(), m.a.end(), val(id));
    }

    // C(r x c) += A(r x k) * B(k x c); or plain assign when acc=false
    void mm_nn(const Real* A, int r, int k, const Real* B, int c, Real* C, bool acc) {
        if (!acc) std::fill(C, C + static_cast<std::size_t>(r) * c, Real(0));
        for (int i = 0; i < r; ++i) {
            const Real* arow = A + static_cast<std::size_t>(i) * k;
            Real* crow = C + static_cast<std::size_t>(i) * c;
            for (int kk = 0; kk < k; ++kk) {
                const Real av = arow[kk];
                if (av == Real(0)) continue;
                const Real* brow = B + static_cast<std::size_t>(kk) * c;
                for (int j = 0; j < c; ++j) crow[j] += av * brow[j];
            }
        }
    }

    // C(r x k) += A(r x c) * B(k x c)^T
    void mm_nt(const Real* A, int r, int c, const Real* B, int k, Real* C) {
        for (int i = 0; i < r; ++i) {
            const Real* arow = A + static_cast<std::size_t>(i) * c;
            Real* crow = C + static_cast<std::size_t>(i) * k;
            for (int j = 0; j < k; ++j) {
                const Real* brow = B + static_cast<std::size_t>(j) * c;
                Real acc = Real(0);
                for (int cc = 0; cc < c; ++cc) acc += arow[cc] * brow[cc];
                crow[j] += acc;
            }
        }
    }

    // C(k x c) += A(r x k)^T * B(r x c)
    void mm_tn(const Real* A, int r, int k, const Real* B, int c, Real* C) {
        for (int i = 0; i < r; ++i) {
            const Real* arow = A + static_cast<std::size_t>(i) * k;
            const Real* brow = B + static_cast<std::size_t>(i) * c;
            for (int kk = 0; kk < k; ++kk) {
                const Real av = arow[kk];
                if (av == Real(0)) continue;
                Real* crow = C + static_cast<std::size_t>(kk) * c;
                for (int j = 0; j < c; ++j) crow[j] += av * brow[j];
            }
        }
    }

    void step_backward(int id) {
        NodeRec& n = nodes_[id];
        const Real* g = grd(id);
        switch (n.op) {
            case Op::Constant:
                break;
            case Op::ParamLeaf: {
                Real* pg = n.par->grad.a.data();
                for (std::size_t i = 0; i < count(id); ++i) pg[i] += g[i];
                break;
            }
            case Op::RowsOf: {
                const int* ids = ints(id);
                const int c = n.cols;
                for (int t = 0; t < n.ilen; ++t) {
                    const int row = ids[t];
                    if (row == 0 && n.par->frozen_row0) continue;
                    Real* pg = n.par->grad.a.data() + static_cast<std::size_t>(row) * c;
                    const Real* gr = g + static_cast<std::size_t>(t) * c;
                    for (int j = 0; j < c; ++j) pg[j] += gr[j];
                }
                break;
            }
            case Op::Matmul: {
                // dA += dC * B^T ; dB += A^T * dC
                mm_nt(g, n.rows, n.cols, val(n.b), nodes_[n.a].cols, grd(n.a));
                mm_tn(val(n.a), nodes_[n.a].rows, nodes_[n.a].cols, g, n.cols, grd(n.b));
                break;
            }
            case Op::Transpose: {
                Real* ga = grd(n.a);
                for (int i = 0; i < n.rows; ++i)
                    for (int j = 0; j < n.cols; ++j)
                        ga[static_cast<std::size_t>(j) * n.rows + i] += g[static_cast<std::size_t>(i) * n.cols + j];
                break;
            }
            case Op::Add: {
                Real* ga = grd(n.a);
                Real* gb = grd(n.b);
                for (std::size_t i = 0; i < count(id); ++i) {
                    ga[i] += g[i];
                    gb[i] += g[i];
                }
                break;
            }
            case Op::Scale: {
                Real* ga = grd(n.a);
                for (std::size_t i = 0; i < count(id); ++i) ga[i] += n.s * g[i];
                break;
            }
            case Op::Hadamard: {
                Real* ga = grd(n.a);
                Real* gb = grd(n.b);
                const Real* xa = val(n.a);
                const Real* xb = val(n.b);
                for (std::size_t i = 0; i < count(id); ++i) {
                    ga[i] += g[i] * xb[i];
                    gb[i] += g[i] * xa[i];
                }
                break;
            }
            case Op::Relu: {
                Real* ga = grd(n.a);
                const Real* x = val(n.a);
                for (std::size_t i = 0; i < count(id); ++i)
                    if (x[i] > Real(0)) ga[i] += g[i];
                break;
            }
            case Op::Sigmoid: {
                Real* ga = grd(n.a);
                const Real* y = val(id);
                for (std::size_t i = 0; i < count(id); ++i) ga[i] += g[i] * y[i] * (Real(1) - y[i]);
                break;
            }
            case Op::SoftmaxMasked: {
                Real* ga = grd(n.a);
                const Real* y = val(id);
                const int* live = ints(id);
                for (int r = 0; r < n.rows; ++r) {
                    const std::size_t off = static_cast<std::size_t>(r) * n.cols;
                    Real dot = Real(0);
                    for (int c = 0; c < n.cols; ++c)
                        if (live[c]) dot += g[off + c] * y[off + c];
                    for (int c = 0; c < n.cols; ++c)
                        if (live[c]) ga[off + c] += y[off + c] * (g[off + c] - dot);
                }
                break;
            }
            case Op::ColScale: {
                Real* ga = grd(n.a);
                Real* gs = grd(n.b);
                const Real* x = val(n.a);
                const Real* s = val(n.b);
                for (int r = 0; r < n.rows; ++r) {
                    const std::size_t off = static_cast<std::size_t>(r) * n.cols;
                    for (int c = 0; c < n.cols; ++c) {
                        ga[off + c] += g[off + c] * s[c];
                        gs[c] += g[off + c] * x[off + c];
                    }
                }
                break;
            }
            case Op::RowMask: {
                Real* ga = grd(n.a);
                const int* live = ints(id);
                for (int r = 0; r < n.rows; ++r) {
                    if (!live[r]) continue;
                    const std::size_t off = static_cast<std::size_t>(r) * n.cols;
                    for (int c = 0; c < n.cols; ++c) ga[off + c] += g[off + c];
                }
                break;
            }
            case Op::AddRowVec: {
                Real* ga = grd(n.a);
                Real* gb = grd(n.b);
                for (int r = 0; r < n.rows; ++r) {
                    const std::size_t off = static_cast<std::size_t>(r) * n.cols;
                    for (int c = 0; c < n.cols; ++c) {
                        ga[off + c] += g[off + c];
                        gb[c] += g[off + c];
                    }
                }
                break;
            }
            case Op::ConcatCols: {
                const int* parts = ints(id);
                int off = 0;
                for (int p = 0; p < n.ilen; ++p) {
                    const int pid = parts[p];
                    const int pc = nodes_[pid].cols;
                    Real* gp = grd(pid);
                    for (int r = 0; r < n.rows; ++r)
                        for (int c = 0; c < pc; ++c)
                            gp[static_cast<std::size_t>(r) * pc + c] += g[static_cast<std::size_t>(r) * n.cols + off + c];
                    off += pc;
                }
                break;
            }
            case Op::FlattenRow: {
                Real* ga = grd(n.a);
                for (std::size_t i = 0; i < count(id); ++i) ga[i] += g[i];
                break;
            }
            case Op::BroadcastRows: {
                Real* ga = grd(n.a);
                for (int r = 0; r < n.rows; ++r) {
                    const std::size_t off = static_cast<std::size_t>(r) * n.cols;
                    for (int c = 0; c < n.cols; ++c) ga[c] += g[off + c];
                }
                break;
            }
            case Op::MeanRowsMasked: {
                Real* ga = grd(n.a);
                const int* live = ints(id);
                const int in_rows = nodes_[n.a].rows;
                for (int r = 0; r < in_rows; ++r) {
                    if (!live[r]) continue;
                    for (int c = 0; c < n.cols; ++c) ga[static_cast<std::size_t>(r) * n.cols + c] += g[c] * n.s;
                }
                break;
            }
            case Op::SumAll: {
                Real* ga = grd(n.a);
                const Real gv = g[0];
                for (std::size_t i = 0; i < count(n.a); ++i) ga[i] += gv;
                break;
            }
            case Op::Bce: {
                const Real eps = Real(1e-7);
                const Real pv = *val(n.a);
                if (pv > eps && pv < Real(1) - eps) {
                    const Real y = n.s;
                    *grd(n.a) += g[0] * (pv - y) / (pv * (Real(1) - pv));
                }
                break;
            }
            case Op::SumScalars: {
                const int* terms = ints(id);
                for (int t = 0; t < n.ilen; ++t) *grd(terms[t]) += g[0];
                break;
            }
        }
    }

    std::vector<NodeRec> nodes_;
    std::vector<Real> slab_;
    std::vector<int> islab_;
};

}  // namespace qin
