#pragma once
#include <cmath>
#include <stdexcept>
#include <vector>

#include "qin/matrix.hpp"

namespace qin {

/// Adam with bias correction. One state entry per parameter, matched by
/// position in the list passed to step(); the list must be stable across steps.
template <class Real>
class Adam {
public:
    explicit Adam(Real lr = Real(1e-3), Real beta1 = Real(0.9), Real beta2 = Real(0.999), Real eps = Real(1e-8))
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(const std::vector<Param<Real>*>& params) {
        if (m_.empty()) {
            for (auto* p : params) {
                m_.emplace_back(p->value.rows, p->value.cols);
                v_.emplace_back(p->value.rows, p->value.cols);
            }
        }
        if (m_.size() != params.size()) throw std::invalid_argument("adam: parameter list changed size");
        ++t_;
        const Real bc1 = Real(1) - std::pow(beta1_, static_cast<Real>(t_));
        const Real bc2 = Real(1) - std::pow(beta2_, static_cast<Real>(t_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            Param<Real>& p = *params[i];
            if (p.value.rows != m_[i].rows || p.value.cols != m_[i].cols)
                throw std::invalid_argument(cat("adam: shape of ", p.name, " changed"));
            Real* w = p.value.a.data();
            Real* g = p.grad.a.data();
            Real* m = m_[i].a.data();
            Real* v = v_[i].a.data();
            const std::size_t n = p.value.size();
            const std::size_t start = p.frozen_row0 ? static_cast<std::size_t>(p.value.cols) : 0;
            for (std::size_t j = start; j < n; ++j) {
                if (!std::isfinite(g[j]))
                    throw std::runtime_error(cat("adam: non-finite gradient in ", p.name, " at flat index ", j));
                m[j] = beta1_ * m[j] + (Real(1) - beta1_) * g[j];
                v[j] = beta2_ * v[j] + (Real(1) - beta2_) * g[j] * g[j];
                const Real mhat = m[j] / bc1;
                const Real vhat = v[j] / bc2;
                w[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
            }
        }
    }

    long steps() const { return t_; }
    Real lr() const { return lr_; }

private:
    Real lr_, beta1_, beta2_, eps_;
    long t_ = 0;
    std::vector<Mat<Real>> m_, v_;
};

}  // namespace qin
