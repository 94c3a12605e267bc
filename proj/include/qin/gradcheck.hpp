#pragma once
// Central-difference gradient verification. The loss functor must rebuild the
// forward pass from the current parameter values on every call; backward
// gradients are compared entry by entry against (f(w+h) - f(w-h)) / 2h.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "qin/matrix.hpp"

namespace qin {

template <class Real>
struct GradCheckResult {
    Real max_rel_err = Real(0);
    std::string worst;  // "param[flat_index]" of the worst entry
    Real worst_fd = Real(0), worst_bp = Real(0);
    std::size_t n_checked = 0;
};

/// loss() evaluates the scalar objective from current param values.
/// grads must already hold the backward result for the unperturbed params.
/// Relative error per entry: |fd - bp| / max(|fd|, |bp|, floor).
template <class Real>
GradCheckResult<Real> finite_diff_check(const std::vector<Param<Real>*>& params,
                                        const std::function<Real()>& loss,
                                        Real h = Real(1e-4), Real floor = Real(1e-8)) {
    GradCheckResult<Real> res;
    for (auto* p : params) {
        const std::size_t start = p->frozen_row0 ? static_cast<std::size_t>(p->value.cols) : 0;
        for (std::size_t j = start; j < p->value.size(); ++j) {
            const Real saved = p->value.a[j];
            p->value.a[j] = saved + h;
            const Real up = loss();
            p->value.a[j] = saved - h;
            const Real dn = loss();
            p->value.a[j] = saved;
            const Real fd = (up - dn) / (Real(2) * h);
            const Real bp = p->grad.a[j];
            const Real rel = std::abs(fd - bp) / std::max({std::abs(fd), std::abs(bp), floor});
            ++res.n_checked;
            if (rel > res.max_rel_err) {
                res.max_rel_err = rel;
                res.worst = cat(p->name, "[", j, "]");
                res.worst_fd = fd;
                res.worst_bp = bp;
            }
        }
    }
    return res;
}

}  // namespace qin
