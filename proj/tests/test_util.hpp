#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "contsep/rng.hpp"
#include "contsep/tensor.hpp"

namespace testutil {

inline double rel_err(double a, double b, double floor = 1e-6) {
    return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), floor});
}

// Central finite differences of a scalar function w.r.t. the entries of the
// leaf tensors in `leaves`. Rebuilds the forward pass per probe via `f`.
// Returns the worst relative error against the analytic grads already stored
// on the leaves.
inline double max_grad_error(const std::vector<contsep::Tensor>& leaves,
                             const std::function<double()>& f, double eps = 1e-6) {
    double worst = 0.0;
    for (const auto& leaf : leaves) {
        contsep::Tensor t = leaf;
        double* data = t.mutable_data();
        const auto grad = t.grad();
        for (std::int64_t i = 0; i < t.numel(); ++i) {
            const double saved = data[i];
            data[i] = saved + eps;
            const double up = f();
            data[i] = saved - eps;
            const double down = f();
            data[i] = saved;
            const double fd = (up - down) / (2.0 * eps);
            const double an = grad.empty() ? 0.0 : grad[static_cast<std::size_t>(i)];
            worst = std::max(worst, rel_err(an, fd));
        }
    }
    return worst;
}

inline std::vector<double> random_values(contsep::Rng& rng, std::size_t n, double lo = -1.0,
                                         double hi = 1.0) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(lo, hi);
    return v;
}

}  // namespace testutil
