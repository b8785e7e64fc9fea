#pragma once

#include <cmath>
#include <functional>

#include "mpc/core_types.hpp"
#include "mpc/rng.hpp"

namespace mpc::test {

inline ProbEmbedding random_embedding(Rng& rng, std::size_t dim, double lv_scale = 0.5) {
    ProbEmbedding e;
    for (std::size_t d = 0; d < dim; ++d) {
        e.mean.push_back(rng.normal());
        e.log_var.push_back(lv_scale * rng.normal());
    }
    return e;
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); }

// Trapezoid rule on [lo, hi] with n intervals.
inline double integrate(const std::function<double(double)>& f, double lo, double hi, std::size_t n) {
    const double h = (hi - lo) / static_cast<double>(n);
    double s = 0.5 * (f(lo) + f(hi));
    for (std::size_t i = 1; i < n; ++i) s += f(lo + h * static_cast<double>(i));
    return s * h;
}

}  // namespace mpc::test
