#pragma once

#include <cmath>
#include <vector>

#include "copert/rng.hpp"
#include "copert/simplex.hpp"

namespace gen {

// Interior point with every coordinate at least `floor` before closure.
inline copert::composition interior(copert::rng& r, std::size_t d, double floor = 0.02) {
    std::vector<double> v(d);
    for (double& x : v) x = r.exponential() + floor;
    return copert::closure(v);
}

// Point that may have exact zeros: each coordinate is dropped with probability p_zero.
inline copert::composition sparse(copert::rng& r, std::size_t d, double p_zero = 0.3) {
    std::vector<double> v(d);
    for (;;) {
        double s = 0.0;
        for (double& x : v) {
            x = r.bernoulli(p_zero) ? 0.0 : r.exponential();
            s += x;
        }
        if (s > 0.0) return copert::closure(v);
    }
}

inline std::size_t dim(copert::rng& r, std::size_t lo, std::size_t hi) {
    return lo + static_cast<std::size_t>(r.below(hi - lo + 1));
}

inline std::vector<double> nonnegative(copert::rng& r, std::size_t d) {
    std::vector<double> v(d);
    for (double& x : v) x = r.uniform() < 0.2 ? 0.0 : 10.0 * r.uniform();
    if (v[0] == 0.0) v[0] = 1.0;
    return v;
}

}  // namespace gen
