#include "copert/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "copert/error.hpp"

namespace copert {

composition::composition(std::vector<double> values) : v_(std::move(values)) {
    if (v_.size() < 2) throw error(errc::dimension_mismatch, "composition needs at least 2 coordinates");
    double sum = 0.0;
    for (double& x : v_) {
        if (!std::isfinite(x)) throw error(errc::invalid_argument, "non-finite coordinate");
        if (x < 0.0) {
            if (x > -zero_tol) {
                x = 0.0;
            } else {
                throw error(errc::negative_entry, "negative coordinate " + std::to_string(x));
            }
        }
        sum += x;
    }
    const double dev = std::abs(sum - 1.0);
    if (dev > sum_tol_reject) {
        throw error(errc::not_normalized, "coordinates sum to " + std::to_string(sum));
    }
    warned_ = dev > sum_tol_silent;
    // already closed up to rounding; dividing again would not be idempotent
    if (dev > static_cast<double>(v_.size()) * std::numeric_limits<double>::epsilon()) {
        for (double& x : v_) x /= sum;
    }
}

composition composition::center(std::size_t d) {
    if (d < 2) throw error(errc::dimension_mismatch, "composition needs at least 2 coordinates");
    return composition(std::vector<double>(d, 1.0 / static_cast<double>(d)), trusted{});
}

composition composition::vertex(std::size_t d, std::size_t j) {
    if (d < 2) throw error(errc::dimension_mismatch, "composition needs at least 2 coordinates");
    if (j < 1 || j > d) throw error(errc::invalid_index, "vertex index out of range");
    std::vector<double> v(d, 0.0);
    v[j - 1] = 1.0;
    return composition(std::move(v), trusted{});
}

index_set::index_set(std::vector<std::size_t> one_based) : idx_(std::move(one_based)) {
    std::sort(idx_.begin(), idx_.end());
    if (std::adjacent_find(idx_.begin(), idx_.end()) != idx_.end()) {
        throw error(errc::invalid_index, "duplicate index in set");
    }
    if (!idx_.empty() && idx_.front() == 0) throw error(errc::invalid_index, "indices are 1-based");
}

bool index_set::contains(std::size_t one_based) const {
    return std::binary_search(idx_.begin(), idx_.end(), one_based);
}

void index_set::check_bounds(std::size_t d) const {
    if (!idx_.empty() && idx_.back() > d) {
        throw error(errc::invalid_index, "index " + std::to_string(idx_.back()) + " exceeds dimension " +
                                             std::to_string(d));
    }
}

double index_set::mass(const composition& z) const {
    check_bounds(z.dim());
    double s = 0.0;
    for (std::size_t i : idx_) s += z[i - 1];
    return s;
}

bool index_set::intersects(const index_set& other) const {
    auto a = idx_.begin();
    auto b = other.idx_.begin();
    while (a != idx_.end() && b != other.idx_.end()) {
        if (*a == *b) return true;
        if (*a < *b) {
            ++a;
        } else {
            ++b;
        }
    }
    return false;
}

composition closure(const std::vector<double>& v) {
    if (v.size() < 2) throw error(errc::dimension_mismatch, "closure needs at least 2 entries");
    double sum = 0.0;
    for (double x : v) {
        if (!std::isfinite(x)) throw error(errc::invalid_argument, "non-finite entry");
        if (x < 0.0) throw error(errc::negative_entry, "negative entry " + std::to_string(x));
        sum += x;
    }
    if (!(sum > 0.0)) throw error(errc::all_zero, "all entries are zero");
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] / sum;
    return composition(std::move(out), composition::trusted{});
}

double gini_pair_sum(const std::vector<double>& x) {
    // sum_{j,k} |x_j - x_k| = 2 * sum_i (2i - n + 1) x_(i) over the sorted values
    std::vector<double> s(x);
    std::sort(s.begin(), s.end());
    const double n = static_cast<double>(s.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) acc += (2.0 * static_cast<double>(i) - n + 1.0) * s[i];
    return 2.0 * acc;
}

double gini(const composition& z) {
    return gini_pair_sum(z.values()) / (2.0 * static_cast<double>(z.dim()));
}

composition amalgamate(const composition& z, const index_set& a, const index_set& b) {
    if (a.empty() || b.empty()) throw error(errc::invalid_index, "amalgamation sets must be nonempty");
    if (a.intersects(b)) throw error(errc::overlapping_sets, "A and B overlap");
    const double ma = a.mass(z);
    const double mb = b.mass(z);
    if (is_zero(ma)) return z;
    if (is_zero(mb)) throw error(errc::empty_subcomposition_b, "B has zero mass while A does not");
    std::vector<double> out = z.values();
    const double scale = (ma + mb) / mb;
    for (std::size_t i : a.indices()) out[i - 1] = 0.0;
    for (std::size_t i : b.indices()) out[i - 1] = z[i - 1] * scale;
    return closure(out);
}

double l1_distance(const composition& z1, const composition& z2) {
    if (z1.dim() != z2.dim()) throw error(errc::dimension_mismatch, "dimensions differ");
    double s = 0.0;
    for (std::size_t i = 0; i < z1.dim(); ++i) s += std::abs(z1[i] - z2[i]);
    return s;
}

}  // namespace copert
