#pragma once

#include <cstddef>
#include <vector>

namespace copert {

inline constexpr double zero_tol = 1e-12;
inline constexpr double sum_tol_silent = 1e-9;
inline constexpr double sum_tol_reject = 1e-6;

inline bool is_zero(double x) { return x < zero_tol && x > -zero_tol; }

// A point on the simplex. Sums within 1e-9 of one are renormalized silently, sums within 1e-6
// are renormalized and flagged, anything further off is rejected.
class composition {
public:
    explicit composition(std::vector<double> values);

    static composition center(std::size_t d);
    static composition vertex(std::size_t d, std::size_t j);  // j is 1-based

    std::size_t dim() const { return v_.size(); }
    double operator[](std::size_t i) const { return v_[i]; }
    const std::vector<double>& values() const { return v_; }
    bool renormalized_with_warning() const { return warned_; }

    bool operator==(const composition& other) const { return v_ == other.v_; }

private:
    struct trusted {};
    composition(std::vector<double> values, trusted) : v_(std::move(values)) {}
    friend composition closure(const std::vector<double>& v);

    std::vector<double> v_;
    bool warned_ = false;
};

// Sorted, distinct, 1-based coordinate indices.
class index_set {
public:
    index_set() = default;
    explicit index_set(std::vector<std::size_t> one_based);

    const std::vector<std::size_t>& indices() const { return idx_; }
    std::size_t size() const { return idx_.size(); }
    bool empty() const { return idx_.empty(); }
    bool contains(std::size_t one_based) const;
    void check_bounds(std::size_t d) const;
    double mass(const composition& z) const;
    bool intersects(const index_set& other) const;

    bool operator==(const index_set& other) const { return idx_ == other.idx_; }

private:
    std::vector<std::size_t> idx_;
};

composition closure(const std::vector<double>& v);
double gini(const composition& z);
double gini_pair_sum(const std::vector<double>& x);  // sum_j sum_k |x^j - x^k|
composition amalgamate(const composition& z, const index_set& a, const index_set& b);
double l1_distance(const composition& z1, const composition& z2);

}  // namespace copert
