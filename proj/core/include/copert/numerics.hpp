#pragma once

#include <functional>

namespace copert {

double normal_cdf(double x);
double normal_quantile(double p);

// Adaptive Simpson on [a, b]; a > b gives the negated integral.
double integrate(const std::function<double(double)>& f, double a, double b, double abs_tol = 1e-9,
                 int max_subdivisions = 1 << 16);

// Root of a monotone function on [lo, hi] with f(lo), f(hi) of opposite sign.
double bisect(const std::function<double(double)>& f, double lo, double hi, double tol = 1e-14,
              int max_iter = 200);

}  // namespace copert
