#include "copert/numerics.hpp"

#include <boost/math/distributions/normal.hpp>
#include <cmath>

#include "copert/error.hpp"

namespace copert {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw error(errc::invalid_argument, "normal_quantile needs p in (0,1)");
    return boost::math::quantile(boost::math::normal_distribution<double>(0.0, 1.0), p);
}

namespace {

struct simpson_state {
    const std::function<double(double)>& f;
    int budget;
};

double simpson_step(simpson_state& st, double a, double b, double fa, double fm, double fb, double whole,
                    double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = st.f(lm);
    const double frm = st.f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double diff = left + right - whole;
    if (depth <= 0 || st.budget <= 0 || std::abs(diff) <= 15.0 * tol) {
        return left + right + diff / 15.0;
    }
    --st.budget;
    return simpson_step(st, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           simpson_step(st, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace

double integrate(const std::function<double(double)>& f, double a, double b, double abs_tol,
                 int max_subdivisions) {
    if (a == b) return 0.0;
    if (a > b) return -integrate(f, b, a, abs_tol, max_subdivisions);
    simpson_state st{f, max_subdivisions};
    const double fa = f(a);
    const double fb = f(b);
    const double fm = f(0.5 * (a + b));
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return simpson_step(st, a, b, fa, fm, fb, whole, abs_tol, 60);
}

double bisect(const std::function<double(double)>& f, double lo, double hi, double tol, int max_iter) {
    double flo = f(lo);
    const double fhi = f(hi);
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    if ((flo > 0.0) == (fhi > 0.0)) throw error(errc::out_of_image, "bisection bracket does not change sign");
    for (int it = 0; it < max_iter && hi - lo > tol; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if (fm == 0.0) return mid;
        if ((fm > 0.0) == (flo > 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

}  // namespace copert
