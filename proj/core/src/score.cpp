#include "copert/score.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <vector>

#include "copert/error.hpp"
#include "copert/rng.hpp"

namespace copert {

namespace {

double quantile_sorted(const std::vector<double>& s, double q) {
    const double pos = q * static_cast<double>(s.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, s.size() - 1);
    return s[lo] + (pos - static_cast<double>(lo)) * (s[hi] - s[lo]);
}

univariate_score kernel_score(const Eigen::VectorXd& r) {
    const auto n = static_cast<std::size_t>(r.size());
    std::vector<double> x(r.data(), r.data() + n);
    std::sort(x.begin(), x.end());
    const double mean = r.mean();
    const double sd = std::sqrt((r.array() - mean).square().sum() / static_cast<double>(n - 1));
    const double iqr = quantile_sorted(x, 0.75) - quantile_sorted(x, 0.25);
    double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
    if (!(spread > 0.0)) spread = 1.0;
    // derivative-rate bandwidth, widened to steady the tails
    const double h = 1.35 * spread * std::pow(static_cast<double>(n), -1.0 / 7.0);
    // shrink towards the mean so the smoothed density keeps the sample variance
    if (sd > 0.0) {
        const double a = std::sqrt(std::max(1.0 - (h * h) / (sd * sd), 0.25));
        for (double& v : x) v = mean + a * (v - mean);
    }
    auto density = [x, h](double at, double& deriv) {
        // only points within 9 bandwidths contribute measurably
        const auto lo = std::lower_bound(x.begin(), x.end(), at - 9.0 * h);
        const auto hi = std::upper_bound(x.begin(), x.end(), at + 9.0 * h);
        double p = 0.0;
        double dp = 0.0;
        for (auto it = lo; it != hi; ++it) {
            const double u = (at - *it) / h;
            const double k = std::exp(-0.5 * u * u);
            p += k;
            dp -= u * k;
        }
        const double c = 1.0 / (static_cast<double>(x.size()) * h * std::sqrt(2.0 * std::numbers::pi));
        deriv = dp * c / h;
        return p * c;
    };
    double pmax = 0.0;
    for (double xi : x) {
        double dummy = 0.0;
        pmax = std::max(pmax, density(xi, dummy));
    }
    const double floor = 1e-4 * pmax;
    return [density, floor](double at) {
        double dp = 0.0;
        const double p = density(at, dp);
        return dp / std::max(p, floor);
    };
}

struct spline_basis {
    double a = 0.0;
    double h = 1.0;
    int segments = 1;

    int size() const { return segments + 3; }

    // Nonzero cubic B-spline values and x-derivatives at x, starting at basis index `first`.
    void eval(double x, int& first, double b[4], double db[4]) const {
        double t = (x - a) / h;
        int s = static_cast<int>(std::floor(t));
        s = std::clamp(s, 0, segments - 1);
        const double u = t - s;
        const double v = 1.0 - u;
        b[0] = v * v * v / 6.0;
        b[1] = (3.0 * u * u * u - 6.0 * u * u + 4.0) / 6.0;
        b[2] = (-3.0 * u * u * u + 3.0 * u * u + 3.0 * u + 1.0) / 6.0;
        b[3] = u * u * u / 6.0;
        db[0] = -0.5 * v * v / h;
        db[1] = (1.5 * u * u - 2.0 * u) / h;
        db[2] = (-1.5 * u * u + u + 0.5) / h;
        db[3] = 0.5 * u * u / h;
        first = s;
    }

    // As eval, but continued linearly beyond the knot range.
    void eval_linear(double x, int& first, double b[4], double db[4]) const {
        const double hi = a + h * segments;
        const double edge = std::clamp(x, a, hi);
        eval(edge, first, b, db);
        for (int k = 0; k < 4; ++k) b[k] += db[k] * (x - edge);
    }
};

struct spline_fit {
    spline_basis basis;
    Eigen::VectorXd coef;
    double lo = 0.0;
    double hi = 0.0;

    double value_and_slope(double x, double& slope) const {
        int f = 0;
        double b[4];
        double db[4];
        basis.eval_linear(x, f, b, db);
        double v = 0.0;
        slope = 0.0;
        for (int k = 0; k < 4; ++k) {
            v += coef[f + k] * b[k];
            slope += coef[f + k] * db[k];
        }
        return v;
    }

    double operator()(double x) const {
        double slope = 0.0;
        return value_and_slope(x, slope);
    }

    double derivative(double x) const {
        double slope = 0.0;
        value_and_slope(x, slope);
        return slope;
    }
};

// Score matching: minimise mean(rho^2) + 2 mean(rho') + lambda * ||D2 c||^2.
Eigen::VectorXd solve_score_matching(const spline_basis& basis, const std::vector<double>& x,
                                     const std::vector<std::size_t>& rows, double lambda) {
    const int m = basis.size();
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(m, m);
    Eigen::VectorXd bvec = Eigen::VectorXd::Zero(m);
    for (std::size_t i : rows) {
        int f = 0;
        double b[4];
        double db[4];
        basis.eval_linear(x[i], f, b, db);
        for (int p = 0; p < 4; ++p) {
            bvec[f + p] += db[p];
            for (int q = 0; q < 4; ++q) g(f + p, f + q) += b[p] * b[q];
        }
    }
    g /= static_cast<double>(rows.size());
    bvec /= static_cast<double>(rows.size());
    Eigen::MatrixXd d2 = Eigen::MatrixXd::Zero(m - 2, m);
    for (int i = 0; i < m - 2; ++i) {
        d2(i, i) = 1.0;
        d2(i, i + 1) = -2.0;
        d2(i, i + 2) = 1.0;
    }
    // sum (D2 c)^2 / h^3 approximates the integral of rho''^2
    const double h4 = std::pow(basis.h, 4);
    Eigen::MatrixXd a = g + lambda * basis.h / h4 * (d2.transpose() * d2);
    a.diagonal().array() += 1e-12;
    return -a.ldlt().solve(bvec);
}

univariate_score spline_score(const Eigen::VectorXd& r) {
    const auto n = static_cast<std::size_t>(r.size());
    std::vector<double> x(r.data(), r.data() + n);
    spline_fit fit;
    std::vector<double> sorted = x;
    std::sort(sorted.begin(), sorted.end());
    fit.lo = quantile_sorted(sorted, 0.005);
    fit.hi = quantile_sorted(sorted, 0.995);
    if (!(fit.hi > fit.lo)) fit.hi = fit.lo + 1.0;
    fit.basis.segments = static_cast<int>(std::clamp<std::size_t>(n / 100, 4, 20));
    fit.basis.a = fit.lo;
    fit.basis.h = (fit.hi - fit.lo) / fit.basis.segments;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return x[i] < x[j]; });
    // random folds; neighbours in sorted order share local density noise
    rng shuffle(0x5c0e);
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);
    constexpr int folds = 5;
    std::vector<double> lambdas;
    std::vector<double> mean_loss;
    std::vector<double> se_loss;
    for (int e = -6; e <= 3; ++e) {
        const double lambda = std::pow(10.0, e);
        double fold_loss[folds];
        for (int k = 0; k < folds; ++k) {
            std::vector<std::size_t> train;
            std::vector<std::size_t> test;
            for (std::size_t i = 0; i < n; ++i) (static_cast<int>(i % folds) == k ? test : train).push_back(order[i]);
            spline_fit cand = fit;
            cand.coef = solve_score_matching(fit.basis, x, train, lambda);
            double loss = 0.0;
            for (std::size_t i : test) {
                const double v = cand(x[i]);
                loss += v * v + 2.0 * cand.derivative(x[i]);
            }
            fold_loss[k] = loss / static_cast<double>(test.size());
        }
        double m = 0.0;
        for (double v : fold_loss) m += v / folds;
        double ss = 0.0;
        for (double v : fold_loss) ss += (v - m) * (v - m);
        lambdas.push_back(lambda);
        mean_loss.push_back(m);
        se_loss.push_back(std::sqrt(ss / (folds - 1) / folds));
    }
    // one-standard-error rule: the smoothest fit close to the best
    const auto best = static_cast<std::size_t>(std::min_element(mean_loss.begin(), mean_loss.end()) - mean_loss.begin());
    std::size_t pick = best;
    for (std::size_t i = best; i < lambdas.size(); ++i) {
        if (mean_loss[i] <= mean_loss[best] + se_loss[best]) pick = i;
    }
    const double best_lambda = lambdas[pick];
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    fit.coef = solve_score_matching(fit.basis, x, all, best_lambda);
    return [fit](double at) { return fit(at); };
}

}  // namespace

score_method parse_score_method(const std::string& name) {
    if (name == "gaussian_kernel") return score_method::gaussian_kernel;
    if (name == "penalized_spline") return score_method::penalized_spline;
    throw error(errc::invalid_argument, "unknown score method '" + name + "'");
}

std::string to_string(score_method m) {
    return m == score_method::gaussian_kernel ? "gaussian_kernel" : "penalized_spline";
}

univariate_score fit_univariate_score(const Eigen::VectorXd& residuals, score_method method) {
    if (residuals.size() < 10) throw error(errc::insufficient_data, "univariate score needs at least 10 points");
    if (!residuals.allFinite()) throw error(errc::invalid_argument, "non-finite residuals");
    return method == score_method::gaussian_kernel ? kernel_score(residuals) : spline_score(residuals);
}

Eigen::VectorXd location_scale_nuisance::standardize(const Eigen::VectorXd& l, const Eigen::MatrixXd& w,
                                                     Eigen::VectorXd* sd, int* n_floored) const {
    const Eigen::VectorXd m = mean_fit->predict(w);
    Eigen::VectorXd v = variance_fit->predict(w);
    int floored = 0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (!(v[i] > variance_floor)) {
            v[i] = variance_floor;
            ++floored;
        }
    }
    const Eigen::VectorXd s = v.array().sqrt();
    if (sd) *sd = s;
    if (n_floored) *n_floored = floored;
    return (l - m).array() / s.array();
}

location_scale_nuisance fit_location_scale_nuisance(const Eigen::VectorXd& l, const Eigen::MatrixXd& w,
                                                    const learner& mean_proto, const learner& var_proto,
                                                    std::uint64_t seed) {
    const rng base(seed);
    auto mean_fit = mean_proto.clone();
    mean_fit->reseed(base.split(1).next_u64());
    mean_fit->fit(w, l);
    const Eigen::VectorXd resid2 = (l - mean_fit->predict(w)).array().square();
    auto var_fit = var_proto.clone();
    var_fit->reseed(base.split(2).next_u64());
    var_fit->fit(w, resid2);
    return location_scale_nuisance{std::move(mean_fit), std::move(var_fit)};
}

Eigen::VectorXd score_model::evaluate(const Eigen::VectorXd& l, const Eigen::MatrixXd& w) const {
    Eigen::VectorXd sd;
    const Eigen::VectorXd xi = nuisance_.standardize(l, w, &sd);
    Eigen::VectorXd out(l.size());
    for (Eigen::Index i = 0; i < l.size(); ++i) out[i] = rho1_(xi[i]) / sd[i];
    return out;
}

double score_model::evaluate(double l, const Eigen::RowVectorXd& w) const {
    const Eigen::VectorXd lv = Eigen::VectorXd::Constant(1, l);
    return evaluate(lv, Eigen::MatrixXd(w))[0];
}

score_model fit_score_given_nuisance(const location_scale_nuisance& nuisance, const Eigen::VectorXd& l,
                                     const Eigen::MatrixXd& w, score_method method) {
    int floored = 0;
    const Eigen::VectorXd xi = nuisance.standardize(l, w, nullptr, &floored);
    if (2 * floored > l.size()) {
        throw error(errc::degenerate_variance, "more than half of the variance predictions hit the floor");
    }
    return score_model(nuisance, fit_univariate_score(xi, method));
}

score_model fit_location_scale_score(const Eigen::VectorXd& l, const Eigen::MatrixXd& w, const learner& mean_proto,
                                     const learner& var_proto, score_method method, std::uint64_t seed) {
    const auto n = static_cast<std::size_t>(l.size());
    if (n < 20) throw error(errc::insufficient_data, "location-scale score needs at least 20 points");
    if (w.rows() != l.size()) throw error(errc::dimension_mismatch, "l and w differ in length");
    std::vector<Eigen::Index> order(n);
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    rng r(seed);
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[r.below(i)]);
    const std::size_t n1 = (n + 1) / 2;
    auto pick = [&](std::size_t from, std::size_t to, Eigen::VectorXd& lo, Eigen::MatrixXd& wo) {
        lo.resize(static_cast<Eigen::Index>(to - from));
        wo.resize(static_cast<Eigen::Index>(to - from), w.cols());
        for (std::size_t i = from; i < to; ++i) {
            lo[static_cast<Eigen::Index>(i - from)] = l[order[i]];
            wo.row(static_cast<Eigen::Index>(i - from)) = w.row(order[i]);
        }
    };
    Eigen::VectorXd l1, l2;
    Eigen::MatrixXd w1, w2;
    pick(0, n1, l1, w1);
    pick(n1, n, l2, w2);
    const location_scale_nuisance nuisance =
        fit_location_scale_nuisance(l1, w1, mean_proto, var_proto, rng(seed).split(7).next_u64());
    return fit_score_given_nuisance(nuisance, l2, w2, method);
}

}  // namespace copert
