#include "copert/smoothing.hpp"

#include <cmath>

#include "copert/error.hpp"

namespace copert {

smoothed_fit smooth_local_poly(const Eigen::VectorXd& l, const Eigen::VectorXd& fitted,
                               const Eigen::MatrixXd& weights) {
    if (weights.rows() != l.size()) throw error(errc::dimension_mismatch, "weight matrix must be square");
    return smooth_local_poly_at(l, l, fitted, weights);
}

smoothed_fit smooth_local_poly_at(const Eigen::VectorXd& centers, const Eigen::VectorXd& l,
                                  const Eigen::VectorXd& fitted, const Eigen::MatrixXd& weights) {
    const Eigen::Index n = l.size();
    if (fitted.size() != n || weights.cols() != n) {
        throw error(errc::dimension_mismatch, "smoothing inputs differ in length");
    }
    const Eigen::Index rows = weights.rows();
    if (rows != centers.size()) throw error(errc::dimension_mismatch, "one weight row per center");
    smoothed_fit out;
    out.values.resize(rows);
    out.derivatives.resize(rows);
    for (Eigen::Index i = 0; i < rows; ++i) {
        double m[5] = {0, 0, 0, 0, 0};
        double r[3] = {0, 0, 0};
        for (Eigen::Index k = 0; k < n; ++k) {
            const double wk = weights(i, k);
            if (wk == 0.0) continue;
            if (wk < 0.0) throw error(errc::invalid_argument, "negative smoothing weight");
            const double d = l[k] - centers[i];
            const double d2 = d * d;
            m[0] += wk;
            m[1] += wk * d;
            m[2] += wk * d2;
            m[3] += wk * d2 * d;
            m[4] += wk * d2 * d2;
            r[0] += wk * fitted[k];
            r[1] += wk * fitted[k] * d;
            r[2] += wk * fitted[k] * d2;
        }
        if (!(m[0] > 0.0)) throw error(errc::invalid_argument, "weight row has no mass");
        Eigen::Matrix3d a;
        a << m[0], m[1], m[2], m[1], m[2], m[3], m[2], m[3], m[4];
        const Eigen::Vector3d rhs(r[0], r[1], r[2]);
        const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(a, Eigen::EigenvaluesOnly);
        const double lo = eig.eigenvalues().minCoeff();
        const double hi = eig.eigenvalues().maxCoeff();
        if (!(lo > 0.0) || hi / lo > 1e12) {
            a(1, 1) += 1e-8;
            a(2, 2) += 1e-8;
            ++out.n_ridge_fallback;
        }
        const Eigen::Vector3d beta = a.colPivHouseholderQr().solve(rhs);
        out.values[i] = beta[0];
        out.derivatives[i] = beta[1];
    }
    return out;
}

smoothed_fit smooth_with_forest(const Eigen::VectorXd& l, const Eigen::MatrixXd& w, const Eigen::VectorXd& fitted,
                                const forest_params& params, smoothing_features features) {
    return smooth_with_forest_at(l, w, fitted, params, features, l, w);
}

smoothed_fit smooth_with_forest_at(const Eigen::VectorXd& l, const Eigen::MatrixXd& w, const Eigen::VectorXd& fitted,
                                   const forest_params& params, smoothing_features features,
                                   const Eigen::VectorXd& l_query, const Eigen::MatrixXd& w_query) {
    if (w.rows() != l.size()) throw error(errc::dimension_mismatch, "smoothing inputs differ in length");
    if (w_query.rows() != l_query.size() || w_query.cols() != w.cols()) {
        throw error(errc::dimension_mismatch, "query points do not match the smoothing data");
    }
    if (features == smoothing_features::w_only) {
        if (w.cols() == 0) {
            const Eigen::MatrixXd uniform =
                Eigen::MatrixXd::Constant(l_query.size(), l.size(), 1.0 / static_cast<double>(l.size()));
            return smooth_local_poly_at(l_query, l, fitted, uniform);
        }
        const forest_model model = fit_forest(w, fitted, params);
        return smooth_local_poly_at(l_query, l, fitted, forest_weights(model, w_query));
    }
    auto stack = [](const Eigen::VectorXd& a, const Eigen::MatrixXd& b) {
        Eigen::MatrixXd out(a.size(), b.cols() + 1);
        out.col(0) = a;
        out.rightCols(b.cols()) = b;
        return out;
    };
    const forest_model model = fit_forest(stack(l, w), fitted, params);
    return smooth_local_poly_at(l_query, l, fitted, forest_weights(model, stack(l_query, w_query)));
}

}  // namespace copert
