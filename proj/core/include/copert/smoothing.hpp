#pragma once

#include <Eigen/Dense>

#include "copert/forest.hpp"

namespace copert {

struct smoothed_fit {
    Eigen::VectorXd values;
    Eigen::VectorXd derivatives;
    int n_ridge_fallback = 0;
};

// Weighted degree-2 local polynomial in (l - l_i) for each row i of the weight matrix.
smoothed_fit smooth_local_poly(const Eigen::VectorXd& l, const Eigen::VectorXd& fitted,
                               const Eigen::MatrixXd& weights);
// Same fit with separate centers: row i of weights spans the data points and is centered at centers[i].
smoothed_fit smooth_local_poly_at(const Eigen::VectorXd& centers, const Eigen::VectorXd& l,
                                  const Eigen::VectorXd& fitted, const Eigen::MatrixXd& weights);

// Features of the forest that supplies the weights. With w_only the weight row of a point does not move
// with its l, so each smoothed value is a fixed quadratic in l and the derivative is that quadratic's slope.
enum class smoothing_features { l_and_w, w_only };

// Full procedure: forest of fitted values, forest weights, local polynomial smoothing.
smoothed_fit smooth_with_forest(const Eigen::VectorXd& l, const Eigen::MatrixXd& w, const Eigen::VectorXd& fitted,
                                const forest_params& params,
                                smoothing_features features = smoothing_features::l_and_w);
// Forest and local polynomials built from (l, w, fitted); values and slopes reported at the query points.
smoothed_fit smooth_with_forest_at(const Eigen::VectorXd& l, const Eigen::MatrixXd& w, const Eigen::VectorXd& fitted,
                                   const forest_params& params, smoothing_features features,
                                   const Eigen::VectorXd& l_query, const Eigen::MatrixXd& w_query);

}  // namespace copert
