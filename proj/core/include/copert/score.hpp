#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>

#include "copert/learners.hpp"

namespace copert {

enum class score_method { gaussian_kernel, penalized_spline };

score_method parse_score_method(const std::string& name);
std::string to_string(score_method m);

using univariate_score = std::function<double(double)>;

// Estimates the derivative of the log density of the residuals.
univariate_score fit_univariate_score(const Eigen::VectorXd& residuals, score_method method = score_method::gaussian_kernel);

inline constexpr double variance_floor = 1e-6;

// Conditional mean and variance regressions of l on w.
struct location_scale_nuisance {
    std::shared_ptr<const learner> mean_fit;
    std::shared_ptr<const learner> variance_fit;

    Eigen::VectorXd standardize(const Eigen::VectorXd& l, const Eigen::MatrixXd& w, Eigen::VectorXd* sd = nullptr,
                                int* n_floored = nullptr) const;
};

location_scale_nuisance fit_location_scale_nuisance(const Eigen::VectorXd& l, const Eigen::MatrixXd& w,
                                                    const learner& mean_proto, const learner& var_proto,
                                                    std::uint64_t seed);

class score_model {
public:
    score_model(location_scale_nuisance nuisance, univariate_score rho1)
        : nuisance_(std::move(nuisance)), rho1_(std::move(rho1)) {}

    Eigen::VectorXd evaluate(const Eigen::VectorXd& l, const Eigen::MatrixXd& w) const;
    double evaluate(double l, const Eigen::RowVectorXd& w) const;
    const location_scale_nuisance& nuisance() const { return nuisance_; }
    const univariate_score& univariate() const { return rho1_; }

private:
    location_scale_nuisance nuisance_;
    univariate_score rho1_;
};

// Fits the univariate score on standardized residuals of (l, w), given fitted nuisances.
// Throws degenerate_variance when more than half of the variance predictions hit the floor.
score_model fit_score_given_nuisance(const location_scale_nuisance& nuisance, const Eigen::VectorXd& l,
                                     const Eigen::MatrixXd& w, score_method method);

// Internal two-way split: ceil(n/2) rows for the nuisances, the rest for the univariate score.
score_model fit_location_scale_score(const Eigen::VectorXd& l, const Eigen::MatrixXd& w, const learner& mean_proto,
                                     const learner& var_proto, score_method method, std::uint64_t seed);

}  // namespace copert
