#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "copert/forest.hpp"
#include "copert/perturbations.hpp"
#include "copert/score.hpp"
#include "copert/smoothing.hpp"

namespace copert {

// (Y, L, W) rows after reparametrization. Zero-speed rows carry no usable (L, W).
struct sample_set {
    Eigen::VectorXd y;
    Eigen::VectorXd l;
    Eigen::MatrixXd w;
    std::vector<char> zero_speed;
    bool binary = false;
    std::size_t n_l_undefined = 0;  // zero-speed rows where L itself is undefined (e.g. z^j in {0, 1})

    std::size_t size() const { return static_cast<std::size_t>(y.size()); }
    std::size_t n_zero_speed() const;
    sample_set nonzero_speed() const;
    sample_set subset(const std::vector<std::size_t>& rows) const;
};

sample_set make_samples(const Eigen::VectorXd& y, const Eigen::VectorXd& l, const Eigen::MatrixXd& w, bool binary);

// Reparametrizes each composition for the effect; adjustment covariates are appended to W.
sample_set reparametrize_samples(const effect_spec& spec, const std::vector<composition>& z, const Eigen::VectorXd& y,
                                 const Eigen::MatrixXd* adjust = nullptr);

struct effect_estimate {
    double estimate = 0.0;
    double variance = 0.0;  // asymptotic variance of sqrt(n) (estimate - truth)
    double std_error = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    double p_value = 1.0;
    double alpha = 0.05;
    std::string method;
    std::size_t n = 0;  // rows entering the variance scaling
    std::size_t n_used = 0;
    std::size_t n_zero_speed = 0;
    std::size_t n_clipped = 0;
    std::vector<std::string> warnings;
};

// Fitted predictor and the method that produces one from training data.
using predictor = std::function<Eigen::VectorXd(const Eigen::MatrixXd&)>;
using regression_method =
    std::function<predictor(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::uint64_t seed)>;

struct value_and_slope {
    Eigen::VectorXd value;
    Eigen::VectorXd slope;
};
// Regress y on (l, w) over the training rows and return f and its l-derivative at the evaluation rows.
using derivative_method = std::function<value_and_slope(
    const Eigen::VectorXd& l_train, const Eigen::MatrixXd& w_train, const Eigen::VectorXd& y_train,
    const Eigen::VectorXd& l_eval, const Eigen::MatrixXd& w_eval, std::uint64_t seed)>;

// Two stages: nuisances from the training rows, then the score from a second set of rows.
using score_evaluator = std::function<Eigen::VectorXd(const Eigen::VectorXd& l, const Eigen::MatrixXd& w)>;
using score_stage = std::function<score_evaluator(const Eigen::VectorXd& l, const Eigen::MatrixXd& w)>;
using score_method_fn =
    std::function<score_stage(const Eigen::VectorXd& l, const Eigen::MatrixXd& w, std::uint64_t seed)>;

struct nuisance_methods {
    regression_method outcome;     // Y on (L, W) or on W
    regression_method treatment;   // continuous L on W
    regression_method propensity;  // binary L on W; outputs are probabilities
    derivative_method derivative;
    score_method_fn score;
};

forest_params default_smoothing_forest();

// Nuisances built from a named learner; forests smooth the outcome fit for derivatives.
nuisance_methods learner_nuisances(const std::string& learner_name, score_method method = score_method::gaussian_kernel,
                                   forest_params smoothing = default_smoothing_forest(),
                                   smoothing_features features = smoothing_features::w_only);
regression_method learner_regression(const std::string& learner_name, bool classification = false);
derivative_method smoothed_derivative(regression_method outcome, forest_params smoothing = default_smoothing_forest(),
                                      smoothing_features features = smoothing_features::w_only);
score_method_fn location_scale_score(const std::string& learner_name, score_method method);

struct estimator_config {
    int folds = 2;
    bool crossfit = true;
    std::uint64_t seed = 20240601;
    double alpha = 0.05;
    double propensity_clip = 0.01;
    nuisance_methods nuisances = learner_nuisances("cv");
};

// Fold labels plus the inner halves used by the directional estimator.
struct fold_plan {
    int k = 1;
    std::vector<int> fold;
    std::vector<int> half;
};
fold_plan make_fold_plan(std::size_t n, int k, std::uint64_t seed);

effect_estimate estimate_tau_np(const sample_set& s, const estimator_config& cfg);
effect_estimate estimate_tau_np(const sample_set& s, const estimator_config& cfg, const fold_plan& plan);
effect_estimate estimate_lambda_np(const sample_set& s, const estimator_config& cfg);
effect_estimate estimate_lambda_np(const sample_set& s, const estimator_config& cfg, const fold_plan& plan);
effect_estimate estimate_theta_plm(const sample_set& s, const estimator_config& cfg);
effect_estimate estimate_theta_plm(const sample_set& s, const estimator_config& cfg, const fold_plan& plan);

enum class plugin_target { tau, lambda };
effect_estimate estimate_plugin(const sample_set& s, const estimator_config& cfg, plugin_target target);
effect_estimate estimate_plugin(const sample_set& s, const estimator_config& cfg, plugin_target target,
                                const fold_plan& plan);

effect_estimate with_zero_speed_correction(const effect_estimate& inner, double p_hat, std::size_t n_total);

std::pair<double, double> confidence_interval(double estimate, double variance, std::size_t n, double alpha);
double p_value(double estimate, double variance, std::size_t n);

effect_estimate estimate_marginal_ols(const Eigen::VectorXd& y, const Eigen::VectorXd& l, double alpha = 0.05);
// Difference of means between l = 1 and l = 0 rows with an unpooled standard error.
effect_estimate estimate_mean_difference(const Eigen::VectorXd& y, const Eigen::VectorXd& l, double alpha = 0.05);

const std::vector<std::string>& estimator_names();

// Dispatches by name; directional estimators drop zero-speed rows and rescale by their share.
effect_estimate estimate(const std::string& method, const sample_set& s, const estimator_config& cfg);

}  // namespace copert
