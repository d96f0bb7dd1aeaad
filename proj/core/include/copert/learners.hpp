#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "copert/forest.hpp"

namespace copert {

class learner {
public:
    virtual ~learner() = default;
    virtual void fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) = 0;
    virtual Eigen::VectorXd predict(const Eigen::MatrixXd& x) const = 0;
    Eigen::VectorXd predict_proba(const Eigen::MatrixXd& x) const;
    // Unfitted copy carrying the same hyperparameters and seed.
    virtual std::unique_ptr<learner> clone() const = 0;
    virtual std::string name() const = 0;
    virtual void reseed(std::uint64_t /*seed*/) {}
    bool fitted() const { return fitted_; }

protected:
    void require_fitted() const;
    bool fitted_ = false;
};

class mean_learner : public learner {
public:
    void fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) override;
    Eigen::VectorXd predict(const Eigen::MatrixXd& x) const override;
    std::unique_ptr<learner> clone() const override { return std::make_unique<mean_learner>(); }
    std::string name() const override { return "mean"; }
    double mean() const { return mean_; }

private:
    double mean_ = 0.0;
};

class ridge_learner : public learner {
public:
    explicit ridge_learner(double penalty = 0.0);
    void fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) override;
    Eigen::VectorXd predict(const Eigen::MatrixXd& x) const override;
    std::unique_ptr<learner> clone() const override { return std::make_unique<ridge_learner>(penalty_); }
    std::string name() const override { return "ridge"; }
    const Eigen::VectorXd& coefficients() const { return beta_; }
    double intercept() const { return intercept_; }

private:
    double penalty_;
    Eigen::VectorXd beta_;
    double intercept_ = 0.0;
};

class forest_learner : public learner {
public:
    explicit forest_learner(forest_params params = {}, std::string label = "forest");
    void fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) override;
    Eigen::VectorXd predict(const Eigen::MatrixXd& x) const override;
    std::unique_ptr<learner> clone() const override;
    std::string name() const override { return label_; }
    void reseed(std::uint64_t seed) override { params_.seed = seed; }
    const forest_model& model() const { return model_; }

private:
    forest_params params_;
    std::string label_;
    forest_model model_;
};

enum class cv_loss { squared_error, brier };

class cv_selector : public learner {
public:
    cv_selector(std::vector<std::unique_ptr<learner>> candidates, int n_folds = 5,
                cv_loss loss = cv_loss::squared_error, std::uint64_t seed = 0);
    void fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) override;
    Eigen::VectorXd predict(const Eigen::MatrixXd& x) const override;
    std::unique_ptr<learner> clone() const override;
    std::string name() const override { return "cv"; }
    void reseed(std::uint64_t seed) override;

    std::size_t selected_index() const { return selected_; }
    std::string selected_name() const { return selected().name(); }
    const std::vector<double>& cv_losses() const { return losses_; }
    const learner& selected() const;

private:
    std::vector<std::unique_ptr<learner>> candidates_;
    int n_folds_;
    cv_loss loss_;
    std::uint64_t seed_;
    std::vector<double> losses_;
    std::size_t selected_ = 0;
    std::unique_ptr<learner> winner_;
};

std::unique_ptr<learner> fit_mean(const Eigen::VectorXd& y);
std::unique_ptr<learner> fit_ridge(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double penalty);
std::unique_ptr<cv_selector> fit_cv_select(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                           std::vector<std::unique_ptr<learner>> candidates, std::uint64_t seed,
                                           int n_folds = 5, cv_loss loss = cv_loss::squared_error);

// The named menu: mean, ridge, forest_shallow (depth 2), forest, cv (mean / forest_shallow / forest).
std::unique_ptr<learner> make_learner(const std::string& name, std::uint64_t seed = 0,
                                      cv_loss loss = cv_loss::squared_error);
const std::vector<std::string>& learner_names();

// Assigns each of n rows to one of k folds of size floor(n/k) or ceil(n/k) by seeded shuffle.
std::vector<int> fold_assignment(std::size_t n, int k, std::uint64_t seed);

}  // namespace copert
