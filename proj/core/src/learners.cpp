#include "copert/learners.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "copert/error.hpp"
#include "copert/rng.hpp"

namespace copert {

namespace {

void check_xy(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    if (y.size() == 0) throw error(errc::empty_data, "no training targets");
    if (x.rows() != y.size()) throw error(errc::dimension_mismatch, "features and targets differ in length");
}

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& x, const std::vector<Eigen::Index>& rows) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), x.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(rows[i]);
    return out;
}

Eigen::VectorXd take(const Eigen::VectorXd& y, const std::vector<Eigen::Index>& rows) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) out[static_cast<Eigen::Index>(i)] = y[rows[i]];
    return out;
}

}  // namespace

Eigen::VectorXd learner::predict_proba(const Eigen::MatrixXd& x) const {
    return predict(x).cwiseMax(0.0).cwiseMin(1.0);
}

void learner::require_fitted() const {
    if (!fitted_) throw error(errc::not_fitted, name() + " learner used before fit");
}

void mean_learner::fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    if (y.size() == 0) throw error(errc::empty_data, "no training targets");
    if (x.rows() != 0 && x.rows() != y.size()) throw error(errc::dimension_mismatch, "length mismatch");
    mean_ = y.mean();
    fitted_ = true;
}

Eigen::VectorXd mean_learner::predict(const Eigen::MatrixXd& x) const {
    require_fitted();
    return Eigen::VectorXd::Constant(x.rows(), mean_);
}

ridge_learner::ridge_learner(double penalty) : penalty_(penalty) {
    if (!(penalty >= 0.0)) throw error(errc::invalid_argument, "ridge penalty must be nonnegative");
}

void ridge_learner::fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    check_xy(x, y);
    const Eigen::RowVectorXd xbar = x.colwise().mean();
    const double ybar = y.mean();
    const Eigen::MatrixXd xc = x.rowwise() - xbar;
    const Eigen::VectorXd yc = y.array() - ybar;
    if (penalty_ == 0.0) {
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xc);
        qr.setThreshold(1e-10);
        if (qr.rank() < x.cols()) throw error(errc::singular_system, "rank-deficient design without penalty");
        beta_ = qr.solve(yc);
    } else {
        Eigen::MatrixXd gram = xc.transpose() * xc;
        gram.diagonal().array() += penalty_;
        beta_ = gram.ldlt().solve(xc.transpose() * yc);
    }
    intercept_ = ybar - xbar.dot(beta_);
    fitted_ = true;
}

Eigen::VectorXd ridge_learner::predict(const Eigen::MatrixXd& x) const {
    require_fitted();
    if (x.cols() != beta_.size()) throw error(errc::dimension_mismatch, "feature count differs from training");
    return (x * beta_).array() + intercept_;
}

forest_learner::forest_learner(forest_params params, std::string label)
    : params_(params), label_(std::move(label)) {}

void forest_learner::fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    check_xy(x, y);
    model_ = fit_forest(x, y, params_);
    fitted_ = true;
}

Eigen::VectorXd forest_learner::predict(const Eigen::MatrixXd& x) const {
    require_fitted();
    return model_.predict(x);
}

std::unique_ptr<learner> forest_learner::clone() const {
    return std::make_unique<forest_learner>(params_, label_);
}

cv_selector::cv_selector(std::vector<std::unique_ptr<learner>> candidates, int n_folds, cv_loss loss,
                         std::uint64_t seed)
    : candidates_(std::move(candidates)), n_folds_(n_folds), loss_(loss), seed_(seed) {
    if (candidates_.empty()) throw error(errc::empty_candidates, "cv selector needs candidates");
    if (n_folds_ < 2) throw error(errc::invalid_argument, "cv needs at least 2 folds");
}

void cv_selector::fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    check_xy(x, y);
    const auto n = static_cast<std::size_t>(y.size());
    losses_.assign(candidates_.size(), 0.0);
    if (candidates_.size() > 1) {
        if (n < static_cast<std::size_t>(n_folds_)) throw error(errc::insufficient_data, "fewer rows than folds");
        const std::vector<int> fold = fold_assignment(n, n_folds_, seed_);
        for (int k = 0; k < n_folds_; ++k) {
            std::vector<Eigen::Index> train;
            std::vector<Eigen::Index> test;
            for (std::size_t i = 0; i < n; ++i) (fold[i] == k ? test : train).push_back(static_cast<Eigen::Index>(i));
            const Eigen::MatrixXd xtr = take_rows(x, train);
            const Eigen::VectorXd ytr = take(y, train);
            const Eigen::MatrixXd xte = take_rows(x, test);
            const Eigen::VectorXd yte = take(y, test);
            for (std::size_t c = 0; c < candidates_.size(); ++c) {
                auto model = candidates_[c]->clone();
                model->fit(xtr, ytr);
                const Eigen::VectorXd pred = loss_ == cv_loss::brier ? model->predict_proba(xte) : model->predict(xte);
                losses_[c] += (pred - yte).squaredNorm();
            }
        }
        for (double& l : losses_) l /= static_cast<double>(n);
    }
    selected_ = static_cast<std::size_t>(std::min_element(losses_.begin(), losses_.end()) - losses_.begin());
    winner_ = candidates_[selected_]->clone();
    winner_->fit(x, y);
    fitted_ = true;
}

Eigen::VectorXd cv_selector::predict(const Eigen::MatrixXd& x) const {
    require_fitted();
    return winner_->predict(x);
}

std::unique_ptr<learner> cv_selector::clone() const {
    std::vector<std::unique_ptr<learner>> c;
    for (const auto& cand : candidates_) c.push_back(cand->clone());
    return std::make_unique<cv_selector>(std::move(c), n_folds_, loss_, seed_);
}

void cv_selector::reseed(std::uint64_t seed) {
    seed_ = seed;
    const rng base(seed);
    for (std::size_t c = 0; c < candidates_.size(); ++c) candidates_[c]->reseed(base.split(c + 1).next_u64());
}

const learner& cv_selector::selected() const {
    require_fitted();
    return *winner_;
}

std::unique_ptr<learner> fit_mean(const Eigen::VectorXd& y) {
    auto m = std::make_unique<mean_learner>();
    m->fit(Eigen::MatrixXd(y.size(), 0), y);
    return m;
}

std::unique_ptr<learner> fit_ridge(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double penalty) {
    auto m = std::make_unique<ridge_learner>(penalty);
    m->fit(x, y);
    return m;
}

std::unique_ptr<cv_selector> fit_cv_select(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                           std::vector<std::unique_ptr<learner>> candidates, std::uint64_t seed,
                                           int n_folds, cv_loss loss) {
    auto m = std::make_unique<cv_selector>(std::move(candidates), n_folds, loss, seed);
    m->fit(x, y);
    return m;
}

const std::vector<std::string>& learner_names() {
    static const std::vector<std::string> names{"mean", "ridge", "forest_shallow", "forest", "cv"};
    return names;
}

std::unique_ptr<learner> make_learner(const std::string& name, std::uint64_t seed, cv_loss loss) {
    if (name == "mean") return std::make_unique<mean_learner>();
    if (name == "ridge") return std::make_unique<ridge_learner>(1e-6);
    if (name == "forest" || name == "forest_shallow") {
        forest_params p;
        p.seed = seed;
        if (name == "forest_shallow") p.max_depth = 2;
        // regression forests consider every feature at each split, classification forests sqrt(p)
        if (loss == cv_loss::squared_error) p.mtry = std::numeric_limits<int>::max();
        return std::make_unique<forest_learner>(p, name);
    }
    if (name == "cv") {
        std::vector<std::unique_ptr<learner>> c;
        c.push_back(make_learner("mean"));
        c.push_back(make_learner("forest_shallow", seed, loss));
        c.push_back(make_learner("forest", seed, loss));
        auto sel = std::make_unique<cv_selector>(std::move(c), 5, loss, seed);
        sel->reseed(seed);
        return sel;
    }
    throw error(errc::invalid_argument, "unknown learner '" + name + "'");
}

std::vector<int> fold_assignment(std::size_t n, int k, std::uint64_t seed) {
    if (k < 1) throw error(errc::invalid_argument, "fold count must be positive");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng r(seed);
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[r.below(i)]);
    std::vector<int> fold(n);
    for (std::size_t i = 0; i < n; ++i) fold[order[i]] = static_cast<int>(i % static_cast<std::size_t>(k));
    return fold;
}

}  // namespace copert
