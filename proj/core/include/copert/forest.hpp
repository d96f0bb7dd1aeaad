#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

namespace copert {

struct forest_params {
    int n_trees = 250;
    std::optional<int> max_depth;
    int min_leaf = 5;
    // When set, leaves hold at least this share of the rows a tree is grown on.
    std::optional<double> min_leaf_fraction;
    std::optional<int> mtry;  // default floor(sqrt(p)), at least 1
    bool bootstrap = true;
    // Grow each tree on a random half and fill its leaves from the other half.
    bool honest = false;
    std::uint64_t seed = 0;
};

struct tree_node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
    int leaf = -1;
};

struct regression_tree {
    std::vector<tree_node> nodes;
    // in-bag membership of leaf i: members[offsets[i] .. offsets[i+1]) with multiplicities;
    // honest trees may leave a leaf empty (totals[i] == 0)
    std::vector<int> offsets;
    std::vector<int> members;
    std::vector<int> counts;
    std::vector<int> totals;

    int leaf_of(const double* row, Eigen::Index stride) const;
};

class forest_model {
public:
    forest_model() = default;
    forest_model(forest_params params, std::vector<regression_tree> trees, Eigen::Index n_train, Eigen::Index p)
        : params_(params), trees_(std::move(trees)), n_train_(n_train), p_(p) {}

    Eigen::VectorXd predict(const Eigen::MatrixXd& x) const;
    const forest_params& params() const { return params_; }
    const std::vector<regression_tree>& trees() const { return trees_; }
    Eigen::Index n_train() const { return n_train_; }
    Eigen::Index n_features() const { return p_; }
    bool fitted() const { return !trees_.empty(); }

private:
    forest_params params_;
    std::vector<regression_tree> trees_;
    Eigen::Index n_train_ = 0;
    Eigen::Index p_ = 0;
};

forest_model fit_forest(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const forest_params& params);

// Row i holds the average over trees of count_k / (in-bag leaf size) for the leaf containing query i.
// Trees whose leaf is empty for a query are left out of that row's average.
Eigen::MatrixXd forest_weights(const forest_model& model, const Eigen::MatrixXd& query);

}  // namespace copert
