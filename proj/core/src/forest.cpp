#include "copert/forest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>

#include "copert/error.hpp"
#include "copert/parallel.hpp"
#include "copert/rng.hpp"

namespace copert {

namespace {

constexpr int max_bins = 256;

struct binned_features {
    Eigen::Index n = 0;
    Eigen::Index p = 0;
    std::vector<std::uint8_t> codes;  // column-major, codes[f * n + i]
    std::vector<std::vector<double>> cuts;
};

binned_features bin_features(const Eigen::MatrixXd& x) {
    binned_features b;
    b.n = x.rows();
    b.p = x.cols();
    b.codes.resize(static_cast<std::size_t>(b.n * b.p));
    b.cuts.resize(static_cast<std::size_t>(b.p));
    std::vector<double> sorted(static_cast<std::size_t>(b.n));
    for (Eigen::Index f = 0; f < b.p; ++f) {
        for (Eigen::Index i = 0; i < b.n; ++i) sorted[i] = x(i, f);
        std::sort(sorted.begin(), sorted.end());
        std::vector<double>& cuts = b.cuts[f];
        const auto uend = std::unique(sorted.begin(), sorted.end());
        const auto n_unique = static_cast<std::size_t>(uend - sorted.begin());
        if (n_unique <= static_cast<std::size_t>(max_bins)) {
            for (std::size_t k = 1; k < n_unique; ++k) cuts.push_back(sorted[k - 1] + 0.5 * (sorted[k] - sorted[k - 1]));
        } else {
            for (Eigen::Index i = 0; i < b.n; ++i) sorted[i] = x(i, f);
            std::sort(sorted.begin(), sorted.end());
            for (int k = 1; k < max_bins; ++k) {
                const auto pos = static_cast<std::size_t>(static_cast<long long>(k) * b.n / max_bins);
                if (pos == 0 || sorted[pos - 1] == sorted[pos]) continue;
                const double c = sorted[pos - 1] + 0.5 * (sorted[pos] - sorted[pos - 1]);
                if (cuts.empty() || c > cuts.back()) cuts.push_back(c);
            }
        }
        for (Eigen::Index i = 0; i < b.n; ++i) {
            const auto it = std::lower_bound(cuts.begin(), cuts.end(), x(i, f));
            b.codes[static_cast<std::size_t>(f * b.n + i)] = static_cast<std::uint8_t>(it - cuts.begin());
        }
    }
    return b;
}

struct split_choice {
    int feature = -1;
    int bin = -1;
    double score = 0.0;
};

class tree_builder {
public:
    tree_builder(const binned_features& bx, const Eigen::VectorXd& y, const forest_params& params, int mtry,
                 rng r)
        : bx_(bx), y_(y), params_(params), mtry_(mtry), rng_(r) {
        const auto n = static_cast<std::size_t>(bx.n);
        idx_.resize(n);
        if (params.honest) {
            for (std::size_t i = 0; i < n; ++i) idx_[i] = static_cast<int>(i);
            for (std::size_t i = n; i > 1; --i) std::swap(idx_[i - 1], idx_[rng_.below(i)]);
            est_.assign(idx_.begin() + static_cast<std::ptrdiff_t>(n / 2), idx_.end());
            idx_.resize(n / 2);
        } else if (params.bootstrap) {
            // repeated draws become one weighted row
            std::vector<int> draws(n, 0);
            for (std::size_t i = 0; i < n; ++i) ++draws[rng_.below(n)];
            idx_.clear();
            for (std::size_t i = 0; i < n; ++i) {
                if (draws[i] > 0) {
                    idx_.push_back(static_cast<int>(i));
                    wt_.push_back(draws[i]);
                }
            }
        } else {
            for (std::size_t i = 0; i < n; ++i) idx_[i] = static_cast<int>(i);
        }
        perm_.resize(static_cast<std::size_t>(bx.p));
        for (std::size_t f = 0; f < perm_.size(); ++f) perm_[f] = static_cast<int>(f);
        wt_.resize(idx_.size(), 1);
        min_leaf_ = std::max(1, params.min_leaf);
        if (params.min_leaf_fraction) {
            const double share = *params.min_leaf_fraction * static_cast<double>(params.honest ? idx_.size() : n);
            min_leaf_ = std::max(min_leaf_, static_cast<int>(std::ceil(share)));
        }
        ys_.resize(idx_.size());
        wys_.resize(idx_.size());
        for (std::size_t i = 0; i < idx_.size(); ++i) {
            ys_[i] = y_[idx_[i]];
            wys_[i] = wt_[i] * ys_[i];
        }
        hist_sum_.assign(max_bins, 0.0);
        hist_cnt_.assign(max_bins, 0);
        tree_.offsets.push_back(0);
    }

    regression_tree build() {
        grow(0, static_cast<int>(idx_.size()), 0);
        if (params_.honest) repopulate();
        return std::move(tree_);
    }

private:
    int grow(int begin, int end, int depth) {
        const int node_id = static_cast<int>(tree_.nodes.size());
        tree_.nodes.emplace_back();
        split_bin_.push_back(-1);
        double sum = 0.0;
        int m = 0;
        double lo = ys_[begin];
        double hi = lo;
        for (int i = begin; i < end; ++i) {
            const double v = ys_[i];
            sum += wys_[i];
            m += wt_[i];
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        tree_.nodes[node_id].value = sum / m;
        const bool depth_ok = !params_.max_depth || depth < *params_.max_depth;
        if (depth_ok && m >= 2 * min_leaf_ && hi > lo) {
            const split_choice best = find_split(begin, end, m, sum);
            if (best.feature >= 0) {
                const std::uint8_t* codes = &bx_.codes[static_cast<std::size_t>(best.feature * bx_.n)];
                const int split = partition(begin, end, codes, best.bin);
                const int left = grow(begin, split, depth + 1);
                const int right = grow(split, end, depth + 1);
                tree_node& node = tree_.nodes[node_id];
                node.feature = best.feature;
                node.threshold = bx_.cuts[best.feature][best.bin];
                split_bin_[static_cast<std::size_t>(node_id)] = best.bin;
                node.left = left;
                node.right = right;
                return node_id;
            }
        }
        make_leaf(node_id, begin, end);
        return node_id;
    }

    split_choice find_split(int begin, int end, int m, double sum) {
        const int min_leaf = min_leaf_;
        split_choice best;
        best.score = sum * sum / m * (1.0 + 1e-12) + 1e-12;
        const auto p = static_cast<std::size_t>(bx_.p);
        // constant features do not count toward mtry
        int visited = 0;
        for (std::size_t k = 0; k < p && visited < mtry_; ++k) {
            const std::size_t j = k + rng_.below(p - k);
            std::swap(perm_[k], perm_[j]);
            const int f = perm_[k];
            const std::uint8_t* codes = &bx_.codes[static_cast<std::size_t>(f * bx_.n)];
            const int n_bins = static_cast<int>(bx_.cuts[f].size()) + 1;
            if (n_bins < 2) continue;
            int c_lo = n_bins;
            int c_hi = -1;
            for (int i = begin; i < end; ++i) {
                const int c = codes[idx_[i]];
                hist_sum_[c] += wys_[i];
                hist_cnt_[c] += wt_[i];
                c_lo = std::min(c_lo, c);
                c_hi = std::max(c_hi, c);
            }
            if (c_lo < c_hi) {
                ++visited;
                double left = 0.0;
                int nl = 0;
                for (int c = c_lo; c < c_hi; ++c) {
                    if (hist_cnt_[c] == 0) continue;
                    left += hist_sum_[c];
                    nl += hist_cnt_[c];
                    const int nr = m - nl;
                    if (nr < min_leaf) break;
                    if (nl < min_leaf) continue;
                    const double right = sum - left;
                    const double score = left * left / nl + right * right / nr;
                    if (score > best.score) best = split_choice{f, c, score};
                }
            }
            // histograms stay zeroed between uses
            std::fill(hist_sum_.begin() + c_lo, hist_sum_.begin() + c_hi + 1, 0.0);
            std::fill(hist_cnt_.begin() + c_lo, hist_cnt_.begin() + c_hi + 1, 0);
        }
        return best;
    }

    // Rows with code <= bin first; row data stays aligned with idx_.
    int partition(int begin, int end, const std::uint8_t* codes, int bin) {
        int i = begin;
        int j = end - 1;
        while (true) {
            while (i <= j && codes[idx_[i]] <= bin) ++i;
            while (i <= j && codes[idx_[j]] > bin) --j;
            if (i >= j) return i;
            std::swap(idx_[i], idx_[j]);
            std::swap(ys_[i], ys_[j]);
            std::swap(wys_[i], wys_[j]);
            std::swap(wt_[i], wt_[j]);
        }
    }

    void make_leaf(int node_id, int begin, int end) {
        tree_node& node = tree_.nodes[node_id];
        node.leaf = static_cast<int>(tree_.totals.size());
        leaf_rows_.clear();
        int total = 0;
        for (int i = begin; i < end; ++i) {
            leaf_rows_.emplace_back(idx_[i], wt_[i]);
            total += wt_[i];
        }
        std::sort(leaf_rows_.begin(), leaf_rows_.end());
        for (const auto& [row, count] : leaf_rows_) {
            tree_.members.push_back(row);
            tree_.counts.push_back(count);
        }
        tree_.offsets.push_back(static_cast<int>(tree_.members.size()));
        tree_.totals.push_back(total);
    }

    // Replaces leaf membership and values with the held-out half.
    void repopulate() {
        const std::size_t n_leaves = tree_.totals.size();
        std::vector<std::vector<int>> by_leaf(n_leaves);
        for (int i : est_) {
            int k = 0;
            while (tree_.nodes[k].feature >= 0) {
                const tree_node& nd = tree_.nodes[k];
                const int code = bx_.codes[static_cast<std::size_t>(nd.feature * bx_.n + i)];
                k = code <= split_bin_[k] ? nd.left : nd.right;
            }
            by_leaf[static_cast<std::size_t>(tree_.nodes[k].leaf)].push_back(i);
        }
        std::vector<int> leaf_node(n_leaves, -1);
        for (std::size_t k = 0; k < tree_.nodes.size(); ++k) {
            if (tree_.nodes[k].feature < 0) leaf_node[static_cast<std::size_t>(tree_.nodes[k].leaf)] = static_cast<int>(k);
        }
        tree_.offsets.assign(1, 0);
        tree_.members.clear();
        tree_.counts.clear();
        tree_.totals.clear();
        for (std::size_t leaf = 0; leaf < n_leaves; ++leaf) {
            auto& ids = by_leaf[leaf];
            std::sort(ids.begin(), ids.end());
            double sum = 0.0;
            for (int i : ids) {
                tree_.members.push_back(i);
                tree_.counts.push_back(1);
                sum += y_[i];
            }
            tree_.offsets.push_back(static_cast<int>(tree_.members.size()));
            tree_.totals.push_back(static_cast<int>(ids.size()));
            tree_.nodes[static_cast<std::size_t>(leaf_node[leaf])].value =
                ids.empty() ? 0.0 : sum / static_cast<double>(ids.size());
        }
    }

    const binned_features& bx_;
    const Eigen::VectorXd& y_;
    const forest_params& params_;
    int mtry_;
    int min_leaf_ = 1;
    rng rng_;
    std::vector<int> idx_;
    std::vector<double> ys_;
    std::vector<double> wys_;
    std::vector<int> wt_;
    std::vector<std::pair<int, int>> leaf_rows_;
    std::vector<int> est_;
    std::vector<int> split_bin_;
    std::vector<int> perm_;
    std::vector<double> hist_sum_;
    std::vector<int> hist_cnt_;
    regression_tree tree_;
};

}  // namespace

int regression_tree::leaf_of(const double* row, Eigen::Index stride) const {
    int k = 0;
    while (nodes[k].feature >= 0) {
        const tree_node& nd = nodes[k];
        k = row[nd.feature * stride] <= nd.threshold ? nd.left : nd.right;
    }
    return k;
}

forest_model fit_forest(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const forest_params& params) {
    if (x.rows() == 0 || y.size() == 0) throw error(errc::empty_data, "forest needs data");
    if (x.rows() != y.size()) throw error(errc::dimension_mismatch, "features and targets differ in length");
    if (x.cols() == 0) throw error(errc::dimension_mismatch, "forest needs at least one feature");
    if (params.n_trees < 1) throw error(errc::invalid_argument, "n_trees must be positive");
    if (params.min_leaf_fraction && !(*params.min_leaf_fraction >= 0.0 && *params.min_leaf_fraction < 0.5)) {
        throw error(errc::invalid_argument, "min_leaf_fraction must lie in [0, 0.5)");
    }
    const binned_features bx = bin_features(x);
    int mtry = params.mtry ? *params.mtry : static_cast<int>(std::floor(std::sqrt(static_cast<double>(x.cols()))));
    mtry = std::clamp(mtry, 1, static_cast<int>(x.cols()));
    std::vector<regression_tree> trees(static_cast<std::size_t>(params.n_trees));
    const rng base(params.seed);
    parallel_for(trees.size(), [&](std::size_t t) {
        tree_builder b(bx, y, params, mtry, base.split(t));
        trees[t] = b.build();
    });
    return forest_model(params, std::move(trees), x.rows(), x.cols());
}

Eigen::VectorXd forest_model::predict(const Eigen::MatrixXd& x) const {
    if (!fitted()) throw error(errc::not_fitted, "forest is not fitted");
    if (x.cols() != p_) throw error(errc::dimension_mismatch, "feature count differs from training");
    Eigen::VectorXd out = Eigen::VectorXd::Zero(x.rows());
    Eigen::VectorXd used = Eigen::VectorXd::Zero(x.rows());
    const Eigen::Index stride = x.rows();
    for (const regression_tree& t : trees_) {
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            const tree_node& leaf = t.nodes[t.leaf_of(x.data() + i, stride)];
            if (t.totals[leaf.leaf] == 0) continue;
            out[i] += leaf.value;
            used[i] += 1.0;
        }
    }
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        if (used[i] == 0.0) throw error(errc::insufficient_data, "no tree has data for a query point");
        out[i] /= used[i];
    }
    return out;
}

Eigen::MatrixXd forest_weights(const forest_model& model, const Eigen::MatrixXd& query) {
    if (!model.fitted()) throw error(errc::not_fitted, "forest is not fitted");
    if (query.cols() != model.n_features()) throw error(errc::dimension_mismatch, "feature count differs");
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(query.rows(), model.n_train());
    Eigen::VectorXd used = Eigen::VectorXd::Zero(query.rows());
    const Eigen::Index stride = query.rows();
    for (const regression_tree& t : model.trees()) {
        for (Eigen::Index i = 0; i < query.rows(); ++i) {
            const int leaf = t.nodes[t.leaf_of(query.data() + i, stride)].leaf;
            if (t.totals[leaf] == 0) continue;
            used[i] += 1.0;
            const double scale = 1.0 / t.totals[leaf];
            for (int k = t.offsets[leaf]; k < t.offsets[leaf + 1]; ++k) {
                w(i, t.members[k]) += scale * t.counts[k];
            }
        }
    }
    for (Eigen::Index i = 0; i < query.rows(); ++i) {
        if (used[i] == 0.0) throw error(errc::insufficient_data, "no tree has data for a query point");
        w.row(i) /= used[i];
    }
    return w;
}

}  // namespace copert
