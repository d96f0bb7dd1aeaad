#include "copert/estimators.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <numeric>

#include "copert/error.hpp"
#include "copert/learners.hpp"
#include "copert/numerics.hpp"
#include "copert/rng.hpp"
#include "copert/smoothing.hpp"

namespace copert {

namespace {

using rows_t = std::vector<std::size_t>;

enum role : std::uint64_t { role_outcome = 1, role_treatment, role_derivative, role_score };

std::uint64_t seed_for(std::uint64_t base, int fold, role r) {
    return rng(base).split(static_cast<std::uint64_t>(fold) * 16 + r).next_u64();
}

Eigen::VectorXd take(const Eigen::VectorXd& v, const rows_t& rows) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[static_cast<Eigen::Index>(rows[i])];
    return out;
}

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& m, const rows_t& rows) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
    }
    return out;
}

Eigen::MatrixXd with_l(const Eigen::VectorXd& l, const Eigen::MatrixXd& w) {
    Eigen::MatrixXd x(l.size(), w.cols() + 1);
    x.col(0) = l;
    x.rightCols(w.cols()) = w;
    return x;
}

// Row order inside each fold is canonical (lexicographic in (y, l, w)), so estimates depend only on
// which rows share a fold, never on the order in which rows were supplied.
struct partition {
    std::vector<rows_t> folds;
    std::vector<std::array<rows_t, 2>> halves;
};

partition canonical_partition(const sample_set& s, const fold_plan& plan) {
    const std::size_t n = s.size();
    if (plan.fold.size() != n || plan.half.size() != n) {
        throw error(errc::dimension_mismatch, "fold plan does not match the sample count");
    }
    rows_t order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto less = [&](std::size_t a, std::size_t b) {
        const auto ia = static_cast<Eigen::Index>(a);
        const auto ib = static_cast<Eigen::Index>(b);
        if (s.y[ia] != s.y[ib]) return s.y[ia] < s.y[ib];
        if (s.l[ia] != s.l[ib]) return s.l[ia] < s.l[ib];
        for (Eigen::Index c = 0; c < s.w.cols(); ++c) {
            if (s.w(ia, c) != s.w(ib, c)) return s.w(ia, c) < s.w(ib, c);
        }
        return false;
    };
    std::stable_sort(order.begin(), order.end(), less);
    partition p;
    p.folds.resize(static_cast<std::size_t>(plan.k));
    p.halves.resize(static_cast<std::size_t>(plan.k));
    for (std::size_t i : order) {
        const int f = plan.fold[i];
        if (f < 0 || f >= plan.k) throw error(errc::invalid_argument, "fold label out of range");
        p.folds[static_cast<std::size_t>(f)].push_back(i);
        p.halves[static_cast<std::size_t>(f)][plan.half[i] == 0 ? 0 : 1].push_back(i);
    }
    return p;
}

rows_t all_but(const partition& p, std::size_t k) {
    rows_t out;
    for (std::size_t j = 0; j < p.folds.size(); ++j) {
        if (j != k) out.insert(out.end(), p.folds[j].begin(), p.folds[j].end());
    }
    return out;
}

rows_t all_rows(const partition& p) { return all_but(p, p.folds.size()); }

effect_estimate finalize(double estimate, double variance, std::size_t n, double alpha, std::string method,
                         std::vector<std::string> warnings = {}) {
    effect_estimate e;
    if (!std::isfinite(estimate) || !std::isfinite(variance)) {
        throw error(errc::invalid_argument, method + " produced a non-finite estimate");
    }
    if (variance < 0.0) {
        warnings.push_back("negative variance estimate floored at 0");
        variance = 0.0;
    }
    e.estimate = estimate;
    e.variance = variance;
    e.n = n;
    e.n_used = n;
    e.alpha = alpha;
    e.std_error = std::sqrt(variance / static_cast<double>(n));
    std::tie(e.ci_low, e.ci_high) = confidence_interval(estimate, variance, n, alpha);
    e.p_value = p_value(estimate, variance, n);
    e.method = std::move(method);
    e.warnings = std::move(warnings);
    return e;
}

void check_config(const estimator_config& cfg) {
    if (cfg.crossfit && cfg.folds < 2) throw error(errc::invalid_argument, "cross-fitting needs at least 2 folds");
    if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) throw error(errc::invalid_argument, "alpha must lie in (0, 1)");
}

fold_plan effective_plan(const sample_set& s, const estimator_config& cfg, const fold_plan& plan) {
    if (cfg.crossfit) return plan;
    fold_plan one;
    one.k = 1;
    one.fold.assign(s.size(), 0);
    one.half = plan.half.size() == s.size() ? plan.half : std::vector<int>(s.size(), 0);
    return one;
}

double clip(double p, double c) { return std::clamp(p, c, 1.0 - c); }

}  // namespace

std::size_t sample_set::n_zero_speed() const {
    return static_cast<std::size_t>(std::count(zero_speed.begin(), zero_speed.end(), char{1}));
}

sample_set sample_set::subset(const std::vector<std::size_t>& rows) const {
    sample_set out;
    out.y = take(y, rows);
    out.l = take(l, rows);
    out.w = take_rows(w, rows);
    out.binary = binary;
    out.zero_speed.reserve(rows.size());
    for (std::size_t r : rows) out.zero_speed.push_back(zero_speed[r]);
    return out;
}

sample_set sample_set::nonzero_speed() const {
    rows_t keep;
    for (std::size_t i = 0; i < size(); ++i) {
        if (!zero_speed[i]) keep.push_back(i);
    }
    return subset(keep);
}

sample_set make_samples(const Eigen::VectorXd& y, const Eigen::VectorXd& l, const Eigen::MatrixXd& w, bool binary) {
    if (y.size() != l.size() || w.rows() != y.size()) throw error(errc::dimension_mismatch, "y, l, w differ in length");
    sample_set s;
    s.y = y;
    s.l = l;
    s.w = w;
    s.binary = binary;
    s.zero_speed.assign(static_cast<std::size_t>(y.size()), 0);
    if (binary) {
        for (Eigen::Index i = 0; i < l.size(); ++i) {
            if (l[i] != 0.0 && l[i] != 1.0) throw error(errc::invalid_argument, "binary l must be 0 or 1");
        }
    }
    return s;
}

sample_set reparametrize_samples(const effect_spec& spec, const std::vector<composition>& z, const Eigen::VectorXd& y,
                                 const Eigen::MatrixXd* adjust) {
    const auto n = z.size();
    if (static_cast<std::size_t>(y.size()) != n) throw error(errc::dimension_mismatch, "y and Z differ in length");
    if (adjust && static_cast<std::size_t>(adjust->rows()) != n) {
        throw error(errc::dimension_mismatch, "adjustment covariates differ in length");
    }
    if (n == 0) throw error(errc::empty_data, "no rows");
    const std::size_t d = z.front().dim();
    spec.validate(d);
    sample_set s;
    s.binary = spec.is_binary();
    s.y = y;
    s.l = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    s.zero_speed.assign(n, 0);
    std::vector<std::vector<double>> feats(n);
    std::size_t p = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (z[i].dim() != d) throw error(errc::dimension_mismatch, "compositions differ in dimension");
        if (!s.binary && is_zero_speed(spec, z[i])) {
            s.zero_speed[i] = 1;
            if (spec.kind == effect_kind::cfi_mult) ++s.n_l_undefined;
            continue;
        }
        const reparam r = reparametrize(spec, z[i]);
        s.l[static_cast<Eigen::Index>(i)] =
            s.binary ? std::get<binary_reparam>(r).l : std::get<directional_reparam>(r).l;
        feats[i] = w_features(spec, r);
        p = feats[i].size();
    }
    if (p == 0) p = spec.kind == effect_kind::cai_unit || spec.kind == effect_kind::cai_mult ||
                            spec.kind == effect_kind::custom
                        ? 2 * d
                        : d;
    const Eigen::Index extra = adjust ? adjust->cols() : 0;
    s.w = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p) + extra);
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = static_cast<Eigen::Index>(i);
        for (std::size_t c = 0; c < feats[i].size(); ++c) s.w(row, static_cast<Eigen::Index>(c)) = feats[i][c];
        if (adjust) s.w.row(row).tail(extra) = adjust->row(row);
    }
    return s;
}

regression_method learner_regression(const std::string& learner_name, bool classification) {
    make_learner(learner_name);  // validates the name early
    return [learner_name, classification](const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::uint64_t seed) {
        std::shared_ptr<learner> m =
            make_learner(learner_name, seed, classification ? cv_loss::brier : cv_loss::squared_error);
        m->fit(x, y);
        return predictor([m, classification](const Eigen::MatrixXd& q) {
            return classification ? m->predict_proba(q) : m->predict(q);
        });
    };
}

forest_params default_smoothing_forest() { return forest_params{}; }

derivative_method smoothed_derivative(regression_method outcome, forest_params smoothing,
                                      smoothing_features features) {
    return [outcome, smoothing, features](const Eigen::VectorXd& l_train, const Eigen::MatrixXd& w_train,
                                const Eigen::VectorXd& y_train, const Eigen::VectorXd& l_eval,
                                const Eigen::MatrixXd& w_eval, std::uint64_t seed) {
        const predictor f = outcome(with_l(l_train, w_train), y_train, seed);
        // smoothing sees only training rows, so the result is a fixed function at the evaluation rows
        const Eigen::VectorXd fitted = f(with_l(l_train, w_train));
        forest_params p = smoothing;
        p.seed = rng(seed).split(99).next_u64();
        const smoothed_fit sm = smooth_with_forest_at(l_train, w_train, fitted, p, features, l_eval, w_eval);
        return value_and_slope{sm.values, sm.derivatives};
    };
}

score_method_fn location_scale_score(const std::string& learner_name, score_method method) {
    return [learner_name, method](const Eigen::VectorXd& l, const Eigen::MatrixXd& w, std::uint64_t seed) {
        const auto mean_proto = make_learner(learner_name, seed);
        const auto var_proto = make_learner(learner_name, seed);
        auto nuisance = std::make_shared<location_scale_nuisance>(
            fit_location_scale_nuisance(l, w, *mean_proto, *var_proto, seed));
        return score_stage([nuisance, method](const Eigen::VectorXd& l2, const Eigen::MatrixXd& w2) {
            auto model = std::make_shared<score_model>(fit_score_given_nuisance(*nuisance, l2, w2, method));
            return score_evaluator(
                [model](const Eigen::VectorXd& l3, const Eigen::MatrixXd& w3) { return model->evaluate(l3, w3); });
        });
    };
}

nuisance_methods learner_nuisances(const std::string& learner_name, score_method method, forest_params smoothing,
                                   smoothing_features features) {
    nuisance_methods m;
    m.outcome = learner_regression(learner_name);
    m.treatment = learner_regression(learner_name);
    m.propensity = learner_regression(learner_name, true);
    m.derivative = smoothed_derivative(m.outcome, smoothing, features);
    m.score = location_scale_score(learner_name, method);
    return m;
}

fold_plan make_fold_plan(std::size_t n, int k, std::uint64_t seed) {
    if (k < 1) throw error(errc::invalid_argument, "fold count must be positive");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng r(seed);
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[r.below(i)]);
    fold_plan plan;
    plan.k = k;
    plan.fold.resize(n);
    plan.half.resize(n);
    const auto kk = static_cast<std::size_t>(k);
    for (std::size_t i = 0; i < n; ++i) {
        plan.fold[order[i]] = static_cast<int>(i % kk);
        plan.half[order[i]] = static_cast<int>((i / kk) % 2);
    }
    return plan;
}

std::pair<double, double> confidence_interval(double estimate, double variance, std::size_t n, double alpha) {
    if (n < 1) throw error(errc::invalid_argument, "n must be positive");
    const double se = std::sqrt(std::max(variance, 0.0) / static_cast<double>(n));
    const double z = normal_quantile(1.0 - alpha / 2.0);
    return {estimate - z * se, estimate + z * se};
}

double p_value(double estimate, double variance, std::size_t n) {
    if (n < 1) throw error(errc::invalid_argument, "n must be positive");
    const double se = std::sqrt(std::max(variance, 0.0) / static_cast<double>(n));
    if (se == 0.0) return estimate == 0.0 ? 1.0 : 0.0;
    return std::clamp(2.0 * (1.0 - normal_cdf(std::abs(estimate) / se)), 0.0, 1.0);
}

effect_estimate estimate_tau_np(const sample_set& s, const estimator_config& cfg) {
    return estimate_tau_np(s, cfg, make_fold_plan(s.size(), cfg.folds, cfg.seed));
}

effect_estimate estimate_tau_np(const sample_set& s, const estimator_config& cfg, const fold_plan& plan) {
    check_config(cfg);
    if (s.binary) throw error(errc::invalid_argument, "the tau estimator needs a continuous l");
    const fold_plan fp = effective_plan(s, cfg, plan);
    if (s.size() < 4 * static_cast<std::size_t>(fp.k) || s.size() < 20) {
        throw error(errc::insufficient_data, "too few rows for the tau estimator");
    }
    const partition part = canonical_partition(s, fp);
    const auto& nm = cfg.nuisances;
    std::vector<Eigen::Index> pos_of(s.size(), -1);
    double tau_sum = 0.0;
    double nu_sum = 0.0;
    int pieces = 0;
    for (std::size_t k = 0; k < part.folds.size(); ++k) {
        const int fk = static_cast<int>(k);
        const rows_t train = cfg.crossfit ? all_but(part, k) : all_rows(part);
        const rows_t& eval = part.folds[k];
        const Eigen::VectorXd l_tr = take(s.l, train);
        const Eigen::MatrixXd w_tr = take_rows(s.w, train);
        const Eigen::VectorXd l_ev = take(s.l, eval);
        const Eigen::MatrixXd w_ev = take_rows(s.w, eval);
        const Eigen::VectorXd y_ev = take(s.y, eval);
        const value_and_slope f =
            nm.derivative(l_tr, w_tr, take(s.y, train), l_ev, w_ev, seed_for(cfg.seed, fk, role_derivative));
        const score_stage stage = nm.score(l_tr, w_tr, seed_for(cfg.seed, fk, role_score));
        for (std::size_t i = 0; i < eval.size(); ++i) pos_of[eval[i]] = static_cast<Eigen::Index>(i);
        auto piece = [&](const rows_t& target, const rows_t& score_rows) {
            const score_evaluator rho = stage(take(s.l, score_rows), take_rows(s.w, score_rows));
            const Eigen::VectorXd r = rho(take(s.l, target), take_rows(s.w, target));
            double t = 0.0;
            double nu = 0.0;
            for (std::size_t i = 0; i < target.size(); ++i) {
                const Eigen::Index q = pos_of[target[i]];
                const double psi = f.slope[q] - r[static_cast<Eigen::Index>(i)] * (y_ev[q] - f.value[q]);
                t += psi;
                nu += psi * psi;
            }
            tau_sum += t / static_cast<double>(target.size());
            nu_sum += nu / static_cast<double>(target.size());
            ++pieces;
        };
        if (cfg.crossfit) {
            if (part.halves[k][0].empty() || part.halves[k][1].empty()) {
                throw error(errc::insufficient_data, "a fold half is empty");
            }
            piece(part.halves[k][0], part.halves[k][1]);
            piece(part.halves[k][1], part.halves[k][0]);
        } else {
            piece(eval, eval);
        }
    }
    const double tau = tau_sum / pieces;
    return finalize(tau, nu_sum / pieces - tau * tau, s.size(), cfg.alpha, cfg.crossfit ? "npm" : "npm_no_crossfit");
}

namespace {

// Summands f(1, W) - Y and the propensity-weighted residual term, per fold, in canonical order.
struct lambda_parts {
    std::vector<Eigen::VectorXd> base;
    std::vector<Eigen::VectorXd> correction;
    std::size_t n_clipped = 0;
};

lambda_parts lambda_terms(const sample_set& s, const estimator_config& cfg, const partition& part, bool with_pi) {
    const auto& nm = cfg.nuisances;
    lambda_parts out;
    for (std::size_t k = 0; k < part.folds.size(); ++k) {
        const int fk = static_cast<int>(k);
        const rows_t train = cfg.crossfit ? all_but(part, k) : all_rows(part);
        const rows_t& eval = part.folds[k];
        const Eigen::MatrixXd w_tr = take_rows(s.w, train);
        const Eigen::VectorXd l_tr = take(s.l, train);
        const predictor f = nm.outcome(with_l(l_tr, w_tr), take(s.y, train), seed_for(cfg.seed, fk, role_outcome));
        const Eigen::MatrixXd w_ev = take_rows(s.w, eval);
        const Eigen::VectorXd l_ev = take(s.l, eval);
        const Eigen::VectorXd y_ev = take(s.y, eval);
        const Eigen::VectorXd f1 = f(with_l(Eigen::VectorXd::Ones(l_ev.size()), w_ev));
        out.base.push_back(f1 - y_ev);
        Eigen::VectorXd corr = Eigen::VectorXd::Zero(l_ev.size());
        if (with_pi) {
            const predictor pi = nm.propensity(w_tr, l_tr, seed_for(cfg.seed, fk, role_treatment));
            const Eigen::VectorXd fl = f(with_l(l_ev, w_ev));
            const Eigen::VectorXd p = pi(w_ev);
            for (Eigen::Index i = 0; i < p.size(); ++i) {
                const double pc = clip(p[i], cfg.propensity_clip);
                if (pc != p[i]) ++out.n_clipped;
                corr[i] = (y_ev[i] - fl[i]) / pc * l_ev[i];
            }
        }
        out.correction.push_back(corr);
    }
    return out;
}

effect_estimate lambda_from_parts(const sample_set& s, const estimator_config& cfg, const lambda_parts& parts,
                                  std::string method) {
    const double p_hat = (1.0 - s.l.array()).mean();
    const std::size_t k = parts.base.size();
    double kappa = 0.0;
    double nu = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
        const Eigen::VectorXd t = parts.base[j] + parts.correction[j];
        kappa += t.mean();
        nu += t.squaredNorm() / static_cast<double>(t.size());
    }
    kappa /= static_cast<double>(k);
    nu /= static_cast<double>(k);
    const double lambda = kappa / p_hat;
    const double var = (nu - kappa * kappa) / (p_hat * p_hat) - kappa * kappa * (1.0 - p_hat) / (p_hat * p_hat * p_hat);
    effect_estimate e = finalize(lambda, var, s.size(), cfg.alpha, std::move(method));
    e.n_clipped = parts.n_clipped;
    if (parts.n_clipped > 0) e.warnings.push_back(std::to_string(parts.n_clipped) + " propensities clipped");
    return e;
}

void check_binary(const sample_set& s, std::size_t min_rows) {
    if (!s.binary) throw error(errc::invalid_argument, "the lambda estimator needs a binary l");
    if (s.size() < min_rows) throw error(errc::insufficient_data, "too few rows for the lambda estimator");
    const double ones = s.l.sum();
    if (ones >= static_cast<double>(s.size())) throw error(errc::no_untreated, "every row already has l = 1");
    if (ones <= 0.0) throw error(errc::insufficient_data, "no row has l = 1");
}

}  // namespace

effect_estimate estimate_lambda_np(const sample_set& s, const estimator_config& cfg) {
    return estimate_lambda_np(s, cfg, make_fold_plan(s.size(), cfg.folds, cfg.seed));
}

effect_estimate estimate_lambda_np(const sample_set& s, const estimator_config& cfg, const fold_plan& plan) {
    check_config(cfg);
    const fold_plan fp = effective_plan(s, cfg, plan);
    check_binary(s, 2 * static_cast<std::size_t>(fp.k));
    const partition part = canonical_partition(s, fp);
    return lambda_from_parts(s, cfg, lambda_terms(s, cfg, part, true), cfg.crossfit ? "npm" : "npm_no_crossfit");
}

effect_estimate estimate_theta_plm(const sample_set& s, const estimator_config& cfg) {
    return estimate_theta_plm(s, cfg, make_fold_plan(s.size(), cfg.folds, cfg.seed));
}

effect_estimate estimate_theta_plm(const sample_set& s, const estimator_config& cfg, const fold_plan& plan) {
    check_config(cfg);
    const fold_plan fp = effective_plan(s, cfg, plan);
    if (s.size() < 2 * static_cast<std::size_t>(fp.k)) throw error(errc::insufficient_data, "too few rows for PLM");
    const partition part = canonical_partition(s, fp);
    const auto& nm = cfg.nuisances;
    const std::size_t k = part.folds.size();
    std::vector<Eigen::VectorXd> ry(k);
    std::vector<Eigen::VectorXd> rl(k);
    double j_sum = 0.0;
    double kappa_sum = 0.0;
    for (std::size_t f = 0; f < k; ++f) {
        const int fk = static_cast<int>(f);
        const rows_t train = cfg.crossfit ? all_but(part, f) : all_rows(part);
        const rows_t& eval = part.folds[f];
        const Eigen::MatrixXd w_tr = take_rows(s.w, train);
        const predictor g = nm.outcome(w_tr, take(s.y, train), seed_for(cfg.seed, fk, role_outcome));
        const regression_method& lm = s.binary ? nm.propensity : nm.treatment;
        const predictor m = lm(w_tr, take(s.l, train), seed_for(cfg.seed, fk, role_treatment));
        const Eigen::MatrixXd w_ev = take_rows(s.w, eval);
        ry[f] = take(s.y, eval) - g(w_ev);
        rl[f] = take(s.l, eval) - m(w_ev);
        j_sum += rl[f].squaredNorm() / static_cast<double>(eval.size());
        kappa_sum += ry[f].dot(rl[f]) / static_cast<double>(eval.size());
    }
    const double j_hat = j_sum / static_cast<double>(k);
    if (j_hat < 1e-10) throw error(errc::degenerate_j, "l is (almost) fully explained by w");
    const double theta = kappa_sum / static_cast<double>(k) / j_hat;
    double nu_sum = 0.0;
    for (std::size_t f = 0; f < k; ++f) {
        const Eigen::ArrayXd t = ry[f].array() * rl[f].array() - theta * rl[f].array().square();
        nu_sum += t.square().mean();
    }
    const double var = nu_sum / static_cast<double>(k) / (j_hat * j_hat);
    return finalize(theta, var, s.size(), cfg.alpha, cfg.crossfit ? "plm" : "plm_no_crossfit");
}

effect_estimate estimate_plugin(const sample_set& s, const estimator_config& cfg, plugin_target target) {
    return estimate_plugin(s, cfg, target, make_fold_plan(s.size(), cfg.folds, cfg.seed));
}

effect_estimate estimate_plugin(const sample_set& s, const estimator_config& cfg, plugin_target target,
                                const fold_plan& plan) {
    check_config(cfg);
    const fold_plan fp = effective_plan(s, cfg, plan);
    const std::string method = cfg.crossfit ? "plugin" : "plugin_no_crossfit";
    if (target == plugin_target::lambda) {
        check_binary(s, 2 * static_cast<std::size_t>(fp.k));
        const partition part = canonical_partition(s, fp);
        return lambda_from_parts(s, cfg, lambda_terms(s, cfg, part, false), method);
    }
    if (s.binary) throw error(errc::invalid_argument, "the tau plug-in needs a continuous l");
    if (s.size() < 2 * static_cast<std::size_t>(fp.k)) throw error(errc::insufficient_data, "too few rows");
    const partition part = canonical_partition(s, fp);
    const auto& nm = cfg.nuisances;
    double sum = 0.0;
    double sq = 0.0;
    for (std::size_t k = 0; k < part.folds.size(); ++k) {
        const rows_t train = cfg.crossfit ? all_but(part, k) : all_rows(part);
        const rows_t& eval = part.folds[k];
        const value_and_slope f =
            nm.derivative(take(s.l, train), take_rows(s.w, train), take(s.y, train), take(s.l, eval),
                          take_rows(s.w, eval), seed_for(cfg.seed, static_cast<int>(k), role_derivative));
        sum += f.slope.sum();
        sq += f.slope.squaredNorm();
    }
    const double n = static_cast<double>(s.size());
    const double tau = sum / n;
    return finalize(tau, sq / n - tau * tau, s.size(), cfg.alpha, method);
}

effect_estimate with_zero_speed_correction(const effect_estimate& inner, double p_hat, std::size_t n_total) {
    if (!(p_hat >= 0.0 && p_hat <= 1.0)) throw error(errc::invalid_argument, "p_hat must lie in [0, 1]");
    const double est = inner.estimate * p_hat;
    const double var = p_hat * inner.variance + inner.estimate * inner.estimate * p_hat * (1.0 - p_hat);
    effect_estimate e = finalize(est, var, std::max<std::size_t>(n_total, 1), inner.alpha, inner.method, inner.warnings);
    e.n_used = inner.n_used;
    e.n_zero_speed = n_total >= inner.n_used ? n_total - inner.n_used : 0;
    e.n_clipped = inner.n_clipped;
    return e;
}

effect_estimate estimate_marginal_ols(const Eigen::VectorXd& y, const Eigen::VectorXd& l, double alpha) {
    const Eigen::Index n = y.size();
    if (l.size() != n) throw error(errc::dimension_mismatch, "y and l differ in length");
    if (n < 3) throw error(errc::insufficient_data, "OLS needs at least 3 rows");
    const Eigen::ArrayXd lc = l.array() - l.mean();
    const Eigen::ArrayXd yc = y.array() - y.mean();
    const double sxx = lc.square().sum();
    if (!(sxx > 1e-14 * static_cast<double>(n) * std::max(1.0, l.array().square().mean()))) {
        throw error(errc::constant_regressor, "l is constant");
    }
    const double slope = (lc * yc).sum() / sxx;
    const Eigen::ArrayXd resid = yc - slope * lc;
    const double nd = static_cast<double>(n);
    const double hc1 = nd / (nd - 2.0) * (lc.square() * resid.square()).sum() / (sxx * sxx);
    return finalize(slope, hc1 * nd, static_cast<std::size_t>(n), alpha, "ols_marginal");
}

effect_estimate estimate_mean_difference(const Eigen::VectorXd& y, const Eigen::VectorXd& l, double alpha) {
    if (l.size() != y.size()) throw error(errc::dimension_mismatch, "y and l differ in length");
    double s1 = 0.0, s0 = 0.0, q1 = 0.0, q0 = 0.0, n1 = 0.0, n0 = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        if (l[i] != 0.0) {
            s1 += y[i];
            q1 += y[i] * y[i];
            n1 += 1.0;
        } else {
            s0 += y[i];
            q0 += y[i] * y[i];
            n0 += 1.0;
        }
    }
    if (n1 < 2.0 || n0 < 2.0) throw error(errc::insufficient_data, "each group needs at least 2 rows");
    const double m1 = s1 / n1;
    const double m0 = s0 / n0;
    const double v1 = (q1 - n1 * m1 * m1) / (n1 - 1.0);
    const double v0 = (q0 - n0 * m0 * m0) / (n0 - 1.0);
    const double n = n1 + n0;
    return finalize(m1 - m0, n * (v1 / n1 + v0 / n0), static_cast<std::size_t>(n), alpha, "mean_difference");
}

const std::vector<std::string>& estimator_names() {
    static const std::vector<std::string> names{"npm",    "npm_no_crossfit",    "plm",         "plm_no_crossfit",
                                                "plugin", "plugin_no_crossfit", "ols_marginal"};
    return names;
}

effect_estimate estimate(const std::string& method, const sample_set& s, const estimator_config& cfg) {
    if (std::find(estimator_names().begin(), estimator_names().end(), method) == estimator_names().end()) {
        throw error(errc::invalid_argument, "unknown estimator '" + method + "'");
    }
    const bool no_x = method.ends_with("_no_crossfit");
    estimator_config c = cfg;
    c.crossfit = !no_x;
    const std::size_t n_total = s.size();
    const sample_set used = s.binary ? s : s.nonzero_speed();
    const std::size_t n_zero = n_total - used.size();
    if (method == "ols_marginal") {
        effect_estimate e = estimate_marginal_ols(used.y, used.l, c.alpha);
        e.n_zero_speed = n_zero;
        return e;
    }
    if (used.size() == 0) {
        effect_estimate e = finalize(0.0, 0.0, std::max<std::size_t>(n_total, 1), c.alpha, method,
                                     {"every row has zero speed"});
        e.n_used = 0;
        e.n_zero_speed = n_zero;
        return e;
    }
    effect_estimate inner;
    if (method.starts_with("npm")) {
        inner = used.binary ? estimate_lambda_np(used, c) : estimate_tau_np(used, c);
    } else if (method.starts_with("plm")) {
        inner = estimate_theta_plm(used, c);
    } else {
        inner = estimate_plugin(used, c, used.binary ? plugin_target::lambda : plugin_target::tau);
    }
    if (n_zero == 0) return inner;
    const double p_hat = static_cast<double>(used.size()) / static_cast<double>(n_total);
    return with_zero_speed_correction(inner, p_hat, n_total);
}

}  // namespace copert
