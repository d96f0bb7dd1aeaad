#include <doctest.h>

#include <cmath>
#include <functional>

#include "copert/error.hpp"
#include "copert/learners.hpp"
#include "copert/rng.hpp"
#include "copert/score.hpp"

using namespace copert;

namespace {

// Predicts a fixed function of the first feature; fit is a no-op.
class frozen_learner : public learner {
public:
    explicit frozen_learner(std::function<double(double)> f) : f_(std::move(f)) { fitted_ = true; }
    void fit(const Eigen::MatrixXd&, const Eigen::VectorXd&) override {}
    Eigen::VectorXd predict(const Eigen::MatrixXd& x) const override {
        Eigen::VectorXd out(x.rows());
        for (Eigen::Index i = 0; i < x.rows(); ++i) out[i] = f_(x(i, 0));
        return out;
    }
    std::unique_ptr<learner> clone() const override { return std::make_unique<frozen_learner>(f_); }
    std::string name() const override { return "frozen"; }

private:
    std::function<double(double)> f_;
};

Eigen::VectorXd draws(rng& r, Eigen::Index n, const std::function<double(rng&)>& draw) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = draw(r);
    return v;
}

double laplace(rng& r) { return r.bernoulli(0.5) ? r.exponential() : -r.exponential(); }

}  // namespace

TEST_SUITE("score") {
    TEST_CASE("gaussian residuals") {
        rng r(1);
        const Eigen::VectorXd x = draws(r, 5000, [](rng& g) { return g.normal(); });
        for (const auto m : {score_method::gaussian_kernel, score_method::penalized_spline}) {
            const auto rho = fit_univariate_score(x, m);
            for (double t = -2.0; t <= 2.0; t += 0.1) {
                INFO("method " << to_string(m) << " at " << t);
                CHECK(std::abs(rho(t) + t) < 0.2);
            }
        }
    }

    TEST_CASE("laplace residuals") {
        rng r(2);
        const Eigen::VectorXd x = draws(r, 5000, laplace);
        const auto rho = fit_univariate_score(x);
        for (double t = 0.55; t < 2.0; t += 0.05) {
            CHECK(std::abs(rho(t) + 1.0) < 0.3);
            CHECK(std::abs(rho(-t) - 1.0) < 0.3);
        }
    }

    TEST_CASE("the score has mean zero at the sample") {
        for (int t = 0; t < 5; ++t) {
            rng r(10 + t);
            const Eigen::Index n = 500 + 500 * t;
            const Eigen::VectorXd x = t % 2 ? draws(r, n, laplace) : draws(r, n, [](rng& g) { return g.normal(); });
            const auto rho = fit_univariate_score(x);
            double s = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) s += rho(x[i]);
            CHECK(std::abs(s / static_cast<double>(n)) < 3.0 / std::sqrt(static_cast<double>(n)));
        }
    }

    TEST_CASE("standardization equivariance") {
        rng r(3);
        const Eigen::VectorXd x = draws(r, 2000, [](rng& g) { return g.normal(); });
        const double a = 3.0, b = -1.5;
        const auto rho = fit_univariate_score(x);
        const auto rho_scaled = fit_univariate_score((a * x.array() + b).matrix());
        for (double t = -2.0; t <= 2.0; t += 0.25) {
            CHECK(std::abs(rho_scaled(a * t + b) - rho(t) / a) < 0.1);
            CHECK(rho_scaled(a * t + b) == doctest::Approx(rho(t) / a).epsilon(1e-8).scale(1e-8));
        }
    }

    TEST_CASE("continuity") {
        rng r(4);
        const Eigen::VectorXd x = draws(r, 1000, laplace);
        for (const auto m : {score_method::gaussian_kernel, score_method::penalized_spline}) {
            const auto rho = fit_univariate_score(x, m);
            const double h = 1e-6;
            for (double t = -6.0; t <= 6.0; t += 0.01) CHECK(std::abs(rho(t + h) - rho(t)) < 1e3 * h);
        }
    }

    TEST_CASE("location-scale model against the gaussian score") {
        rng r(5);
        const Eigen::Index n = 4000;
        Eigen::MatrixXd w(n, 2);
        Eigen::VectorXd l(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            w.row(i) << r.uniform(), r.uniform();
            l[i] = w(i, 0) + r.normal();
        }
        const auto model = fit_location_scale_score(l, w, ridge_learner(1e-6), mean_learner(),
                                                    score_method::gaussian_kernel, 6);
        double sse = 0.0;
        int count = 0;
        for (int t = 0; t < 400; ++t) {
            Eigen::RowVectorXd q(2);
            q << r.uniform(), r.uniform();
            const double lv = q[0] + 4.0 * r.uniform() - 2.0;
            const double e = model.evaluate(lv, q) + (lv - q[0]);
            sse += e * e;
            ++count;
        }
        CHECK(std::sqrt(sse / count) < 0.15);
    }

    TEST_CASE("mean zero with frozen true nuisances") {
        rng r(6);
        const Eigen::Index n = 4000;
        Eigen::MatrixXd w(n, 1);
        Eigen::VectorXd l(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            w(i, 0) = r.uniform();
            l[i] = 2.0 * w(i, 0) + (1.0 + w(i, 0)) * r.normal();
        }
        location_scale_nuisance truth{std::make_shared<frozen_learner>([](double v) { return 2.0 * v; }),
                                      std::make_shared<frozen_learner>([](double v) { return (1.0 + v) * (1.0 + v); })};
        const auto model = fit_score_given_nuisance(truth, l, w, score_method::gaussian_kernel);
        CHECK(std::abs(model.evaluate(l, w).mean()) < 0.05);
    }

    TEST_CASE("scale doubling halves the score") {
        rng r(7);
        const Eigen::Index n = 600;
        Eigen::MatrixXd w(n, 2);
        Eigen::VectorXd l(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            w.row(i) << r.uniform(), r.uniform();
            l[i] = w(i, 1) + r.normal();
        }
        const auto base = fit_location_scale_score(l, w, ridge_learner(), mean_learner(), score_method::gaussian_kernel, 8);
        const auto twice =
            fit_location_scale_score(2.0 * l, w, ridge_learner(), mean_learner(), score_method::gaussian_kernel, 8);
        const Eigen::VectorXd a = base.evaluate(l, w);
        const Eigen::VectorXd b = twice.evaluate(2.0 * l, w);
        for (Eigen::Index i = 0; i < n; ++i) CHECK(b[i] == doctest::Approx(0.5 * a[i]).epsilon(1e-8).scale(1e-8));
    }

    TEST_CASE("variance floor") {
        rng r(8);
        const Eigen::Index n = 100;
        Eigen::MatrixXd w(n, 1);
        Eigen::VectorXd l(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            w(i, 0) = r.uniform();
            l[i] = r.normal();
        }
        location_scale_nuisance flat{std::make_shared<frozen_learner>([](double) { return 0.0; }),
                                     std::make_shared<frozen_learner>([](double) { return 0.0; })};
        try {
            fit_score_given_nuisance(flat, l, w, score_method::gaussian_kernel);
            FAIL("expected degenerate_variance");
        } catch (const error& e) {
            CHECK(e.code() == errc::degenerate_variance);
        }
        const Eigen::VectorXd few = Eigen::VectorXd::LinSpaced(5, 0, 1);
        CHECK_THROWS_AS(fit_univariate_score(few), error);
        CHECK_THROWS_AS(fit_location_scale_score(few, Eigen::MatrixXd::Zero(5, 1), mean_learner(), mean_learner(),
                                                 score_method::gaussian_kernel, 1),
                        error);
    }

    TEST_CASE("method names") {
        CHECK(parse_score_method("gaussian_kernel") == score_method::gaussian_kernel);
        CHECK(parse_score_method("penalized_spline") == score_method::penalized_spline);
        CHECK(to_string(score_method::penalized_spline) == "penalized_spline");
        CHECK_THROWS_AS(parse_score_method("spline"), error);
    }
}
