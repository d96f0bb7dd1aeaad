#include <benchmark/benchmark.h>

#include "copert/estimators.hpp"
#include "copert/forest.hpp"
#include "copert/simulation.hpp"
#include "copert/smoothing.hpp"

namespace {

using namespace copert;

Eigen::MatrixXd random_features(Eigen::Index n, Eigen::Index p, std::uint64_t seed) {
    rng r(seed);
    Eigen::MatrixXd x(n, p);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < p; ++j) x(i, j) = r.uniform();
    }
    return x;
}

Eigen::VectorXd signal(const Eigen::MatrixXd& x, std::uint64_t seed) {
    rng r(seed);
    Eigen::VectorXd y(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) y[i] = std::sin(6.0 * x(i, 0)) + x(i, 1) + 0.3 * r.normal();
    return y;
}

void bm_forest_fit(benchmark::State& state) {
    const auto n = static_cast<Eigen::Index>(state.range(0));
    const Eigen::MatrixXd x = random_features(n, 3, 1);
    const Eigen::VectorXd y = signal(x, 2);
    forest_params p;
    for (auto _ : state) benchmark::DoNotOptimize(fit_forest(x, y, p));
}
BENCHMARK(bm_forest_fit)->Arg(250)->Arg(500)->Arg(1000)->Unit(benchmark::kMillisecond);

void bm_forest_weights(benchmark::State& state) {
    const auto n = static_cast<Eigen::Index>(state.range(0));
    const Eigen::MatrixXd x = random_features(n, 3, 1);
    const forest_model m = fit_forest(x, signal(x, 2), forest_params{});
    for (auto _ : state) benchmark::DoNotOptimize(forest_weights(m, x));
}
BENCHMARK(bm_forest_weights)->Arg(500)->Arg(1000)->Unit(benchmark::kMillisecond);

void bm_local_poly(benchmark::State& state) {
    const auto n = static_cast<Eigen::Index>(state.range(0));
    const Eigen::MatrixXd x = random_features(n, 3, 1);
    const Eigen::VectorXd y = signal(x, 2);
    const Eigen::MatrixXd w = forest_weights(fit_forest(x, y, forest_params{}), x);
    const Eigen::VectorXd l = x.col(0);
    for (auto _ : state) benchmark::DoNotOptimize(smooth_local_poly(l, y, w));
}
BENCHMARK(bm_local_poly)->Arg(500)->Arg(1000)->Unit(benchmark::kMillisecond);

void bm_plm(benchmark::State& state) {
    const sim_data data = generate({"cont_plm", static_cast<std::size_t>(state.range(0)), 3, 7});
    estimator_config cfg;
    for (auto _ : state) benchmark::DoNotOptimize(estimate_theta_plm(data.samples, cfg));
}
BENCHMARK(bm_plm)->Arg(1000)->Unit(benchmark::kMillisecond);

void bm_npm(benchmark::State& state) {
    const sim_data data = generate({"cont_plm", static_cast<std::size_t>(state.range(0)), 3, 7});
    estimator_config cfg;
    for (auto _ : state) benchmark::DoNotOptimize(estimate_tau_np(data.samples, cfg));
}
BENCHMARK(bm_npm)->Arg(1000)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
