#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "copert/estimators.hpp"
#include "copert/perturbations.hpp"
#include "copert/rng.hpp"
#include "copert/simplex.hpp"

namespace copert {

struct sim_setting {
    std::string name;  // binary_plm, binary_np, cont_plm, cont_np, microbe_toy, diversity_toy
    std::size_t n = 1000;
    std::size_t d = 3;
    std::uint64_t seed = 0;
};

const std::vector<std::string>& sim_setting_names();
void validate(const sim_setting& s);

struct sim_data {
    sim_setting setting;
    sample_set samples;          // (Y, L, W) ready for estimation
    std::vector<composition> z;  // toy settings only
    effect_spec effect;          // toy settings only: cke:1 or cdi_gini
    double truth = 1.0;
};

std::vector<composition> sample_uniform_simplex(std::size_t n, std::size_t dim, rng& r);

// Beta(1, d - 2) median and variance of the first coordinate of a uniform point on the (d-2)-simplex.
double w1_median(std::size_t d);
double w1_variance(std::size_t d);

sim_data generate(const sim_setting& setting);

struct coverage_row {
    std::string setting;
    std::string estimator;
    std::size_t n = 0;
    std::size_t d = 0;
    int reps = 0;
    double coverage = 0.0;
    double mean_estimate = 0.0;
    double mean_ci_width = 0.0;
    int failures = 0;
};

struct coverage_report {
    std::vector<coverage_row> rows;
    std::string to_csv() const;
    const coverage_row& find(const std::string& setting, const std::string& estimator, std::size_t d = 0) const;
};

// Returns the estimate for one generated dataset; the default runs the named estimator.
using sim_estimator = std::function<effect_estimate(const sim_data& data, const std::string& estimator,
                                                    const estimator_config& cfg)>;

std::uint64_t rep_seed(std::uint64_t base_seed, int rep);

coverage_report run_coverage(const std::vector<sim_setting>& settings, const std::vector<std::string>& estimators,
                             int reps, std::uint64_t base_seed, const estimator_config& cfg = {},
                             const sim_estimator& est = {});

}  // namespace copert
