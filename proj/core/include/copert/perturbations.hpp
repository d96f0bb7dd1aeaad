#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "copert/simplex.hpp"

namespace copert {

enum class effect_kind {
    cfi_unit,
    cfi_mult,
    cke,
    cdi_unit,
    cdi_gini,
    cai_unit,
    cai_mult,
    cae,
    clr_diversity,
    custom,
};

using endpoint_fn = std::function<composition(const composition&)>;
using scalar_fn = std::function<double(const composition&)>;

enum class speed_mode { given_speed, summary_statistic };

struct effect_spec {
    effect_kind kind = effect_kind::cdi_unit;
    std::size_t j = 0;  // 1-based target for cfi_* and cke
    index_set a;
    index_set b;

    // custom only
    endpoint_fn endpoint;
    speed_mode mode = speed_mode::given_speed;
    scalar_fn speed;      // given_speed
    scalar_fn statistic;  // summary_statistic
    double anchor = 1.0;  // t_w(anchor) = 0 for given_speed

    static effect_spec cfi_unit(std::size_t j);
    static effect_spec cfi_mult(std::size_t j);
    static effect_spec cke(std::size_t j);
    static effect_spec cdi_unit();
    static effect_spec cdi_gini();
    static effect_spec cai_unit(index_set a, index_set b);
    static effect_spec cai_mult(index_set a, index_set b);
    static effect_spec cae(index_set a, index_set b);
    static effect_spec clr_diversity();
    static effect_spec custom_speed(endpoint_fn e, scalar_fn speed, double anchor = 1.0);
    static effect_spec custom_statistic(endpoint_fn e, scalar_fn statistic);

    bool is_binary() const { return kind == effect_kind::cke || kind == effect_kind::cae; }
    void validate(std::size_t d) const;
};

// Canonical text form, e.g. "cfi_mult:3", "cai_mult:A=1,2;B=5", "cdi_gini".
effect_spec parse_effect_spec(const std::string& text);
std::string to_string(const effect_spec& spec);

struct directional_reparam {
    double l = 0.0;
    composition w_endpoint = composition::center(2);
    std::vector<double> w_direction;
};

struct binary_reparam {
    int l = 0;
    composition w = composition::center(2);
};

using reparam = std::variant<directional_reparam, binary_reparam>;

composition endpoint(const effect_spec& spec, const composition& z);
std::vector<double> direction(const effect_spec& spec, const composition& z);
double speed(const effect_spec& spec, const composition& z);
composition apply(const effect_spec& spec, const composition& z, double gamma);
std::vector<double> omega(const effect_spec& spec, const composition& z);
bool is_zero_speed(const effect_spec& spec, const composition& z);

reparam reparametrize(const effect_spec& spec, const composition& z);
directional_reparam reparametrize_directional(const effect_spec& spec, const composition& z);
binary_reparam reparametrize_binary(const effect_spec& spec, const composition& z);
composition inverse_reparametrize(const effect_spec& spec, double l, const directional_reparam& w);
composition inverse_reparametrize(const effect_spec& spec, double l, const composition& w_endpoint,
                                  const std::vector<double>& w_direction);

std::vector<double> clr(const composition& z);
composition clr_inverse(const std::vector<double>& x);
directional_reparam clr_diversity_reparam(const composition& z);
// The Aitchison diversity perturbation: clr(psi(z, g)) = (1 - g) clr(z).
composition aitchison_apply(const composition& z, double gamma);
std::vector<double> aitchison_omega(const composition& z);

// Generic constructions from a speed function or from a decreasing summary statistic.
directional_reparam reparam_from_speed(const endpoint_fn& e, const scalar_fn& speed_fn, const composition& z,
                                       double anchor = 1.0);
composition inverse_from_speed(const scalar_fn& speed_fn, double l, const composition& w_endpoint,
                               const std::vector<double>& w_direction, double anchor = 1.0);

struct statistic_reparam {
    directional_reparam reparam;
    double implied_speed = 0.0;
};
statistic_reparam reparam_from_statistic(const endpoint_fn& e, const scalar_fn& statistic_fn,
                                         const composition& z);
composition inverse_from_statistic(const scalar_fn& statistic_fn, double l, const composition& w_endpoint,
                                   const std::vector<double>& w_direction);

// Largest u with w_endpoint - u * w_direction still on the simplex.
double ray_length(const composition& w_endpoint, const std::vector<double>& w_direction);

// Flat regression features for W.
std::vector<double> w_features(const effect_spec& spec, const reparam& r);

}  // namespace copert
