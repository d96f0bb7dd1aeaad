#pragma once

#include <stdexcept>
#include <string>

namespace copert {

enum class errc {
    all_zero,
    negative_entry,
    not_normalized,
    dimension_mismatch,
    invalid_index,
    empty_subcomposition_b,
    overlapping_sets,
    at_endpoint,
    out_of_domain,
    log_of_zero,
    out_of_image,
    zero_coordinate,
    non_positive_speed,
    not_decreasing,
    invalid_spec,
    empty_data,
    singular_system,
    empty_candidates,
    not_fitted,
    insufficient_data,
    no_untreated,
    degenerate_j,
    degenerate_variance,
    constant_regressor,
    invalid_argument,
    parse_error,
};

const char* errc_name(errc code);

class error : public std::runtime_error {
public:
    error(errc code, const std::string& what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

    errc code() const noexcept { return code_; }

private:
    errc code_;
};

}  // namespace copert
