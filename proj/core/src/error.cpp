#include "copert/error.hpp"

namespace copert {

const char* errc_name(errc code) {
    switch (code) {
        case errc::all_zero: return "AllZero";
        case errc::negative_entry: return "NegativeEntry";
        case errc::not_normalized: return "NotNormalized";
        case errc::dimension_mismatch: return "DimensionMismatch";
        case errc::invalid_index: return "InvalidIndex";
        case errc::empty_subcomposition_b: return "EmptySubcompositionB";
        case errc::overlapping_sets: return "OverlappingSets";
        case errc::at_endpoint: return "AtEndpoint";
        case errc::out_of_domain: return "OutOfDomain";
        case errc::log_of_zero: return "LogOfZero";
        case errc::out_of_image: return "OutOfImage";
        case errc::zero_coordinate: return "ZeroCoordinate";
        case errc::non_positive_speed: return "NonPositiveSpeed";
        case errc::not_decreasing: return "NotDecreasing";
        case errc::invalid_spec: return "InvalidSpec";
        case errc::empty_data: return "EmptyData";
        case errc::singular_system: return "SingularSystem";
        case errc::empty_candidates: return "EmptyCandidates";
        case errc::not_fitted: return "NotFitted";
        case errc::insufficient_data: return "InsufficientData";
        case errc::no_untreated: return "NoUntreated";
        case errc::degenerate_j: return "DegenerateJ";
        case errc::degenerate_variance: return "DegenerateVariance";
        case errc::constant_regressor: return "ConstantRegressor";
        case errc::invalid_argument: return "InvalidArgument";
        case errc::parse_error: return "ParseError";
    }
    return "Unknown";
}

}  // namespace copert
