#include "copert/perturbations.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "copert/error.hpp"
#include "copert/numerics.hpp"

namespace copert {

namespace {

constexpr double domain_tol = 1e-9;

// Builds a composition from a point that should lie on the simplex up to rounding.
composition on_simplex(std::vector<double> v, errc code) {
    for (double& x : v) {
        if (x < -domain_tol || x > 1.0 + domain_tol) {
            throw error(code, "point leaves the simplex (coordinate " + std::to_string(x) + ")");
        }
        x = std::clamp(x, 0.0, 1.0);
    }
    return closure(v);
}

std::vector<double> diff_normalized(const composition& e, const composition& z, double& delta) {
    delta = l1_distance(e, z);
    if (delta < zero_tol) throw error(errc::at_endpoint, "z equals its endpoint");
    std::vector<double> v(z.dim());
    for (std::size_t i = 0; i < z.dim(); ++i) v[i] = (e[i] - z[i]) / delta;
    return v;
}

composition ray_point(const composition& e, const std::vector<double>& v, double u) {
    std::vector<double> p(e.dim());
    for (std::size_t i = 0; i < e.dim(); ++i) p[i] = e[i] - u * v[i];
    return on_simplex(std::move(p), errc::out_of_image);
}

index_set complement(std::size_t j, std::size_t d) {
    std::vector<std::size_t> rest;
    for (std::size_t i = 1; i <= d; ++i) {
        if (i != j) rest.push_back(i);
    }
    return index_set(std::move(rest));
}

double norm2(const std::vector<double>& x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return std::sqrt(s);
}

double norm1(const std::vector<double>& x) {
    double s = 0.0;
    for (double v : x) s += std::abs(v);
    return s;
}

std::vector<double> clr_kind_omega(const composition& z) {
    const std::vector<double> c = clr(z);
    const double n2 = norm2(c);
    std::vector<double> w(z.dim(), 0.0);
    if (n2 < zero_tol) return w;
    double mean_u = 0.0;
    for (std::size_t k = 0; k < z.dim(); ++k) mean_u += z[k] * (-c[k] / n2);
    for (std::size_t k = 0; k < z.dim(); ++k) w[k] = z[k] * (-c[k] / n2 - mean_u);
    return w;
}

double anchor_for(double anchor, double dmax) { return anchor <= dmax ? anchor : 0.5 * dmax; }

double t_from_speed(const scalar_fn& speed_fn, const composition& e, const std::vector<double>& v, double ref,
                    double delta) {
    auto integrand = [&](double u) {
        const double s = speed_fn(ray_point(e, v, u));
        if (!(s > 1e-12)) throw error(errc::non_positive_speed, "speed vanishes on the integration path");
        return 1.0 / s;
    };
    return -integrate(integrand, ref, delta);
}

void require_directional(const effect_spec& spec) {
    if (spec.is_binary()) throw error(errc::invalid_spec, "operation requires a directional effect");
}

std::vector<std::size_t> parse_index_list(const std::string& s) {
    std::vector<std::size_t> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty() || tok.find_first_not_of("0123456789") != std::string::npos) {
            throw error(errc::invalid_spec, "bad index '" + tok + "'");
        }
        out.push_back(static_cast<std::size_t>(std::stoul(tok)));
    }
    if (out.empty()) throw error(errc::invalid_spec, "empty index list");
    return out;
}

std::string join(const index_set& s) {
    std::string out;
    for (std::size_t i : s.indices()) {
        if (!out.empty()) out += ',';
        out += std::to_string(i);
    }
    return out;
}

}  // namespace

effect_spec effect_spec::cfi_unit(std::size_t j) {
    effect_spec s;
    s.kind = effect_kind::cfi_unit;
    s.j = j;
    return s;
}

effect_spec effect_spec::cfi_mult(std::size_t j) {
    effect_spec s;
    s.kind = effect_kind::cfi_mult;
    s.j = j;
    return s;
}

effect_spec effect_spec::cke(std::size_t j) {
    effect_spec s;
    s.kind = effect_kind::cke;
    s.j = j;
    return s;
}

effect_spec effect_spec::cdi_unit() {
    effect_spec s;
    s.kind = effect_kind::cdi_unit;
    return s;
}

effect_spec effect_spec::cdi_gini() {
    effect_spec s;
    s.kind = effect_kind::cdi_gini;
    return s;
}

effect_spec effect_spec::cai_unit(index_set a, index_set b) {
    effect_spec s;
    s.kind = effect_kind::cai_unit;
    s.a = std::move(a);
    s.b = std::move(b);
    return s;
}

effect_spec effect_spec::cai_mult(index_set a, index_set b) {
    effect_spec s = cai_unit(std::move(a), std::move(b));
    s.kind = effect_kind::cai_mult;
    return s;
}

effect_spec effect_spec::cae(index_set a, index_set b) {
    effect_spec s = cai_unit(std::move(a), std::move(b));
    s.kind = effect_kind::cae;
    return s;
}

effect_spec effect_spec::clr_diversity() {
    effect_spec s;
    s.kind = effect_kind::clr_diversity;
    return s;
}

effect_spec effect_spec::custom_speed(endpoint_fn e, scalar_fn speed_fn, double anchor) {
    effect_spec s;
    s.kind = effect_kind::custom;
    s.endpoint = std::move(e);
    s.mode = speed_mode::given_speed;
    s.speed = std::move(speed_fn);
    s.anchor = anchor;
    return s;
}

effect_spec effect_spec::custom_statistic(endpoint_fn e, scalar_fn statistic_fn) {
    effect_spec s;
    s.kind = effect_kind::custom;
    s.endpoint = std::move(e);
    s.mode = speed_mode::summary_statistic;
    s.statistic = std::move(statistic_fn);
    return s;
}

void effect_spec::validate(std::size_t d) const {
    switch (kind) {
        case effect_kind::cfi_unit:
        case effect_kind::cfi_mult:
        case effect_kind::cke:
            if (j < 1 || j > d) {
                throw error(errc::invalid_spec, "index " + std::to_string(j) + " outside 1.." + std::to_string(d));
            }
            break;
        case effect_kind::cai_unit:
        case effect_kind::cai_mult:
        case effect_kind::cae:
            if (a.empty() || b.empty()) throw error(errc::invalid_spec, "A and B must be nonempty");
            if (a.intersects(b)) throw error(errc::overlapping_sets, "A and B overlap");
            a.check_bounds(d);
            b.check_bounds(d);
            break;
        case effect_kind::custom:
            if (!endpoint) throw error(errc::invalid_spec, "custom effect needs an endpoint function");
            if ((mode == speed_mode::given_speed) != static_cast<bool>(speed) ||
                (mode == speed_mode::summary_statistic) != static_cast<bool>(statistic)) {
                throw error(errc::invalid_spec, "custom effect needs exactly one of speed or statistic");
            }
            break;
        default:
            break;
    }
}

effect_spec parse_effect_spec(const std::string& text) {
    const auto colon = text.find(':');
    const std::string name = text.substr(0, colon);
    const std::string arg = colon == std::string::npos ? std::string() : text.substr(colon + 1);
    auto single = [&]() -> std::size_t {
        const auto v = parse_index_list(arg);
        if (v.size() != 1) throw error(errc::invalid_spec, "'" + text + "' needs a single index");
        return v.front();
    };
    auto sets = [&]() -> std::pair<index_set, index_set> {
        const auto semi = arg.find(';');
        if (semi == std::string::npos || arg.rfind("A=", 0) != 0 || arg.compare(semi + 1, 2, "B=") != 0) {
            throw error(errc::invalid_spec, "'" + text + "' needs the form A=i,j;B=k");
        }
        return {index_set(parse_index_list(arg.substr(2, semi - 2))),
                index_set(parse_index_list(arg.substr(semi + 3)))};
    };
    auto no_arg = [&]() {
        if (colon != std::string::npos) throw error(errc::invalid_spec, "'" + name + "' takes no argument");
    };
    if (name == "cfi_unit") return effect_spec::cfi_unit(single());
    if (name == "cfi_mult") return effect_spec::cfi_mult(single());
    if (name == "cke") return effect_spec::cke(single());
    if (name == "cdi_unit") return no_arg(), effect_spec::cdi_unit();
    if (name == "cdi_gini") return no_arg(), effect_spec::cdi_gini();
    if (name == "clr_diversity") return no_arg(), effect_spec::clr_diversity();
    if (name == "cai_unit" || name == "cai_mult" || name == "cae") {
        auto [a, b] = sets();
        if (a.intersects(b)) throw error(errc::overlapping_sets, "A and B overlap in '" + text + "'");
        if (name == "cai_unit") return effect_spec::cai_unit(a, b);
        if (name == "cai_mult") return effect_spec::cai_mult(a, b);
        return effect_spec::cae(a, b);
    }
    throw error(errc::invalid_spec, "unknown effect '" + text + "'");
}

std::string to_string(const effect_spec& spec) {
    switch (spec.kind) {
        case effect_kind::cfi_unit: return "cfi_unit:" + std::to_string(spec.j);
        case effect_kind::cfi_mult: return "cfi_mult:" + std::to_string(spec.j);
        case effect_kind::cke: return "cke:" + std::to_string(spec.j);
        case effect_kind::cdi_unit: return "cdi_unit";
        case effect_kind::cdi_gini: return "cdi_gini";
        case effect_kind::cai_unit: return "cai_unit:A=" + join(spec.a) + ";B=" + join(spec.b);
        case effect_kind::cai_mult: return "cai_mult:A=" + join(spec.a) + ";B=" + join(spec.b);
        case effect_kind::cae: return "cae:A=" + join(spec.a) + ";B=" + join(spec.b);
        case effect_kind::clr_diversity: return "clr_diversity";
        case effect_kind::custom: return "custom";
    }
    return "unknown";
}

composition endpoint(const effect_spec& spec, const composition& z) {
    const std::size_t d = z.dim();
    spec.validate(d);
    switch (spec.kind) {
        case effect_kind::cfi_unit:
        case effect_kind::cfi_mult: return composition::vertex(d, spec.j);
        case effect_kind::cke: return amalgamate(z, index_set({spec.j}), complement(spec.j, d));
        case effect_kind::cdi_unit:
        case effect_kind::cdi_gini:
        case effect_kind::clr_diversity: return composition::center(d);
        case effect_kind::cai_unit:
        case effect_kind::cai_mult:
        case effect_kind::cae: return amalgamate(z, spec.a, spec.b);
        case effect_kind::custom: return spec.endpoint(z);
    }
    throw error(errc::invalid_spec, "unknown effect kind");
}

std::vector<double> direction(const effect_spec& spec, const composition& z) {
    if (spec.kind == effect_kind::clr_diversity) {
        std::vector<double> w = clr_kind_omega(z);
        const double n1 = norm1(w);
        if (n1 < zero_tol) throw error(errc::at_endpoint, "z is the center");
        for (double& x : w) x /= n1;
        return w;
    }
    double delta = 0.0;
    return diff_normalized(endpoint(spec, z), z, delta);
}

double speed(const effect_spec& spec, const composition& z) {
    require_directional(spec);
    spec.validate(z.dim());
    switch (spec.kind) {
        case effect_kind::cfi_unit:
        case effect_kind::cdi_unit:
        case effect_kind::cai_unit: return 1.0;
        case effect_kind::cfi_mult: {
            const double x = z[spec.j - 1];
            return 2.0 * x * (1.0 - x);
        }
        case effect_kind::cai_mult: {
            const double ma = spec.a.mass(z);
            const double mb = spec.b.mass(z);
            if (ma + mb < zero_tol) return 0.0;
            return 2.0 * ma * mb / (ma + mb);
        }
        case effect_kind::cdi_gini: {
            const std::vector<double> v = direction(spec, z);
            return 2.0 * static_cast<double>(z.dim()) / gini_pair_sum(v);
        }
        case effect_kind::clr_diversity: return norm1(clr_kind_omega(z));
        case effect_kind::custom:
            if (spec.mode == speed_mode::given_speed) return spec.speed(z);
            return reparam_from_statistic(spec.endpoint, spec.statistic, z).implied_speed;
        default: break;
    }
    throw error(errc::invalid_spec, "speed undefined for this effect");
}

std::vector<double> omega(const effect_spec& spec, const composition& z) {
    require_directional(spec);
    if (spec.kind == effect_kind::clr_diversity) return clr_kind_omega(z);
    const composition e = endpoint(spec, z);
    const double delta = l1_distance(e, z);
    std::vector<double> w(z.dim(), 0.0);
    if (delta < zero_tol) return w;
    const double s = speed(spec, z);
    if (!(s > 0.0)) return w;
    for (std::size_t i = 0; i < z.dim(); ++i) w[i] = s * (e[i] - z[i]) / delta;
    return w;
}

bool is_zero_speed(const effect_spec& spec, const composition& z) {
    if (spec.is_binary()) return false;
    if (spec.kind == effect_kind::clr_diversity) {
        for (double x : z.values()) {
            if (is_zero(x)) return true;
        }
    }
    return norm1(omega(spec, z)) < 1e-12;
}

composition apply(const effect_spec& spec, const composition& z, double gamma) {
    if (spec.is_binary()) {
        if (gamma == 0.0) return z;
        if (gamma == 1.0) return endpoint(spec, z);
        throw error(errc::out_of_domain, "binary perturbations accept gamma in {0, 1}");
    }
    if (!(gamma >= 0.0)) throw error(errc::out_of_domain, "gamma must be nonnegative");
    if (gamma == 0.0) return z;
    if (spec.kind == effect_kind::clr_diversity) {
        std::vector<double> c = clr(z);
        const double n2 = norm2(c);
        if (n2 < zero_tol) return z;
        for (double& x : c) x *= 1.0 - gamma / n2;
        return clr_inverse(c);
    }
    const std::vector<double> w = omega(spec, z);
    std::vector<double> out(z.dim());
    for (std::size_t i = 0; i < z.dim(); ++i) out[i] = z[i] + gamma * w[i];
    return on_simplex(std::move(out), errc::out_of_domain);
}

directional_reparam reparametrize_directional(const effect_spec& spec, const composition& z) {
    require_directional(spec);
    spec.validate(z.dim());
    if (spec.kind == effect_kind::clr_diversity) return clr_diversity_reparam(z);
    if (spec.kind == effect_kind::custom) {
        if (spec.mode == speed_mode::given_speed) return reparam_from_speed(spec.endpoint, spec.speed, z, spec.anchor);
        return reparam_from_statistic(spec.endpoint, spec.statistic, z).reparam;
    }
    double l = 0.0;
    if (spec.kind == effect_kind::cfi_mult) {
        const double x = z[spec.j - 1];
        if (is_zero(x) || is_zero(1.0 - x)) throw error(errc::log_of_zero, "z^j is 0 or 1");
        l = std::log(x / (1.0 - x));
    } else if (spec.kind == effect_kind::cai_mult) {
        const double ma = spec.a.mass(z);
        const double mb = spec.b.mass(z);
        if (is_zero(ma) || is_zero(mb)) throw error(errc::log_of_zero, "A or B has zero mass");
        l = std::log(mb / ma);
    }
    const composition e = endpoint(spec, z);
    double delta = 0.0;
    std::vector<double> v = diff_normalized(e, z, delta);
    switch (spec.kind) {
        case effect_kind::cfi_unit: l = -2.0 * (1.0 - z[spec.j - 1]); break;
        case effect_kind::cdi_unit: l = -delta; break;
        case effect_kind::cdi_gini: l = 1.0 - gini(z); break;
        case effect_kind::cai_unit: l = -2.0 * spec.a.mass(z); break;
        default: break;
    }
    return directional_reparam{l, e, std::move(v)};
}

binary_reparam reparametrize_binary(const effect_spec& spec, const composition& z) {
    if (!spec.is_binary()) throw error(errc::invalid_spec, "operation requires a binary effect");
    spec.validate(z.dim());
    const double m = spec.kind == effect_kind::cke ? z[spec.j - 1] : spec.a.mass(z);
    if (is_zero(m)) return binary_reparam{1, z};
    return binary_reparam{0, endpoint(spec, z)};
}

reparam reparametrize(const effect_spec& spec, const composition& z) {
    if (spec.is_binary()) return reparametrize_binary(spec, z);
    return reparametrize_directional(spec, z);
}

composition inverse_reparametrize(const effect_spec& spec, double l, const directional_reparam& w) {
    return inverse_reparametrize(spec, l, w.w_endpoint, w.w_direction);
}

composition inverse_reparametrize(const effect_spec& spec, double l, const composition& w_endpoint,
                                  const std::vector<double>& w_direction) {
    require_directional(spec);
    if (w_direction.size() != w_endpoint.dim()) throw error(errc::dimension_mismatch, "W parts differ in size");
    double delta = 0.0;
    switch (spec.kind) {
        case effect_kind::cfi_unit:
        case effect_kind::cdi_unit:
        case effect_kind::cai_unit: delta = -l; break;
        case effect_kind::cfi_mult: delta = 2.0 / (1.0 + std::exp(l)); break;
        case effect_kind::cdi_gini:
            delta = (1.0 - l) * 2.0 * static_cast<double>(w_endpoint.dim()) / gini_pair_sum(w_direction);
            break;
        case effect_kind::cai_mult: delta = 2.0 * spec.b.mass(w_endpoint) / (1.0 + std::exp(l)); break;
        case effect_kind::clr_diversity: {
            std::vector<double> x(w_direction);
            for (double& v : x) v *= -l;
            return clr_inverse(x);
        }
        case effect_kind::custom:
            if (spec.mode == speed_mode::given_speed) {
                return inverse_from_speed(spec.speed, l, w_endpoint, w_direction, spec.anchor);
            }
            return inverse_from_statistic(spec.statistic, l, w_endpoint, w_direction);
        default: break;
    }
    return ray_point(w_endpoint, w_direction, delta);
}

std::vector<double> clr(const composition& z) {
    std::vector<double> out(z.dim());
    double mean = 0.0;
    for (std::size_t i = 0; i < z.dim(); ++i) {
        if (is_zero(z[i])) throw error(errc::zero_coordinate, "clr needs strictly positive coordinates");
        out[i] = std::log(z[i]);
        mean += out[i];
    }
    mean /= static_cast<double>(z.dim());
    for (double& x : out) x -= mean;
    return out;
}

composition clr_inverse(const std::vector<double>& x) {
    if (x.size() < 2) throw error(errc::dimension_mismatch, "clr_inverse needs at least 2 entries");
    const double mx = *std::max_element(x.begin(), x.end());
    std::vector<double> e(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) e[i] = std::exp(x[i] - mx);
    return closure(e);
}

directional_reparam clr_diversity_reparam(const composition& z) {
    std::vector<double> c = clr(z);
    const double n2 = norm2(c);
    if (n2 < zero_tol) throw error(errc::at_endpoint, "z is the center");
    for (double& x : c) x /= n2;
    return directional_reparam{-n2, composition::center(z.dim()), std::move(c)};
}

composition aitchison_apply(const composition& z, double gamma) {
    std::vector<double> c = clr(z);
    for (double& x : c) x *= 1.0 - gamma;
    return clr_inverse(c);
}

std::vector<double> aitchison_omega(const composition& z) {
    const std::size_t d = z.dim();
    std::vector<double> out(d, 0.0);
    for (std::size_t j = 0; j < d; ++j) {
        if (is_zero(z[j])) throw error(errc::zero_coordinate, "aitchison perturbation needs an interior point");
    }
    for (std::size_t j = 0; j < d; ++j) {
        for (std::size_t k = 0; k < d; ++k) {
            if (k != j) out[j] += z[j] * z[k] * std::log(z[k] / z[j]);
        }
    }
    return out;
}

double ray_length(const composition& w_endpoint, const std::vector<double>& w_direction) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < w_direction.size(); ++i) {
        if (w_direction[i] > 1e-15) best = std::min(best, w_endpoint[i] / w_direction[i]);
    }
    return best;
}

directional_reparam reparam_from_speed(const endpoint_fn& e, const scalar_fn& speed_fn, const composition& z,
                                       double anchor) {
    const composition end = e(z);
    double delta = 0.0;
    std::vector<double> v = diff_normalized(end, z, delta);
    const double ref = anchor_for(anchor, ray_length(end, v));
    const double l = t_from_speed(speed_fn, end, v, ref, delta);
    return directional_reparam{l, end, std::move(v)};
}

composition inverse_from_speed(const scalar_fn& speed_fn, double l, const composition& w_endpoint,
                               const std::vector<double>& w_direction, double anchor) {
    const double dmax = ray_length(w_endpoint, w_direction);
    const double ref = anchor_for(anchor, dmax);
    auto g = [&](double u) { return t_from_speed(speed_fn, w_endpoint, w_direction, ref, u) - l; };
    double lo = ref;
    double hi = ref;
    try {
        if (l > 0.0) {
            for (int k = 1; g(lo) < 0.0; ++k) {
                if (k > 60) throw error(errc::out_of_image, "l beyond the reachable range");
                hi = lo;
                lo = ref * std::ldexp(1.0, -k);
            }
        } else if (l < 0.0) {
            for (int k = 1; g(hi) > 0.0; ++k) {
                if (k > 60) throw error(errc::out_of_image, "l beyond the reachable range");
                lo = hi;
                hi = dmax - (dmax - ref) * std::ldexp(1.0, -k);
            }
        }
    } catch (const error& err) {
        if (err.code() == errc::non_positive_speed) throw error(errc::out_of_image, "l beyond the reachable range");
        throw;
    }
    const double delta = lo == hi ? ref : bisect(g, lo, hi, 1e-15);
    return ray_point(w_endpoint, w_direction, delta);
}

statistic_reparam reparam_from_statistic(const endpoint_fn& e, const scalar_fn& statistic_fn,
                                         const composition& z) {
    const composition end = e(z);
    double delta = 0.0;
    std::vector<double> v = diff_normalized(end, z, delta);
    const double dmax = ray_length(end, v);
    auto t = [&](double u) { return statistic_fn(ray_point(end, v, u)); };
    const double h = 1e-6 * std::max(delta, 1.0);
    double slope = 0.0;
    if (delta - h >= 0.0 && delta + h <= dmax) {
        slope = (t(delta + h) - t(delta - h)) / (2.0 * h);
    } else if (delta - h < 0.0) {
        slope = (t(delta + h) - t(delta)) / h;
    } else {
        slope = (t(delta) - t(delta - h)) / h;
    }
    if (!(slope < 0.0)) throw error(errc::not_decreasing, "statistic is not decreasing along the ray");
    return statistic_reparam{directional_reparam{statistic_fn(z), end, std::move(v)}, -1.0 / slope};
}

composition inverse_from_statistic(const scalar_fn& statistic_fn, double l, const composition& w_endpoint,
                                   const std::vector<double>& w_direction) {
    const double dmax = ray_length(w_endpoint, w_direction);
    auto g = [&](double u) { return statistic_fn(ray_point(w_endpoint, w_direction, u)) - l; };
    const double delta = bisect(g, 0.0, dmax, 1e-15);
    return ray_point(w_endpoint, w_direction, delta);
}

std::vector<double> w_features(const effect_spec& spec, const reparam& r) {
    if (const auto* b = std::get_if<binary_reparam>(&r)) return b->w.values();
    const auto& d = std::get<directional_reparam>(r);
    switch (spec.kind) {
        case effect_kind::cai_unit:
        case effect_kind::cai_mult:
        case effect_kind::custom: {
            std::vector<double> out = d.w_endpoint.values();
            out.insert(out.end(), d.w_direction.begin(), d.w_direction.end());
            return out;
        }
        default: return d.w_direction;
    }
}

}  // namespace copert
