#include "copert/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "copert/error.hpp"
#include "copert/parallel.hpp"

namespace copert {

namespace {

double expit(double x) { return 1.0 / (1.0 + std::exp(-x)); }

sim_data generate_semiparametric(const sim_setting& st) {
    rng r(st.seed);
    const std::size_t n = st.n;
    const std::size_t d = st.d;
    const double med = w1_median(d);
    const double sd = std::sqrt(w1_variance(d));
    const std::vector<composition> w = sample_uniform_simplex(n, d - 1, r);
    Eigen::MatrixXd wm(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d - 1));
    Eigen::VectorXd y(static_cast<Eigen::Index>(n));
    Eigen::VectorXd l(static_cast<Eigen::Index>(n));
    const bool binary = st.name.starts_with("binary");
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = static_cast<Eigen::Index>(i);
        for (std::size_t c = 0; c + 1 < d; ++c) wm(row, static_cast<Eigen::Index>(c)) = w[i][c];
        const double w1 = w[i][0];
        const double b = w1 > med ? 1.0 : 0.0;
        const double eps = r.normal();
        if (binary) {
            const double u0 = r.bernoulli(0.8) ? 1.0 : 0.0;
            const double u1 = r.bernoulli(0.5) ? 1.0 : 0.0;
            l[row] = u0 * (1.0 - b) + u1 * b;
            y[row] = st.name == "binary_plm" ? l[row] + w1 / sd + eps : 1.4 * l[row] * b + w1 / sd + eps;
        } else {
            const double xi = r.normal();
            if (st.name == "cont_plm") {
                l[row] = b + xi;
                y[row] = l[row] + b + eps;
            } else {
                l[row] = b + (1.0 + b) * xi;
                y[row] = 2.0 * b * l[row] + b + eps;
            }
        }
    }
    sim_data out;
    out.setting = st;
    out.samples = make_samples(y, l, wm, binary);
    out.truth = 1.0;
    return out;
}

sim_data generate_microbe(const sim_setting& st) {
    rng r(st.seed);
    std::vector<composition> z;
    z.reserve(st.n);
    Eigen::VectorXd y(static_cast<Eigen::Index>(st.n));
    for (std::size_t i = 0; i < st.n; ++i) {
        const double hidden = r.bernoulli(0.5) ? 1.0 : 0.0;
        const double u1 = r.uniform();
        const double u2 = r.uniform();
        const double bb = r.bernoulli(0.5) ? 1.0 : 0.0;
        const double w2 = u1 * (1.0 - hidden) + u1 * hidden * bb;
        const double z1 = (1.0 - hidden) * u2;
        composition zi = closure({z1, w2 * (1.0 - z1), (1.0 - w2) * (1.0 - z1)});
        const double p = 0.75 + 0.125 * (is_zero(zi[0]) ? 1.0 : 0.0) - 0.5 * (is_zero(zi[1]) ? 1.0 : 0.0);
        y[static_cast<Eigen::Index>(i)] = r.bernoulli(p) ? 1.0 : 0.0;
        z.push_back(std::move(zi));
    }
    sim_data out;
    out.setting = st;
    out.effect = effect_spec::cke(1);
    out.samples = reparametrize_samples(out.effect, z, y);
    out.z = std::move(z);
    out.truth = 0.125;
    return out;
}

sim_data generate_diversity(const sim_setting& st) {
    rng r(st.seed);
    std::vector<composition> z;
    z.reserve(st.n);
    Eigen::VectorXd y(static_cast<Eigen::Index>(st.n));
    const double third = 1.0 / 3.0;
    for (std::size_t i = 0; i < st.n; ++i) {
        for (;;) {
            const double g[3] = {r.normal(), r.normal(), r.normal()};
            const double gm = (g[0] + g[1] + g[2]) / 3.0;
            double u[3] = {g[0] - gm, g[1] - gm, g[2] - gm};
            const double n1 = std::abs(u[0]) + std::abs(u[1]) + std::abs(u[2]);
            const double xi = r.normal();
            const double eps = r.normal();
            if (!(n1 > 0.0)) continue;
            double w[3] = {u[0] / n1, u[1] / n1, u[2] / n1};
            const double dd = expit(w[0] + xi);
            // scale 4/3 makes L exactly minus the Gini coefficient of Z
            std::vector<double> zi(3);
            bool inside = true;
            for (int j = 0; j < 3; ++j) {
                zi[static_cast<std::size_t>(j)] = third - 4.0 / 3.0 * dd * w[j];
                inside = inside && zi[static_cast<std::size_t>(j)] >= 0.0;
            }
            if (!inside) continue;
            double pair = 0.0;
            for (int j = 0; j < 3; ++j) {
                for (int k = 0; k < 3; ++k) pair += std::abs(w[j] - w[k]);
            }
            const double l = -2.0 / 9.0 * dd * pair;
            y[static_cast<Eigen::Index>(i)] = l + 4.0 * w[0] + eps;
            z.push_back(closure(zi));
            break;
        }
    }
    sim_data out;
    out.setting = st;
    out.effect = effect_spec::cdi_gini();
    out.samples = reparametrize_samples(out.effect, z, y);
    out.z = std::move(z);
    out.truth = 1.0;
    return out;
}

std::string format_double(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", x);
    return buf;
}

}  // namespace

const std::vector<std::string>& sim_setting_names() {
    static const std::vector<std::string> names{"binary_plm", "binary_np",   "cont_plm",
                                                "cont_np",    "microbe_toy", "diversity_toy"};
    return names;
}

void validate(const sim_setting& s) {
    const auto& names = sim_setting_names();
    if (std::find(names.begin(), names.end(), s.name) == names.end()) {
        throw error(errc::invalid_argument, "unknown setting '" + s.name + "'");
    }
    if (s.d < 3) throw error(errc::invalid_argument, "settings need d >= 3");
    if ((s.name == "microbe_toy" || s.name == "diversity_toy") && s.d != 3) {
        throw error(errc::invalid_argument, s.name + " fixes d = 3");
    }
    if (s.n < 1) throw error(errc::invalid_argument, "n must be positive");
}

std::vector<composition> sample_uniform_simplex(std::size_t n, std::size_t dim, rng& r) {
    if (dim < 2) throw error(errc::dimension_mismatch, "simplex sampling needs dim >= 2");
    std::vector<composition> out;
    out.reserve(n);
    std::vector<double> e(dim);
    for (std::size_t i = 0; i < n; ++i) {
        for (double& v : e) v = r.exponential();
        out.push_back(closure(e));
    }
    return out;
}

double w1_median(std::size_t d) {
    if (d < 3) throw error(errc::invalid_argument, "d must be at least 3");
    return 1.0 - std::pow(0.5, 1.0 / static_cast<double>(d - 2));
}

double w1_variance(std::size_t d) {
    if (d < 3) throw error(errc::invalid_argument, "d must be at least 3");
    const double dd = static_cast<double>(d);
    return (dd - 2.0) / ((dd - 1.0) * (dd - 1.0) * dd);
}

sim_data generate(const sim_setting& setting) {
    validate(setting);
    if (setting.name == "microbe_toy") return generate_microbe(setting);
    if (setting.name == "diversity_toy") return generate_diversity(setting);
    return generate_semiparametric(setting);
}

std::string coverage_report::to_csv() const {
    std::ostringstream os;
    os << "setting,estimator,n,d,reps,coverage,mean_estimate,mean_ci_width\n";
    for (const auto& r : rows) {
        os << r.setting << ',' << r.estimator << ',' << r.n << ',' << r.d << ',' << r.reps << ','
           << format_double(r.coverage) << ',' << format_double(r.mean_estimate) << ','
           << format_double(r.mean_ci_width) << '\n';
    }
    return os.str();
}

const coverage_row& coverage_report::find(const std::string& setting, const std::string& estimator,
                                          std::size_t d) const {
    for (const auto& r : rows) {
        if (r.setting == setting && r.estimator == estimator && (d == 0 || r.d == d)) return r;
    }
    throw error(errc::invalid_argument, "no coverage row for " + setting + "/" + estimator);
}

std::uint64_t rep_seed(std::uint64_t base_seed, int rep) { return base_seed + static_cast<std::uint64_t>(rep); }

coverage_report run_coverage(const std::vector<sim_setting>& settings, const std::vector<std::string>& estimators,
                             int reps, std::uint64_t base_seed, const estimator_config& cfg, const sim_estimator& est) {
    if (reps < 1) throw error(errc::invalid_argument, "reps must be positive");
    for (const auto& s : settings) validate(s);
    const sim_estimator run = est ? est : [](const sim_data& data, const std::string& name,
                                             const estimator_config& c) { return estimate(name, data.samples, c); };
    struct outcome {
        bool ok = false;
        bool covered = false;
        double estimate = 0.0;
        double width = 0.0;
    };
    coverage_report report;
    for (const auto& setting : settings) {
        std::vector<std::vector<outcome>> res(static_cast<std::size_t>(reps),
                                              std::vector<outcome>(estimators.size()));
        parallel_for(static_cast<std::size_t>(reps), [&](std::size_t rep) {
            sim_setting st = setting;
            st.seed = rep_seed(base_seed, static_cast<int>(rep));
            const sim_data data = generate(st);
            estimator_config c = cfg;
            c.seed = rng(st.seed).split(0xc0ffee).next_u64();
            for (std::size_t e = 0; e < estimators.size(); ++e) {
                outcome& o = res[rep][e];
                try {
                    const effect_estimate r = run(data, estimators[e], c);
                    o.ok = true;
                    o.estimate = r.estimate;
                    o.width = r.ci_high - r.ci_low;
                    o.covered = r.ci_low <= data.truth && data.truth <= r.ci_high;
                } catch (const std::exception&) {
                    o.ok = false;
                }
            }
        });
        for (std::size_t e = 0; e < estimators.size(); ++e) {
            coverage_row row;
            row.setting = setting.name;
            row.estimator = estimators[e];
            row.n = setting.n;
            row.d = setting.d;
            row.reps = reps;
            int ok = 0;
            int covered = 0;
            double est_sum = 0.0;
            double width_sum = 0.0;
            for (int rep = 0; rep < reps; ++rep) {
                const outcome& o = res[static_cast<std::size_t>(rep)][e];
                if (!o.ok) continue;
                ++ok;
                covered += o.covered ? 1 : 0;
                est_sum += o.estimate;
                width_sum += o.width;
            }
            row.failures = reps - ok;
            row.coverage = static_cast<double>(covered) / reps;
            row.mean_estimate = ok > 0 ? est_sum / ok : NAN;
            row.mean_ci_width = ok > 0 ? width_sum / ok : NAN;
            report.rows.push_back(row);
        }
    }
    return report;
}

}  // namespace copert
