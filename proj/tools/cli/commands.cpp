#include "cli/commands.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <fstream>
#include <memory>
#include <sstream>

#include "cli/csv.hpp"
#include "copert/error.hpp"
#include "copert/learners.hpp"

namespace copert::cli {

namespace {

struct estimate_options {
    std::string input;
    std::string response;
    std::vector<std::string> composition;
    std::vector<std::string> effects;
    std::string treatment;
    std::vector<std::string> covariates;
    std::string method = "plm";
    std::vector<std::string> adjust;
    int folds = 2;
    bool no_crossfit = false;
    std::string learner = "cv";
    std::string score = "gaussian_kernel";
    double alpha = 0.05;
    std::uint64_t seed = 20240601;
    bool bonferroni = false;
    std::string output = "-";
};

struct simulate_options {
    std::vector<std::string> settings;
    std::size_t n = 1000;
    std::size_t d = 3;
    int reps = 100;
    std::vector<std::string> methods{"plm", "npm", "plugin"};
    int folds = 2;
    std::string learner = "cv";
    std::string score = "gaussian_kernel";
    double alpha = 0.05;
    std::uint64_t seed = 20240601;
    std::string output = "-";
};

struct generate_options {
    std::string setting;
    std::size_t n = 1000;
    std::size_t d = 3;
    std::uint64_t seed = 20240601;
    std::string output = "-";
};

// Thrown for bad input; maps to exit code 2.
struct usage : std::runtime_error {
    using std::runtime_error::runtime_error;
};

class sink {
public:
    sink(const std::string& path, std::ostream& fallback) : out_(&fallback) {
        if (path != "-") {
            file_ = std::make_unique<std::ofstream>(path);
            if (!*file_) throw usage("cannot write '" + path + "'");
            out_ = file_.get();
        }
    }
    std::ostream& get() { return *out_; }

private:
    std::unique_ptr<std::ofstream> file_;
    std::ostream* out_;
};

std::vector<std::string> split_list(const std::vector<std::string>& items) {
    std::vector<std::string> out;
    for (const auto& item : items) {
        std::stringstream ss(item);
        std::string part;
        while (std::getline(ss, part, ',')) {
            if (!part.empty()) out.push_back(part);
        }
    }
    return out;
}

estimator_config make_config(int folds, bool crossfit, const std::string& learner, const std::string& score,
                             double alpha, std::uint64_t seed) {
    const auto& names = learner_names();
    if (std::find(names.begin(), names.end(), learner) == names.end()) {
        throw usage("unknown learner '" + learner + "'");
    }
    if (!(alpha > 0.0 && alpha < 1.0)) throw usage("alpha must lie in (0, 1)");
    if (crossfit && folds < 2) throw usage("--folds must be at least 2");
    estimator_config cfg;
    cfg.folds = folds;
    cfg.crossfit = crossfit;
    cfg.alpha = alpha;
    cfg.seed = seed;
    cfg.nuisances = learner_nuisances(learner, parse_score_method(score));
    return cfg;
}

void check_method(const std::string& m) {
    const auto& names = estimator_names();
    if (std::find(names.begin(), names.end(), m) == names.end()) throw usage("unknown method '" + m + "'");
}

int cmd_estimate(const estimate_options& o, std::ostream& out, std::ostream& err) {
    check_method(o.method);
    const estimator_config cfg = make_config(o.folds, !o.no_crossfit, o.learner, o.score, o.alpha, o.seed);
    const csv_table table = read_csv_file(o.input);
    if (table.rows.empty()) throw usage("input has no data rows");
    const Eigen::VectorXd y = table.numeric(o.response);

    std::vector<std::string> labels;
    std::vector<sample_set> sets;
    if (!o.treatment.empty()) {
        if (!o.effects.empty() || !o.composition.empty()) {
            throw usage("--treatment excludes --composition and --effect");
        }
        const Eigen::VectorXd l = table.numeric(o.treatment);
        std::vector<std::string> cov = o.covariates.empty() ? std::vector<std::string>{}
                                                            : table.select(split_list(o.covariates));
        const auto extra = o.adjust.empty() ? std::vector<std::string>{} : table.select(split_list(o.adjust));
        cov.insert(cov.end(), extra.begin(), extra.end());
        const bool binary = (l.array() == 0.0 || l.array() == 1.0).all();
        labels.push_back(o.treatment);
        sets.push_back(make_samples(y, l, table.numeric(cov), binary));
    } else {
        if (o.composition.empty()) throw usage("--composition is required");
        if (o.effects.empty()) throw usage("--effect is required");
        const auto zcols = table.select(split_list(o.composition));
        if (zcols.size() < 2) throw usage("--composition needs at least 2 columns");
        const Eigen::MatrixXd zm = table.numeric(zcols);
        std::vector<composition> z;
        z.reserve(table.rows.size());
        std::size_t renormalized = 0;
        for (Eigen::Index i = 0; i < zm.rows(); ++i) {
            std::vector<double> v(zm.cols());
            for (Eigen::Index c = 0; c < zm.cols(); ++c) v[static_cast<std::size_t>(c)] = zm(i, c);
            try {
                z.emplace_back(std::move(v));
            } catch (const error& e) {
                throw usage("row " + std::to_string(i + 1) + " of the composition columns: " + e.what());
            }
            renormalized += z.back().renormalized_with_warning() ? 1 : 0;
        }
        if (renormalized > 0) err << "warning: renormalized " << renormalized << " compositions\n";
        Eigen::MatrixXd adjust;
        if (!o.adjust.empty()) adjust = table.numeric(table.select(split_list(o.adjust)));
        const auto specs = expand_effects(o.effects, zcols.size());
        for (const auto& spec : specs) {
            labels.push_back(to_string(spec));
            sets.push_back(reparametrize_samples(spec, z, y, o.adjust.empty() ? nullptr : &adjust));
        }
    }

    std::vector<effect_estimate> results(sets.size());
    std::vector<std::string> failures(sets.size());
    for (std::size_t e = 0; e < sets.size(); ++e) {
        try {
            results[e] = estimate(o.method, sets[e], cfg);
        } catch (const std::exception& ex) {
            failures[e] = ex.what();
        }
    }
    const double m = static_cast<double>(sets.size());
    std::vector<std::string> head{"effect", "method",   "estimate", "std_error",    "ci_low",
                                  "ci_high", "p_value", "n_used",   "n_zero_speed", "n_l_undefined"};
    if (o.bonferroni) head.push_back("p_adjusted");
    write_csv_row(out, head);
    bool failed = false;
    for (std::size_t e = 0; e < sets.size(); ++e) {
        if (!failures[e].empty()) {
            err << "error: " << labels[e] << ": " << failures[e] << '\n';
            failed = true;
            continue;
        }
        const auto& r = results[e];
        for (const auto& w : r.warnings) err << "warning: " << labels[e] << ": " << w << '\n';
        std::vector<std::string> row{labels[e],
                                     o.method,
                                     format_real(r.estimate),
                                     format_real(r.std_error),
                                     format_real(r.ci_low),
                                     format_real(r.ci_high),
                                     format_real(r.p_value),
                                     std::to_string(r.n_used),
                                     std::to_string(r.n_zero_speed),
                                     std::to_string(sets[e].n_l_undefined)};
        if (o.bonferroni) row.push_back(format_real(std::min(1.0, r.p_value * m)));
        write_csv_row(out, row);
    }
    return failed ? estimation_failure : ok;
}

int cmd_simulate(const simulate_options& o, std::ostream& out) {
    const auto methods = split_list(o.methods);
    if (methods.empty()) throw usage("--methods is empty");
    for (const auto& m : methods) check_method(m);
    const estimator_config cfg = make_config(o.folds, true, o.learner, o.score, o.alpha, o.seed);
    std::vector<sim_setting> settings;
    for (const auto& name : split_list(o.settings)) {
        sim_setting s{name, o.n, o.d, o.seed};
        try {
            validate(s);
        } catch (const error& e) {
            throw usage(e.what());
        }
        settings.push_back(s);
    }
    if (o.reps < 1) throw usage("--reps must be positive");
    out << run_coverage(settings, methods, o.reps, o.seed, cfg).to_csv();
    return ok;
}

int cmd_generate(const generate_options& o, std::ostream& out) {
    sim_setting s{o.setting, o.n, o.d, o.seed};
    try {
        validate(s);
    } catch (const error& e) {
        throw usage(e.what());
    }
    write_dataset(out, generate(s));
    return ok;
}

}  // namespace

std::vector<effect_spec> expand_effects(const std::vector<std::string>& texts, std::size_t d) {
    std::vector<effect_spec> out;
    for (const auto& t : texts) {
        const auto colon = t.find(':');
        if (colon != std::string::npos && t.substr(colon + 1) == "all") {
            for (std::size_t j = 1; j <= d; ++j) {
                out.push_back(parse_effect_spec(t.substr(0, colon) + ":" + std::to_string(j)));
            }
        } else {
            out.push_back(parse_effect_spec(t));
        }
    }
    for (const auto& s : out) s.validate(d);
    return out;
}

void write_dataset(std::ostream& out, const sim_data& data) {
    const sample_set& s = data.samples;
    std::vector<std::string> head{"y"};
    if (!data.z.empty()) {
        for (std::size_t j = 1; j <= data.z.front().dim(); ++j) head.push_back("z" + std::to_string(j));
    } else {
        head.push_back("l");
        for (Eigen::Index c = 0; c < s.w.cols(); ++c) head.push_back("w" + std::to_string(c + 1));
    }
    write_csv_row(out, head);
    for (std::size_t i = 0; i < s.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        std::vector<std::string> row{format_real(s.y[r])};
        if (!data.z.empty()) {
            for (double v : data.z[i].values()) row.push_back(format_real(v));
        } else {
            row.push_back(format_real(s.l[r]));
            for (Eigen::Index c = 0; c < s.w.cols(); ++c) row.push_back(format_real(s.w(r, c)));
        }
        write_csv_row(out, row);
    }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Compositional perturbation effect estimation"};
    app.name("copert");
    app.require_subcommand(1);

    estimate_options eo;
    auto* est = app.add_subcommand("estimate", "Estimate perturbation effects from a CSV dataset");
    est->add_option("--input", eo.input, "CSV file with a header row ('-' for stdin)")->required();
    est->add_option("--response", eo.response, "Response column")->required();
    est->add_option("--composition", eo.composition, "Composition columns; comma list, 'prefix*' globs allowed");
    est->add_option("--effect", eo.effects, "Effect spec, repeatable; '<kind>:all' expands over coordinates");
    est->add_option("--treatment", eo.treatment, "Use an already reparametrized L column instead of a composition");
    est->add_option("--covariates", eo.covariates, "W columns used with --treatment");
    est->add_option("--method", eo.method, "npm, npm_no_crossfit, plm, plm_no_crossfit, plugin, plugin_no_crossfit, "
                                           "ols_marginal")
        ->capture_default_str();
    est->add_option("--adjust", eo.adjust, "Adjustment covariate columns appended to W");
    est->add_option("--folds", eo.folds, "Cross-fitting folds")->capture_default_str();
    est->add_option("--learner", eo.learner, "mean, ridge, forest_shallow, forest, cv")->capture_default_str();
    est->add_option("--score-method", eo.score, "gaussian_kernel or penalized_spline")->capture_default_str();
    est->add_option("--alpha", eo.alpha, "CI level is 1 - alpha")->capture_default_str();
    est->add_option("--seed", eo.seed, "Random seed")->capture_default_str();
    est->add_flag("--bonferroni", eo.bonferroni, "Add a Bonferroni-adjusted p-value column");
    est->add_option("--output", eo.output, "Output CSV ('-' for stdout)")->capture_default_str();

    simulate_options so;
    auto* sim = app.add_subcommand("simulate", "Run a coverage experiment over seeded replications");
    sim->add_option("--setting", so.settings, "binary_plm, binary_np, cont_plm, cont_np, microbe_toy, diversity_toy")
        ->required();
    sim->add_option("--n", so.n, "Sample size")->capture_default_str();
    sim->add_option("--d", so.d, "Composition dimension")->capture_default_str();
    sim->add_option("--reps", so.reps, "Replications")->capture_default_str();
    sim->add_option("--methods", so.methods, "Comma-separated estimator names");
    sim->add_option("--folds", so.folds, "Cross-fitting folds")->capture_default_str();
    sim->add_option("--learner", so.learner, "Nuisance learner")->capture_default_str();
    sim->add_option("--score-method", so.score, "gaussian_kernel or penalized_spline")->capture_default_str();
    sim->add_option("--alpha", so.alpha, "CI level is 1 - alpha")->capture_default_str();
    sim->add_option("--seed", so.seed, "Base seed; replication r uses seed + r")->capture_default_str();
    sim->add_option("--output", so.output, "Output CSV ('-' for stdout)")->capture_default_str();

    generate_options go;
    auto* gen = app.add_subcommand("generate", "Write one simulated dataset as CSV");
    gen->add_option("--setting", go.setting, "Setting name")->required();
    gen->add_option("--n", go.n, "Sample size")->capture_default_str();
    gen->add_option("--d", go.d, "Composition dimension")->capture_default_str();
    gen->add_option("--seed", go.seed, "Random seed")->capture_default_str();
    gen->add_option("--output", go.output, "Output CSV ('-' for stdout)")->capture_default_str();

    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
        app.parse(rev);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return ok;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return ok;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return usage_error;
    }

    try {
        if (*est) {
            sink s(eo.output, out);
            return cmd_estimate(eo, s.get(), err);
        }
        if (*sim) {
            sink s(so.output, out);
            return cmd_simulate(so, s.get());
        }
        sink s(go.output, out);
        return cmd_generate(go, s.get());
    } catch (const usage& e) {
        err << "error: " << e.what() << '\n';
        return usage_error;
    } catch (const error& e) {
        err << "error: " << e.what() << '\n';
        const errc c = e.code();
        const bool input_problem = c == errc::parse_error || c == errc::invalid_spec || c == errc::invalid_index ||
                                   c == errc::negative_entry || c == errc::not_normalized || c == errc::all_zero ||
                                   c == errc::dimension_mismatch || c == errc::overlapping_sets ||
                                   c == errc::empty_subcomposition_b || c == errc::invalid_argument;
        return input_problem ? usage_error : estimation_failure;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return estimation_failure;
    }
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(args, out, err);
}

}  // namespace copert::cli
