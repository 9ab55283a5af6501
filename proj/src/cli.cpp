#include "splinesel/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>

#include "splinesel/criteria.hpp"
#include "splinesel/error.hpp"
#include "splinesel/format.hpp"
#include "splinesel/geometry.hpp"
#include "splinesel/oracle.hpp"
#include "splinesel/parallel.hpp"
#include "splinesel/simlab.hpp"
#include "splinesel/spectrum.hpp"

namespace splinesel {

namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

std::vector<std::size_t> parse_sizes(const std::string& text) {
    std::vector<std::size_t> out;
    for (const auto& item : split_list(text)) {
        char* end = nullptr;
        const unsigned long long v = std::strtoull(item.c_str(), &end, 10);
        if (*end != '\0' || v == 0) throw ConfigError("--n expects a comma-separated list of sizes, got '" + text + "'");
        out.push_back(static_cast<std::size_t>(v));
    }
    if (out.empty()) throw ConfigError("--n must not be empty");
    return out;
}

std::ofstream open_output(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    return out;
}

void print_summary(const json& j) { std::cout << j.dump() << std::endl; }

// Options shared by the diagnostic subcommands.  A --config file supplies
// defaults; explicit flags override it.
struct Study {
    std::string config;
    std::string design;
    std::string n;
    std::string criteria;
    std::string truth;
    double sigma = 0.0;
    std::string output_dir;
    std::uint64_t seed = 0;
    std::size_t replicates = 0;

    void attach(CLI::App* app, bool monte_carlo) {
        app->add_option("--config", config, "JSON experiment config supplying defaults");
        app->add_option("--design", design, "design template, e.g. equispaced(-1,1) or quantile(normal(0,1))");
        app->add_option("--n", n, "comma-separated sample sizes");
        app->add_option("--criteria", criteria, "comma-separated criterion ids (cp, gml, ee, pq(p,q))");
        app->add_option("--truth", truth, "truth id: paper-fig3, zero, linear(a,b), expr:<f(x)>");
        app->add_option("--sigma", sigma, "noise standard deviation")->check(CLI::PositiveNumber);
        app->add_option("--output-dir", output_dir, "directory for output files");
        if (monte_carlo) {
            app->add_option("--seed", seed, "random seed");
            app->add_option("--replicates", replicates, "Monte Carlo replicates");
        }
    }

    SimConfig resolve(const fs::path& default_output, std::size_t default_replicates) const {
        SimConfig cfg;
        if (!config.empty()) {
            cfg = load_config(config);
        } else {
            cfg.output_dir = default_output;
            cfg.replicates = default_replicates;
        }
        if (!design.empty()) {
            cfg.design = parse_design(design);
            if (const auto* x = std::get_if<Explicit>(&cfg.design)) cfg.n_list = {x->x.size()};
        }
        if (!n.empty()) cfg.n_list = parse_sizes(n);
        if (!criteria.empty()) cfg.criteria = split_list(criteria);
        if (!truth.empty()) cfg.truth = truth;
        if (sigma > 0.0) cfg.sigma = sigma;
        if (!output_dir.empty()) cfg.output_dir = output_dir;
        if (seed != 0) cfg.seed = seed;
        if (replicates != 0) cfg.replicates = replicates;
        validate(cfg);
        return cfg;
    }
};

struct Prepared {
    std::shared_ptr<const DesignSpectrum> spec;
    TruthSpectrum truth;
    OracleLambda ideal;
};

Prepared prepare(const SimConfig& cfg, SpectrumCache& cache, std::size_t n) {
    Prepared p;
    p.spec = cache.get(design_for_n(cfg.design, n));
    p.truth = make_truth(*p.spec, truth_curve(cfg.truth, p.spec->x), cfg.sigma);
    p.ideal = ideal_lambda(*p.spec, p.truth);
    return p;
}

std::vector<Criterion> criteria_of(const SimConfig& cfg) {
    std::vector<Criterion> out;
    for (const auto& id : cfg.criteria) out.push_back(criterion_from_id(id));
    return out;
}

fs::path cache_dir(const SimConfig& cfg) { return cfg.output_dir / "spectrum_cache"; }

// ----------------------------------------------------------------- commands --

int cmd_spectrum(const std::string& design_text, std::size_t n, const std::string& output) {
    DesignSpec design = parse_design(design_text.empty() ? "equispaced(-1,1)" : design_text);
    if (const auto* x = std::get_if<Explicit>(&design)) {
        if (n == 0) n = x->x.size();
    }
    if (n == 0) throw ConfigError("spectrum: --n is required");
    const DesignSpec spec_in = design_for_n(design, n);
    const DesignSpectrum spec = decompose(build_design(spec_in));
    const fs::path path = output.empty() ? fs::path("spectrum_n" + std::to_string(n) + ".spec") : fs::path(output);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    save_spectrum(spec, path);
    json j;
    j["command"] = "spectrum";
    j["design"] = describe(spec_in);
    j["n"] = spec.n;
    j["null_dim"] = spec.null_dim;
    j["k_smallest_positive"] = spec.k[static_cast<Eigen::Index>(spec.null_dim)];
    j["k_max"] = spec.k.maxCoeff();
    j["file"] = path.string();
    print_summary(j);
    return kExitOk;
}

int cmd_select(const std::string& input, const std::string& criterion_id, const std::string& sigma_text,
               double omega) {
    std::ifstream in(input);
    if (!in) throw ConfigError("cannot open input " + input);
    std::vector<std::pair<double, double>> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw ConfigError(input + ":" + std::to_string(line_no) + ": expected x,y");
        char* e1 = nullptr;
        char* e2 = nullptr;
        const std::string xs = line.substr(0, comma), ys = line.substr(comma + 1);
        const double x = std::strtod(xs.c_str(), &e1);
        const double y = std::strtod(ys.c_str(), &e2);
        if (e1 == xs.c_str() || e2 == ys.c_str()) {
            if (line_no == 1) continue;  // header
            throw ConfigError(input + ":" + std::to_string(line_no) + ": non-numeric value");
        }
        rows.emplace_back(x, y);
    }
    std::sort(rows.begin(), rows.end());
    Explicit design;
    Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        design.x.push_back(rows[i].first);
        y[static_cast<Eigen::Index>(i)] = rows[i].second;
    }
    const DesignSpectrum spec = decompose(build_design(design));
    const Criterion c = criterion_from_id(criterion_id);

    double sigma = 0.0;
    std::string sigma_source;
    if (sigma_text.rfind("known:", 0) == 0) {
        char* end = nullptr;
        const std::string v = sigma_text.substr(6);
        sigma = std::strtod(v.c_str(), &end);
        if (v.empty() || *end != '\0' || !(sigma > 0.0)) throw ConfigError("--sigma known:<value> needs a positive value");
        sigma_source = "known";
    } else {
        const SigmaMode mode = SigmaMode::parse(sigma_text);
        if (!mode.estimated) throw ConfigError("--sigma known requires a value, e.g. known:1.0");
        const std::size_t m = mode.terms ? mode.terms : default_sigma_terms(spec.n);
        sigma = std::sqrt(sigma_estimate(spec, y, m));
        if (!(sigma > 0.0)) throw NumericError("estimated sigma is zero");
        sigma_source = "estimated:" + std::to_string(m);
    }
    const SelectionResult sel = select(c, spec, rotate(spec, y, sigma));
    json j;
    j["command"] = "select";
    j["criterion"] = c.name;
    j["n"] = spec.n;
    j["sigma"] = sigma;
    j["sigma_source"] = sigma_source;
    j["lambda_hat"] = sel.lambda_hat;
    j["df_hat"] = sel.df_hat;
    j["loss"] = sel.loss;
    j["at_boundary"] = std::string(to_string(sel.at_boundary));
    j["cp"] = cp_statistic(spec, sel.lambda_hat, y, sigma, omega);
    try {
        j["gcv"] = gcv_statistic(spec, sel.lambda_hat, y, omega);
    } catch (const DomainError&) {
        j["gcv"] = nullptr;
    }
    print_summary(j);
    return kExitOk;
}

int cmd_simulate(const std::string& config, const std::string& output_dir, std::size_t replicates) {
    SimConfig cfg = load_config(config);
    if (!output_dir.empty()) cfg.output_dir = output_dir;
    if (replicates) cfg.replicates = replicates;
    const SimulationSummary s = run_simulation_to_dir(cfg);
    json j;
    j["command"] = "simulate";
    j["runs"] = (cfg.output_dir / "runs.csv").string();
    j["records"] = s.records;
    j["failed_records"] = s.failed_records;
    j["failed_sizes"] = s.failed_sizes;
    print_summary(j);
    return s.failed_sizes.empty() ? kExitOk : kExitFailure;
}

int cmd_tables(const std::string& runs_path, const std::string& config, const std::string& output_dir) {
    const fs::path runs(runs_path);
    const fs::path config_path = config.empty() ? runs.parent_path() / "config.json" : fs::path(config);
    SimConfig cfg = load_config(config_path);
    const fs::path out = output_dir.empty() ? runs.parent_path() : fs::path(output_dir);
    const auto records = read_runs(runs);
    SpectrumCache cache(out / "spectrum_cache");
    const TableFiles files = emit_tables(records, cfg, out, cache);
    json j;
    j["command"] = "tables";
    j["records"] = records.size();
    j["table1"] = files.table1.string();
    j["table2"] = files.table2.string();
    j["fig4_hist"] = files.fig4_hist.string();
    j["df0_bars"] = files.df0_bars.string();
    j["missing_cells"] = files.missing_cells;
    print_summary(j);
    return kExitOk;
}

int cmd_curvature(const Study& study) {
    const SimConfig cfg = study.resolve(".", 1);
    SpectrumCache cache(cache_dir(cfg));
    const auto criteria = criteria_of(cfg);
    const fs::path path = cfg.output_dir / "table1.csv";
    auto out = open_output(path);
    out << curvature_csv_header() << '\n';
    for (std::size_t n : cfg.n_list) {
        const Prepared p = prepare(cfg, cache, n);
        for (const auto& c : criteria)
            out << curvature_csv_row(n, c.name, p.ideal.lambda, p.ideal.df, curvature_sq(c, *p.spec, p.ideal.lambda))
                << '\n';
    }
    json j;
    j["command"] = "curvature";
    j["table1"] = path.string();
    print_summary(j);
    return kExitOk;
}

int cmd_reversal(const Study& study) {
    const SimConfig cfg = study.resolve(".", 10000);
    SpectrumCache cache(cache_dir(cfg));
    const auto criteria = criteria_of(cfg);
    const fs::path path = cfg.output_dir / "reversal.csv";
    auto out = open_output(path);
    out << reversal_csv_header() << '\n';
    for (std::size_t n : cfg.n_list) {
        const Prepared p = prepare(cfg, cache, n);
        for (const auto& c : criteria) {
            ReversalSummary s = reversal_moments(c, *p.spec, p.truth, p.ideal.lambda);
            const ReversalProbability mc = reversal_prob_mc(c, *p.spec, p.truth, p.ideal.lambda, cfg.replicates, cfg.seed);
            s.prob_mc = mc.prob;
            s.mc_se = mc.se;
            out << reversal_csv_row(n, c.name, s) << '\n';
        }
    }
    json j;
    j["command"] = "reversal";
    j["reversal"] = path.string();
    print_summary(j);
    return kExitOk;
}

int cmd_decompose(const Study& study) {
    const SimConfig cfg = study.resolve(".", 2000);
    SpectrumCache cache(cache_dir(cfg));
    const auto criteria = criteria_of(cfg);
    json all = json::array();
    for (std::size_t n : cfg.n_list) {
        const auto spec = cache.get(design_for_n(cfg.design, n));
        const TruthSpectrum truth = make_truth(*spec, truth_curve(cfg.truth, spec->x), cfg.sigma);
        for (const auto& c : criteria) {
            json entry;
            entry["n"] = n;
            entry["criterion"] = c.name;
            entry["report"] = json::parse(to_json(decomposition_mc(c, *spec, truth, cfg.replicates, cfg.seed)));
            try {
                const DecompositionApprox a = decomposition_approx(c, *spec, truth);
                entry["approx"] = {{"variability_approx", a.variability_approx},
                                   {"covariance_approx", a.covariance_approx},
                                   {"q_value", a.q_value}};
            } catch (const Error& e) {
                entry["approx"] = {{"unavailable", e.what()}};
            }
            all.push_back(entry);
        }
    }
    const fs::path path = cfg.output_dir / "decomposition.json";
    auto out = open_output(path);
    out << all.dump(2) << '\n';
    json j;
    j["command"] = "decompose";
    j["decomposition"] = path.string();
    print_summary(j);
    return kExitOk;
}

int cmd_rates(const Study& study) {
    const SimConfig cfg = study.resolve(".", 1);
    SpectrumCache cache(cache_dir(cfg));
    const auto criteria = criteria_of(cfg);
    const fs::path path = cfg.output_dir / "rates.csv";
    auto out = open_output(path);
    out << "criterion,n,lambda_c,df_c,at_boundary,lambda_0,gamma_sq\n";
    json summary = json::array();
    const DesignFactory factory = [&](std::size_t n) { return design_for_n(cfg.design, n); };
    const CurveFunction curve = [&](const std::vector<double>& x) { return truth_curve(cfg.truth, x); };
    for (const auto& c : criteria) {
        const RateProbe probe = rate_probe(c, factory, cfg.n_list, curve, cfg.sigma, cache);
        std::vector<double> ns, gammas;
        for (const RateRow& row : probe.rows) {
            const Prepared p = prepare(cfg, cache, row.n);
            const double gamma_sq = curvature_sq(c, *p.spec, p.ideal.lambda);
            out << c.name << ',' << row.n << ',' << format_double(row.lambda_c) << ',' << format_double(row.df_c) << ','
                << to_string(row.boundary) << ',' << format_double(p.ideal.lambda) << ',' << format_double(gamma_sq)
                << '\n';
            ns.push_back(static_cast<double>(row.n));
            gammas.push_back(gamma_sq);
        }
        json entry;
        entry["criterion"] = c.name;
        entry["slope_log_lambda_c"] = probe.slope_log_lambda;
        entry["slope_log_df_c"] = probe.slope_log_df;
        entry["slope_log_gamma_sq"] = log_log_slope(ns, gammas);
        entry["excluded"] = probe.excluded;
        summary.push_back(entry);
    }
    json j;
    j["command"] = "rates";
    j["rates"] = path.string();
    j["slopes"] = summary;
    print_summary(j);
    return kExitOk;
}

void print_error(const char* kind, const std::string& message) {
    json j;
    j["error"] = kind;
    j["message"] = message;
    std::cerr << j.dump() << std::endl;
}

}  // namespace

int run_cli(int argc, char** argv) {
    CLI::App app{"Smoothing-parameter selection for cubic smoothing splines"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "splinesel 1.0");

    std::string spectrum_design, spectrum_output;
    std::size_t spectrum_n = 0;
    auto* spectrum = app.add_subcommand("spectrum", "decompose a design and write its spectrum file");
    spectrum->add_option("--design", spectrum_design, "design template (default equispaced(-1,1))");
    spectrum->add_option("--n", spectrum_n, "sample size");
    spectrum->add_option("--output", spectrum_output, "spectrum file to write");

    std::string select_input, select_criterion = "cp", select_sigma = "known:1.0";
    double select_omega = 1.0;
    auto* select_cmd = app.add_subcommand("select", "select the smoothing parameter for one dataset");
    select_cmd->add_option("--input", select_input, "CSV file with x,y rows")->required();
    select_cmd->add_option("--criterion", select_criterion, "criterion id");
    select_cmd->add_option("--sigma", select_sigma, "known:<sigma>, estimated or estimated:<M>");
    select_cmd->add_option("--omega", select_omega, "penalty factor for the reported Cp and GCV")
        ->check(CLI::PositiveNumber);

    std::string sim_config, sim_output;
    std::size_t sim_replicates = 0;
    auto* simulate = app.add_subcommand("simulate", "run the Monte Carlo experiment");
    simulate->add_option("--config", sim_config, "JSON experiment config")->required();
    simulate->add_option("--output-dir", sim_output, "override output_dir");
    simulate->add_option("--replicates", sim_replicates, "override replicates");

    std::string tables_runs, tables_config, tables_output;
    auto* tables = app.add_subcommand("tables", "summarize runs.csv into tables");
    tables->add_option("--runs", tables_runs, "runs.csv from simulate")->required();
    tables->add_option("--config", tables_config, "experiment config (default: config.json next to runs)");
    tables->add_option("--output-dir", tables_output, "directory for the tables (default: next to runs)");

    Study curvature_study, reversal_study, decompose_study, rates_study;
    curvature_study.attach(app.add_subcommand("curvature", "squared curvature at the ideal smoothing parameter"), false);
    reversal_study.attach(app.add_subcommand("reversal", "reversal-region moments and probabilities"), true);
    decompose_study.attach(app.add_subcommand("decompose", "extra-risk decomposition by Monte Carlo"), true);
    rates_study.attach(app.add_subcommand("rates", "central smoothing parameters across sample sizes"), false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        print_error("usage", e.what());
        return kExitUsage;
    }

    try {
        if (spectrum->parsed()) return cmd_spectrum(spectrum_design, spectrum_n, spectrum_output);
        if (select_cmd->parsed()) return cmd_select(select_input, select_criterion, select_sigma, select_omega);
        if (simulate->parsed()) return cmd_simulate(sim_config, sim_output, sim_replicates);
        if (tables->parsed()) return cmd_tables(tables_runs, tables_config, tables_output);
        if (app.got_subcommand("curvature")) return cmd_curvature(curvature_study);
        if (app.got_subcommand("reversal")) return cmd_reversal(reversal_study);
        if (app.got_subcommand("decompose")) return cmd_decompose(decompose_study);
        if (app.got_subcommand("rates")) return cmd_rates(rates_study);
    } catch (const ConfigError& e) {
        print_error("config", e.what());
        return kExitUsage;
    } catch (const DomainError& e) {
        print_error("domain", e.what());
        return kExitFailure;
    } catch (const NumericError& e) {
        print_error("numeric", e.what());
        return kExitFailure;
    } catch (const std::exception& e) {
        print_error("failure", e.what());
        return kExitFailure;
    }
    return kExitUsage;
}

}  // namespace splinesel
