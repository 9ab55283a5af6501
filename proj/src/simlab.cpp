#include "splinesel/simlab.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include <json.hpp>

#include "splinesel/error.hpp"
#include "splinesel/expression.hpp"
#include "splinesel/format.hpp"
#include "splinesel/geometry.hpp"
#include "splinesel/oracle.hpp"
#include "splinesel/parallel.hpp"
#include "splinesel/rng.hpp"

namespace splinesel {

namespace {

using json = nlohmann::ordered_json;

constexpr std::size_t kReplicateBlock = 256;

std::string strip_spaces(const std::string& s) {
    std::string out;
    for (char ch : s)
        if (!std::isspace(static_cast<unsigned char>(ch))) out += ch;
    return out;
}

double parse_number(const std::string& s, const std::string& context) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size())
        throw ConfigError("expected a number, got '" + s + "' in '" + context + "'");
    return v;
}

std::vector<double> parse_number_list(const std::string& body, const std::string& context) {
    std::vector<double> out;
    std::stringstream ss(body);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_number(item, context));
    return out;
}

// "name(body)" -> {name, body}
std::pair<std::string, std::string> split_call(const std::string& text) {
    const auto open = text.find('(');
    if (open == std::string::npos || text.back() != ')')
        throw ConfigError("malformed '" + text + "', expected name(...)");
    return {text.substr(0, open), text.substr(open + 1, text.size() - open - 2)};
}

void warn(const std::string& message) {
    json j;
    j["warning"] = message;
    std::cerr << j.dump() << '\n';
}

DesignSpec design_from_json(const json& j) {
    if (j.is_string()) return parse_design(j.get<std::string>());
    if (!j.is_object() || !j.contains("kind")) throw ConfigError("design must be a string or an object with 'kind'");
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "equispaced") return Equispaced{j.value("lo", -1.0), j.value("hi", 1.0), 0};
    if (kind == "quantile") return Quantile{j.at("distribution").get<std::string>(), 0};
    if (kind == "explicit") return Explicit{j.at("x").get<std::vector<double>>()};
    throw ConfigError("unknown design kind '" + kind + "'");
}

json design_to_json(const DesignSpec& d) {
    json j;
    if (const auto* e = std::get_if<Equispaced>(&d)) {
        j["kind"] = "equispaced";
        j["lo"] = e->lo;
        j["hi"] = e->hi;
    } else if (const auto* q = std::get_if<Quantile>(&d)) {
        j["kind"] = "quantile";
        j["distribution"] = q->distribution;
    } else {
        j["kind"] = "explicit";
        j["x"] = std::get<Explicit>(d).x;
    }
    return j;
}

double sample_mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double sample_sd(const std::vector<double>& v) {
    const double m = sample_mean(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(item);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

}  // namespace

SigmaMode SigmaMode::parse(const std::string& text) {
    const std::string t = strip_spaces(text);
    if (t == "known") return {};
    if (t == "estimated") return {true, 0};
    if (t.rfind("estimated:", 0) == 0) {
        const std::string m = t.substr(10);
        char* end = nullptr;
        const long v = std::strtol(m.c_str(), &end, 10);
        if (m.empty() || *end != '\0' || v < 5) throw ConfigError("sigma_mode estimated:M needs an integer M >= 5");
        return {true, static_cast<std::size_t>(v)};
    }
    throw ConfigError("sigma_mode must be 'known', 'estimated' or 'estimated:M', got '" + text + "'");
}

std::string SigmaMode::to_string() const {
    if (!estimated) return "known";
    return terms == 0 ? "estimated" : "estimated:" + std::to_string(terms);
}

DesignSpec parse_design(const std::string& text) {
    const std::string t = strip_spaces(text);
    const auto [name, body] = split_call(t);
    if (name == "equispaced") {
        const auto v = parse_number_list(body, t);
        if (v.size() != 2) throw ConfigError("equispaced(lo,hi) takes two numbers");
        return Equispaced{v[0], v[1], 0};
    }
    if (name == "quantile") {
        if (body.empty()) throw ConfigError("quantile(...) needs a distribution");
        return Quantile{body, 0};
    }
    if (name == "explicit") return Explicit{parse_number_list(body, t)};
    throw ConfigError("unknown design '" + text + "'");
}

std::string design_template_string(const DesignSpec& design) {
    if (const auto* e = std::get_if<Equispaced>(&design))
        return "equispaced(" + format_double(e->lo) + "," + format_double(e->hi) + ")";
    if (const auto* q = std::get_if<Quantile>(&design)) return "quantile(" + q->distribution + ")";
    std::string s = "explicit(";
    const auto& x = std::get<Explicit>(design).x;
    for (std::size_t i = 0; i < x.size(); ++i) s += (i ? "," : "") + format_double(x[i]);
    return s + ")";
}

DesignSpec design_for_n(const DesignSpec& design, std::size_t n) {
    if (const auto* e = std::get_if<Equispaced>(&design)) return Equispaced{e->lo, e->hi, n};
    if (const auto* q = std::get_if<Quantile>(&design)) return Quantile{q->distribution, n};
    const auto& x = std::get<Explicit>(design);
    if (x.x.size() != n)
        throw ConfigError("explicit design has " + std::to_string(x.x.size()) + " points but n = " + std::to_string(n));
    return x;
}

SimConfig config_from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    static const std::set<std::string> known = {"design", "n_list",  "replicates", "seed",      "criteria",
                                                "truth",  "sigma",   "sigma_mode", "output_dir"};
    for (const auto& [key, _] : j.items())
        if (!known.count(key)) throw ConfigError("unknown config field '" + key + "'");
    SimConfig cfg;
    try {
        if (j.contains("design")) cfg.design = design_from_json(j["design"]);
        if (const auto* x = std::get_if<Explicit>(&cfg.design)) cfg.n_list = {x->x.size()};
        if (j.contains("n_list")) cfg.n_list = j["n_list"].get<std::vector<std::size_t>>();
        if (j.contains("replicates")) cfg.replicates = j["replicates"].get<std::size_t>();
        if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("criteria")) cfg.criteria = j["criteria"].get<std::vector<std::string>>();
        if (j.contains("truth")) cfg.truth = j["truth"].get<std::string>();
        if (j.contains("sigma")) cfg.sigma = j["sigma"].get<double>();
        if (j.contains("sigma_mode")) cfg.sigma_mode = SigmaMode::parse(j["sigma_mode"].get<std::string>());
        if (j.contains("output_dir")) cfg.output_dir = j["output_dir"].get<std::string>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config field has the wrong type: ") + e.what());
    }
    validate(cfg);
    return cfg;
}

SimConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return config_from_json_text(ss.str());
}

std::string config_to_json_text(const SimConfig& cfg) {
    json j;
    j["design"] = design_to_json(cfg.design);
    j["n_list"] = cfg.n_list;
    j["replicates"] = cfg.replicates;
    j["seed"] = cfg.seed;
    j["criteria"] = cfg.criteria;
    j["truth"] = cfg.truth;
    j["sigma"] = cfg.sigma;
    j["sigma_mode"] = cfg.sigma_mode.to_string();
    j["output_dir"] = cfg.output_dir.string();
    return j.dump(2);
}

void validate(const SimConfig& cfg) {
    if (cfg.replicates < 1) throw ConfigError("replicates must be >= 1");
    if (cfg.n_list.empty()) throw ConfigError("n_list must not be empty");
    if (!(cfg.sigma > 0.0) || !std::isfinite(cfg.sigma)) throw ConfigError("sigma must be positive");
    if (cfg.criteria.empty()) throw ConfigError("criteria must not be empty");
    for (const auto& id : cfg.criteria) criterion_from_id(id);
    for (std::size_t n : cfg.n_list) {
        if (n < 6) throw ConfigError("every n must be at least 6");
        design_for_n(cfg.design, n);
        if (cfg.sigma_mode.estimated) {
            const std::size_t m = cfg.sigma_mode.terms ? cfg.sigma_mode.terms : default_sigma_terms(n);
            if (m + 5 > n) throw ConfigError("sigma_mode M too large for n = " + std::to_string(n));
        }
    }
    truth_curve(cfg.truth, {0.0, 0.5, 1.0});
}

Eigen::VectorXd truth_curve(const std::string& id, const std::vector<double>& x) {
    const auto n = static_cast<Eigen::Index>(x.size());
    Eigen::VectorXd f(n);
    if (id == "paper-fig3") {
        for (Eigen::Index i = 0; i < n; ++i) f[i] = std::sin(std::numbers::pi * (x[i] + 1.0)) / (x[i] / 2.0 + 1.0);
        return f;
    }
    if (id == "zero") return Eigen::VectorXd::Zero(n);
    if (id.rfind("expr:", 0) == 0) {
        const Expression e(id.substr(5));
        for (Eigen::Index i = 0; i < n; ++i) f[i] = e(x[i]);
        if (!f.allFinite()) throw ConfigError("truth '" + id + "' is not finite at every design point");
        return f;
    }
    const std::string t = strip_spaces(id);
    if (t.rfind("linear(", 0) == 0) {
        const auto [name, body] = split_call(t);
        const auto v = parse_number_list(body, t);
        if (v.size() != 2) throw ConfigError("linear(a,b) takes two numbers");
        for (Eigen::Index i = 0; i < n; ++i) f[i] = v[0] + v[1] * x[i];
        return f;
    }
    throw ConfigError("unknown truth '" + id + "' (expected paper-fig3, zero, linear(a,b) or expr:...)");
}

std::string runs_csv_header() { return "n,replicate,criterion,lambda_hat,df_hat,sqerr,sqerr_response,at_boundary"; }

std::string to_csv_row(const RunRecord& r) {
    return std::to_string(r.n) + "," + std::to_string(r.replicate) + "," + r.criterion + "," +
           format_double(r.lambda_hat) + "," + format_double(r.df_hat) + "," + format_double(r.sqerr) + "," +
           format_double(r.sqerr_response) + "," + r.at_boundary;
}

std::vector<RunRecord> read_runs(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open runs file " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != runs_csv_header())
        throw ConfigError(path.string() + ": unexpected header, expected '" + runs_csv_header() + "'");
    std::vector<RunRecord> out;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        if (f.size() != 8) throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": expected 8 fields");
        RunRecord r;
        try {
            r.n = std::stoul(f[0]);
            r.replicate = std::stoul(f[1]);
        } catch (const std::exception&) {
            throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": malformed index");
        }
        r.criterion = f[2];
        const auto num = [&](const std::string& s) { return parse_number(s, path.string() + ":" + std::to_string(line_no)); };
        r.lambda_hat = num(f[3]);
        r.df_hat = num(f[4]);
        r.sqerr = num(f[5]);
        r.sqerr_response = num(f[6]);
        r.at_boundary = f[7];
        out.push_back(std::move(r));
    }
    return out;
}

SimulationSummary run_simulation(const SimConfig& cfg, SpectrumCache& cache, const RecordSink& sink,
                                 unsigned workers) {
    validate(cfg);
    std::vector<Criterion> criteria;
    for (const auto& id : cfg.criteria) criteria.push_back(criterion_from_id(id));
    const std::size_t nc = criteria.size();
    const double nan = std::numeric_limits<double>::quiet_NaN();

    SimulationSummary summary;
    for (std::size_t n : cfg.n_list) {
        std::shared_ptr<const DesignSpectrum> spec;
        try {
            spec = cache.get(design_for_n(cfg.design, n));
        } catch (const Error& e) {
            warn("n = " + std::to_string(n) + " skipped: " + e.what());
            summary.failed_sizes.push_back(n);
            continue;
        }
        const Eigen::VectorXd f = truth_curve(cfg.truth, spec->x);
        const Eigen::VectorXd g = rotate(*spec, f, cfg.sigma);
        const SearchWindow window = make_search_window(*spec);
        std::vector<Selector> selectors;
        selectors.reserve(nc);
        for (const auto& c : criteria) selectors.emplace_back(c, *spec, window);
        const std::size_t terms = cfg.sigma_mode.terms ? cfg.sigma_mode.terms : default_sigma_terms(n);
        const auto ni = static_cast<Eigen::Index>(n);

        for (std::size_t start = 0; start < cfg.replicates; start += kReplicateBlock) {
            const std::size_t count = std::min(kReplicateBlock, cfg.replicates - start);
            std::vector<RunRecord> block(count * nc);
            parallel_for(
                count,
                [&](std::size_t j) {
                    const std::size_t r = start + j;
                    NormalStream stream(cfg.seed, n, r);
                    const Eigen::VectorXd y = f + cfg.sigma * stream.vector(ni);
                    const Eigen::VectorXd coords = spec->U.transpose() * y;
                    double scale = cfg.sigma;
                    bool scale_ok = true;
                    if (cfg.sigma_mode.estimated) {
                        const double s2 = coords.tail(static_cast<Eigen::Index>(terms + 2)).squaredNorm() /
                                          static_cast<double>(terms - 2);
                        scale = std::sqrt(s2);
                        scale_ok = scale > 0.0 && std::isfinite(scale);
                    }
                    for (std::size_t ci = 0; ci < nc; ++ci) {
                        RunRecord& rec = block[j * nc + ci];
                        rec.n = n;
                        rec.replicate = r;
                        rec.criterion = criteria[ci].name;
                        try {
                            if (!scale_ok) throw NumericError("estimated sigma is zero");
                            const SelectionResult sel = selectors[ci](coords / scale);
                            const SmootherWeights w = weights(*spec, sel.lambda_hat);
                            const Eigen::VectorXd ghat = w.a.cwiseProduct(coords) / cfg.sigma;
                            rec.lambda_hat = sel.lambda_hat;
                            rec.df_hat = sel.df_hat;
                            rec.sqerr = (ghat - g).squaredNorm();
                            rec.sqerr_response = cfg.sigma * cfg.sigma * rec.sqerr;
                            rec.at_boundary = std::string(to_string(sel.at_boundary));
                        } catch (const Error&) {
                            rec.lambda_hat = rec.df_hat = rec.sqerr = rec.sqerr_response = nan;
                            rec.at_boundary = "error";
                        }
                    }
                },
                workers);
            for (const RunRecord& rec : block) {
                if (rec.at_boundary == "error") ++summary.failed_records;
                ++summary.records;
                sink(rec);
            }
        }
    }
    return summary;
}

SimulationSummary run_simulation_to_dir(const SimConfig& cfg, unsigned workers) {
    validate(cfg);
    std::filesystem::create_directories(cfg.output_dir);
    {
        std::ofstream cfg_out(cfg.output_dir / "config.json");
        if (!cfg_out) throw Error("cannot write " + (cfg.output_dir / "config.json").string());
        cfg_out << config_to_json_text(cfg) << '\n';
    }
    std::ofstream runs(cfg.output_dir / "runs.csv");
    if (!runs) throw Error("cannot write " + (cfg.output_dir / "runs.csv").string());
    runs << runs_csv_header() << '\n';
    SpectrumCache cache(cfg.output_dir / "spectrum_cache");
    std::size_t pending = 0;
    const auto summary = run_simulation(cfg, cache, [&](const RunRecord& r) {
        runs << to_csv_row(r) << '\n';
        if (++pending == kReplicateBlock) {
            runs.flush();
            pending = 0;
        }
    }, workers);
    runs.flush();
    if (!runs) throw Error("error while writing runs.csv");
    return summary;
}

TableFiles emit_tables(const std::vector<RunRecord>& records, const SimConfig& cfg,
                       const std::filesystem::path& out_dir, SpectrumCache& cache) {
    std::filesystem::create_directories(out_dir);
    TableFiles files;
    files.table1 = out_dir / "table1.csv";
    files.table2 = out_dir / "table2.csv";
    files.fig4_hist = out_dir / "fig4_hist.csv";
    files.df0_bars = out_dir / "df0_bars.csv";

    std::vector<Criterion> criteria;
    for (const auto& id : cfg.criteria) criteria.push_back(criterion_from_id(id));

    std::ofstream t1(files.table1), bars(files.df0_bars);
    if (!t1 || !bars) throw Error("cannot write tables in " + out_dir.string());
    t1 << curvature_csv_header() << '\n';
    bars << "n,lambda_0,df_0,at_boundary\n";
    for (std::size_t n : cfg.n_list) {
        const auto spec = cache.get(design_for_n(cfg.design, n));
        const TruthSpectrum truth = make_truth(*spec, truth_curve(cfg.truth, spec->x), cfg.sigma);
        const OracleLambda ideal = ideal_lambda(*spec, truth);
        bars << n << ',' << format_double(ideal.lambda) << ',' << format_double(ideal.df) << ','
             << to_string(ideal.boundary) << '\n';
        for (const auto& c : criteria)
            t1 << curvature_csv_row(n, c.name, ideal.lambda, ideal.df, curvature_sq(c, *spec, ideal.lambda)) << '\n';
    }

    struct Cell {
        std::vector<double> sqerr, df_hat;
        std::size_t errors = 0;
    };
    std::map<std::pair<std::string, std::size_t>, Cell> cells;
    for (const auto& r : records) {
        Cell& cell = cells[{r.criterion, r.n}];
        if (r.at_boundary == "error" || !std::isfinite(r.sqerr) || !std::isfinite(r.df_hat)) {
            ++cell.errors;
            continue;
        }
        cell.sqerr.push_back(r.sqerr);
        cell.df_hat.push_back(r.df_hat);
    }

    std::ofstream t2(files.table2), hist(files.fig4_hist);
    if (!t2 || !hist) throw Error("cannot write tables in " + out_dir.string());
    t2 << "criterion,n,count,errors,mean_sqerr,sd_sqerr,mean_df_hat,sd_df_hat,note\n";
    hist << "criterion,n,bin_lo,bin_hi,count\n";
    for (const auto& c : criteria) {
        for (std::size_t n : cfg.n_list) {
            const auto it = cells.find({c.name, n});
            if (it == cells.end() || it->second.sqerr.empty()) {
                const std::size_t errors = it == cells.end() ? 0 : it->second.errors;
                t2 << c.name << ',' << n << ",0," << errors << ",,,,,missing\n";
                warn("table2 cell (" + c.name + ", n = " + std::to_string(n) + ") has no usable records");
                ++files.missing_cells;
                continue;
            }
            const Cell& cell = it->second;
            const std::size_t count = cell.sqerr.size();
            const bool has_sd = count > 1;
            t2 << c.name << ',' << n << ',' << count << ',' << cell.errors << ','
               << format_double(sample_mean(cell.sqerr)) << ','
               << (has_sd ? format_double(sample_sd(cell.sqerr)) : "") << ','
               << format_double(sample_mean(cell.df_hat)) << ','
               << (has_sd ? format_double(sample_sd(cell.df_hat)) : "") << ",\n";

            std::map<long, std::size_t> bins;
            for (double d : cell.df_hat) ++bins[static_cast<long>(std::floor(d))];
            const long lo = bins.begin()->first, hi = bins.rbegin()->first;
            for (long b = lo; b <= hi; ++b) {
                const auto bit = bins.find(b);
                hist << c.name << ',' << n << ',' << b << ',' << b + 1 << ',' << (bit == bins.end() ? 0 : bit->second)
                     << '\n';
            }
        }
    }
    return files;
}

}  // namespace splinesel
