#include <doctest.h>

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "splinesel/cli.hpp"
#include "splinesel/error.hpp"
#include "splinesel/expression.hpp"
#include "splinesel/simlab.hpp"
#include "support.hpp"

using namespace splinesel;

namespace {

int cli(std::vector<std::string> args) {
    args.insert(args.begin(), "splinesel");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    return run_cli(static_cast<int>(argv.size()), argv.data());
}

std::vector<std::string> collect_rows(const SimConfig& cfg, unsigned workers) {
    SpectrumCache cache;
    std::vector<std::string> rows;
    run_simulation(cfg, cache, [&](const RunRecord& r) { rows.push_back(to_csv_row(r)); }, workers);
    return rows;
}

std::vector<RunRecord> collect(const SimConfig& cfg, unsigned workers = 0) {
    SpectrumCache cache;
    std::vector<RunRecord> out;
    run_simulation(cfg, cache, [&](const RunRecord& r) { out.push_back(r); }, workers);
    return out;
}

SimConfig small_config() {
    SimConfig cfg;
    cfg.n_list = {31, 61};
    cfg.replicates = 40;
    cfg.seed = 7;
    return cfg;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
    std::ifstream in(path);
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) lines.push_back(line);
    return lines;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
}

}  // namespace

TEST_SUITE("simlab") {

TEST_CASE("truth curves") {
    const std::vector<double> x{-1.0, -0.5, 0.0, 0.5};
    const Eigen::VectorXd f = truth_curve("paper-fig3", x);
    CHECK(std::abs(f[0]) < 1e-15);
    CHECK(f[1] == doctest::Approx(4.0 / 3.0).epsilon(1e-15));
    CHECK(std::abs(f[2]) < 1e-15);
    CHECK(f[3] == doctest::Approx(-1.0 / 1.25).epsilon(1e-14));
    CHECK(truth_curve("zero", x).isZero(0.0));
    const Eigen::VectorXd line = truth_curve("linear(2,-3)", x);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(line[static_cast<Eigen::Index>(i)] == doctest::Approx(2.0 - 3.0 * x[i]));
    const Eigen::VectorXd e = truth_curve("expr:sin(pi*(x+1))/(x/2+1)", x);
    CHECK((e - f).cwiseAbs().maxCoeff() < 1e-15);
    CHECK_THROWS_AS(truth_curve("wiggly", x), ConfigError);
    CHECK_THROWS_AS(truth_curve("expr:x+", x), ConfigError);
}

TEST_CASE("expression parser") {
    CHECK(Expression("1 + 2 * 3")(0.0) == 7.0);
    CHECK(Expression("(1 + 2) * 3")(0.0) == 9.0);
    CHECK(Expression("2^3^2")(0.0) == 512.0);
    CHECK(Expression("-2^2")(0.0) == -4.0);
    CHECK(Expression("(-2)^2")(0.0) == 4.0);
    CHECK(Expression("2*-x")(3.0) == -6.0);
    CHECK(Expression("2^-1")(0.0) == 0.5);
    CHECK(Expression("8 / 4 / 2")(0.0) == 1.0);
    CHECK(Expression("10 - 4 - 3")(0.0) == 3.0);
    CHECK(Expression("1.5e2 + .5")(0.0) == 150.5);
    CHECK(Expression("pi")(0.0) == std::numbers::pi);
    CHECK(Expression("e")(0.0) == std::numbers::e);
    CHECK(Expression("exp(log(x)) + sqrt(abs(-x)) + cos(0) + tan(0)")(4.0) == doctest::Approx(7.0));
    const Expression moved = Expression("x*x");
    CHECK(moved(3.0) == 9.0);
    CHECK(moved.text() == "x*x");
    for (const char* bad : {"", "1 +", "(1", "1)", "foo(1)", "1 2", "x ^", "sin 1", "3 $ 4"})
        CHECK_THROWS_AS(Expression{bad}, ConfigError);
}

TEST_CASE("sigma modes") {
    CHECK_FALSE(SigmaMode::parse("known").estimated);
    const SigmaMode def = SigmaMode::parse("estimated");
    CHECK(def.estimated);
    CHECK(def.terms == 0);
    const SigmaMode m = SigmaMode::parse("estimated:30");
    CHECK(m.terms == 30);
    CHECK(m.to_string() == "estimated:30");
    CHECK(def.to_string() == "estimated");
    CHECK_THROWS_AS(SigmaMode::parse("guessed"), ConfigError);
    CHECK_THROWS_AS(SigmaMode::parse("estimated:abc"), ConfigError);
}

TEST_CASE("design templates") {
    const DesignSpec eq = parse_design("equispaced(-1,1)");
    CHECK(describe(design_for_n(eq, 61)) == "equispaced(-1,1,61)");
    CHECK(design_template_string(eq) == "equispaced(-1,1)");
    const DesignSpec q = parse_design("quantile(normal(0,1))");
    CHECK(build_design(design_for_n(q, 9)).size() == 9);
    CHECK(parse_design(design_template_string(q)).index() == q.index());
    const DesignSpec ex = parse_design("explicit(0,0.5,1.5,2,4)");
    CHECK(build_design(design_for_n(ex, 5)).x.back() == 4.0);
    CHECK_THROWS(design_for_n(ex, 6));
    CHECK_THROWS_AS(parse_design("grid(1,2)"), ConfigError);
    CHECK_THROWS_AS(parse_design("equispaced(1)"), ConfigError);
}

TEST_CASE("config parsing and validation") {
    const SimConfig defaults = config_from_json_text("{}");
    CHECK(defaults.n_list == std::vector<std::size_t>{61, 121, 241, 481, 961});
    CHECK(defaults.replicates == 1000);
    CHECK(defaults.criteria == std::vector<std::string>{"cp", "gml", "ee"});
    CHECK(defaults.truth == "paper-fig3");
    CHECK_FALSE(defaults.sigma_mode.estimated);

    const SimConfig cfg = config_from_json_text(R"j({
        "design": "quantile(uniform(0,1))", "n_list": [50, 100], "replicates": 12, "seed": 99,
        "criteria": ["gml", "pq(3,1)"], "truth": "expr:x^2", "sigma": 0.5,
        "sigma_mode": "estimated:10", "output_dir": "somewhere"})j");
    CHECK(cfg.n_list == std::vector<std::size_t>{50, 100});
    CHECK(cfg.replicates == 12);
    CHECK(cfg.seed == 99);
    CHECK(cfg.sigma == 0.5);
    CHECK(cfg.sigma_mode.terms == 10);
    CHECK(cfg.output_dir == "somewhere");
    CHECK(std::holds_alternative<Quantile>(cfg.design));

    const SimConfig object_design = config_from_json_text(R"j({"design": {"kind": "equispaced", "lo": 0, "hi": 2}})j");
    CHECK(std::get<Equispaced>(object_design.design).hi == 2.0);

    const SimConfig round = config_from_json_text(config_to_json_text(cfg));
    CHECK(config_to_json_text(round) == config_to_json_text(cfg));

    CHECK_THROWS_AS(config_from_json_text("{not json"), ConfigError);
    CHECK_THROWS_AS(config_from_json_text(R"j({"replicate": 5})j"), ConfigError);
    CHECK_THROWS_AS(config_from_json_text(R"j({"replicates": "many"})j"), ConfigError);
    CHECK_THROWS_AS(config_from_json_text(R"j({"replicates": 0})j"), ConfigError);
    CHECK_THROWS_AS(config_from_json_text(R"j({"n_list": []})j"), ConfigError);
    CHECK_THROWS_AS(config_from_json_text(R"j({"sigma": 0})j"), ConfigError);
    CHECK_THROWS_AS(config_from_json_text(R"j({"criteria": ["aic"]})j"), ConfigError);
    CHECK_THROWS_AS(config_from_json_text(R"j({"truth": "bumpy"})j"), ConfigError);
}

TEST_CASE("simulation output does not depend on the worker count") {
    SimConfig cfg = small_config();
    cfg.replicates = 300;
    const auto one = collect_rows(cfg, 1);
    const auto eight = collect_rows(cfg, 8);
    REQUIRE(one.size() == 2 * 300 * 3);
    CHECK(one == eight);

    const auto records = collect(cfg, 3);
    for (std::size_t i = 1; i < records.size(); ++i) {
        const auto& a = records[i - 1];
        const auto& b = records[i];
        CHECK(std::tie(a.n, a.replicate) <= std::tie(b.n, b.replicate));
    }
    CHECK(records[0].criterion == "cp");
    CHECK(records[1].criterion == "gml");
    CHECK(records[2].criterion == "ee");
}

TEST_CASE("criteria share each replicate's data") {
    SimConfig cfg = small_config();
    cfg.criteria = {"cp", "pq(2,1)"};
    const auto records = collect(cfg);
    REQUIRE(records.size() % 2 == 0);
    for (std::size_t i = 0; i < records.size(); i += 2) {
        CHECK(records[i].lambda_hat == records[i + 1].lambda_hat);
        CHECK(records[i].sqerr == records[i + 1].sqerr);
    }
}

TEST_CASE("record bookkeeping") {
    SimConfig cfg;
    cfg.n_list = {61};
    cfg.replicates = 1000;
    const auto records = collect(cfg);
    std::map<std::string, std::size_t> counts;
    for (const auto& r : records) {
        ++counts[r.criterion];
        CHECK(r.sqerr >= 0.0);
        CHECK(r.df_hat > 2.0);
        CHECK(r.df_hat < 61.0);
        CHECK(r.sqerr_response == doctest::Approx(cfg.sigma * cfg.sigma * r.sqerr));
        CHECK(r.at_boundary != "error");
    }
    CHECK(counts["cp"] == 1000);
    CHECK(counts["gml"] == 1000);
    CHECK(counts["ee"] == 1000);
}

TEST_CASE("pure noise concentrates near the smooth end") {
    SimConfig cfg = small_config();
    cfg.truth = "zero";
    cfg.n_list = {61};
    cfg.replicates = 200;
    std::map<std::string, double> total;
    for (const auto& r : collect(cfg)) total[r.criterion] += r.df_hat;
    for (const auto& [name, sum] : total) {
        INFO(name);
        CHECK(sum / 200.0 < 4.0);
    }
}

TEST_CASE("estimated sigma mode") {
    SimConfig known = small_config();
    known.sigma = 0.3;
    SimConfig estimated = known;
    estimated.sigma_mode = SigmaMode::parse("estimated:8");
    const auto a = collect(known);
    const auto b = collect(estimated);
    REQUIRE(a.size() == b.size());
    std::size_t different = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(std::isfinite(b[i].sqerr));
        CHECK(b[i].at_boundary != "error");
        different += a[i].lambda_hat != b[i].lambda_hat;
    }
    CHECK(different > 0);
}

TEST_CASE("runs file round trip and tables") {
    const auto dir = testing_support::scratch_dir("simlab");
    SimConfig cfg = small_config();
    cfg.output_dir = dir / "out";
    const SimulationSummary summary = run_simulation_to_dir(cfg, 2);
    CHECK(summary.records == 2 * 40 * 3);
    CHECK(summary.failed_records == 0);
    CHECK(std::filesystem::exists(cfg.output_dir / "config.json"));
    CHECK(config_to_json_text(load_config(cfg.output_dir / "config.json")) == config_to_json_text(cfg));

    const auto lines = read_lines(cfg.output_dir / "runs.csv");
    CHECK(lines.front() == runs_csv_header());
    CHECK(runs_csv_header() == "n,replicate,criterion,lambda_hat,df_hat,sqerr,sqerr_response,at_boundary");
    const auto records = read_runs(cfg.output_dir / "runs.csv");
    REQUIRE(records.size() == summary.records);
    for (std::size_t i = 0; i < records.size(); ++i) CHECK(to_csv_row(records[i]) == lines[i + 1]);

    SpectrumCache cache(cfg.output_dir / "spectrum_cache");
    const TableFiles files = emit_tables(records, cfg, dir / "tables", cache);
    CHECK(files.missing_cells == 0);

    const auto t1 = read_lines(files.table1);
    CHECK(t1.size() == 1 + 2 * 3);
    const auto bars = read_lines(files.df0_bars);
    REQUIRE(bars.size() == 3);
    const double df0 = std::stod(bars[2].substr(bars[2].find(',', bars[2].find(',') + 1) + 1));
    CHECK(df0 > 2.0);
    CHECK(df0 < 61.0);

    const auto t2 = read_lines(files.table2);
    CHECK(t2.size() == 1 + 2 * 3);
    CHECK(t2.front() == "criterion,n,count,errors,mean_sqerr,sd_sqerr,mean_df_hat,sd_df_hat,note");

    std::map<std::string, std::size_t> mass;
    const auto hist = read_lines(files.fig4_hist);
    for (std::size_t i = 1; i < hist.size(); ++i) {
        std::stringstream row(hist[i]);
        std::string criterion, n, lo, hi, count;
        std::getline(row, criterion, ',');
        std::getline(row, n, ',');
        std::getline(row, lo, ',');
        std::getline(row, hi, ',');
        std::getline(row, count, ',');
        CHECK(std::stol(hi) - std::stol(lo) == 1);
        mass[criterion + "/" + n] += std::stoul(count);
    }
    CHECK(mass.size() == 6);
    for (const auto& [cell, total] : mass) {
        INFO(cell);
        CHECK(total == 40);
    }

    SimConfig wider = cfg;
    wider.n_list = {31, 61, 41};
    const TableFiles gaps = emit_tables(records, wider, dir / "gaps", cache);
    CHECK(gaps.missing_cells == 3);
    std::size_t missing_rows = 0;
    for (const auto& line : read_lines(gaps.table2)) missing_rows += line.ends_with(",missing");
    CHECK(missing_rows == 3);

    write_file(dir / "bad.csv", "n,replicate\n1,2\n");
    CHECK_THROWS_AS(read_runs(dir / "bad.csv"), ConfigError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("command line") {
    const auto dir = testing_support::scratch_dir("cli");
    CHECK(cli({}) == kExitUsage);
    CHECK(cli({"no-such-command"}) == kExitUsage);
    CHECK(cli({"simulate"}) == kExitUsage);
    CHECK(cli({"curvature", "--bogus"}) == kExitUsage);

    write_file(dir / "broken.json", "{\"replicates\": ");
    CHECK(cli({"simulate", "--config", (dir / "broken.json").string()}) == kExitUsage);

    write_file(dir / "sim.json", R"j({"n_list": [31, 61], "replicates": 25, "seed": 3})j");
    const auto out = dir / "run";
    CHECK(cli({"simulate", "--config", (dir / "sim.json").string(), "--output-dir", out.string()}) == kExitOk);
    CHECK(read_runs(out / "runs.csv").size() == 2 * 25 * 3);
    CHECK(cli({"tables", "--runs", (out / "runs.csv").string()}) == kExitOk);
    for (const char* name : {"table1.csv", "table2.csv", "fig4_hist.csv", "df0_bars.csv"}) {
        INFO(name);
        CHECK(std::filesystem::exists(out / name));
    }

    CHECK(cli({"curvature", "--n", "31,61", "--criteria", "cp,gml,ee", "--truth", "paper-fig3", "--output-dir",
               (dir / "curv").string()}) == kExitOk);
    CHECK(read_lines(dir / "curv" / "table1.csv").size() == 7);

    CHECK(cli({"spectrum", "--n", "20", "--output", (dir / "s.spec").string()}) == kExitOk);
    CHECK(load_spectrum(dir / "s.spec").n == 20);

    std::ostringstream data;
    data << "x,y\n";
    const auto x = build_design(Equispaced{-1.0, 1.0, 41}).x;
    const Eigen::VectorXd f = truth_curve("paper-fig3", x);
    for (std::size_t i = 0; i < x.size(); ++i) data << x[i] << ',' << f[static_cast<Eigen::Index>(i)] + 0.1 * std::sin(37.0 * i) << '\n';
    write_file(dir / "data.csv", data.str());
    CHECK(cli({"select", "--input", (dir / "data.csv").string(), "--criterion", "ee", "--sigma", "known:1.0"}) ==
          kExitOk);
    CHECK(cli({"select", "--input", (dir / "data.csv").string(), "--criterion", "ee", "--sigma", "estimated:10"}) ==
          kExitOk);
    CHECK(cli({"select", "--input", (dir / "data.csv").string(), "--criterion", "nope"}) == kExitUsage);
    CHECK(cli({"select", "--input", (dir / "missing.csv")}) == kExitUsage);
    std::filesystem::remove_all(dir);
}

}  // TEST_SUITE
