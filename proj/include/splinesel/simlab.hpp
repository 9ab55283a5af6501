#pragma once

// Monte Carlo experiment driver: data generation, per-replicate selection for
// every criterion, persistence of run records and the summary tables.

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "splinesel/criteria.hpp"
#include "splinesel/spectrum.hpp"

namespace splinesel {

struct SigmaMode {
    bool estimated = false;
    std::size_t terms = 0;  ///< M for sigma_estimate; 0 means default_sigma_terms(n)

    /// "known", "estimated" or "estimated:M".
    static SigmaMode parse(const std::string& text);
    std::string to_string() const;
};

struct SimConfig {
    DesignSpec design = Equispaced{-1.0, 1.0, 0};  ///< n is taken from n_list
    std::vector<std::size_t> n_list{61, 121, 241, 481, 961};
    std::size_t replicates = 1000;
    std::uint64_t seed = 20240601;
    std::vector<std::string> criteria{"cp", "gml", "ee"};
    std::string truth = "paper-fig3";
    double sigma = 1.0;
    SigmaMode sigma_mode;
    std::filesystem::path output_dir = "out";
};

/// Parse a design template: "equispaced(lo,hi)", "quantile(uniform(a,b))",
/// "quantile(normal(m,s))" or "explicit(x1,x2,...)".
DesignSpec parse_design(const std::string& text);
std::string design_template_string(const DesignSpec& design);

/// The template with its sample size set to n.  Explicit designs require n == x.size().
DesignSpec design_for_n(const DesignSpec& design, std::size_t n);

SimConfig config_from_json_text(const std::string& text);
SimConfig load_config(const std::filesystem::path& path);
std::string config_to_json_text(const SimConfig& cfg);

/// Validates invariants (replicates >= 1, n_list nonempty, σ > 0, known ids).
void validate(const SimConfig& cfg);

/// Truth ids: "paper-fig3" (sin(π(x+1))/(x/2+1)), "zero", "linear(a,b)" (a + b x),
/// "expr:<expression in x>".
Eigen::VectorXd truth_curve(const std::string& id, const std::vector<double>& x);

struct RunRecord {
    std::size_t n = 0;
    std::size_t replicate = 0;
    std::string criterion;
    double lambda_hat = 0.0;
    double df_hat = 0.0;
    double sqerr = 0.0;           ///< ‖ĝ_λ̂ − g‖²
    double sqerr_response = 0.0;  ///< σ² · sqerr
    std::string at_boundary;      ///< none | low | high | error
};

std::string runs_csv_header();
std::string to_csv_row(const RunRecord& r);
std::vector<RunRecord> read_runs(const std::filesystem::path& path);

using RecordSink = std::function<void(const RunRecord&)>;

struct SimulationSummary {
    std::size_t records = 0;
    std::size_t failed_records = 0;
    std::vector<std::size_t> failed_sizes;  ///< n values whose spectrum could not be built
};

/// Runs every (n, replicate, criterion) cell and feeds records to `sink` in
/// (n, replicate, criterion) order.  Replicate r at size n uses
/// y = f + σ ε with ε from NormalStream(seed, n, r), shared by all criteria.
SimulationSummary run_simulation(const SimConfig& cfg, SpectrumCache& cache, const RecordSink& sink,
                                 unsigned workers = 0);

/// run_simulation writing <output_dir>/runs.csv and <output_dir>/config.json,
/// with the spectrum cache in <output_dir>/spectrum_cache.
SimulationSummary run_simulation_to_dir(const SimConfig& cfg, unsigned workers = 0);

struct TableFiles {
    std::filesystem::path table1, table2, fig4_hist, df0_bars;
    std::size_t missing_cells = 0;
};

/// Writes table1.csv, table2.csv, fig4_hist.csv and df0_bars.csv into out_dir.
TableFiles emit_tables(const std::vector<RunRecord>& records, const SimConfig& cfg,
                       const std::filesystem::path& out_dir, SpectrumCache& cache);

}  // namespace splinesel
