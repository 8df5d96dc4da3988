#pragma once

#include "apg/data.hpp"
#include "apg/trace_csv.hpp"
#include "apg/verification.hpp"

#include <optional>
#include <string>
#include <vector>

namespace apg {

/// Flat key=value experiment description; command-line flags override fields
/// after the file is read.
struct ExperimentConfig {
    std::string preset_name;
    std::vector<std::string> solvers; // pgd|fista|fista-classical|apg-mu|apg-es|adapt|adapt-v2|restart[:gamma]
    int max_iters = 10000;
    std::optional<double> gap_tol;
    double gamma = 1.0;
    std::uint64_t seed = 1;
    std::string out_dir = "out";
    double reference_tol = 1e-9;
    bool synthetic_fallback = false;
    std::string data_dir;
    bool timing = false; // adds wall_ns values to CSVs (breaks byte determinism)
    int record_every = 1;
};

ExperimentConfig load_experiment_config(const std::string& path);
void apply_config_entry(ExperimentConfig& config, const std::string& key,
                        const std::string& value);

struct ReferenceRecord {
    std::string hash;
    double f_star = 0.0;
    double cert = 0.0; // final reduced-gradient norm
    std::string solver;
    long iters = 0;
    std::string timestamp;
    bool from_cache = false;

    std::string to_line() const;
    static ReferenceRecord from_line(const std::string& line);
};

/// Reference f* by running the accelerated method to ||g_L(y_k)|| <= tol
/// (cap 1e6 iterations); the minimum observed objective is stored. Cached in
/// <cache_dir>/<hash>.ref keyed by the problem content hash. Throws
/// ConfigError when the certificate cannot be reached.
ReferenceRecord compute_reference(const CompositeProblem& problem, double tol,
                                  const std::string& cache_dir);

struct SolverSummary {
    std::string solver;
    std::string csv_path;
    std::string termination;
    std::string message; // divergence/skip note
    long iters = 0;
    std::optional<long> it_gap_1e4, it_gap_1e8, it_gap_1e12;
    std::optional<double> final_gap;
};

struct ExperimentResult {
    std::vector<SolverSummary> summaries;
    std::string summary_csv;
    std::optional<ReferenceRecord> reference;
};

/// One CSV per solver plus a summary table of iterations-to-gap thresholds;
/// deterministic under (config, seed). A diverging solver is recorded in the
/// summary without aborting the others.
ExperimentResult run_experiment(const ExperimentConfig& config);

struct VerifyResult {
    std::vector<CheckReport> reports;
    bool all_passed = false;
    std::string summary_text;
};

/// The spectral verification battery: every proposition/lemma checker on
/// ground-truth instances, the estimator convergence bound, a falsifiability
/// self-test on a corrupted trace, and the explicit skip list for composite
/// problems without ground truth. Writes report CSVs when out_dir is set.
VerifyResult run_verify_battery(const std::string& out_dir = "");

} // namespace apg
