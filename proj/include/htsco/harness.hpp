#ifndef HTSCO_HARNESS_HPP
#define HTSCO_HARNESS_HPP

#include "htsco/constants.hpp"
#include "htsco/localize.hpp"
#include "htsco/problems.hpp"

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace htsco::harness {

// Problem description as it appears in the [problem] config section.
struct ProblemSpec {
    std::string kind = "linear";  // linear | linear_capped | mean | glm_logistic | glm_pseudo_huber
    std::size_t d = 4;
    int k = 2;
    double alpha = 2.5;
    double g2 = 1.0;
    double diameter = 1.0;
    double r_cap = 0.0;            // linear_capped
    double pseudo_huber_delta = 1.0;
    double cap_quantile = 0.999;   // glm covariate cap
    double mean_weight = 0.5;      // linear mean direction mass
};

problems::Problem build_problem(const ProblemSpec& spec, std::size_t d, int k);

struct ExperimentConfig {
    ProblemSpec problem;
    std::string algorithm = "ht_dpsco";
    std::vector<std::size_t> n_grid = {1024};
    std::vector<double> rho_grid = {1.0};
    std::vector<std::size_t> d_grid;  // empty: use problem.d
    std::vector<int> k_grid;          // empty: use problem.k
    double eps = 1.0;                 // alg_smooth
    double delta = 1e-3;
    double lambda = 0.1;              // cdpsgd
    double clip = 1.0;                // opcsgd
    double eta = 0.1;                 // opcsgd
    std::size_t seeds = 10;
    std::uint64_t master_seed = 1;
    std::string output;
    Constants constants;
    // rho -> infinity analog for scaling runs; has no config-file key and is
    // therefore unreachable from the CLI.
    mech::NoiseMode noise = mech::NoiseMode::on;
    // Research-only escape hatch (CLI --unsafe-override): skips the smooth
    // solver's privacy-precondition validation and stamps rows non-private.
    bool unsafe_override = false;

    void validate() const;
};

// Structured key-value text: `[section]` headers, `key = value` lines,
// `#` comments; grid-valued keys take space-separated lists.
ExperimentConfig parse_config(std::istream& is);
ExperimentConfig parse_config_file(const std::string& path);

struct TrialRow {
    std::size_t cell = 0;
    std::uint64_t seed = 0;
    std::size_t n = 0;
    std::size_t d = 0;
    int k = 2;
    double rho = 0.0;
    double excess_loss = 0.0;
    double rho_total = 0.0;
    long clip_count = 0;
    long grad_queries = 0;
    bool halted = false;
    bool non_private = false;
};

std::vector<TrialRow> run_experiment(const ExperimentConfig& config);
void write_rows_csv(std::ostream& os, const std::vector<TrialRow>& rows);
std::vector<TrialRow> read_rows_csv(std::istream& is);

enum class ScalingAxis { N, Rho, D };

struct ScalingReport {
    double slope = 0.0;
    double ci_lo = 0.0, ci_hi = 0.0;
    std::vector<double> axis_values;
    std::vector<double> medians;
    std::vector<double> residuals;
    bool degenerate = false;
    std::string note;
};

// Least squares on log-transformed medians vs the swept axis; CI by seed
// bootstrap within each cell.
ScalingReport fit_scaling(const std::vector<TrialRow>& rows, ScalingAxis axis,
                          std::size_t bootstrap = 200, std::uint64_t seed = 7);

struct AuditResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

// Operation overrides for mutation tests (a broken clip must make the
// audits fail with a witness).
struct AuditHooks {
    std::function<Vec(const Vec&, double)> clip_fn;
};

struct AuditOptions {
    std::size_t seeds = 500;        // coupled-run audits
    std::size_t sweep = 100000;     // contraction sweeps
    std::size_t glm_sweep = 1000000;
    std::size_t mc_draws = 1000000;
    std::size_t support_draws = 10000000;
    std::uint64_t master_seed = 2024;
    std::string csv_dir;            // when set, drift audits export row CSVs here
    AuditHooks hooks;
};

// Registered audit names: counterexample, sensitivity-cdpsgd,
// sensitivity-smooth, sensitivity-glm, contract-smooth, contract-glm, svt,
// geom-agg, clip-bias, clip-norm, laplace, drift-ops, ledger, all.
std::vector<AuditResult> run_audits(const std::string& selector,
                                    const AuditOptions& options = {});

bool all_passed(const std::vector<AuditResult>& results);
void print_audit_results(std::ostream& os, const std::vector<AuditResult>& results);

// Calibration runs backing the shipped Constants defaults. Reports the
// smallest factors passing the subproblem radius checks on the quadratic
// benchmark, and the empirical success rate of the portion solver contract.
struct CalibrationReport {
    double c_rp = 0.0;
    double c_erm = 0.0;
    double odc_success_rate = 0.0;  // target >= 0.8
    std::string summary;
};

CalibrationReport calibrate(std::size_t n = 4096, std::size_t seeds = 500,
                            std::uint64_t master_seed = 11);

// Population excess loss via the analytic form when available, otherwise a
// common-random-numbers Monte Carlo population estimate against x*.
double excess_loss_oracle(const problems::Problem& problem, const Vec& x,
                          std::uint64_t oracle_seed = 99, std::size_t mc_samples = 200000);

}  // namespace htsco::harness

#endif
