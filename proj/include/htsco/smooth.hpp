#ifndef HTSCO_SMOOTH_HPP
#define HTSCO_SMOOTH_HPP

#include "htsco/erm.hpp"
#include "htsco/problems.hpp"

#include <functional>
#include <utility>
#include <vector>

namespace htsco::smooth {

using erm::SolverReport;

// Parameters of the SVT-guarded phased solver. Derived per-phase values:
//   n_i = n_eff / 2^i, eta_i = eta / 4^i, omega_i = omega * 6 C eta_i beta,
//   tau_i = omega_i log(30 n_i / delta), sigma_i = 30 C eta_i sqrt(log(3/delta)) / eps,
// with count noise BLap(3/eps, c/2) per phase.
struct SmoothConfig {
    double eta = 0.0;
    double C = 0.0;
    double c = 0.0;
    double omega = 0.0;
    double eps = 0.0;
    double delta = 0.0;
    double beta = 0.0;
    int I = 0;
    std::size_t n_eff = 0;  // 2^I

    std::size_t n_i(int i) const { return n_eff >> i; }
    double eta_i(int i) const;
    double omega_i(int i) const;
    double tau_i(int i) const;
    double sigma_i(int i) const;

    // Privacy preconditions plus the parameter-consistency conditions and
    // the smoothness ceiling; throws ConfigError naming the first violated
    // inequality. `d` enters through the beta bound.
    void validate(std::size_t d, double G_k, int k) const;
};

// Canonical parameter block: eta, C, c, omega from (n, d, eps, delta, k, G, D),
// validated for the given sample smoothness beta.
SmoothConfig smooth_params(std::size_t n, std::size_t d, double eps, double delta, int k,
                           const MomentProfile& moments, double D, double beta);

// Same construction with the validation skipped; the privacy guarantee does
// not apply to runs configured this way. Reached only through the CLI's
// --unsafe-override research flag, which stamps the report as non-private.
SmoothConfig smooth_params_unchecked(std::size_t n, std::size_t d, double eps, double delta,
                                     int k, const MomentProfile& moments, double D,
                                     double beta);

// Pre-drawn mechanism noise for one run; sharing an instance across two
// runs realizes the coupled-noise audits.
struct SmoothNoise {
    std::vector<double> count_noise;                // per phase: BLap(3/eps, c/2)
    std::vector<std::vector<double>> threshold;     // per phase: BLap(omega_i, tau_i)
    std::vector<std::vector<double>> step;          // per phase/step: BLap(2 omega_i, 2 tau_i)
    std::vector<Vec> phase_gaussian;                // per phase: N(0, sigma_i^2 I_d)
};

SmoothNoise make_smooth_noise(const SmoothConfig& config, std::size_t d,
                              mech::RngStream& rng);

// Step-level trace of one phase, used by the drift audit.
struct SmoothTrace {
    std::vector<std::vector<Vec>> iterates;         // per phase: x_{i,1} .. x_{i,n_i}
    std::vector<std::vector<bool>> clip_indicator;  // per phase/step
    std::vector<long> clip_counts;                  // per phase
};

// Phased one-pass clipped SGD with SVT-guarded clip counting. Returns a
// halted report (bottom) carrying the last safe phase index when the count
// reaches the noisy cutoff.
SolverReport alg_smooth(const Dataset& data, const Vec& x0, const SmoothConfig& config,
                        const ConvexDomain& domain, mech::RngStream& rng);

SolverReport alg_smooth_with_noise(const Dataset& data, const Vec& x0,
                                   const SmoothConfig& config, const ConvexDomain& domain,
                                   const SmoothNoise& noise,
                                   SmoothTrace* trace = nullptr);

// Coupled-run sensitivity audit for the phase containing the differing
// sample: runs neighboring datasets against identical noise and, whenever
// the counts stay below the cutoffs and the clip indicators agree off j0,
// checks max_t ||x_{i,t} - x'_{i,t}|| <= 6 C eta_i.
struct DriftAuditResult {
    bool qualifying = false;
    bool skipped = false;       // preconditions not met
    std::string skip_reason;
    double max_drift = 0.0;
    double bound = 0.0;
    bool violated = false;
    double drift_before_j0 = 0.0;
    int phase = 0;                    // phase containing j0 (1-based)
    long clip_count = 0;              // clips in that phase (first run)
    bool halted = false;
    std::vector<double> step_drifts;  // per-step drift within that phase
};

DriftAuditResult audit_drift(const Dataset& data, const Dataset& neighbor,
                             std::size_t j0, const Vec& x0, const SmoothConfig& config,
                             const ConvexDomain& domain, mech::RngStream& noise_rng);

// Property sweep of || (x - x') - eta (grad f(x) - grad f(x')) || <= ||x - x'||
// over random pairs; requires eta <= 2 / beta.
struct ContractionCheck {
    bool passed = true;
    double worst_excess = 0.0;
    Vec witness_x, witness_y;
};

ContractionCheck check_smooth_contraction(const std::function<Vec(const Vec&)>& grad,
                                          double beta, double eta, std::size_t d,
                                          double range, std::size_t trials,
                                          mech::RngStream& rng, double tol = 1e-9);

// Two-dimensional witness that a contractive coupled step can stop being
// contractive once both gradients are clipped to the unit ball.
struct NoncontractionWitness {
    Vec v, g, h, g_clipped, h_clipped;
    double premise_norm = 0.0;       // || v - (g - h) ||, equals C
    double violated_coordinate = 0.0;
    double violation_threshold = 0.0;  // -C
    bool violated = false;
};

NoncontractionWitness counterexample_noncontraction(double C);

// sign(a) min(|a|, cap)
double scalar_clip(double a, double cap);

// Coupled clipped GLM step: gradients at a shared covariate are a * s and
// a' * s; clipping the scalar coefficients preserves step contraction.
std::pair<Vec, Vec> glm_clipped_step(const Vec& x, const Vec& x_prime, const Vec& covariate,
                                     const std::function<double(double)>& sigma_dx,
                                     double eta, double C);

// Phase schedule of the one-pass GLM solver.
struct GlmPhaseSchedule {
    int I = 0;
    std::size_t n_eff = 0;
    double eta = 0.0;
    double C = 0.0;
    struct Phase {
        std::size_t n_i = 0;
        double eta_i = 0.0;
        double C_i = 0.0;
        double sigma_i = 0.0;
    };
    std::vector<Phase> phases;
    double beta_bound = 0.0;
};

GlmPhaseSchedule make_glm_schedule(std::size_t n, std::size_t d, int k,
                                   const MomentProfile& moments, double D, double rho);

// One-pass phased clipped DP-SGD for smooth GLM losses. Charges the ledger
// once (phases touch disjoint samples).
SolverReport opcdpsgd_glm(const problems::Problem& problem, const Dataset& data,
                          const Vec& x0, double rho, mech::RngStream& rng,
                          mech::AccountantLedger* ledger = nullptr,
                          GlmPhaseSchedule* schedule_out = nullptr,
                          std::vector<Vec>* prenoise_phase_outputs = nullptr);

// Abstract coupled-operation drift simulator: contractive pairs, at most
// one (infinity, C)-contractive pair, and at most c = floor(C / zeta)
// (2C, zeta)-contractive pairs; the tracked gap never exceeds
// a_j zeta + b_j C <= 2C.
enum class DriftOpKind { Contractive, Jump, NearContractive };

struct DriftOpsResult {
    bool ok = true;
    double max_gap = 0.0;
    double max_excess_over_bound = 0.0;
};

DriftOpsResult simulate_drift_ops(const std::vector<DriftOpKind>& ops, double C,
                                  double zeta, mech::RngStream& rng);

}  // namespace htsco::smooth

#endif
