#ifndef HTSCO_ERM_HPP
#define HTSCO_ERM_HPP

#include "htsco/budget.hpp"
#include "htsco/data.hpp"
#include "htsco/domain.hpp"
#include "htsco/rng.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace htsco::erm {

// Result of one solver run. `halted` is set only by solvers that can emit
// the bottom symbol; `warning` records degraded-mode returns (e.g. a sample
// budget too small for any feasible schedule).
struct SolverReport {
    Vec x;
    long clip_count = 0;
    std::vector<double> phase_noise_norms;
    std::uint64_t seed = 0;
    bool halted = false;
    int halt_phase = -1;
    long grad_queries = 0;
    double rho_charged = 0.0;
    std::string warning;
    std::optional<std::vector<Vec>> trace;
    std::vector<double> epoch_radii;  // strongly convex wrapper trust radii

    // Fields echoed into the CSV export.
    std::size_t n = 0;
    std::size_t d = 0;
    double rho = 0.0;
    double clip_threshold = 0.0;
    double lambda = 0.0;
    long iterations = 0;
};

// CSV: run_id, seed, n, d, rho, C, lambda, T, excess_loss, clip_count, halted
void write_report_csv_header(std::ostream& os);
void write_report_csv_row(std::ostream& os, const std::string& run_id,
                          const SolverReport& report, double excess_loss);

// Configuration for the regularized clipped DP-SGD solver. The dp-erm
// schedule fixes eta_t = 4 / (lambda (t+1)), sigma^2 = 2 C^2 T / (n^2 rho),
// and T >= max(n, n^2 rho / d); make() rounds T up to a power of two so the
// per-step privacy charge rho/T is exact in floating point.
struct ErmConfig {
    double C = 1.0;
    double lambda = 0.0;
    double sigma2 = 0.0;
    long T = 0;
    double r = 0.0;  // enclosing radius: domain is contained in ball(0, r)
    ConvexDomain domain = ConvexDomain::ball({0.0}, 1.0);

    static ErmConfig make(double C, double lambda, std::size_t n, double rho,
                          std::size_t d, const ConvexDomain& domain);
    void validate(std::size_t n, double rho, std::size_t d) const;
};

// One-pass projected SGD with clipped sample gradients. Consumes the first
// T stream entries in order and returns the uniform average of x_0..x_{T-1}.
Vec opcsgd(std::span<const SampleLoss> stream, double C, double eta, long T,
           const ConvexDomain& domain, const Vec& x0, long* clip_events = nullptr);

// Variant with per-step clip activation thresholds Chat_t (all >= C/2):
// gradients with norm below Chat_t pass through unclipped.
Vec opcsgd_randomized_threshold(std::span<const SampleLoss> stream, double C,
                                std::span<const double> chat, double eta, long T,
                                const ConvexDomain& domain, const Vec& x0,
                                long* clip_events = nullptr);

// Full-batch clipped DP-SGD on the lambda-regularized empirical objective.
// Each step releases the 2C/n-sensitive clipped mean gradient through the
// Gaussian mechanism; the cost rho/T is registered per step when a ledger
// is supplied. Returns the (t+4)-weighted iterate average.
SolverReport cdpsgd(const Dataset& data, const ErmConfig& config, double rho,
                    mech::RngStream& rng, mech::AccountantLedger* ledger = nullptr,
                    bool keep_trace = false);

// C <- G_k (25 n^2 rho / (32 d))^(1 / 2k)
double erm_clip_threshold(std::size_t n, double rho, std::size_t d, int k, double G_k);

// Max over probe points of || mean grad - mean clipped grad ||; a lower
// bound on the dataset clipping bias b_D (exact for linear losses). The
// report records how many probes produced it.
struct ClipBiasReport {
    double value = 0.0;
    std::size_t probe_count = 0;
};
ClipBiasReport empirical_clip_bias(const Dataset& data, double C,
                                   const ConvexDomain& domain,
                                   std::span<const Vec> probes);

// Default probe set: `count` uniform points in the domain.
std::vector<Vec> uniform_probe_points(const ConvexDomain& domain, std::size_t count,
                                      mech::RngStream& rng);

// Radius of the smallest origin-centered ball containing the domain.
double enclosing_radius(const ConvexDomain& domain);

long pow2_ceil(long v);
long pow2_floor(long v);

}  // namespace htsco::erm

#endif
