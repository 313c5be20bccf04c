#ifndef HTSCO_LOCALIZE_HPP
#define HTSCO_LOCALIZE_HPP

#include "htsco/constants.hpp"
#include "htsco/erm.hpp"
#include "htsco/problems.hpp"

#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

namespace htsco::localize {

using erm::SolverReport;

// Picks the first input point that has at least 0.51 * k of the inputs
// within distance 2R of it (falling back to the first point). When a
// 0.51-fraction of the points lies within R of some unknown z, the output
// lies within 3R of z. Runs in O(d k^2).
Vec geometric_aggregate(std::span<const Vec> points, double R);

// One localization phase: given the previous center and lambda_i, return a
// candidate point inside the domain.
using PhaseOracle = std::function<Vec(const Vec& center, double lambda_i, int phase)>;

// Generic population-level localization: phases i = 1..I with
// lambda_i = lambda * 32^i; returns x_I.
Vec ploc(const Vec& x0, const PhaseOracle& oracle, double lambda, int I,
         std::vector<Vec>* phase_trace = nullptr);

// Per-phase table driving the localized solvers. Fixed-J regime: one block
// count J for all phases, portion size m a power of two, m_i = m / 2^i.
// Small-1/delta regime: per-phase J_i with delta_i = delta / 2^i.
struct LocalizationSchedule {
    struct Phase {
        double lambda_i = 0.0;
        std::size_t m_i = 0;   // samples per block
        std::size_t J_i = 0;   // blocks aggregated
        double radius_i = 0.0; // target distance Delta 4^i / lambda_i
    };
    int I = 0;
    std::size_t m_ref = 0;  // portion size the Delta formula uses
    double delta_target = 0.0;
    double Delta = 0.0;
    double lambda = 0.0;
    bool per_phase_regime = false;
    bool feasible = false;
    std::vector<Phase> phases;
    std::size_t samples_used = 0;

    // CSV: phase, lambda_i, m_i, J_i, radius_i, rho_charged
    void write_csv(std::ostream& os, double rho) const;
};

// Resolves the (I, J) interdependence by fixpoint iteration (capped at 32
// rounds; on a cycle the smallest I is kept), with J the smallest integer
// in [400 log(I/delta), 500 log(I/delta)]. The per-phase regime is selected
// when 1/delta <= ln(n)^2. Delta and the base lambda are filled in from the
// moment profile and domain diameter.
LocalizationSchedule make_localization_schedule(std::size_t n, double rho, double delta,
                                                std::size_t d,
                                                const MomentProfile& moments, double D,
                                                const Constants& constants);

// Solves min F_D(x) + (lambda/2) ||x - center||^2 privately: translates
// coordinates so the regularization center is the origin, restricts to the
// ball of radius 2 G_1 / lambda, runs the clipped DP-ERM solver, and
// projects the translated-back output onto the outer domain.
Vec solve_regularized_block(std::span<const SampleLoss> block, const Vec& center,
                            double lambda, double rho, const ConvexDomain& domain,
                            const MomentProfile& moments, mech::RngStream& rng,
                            mech::AccountantLedger& ledger, long* grad_queries = nullptr,
                            long* clip_events = nullptr);

// Splits `samples` into J disjoint blocks of n_block entries, solves the
// lambda-regularized-at-center objective independently per block, and
// geometrically aggregates with radius R. The ledger is charged once
// (disjoint blocks compose in parallel).
Vec agg_erm(const Vec& center, double lambda, std::size_t J, double rho,
            std::span<const SampleLoss> samples, std::size_t n_block, double R,
            const ConvexDomain& domain, const MomentProfile& moments,
            mech::RngStream& rng, mech::AccountantLedger& ledger,
            long* grad_queries = nullptr, long* clip_events = nullptr);

// End-to-end heavy-tailed DP-SCO driver on an explicit dataset: builds the
// localization schedule over |data| samples and runs ploc with agg_erm
// phases. Total accountant charge is exactly rho.
SolverReport ht_dpsco_on_data(const Dataset& data, const ConvexDomain& domain,
                              const MomentProfile& moments, double rho, double delta,
                              mech::RngStream& mech_rng,
                              mech::AccountantLedger* ledger = nullptr,
                              const Constants& constants = default_constants(),
                              LocalizationSchedule* schedule_out = nullptr);

// Distribution-level entry point: draws n samples from the problem, then
// defers to ht_dpsco_on_data. `mode` disables mechanism noise for the
// rho -> infinity analog used by scaling tests (never reachable from the CLI).
SolverReport ht_dpsco(const problems::Problem& problem, std::size_t n, double rho,
                      double delta, mech::RngStream& rng,
                      mech::NoiseMode mode = mech::NoiseMode::on,
                      mech::AccountantLedger* ledger = nullptr,
                      const Constants& constants = default_constants());

// Strongly convex wrapper: epoch doubling with explicit domain truncation
// between epochs (epoch e shrinks the trust ball around the previous output
// before rerunning the driver on fresh samples).
SolverReport sc_ht_dpsco(const problems::Problem& problem, std::size_t n, double rho,
                         double delta, mech::RngStream& rng,
                         mech::NoiseMode mode = mech::NoiseMode::on,
                         mech::AccountantLedger* ledger = nullptr,
                         const Constants& constants = default_constants());

// Non-private high-probability SCO over a stochastic gradient oracle and a
// proximal oracle for the composite part.
struct HpScoProblem {
    ConvexDomain domain = ConvexDomain::ball({0.0}, 1.0);
    double G = 1.0;  // second-moment bound on the oracle
    // E[grad_oracle(x)] is a subgradient of f at x.
    std::function<Vec(const Vec&, mech::RngStream&)> grad_oracle;
    // prox(v, eta) = argmin_x 1/(2 eta) ||x - v||^2 + psi(x) over the domain.
    std::function<Vec(const Vec&, double)> prox_psi;
};

Vec hp_sco(const HpScoProblem& problem, std::size_t n, double delta,
           mech::RngStream& rng, const Constants& constants = default_constants());

// Subroutine behind hp_sco's portions: prox-SGD on f + psi with psi
// lambda-strongly convex, step 2 / (lambda (t+2)), averaging the last half
// of the iterates. Satisfies ||xbar - x*|| <= 30 G / (lambda sqrt(T)) with
// probability 4/5 (verified empirically by the calibration run).
Vec strongly_convex_portion_solver(const HpScoProblem& problem,
                                   const std::function<Vec(const Vec&, double)>& prox,
                                   double lambda, long T, const Vec& x0,
                                   mech::RngStream& rng);

}  // namespace htsco::localize

#endif
