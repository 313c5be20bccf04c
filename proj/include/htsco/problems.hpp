#ifndef HTSCO_PROBLEMS_HPP
#define HTSCO_PROBLEMS_HPP

#include "htsco/data.hpp"
#include "htsco/domain.hpp"
#include "htsco/rng.hpp"

#include <functional>
#include <optional>
#include <string>

namespace htsco::problems {

// A sampleable family of convex losses with its domain geometry, moment
// profile, and (when available) the analytic population minimizer.
struct Problem {
    std::string kind;
    ConvexDomain domain = ConvexDomain::ball({0.0}, 1.0);
    MomentProfile moments;
    std::function<SampleLoss(mech::RngStream&)> sampler;

    std::optional<Vec> x_star;                             // population minimizer
    std::optional<double> f_star;                          // F_P(x_star)
    std::function<double(const Vec&)> population_loss;     // analytic F_P when set

    // Structure flags declared analytically by the generator.
    std::optional<double> smooth_beta;
    std::optional<double> strongly_convex_mu;
    bool glm = false;
    bool known_lipschitz = false;

    // GLM structure (set iff glm): scalar activation derivative and the
    // uniform bound sup |sigma'|.
    std::function<double(double)> activation_dx;
    double activation_dx_sup = 0.0;

    std::size_t dim() const { return domain.dim(); }
    Dataset draw(std::size_t n, mech::RngStream& rng) const;
    double excess_loss(const Vec& x) const;  // F_P(x) - F_P(x_star)

    SampleLoss loss_from_payload(std::int64_t id, const Vec& payload) const;
    std::function<SampleLoss(std::int64_t, const Vec&)> payload_decoder;
};

// Pareto(alpha) magnitudes with scale x_m: density alpha x_m^alpha / r^(alpha+1)
// on r >= x_m. Closed-form raw moments E r^j = alpha x_m^j / (alpha - j), j < alpha.
double pareto_moment(double alpha, double x_m, int j);
double sample_pareto(double alpha, double x_m, mech::RngStream& rng);

// f(x; s) = <s, x> with s = r u: r Pareto(alpha) scaled so E r^2 = g2^2,
// u a unit direction whose mean is mean_weight * e_1 (the direction equals
// e_1 with probability mean_weight, else is uniform on the sphere, so
// L_s = ||s|| = r exactly and all G_j are closed form). x* sits on the
// domain boundary opposite the mean gradient.
Problem make_linear_problem(std::size_t d, int k, double alpha, double D,
                            double g2 = 1.0, double mean_weight = 0.5);

// Same family with magnitudes capped at r_cap (bounded support); used where
// a uniform Lipschitz bound must genuinely hold.
Problem make_linear_problem_capped(std::size_t d, int k, double alpha, double D,
                                   double r_cap, double g2 = 1.0,
                                   double mean_weight = 0.5);

// f(x; s) = 1/2 ||x - s||^2 on ball(0, R_domain), s = shift + r u with r
// Pareto(alpha) and u uniform on the sphere. beta = 1, mu = 1,
// L-bar_s = R_domain + ||shift|| + r.
Problem make_mean_estimation(std::size_t d, int k, double alpha, double R_domain,
                             double g2 = 1.0, Vec shift = {});

// Degenerate zero-variance population: every sample is 1/2 ||x - s0||^2.
Problem make_point_mass(std::size_t d, Vec s0, double R_domain);

enum class Activation { PseudoHuber, Logistic };

// f(x; s) = sigma(<s, x>) with covariates s = +-(r u), r Pareto(alpha)
// capped at cap_quantile so beta = sup sigma'' * r_cap^2 is a true uniform
// bound. Signs are symmetric, so x* = 0 for both activations.
Problem make_glm(std::size_t d, int k, Activation act, double alpha, double D,
                 double g2 = 1.0, double pseudo_huber_delta = 1.0,
                 double cap_quantile = 0.999);

struct MomentReport {
    bool passed = true;
    std::vector<double> estimates;     // MC estimate of E L^j, j = 1..k
    std::vector<double> bounds;        // G_j^j
    std::vector<double> std_errors;
    std::vector<bool> slow_convergence;  // CI too wide to resolve the bound
};

// Monte Carlo check of E L-bar_s^j <= G_j^j for j = 1..k. Orders whose
// confidence interval is too wide to resolve are flagged rather than failed.
MomentReport verify_moments(const Problem& problem, std::size_t samples,
                            mech::RngStream& rng, double tolerance = 0.05);

}  // namespace htsco::problems

#endif
