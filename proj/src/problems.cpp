#include "htsco/problems.hpp"
#include "htsco/errors.hpp"

#include <cmath>
#include <limits>

namespace htsco::problems {

using mech::RngStream;

double pareto_moment(double alpha, double x_m, int j) {
    require(alpha > static_cast<double>(j), "Pareto moment of order >= alpha is infinite");
    require(x_m > 0.0, "Pareto scale must be positive");
    return alpha * std::pow(x_m, j) / (alpha - static_cast<double>(j));
}

double sample_pareto(double alpha, double x_m, RngStream& rng) {
    // Inverse CDF; 1 - u stays in (0, 1].
    const double u = rng.next_double();
    return x_m * std::pow(1.0 - u, -1.0 / alpha);
}

namespace {

// E min(r, cap)^j for r ~ Pareto(alpha, x_m), cap >= x_m.
double capped_pareto_moment(double alpha, double x_m, double cap, int j) {
    require(cap >= x_m, "cap below Pareto scale");
    const double dj = static_cast<double>(j);
    const double body =
        alpha * (std::pow(x_m, dj) - std::pow(x_m, alpha) * std::pow(cap, dj - alpha)) /
        (alpha - dj);
    const double tail = std::pow(cap, dj) * std::pow(x_m / cap, alpha);
    return body + tail;
}

Vec uniform_sphere(std::size_t d, RngStream& rng) {
    require(!rng.zeroed(), "data sampling needs a live rng stream");
    Vec u(d, 0.0);
    double n = 0.0;
    do {
        for (auto& x : u) x = rng.gaussian(1.0);
        n = norm2(u);
    } while (n == 0.0);
    return scaled(std::move(u), 1.0 / n);
}

MomentProfile moments_from_raw(int k, const std::function<double(int)>& raw_moment) {
    std::vector<double> G;
    G.reserve(static_cast<std::size_t>(k));
    for (int j = 1; j <= k; ++j)
        G.push_back(std::pow(raw_moment(j), 1.0 / static_cast<double>(j)));
    // Jensen makes the G_j nondecreasing up to rounding; enforce exactly.
    for (std::size_t i = 1; i < G.size(); ++i)
        if (G[i] < G[i - 1]) G[i] = G[i - 1];
    return MomentProfile(k, std::move(G));
}

SampleLoss linear_loss(std::int64_t id, Vec s) {
    SampleLoss out;
    out.id = id;
    out.payload = s;
    out.lip_overestimate = norm2(s);
    out.value = [s](const Vec& x) { return dot(s, x); };
    out.gradient = [s](const Vec&) { return s; };
    return out;
}

SampleLoss quadratic_loss(std::int64_t id, Vec s, double lip_bar) {
    SampleLoss out;
    out.id = id;
    out.payload = s;
    out.lip_overestimate = lip_bar;
    out.value = [s](const Vec& x) { return 0.5 * dot(sub(x, s), sub(x, s)); };
    out.gradient = [s](const Vec& x) { return sub(x, s); };
    return out;
}

SampleLoss glm_loss(std::int64_t id, Vec s, double lip_bar,
                    std::function<double(double)> act,
                    std::function<double(double)> act_dx) {
    SampleLoss out;
    out.id = id;
    out.payload = s;
    out.lip_overestimate = lip_bar;
    out.value = [s, act](const Vec& x) { return act(dot(s, x)); };
    out.gradient = [s, act_dx](const Vec& x) { return scaled(s, act_dx(dot(s, x))); };
    return out;
}

Problem make_linear_impl(std::size_t d, int k, double alpha, double D, double r_cap,
                         double g2, double mean_weight) {
    require(d >= 1, "dimension must be at least 1");
    require(static_cast<double>(k) < alpha, "need alpha > k for finite G_k");
    require(k >= 2 && D > 0.0 && g2 > 0.0, "bad linear problem parameters");
    require(mean_weight > 0.0 && mean_weight <= 1.0, "mean_weight must lie in (0, 1]");

    const double x_m = g2 * std::sqrt((alpha - 2.0) / alpha);
    const bool capped = std::isfinite(r_cap);
    if (capped) require(r_cap >= x_m, "r_cap below Pareto scale");

    Problem p;
    p.kind = capped ? "linear_capped" : "linear";
    p.domain = ConvexDomain::ball(zeros(d), D / 2.0);
    p.moments = moments_from_raw(k, [&](int j) {
        return capped ? capped_pareto_moment(alpha, x_m, r_cap, j)
                      : pareto_moment(alpha, x_m, j);
    });
    p.known_lipschitz = true;
    p.smooth_beta = 0.0;
    p.glm = true;  // sigma(t) = t
    p.activation_dx = [](double) { return 1.0; };
    p.activation_dx_sup = 1.0;

    const double mean_r =
        capped ? capped_pareto_moment(alpha, x_m, r_cap, 1) : pareto_moment(alpha, x_m, 1);
    Vec mean_grad = zeros(d);
    mean_grad[0] = mean_weight * mean_r;

    // argmin over the ball of <Es, x> is the boundary point opposite Es.
    Vec xs = zeros(d);
    xs[0] = -D / 2.0;
    p.x_star = xs;
    p.f_star = -(D / 2.0) * norm2(mean_grad);
    p.population_loss = [mean_grad](const Vec& x) { return dot(mean_grad, x); };

    p.sampler = [d, alpha, x_m, r_cap, capped, mean_weight](RngStream& rng) {
        double r = sample_pareto(alpha, x_m, rng);
        if (capped && r > r_cap) r = r_cap;
        Vec u;
        if (rng.next_double() < mean_weight) {
            u = zeros(d);
            u[0] = 1.0;
        } else {
            u = uniform_sphere(d, rng);
        }
        return linear_loss(0, scaled(std::move(u), r));
    };
    p.payload_decoder = [](std::int64_t id, const Vec& payload) {
        return linear_loss(id, payload);
    };
    return p;
}

}  // namespace

Problem make_linear_problem(std::size_t d, int k, double alpha, double D, double g2,
                            double mean_weight) {
    return make_linear_impl(d, k, alpha, D, std::numeric_limits<double>::infinity(), g2,
                            mean_weight);
}

Problem make_linear_problem_capped(std::size_t d, int k, double alpha, double D,
                                   double r_cap, double g2, double mean_weight) {
    return make_linear_impl(d, k, alpha, D, r_cap, g2, mean_weight);
}

Problem make_mean_estimation(std::size_t d, int k, double alpha, double R_domain,
                             double g2, Vec shift) {
    require(d >= 1 && k >= 2 && R_domain > 0.0, "bad mean estimation parameters");
    require(static_cast<double>(k) < alpha, "need alpha > k for finite G_k");
    if (shift.empty()) shift = zeros(d);
    require(shift.size() == d, "shift dimension mismatch");

    const double x_m = g2 * std::sqrt((alpha - 2.0) / alpha);
    const double base = R_domain + norm2(shift);  // x-independent part of L-bar

    Problem p;
    p.kind = "mean";
    p.domain = ConvexDomain::ball(zeros(d), R_domain);
    // L-bar_s = base + r; E (base + r)^j expands binomially in Pareto moments.
    p.moments = moments_from_raw(k, [&](int j) {
        double acc = 0.0;
        double binom = 1.0;
        for (int l = 0; l <= j; ++l) {
            const double er = l == 0 ? 1.0 : pareto_moment(alpha, x_m, l);
            acc += binom * std::pow(base, j - l) * er;
            binom *= static_cast<double>(j - l) / static_cast<double>(l + 1);
        }
        return acc;
    });
    p.known_lipschitz = true;
    p.smooth_beta = 1.0;
    p.strongly_convex_mu = 1.0;

    const double second_moment = pareto_moment(alpha, x_m, 2);
    p.x_star = p.domain.project(shift);
    p.population_loss = [shift, second_moment](const Vec& x) {
        return 0.5 * dot(sub(x, shift), sub(x, shift)) + 0.5 * second_moment;
    };
    p.f_star = p.population_loss(*p.x_star);

    p.sampler = [d, alpha, x_m, shift, base](RngStream& rng) {
        const double r = sample_pareto(alpha, x_m, rng);
        Vec s = shift;
        axpy_inplace(s, r, uniform_sphere(d, rng));
        return quadratic_loss(0, std::move(s), base + r);
    };
    p.payload_decoder = [base, shift](std::int64_t id, const Vec& payload) {
        return quadratic_loss(id, payload, base + dist(payload, shift));
    };
    return p;
}

Problem make_point_mass(std::size_t d, Vec s0, double R_domain) {
    require(d >= 1 && s0.size() == d && R_domain > 0.0, "bad point mass parameters");
    Problem p;
    p.kind = "point_mass";
    p.domain = ConvexDomain::ball(zeros(d), R_domain);
    const double lip = R_domain + norm2(s0);
    p.moments = MomentProfile(2, {lip, lip});
    p.known_lipschitz = true;
    p.smooth_beta = 1.0;
    p.strongly_convex_mu = 1.0;
    p.x_star = p.domain.project(s0);
    p.population_loss = [s0](const Vec& x) { return 0.5 * dot(sub(x, s0), sub(x, s0)); };
    p.f_star = p.population_loss(*p.x_star);
    p.sampler = [s0, lip](RngStream&) { return quadratic_loss(0, s0, lip); };
    p.payload_decoder = [lip](std::int64_t id, const Vec& payload) {
        return quadratic_loss(id, payload, lip);
    };
    return p;
}

Problem make_glm(std::size_t d, int k, Activation act, double alpha, double D, double g2,
                 double pseudo_huber_delta, double cap_quantile) {
    require(d >= 1 && k >= 2 && D > 0.0, "bad GLM parameters");
    require(static_cast<double>(k) < alpha, "need alpha > k for finite G_k");
    require(cap_quantile > 0.0 && cap_quantile < 1.0, "cap quantile must lie in (0, 1)");

    const double x_m = g2 * std::sqrt((alpha - 2.0) / alpha);
    const double r_cap = x_m * std::pow(1.0 - cap_quantile, -1.0 / alpha);

    std::function<double(double)> sigma, sigma_dx;
    double dx_sup = 0.0, ddx_sup = 0.0;
    if (act == Activation::PseudoHuber) {
        const double h = pseudo_huber_delta;
        require(h > 0.0, "pseudo-Huber delta must be positive");
        sigma = [h](double t) { return h * h * (std::sqrt(1.0 + (t / h) * (t / h)) - 1.0); };
        sigma_dx = [h](double t) { return t / std::sqrt(1.0 + (t / h) * (t / h)); };
        dx_sup = h;
        ddx_sup = 1.0;
    } else {
        sigma = [](double t) { return t > 30.0 ? t : std::log1p(std::exp(t)); };
        sigma_dx = [](double t) { return 1.0 / (1.0 + std::exp(-t)); };
        dx_sup = 1.0;
        ddx_sup = 0.25;
    }

    Problem p;
    p.kind = act == Activation::PseudoHuber ? "glm_pseudo_huber" : "glm_logistic";
    p.domain = ConvexDomain::ball(zeros(d), D / 2.0);
    p.moments = moments_from_raw(k, [&](int j) {
        return std::pow(dx_sup, j) * capped_pareto_moment(alpha, x_m, r_cap, j);
    });
    p.known_lipschitz = true;
    p.glm = true;
    p.activation_dx = sigma_dx;
    p.activation_dx_sup = dx_sup;
    p.smooth_beta = ddx_sup * r_cap * r_cap;

    // Covariate signs are symmetric, so the population gradient vanishes at 0.
    p.x_star = zeros(d);
    p.f_star = sigma(0.0);

    p.sampler = [d, alpha, x_m, r_cap, dx_sup, sigma, sigma_dx](RngStream& rng) {
        double r = std::min(sample_pareto(alpha, x_m, rng), r_cap);
        if (rng.next_double() < 0.5) r = -r;
        Vec s = scaled(uniform_sphere(d, rng), r);
        return glm_loss(0, std::move(s), dx_sup * std::fabs(r), sigma, sigma_dx);
    };
    p.payload_decoder = [dx_sup, sigma, sigma_dx](std::int64_t id, const Vec& payload) {
        return glm_loss(id, payload, dx_sup * norm2(payload), sigma, sigma_dx);
    };
    return p;
}

Dataset Problem::draw(std::size_t n, RngStream& rng) const {
    require(n >= 1, "dataset size must be at least 1");
    Dataset out;
    out.samples.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        SampleLoss s = sampler(rng);
        s.id = static_cast<std::int64_t>(i);
        out.samples.push_back(std::move(s));
    }
    return out;
}

double Problem::excess_loss(const Vec& x) const {
    if (!x_star || !population_loss)
        throw std::logic_error("problem lacks an analytic population loss");
    const double fs = f_star ? *f_star : population_loss(*x_star);
    return population_loss(x) - fs;
}

SampleLoss Problem::loss_from_payload(std::int64_t id, const Vec& payload) const {
    require(static_cast<bool>(payload_decoder), "problem has no payload decoder");
    return payload_decoder(id, payload);
}

MomentReport verify_moments(const Problem& problem, std::size_t samples, RngStream& rng,
                            double tolerance) {
    require(samples >= 10000, "verify_moments needs at least 10^4 samples");
    const int k = problem.moments.k;
    MomentReport rep;
    rep.estimates.assign(static_cast<std::size_t>(k), 0.0);
    rep.std_errors.assign(static_cast<std::size_t>(k), 0.0);
    rep.slow_convergence.assign(static_cast<std::size_t>(k), false);

    std::vector<double> sum(static_cast<std::size_t>(k), 0.0);
    std::vector<double> sumsq(static_cast<std::size_t>(k), 0.0);
    for (std::size_t i = 0; i < samples; ++i) {
        const SampleLoss s = problem.sampler(rng);
        require(s.lip_overestimate.has_value(), "sampler must declare L-bar for moment checks");
        const double L = *s.lip_overestimate;
        double pw = 1.0;
        for (int j = 0; j < k; ++j) {
            pw *= L;
            sum[static_cast<std::size_t>(j)] += pw;
            sumsq[static_cast<std::size_t>(j)] += pw * pw;
        }
    }
    const double n = static_cast<double>(samples);
    for (int j = 1; j <= k; ++j) {
        const std::size_t idx = static_cast<std::size_t>(j - 1);
        const double mean = sum[idx] / n;
        const double var = std::max(0.0, sumsq[idx] / n - mean * mean);
        const double se = std::sqrt(var / n);
        const double bound = std::pow(problem.moments.g(j), j);
        rep.estimates[idx] = mean;
        rep.std_errors[idx] = se;
        rep.bounds.push_back(bound);
        const double ceiling = bound * (1.0 + tolerance);
        if (mean - 3.0 * se > ceiling) {
            rep.passed = false;  // confident violation: generator bug signal
        } else if (mean + 3.0 * se > ceiling) {
            rep.slow_convergence[idx] = true;  // CI cannot confirm the bound
        }
    }
    return rep;
}

}  // namespace htsco::problems
