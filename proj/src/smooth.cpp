#include "htsco/smooth.hpp"
#include "htsco/errors.hpp"
#include "htsco/mechanisms.hpp"

#include <algorithm>
#include <cmath>

namespace htsco::smooth {

using mech::RngStream;

double SmoothConfig::eta_i(int i) const { return eta / std::pow(4.0, i); }
double SmoothConfig::omega_i(int i) const { return omega * 6.0 * C * eta_i(i) * beta; }
double SmoothConfig::tau_i(int i) const {
    return omega_i(i) * std::log(30.0 * static_cast<double>(n_i(i)) / delta);
}
double SmoothConfig::sigma_i(int i) const {
    return 30.0 * C * eta_i(i) * std::sqrt(std::log(3.0 / delta)) / eps;
}

void SmoothConfig::validate(std::size_t d, double G_k, int k) const {
    require_config(eps > 0.0 && eps < 1.0 && delta > 0.0 && delta < 1.0,
                   "smooth: eps, delta must lie in (0, 1)");
    require_config(I >= 1 && n_eff == (std::size_t{1} << I), "smooth: n_eff must equal 2^I");
    require_config(beta >= 0.0, "smooth: beta must be nonnegative");

    const double nd = static_cast<double>(n_eff);
    const double log30 = std::log(30.0 * nd / delta);
    const double log15 = std::log(15.0 * nd / delta);

    // Privacy preconditions.
    for (int i = 1; i <= I; ++i) {
        const double tau = omega_i(i) * std::log(30.0 * static_cast<double>(n_i(i)) / delta);
        require_config(C >= 8.0 * tau, "smooth: C >= 8 omega_i log(30 n_i / delta) violated");
        require_config(192.0 * eta_i(i) * beta * c <= 1.0 + 1e-12,
                       "smooth: 192 eta_i beta c <= 1 violated");
    }
    require_config(c >= 6.0 / eps * std::log(12.0 / delta),
                   "smooth: c >= (6/eps) log(12/delta) violated");
    require_config(omega >= 18.0 / eps * std::sqrt(2.0 * c * std::log(15.0 / delta)) - 1e-9,
                   "smooth: omega >= (18/eps) sqrt(2 c log(15/delta)) violated");

    // Parameter-consistency conditions. The clip-count budget is tight at
    // the chosen c (it equals 2 sqrt(A n) by construction), so it is checked
    // with a hair of relative slack.
    require_config(96.0 * eta * beta * c * log30 / std::sqrt(eps) <= 1.0 + 1e-12,
                   "smooth: 96 eta beta c log(30n/delta) / sqrt(eps) <= 1 violated");
    const double clip_budget =
        2.0 * nd * std::pow(2.0 * G_k / C, static_cast<double>(k));
    require_config(c >= clip_budget * (1.0 - 1e-9),
                   "smooth: c >= 2 n (2 G_k / C)^k violated");
    require_config(c >= 26.0 / eps * log15, "smooth: c >= (26/eps) log(15n/delta) violated");

    // Smoothness ceiling.
    const double log30sq = std::log(30.0 * nd / delta) * std::log(30.0 * nd / delta);
    const double beta_max =
        std::pow(eps, 1.5) / (24000.0 * eta * std::sqrt(static_cast<double>(d)) * log30sq);
    require_config(beta <= beta_max + 1e-15,
                   "smooth: beta <= eps^1.5 / (24000 eta sqrt(d) log^2(30n/delta)) violated");
}

SmoothConfig smooth_params(std::size_t n, std::size_t d, double eps, double delta, int k,
                           const MomentProfile& moments, double D, double beta) {
    SmoothConfig cfg = smooth_params_unchecked(n, d, eps, delta, k, moments, D, beta);
    cfg.validate(d, moments.gk(), k);
    return cfg;
}

SmoothConfig smooth_params_unchecked(std::size_t n, std::size_t d, double eps, double delta,
                                     int k, const MomentProfile& moments, double D,
                                     double beta) {
    require(n >= 2 && d >= 1 && k >= 2 && D > 0.0, "bad smooth parameters");
    require_config(eps > 0.0 && eps < 1.0 && delta > 0.0 && delta < 1.0,
                   "smooth: eps, delta must lie in (0, 1)");
    SmoothConfig cfg;
    cfg.eps = eps;
    cfg.delta = delta;
    cfg.beta = beta;
    cfg.I = static_cast<int>(std::floor(std::log2(static_cast<double>(n))));
    cfg.n_eff = std::size_t{1} << cfg.I;

    const double nd = static_cast<double>(cfg.n_eff);
    const double dd = static_cast<double>(d);
    const double G2 = moments.g(2);
    const double Gk = moments.gk();
    const double log15 = std::log(15.0 * nd / delta);
    const double kexp = (static_cast<double>(k) - 1.0) / (2.0 * static_cast<double>(k));

    const double eta1 = std::sqrt(4.0 / nd) * D / G2;
    const double eta2 = D * static_cast<double>(cfg.I) / (Gk * nd) *
                        std::pow(nd * nd * eps * eps / (14400.0 * dd * log15 * log15), kexp);
    cfg.eta = std::min(eta1, eta2);
    cfg.C = 2.0 * std::pow(std::pow(Gk, k) * D * static_cast<double>(cfg.I) * nd * eps * eps /
                               (14400.0 * dd * cfg.eta * log15 * log15),
                           1.0 / (static_cast<double>(k) + 1.0));
    cfg.c = 240.0 * std::sqrt(dd) * log15 / eps;
    cfg.omega = 18.0 / eps * std::sqrt(2.0 * cfg.c * std::log(15.0 / delta));
    return cfg;
}

SmoothNoise make_smooth_noise(const SmoothConfig& config, std::size_t d, RngStream& rng) {
    SmoothNoise noise;
    noise.count_noise.reserve(static_cast<std::size_t>(config.I));
    for (int i = 1; i <= config.I; ++i) {
        noise.count_noise.push_back(
            mech::sample_bounded_laplace(3.0 / config.eps, config.c / 2.0, rng));
        const std::size_t ni = config.n_i(i);
        const double wi = config.omega_i(i);
        const double ti = config.tau_i(i);
        std::vector<double> thr(ni + 1, 0.0);
        for (auto& v : thr) v = mech::sample_bounded_laplace(wi, ti, rng);
        std::vector<double> nu(ni, 0.0);
        for (auto& v : nu) v = mech::sample_bounded_laplace(2.0 * wi, 2.0 * ti, rng);
        noise.threshold.push_back(std::move(thr));
        noise.step.push_back(std::move(nu));
        noise.phase_gaussian.push_back(rng.gaussian_vec(config.sigma_i(i), d));
    }
    return noise;
}

SolverReport alg_smooth_with_noise(const Dataset& data, const Vec& x0,
                                   const SmoothConfig& config, const ConvexDomain& domain,
                                   const SmoothNoise& noise, SmoothTrace* trace) {
    std::size_t needed = 0;
    for (int i = 1; i <= config.I; ++i) needed += config.n_i(i);
    require(data.size() >= needed, "dataset smaller than the phase schedule requires");
    require(domain.contains(domain.project(x0)), "bad domain");

    SolverReport report;
    report.n = data.size();
    report.d = domain.dim();
    report.clip_threshold = config.C;
    report.iterations = static_cast<long>(needed);

    Vec x = domain.project(x0);
    std::size_t prefix = 0;
    for (int i = 1; i <= config.I; ++i) {
        const std::size_t ni = config.n_i(i);
        const double eta = config.eta_i(i);
        const double chat_cutoff = config.c + noise.count_noise[static_cast<std::size_t>(i - 1)];
        const auto& thr = noise.threshold[static_cast<std::size_t>(i - 1)];
        const auto& nu = noise.step[static_cast<std::size_t>(i - 1)];
        std::size_t thr_idx = 0;
        double Chat = config.C + thr[thr_idx++];
        long count = 0;

        if (trace) {
            trace->iterates.emplace_back();
            trace->clip_indicator.emplace_back();
        }

        Vec phase_sum = zeros(domain.dim());
        Vec x_cur = x;
        for (std::size_t j = 0; j < ni; ++j) {
            add_inplace(phase_sum, x_cur);
            if (trace) trace->iterates.back().push_back(x_cur);

            Vec g = data.samples[prefix + j].gradient(x_cur);
            ++report.grad_queries;
            const double gn = norm2(g);
            bool clipped = false;
            if (gn + nu[j] >= Chat) {
                ++count;
                clipped = true;
                ++report.clip_count;
                if (gn > config.C) scale_inplace(g, config.C / gn);
                Chat = config.C + thr[thr_idx++];
            }
            if (trace) trace->clip_indicator.back().push_back(clipped);
            if (static_cast<double>(count) >= chat_cutoff) {
                report.halted = true;
                report.halt_phase = i - 1;  // last safe phase
                report.x = domain.project(x);
                if (trace) trace->clip_counts.push_back(count);
                return report;
            }
            axpy_inplace(x_cur, -eta, g);
            x_cur = domain.project(x_cur);
        }
        if (trace) trace->clip_counts.push_back(count);
        prefix += ni;

        scale_inplace(phase_sum, 1.0 / static_cast<double>(ni));
        const Vec& zeta = noise.phase_gaussian[static_cast<std::size_t>(i - 1)];
        report.phase_noise_norms.push_back(norm2(zeta));
        x = add(phase_sum, zeta);
    }
    report.x = domain.project(x);
    return report;
}

SolverReport alg_smooth(const Dataset& data, const Vec& x0, const SmoothConfig& config,
                        const ConvexDomain& domain, RngStream& rng) {
    const SmoothNoise noise = make_smooth_noise(config, domain.dim(), rng);
    SolverReport report = alg_smooth_with_noise(data, x0, config, domain, noise);
    report.seed = rng.seed();
    return report;
}

DriftAuditResult audit_drift(const Dataset& data, const Dataset& neighbor, std::size_t j0,
                             const Vec& x0, const SmoothConfig& config,
                             const ConvexDomain& domain, RngStream& noise_rng) {
    DriftAuditResult result;
    require(data.size() == neighbor.size(), "neighbor size mismatch");
    require(j0 < data.size(), "j0 out of range");

    // Drift-bound preconditions; outside them the audit is skipped, not failed.
    for (int i = 1; i <= config.I; ++i) {
        if (192.0 * config.eta_i(i) * config.beta * config.c > 1.0 + 1e-12) {
            result.skipped = true;
            result.skip_reason = "192 eta_i beta c <= 1 violated";
            return result;
        }
        if (config.C < 8.0 * config.tau_i(i)) {
            result.skipped = true;
            result.skip_reason = "C >= 8 omega_i log(30 n_i / delta) violated";
            return result;
        }
    }

    // Locate the phase containing j0 under the prefix rule.
    int phase = -1;
    std::size_t prefix = 0;
    for (int i = 1; i <= config.I; ++i) {
        if (j0 < prefix + config.n_i(i)) {
            phase = i;
            break;
        }
        prefix += config.n_i(i);
    }
    if (phase < 0) {
        result.skipped = true;
        result.skip_reason = "j0 falls outside the consumed prefix";
        return result;
    }

    const SmoothNoise noise = make_smooth_noise(config, domain.dim(), noise_rng);
    SmoothTrace trace_a, trace_b;
    const auto rep_a = alg_smooth_with_noise(data, x0, config, domain, noise, &trace_a);
    const auto rep_b = alg_smooth_with_noise(neighbor, x0, config, domain, noise, &trace_b);

    result.phase = phase;
    result.halted = rep_a.halted || rep_b.halted;
    const std::size_t pi = static_cast<std::size_t>(phase - 1);
    if (result.halted || trace_a.iterates.size() <= pi || trace_b.iterates.size() <= pi)
        return result;  // not qualifying
    result.clip_count = trace_a.clip_counts[pi];

    const auto& ind_a = trace_a.clip_indicator[pi];
    const auto& ind_b = trace_b.clip_indicator[pi];
    const std::size_t local_j0 = j0 - prefix;
    for (std::size_t j = 0; j < ind_a.size(); ++j) {
        if (j == local_j0) continue;
        if (ind_a[j] != ind_b[j]) return result;  // indicators disagree off j0
    }

    result.qualifying = true;
    result.bound = 6.0 * config.C * config.eta_i(phase);
    const auto& xa = trace_a.iterates[pi];
    const auto& xb = trace_b.iterates[pi];
    for (std::size_t j = 0; j < xa.size(); ++j) {
        const double drift = dist(xa[j], xb[j]);
        result.step_drifts.push_back(drift);
        result.max_drift = std::max(result.max_drift, drift);
        if (j <= local_j0) result.drift_before_j0 = std::max(result.drift_before_j0, drift);
    }
    result.violated = result.max_drift > result.bound * (1.0 + 1e-12);
    return result;
}

ContractionCheck check_smooth_contraction(const std::function<Vec(const Vec&)>& grad,
                                          double beta, double eta, std::size_t d,
                                          double range, std::size_t trials, RngStream& rng,
                                          double tol) {
    require(beta >= 0.0 && eta >= 0.0, "bad contraction parameters");
    require(beta == 0.0 || eta <= 2.0 / beta, "contraction check requires eta <= 2 / beta");
    ContractionCheck out;
    for (std::size_t t = 0; t < trials; ++t) {
        Vec x(d, 0.0), y(d, 0.0);
        for (auto& v : x) v = rng.uniform(-range, range);
        for (auto& v : y) v = rng.uniform(-range, range);
        Vec sx = sub(x, scaled(grad(x), eta));
        Vec sy = sub(y, scaled(grad(y), eta));
        const double excess = dist(sx, sy) - dist(x, y);
        if (excess > out.worst_excess) {
            out.worst_excess = excess;
            out.witness_x = x;
            out.witness_y = y;
        }
        if (excess > tol) out.passed = false;
    }
    return out;
}

NoncontractionWitness counterexample_noncontraction(double C) {
    require(C >= 0.0, "C must be nonnegative");
    NoncontractionWitness w;
    w.v = {-C, 0.0};
    w.g = {1.0, 0.0};
    w.h = {(2.0 * C + 1.0) / (C + 1.0), C * std::sqrt(2.0 * C + 1.0) / (C + 1.0)};
    w.g_clipped = clip(w.g, 1.0);
    w.h_clipped = clip(w.h, 1.0);
    w.premise_norm = dist(w.v, sub(w.g, w.h));
    w.violation_threshold = -C;
    if (C == 0.0) {
        // Degenerate case: g = h, so the clipped difference vanishes and the
        // strict margin shows up against g alone: (v - g')_1 = -1 < 0.
        w.violated_coordinate = w.v[0] - w.g_clipped[0];
    } else {
        w.violated_coordinate = w.v[0] - (w.g_clipped[0] - w.h_clipped[0]);
    }
    w.violated = w.violated_coordinate < w.violation_threshold;
    return w;
}

double scalar_clip(double a, double cap) {
    const double sign = a < 0.0 ? -1.0 : 1.0;
    return sign * std::min(std::fabs(a), cap);
}

std::pair<Vec, Vec> glm_clipped_step(const Vec& x, const Vec& x_prime, const Vec& covariate,
                                     const std::function<double(double)>& sigma_dx,
                                     double eta, double C) {
    require(C >= 0.0 && eta >= 0.0, "bad step parameters");
    const double sn = norm2(covariate);
    if (sn == 0.0) return {x, x_prime};  // zero-gradient step
    const double cap = C / sn;
    const double t = scalar_clip(sigma_dx(dot(covariate, x)), cap);
    const double t_prime = scalar_clip(sigma_dx(dot(covariate, x_prime)), cap);
    Vec a = x, b = x_prime;
    axpy_inplace(a, -eta * t, covariate);
    axpy_inplace(b, -eta * t_prime, covariate);
    return {std::move(a), std::move(b)};
}

GlmPhaseSchedule make_glm_schedule(std::size_t n, std::size_t d, int k,
                                   const MomentProfile& moments, double D, double rho) {
    require(n >= 2 && d >= 1 && k >= 2 && D > 0.0 && rho > 0.0, "bad GLM schedule parameters");
    GlmPhaseSchedule sched;
    sched.I = static_cast<int>(std::floor(std::log2(static_cast<double>(n))));
    sched.n_eff = std::size_t{1} << sched.I;

    const double nd = static_cast<double>(sched.n_eff);
    const double dd = static_cast<double>(d);
    const double G2 = moments.g(2);
    const double Gk = moments.gk();
    const double kexp = (static_cast<double>(k) - 1.0) / (2.0 * static_cast<double>(k));

    const double eta1 = std::sqrt(8.0 / nd) * D / G2;
    const double eta2 = 1.0 / nd * std::pow(nd * nd * rho / (32.0 * dd), kexp) *
                        std::pow(2.0, (static_cast<double>(k) + 1.0) /
                                          (2.0 * static_cast<double>(k))) *
                        D / Gk;
    sched.eta = std::min(eta1, eta2);
    sched.C = std::pow(std::pow(Gk, k) * D * rho * nd / (32.0 * sched.eta * dd),
                       1.0 / (static_cast<double>(k) + 1.0));
    sched.beta_bound = std::max(std::sqrt(nd / 2.0) * G2 / D,
                                nd * std::pow(dd / (nd * nd * rho), kexp) * Gk / D);

    for (int i = 1; i <= sched.I; ++i) {
        GlmPhaseSchedule::Phase p;
        p.n_i = sched.n_eff >> i;
        p.eta_i = sched.eta / std::pow(16.0, i);
        p.C_i = std::pow(2.0, i) * sched.C;
        p.sigma_i = 2.0 * p.eta_i * p.C_i * std::sqrt(2.0 / rho);
        sched.phases.push_back(p);
    }
    return sched;
}

SolverReport opcdpsgd_glm(const problems::Problem& problem, const Dataset& data,
                          const Vec& x0, double rho, RngStream& rng,
                          mech::AccountantLedger* ledger, GlmPhaseSchedule* schedule_out,
                          std::vector<Vec>* prenoise_phase_outputs) {
    if (!problem.glm) throw UnsupportedAssumption("opcdpsgd_glm needs a GLM problem");
    const ConvexDomain& domain = problem.domain;
    const std::size_t d = domain.dim();
    const auto sched = make_glm_schedule(data.size(), d, problem.moments.k, problem.moments,
                                         domain.diameter(), rho);
    if (schedule_out) *schedule_out = sched;

    const double beta = problem.smooth_beta.value_or(0.0);
    require_config(beta <= sched.beta_bound + 1e-12,
                   "glm: beta <= max(sqrt(n/2) G_2/D, n (d/(n^2 rho))^((k-1)/2k) G_k/D) violated");

    SolverReport report;
    report.seed = rng.seed();
    report.n = data.size();
    report.d = d;
    report.rho = rho;
    report.clip_threshold = sched.C;

    Vec x = domain.project(x0);
    std::size_t offset = 0;
    std::vector<double> phase_costs;
    for (const auto& p : sched.phases) {
        long clips = 0;
        const Vec xbar = erm::opcsgd(
            std::span<const SampleLoss>(data.samples).subspan(offset, p.n_i), p.C_i, p.eta_i,
            static_cast<long>(p.n_i), domain, domain.project(x), &clips);
        offset += p.n_i;
        report.clip_count += clips;
        report.grad_queries += static_cast<long>(p.n_i);
        if (prenoise_phase_outputs) prenoise_phase_outputs->push_back(xbar);

        const Vec xi = rng.gaussian_vec(p.sigma_i, d);
        report.phase_noise_norms.push_back(norm2(xi));
        x = add(xbar, xi);

        // Pre-noise phase outputs move by at most 2 eta_i C_i across
        // neighboring datasets; the Gaussian on that sensitivity costs rho/4.
        const double L = 2.0 * p.eta_i * p.C_i;
        phase_costs.push_back(mech::gaussian_cdp_cost(L, p.sigma_i).rho);
    }
    report.x = domain.project(x);
    report.iterations = static_cast<long>(offset);
    if (ledger) ledger->charge_parallel_group("opcdpsgd_glm", phase_costs);
    report.rho_charged = *std::max_element(phase_costs.begin(), phase_costs.end());
    return report;
}

DriftOpsResult simulate_drift_ops(const std::vector<DriftOpKind>& ops, double C,
                                  double zeta, RngStream& rng) {
    require(C > 0.0 && zeta > 0.0, "bad drift simulation parameters");
    const long c = static_cast<long>(std::floor(C / zeta));
    long jumps = 0, nears = 0;
    for (auto k : ops) {
        if (k == DriftOpKind::Jump) ++jumps;
        if (k == DriftOpKind::NearContractive) ++nears;
    }
    require(jumps <= 1, "at most one (infinity, C)-contractive pair allowed");
    require(nears <= c, "more near-contractive pairs than floor(C / zeta)");

    DriftOpsResult out;
    double gap = 0.0;
    long a = 0;  // near-contractive pairs seen
    long b = 0;  // jump seen
    for (auto kind : ops) {
        switch (kind) {
            case DriftOpKind::Contractive:
                gap *= rng.next_double();
                break;
            case DriftOpKind::Jump:
                b = 1;
                gap += C * rng.next_double();
                break;
            case DriftOpKind::NearContractive:
                ++a;
                if (gap > 2.0 * C + 1e-12) out.ok = false;  // op applied out of contract
                gap += zeta * rng.next_double();
                break;
        }
        const double bound = static_cast<double>(a) * zeta + static_cast<double>(b) * C;
        out.max_gap = std::max(out.max_gap, gap);
        out.max_excess_over_bound = std::max(out.max_excess_over_bound, gap - bound);
        if (gap > bound + 1e-12 || gap > 2.0 * C + 1e-12) out.ok = false;
    }
    return out;
}

}  // namespace htsco::smooth
