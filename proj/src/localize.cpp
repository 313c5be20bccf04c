#include "htsco/localize.hpp"
#include "htsco/errors.hpp"
#include "htsco/mechanisms.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <set>

namespace htsco::localize {

using mech::AccountantLedger;
using mech::RngStream;

Vec geometric_aggregate(std::span<const Vec> points, double R) {
    require(!points.empty(), "geometric_aggregate needs at least one point");
    require(R >= 0.0, "aggregation radius must be nonnegative");
    const std::size_t k = points.size();
    // A strict majority within 2R suffices: any two majority clusters
    // intersect, so a qualifying point lies within 3R of the hidden center
    // whenever at least 0.51 k inputs lie within R of it.
    const std::size_t need = k / 2 + 1;
    for (std::size_t i = 0; i < k; ++i) {
        std::size_t within = 0;
        for (std::size_t j = 0; j < k; ++j)
            if (dist(points[i], points[j]) <= 2.0 * R) ++within;
        if (within >= need) return points[i];
    }
    return points[0];
}

Vec ploc(const Vec& x0, const PhaseOracle& oracle, double lambda, int I,
         std::vector<Vec>* phase_trace) {
    require(I >= 0, "phase count must be nonnegative");
    require(lambda > 0.0, "base regularization must be positive");
    Vec x = x0;
    double lambda_i = lambda;
    for (int i = 1; i <= I; ++i) {
        lambda_i *= 32.0;
        x = oracle(x, lambda_i, i);
        require(all_finite(x), "phase oracle returned a non-finite point (phase " +
                                   std::to_string(i) + ")");
        if (phase_trace) phase_trace->push_back(x);
    }
    return x;
}

void LocalizationSchedule::write_csv(std::ostream& os, double rho) const {
    os << "phase,lambda_i,m_i,J_i,radius_i,rho_charged\n";
    char buf[160];
    for (std::size_t i = 0; i < phases.size(); ++i) {
        const auto& p = phases[i];
        std::snprintf(buf, sizeof(buf), "%zu,%.17g,%zu,%zu,%.17g,%.17g\n", i + 1, p.lambda_i,
                      p.m_i, p.J_i, p.radius_i, rho);
        os << buf;
    }
}

namespace {

// Smallest integer in [400 log(I/delta), 500 log(I/delta)].
std::size_t block_count_bracket(int I, double delta) {
    const double lo = 400.0 * std::log(static_cast<double>(I) / delta);
    const double hi = 500.0 * std::log(static_cast<double>(I) / delta);
    const double j = std::ceil(lo);
    require(j <= hi + 0.5, "block count bracket is empty");
    return static_cast<std::size_t>(std::max(1.0, j));
}

int fixpoint_phase_count(std::size_t n, double delta) {
    int I = std::max(1, static_cast<int>(std::floor(std::log2(static_cast<double>(n)))));
    std::set<int> seen;
    for (int round = 0; round < 32; ++round) {
        const std::size_t J = block_count_bracket(I, delta);
        int next = J >= n ? 0
                          : static_cast<int>(std::floor(
                                std::log2(static_cast<double>(n) / static_cast<double>(J))));
        next = std::max(next, 1);
        if (next == I) return I;
        if (seen.count(next)) return std::min(I, next);  // cycle: keep the smaller I
        seen.insert(I);
        I = next;
    }
    return I;
}

double delta_formula(double c_rp, double G_k, double G_2, std::size_t d, double rho,
                     std::size_t m_ref, int k) {
    const double md = static_cast<double>(m_ref);
    const double priv = G_k * std::pow(std::sqrt(static_cast<double>(d)) / (md * std::sqrt(rho)),
                                       1.0 - 1.0 / static_cast<double>(k));
    return 3.0 * c_rp * (priv + G_2 / std::sqrt(md));
}

}  // namespace

namespace {

LocalizationSchedule build_schedule_regime(std::size_t n, double delta, bool per_phase);

}  // namespace

LocalizationSchedule make_localization_schedule(std::size_t n, double rho, double delta,
                                                std::size_t d,
                                                const MomentProfile& moments, double D,
                                                const Constants& constants) {
    require(n >= 1 && rho > 0.0 && delta > 0.0 && delta < 1.0 && d >= 1 && D > 0.0,
            "bad schedule parameters");
    const double log_n = std::log(static_cast<double>(std::max<std::size_t>(n, 2)));
    const bool prefer_per_phase = 1.0 / delta <= log_n * log_n;

    LocalizationSchedule sched = build_schedule_regime(n, delta, prefer_per_phase);
    // The per-phase regime needs J_1 blocks out of n/2 samples; when that is
    // out of reach the fixed-J split may still fit.
    if (!sched.feasible && prefer_per_phase)
        sched = build_schedule_regime(n, delta, false);
    if (!sched.feasible) return sched;

    sched.Delta = delta_formula(constants.c_rp, moments.gk(), moments.g(2), d, rho,
                                sched.m_ref, moments.k);
    const double g1 = moments.g(1);
    const double pow8I = std::pow(8.0, sched.I);
    // Base regularization: the bound-optimal strength, clamped so the first
    // phase (lambda_1 = 32 lambda) can still traverse the domain when the
    // error target Delta is large relative to the gradient scale.
    const double lambda_star =
        std::sqrt(2.0 * (g1 * sched.Delta / pow8I + sched.Delta * sched.Delta / 4.0)) / D;
    sched.lambda = std::min(lambda_star, constants.c_travel * g1 / D) / 32.0;
    double lambda_i = sched.lambda;
    double pow4 = 1.0;
    for (auto& p : sched.phases) {
        lambda_i *= 32.0;
        pow4 *= 4.0;
        p.lambda_i = lambda_i;
        p.radius_i = sched.Delta * pow4 / lambda_i;
    }
    return sched;
}

namespace {

LocalizationSchedule build_schedule_regime(std::size_t n, double delta, bool per_phase) {
    LocalizationSchedule sched;
    sched.delta_target = delta;
    sched.per_phase_regime = per_phase;

    const int I = fixpoint_phase_count(n, delta);

    if (!sched.per_phase_regime) {
        const std::size_t J = block_count_bracket(I, delta);
        if (J >= n || n / J < 2) return sched;  // infeasible at this sample budget
        const std::size_t m =
            static_cast<std::size_t>(erm::pow2_floor(static_cast<long>(n / J)));
        const int I_final =
            std::min(I, static_cast<int>(std::floor(std::log2(static_cast<double>(m)))));
        sched.I = std::max(1, I_final);
        sched.m_ref = m;
        for (int i = 1; i <= sched.I; ++i) {
            LocalizationSchedule::Phase p;
            p.m_i = m >> i;
            p.J_i = J;
            sched.phases.push_back(p);
            sched.samples_used += p.m_i * p.J_i;
        }
    } else {
        // delta_i = delta / 2^i; phase i subdivides a fresh batch of n / 2^i
        // samples into J_i blocks.
        int I_final = 0;
        std::vector<LocalizationSchedule::Phase> phases;
        for (int i = 1; i <= I; ++i) {
            const double delta_i = delta / std::pow(2.0, i);
            const std::size_t J_i =
                std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(
                                             400.0 * std::log(static_cast<double>(I) / delta_i))));
            const std::size_t batch = n >> i;
            if (batch < J_i) break;
            LocalizationSchedule::Phase p;
            p.J_i = J_i;
            p.m_i = static_cast<std::size_t>(erm::pow2_floor(static_cast<long>(batch / J_i)));
            phases.push_back(p);
            I_final = i;
        }
        if (I_final == 0) return sched;
        sched.I = I_final;
        sched.phases = std::move(phases);
        sched.m_ref = 2 * sched.phases.front().m_i;
        for (const auto& p : sched.phases) sched.samples_used += p.m_i * p.J_i;
    }

    require(sched.samples_used <= n, "schedule exceeds the sample budget");
    sched.feasible = true;
    return sched;
}

}  // namespace

Vec solve_regularized_block(std::span<const SampleLoss> block, const Vec& center,
                            double lambda, double rho, const ConvexDomain& domain,
                            const MomentProfile& moments, RngStream& rng,
                            AccountantLedger& ledger, long* grad_queries,
                            long* clip_events) {
    require(!block.empty(), "empty block");
    require(lambda > 0.0, "block regularization must be positive");
    const std::size_t m = block.size();
    const std::size_t d = domain.dim();

    // Translate so the regularization center is the origin; the restricted
    // radius 2 G_1 / lambda localizes the shifted minimizer.
    const double r = std::min(2.0 * moments.g(1) / lambda, domain.diameter());
    Dataset shifted;
    shifted.samples.reserve(m);
    for (const auto& s : block) {
        SampleLoss t;
        t.id = s.id;
        const SampleLoss* src = &s;
        const Vec* c = &center;
        t.gradient = [src, c](const Vec& y) { return src->gradient(add(y, *c)); };
        t.value = [src, c](const Vec& y) { return src->value(add(y, *c)); };
        shifted.samples.push_back(std::move(t));
    }

    const double C = erm::erm_clip_threshold(m, rho, d, moments.k, moments.gk());
    const auto cfg =
        erm::ErmConfig::make(C, lambda, m, rho, d, ConvexDomain::ball(zeros(d), r));
    auto report = erm::cdpsgd(shifted, cfg, rho, rng, &ledger);
    if (grad_queries) *grad_queries += report.grad_queries;
    if (clip_events) *clip_events += report.clip_count;
    return domain.project(add(report.x, center));
}

Vec agg_erm(const Vec& center, double lambda, std::size_t J, double rho,
            std::span<const SampleLoss> samples, std::size_t n_block, double R,
            const ConvexDomain& domain, const MomentProfile& moments, RngStream& rng,
            AccountantLedger& ledger, long* grad_queries, long* clip_events) {
    require(J >= 1 && n_block >= 1, "agg_erm needs at least one block");
    require(J * n_block <= samples.size(), "agg_erm: J blocks of n samples exceed the input");

    std::vector<Vec> candidates;
    candidates.reserve(J);
    std::vector<double> branch_totals;
    branch_totals.reserve(J);
    for (std::size_t j = 0; j < J; ++j) {
        AccountantLedger block_ledger;
        RngStream block_rng = rng.split();
        candidates.push_back(solve_regularized_block(
            samples.subspan(j * n_block, n_block), center, lambda, rho, domain, moments,
            block_rng, block_ledger, grad_queries, clip_events));
        const double total = block_ledger.rho_total();
        if (std::fabs(total - rho) > 1e-9 * std::max(1.0, rho))
            throw AccountingError("block charge deviates from the per-block budget");
        branch_totals.push_back(total);
    }
    ledger.charge_parallel_group("agg_erm", branch_totals);
    return geometric_aggregate(candidates, R);
}

SolverReport ht_dpsco_on_data(const Dataset& data, const ConvexDomain& domain,
                              const MomentProfile& moments, double rho, double delta,
                              RngStream& mech_rng, AccountantLedger* ledger,
                              const Constants& constants,
                              LocalizationSchedule* schedule_out) {
    const std::size_t n = data.size();
    SolverReport report;
    report.seed = mech_rng.seed();
    report.n = n;
    report.d = domain.dim();
    report.rho = rho;

    const auto sched = make_localization_schedule(n, rho, delta, domain.dim(), moments,
                                                  domain.diameter(), constants);
    if (schedule_out) *schedule_out = sched;

    const double n_floor = constants.n_min_factor * std::log(1.0 / delta);
    if (static_cast<double>(n) < n_floor || !sched.feasible) {
        report.x = domain.center();
        report.warning = sched.feasible
                             ? "sample budget below the localization cutoff; returning center"
                             : "no feasible localization schedule; returning center";
        return report;
    }

    // Consecutive-prefix partition. Fixed-J regime: portion j occupies
    // [j m, (j+1) m) and phase i takes the i-th geometric segment of every
    // portion. Per-phase regime: phase i takes a fresh batch of n >> i.
    std::vector<std::uint8_t> used(n, 0);
    std::vector<std::vector<SampleLoss>> phase_samples(sched.phases.size());
    if (!sched.per_phase_regime) {
        const std::size_t m = sched.m_ref;
        std::size_t seg_offset = 0;
        for (std::size_t i = 0; i < sched.phases.size(); ++i) {
            const auto& p = sched.phases[i];
            auto& bucket = phase_samples[i];
            bucket.reserve(p.J_i * p.m_i);
            for (std::size_t j = 0; j < p.J_i; ++j) {
                const std::size_t start = j * m + seg_offset;
                for (std::size_t t = 0; t < p.m_i; ++t) {
                    const std::size_t idx = start + t;
                    if (used[idx]++) throw AccountingError("sample assigned to two sub-runs");
                    bucket.push_back(data.samples[idx]);
                }
            }
            seg_offset += p.m_i;
        }
    } else {
        std::size_t batch_offset = 0;
        for (std::size_t i = 0; i < sched.phases.size(); ++i) {
            const auto& p = sched.phases[i];
            auto& bucket = phase_samples[i];
            bucket.reserve(p.J_i * p.m_i);
            for (std::size_t j = 0; j < p.J_i * p.m_i; ++j) {
                const std::size_t idx = batch_offset + j;
                if (used[idx]++) throw AccountingError("sample assigned to two sub-runs");
                bucket.push_back(data.samples[idx]);
            }
            batch_offset += n >> (i + 1);
        }
    }

    Vec x = domain.center();
    long grad_queries = 0;
    long clips = 0;
    std::size_t phase_idx = 0;
    PhaseOracle oracle = [&](const Vec& center, double lambda_i, int) {
        const auto& p = sched.phases[phase_idx];
        AccountantLedger phase_ledger;
        Vec out = agg_erm(center, lambda_i, p.J_i, rho,
                          std::span<const SampleLoss>(phase_samples[phase_idx]), p.m_i,
                          p.radius_i, domain, moments, mech_rng, phase_ledger,
                          &grad_queries, &clips);
        if (std::fabs(phase_ledger.rho_total() - rho) > 1e-9 * std::max(1.0, rho))
            throw AccountingError("phase charge deviates from the budget");
        ++phase_idx;
        return out;
    };
    report.x = ploc(x, oracle, sched.lambda, sched.I);
    report.grad_queries = grad_queries;
    report.clip_count = clips;
    report.lambda = sched.lambda;

    // All sub-runs touch pairwise disjoint samples, so the whole driver
    // composes in parallel to a single charge of rho.
    if (ledger) ledger->charge_cdp("ht_dpsco", "parallel_composition", rho);
    report.rho_charged = rho;
    return report;
}

SolverReport ht_dpsco(const problems::Problem& problem, std::size_t n, double rho,
                      double delta, RngStream& rng, mech::NoiseMode mode,
                      AccountantLedger* ledger, const Constants& constants) {
    RngStream data_rng = rng.split();
    RngStream mech_rng = rng.split().with_mode(mode);
    const Dataset data = problem.draw(n, data_rng);
    return ht_dpsco_on_data(data, problem.domain, problem.moments, rho, delta, mech_rng,
                            ledger, constants);
}

SolverReport sc_ht_dpsco(const problems::Problem& problem, std::size_t n, double rho,
                         double delta, RngStream& rng, mech::NoiseMode mode,
                         AccountantLedger* ledger, const Constants& constants) {
    require(problem.strongly_convex_mu.has_value() && *problem.strongly_convex_mu > 0.0,
            "sc_ht_dpsco needs a mu-strongly convex problem");
    const double mu = *problem.strongly_convex_mu;
    RngStream data_rng = rng.split();
    RngStream mech_rng = rng.split().with_mode(mode);

    const double log2n = std::log2(static_cast<double>(std::max<std::size_t>(n, 4)));
    int epochs = std::max(1, static_cast<int>(std::ceil(std::log2(std::max(2.0, log2n)))));
    while (epochs > 1 && (n >> epochs) < 8) --epochs;

    const double delta_e = delta / static_cast<double>(epochs);
    const double g2 = problem.moments.g(2);
    const double gk = problem.moments.gk();
    const double d = static_cast<double>(problem.dim());
    const double kexp = 1.0 - 1.0 / static_cast<double>(problem.moments.k);

    SolverReport report;
    report.seed = rng.seed();
    report.n = n;
    report.d = problem.dim();
    report.rho = rho;

    Vec center = problem.domain.center();
    double radius = problem.domain.diameter() / 2.0;
    report.epoch_radii.push_back(radius);
    std::vector<double> epoch_totals;
    for (int e = 1; e <= epochs; ++e) {
        const std::size_t n_e = n >> (epochs - e + 1);
        const ConvexDomain dom_e =
            e == 1 ? problem.domain : ConvexDomain::ball(center, radius);
        const Dataset data_e = problem.draw(std::max<std::size_t>(n_e, 1), data_rng);
        AccountantLedger epoch_ledger;
        auto rep_e = ht_dpsco_on_data(data_e, dom_e, problem.moments, rho, delta_e,
                                      mech_rng, &epoch_ledger, constants);
        report.grad_queries += rep_e.grad_queries;
        report.clip_count += rep_e.clip_count;
        if (!rep_e.warning.empty()) report.warning = rep_e.warning;
        epoch_totals.push_back(epoch_ledger.rho_total());
        center = rep_e.x;

        // High-probability error bound at this epoch fixes the next trust
        // radius; never shrink slower than halving.
        const double d_e = dom_e.diameter();
        const double m_e = static_cast<double>(std::max<std::size_t>(n_e, 2));
        const double err_e =
            constants.c_sco *
            (gk * d_e * std::pow(std::sqrt(d) * std::log(1.0 / delta_e) / (m_e * std::sqrt(rho)),
                                 kexp) +
             g2 * d_e * std::sqrt(std::log(1.0 / delta_e) / m_e));
        radius = std::min(radius / 2.0, std::sqrt(2.0 * err_e / mu));
        report.epoch_radii.push_back(radius);
    }
    report.x = problem.domain.project(center);
    if (ledger) {
        AccountantLedger tmp;
        tmp.charge_parallel_group("sc_ht_dpsco", epoch_totals);
        ledger->charge_cdp("sc_ht_dpsco", "parallel_composition", tmp.rho_total());
        report.rho_charged = tmp.rho_total();
    } else {
        report.rho_charged = *std::max_element(epoch_totals.begin(), epoch_totals.end());
    }
    return report;
}

Vec strongly_convex_portion_solver(const HpScoProblem& problem,
                                   const std::function<Vec(const Vec&, double)>& prox,
                                   double lambda, long T, const Vec& x0, RngStream& rng) {
    require(T >= 1, "portion solver needs at least one query");
    require(lambda > 0.0, "portion solver needs strong convexity");
    Vec x = x0;
    const long tail_start = T / 2;  // average the last half of the iterates
    Vec avg = zeros(x.size());
    long tail_count = 0;
    for (long t = 0; t < T; ++t) {
        const Vec g = problem.grad_oracle(x, rng);
        require(all_finite(g), "stochastic gradient oracle returned a non-finite vector");
        const double eta = 2.0 / (lambda * (static_cast<double>(t) + 2.0));
        Vec v = x;
        axpy_inplace(v, -eta, g);
        x = prox(v, eta);
        if (t >= tail_start) {
            add_inplace(avg, x);
            ++tail_count;
        }
    }
    return scaled(std::move(avg), 1.0 / static_cast<double>(tail_count));
}

Vec hp_sco(const HpScoProblem& problem, std::size_t n, double delta, RngStream& rng,
           const Constants& constants) {
    require(n >= 2, "hp_sco needs at least two queries");
    require(delta > 0.0 && delta < 0.5, "delta must lie in (0, 1/2)");
    const double D = problem.domain.diameter();
    const int I = std::max(
        1, static_cast<int>(std::floor(0.5 * std::log2(static_cast<double>(n)))));
    const double Delta =
        0.5 * constants.c_sco * problem.G *
        std::sqrt(std::log(1.0 / delta) / static_cast<double>(n));
    const double lambda =
        std::sqrt(problem.G * Delta / std::pow(8.0, I) + 16.0 * Delta * Delta) / (4.0 * D);

    std::size_t phase_idx = 0;
    PhaseOracle oracle = [&](const Vec& center, double lambda_i, int i) {
        ++phase_idx;
        const double delta_i = delta / std::pow(2.0, i);
        std::size_t budget = n >> i;
        std::size_t J =
            std::max<std::size_t>(1, static_cast<std::size_t>(
                                         std::ceil(48.0 * std::log(1.0 / delta_i))));
        if (J > budget) J = std::max<std::size_t>(1, budget);
        const long T = std::max<long>(1, static_cast<long>(budget / J));

        // Proximal oracle for psi + (lambda_i / 2) || . - center ||^2 derived
        // from the base oracle by rescaling.
        auto prox_aug = [&](const Vec& v, double eta) {
            const double eta_p = eta / (1.0 + eta * lambda_i);
            Vec vp = v;
            scale_inplace(vp, 1.0 / eta);
            axpy_inplace(vp, lambda_i, center);
            scale_inplace(vp, eta_p);
            return problem.prox_psi(vp, eta_p);
        };

        std::vector<Vec> candidates;
        candidates.reserve(J);
        for (std::size_t j = 0; j < J; ++j) {
            RngStream portion_rng = rng.split();
            candidates.push_back(strongly_convex_portion_solver(problem, prox_aug, lambda_i,
                                                                T, center, portion_rng));
        }
        const double R = Delta * std::pow(4.0, i) / lambda_i;
        return problem.domain.project(geometric_aggregate(candidates, R));
    };
    return ploc(problem.domain.center(), oracle, lambda, I);
}

}  // namespace htsco::localize
