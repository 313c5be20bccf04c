#include "htsco/smooth.hpp"
#include "htsco/errors.hpp"
#include "htsco/mechanisms.hpp"

#include "doctest.h"

#include <cmath>

using namespace htsco;
using namespace htsco::smooth;

namespace {

SampleLoss quadratic_at(Vec c) {
    SampleLoss s;
    s.value = [c](const Vec& x) { return 0.5 * dot(sub(x, c), sub(x, c)); };
    s.gradient = [c](const Vec& x) { return sub(x, c); };
    return s;
}

SampleLoss linear_with(Vec g) {
    SampleLoss s;
    s.payload = g;
    s.lip_overestimate = norm2(g);
    s.value = [g](const Vec& x) { return dot(g, x); };
    s.gradient = [g](const Vec&) { return g; };
    return s;
}

}  // namespace

TEST_CASE("smooth_params canonical values") {
    const MomentProfile moments(2, {1.0, 1.0});
    const auto cfg = smooth_params(4096, 4, 1.0 - 1e-12, 1e-4, 2, moments, 1.0, 0.0);
    // Reference arithmetic: c = 240 sqrt(4) log(15 * 4096 * 1e4) / 1 ~ 9701.5.
    const double c_expect = 240.0 * 2.0 * std::log(15.0 * 4096.0 * 1e4);
    CHECK(cfg.c == doctest::Approx(c_expect).epsilon(1e-9));
    CHECK(cfg.c == doctest::Approx(9701.5).epsilon(0.005));
    CHECK(cfg.omega ==
          doctest::Approx(18.0 * std::sqrt(2.0 * cfg.c * std::log(15.0 / 1e-4))).epsilon(1e-9));
    CHECK(cfg.I == 12);
    CHECK(cfg.n_eff == 4096);
    // eta is the min of the statistical and privacy branches.
    CHECK(cfg.eta <= std::sqrt(4.0 / 4096.0) + 1e-12);

    // n = 100: I = 6, effective n = 64.
    const auto cfg2 = smooth_params(100, 2, 0.5, 1e-3, 2, moments, 1.0, 0.0);
    CHECK(cfg2.I == 6);
    CHECK(cfg2.n_eff == 64);
}

TEST_CASE("smooth_params rejects an infeasible smoothness") {
    const MomentProfile moments(2, {1.0, 1.0});
    CHECK_THROWS_WITH_AS(smooth_params(4096, 4, 0.9, 1e-4, 2, moments, 1.0, 10.0),
                         doctest::Contains("smooth:"), ConfigError);
}

TEST_CASE("alg_smooth noise-disabled deterministic trace") {
    // Benign gradients below every clip trigger: the run equals plain
    // projected phased SGD.
    const std::size_t d = 2;
    const auto domain = ConvexDomain::ball(zeros(d), 0.5);
    SmoothConfig cfg;
    cfg.eps = 0.5;
    cfg.delta = 1e-3;
    cfg.beta = 1.0;
    cfg.I = 4;
    cfg.n_eff = 16;
    cfg.eta = 0.05;
    cfg.C = 10.0;
    cfg.c = 4.0;
    cfg.omega = 1.0;

    Dataset data;
    mech::RngStream rng(3);
    for (int i = 0; i < 16; ++i)
        data.samples.push_back(quadratic_at({rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2)}));

    mech::RngStream zeroed = mech::RngStream(5).with_noise_disabled();
    const auto report = alg_smooth(data, zeros(d), cfg, domain, zeroed);
    CHECK_FALSE(report.halted);
    CHECK(report.clip_count == 0);

    // Manual replay of the phased recursion.
    Vec x = zeros(d);
    std::size_t prefix = 0;
    for (int i = 1; i <= cfg.I; ++i) {
        const std::size_t ni = cfg.n_i(i);
        Vec sum = zeros(d);
        Vec cur = x;
        for (std::size_t j = 0; j < ni; ++j) {
            add_inplace(sum, cur);
            Vec g = data.samples[prefix + j].gradient(cur);
            axpy_inplace(cur, -cfg.eta_i(i), g);
            cur = domain.project(cur);
        }
        prefix += ni;
        x = scaled(sum, 1.0 / static_cast<double>(ni));
    }
    CHECK(dist(report.x, domain.project(x)) == 0.0);
}

TEST_CASE("alg_smooth halts when the clip count reaches the cutoff") {
    const std::size_t d = 2;
    const auto domain = ConvexDomain::ball(zeros(d), 1.0);
    SmoothConfig cfg;
    cfg.eps = 0.5;
    cfg.delta = 1e-3;
    cfg.beta = 0.0;
    cfg.I = 3;
    cfg.n_eff = 8;
    cfg.eta = 0.01;
    cfg.C = 1.0;
    cfg.c = 3.0;  // noise-disabled cutoff is exactly c
    cfg.omega = 0.0;

    Dataset data;
    for (int i = 0; i < 8; ++i) data.samples.push_back(linear_with({2.0, 0.0}));
    mech::RngStream zeroed = mech::RngStream(7).with_noise_disabled();
    const auto report = alg_smooth(data, zeros(d), cfg, domain, zeroed);
    CHECK(report.halted);
    CHECK(report.halt_phase == 0);  // halted inside phase 1
    CHECK(report.clip_count == 3);
}

TEST_CASE("threshold and step noise stay inside the validated envelopes") {
    const MomentProfile moments(2, {1.0, 1.0});
    // Small beta keeps the full parameter validation satisfiable.
    const auto cfg = smooth_params(4096, 4, 0.9, 1e-4, 2, moments, 1.0, 1e-6);
    mech::RngStream rng(11);
    const auto noise = make_smooth_noise(cfg, 4, rng);
    for (int i = 1; i <= cfg.I; ++i) {
        CHECK(std::fabs(noise.count_noise[i - 1]) <= cfg.c / 2.0);
        for (double t : noise.threshold[i - 1]) {
            const double chat = cfg.C + t;
            CHECK(chat >= 7.0 * cfg.C / 8.0 - 1e-12);
            CHECK(chat <= 9.0 * cfg.C / 8.0 + 1e-12);
        }
        for (double nu : noise.step[i - 1]) CHECK(std::fabs(nu) <= cfg.C / 4.0 + 1e-12);
    }
}

TEST_CASE("audit_drift on identical datasets reports zero drift") {
    const std::size_t d = 2, n = 64;
    const auto domain = ConvexDomain::ball(zeros(d), 0.25);
    Dataset data;
    mech::RngStream rng(13);
    for (std::size_t i = 0; i < n; ++i)
        data.samples.push_back(quadratic_at({rng.uniform(-0.05, 0.05), 0.0}));

    SmoothConfig cfg;
    cfg.eps = 0.5;
    cfg.delta = 1e-3;
    cfg.beta = 1.0;
    cfg.I = 6;
    cfg.n_eff = 64;
    cfg.c = 400.0;
    cfg.omega = 18.0 / cfg.eps * std::sqrt(2.0 * cfg.c * std::log(15.0 / cfg.delta));
    cfg.C = 1.0;
    cfg.eta = 1e-7;

    mech::RngStream noise_rng(17);
    const auto res = audit_drift(data, data, 5, zeros(d), cfg, domain, noise_rng);
    CHECK_FALSE(res.skipped);
    CHECK(res.qualifying);
    CHECK(res.max_drift == 0.0);

    // Precondition breach: audit skipped with a diagnostic.
    auto bad = cfg;
    bad.eta = 1.0;
    mech::RngStream noise_rng2(19);
    const auto skipped = audit_drift(data, data, 5, zeros(d), bad, domain, noise_rng2);
    CHECK(skipped.skipped);
    CHECK_FALSE(skipped.skip_reason.empty());
}

TEST_CASE("counterexample witnesses") {
    // C = 1: v - (g' - h') = (-2 + sqrt(3)/2, 1/2), first coordinate < -1.
    const auto w1 = counterexample_noncontraction(1.0);
    CHECK(w1.premise_norm == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(w1.violated_coordinate ==
          doctest::Approx(-2.0 + std::sqrt(3.0) / 2.0).epsilon(1e-12));
    CHECK(w1.violated);

    // C = 0 degenerates: premise norm 0 and the strict margin -1 < 0.
    const auto w0 = counterexample_noncontraction(0.0);
    CHECK(w0.premise_norm == doctest::Approx(0.0));
    CHECK(w0.violated_coordinate == doctest::Approx(-1.0));
    CHECK(w0.violated);

    // C = 10: premise norm 10 to 1e-12; coordinate -11 + sqrt(21)/11 < -10.
    const auto w10 = counterexample_noncontraction(10.0);
    CHECK(w10.premise_norm == doctest::Approx(10.0).epsilon(1e-13));
    CHECK(w10.violated_coordinate ==
          doctest::Approx(-11.0 + std::sqrt(21.0) / 11.0).epsilon(1e-12));
    CHECK(w10.violated);
}

TEST_CASE("smooth contraction check") {
    // f(x) = 1/2 ||x||^2, eta = 1: the map collapses to zero.
    auto grad = [](const Vec& x) { return x; };
    mech::RngStream rng(23);
    const auto ok = check_smooth_contraction(grad, 1.0, 1.0, 3, 5.0, 2000, rng);
    CHECK(ok.passed);

    // Concave counterpart expands; the check must find a witness.
    auto bad = [](const Vec& x) { return scaled(x, -1.0); };
    mech::RngStream rng2(29);
    const auto fail = check_smooth_contraction(bad, 1.0, 1.0, 3, 5.0, 2000, rng2);
    CHECK_FALSE(fail.passed);
    CHECK(fail.worst_excess > 0.1);

    CHECK_THROWS_AS(check_smooth_contraction(grad, 1.0, 3.0, 3, 5.0, 10, rng),
                    std::invalid_argument);
}

TEST_CASE("glm scalar clipping hand example") {
    // Scalars (0, 1), difference x - x' = (-1, 0), g = (1, 0), C = 0.5:
    // clipped pair (0, 0.5), stepped distance 0.5 <= 1.
    CHECK(scalar_clip(0.0, 0.5) == 0.0);
    CHECK(scalar_clip(1.0, 0.5) == 0.5);
    CHECK(scalar_clip(-3.0, 0.5) == -0.5);
    const Vec x = {0.0, 0.0}, xp = {1.0, 0.0}, g = {1.0, 0.0};
    Vec sx = x, sy = xp;
    axpy_inplace(sx, -scalar_clip(0.0, 0.5), g);
    axpy_inplace(sy, -scalar_clip(1.0, 0.5), g);
    CHECK(dist(sx, sy) == doctest::Approx(0.5));
    CHECK(dist(sx, sy) <= dist(x, xp));
}

TEST_CASE("glm_clipped_step equals vector clipping of the gradient") {
    // For f(x; s) = sigma(<s, x>) the clipped-scalar step reproduces
    // Pi_C on the full gradient.
    auto sigma_dx = [](double t) { return std::tanh(t); };
    mech::RngStream rng(31);
    for (int t = 0; t < 2000; ++t) {
        Vec s(3, 0.0), x(3, 0.0), y(3, 0.0);
        for (auto& v : s) v = rng.gaussian(2.0);
        for (auto& v : x) v = rng.uniform(-1.0, 1.0);
        for (auto& v : y) v = rng.uniform(-1.0, 1.0);
        const double eta = 0.3, C = 0.8;
        const auto [a, b] = glm_clipped_step(x, y, s, sigma_dx, eta, C);
        Vec ax = sub(x, scaled(clip(scaled(s, sigma_dx(dot(s, x))), C), eta));
        Vec bx = sub(y, scaled(clip(scaled(s, sigma_dx(dot(s, y))), C), eta));
        CHECK(dist(a, ax) <= 1e-12);
        CHECK(dist(b, bx) <= 1e-12);
    }
    // Zero covariate: zero-gradient step, not an error.
    const auto [za, zb] = glm_clipped_step({1.0}, {2.0}, {0.0}, sigma_dx, 0.1, 1.0);
    CHECK(za == Vec{1.0});
    CHECK(zb == Vec{2.0});
}

TEST_CASE("glm schedule shape") {
    const MomentProfile moments(2, {1.0, 1.0});
    const auto sched = make_glm_schedule(1024, 4, 2, moments, 1.0, 1.0);
    CHECK(sched.I == 10);
    CHECK(sched.n_eff == 1024);
    REQUIRE(!sched.phases.empty());
    CHECK(sched.phases[0].n_i == 512);
    CHECK(sched.phases[0].eta_i == doctest::Approx(sched.eta / 16.0));
    CHECK(sched.phases[0].C_i == doctest::Approx(2.0 * sched.C));
    // sigma_i = 2 eta_i C_i sqrt(2 / rho).
    CHECK(2.0 * 0.1 * 2.0 * std::sqrt(2.0) == doctest::Approx(0.5657).epsilon(1e-3));
}

TEST_CASE("opcdpsgd_glm deterministic on point-mass covariates") {
    // All covariates identical and noise disabled: output equals a manual
    // phased trace.
    const std::size_t d = 2;
    const auto problem =
        problems::make_glm(d, 2, problems::Activation::Logistic, 2.5, 1.0, 1.0, 1.0, 0.9);
    mech::RngStream rng(37);
    Dataset data = problem.draw(64, rng);
    // Overwrite with a fixed covariate to remove sampling variation.
    const Vec s0 = {0.4, 0.1};
    for (auto& s : data.samples) s = problem.loss_from_payload(s.id, s0);

    mech::RngStream zeroed = mech::RngStream(41).with_noise_disabled();
    mech::AccountantLedger ledger;
    GlmPhaseSchedule sched;
    std::vector<Vec> prenoise;
    const auto rep = opcdpsgd_glm(problem, data, problem.domain.center(), 1.0, zeroed,
                                  &ledger, &sched, &prenoise);
    CHECK(rep.rho_charged == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(ledger.rho_total() == doctest::Approx(0.25).epsilon(1e-12));
    REQUIRE(prenoise.size() == static_cast<std::size_t>(sched.I));

    Vec x = problem.domain.center();
    std::size_t offset = 0;
    for (const auto& p : sched.phases) {
        const Vec xbar = erm::opcsgd(std::span<const SampleLoss>(data.samples)
                                         .subspan(offset, p.n_i),
                                     p.C_i, p.eta_i, static_cast<long>(p.n_i),
                                     problem.domain, problem.domain.project(x));
        offset += p.n_i;
        x = xbar;  // zeroed noise
    }
    CHECK(dist(rep.x, problem.domain.project(x)) == 0.0);

    // Non-GLM input is rejected.
    const auto non_glm = problems::make_mean_estimation(d, 2, 2.5, 1.0);
    mech::RngStream r2(43);
    const Dataset qdata = non_glm.draw(64, r2);
    CHECK_THROWS_AS(opcdpsgd_glm(non_glm, qdata, zeros(d), 1.0, r2), UnsupportedAssumption);
}

TEST_CASE("drift operation simulator respects the accumulated bound") {
    mech::RngStream rng(47);
    std::vector<DriftOpKind> ops(20, DriftOpKind::Contractive);
    ops[4] = DriftOpKind::Jump;
    ops[9] = DriftOpKind::NearContractive;
    ops[15] = DriftOpKind::NearContractive;
    const auto res = simulate_drift_ops(ops, 1.0, 0.25, rng);
    CHECK(res.ok);
    CHECK(res.max_gap <= 2.0);
    CHECK_THROWS_AS(
        simulate_drift_ops(std::vector<DriftOpKind>(3, DriftOpKind::Jump), 1.0, 0.1, rng),
        std::invalid_argument);
}

TEST_CASE("alg_smooth end to end at validated parameters") {
    const MomentProfile moments(2, {1.0, 1.0});
    const auto cfg = smooth_params(2048, 4, 0.9, 1e-3, 2, moments, 1.0, 1e-6);
    Dataset data;
    mech::RngStream rng(59);
    const auto domain = ConvexDomain::ball(zeros(4), 0.5);
    for (int i = 0; i < 2048; ++i) {
        Vec g(4, 0.0);
        for (auto& v : g) v = rng.uniform(-0.2, 0.2);
        data.samples.push_back(linear_with(g));
    }
    mech::RngStream mech_rng(61);
    const auto rep = alg_smooth(data, zeros(4), cfg, domain, mech_rng);
    CHECK_FALSE(rep.halted);
    CHECK(domain.contains(rep.x, 1e-9));
    CHECK(rep.grad_queries == static_cast<long>(cfg.n_eff) - 1);
}

TEST_CASE("coupled drift is nonincreasing once all steps contract") {
    // After the differing index, both runs take identical-sample smooth
    // steps with no further clips, so the gap can only shrink.
    const std::size_t d = 2, n = 64;
    const auto domain = ConvexDomain::ball(zeros(d), 0.25);
    SmoothConfig cfg;
    cfg.eps = 0.5;
    cfg.delta = 1e-3;
    cfg.beta = 1.0;
    cfg.I = 6;
    cfg.n_eff = 64;
    cfg.c = 400.0;
    cfg.omega = 18.0 / cfg.eps * std::sqrt(2.0 * cfg.c * std::log(15.0 / cfg.delta));
    cfg.C = 1.0;
    cfg.eta = 1e-7;

    mech::RngStream data_rng(53);
    Dataset data;
    for (std::size_t i = 0; i < n; ++i) {
        Vec c(d, 0.0);
        for (auto& v : c) v = data_rng.uniform(-0.05, 0.05);
        data.samples.push_back(quadratic_at(c));
    }
    const std::size_t j0 = 5;  // inside phase 1
    Vec spike(d, 0.0);
    spike[0] = 50.0;
    Dataset other = data.neighbor(j0, quadratic_at(spike));

    std::size_t qualifying = 0;
    for (int s = 0; s < 50; ++s) {
        mech::RngStream noise_rng(500 + s);
        const auto res = audit_drift(other, data, j0, zeros(d), cfg, domain, noise_rng);
        REQUIRE_FALSE(res.skipped);
        if (!res.qualifying) continue;
        ++qualifying;
        for (std::size_t j = j0 + 2; j < res.step_drifts.size(); ++j)
            CHECK(res.step_drifts[j] <= res.step_drifts[j - 1] * (1.0 + 1e-12));
    }
    CHECK(qualifying > 25);
}
