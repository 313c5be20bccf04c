#include "htsco/problems.hpp"
#include "htsco/erm.hpp"

#include "doctest.h"

#include <cmath>
#include <stdexcept>
#include <sstream>

using namespace htsco;
using namespace htsco::problems;

TEST_CASE("pareto closed-form moments agree with monte carlo") {
    // alpha = 3, scale 1: E r = 1.5, E r^2 = 3.
    CHECK(pareto_moment(3.0, 1.0, 1) == doctest::Approx(1.5).epsilon(1e-15));
    CHECK(pareto_moment(3.0, 1.0, 2) == doctest::Approx(3.0).epsilon(1e-15));
    CHECK_THROWS_AS(pareto_moment(2.0, 1.0, 2), std::invalid_argument);

    mech::RngStream rng(5);
    double acc = 0.0;
    const std::size_t N = 1000000;
    for (std::size_t i = 0; i < N; ++i) acc += sample_pareto(3.0, 1.0, rng);
    CHECK(acc / N == doctest::Approx(1.5).epsilon(0.01));
}

TEST_CASE("linear problem geometry and moments") {
    const auto p = make_linear_problem(4, 2, 3.0, 1.0, 1.0, 0.5);
    REQUIRE(p.x_star.has_value());
    CHECK((*p.x_star)[0] == doctest::Approx(-0.5));
    CHECK(p.known_lipschitz);
    CHECK(p.glm);
    CHECK(*p.smooth_beta == 0.0);
    // E r^2 scaled to g2^2 = 1.
    CHECK(p.moments.g(2) == doctest::Approx(1.0).epsilon(1e-12));

    mech::RngStream rng(3);
    const auto rep = verify_moments(p, 200000, rng);
    CHECK(rep.passed);

    // L_s equals the payload norm exactly.
    for (int i = 0; i < 100; ++i) {
        const auto s = p.sampler(rng);
        CHECK(*s.lip_overestimate == doctest::Approx(norm2(s.payload)).epsilon(1e-12));
    }

    // f* matches direct computation of <Es, x*>.
    const double mean_norm = 0.5 * pareto_moment(3.0, std::sqrt(1.0 / 3.0), 1);
    CHECK(*p.f_star == doctest::Approx(-0.5 * mean_norm).epsilon(1e-12));
}

TEST_CASE("population gradient norm bounded by G_1") {
    const auto p = make_linear_problem(4, 2, 2.5, 1.0);
    mech::RngStream rng(31);
    // MC average gradient at probe points; linear losses make it x-free.
    const std::size_t N = 200000;
    Vec mean = zeros(4);
    for (std::size_t i = 0; i < N; ++i) add_inplace(mean, p.sampler(rng).payload);
    scale_inplace(mean, 1.0 / static_cast<double>(N));
    CHECK(norm2(mean) <= p.moments.g(1) * 1.02);
}

TEST_CASE("mean estimation problem") {
    const auto p = make_mean_estimation(3, 2, 2.5, 1.0);
    CHECK(*p.strongly_convex_mu == 1.0);
    CHECK(*p.smooth_beta == 1.0);
    CHECK(*p.x_star == zeros(3));  // symmetric tail, mean zero
    // Lipschitz floor from strong convexity: declared L >= mu D / 4.
    CHECK(p.moments.g(p.moments.k) >= 1.0 * p.domain.diameter() / 4.0);

    mech::RngStream rng(17);
    const auto rep = verify_moments(p, 100000, rng);
    CHECK(rep.passed);

    // Shifted variant: x* is the projected mean.
    const auto ps = make_mean_estimation(3, 2, 2.5, 1.0, 1.0, {0.25, 0.0, 0.0});
    CHECK((*ps.x_star)[0] == doctest::Approx(0.25));
    CHECK(ps.excess_loss(*ps.x_star) == doctest::Approx(0.0));
    CHECK(ps.excess_loss({-0.25, 0.0, 0.0}) == doctest::Approx(0.125).epsilon(1e-12));
}

TEST_CASE("glm gradients are collinear with the covariate") {
    const auto p = make_glm(3, 2, Activation::Logistic, 2.5, 1.0);
    CHECK(p.glm);
    mech::RngStream rng(19);
    for (int i = 0; i < 200; ++i) {
        const auto s = p.sampler(rng);
        Vec x(3, 0.0);
        for (auto& v : x) v = rng.uniform(-0.5, 0.5);
        const Vec g = s.gradient(x);
        const double sn = norm2(s.payload), gn = norm2(g);
        if (gn == 0.0) continue;
        CHECK(std::fabs(std::fabs(dot(g, s.payload)) - gn * sn) <= 1e-12 * gn * sn + 1e-300);
    }

    // s = 0 gives a zero gradient everywhere (logistic).
    SampleLoss zero_cov = p.loss_from_payload(0, zeros(3));
    CHECK(zero_cov.gradient({0.3, -0.2, 0.1}) == zeros(3));

    // Pseudo-Huber derivative saturates at delta_h.
    const auto ph = make_glm(2, 2, Activation::PseudoHuber, 2.5, 1.0, 1.0, 1.0);
    CHECK(ph.activation_dx(1e9) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("verify_moments flags slow heavy-tail convergence instead of failing") {
    // Rare enormous Lipschitz values: the second-moment CI cannot resolve
    // its bound, so the order is flagged rather than failed.
    Problem p = make_linear_problem(2, 2, 2.5, 1.0);
    p.moments = MomentProfile(2, {1.04, std::sqrt(10.0)});
    p.sampler = [](mech::RngStream& rng) {
        SampleLoss s;
        s.lip_overestimate = rng.next_double() < 1e-4 ? 300.0 : 1.0;
        s.payload = {*s.lip_overestimate, 0.0};
        s.value = [](const Vec&) { return 0.0; };
        s.gradient = [](const Vec& x) { return zeros(x.size()); };
        return s;
    };
    mech::RngStream rng(23);
    const auto rep = verify_moments(p, 20000, rng);
    CHECK(rep.passed);  // wide orders are flagged, not failed
    CHECK(rep.slow_convergence[1]);
}

TEST_CASE("capped linear problem has bounded support") {
    const auto p = make_linear_problem_capped(3, 2, 2.5, 1.0, 5.0);
    mech::RngStream rng(29);
    for (int i = 0; i < 20000; ++i) CHECK(*p.sampler(rng).lip_overestimate <= 5.0 + 1e-12);
    const auto rep = verify_moments(p, 100000, rng);
    CHECK(rep.passed);
}

TEST_CASE("glm problems pass moment verification") {
    const auto p = make_glm(3, 2, Activation::Logistic, 2.5, 1.0);
    mech::RngStream rng(37);
    CHECK(verify_moments(p, 100000, rng).passed);
    const auto ph = make_glm(3, 2, Activation::PseudoHuber, 2.5, 1.0, 1.0, 0.5);
    CHECK(verify_moments(ph, 100000, rng).passed);
}

TEST_CASE("dataset csv round trip rebuilds working losses") {
    const auto p = make_mean_estimation(3, 2, 2.5, 1.0);
    mech::RngStream rng(41);
    const Dataset data = p.draw(16, rng);
    std::stringstream ss;
    write_dataset_csv(ss, data);
    const auto payload = read_dataset_csv(ss);
    REQUIRE(payload.ids.size() == 16);
    const Vec probe = {0.1, -0.2, 0.3};
    for (std::size_t i = 0; i < 16; ++i) {
        const auto rebuilt = p.loss_from_payload(payload.ids[i], payload.payloads[i]);
        CHECK(rebuilt.gradient(probe) == data[i].gradient(probe));
        CHECK(rebuilt.value(probe) == data[i].value(probe));
        CHECK(*rebuilt.lip_overestimate ==
              doctest::Approx(*data[i].lip_overestimate).epsilon(1e-12));
    }
}

TEST_CASE("sample losses satisfy the convexity inequality on random pairs") {
    mech::RngStream rng(43);
    const auto problems_list = {
        make_linear_problem(3, 2, 2.5, 1.0),
        make_mean_estimation(3, 2, 2.5, 1.0),
        make_glm(3, 2, Activation::Logistic, 2.5, 1.0),
        make_glm(3, 2, Activation::PseudoHuber, 2.5, 1.0, 1.0, 0.5),
    };
    for (const auto& p : problems_list) {
        for (int t = 0; t < 200; ++t) {
            const auto s = p.sampler(rng);
            Vec x(3, 0.0), y(3, 0.0);
            for (auto& v : x) v = rng.uniform(-0.5, 0.5);
            for (auto& v : y) v = rng.uniform(-0.5, 0.5);
            // f(y) >= f(x) + <grad f(x), y - x> up to rounding.
            const double lhs = s.value(y);
            const double rhs = s.value(x) + dot(s.gradient(x), sub(y, x));
            CHECK(lhs >= rhs - 1e-9 * (1.0 + std::fabs(lhs)));
        }
    }
}

TEST_CASE("population gradient of the quadratic family stays below G_1") {
    const auto p = make_mean_estimation(3, 2, 2.5, 1.0);
    mech::RngStream rng(47);
    const auto probes = erm::uniform_probe_points(p.domain, 64, rng);
    const std::size_t N = 50000;
    for (const auto& x : probes) {
        Vec acc = zeros(3);
        mech::RngStream mc(137);
        for (std::size_t i = 0; i < N; ++i) add_inplace(acc, p.sampler(mc).gradient(x));
        scale_inplace(acc, 1.0 / static_cast<double>(N));
        CHECK(norm2(acc) <= p.moments.g(1) * 1.05);
    }
}
