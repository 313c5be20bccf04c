#include "htsco/data.hpp"
#include "htsco/domain.hpp"
#include "htsco/rng.hpp"

#include "doctest.h"

#include <sstream>

using namespace htsco;

namespace {

Vec random_point(mech::RngStream& rng, std::size_t d, double range) {
    Vec v(d, 0.0);
    for (auto& x : v) x = rng.uniform(-range, range);
    return v;
}

}  // namespace

TEST_CASE("projection onto balls and boxes") {
    const auto ball = ConvexDomain::ball({0.0, 0.0}, 1.0);
    CHECK(ball.project({0.3, 0.4}) == Vec{0.3, 0.4});
    const Vec p = ball.project({3.0, 4.0});
    CHECK(p[0] == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(p[1] == doctest::Approx(0.8).epsilon(1e-15));

    const auto box = ConvexDomain::box({0.0, 0.0}, {1.0, 1.0});
    CHECK(box.project({-2.0, 0.5}) == Vec{0.0, 0.5});
    CHECK(box.diameter() == doctest::Approx(std::sqrt(2.0)));

    CHECK_THROWS_AS(ball.project({1.0}), std::invalid_argument);
}

TEST_CASE("projection is nonexpansive and idempotent") {
    mech::RngStream rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t d = 1 + rng.uniform_index(6);
        ConvexDomain dom = trial % 2 == 0
                               ? ConvexDomain::ball(random_point(rng, d, 2.0),
                                                    0.1 + rng.next_double() * 3.0)
                               : [&] {
                                     Vec lo = random_point(rng, d, 2.0);
                                     Vec hi = lo;
                                     for (auto& v : hi) v += 0.05 + rng.next_double();
                                     return ConvexDomain::box(lo, hi);
                                 }();
        for (int pair = 0; pair < 500; ++pair) {
            const Vec x = random_point(rng, d, 6.0);
            const Vec y = random_point(rng, d, 6.0);
            const Vec px = dom.project(x);
            const Vec py = dom.project(y);
            CHECK(dist(px, py) <= dist(x, y) + 1e-12);
            CHECK(dist(dom.project(px), px) == 0.0);
            CHECK(dom.contains(px, 1e-9));
        }
    }
}

TEST_CASE("clip matches the radial formula") {
    CHECK(clip({1.0, 1.0}, 2.0) == Vec{1.0, 1.0});
    const Vec c = clip({3.0, 4.0}, 2.0);
    CHECK(c[0] == doctest::Approx(1.2).epsilon(1e-15));
    CHECK(c[1] == doctest::Approx(1.6).epsilon(1e-15));
    CHECK(clip({0.0, 0.0}, 5.0) == Vec{0.0, 0.0});
    // Norm tie: returned unchanged.
    CHECK(clip({2.0, 0.0}, 2.0) == Vec{2.0, 0.0});
    CHECK_THROWS_AS(clip({1.0}, -1.0), std::invalid_argument);

    mech::RngStream rng(21);
    for (int t = 0; t < 20000; ++t) {
        const std::size_t d = 1 + rng.uniform_index(5);
        Vec g = random_point(rng, d, 50.0);
        const double C = rng.next_double() * 5.0;
        const Vec h = clip(g, C);
        CHECK(norm2(h) <= C * (1.0 + 1e-12));
        CHECK(norm2(h) <= norm2(g) * (1.0 + 1e-12));
    }
}

TEST_CASE("two-threshold clipping") {
    CHECK(clip_two_threshold({2.0, 0.0}, 1.0, 0.5) == Vec{1.0, 0.0});
    CHECK(clip_two_threshold({0.8, 0.0}, 1.0, 0.6) == Vec{0.8, 0.0});
    CHECK(clip_two_threshold({0.4, 0.0}, 0.3, 0.6) == Vec{0.4, 0.0});
    CHECK_THROWS_AS(clip_two_threshold({1.0}, 1.0, -0.1), std::invalid_argument);

    // Dominance: Chat >= C/2 implies || Pi_{C,Chat}(g) || <= 2 ||g||.
    mech::RngStream rng(91);
    for (int t = 0; t < 20000; ++t) {
        const std::size_t d = 1 + rng.uniform_index(4);
        const Vec g = random_point(rng, d, 10.0);
        const double C = rng.next_double() * 4.0;
        const double chat = C / 2.0 + rng.next_double() * 3.0;
        CHECK(norm2(clip_two_threshold(g, C, chat)) <= 2.0 * norm2(g) * (1.0 + 1e-12));
    }
}

TEST_CASE("dataset neighbor differs in exactly one entry") {
    Dataset data;
    for (int i = 0; i < 5; ++i) {
        SampleLoss s;
        s.id = i;
        s.payload = {static_cast<double>(i)};
        s.value = [](const Vec&) { return 0.0; };
        s.gradient = [](const Vec& x) { return zeros(x.size()); };
        data.samples.push_back(s);
    }
    SampleLoss repl;
    repl.id = 99;
    repl.payload = {99.0};
    const Dataset other = data.neighbor(2, repl);
    REQUIRE(other.size() == data.size());
    int diffs = 0;
    for (std::size_t i = 0; i < data.size(); ++i)
        if (data[i].id != other[i].id) ++diffs;
    CHECK(diffs == 1);
    CHECK_THROWS_AS(data.neighbor(17, repl), std::invalid_argument);
}

TEST_CASE("dataset CSV round trip") {
    Dataset data;
    for (int i = 0; i < 3; ++i) {
        SampleLoss s;
        s.id = i;
        s.payload = {0.125 * i, -1.0 / 3.0 + i};
        data.samples.push_back(s);
    }
    std::stringstream ss;
    write_dataset_csv(ss, data);
    const auto back = read_dataset_csv(ss);
    REQUIRE(back.ids.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(back.ids[i] == data[i].id);
        CHECK(back.payloads[i] == data[i].payload);
    }
}

TEST_CASE("moment profile validation") {
    CHECK_THROWS_AS(MomentProfile(2, {2.0, 1.0}), std::invalid_argument);  // decreasing
    CHECK_THROWS_AS(MomentProfile(1, {1.0}), std::invalid_argument);       // k < 2
    const MomentProfile m(3, {1.0, 2.0, 3.0});
    CHECK(m.g(1) == 1.0);
    CHECK(m.gk() == 3.0);
}
