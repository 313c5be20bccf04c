#include "htsco/rng.hpp"
#include "htsco/errors.hpp"

#include <cmath>

namespace htsco::mech {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
}

}  // namespace

RngStream::RngStream(std::uint64_t seed) : seed_(seed) {
    std::uint64_t sm = seed;
    for (auto& w : s_) w = splitmix64(sm);
}

std::uint64_t RngStream::next_u64() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

RngStream RngStream::split() {
    std::uint64_t mix = seed_ ^ (0xD1B54A32D192ED03ULL * ++split_count_);
    RngStream child(splitmix64(mix));
    child.zero_noise_ = zero_noise_;
    return child;
}

RngStream RngStream::with_noise_disabled() const {
    RngStream out = *this;
    out.zero_noise_ = true;
    return out;
}

double RngStream::next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi) {
    return lo + (hi - lo) * next_double();
}

std::size_t RngStream::uniform_index(std::size_t n) {
    require(n > 0, "uniform_index over empty range");
    // Rejection to avoid modulo bias.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v;
    do {
        v = next_u64();
    } while (v >= limit);
    return static_cast<std::size_t>(v % n);
}

double RngStream::gaussian(double sigma) {
    require(sigma >= 0.0, "gaussian sigma must be nonnegative");
    if (zero_noise_ || sigma == 0.0) return 0.0;
    if (have_spare_gaussian_) {
        have_spare_gaussian_ = false;
        return sigma * spare_gaussian_;
    }
    // Marsaglia polar method.
    double u, v, q;
    do {
        u = uniform(-1.0, 1.0);
        v = uniform(-1.0, 1.0);
        q = u * u + v * v;
    } while (q >= 1.0 || q == 0.0);
    const double f = std::sqrt(-2.0 * std::log(q) / q);
    spare_gaussian_ = v * f;
    have_spare_gaussian_ = true;
    return sigma * u * f;
}

Vec RngStream::gaussian_vec(double sigma, std::size_t d) {
    require(d >= 1, "gaussian_vec needs d >= 1");
    Vec out(d, 0.0);
    if (zero_noise_ || sigma == 0.0) return out;
    for (double& x : out) x = gaussian(sigma);
    return out;
}

double RngStream::laplace(double scale) {
    require(scale >= 0.0, "laplace scale must be nonnegative");
    if (zero_noise_ || scale == 0.0) return 0.0;
    // Inverse CDF on u ~ U(-1/2, 1/2); 1 - 2|u| is bounded away from 0
    // because next_double() < 1.
    const double u = next_double() - 0.5;
    const double sign = u < 0.0 ? -1.0 : 1.0;
    return -scale * sign * std::log(1.0 - 2.0 * std::fabs(u));
}

}  // namespace htsco::mech
