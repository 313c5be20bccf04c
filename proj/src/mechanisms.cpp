#include "htsco/mechanisms.hpp"
#include "htsco/errors.hpp"

#include <cmath>

namespace htsco::mech {

Vec sample_gaussian(double sigma, std::size_t d, RngStream& rng) {
    require(sigma >= 0.0, "sigma must be nonnegative");
    require(d >= 1, "dimension must be at least 1");
    return rng.gaussian_vec(sigma, d);
}

double sample_laplace(double R, RngStream& rng) {
    require(R >= 0.0, "laplace scale must be positive");
    return rng.laplace(R);
}

double sample_bounded_laplace_counted(double R, double tau, RngStream& rng,
                                      std::uint64_t* attempts) {
    require(R >= 0.0, "bounded laplace scale must be nonnegative");
    if (R == 0.0) {
        if (attempts) *attempts += 1;
        return 0.0;
    }
    require(tau > 0.0, "truncation threshold must be positive");
    if (rng.zeroed()) {
        if (attempts) *attempts += 1;
        return 0.0;
    }
    for (;;) {
        if (attempts) *attempts += 1;
        const double x = rng.laplace(R);
        if (std::fabs(x) <= tau) return x;
    }
}

double sample_bounded_laplace(double R, double tau, RngStream& rng) {
    return sample_bounded_laplace_counted(R, tau, rng, nullptr);
}

}  // namespace htsco::mech
