#ifndef HTSCO_MECHANISMS_HPP
#define HTSCO_MECHANISMS_HPP

#include "htsco/rng.hpp"
#include "htsco/vec.hpp"

#include <cstdint>

namespace htsco::mech {

// d i.i.d. draws from N(0, sigma^2); sigma = 0 yields the zero vector.
Vec sample_gaussian(double sigma, std::size_t d, RngStream& rng);

// Lap(R): density proportional to exp(-|xi| / R).
double sample_laplace(double R, RngStream& rng);

// BLap(R, tau): the conditional law of Lap(R) on |xi| <= tau, realized by
// rejection sampling so every returned value satisfies the bound exactly.
// R = 0 is the degenerate point mass at zero (used when a noise scale
// derived from problem smoothness collapses to zero).
double sample_bounded_laplace(double R, double tau, RngStream& rng);

// Same, reporting the number of proposals consumed. The rejection rate of
// Lap(R) against [-tau, tau] equals exp(-tau/R), which test code checks
// against the tail identity tau = R log(1/delta) <=> rate = delta.
double sample_bounded_laplace_counted(double R, double tau, RngStream& rng,
                                      std::uint64_t* attempts);

}  // namespace htsco::mech

#endif
