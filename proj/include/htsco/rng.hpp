#ifndef HTSCO_RNG_HPP
#define HTSCO_RNG_HPP

#include "htsco/vec.hpp"

#include <cstdint>

namespace htsco::mech {

// Deterministic noise switch for solvers. `disabled` zeroes every mechanism
// draw (Gaussian, Laplace, bounded Laplace) while leaving data sampling
// untouched. Test- and audit-only; the CLI offers no way to select it.
enum class NoiseMode { on, disabled };

// Counter-split xoshiro256++ stream. Identical seeds give identical draw
// sequences; split() derives a child stream whose seed mixes the parent
// seed with a per-parent counter, so sibling streams never share state.
//
// Sampling routines (uniform, Gaussian, Laplace) are implemented here rather
// than with std::<distribution> so that sequences are stable across standard
// libraries.
class RngStream {
  public:
    explicit RngStream(std::uint64_t seed);

    RngStream split();

    std::uint64_t next_u64();
    double next_double();                      // uniform [0, 1)
    double uniform(double lo, double hi);
    std::size_t uniform_index(std::size_t n);  // {0, .., n-1}

    // Mechanism draws. All return exact zeros when the stream is zeroed.
    double gaussian(double sigma);
    Vec gaussian_vec(double sigma, std::size_t d);
    double laplace(double scale);

    std::uint64_t seed() const { return seed_; }
    bool zeroed() const { return zero_noise_; }

    // Copy of this stream with all mechanism noise forced to zero. Children
    // obtained via split() inherit the flag.
    RngStream with_noise_disabled() const;
    RngStream with_mode(NoiseMode mode) const {
        return mode == NoiseMode::disabled ? with_noise_disabled() : *this;
    }

  private:
    std::uint64_t s_[4];
    std::uint64_t seed_ = 0;
    std::uint64_t split_count_ = 0;
    bool zero_noise_ = false;
    bool have_spare_gaussian_ = false;
    double spare_gaussian_ = 0.0;
};

}  // namespace htsco::mech

#endif
