#ifndef HTSCO_SVT_HPP
#define HTSCO_SVT_HPP

#include "htsco/data.hpp"
#include "htsco/rng.hpp"

#include <functional>
#include <vector>

namespace htsco::mech {

// Sparse vector technique over Delta-sensitive queries, with bounded
// Laplace noise on both the threshold and the per-query answers.
//
// Parameter validation against an (eps, delta) target checks
//   R  >= (6 Delta / eps) sqrt(c log(5/delta))
//   tau >= R log(10 T / delta).
struct SvtConfig {
    int c = 1;            // count threshold: halt after c above-threshold answers
    double L = 0.0;       // query threshold
    double R = 0.0;       // threshold noise scale (queries use 2R)
    double tau = 0.0;     // threshold noise truncation (queries use 2 tau)
    double Delta = 0.0;   // per-query sensitivity (caller contract)

    void validate_for(double eps, double delta, std::size_t T) const;
};

enum class SvtAnswer { Below, Above };  // bottom / top

using SvtQuery = std::function<double(const Dataset&)>;

// Runs the above-threshold loop: noisy threshold b = L + BLap(R, tau),
// per-query noise BLap(2R, 2tau), answer Above iff q(D) + xi >= b, with
// the threshold resampled after every Above. Halts once `c` Above answers
// have been emitted or the stream ends. The answer list contains at most
// `c` Above entries.
std::vector<SvtAnswer> svt_run(const Dataset& data, const std::vector<SvtQuery>& queries,
                               const SvtConfig& config, RngStream& rng);

}  // namespace htsco::mech

#endif
