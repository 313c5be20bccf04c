#include "htsco/svt.hpp"
#include "htsco/errors.hpp"
#include "htsco/mechanisms.hpp"

#include <cmath>

namespace htsco::mech {

void SvtConfig::validate_for(double eps, double delta, std::size_t T) const {
    require_config(eps > 0.0 && eps < 1.0 && delta > 0.0 && delta < 1.0,
                   "svt: eps, delta must lie in (0, 1)");
    require_config(c >= 1, "svt: count threshold c must be at least 1");
    require_config(Delta >= 0.0, "svt: sensitivity must be nonnegative");
    const double R_min =
        6.0 * Delta / eps * std::sqrt(static_cast<double>(c) * std::log(5.0 / delta));
    require_config(R >= R_min, "svt: R >= (6 Delta / eps) sqrt(c log(5/delta)) violated");
    const double tau_min = R * std::log(10.0 * static_cast<double>(T) / delta);
    require_config(tau >= tau_min, "svt: tau >= R log(10 T / delta) violated");
}

std::vector<SvtAnswer> svt_run(const Dataset& data, const std::vector<SvtQuery>& queries,
                               const SvtConfig& config, RngStream& rng) {
    require(config.c >= 1, "svt: count threshold must be at least 1");
    require(config.R >= 0.0 && config.tau >= 0.0, "svt: noise parameters must be nonnegative");

    std::vector<SvtAnswer> answers;
    answers.reserve(queries.size());
    int count = 0;
    double b = config.L + sample_bounded_laplace(config.R, config.tau, rng);
    for (const auto& q : queries) {
        if (count >= config.c) break;
        const double xi = sample_bounded_laplace(2.0 * config.R, 2.0 * config.tau, rng);
        if (q(data) + xi < b) {
            answers.push_back(SvtAnswer::Below);
        } else {
            answers.push_back(SvtAnswer::Above);
            ++count;
            b = config.L + sample_bounded_laplace(config.R, config.tau, rng);
        }
    }
    return answers;
}

}  // namespace htsco::mech
