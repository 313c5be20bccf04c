#ifndef HTSCO_CONSTANTS_HPP
#define HTSCO_CONSTANTS_HPP

namespace htsco {

// Universal constants left unspecified by the analysis. Defaults were fixed
// by the `calibrate` CLI run documented in README.md (smallest values passing
// the regularized-subproblem radius checks on the quadratic benchmark at
// n = 2^12: measured c_rp = 1.086 and c_erm = 0.720), then rounded up.
struct Constants {
    double c_rp = 1.1;    // regularized population subproblem radius factor
    double c_erm = 0.75;  // empirical subproblem radius factor
    double c_sco = 4.0;   // end-to-end rate / query-count factor
    double c_lip = 32.0;  // uniform-Lipschitz adapter error factor (measured <= 23)
    double c_ht = 16.0;   // known-Lipschitz reduction error factor (measured <= 10)

    // Cutoff implementing "n sufficiently larger than log(1/delta)":
    // below n_min_factor * ln(1/delta) the localization driver returns the
    // domain center with a warning instead of running an infeasible schedule.
    double n_min_factor = 64.0;

    // First-phase regularization cap, in units of G_1 / D. The localization
    // driver clamps lambda_1 = 32 lambda at c_travel * G_1 / D so the first
    // phase can move from the center to any point of the domain when the
    // error target is coarse (movement ~ ||grad F|| / lambda_1 >= D / 2).
    double c_travel = 2.0;
};

inline const Constants& default_constants() {
    static const Constants c{};
    return c;
}

}  // namespace htsco

#endif
