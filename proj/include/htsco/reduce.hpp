#ifndef HTSCO_REDUCE_HPP
#define HTSCO_REDUCE_HPP

#include "htsco/constants.hpp"
#include "htsco/erm.hpp"
#include "htsco/problems.hpp"

#include <functional>
#include <iosfwd>
#include <vector>

namespace htsco::reduce {

enum class TruncationMode { Convex, StronglyConvex };

// Dataset with every sample whose Lipschitz overestimate exceeds C replaced
// by a dummy: the zero loss in convex mode, (mu/2) ||x - center||^2 in
// strongly convex mode.
struct TruncatedDataset {
    Dataset data;
    std::vector<bool> replaced;
    double C = 0.0;
    TruncationMode mode = TruncationMode::Convex;
    double mu = 0.0;
    Vec center;

    std::size_t replaced_count() const;
    // CSV: index, L_bar, replaced
    void write_report_csv(std::ostream& os, const Dataset& original) const;
};

struct TruncationParams {
    TruncationMode mode = TruncationMode::Convex;
    double mu = 0.0;          // strongly convex mode
    Vec center;               // default: domain center
    double domain_diameter = 0.0;
};

// Replacement uses the strict rule L-bar_s > C. Strongly convex mode
// requires C >= mu D / 4 (no Lipschitz, mu-strongly convex function on a
// diameter-D set can beat that).
TruncatedDataset truncate_dataset(const Dataset& data, double C, const TruncationParams& params);

// A uniform-Lipschitz private SCO solver behind the reduction. The default
// adapter is the localization + clipped-ERM stack run with moments capped
// at L (clipping at L is then inactive).
struct LipschitzSolverAdapter {
    std::string name;
    double L = 0.0;
    std::function<erm::SolverReport(const Dataset&, double rho, const ConvexDomain&,
                                    mech::RngStream&, mech::AccountantLedger*)>
        solve;
    // Declared expected excess population loss at (n, rho); validated by the
    // test suite against measured runs, never assumed in proofs of privacy.
    std::function<double(std::size_t n, double rho)> err_bound;
};

LipschitzSolverAdapter make_default_adapter(const MomentProfile& moments, double L,
                                            double delta,
                                            const Constants& constants = default_constants());

// Known-Lipschitz reduction: computes the clip level
//   C = G_k (n sqrt(rho) / sqrt(d))^(1/k)        (mu = 0)
//   C = G_k (n^2 rho / d)^(1/(2k))               (mu > 0)
// truncates the dataset, and delegates to the adapter. When d > n^2 rho the
// stated bounds are vacuous and the domain center is returned directly.
erm::SolverReport kl_reduce(const Dataset& data, double mu, double rho,
                            const ConvexDomain& domain,
                            const LipschitzSolverAdapter& adapter,
                            const MomentProfile& moments, mech::RngStream& rng,
                            mech::AccountantLedger* ledger = nullptr,
                            const Vec* sc_center = nullptr);

double kl_clip_level(double mu, std::size_t n, double rho, std::size_t d, int k, double G_k);

// Lipschitz constant of F_P - F_P^C: G_k^k / ((k-1) C^(k-1)), plus
// 4 G_k^(k+1) / C^k in strongly convex mode.
double lipschitz_gap_bound(double C, const MomentProfile& moments, TruncationMode mode);

}  // namespace htsco::reduce

#endif
