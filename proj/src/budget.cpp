#include "htsco/budget.hpp"
#include "htsco/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

namespace htsco::mech {

PrivacyBudget PrivacyBudget::cdp(double rho) {
    require(rho >= 0.0 && std::isfinite(rho), "rho must be finite and nonnegative");
    PrivacyBudget b;
    b.kind = Kind::Cdp;
    b.rho = rho;
    return b;
}

PrivacyBudget PrivacyBudget::rdp(double alpha, double eps) {
    require(alpha > 1.0, "RDP order must exceed 1");
    require(eps >= 0.0, "RDP eps must be nonnegative");
    PrivacyBudget b;
    b.kind = Kind::Rdp;
    b.alpha = alpha;
    b.eps = eps;
    return b;
}

PrivacyBudget PrivacyBudget::approx_dp(double eps, double delta) {
    require(eps >= 0.0, "eps must be nonnegative");
    require(delta >= 0.0 && delta <= 1.0, "delta must lie in [0, 1]");
    PrivacyBudget b;
    b.kind = Kind::ApproxDp;
    b.eps = eps;
    b.delta = delta;
    return b;
}

PrivacyBudget gaussian_cdp_cost(double L, double sigma) {
    require(L >= 0.0, "sensitivity must be nonnegative");
    require(sigma >= 0.0, "sigma must be nonnegative");
    if (L == 0.0) return PrivacyBudget::cdp(0.0);
    if (sigma == 0.0)
        throw ConfigError("gaussian mechanism with sigma = 0 and L > 0 has infinite cost");
    return PrivacyBudget::cdp(L * L / (2.0 * sigma * sigma));
}

PrivacyBudget rdp_to_dp(double alpha, double eps, double delta) {
    require(alpha > 1.0, "RDP order must exceed 1");
    require(delta > 0.0 && delta < 1.0, "delta must lie in (0, 1)");
    require(eps >= 0.0, "eps must be nonnegative");
    return PrivacyBudget::approx_dp(eps + std::log(1.0 / delta) / (alpha - 1.0), delta);
}

const std::vector<double>& rdp_alpha_grid() {
    static const std::vector<double> grid = [] {
        std::vector<double> g = {1.25, 1.5};
        for (int a = 2; a <= 64; ++a) g.push_back(static_cast<double>(a));
        return g;
    }();
    return grid;
}

void AccountantLedger::charge_cdp(const std::string& label, const std::string& mechanism,
                                  double rho) {
    require(rho >= 0.0 && std::isfinite(rho), "CDP charge must be finite and nonnegative");
    const long double y = static_cast<long double>(rho) - comp_;
    const long double t = total_ + y;
    comp_ = (t - total_) - y;
    total_ = t;
    entries_.push_back({label, mechanism, rho, rho_total()});
}

void AccountantLedger::charge_parallel_group(const std::string& label,
                                             const std::vector<double>& branch_totals) {
    require(!branch_totals.empty(), "parallel group needs at least one branch");
    const double worst = *std::max_element(branch_totals.begin(), branch_totals.end());
    charge_cdp(label, "parallel_composition", worst);
}

double AccountantLedger::rho_total() const { return static_cast<double>(total_); }

PrivacyBudget AccountantLedger::to_approx_dp(double delta) const {
    require(delta > 0.0 && delta < 1.0, "delta must lie in (0, 1)");
    const double rho = rho_total();
    double best = std::numeric_limits<double>::infinity();
    for (double alpha : rdp_alpha_grid()) {
        // rho-CDP gives (alpha, rho * alpha)-RDP for every order.
        const double eps = rdp_to_dp(alpha, rho * alpha, delta).eps;
        best = std::min(best, eps);
    }
    return PrivacyBudget::approx_dp(best, delta);
}

void AccountantLedger::write_csv(std::ostream& os) const {
    os << "step_label,mechanism,rho_cost,rho_total\n";
    char buf[96];
    for (const auto& e : entries_) {
        std::snprintf(buf, sizeof(buf), ",%.17g,%.17g", e.rho_cost, e.rho_total);
        os << e.label << ',' << e.mechanism << buf << "\n";
    }
}

}  // namespace htsco::mech
