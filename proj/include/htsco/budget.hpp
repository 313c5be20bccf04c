#ifndef HTSCO_BUDGET_HPP
#define HTSCO_BUDGET_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace htsco::mech {

// One privacy parameterization: rho-CDP, (alpha, eps)-RDP, or (eps, delta)-DP.
struct PrivacyBudget {
    enum class Kind { Cdp, Rdp, ApproxDp };
    Kind kind = Kind::Cdp;
    double rho = 0.0;
    double alpha = 0.0;
    double eps = 0.0;
    double delta = 0.0;

    static PrivacyBudget cdp(double rho);
    static PrivacyBudget rdp(double alpha, double eps);
    static PrivacyBudget approx_dp(double eps, double delta);
};

// Gaussian mechanism on an L-sensitive statistic with noise sigma costs
// L^2 / (2 sigma^2) in CDP. sigma = 0 with L > 0 has infinite cost.
PrivacyBudget gaussian_cdp_cost(double L, double sigma);

// (alpha, eps)-RDP implies (eps + log(1/delta)/(alpha-1), delta)-DP.
PrivacyBudget rdp_to_dp(double alpha, double eps, double delta);

// Ordered log of CDP charges with an exactly-composed running total.
// Charges on provably disjoint data compose in parallel: the group cost is
// the max over branches, recorded once via charge_parallel_group.
class AccountantLedger {
  public:
    struct Entry {
        std::string label;
        std::string mechanism;
        double rho_cost = 0.0;
        double rho_total = 0.0;
    };

    void charge_cdp(const std::string& label, const std::string& mechanism, double rho);
    void charge_parallel_group(const std::string& label,
                               const std::vector<double>& branch_totals);

    double rho_total() const;
    const std::vector<Entry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }

    // Smallest (eps, delta)-DP parameterization of the running CDP total,
    // optimized over the RDP order grid {1.25, 1.5, 2, 3, ..., 64}.
    PrivacyBudget to_approx_dp(double delta) const;

    // CSV: step_label, mechanism, rho_cost, rho_total
    void write_csv(std::ostream& os) const;

  private:
    std::vector<Entry> entries_;
    // Kahan-compensated accumulation in long double keeps the total within
    // one double ulp of the exact sum even over ~1e6 per-step charges.
    long double total_ = 0.0L;
    long double comp_ = 0.0L;
};

// RDP order grid used for CDP -> (eps, delta) conversion.
const std::vector<double>& rdp_alpha_grid();

}  // namespace htsco::mech

#endif
