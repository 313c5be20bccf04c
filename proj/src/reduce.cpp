#include "htsco/reduce.hpp"
#include "htsco/errors.hpp"
#include "htsco/localize.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace htsco::reduce {

std::size_t TruncatedDataset::replaced_count() const {
    return static_cast<std::size_t>(std::count(replaced.begin(), replaced.end(), true));
}

void TruncatedDataset::write_report_csv(std::ostream& os, const Dataset& original) const {
    require(original.size() == replaced.size(), "truncation report size mismatch");
    os << "index,L_bar,replaced\n";
    char buf[64];
    for (std::size_t i = 0; i < replaced.size(); ++i) {
        const double lbar = original.samples[i].lip_overestimate.value_or(
            std::numeric_limits<double>::quiet_NaN());
        std::snprintf(buf, sizeof(buf), "%zu,%.17g,%d\n", i, lbar, replaced[i] ? 1 : 0);
        os << buf;
    }
}

namespace {

SampleLoss zero_dummy(std::int64_t id, std::size_t d) {
    SampleLoss s;
    s.id = id;
    s.lip_overestimate = 0.0;
    s.value = [](const Vec&) { return 0.0; };
    s.gradient = [d](const Vec&) { return zeros(d); };
    return s;
}

SampleLoss strongly_convex_dummy(std::int64_t id, double mu, Vec center, double lip_bar) {
    SampleLoss s;
    s.id = id;
    s.lip_overestimate = lip_bar;
    s.value = [mu, center](const Vec& x) {
        return 0.5 * mu * dot(sub(x, center), sub(x, center));
    };
    s.gradient = [mu, center](const Vec& x) { return scaled(sub(x, center), mu); };
    return s;
}

}  // namespace

TruncatedDataset truncate_dataset(const Dataset& data, double C,
                                  const TruncationParams& params) {
    require(!data.samples.empty(), "empty dataset");
    require(C >= 0.0, "truncation threshold must be nonnegative");
    if (params.mode == TruncationMode::StronglyConvex) {
        require(params.mu > 0.0, "strongly convex truncation needs mu > 0");
        require(!params.center.empty(), "strongly convex truncation needs a center");
        require_config(C >= params.mu * params.domain_diameter / 4.0,
                       "truncation: C >= mu D / 4 violated");
    }

    TruncatedDataset out;
    out.C = C;
    out.mode = params.mode;
    out.mu = params.mu;
    out.center = params.center;
    out.replaced.resize(data.size(), false);
    out.data.samples.reserve(data.size());
    const double dummy_lip = params.mu * params.domain_diameter;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto& s = data.samples[i];
        if (!s.lip_overestimate.has_value())
            throw UnsupportedAssumption("sample lacks a Lipschitz overestimate");
        if (*s.lip_overestimate > C) {
            out.replaced[i] = true;
            out.data.samples.push_back(
                params.mode == TruncationMode::Convex
                    ? zero_dummy(s.id, params.center.empty() ? 1 : params.center.size())
                    : strongly_convex_dummy(s.id, params.mu, params.center, dummy_lip));
        } else {
            out.data.samples.push_back(s);
        }
    }
    return out;
}

double kl_clip_level(double mu, std::size_t n, double rho, std::size_t d, int k,
                     double G_k) {
    require(n >= 1 && rho > 0.0 && d >= 1 && k >= 2 && G_k > 0.0, "bad reduction parameters");
    const double nd = static_cast<double>(n);
    const double dd = static_cast<double>(d);
    if (mu == 0.0)
        return G_k * std::pow(nd * std::sqrt(rho) / std::sqrt(dd), 1.0 / static_cast<double>(k));
    return G_k * std::pow(nd * nd * rho / dd, 1.0 / (2.0 * static_cast<double>(k)));
}

LipschitzSolverAdapter make_default_adapter(const MomentProfile& moments, double L,
                                            double delta, const Constants& constants) {
    // After truncation every surviving sample is L-Lipschitz, so the moment
    // bounds cap at L.
    std::vector<double> capped;
    capped.reserve(static_cast<std::size_t>(moments.k));
    for (int j = 1; j <= moments.k; ++j) capped.push_back(std::min(moments.g(j), L));
    MomentProfile capped_moments(moments.k, std::move(capped));

    LipschitzSolverAdapter adapter;
    adapter.name = "localize_erm_uniform_lipschitz";
    adapter.L = L;
    adapter.solve = [capped_moments, delta, constants](
                        const Dataset& data, double rho, const ConvexDomain& domain,
                        mech::RngStream& rng, mech::AccountantLedger* ledger) {
        return localize::ht_dpsco_on_data(data, domain, capped_moments, rho, delta, rng,
                                          ledger, constants);
    };
    const double g2 = capped_moments.g(2);
    const double c_lip = constants.c_lip;
    adapter.err_bound = [g2, L, c_lip](std::size_t n, double rho) {
        // D and sqrt(d) enter through the solve call's domain; the declared
        // functional is stated per unit diameter at the calibration d = 4.
        const double nd = static_cast<double>(n);
        return c_lip * (g2 / std::sqrt(nd) + 2.0 * L / (nd * std::sqrt(rho)));
    };
    return adapter;
}

erm::SolverReport kl_reduce(const Dataset& data, double mu, double rho,
                            const ConvexDomain& domain,
                            const LipschitzSolverAdapter& adapter,
                            const MomentProfile& moments, mech::RngStream& rng,
                            mech::AccountantLedger* ledger, const Vec* sc_center) {
    const std::size_t n = data.size();
    const std::size_t d = domain.dim();
    const double C = kl_clip_level(mu, n, rho, d, moments.k, moments.gk());
    require_config(std::fabs(adapter.L - C) <= 1e-9 * std::max(1.0, C),
                   "adapter Lipschitz level must equal the reduction clip level");

    erm::SolverReport report;
    if (static_cast<double>(d) > static_cast<double>(n) * static_cast<double>(n) * rho) {
        // All stated bounds are vacuous in this regime.
        report.x = domain.center();
        report.n = n;
        report.d = d;
        report.rho = rho;
        report.clip_threshold = C;
        report.warning = "d > n^2 rho: returning the domain center";
        return report;
    }

    TruncationParams params;
    if (mu > 0.0) {
        params.mode = TruncationMode::StronglyConvex;
        params.mu = mu;
        params.center = sc_center ? *sc_center : domain.center();
        params.domain_diameter = domain.diameter();
    } else {
        params.mode = TruncationMode::Convex;
        params.center = domain.center();
    }
    const TruncatedDataset truncated = truncate_dataset(data, C, params);

    report = adapter.solve(truncated.data, rho, domain, rng, ledger);
    report.clip_threshold = C;
    return report;
}

double lipschitz_gap_bound(double C, const MomentProfile& moments, TruncationMode mode) {
    require(C > 0.0, "gap bound needs C > 0");
    const int k = moments.k;
    const double gk = moments.gk();
    double bound = std::pow(gk, k) / ((static_cast<double>(k) - 1.0) * std::pow(C, k - 1));
    if (mode == TruncationMode::StronglyConvex)
        bound += 4.0 * std::pow(gk, k + 1) / std::pow(C, k);
    return bound;
}

}  // namespace htsco::reduce
