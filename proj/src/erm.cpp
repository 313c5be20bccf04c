#include "htsco/erm.hpp"
#include "htsco/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace htsco::erm {

using mech::RngStream;

long pow2_ceil(long v) {
    long p = 1;
    while (p < v) p <<= 1;
    return p;
}

long pow2_floor(long v) {
    require(v >= 1, "pow2_floor needs a positive argument");
    long p = 1;
    while ((p << 1) <= v) p <<= 1;
    return p;
}

double enclosing_radius(const ConvexDomain& domain) {
    if (domain.kind() == ConvexDomain::Kind::Ball)
        return norm2(domain.center()) + domain.radius();
    double s = 0.0;
    for (std::size_t i = 0; i < domain.dim(); ++i) {
        const double m = std::max(std::fabs(domain.lower()[i]), std::fabs(domain.upper()[i]));
        s += m * m;
    }
    return std::sqrt(s);
}

void write_report_csv_header(std::ostream& os) {
    os << "run_id,seed,n,d,rho,C,lambda,T,excess_loss,clip_count,halted\n";
}

void write_report_csv_row(std::ostream& os, const std::string& run_id,
                          const SolverReport& report, double excess_loss) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%s,%llu,%zu,%zu,%.17g,%.17g,%.17g,%ld,%.17g,%ld,%d\n",
                  run_id.c_str(), static_cast<unsigned long long>(report.seed), report.n,
                  report.d, report.rho, report.clip_threshold, report.lambda,
                  report.iterations, excess_loss, report.clip_count,
                  report.halted ? 1 : 0);
    os << buf;
}

ErmConfig ErmConfig::make(double C, double lambda, std::size_t n, double rho,
                          std::size_t d, const ConvexDomain& domain) {
    require(C >= 0.0 && lambda >= 0.0 && rho > 0.0 && n >= 1 && d >= 1,
            "bad dp-erm parameters");
    ErmConfig cfg;
    cfg.C = C;
    cfg.lambda = lambda;
    cfg.domain = domain;
    cfg.r = enclosing_radius(domain);
    const double t_min = std::max(static_cast<double>(n),
                                  static_cast<double>(n) * static_cast<double>(n) * rho /
                                      static_cast<double>(d));
    cfg.T = pow2_ceil(static_cast<long>(std::ceil(t_min)));
    cfg.sigma2 = 2.0 * C * C * static_cast<double>(cfg.T) /
                 (static_cast<double>(n) * static_cast<double>(n) * rho);
    return cfg;
}

void ErmConfig::validate(std::size_t n, double rho, std::size_t d) const {
    const double t_min =
        std::max(static_cast<double>(n),
                 static_cast<double>(n) * static_cast<double>(n) * rho / static_cast<double>(d));
    require_config(static_cast<double>(T) >= t_min, "dp-erm: T >= max(n, n^2 rho / d) violated");
    const double want = 2.0 * C * C * static_cast<double>(T) /
                        (static_cast<double>(n) * static_cast<double>(n) * rho);
    require_config(std::fabs(sigma2 - want) <= 1e-9 * std::max(1.0, want),
                   "dp-erm: sigma^2 = 2 C^2 T / (n^2 rho) violated");
    require_config(domain.contains(zeros(domain.dim())), "dp-erm: domain must contain the origin");
}

Vec opcsgd(std::span<const SampleLoss> stream, double C, double eta, long T,
           const ConvexDomain& domain, const Vec& x0, long* clip_events) {
    require(T >= 1, "opcsgd needs at least one step");
    require(static_cast<long>(stream.size()) >= T, "sample stream shorter than T");
    require(domain.contains(x0), "x0 must lie in the domain");
    Vec x = x0;
    Vec avg = zeros(x.size());
    for (long t = 0; t < T; ++t) {
        add_inplace(avg, x);
        Vec g = stream[static_cast<std::size_t>(t)].gradient(x);
        const double gn = norm2(g);
        if (gn > C) {
            scale_inplace(g, C / gn);
            if (clip_events) ++*clip_events;
        }
        axpy_inplace(x, -eta, g);
        x = domain.project(x);
    }
    return scaled(std::move(avg), 1.0 / static_cast<double>(T));
}

Vec opcsgd_randomized_threshold(std::span<const SampleLoss> stream, double C,
                                std::span<const double> chat, double eta, long T,
                                const ConvexDomain& domain, const Vec& x0,
                                long* clip_events) {
    require(T >= 1, "opcsgd needs at least one step");
    require(static_cast<long>(stream.size()) >= T, "sample stream shorter than T");
    require(static_cast<long>(chat.size()) >= T, "threshold stream shorter than T");
    for (long t = 0; t < T; ++t)
        require(chat[static_cast<std::size_t>(t)] >= C / 2.0,
                "randomized clip threshold below C/2");
    require(domain.contains(x0), "x0 must lie in the domain");
    Vec x = x0;
    Vec avg = zeros(x.size());
    for (long t = 0; t < T; ++t) {
        add_inplace(avg, x);
        Vec g = stream[static_cast<std::size_t>(t)].gradient(x);
        const double gn = norm2(g);
        if (gn >= chat[static_cast<std::size_t>(t)] && gn > C) {
            scale_inplace(g, C / gn);
            if (clip_events) ++*clip_events;
        }
        axpy_inplace(x, -eta, g);
        x = domain.project(x);
    }
    return scaled(std::move(avg), 1.0 / static_cast<double>(T));
}

SolverReport cdpsgd(const Dataset& data, const ErmConfig& config, double rho,
                    RngStream& rng, mech::AccountantLedger* ledger, bool keep_trace) {
    const std::size_t n = data.size();
    require(n >= 1, "empty dataset");
    const std::size_t d = config.domain.dim();
    config.validate(n, rho, d);

    const double sigma = std::sqrt(config.sigma2);
    // Exact per-step charge: T is a power of two, so rho / T composes back
    // to rho without rounding drift.
    const double step_cost = rho / static_cast<double>(config.T);

    SolverReport report;
    report.seed = rng.seed();
    report.n = n;
    report.d = d;
    report.rho = rho;
    report.clip_threshold = config.C;
    report.lambda = config.lambda;
    report.iterations = config.T;
    if (keep_trace) report.trace.emplace();

    Vec x = zeros(d);
    Vec weighted = zeros(d);
    double weight_sum = 0.0;
    for (long t = 0; t < config.T; ++t) {
        const double w = static_cast<double>(t) + 4.0;
        axpy_inplace(weighted, w, x);
        weight_sum += w;
        if (keep_trace) report.trace->push_back(x);

        Vec ghat = zeros(d);
        for (const auto& s : data.samples) {
            Vec g = s.gradient(x);
            const double gn = norm2(g);
            if (gn > config.C) {
                scale_inplace(g, config.C / gn);
                ++report.clip_count;
            }
            add_inplace(ghat, g);
        }
        scale_inplace(ghat, 1.0 / static_cast<double>(n));
        report.grad_queries += static_cast<long>(n);

        const Vec xi = rng.gaussian_vec(sigma, d);
        if (ledger) ledger->charge_cdp("cdpsgd_step", "gaussian", step_cost);
        report.rho_charged += step_cost;

        // Proximal step in closed form: shrink by the regularizer, then project.
        const double eta = 4.0 / (config.lambda * (static_cast<double>(t) + 1.0));
        Vec next = x;
        axpy_inplace(next, -eta, ghat);
        axpy_inplace(next, -eta, xi);
        scale_inplace(next, 1.0 / (1.0 + eta * config.lambda));
        x = config.domain.project(next);
    }
    report.x = scaled(std::move(weighted), 1.0 / weight_sum);
    return report;
}

double erm_clip_threshold(std::size_t n, double rho, std::size_t d, int k, double G_k) {
    require(n >= 1 && rho > 0.0 && d >= 1 && k >= 2 && G_k > 0.0,
            "bad clip threshold parameters");
    const double base = 25.0 * static_cast<double>(n) * static_cast<double>(n) * rho /
                        (32.0 * static_cast<double>(d));
    return G_k * std::pow(base, 1.0 / (2.0 * static_cast<double>(k)));
}

ClipBiasReport empirical_clip_bias(const Dataset& data, double C, const ConvexDomain& domain,
                                   std::span<const Vec> probes) {
    require(!probes.empty(), "empirical_clip_bias needs at least one probe point");
    ClipBiasReport report;
    report.probe_count = probes.size();
    for (const Vec& p : probes) {
        const Vec x = domain.project(p);
        const double gap = dist(mean_gradient(data, x), mean_clipped_gradient(data, x, C));
        report.value = std::max(report.value, gap);
    }
    return report;
}

std::vector<Vec> uniform_probe_points(const ConvexDomain& domain, std::size_t count,
                                      RngStream& rng) {
    std::vector<Vec> out;
    out.reserve(count);
    const std::size_t d = domain.dim();
    if (domain.kind() == ConvexDomain::Kind::Box) {
        for (std::size_t i = 0; i < count; ++i) {
            Vec p(d, 0.0);
            for (std::size_t j = 0; j < d; ++j)
                p[j] = rng.uniform(domain.lower()[j], domain.upper()[j]);
            out.push_back(std::move(p));
        }
        return out;
    }
    // Rejection from the bounding box would be hopeless in high dimension;
    // draw a direction and a radius with the correct density instead.
    require(!rng.zeroed(), "probe sampling needs a live rng stream");
    for (std::size_t i = 0; i < count; ++i) {
        Vec p(d, 0.0);
        double nrm = 0.0;
        do {
            for (auto& v : p) v = rng.gaussian(1.0);
            nrm = norm2(p);
        } while (nrm == 0.0);
        const double r = domain.radius() *
                         std::pow(rng.next_double(), 1.0 / static_cast<double>(d));
        scale_inplace(p, r / nrm);
        add_inplace(p, domain.center());
        out.push_back(std::move(p));
    }
    return out;
}

}  // namespace htsco::erm
