#include "htsco/harness.hpp"

#include "CLI11.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>

namespace {

std::uint64_t master_seed_override(std::uint64_t fallback) {
    if (const char* env = std::getenv("HTSCO_MASTER_SEED")) return std::strtoull(env, nullptr, 10);
    return fallback;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Heavy-tailed private stochastic convex optimization experiment runner"};
    app.require_subcommand(1);

    std::string config_path;
    bool unsafe_override = false;
    auto* run = app.add_subcommand("run", "Run the experiment described by a config file");
    run->add_option("config", config_path, "Config file path")->required();
    run->add_flag("--unsafe-override", unsafe_override,
                  "Skip privacy-precondition validation (research only; rows are "
                  "stamped non-private)");

    std::string selector = "all";
    std::string audit_csv_dir;
    auto* audit = app.add_subcommand("audit", "Run a named audit battery");
    audit->add_option("selector", selector, "Audit name or 'all'");

    auto* cal = app.add_subcommand("calibrate", "Re-derive the shipped constant defaults");

    std::string scaling_csv;
    std::string axis = "n";
    auto* scaling = app.add_subcommand("scaling", "Fit a log-log scaling slope to trial rows");
    scaling->add_option("csv", scaling_csv, "Trial CSV produced by `run`")->required();
    scaling->add_option("--axis", axis, "Swept axis: n, rho, or d");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            auto cfg = htsco::harness::parse_config_file(config_path);
            cfg.master_seed = master_seed_override(cfg.master_seed);
            cfg.unsafe_override = unsafe_override;
            const auto rows = htsco::harness::run_experiment(cfg);
            if (cfg.output.empty()) {
                htsco::harness::write_rows_csv(std::cout, rows);
            } else {
                std::ofstream out(cfg.output);
                if (!out.good()) {
                    std::cerr << "cannot open output file: " << cfg.output << "\n";
                    return 1;
                }
                htsco::harness::write_rows_csv(out, rows);
                std::cout << rows.size() << " rows written to " << cfg.output << "\n";
            }
            return 0;
        }
        if (*audit) {
            htsco::harness::AuditOptions opt;
            opt.master_seed = master_seed_override(opt.master_seed);
            const auto results = htsco::harness::run_audits(selector, opt);
            htsco::harness::print_audit_results(std::cout, results);
            return htsco::harness::all_passed(results) ? 0 : 1;
        }
        if (*cal) {
            const auto rep = htsco::harness::calibrate();
            std::cout << rep.summary << "\n";
            std::cout << "shipped defaults: c_rp=" << htsco::default_constants().c_rp
                      << " c_erm=" << htsco::default_constants().c_erm
                      << " c_sco=" << htsco::default_constants().c_sco << "\n";
            return 0;
        }
        if (*scaling) {
            std::ifstream in(scaling_csv);
            if (!in.good()) {
                std::cerr << "cannot open " << scaling_csv << "\n";
                return 1;
            }
            const auto rows = htsco::harness::read_rows_csv(in);
            htsco::harness::ScalingAxis ax = htsco::harness::ScalingAxis::N;
            if (axis == "rho") ax = htsco::harness::ScalingAxis::Rho;
            else if (axis == "d") ax = htsco::harness::ScalingAxis::D;
            else if (axis != "n") {
                std::cerr << "unknown axis: " << axis << "\n";
                return 1;
            }
            const auto rep = htsco::harness::fit_scaling(rows, ax);
            if (rep.degenerate) {
                std::cout << "degenerate fit: " << rep.note << "\n";
                return 1;
            }
            std::cout << "slope " << rep.slope << "  bootstrap CI [" << rep.ci_lo << ", "
                      << rep.ci_hi << "]\n";
            for (std::size_t i = 0; i < rep.axis_values.size(); ++i)
                std::cout << "  axis=" << rep.axis_values[i] << " median=" << rep.medians[i]
                          << " residual=" << rep.residuals[i] << "\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
