// genpod: run uncertainty quantification experiments from JSON configs or
// canned presets.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "genpod/harness.hpp"

namespace {

void print_report(const genpod::RunReport& report) {
    for (const auto& rec : report.summary.at("records")) {
        std::cout << rec.at("method").get<std::string>();
        if (rec.contains("pcedim")) std::cout << " pcedim=" << rec.at("pcedim");
        if (rec.contains("kprime")) std::cout << " kprime=" << rec.at("kprime");
        if (rec.contains("samples")) std::cout << " samples=" << rec.at("samples");
        std::cout << " mean=" << genpod::format_number(rec.at("mean").get<double>())
                  << " rel_err_mean=" << genpod::format_number(rec.at("rel_err_mean").get<double>())
                  << " rel_err_variance=" << genpod::format_number(rec.at("rel_err_variance").get<double>())
                  << '\n';
    }
    if (report.summary.contains("rand_snap_medians")) {
        for (const auto& r : report.summary.at("rand_snap_medians")) {
            std::cout << "rand-snap k=" << r.at("k") << " kprime=" << r.at("kprime") << " median_rel_e_proj="
                      << genpod::format_number(r.at("median_rel_e_proj").get<double>()) << '\n';
        }
    }
    for (const auto& f : report.files) std::cout << "wrote " << f.string() << '\n';
}

void run_all(const std::vector<genpod::ExperimentConfig>& configs) {
    for (const auto& c : configs) print_report(genpod::run_experiment(c));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Galerkin POD and PCE uncertainty quantification experiments"};
    app.require_subcommand(1);

    std::string config_path;
    auto* run = app.add_subcommand("run", "Run an experiment described by a JSON config");
    run->add_option("config", config_path, "Path to the JSON config")->required();

    genpod::Overrides o;
    std::vector<CLI::App*> canned;
    for (const auto& name : genpod::canned_names()) {
        auto* sub = app.add_subcommand(name, "Canned experiment " + name);
        sub->add_option("--pcedim", o.pcedim, "PCE dimensions per parameter (comma separated)")->delimiter(',');
        sub->add_option("--kprime", o.kprime, "POD ranks (comma separated)")->delimiter(',');
        sub->add_option("--seed", o.seed, "Base seed for stochastic methods");
        sub->add_option("--samples", o.samples, "Monte Carlo sample counts (comma separated)")->delimiter(',');
        sub->add_option("--grid", o.grid, "Convection-diffusion grid size");
        sub->add_option("--out", o.out, "Output directory");
        sub->add_option("--k", o.k, "Random snapshot count");
        sub->add_option("--train-pce", o.train_pce, "PCE dimension of the training sweep");
        sub->add_option("--eval-pce", o.eval_pce, "PCE dimensions of the evaluation grids")->delimiter(',');
        sub->add_option("--realizations", o.realizations, "Repetitions with consecutive seeds");
        sub->add_option("--threads", o.threads, "Worker threads (0 = GENPOD_THREADS or all cores)");
        sub->add_flag("--no-timing", o.no_timing, "Write 0 in wall_time_s so tables are reproducible");
        canned.push_back(sub);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : static_cast<int>(genpod::ExitCode::Validation);
    }

    const auto code = genpod::guarded(
        [&] {
            if (run->parsed()) {
                run_all({genpod::load_config(config_path)});
                return;
            }
            for (auto* sub : canned) {
                if (!sub->parsed()) continue;
                std::vector<genpod::ExperimentConfig> configs;
                for (const auto& j : genpod::canned_configs(sub->get_name(), o)) {
                    configs.push_back(genpod::parse_config(j));
                }
                run_all(configs);
            }
        },
        std::cerr);
    return static_cast<int>(code);
}
