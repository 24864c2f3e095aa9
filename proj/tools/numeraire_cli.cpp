#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "numeraire/scenario.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Numeraire portfolio and asymptotic arbitrage diagnostics"};
    app.require_subcommand(1);

    std::string config;
    std::string out;
    int threads = 0;

    auto* run = app.add_subcommand("run", "Run a scenario and write report.json, curves.csv and plot data");
    run->add_option("--config", config, "Scenario config (JSON)")->required();
    run->add_option("--threads", threads, "Worker threads (default: OpenMP default)")->check(CLI::NonNegativeNumber);
    run->add_option("--out", out, "Output directory (overrides output.dir)");

    auto* validate = app.add_subcommand("validate", "Check a scenario config without running it");
    validate->add_option("--config", config, "Scenario config (JSON)")->required();

    CLI11_PARSE(app, argc, argv);

    numeraire::ScenarioConfig cfg;
    try {
        cfg = numeraire::load_config(config);
    } catch (const numeraire::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return numeraire::kExitConfig;
    }

    if (validate->parsed()) {
        std::cout << config << ": ok (" << numeraire::to_string(cfg.kind) << ", hash "
                  << numeraire::config_hash(cfg.raw) << ")\n";
        return numeraire::kExitOk;
    }

    std::optional<std::filesystem::path> out_dir;
    if (!out.empty()) out_dir = out;
    const auto result = numeraire::run_scenario(cfg, out_dir, threads);
    if (result.exit_code == numeraire::kExitOk) {
        std::cout << result.message << '\n';
        if (result.report.contains("results") && result.report["results"].contains("verdict")) {
            std::cout << "verdict: " << result.report["results"]["verdict"].get<std::string>() << '\n';
        }
    } else {
        std::cerr << (result.exit_code == numeraire::kExitConfig ? "config error: " : "numerical failure: ")
                  << result.message << '\n';
    }
    return result.exit_code;
}
