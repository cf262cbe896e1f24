#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "satpriv/scenario.hpp"

int main(int argc, char** argv) {
    CLI::App app{"satpriv: privacy/utility-aware sensor noise synthesis for orbit tracking"};
    app.require_subcommand(1);

    auto* run_cmd = app.add_subcommand("run", "run a scenario and write report files");
    std::string scenario_path, out_dir, mode, filter;
    std::int64_t seed = -1;
    double tol = -1.0;
    bool dump = false;
    run_cmd->add_option("--scenario", scenario_path, "scenario JSON file")->required();
    run_cmd->add_option("--out", out_dir, "output directory")->required();
    run_cmd->add_option("--mode", mode,
                        "override mode: utility|privacy|utility_aware|privacy_aware|precision");
    run_cmd->add_option("--seed", seed, "override the EnKF seed");
    run_cmd->add_option("--filter", filter, "override the filter: enkf|ukf");
    run_cmd->add_option("--tol", tol, "override the SDP duality-gap tolerance");
    run_cmd->add_flag("--dump-problem", dump, "write problem_dump.txt");

    CLI11_PARSE(app, argc, argv);

    try {
        satpriv::Scenario s = satpriv::load_scenario(scenario_path);
        satpriv::RunOptions opts;
        if (!mode.empty()) {
            using satpriv::RunMode;
            if (mode == "utility") opts.mode_override = RunMode::utility;
            else if (mode == "privacy") opts.mode_override = RunMode::privacy;
            else if (mode == "utility_aware") opts.mode_override = RunMode::utility_aware;
            else if (mode == "privacy_aware") opts.mode_override = RunMode::privacy_aware;
            else if (mode == "precision") opts.mode_override = RunMode::precision;
            else {
                std::cerr << "error: unknown mode '" << mode << "'\n";
                return 1;
            }
        }
        if (seed >= 0) opts.seed_override = static_cast<std::uint64_t>(seed);
        if (!filter.empty()) opts.filter_override = filter;
        if (tol > 0.0) opts.tol_override = tol;
        opts.dump_problem = dump;

        satpriv::RunReport rep = satpriv::run(s, out_dir, opts);
        std::cout << "scenario: " << rep.scenario.name << "\n"
                  << "mode:     " << satpriv::to_string(rep.scenario.mode) << "\n"
                  << "status:   " << satpriv::to_string(rep.result.status) << "\n";
        for (size_t i = 0; i < rep.result.achieved_utility.size(); ++i)
            std::cout << "utility[" << i << "]: trace " << rep.result.achieved_utility[i]
                      << " km^2 (bound " << rep.resolved_utility_gammas[i] << ")\n";
        for (size_t i = 0; i < rep.result.achieved_privacy.size(); ++i)
            std::cout << "privacy[" << i << "]: trace " << rep.result.achieved_privacy[i]
                      << " km^2\n";
        if (rep.improvement_factor)
            std::cout << "privacy improvement factor: " << *rep.improvement_factor << "\n";
        if (!rep.result.message.empty()) std::cout << "note: " << rep.result.message << "\n";
        std::cout << "reports written to " << out_dir << "\n";
        return rep.exit_code;
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 1;
    }
}
