#include "dpsched/report.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

namespace {

int emit(const dpsched::report::Outcome& outcome, const std::string& output) {
    if (output.empty()) {
        std::cout << outcome.text;
    } else {
        std::ofstream out(output, std::ios::binary);
        if (!out) {
            std::cerr << "error: cannot write " << output << "\n";
            return 1;
        }
        out << outcome.text;
    }
    return outcome.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
    using namespace dpsched;
    CLI::App app{"Delay-optimal transmission scheduling over a Markov channel"};
    app.require_subcommand(1);

    std::string config_path, output, policy;
    std::optional<double> epsilon;
    report::SweepOptions sweep;
    long slots = 1000000;
    std::uint64_t seed = 1;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON instance file")->required()->check(CLI::ExistingFile);
        sub->add_option("--epsilon", epsilon, "override the power budget");
        sub->add_option("-o,--output", output, "write to this file instead of stdout");
    };

    auto* solve = app.add_subcommand("solve", "solve by LP and by the Lagrangian path, report both");
    add_common(solve);

    auto* sw = app.add_subcommand("sweep", "delay/power tradeoff table as CSV");
    add_common(sw);
    sw->add_option("--eps-from", sweep.eps_from, "first budget")->capture_default_str();
    sw->add_option("--eps-to", sweep.eps_to, "last budget")->capture_default_str();
    sw->add_option("--eps-step", sweep.eps_step, "budget step")->capture_default_str();
    sw->add_option("--sim-slots", sweep.sim_slots, "slots per greedy simulation, 0 to skip")->capture_default_str();
    sw->add_option("--seed", sweep.seed, "seed of the greedy simulations")->capture_default_str();

    auto* simulate = app.add_subcommand("simulate", "Monte Carlo run of a policy");
    add_common(simulate);
    simulate->add_option("--policy", policy, "lp, mdp, greedy or file:<path>")->required();
    simulate->add_option("--slots", slots, "number of simulated slots")->capture_default_str()->check(CLI::PositiveNumber);
    simulate->add_option("--seed", seed, "random seed")->capture_default_str();

    auto* enumerate = app.add_subcommand("enumerate", "brute force over threshold policies");
    add_common(enumerate);

    CLI11_PARSE(app, argc, argv);

    try {
        auto instance = report::load_instance(config_path);
        if (epsilon) {
            instance.config.power_budget = *epsilon;
            instance.config.validate();
        }
        if (solve->parsed()) return emit(report::run_solve(instance), output);
        if (sw->parsed()) return emit(report::run_sweep(instance, sweep), output);
        if (simulate->parsed()) return emit(report::run_simulate(instance, policy, slots, seed), output);
        return emit(report::run_enumerate(instance), output);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return report::exit_code(e.code());
    }
}
