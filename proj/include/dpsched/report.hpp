#pragma once

#include "dpsched/model.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

namespace dpsched::report {

/// A channel model plus configuration, as loaded from a JSON document:
///   { "transition": [[...], ...], "powers": [...], "arrival_rate": t,
///     "buffer_size": K, "power_budget": e,
///     optional "discount", "vi_tolerance", "bisection_tolerance",
///     "lp_tolerance", "max_vi_sweeps" }
struct Instance {
    ChannelModel model;
    ProblemConfig config;
};

/// Errors carry InvalidInput with the line (syntax) or field (schema) that
/// failed, or the validation code of the offending model/config.
Instance parse_instance(const std::string& text);
Instance load_instance(const std::string& path);

/// Maps an error to the process exit code: 1 invalid input, 2 infeasible,
/// 3 size guard, 4 numerical failure.
int exit_code(ErrorCode code);

/// Formats with 12 significant digits; non-finite values become "inf",
/// "-inf" or "nan".
std::string format_number(double value);

struct Outcome {
    std::string text;  // JSON or CSV, newline-terminated
    int exit_code = 0;
};

/// LP and Lagrangian paths side by side, as JSON.
Outcome run_solve(const Instance& instance);

struct SweepOptions {
    double eps_from = 0.8;
    double eps_to = 1.3;
    double eps_step = 0.05;
    long sim_slots = 1000000;  // 0 skips the greedy simulation
    std::uint64_t seed = 1;
};

/// One CSV row per budget on the grid; infeasible points are flagged in the
/// status column and the sweep continues.
Outcome run_sweep(const Instance& instance, const SweepOptions& options);

/// `policy` is "lp", "mdp", "greedy" or "file:<path>"; a policy file holds
/// either {"thresholds": [...]} or {"transmit_prob": [[...], ...]} with
/// K + 1 rows of S entries.
Outcome run_simulate(const Instance& instance, const std::string& policy, long slots, std::uint64_t seed);

/// Best threshold mixture and the table of every deterministic threshold
/// policy, as JSON.
Outcome run_enumerate(const Instance& instance);

}  // namespace dpsched::report
