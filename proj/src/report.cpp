#include "dpsched/report.hpp"

#include "dpsched/eval.hpp"
#include "dpsched/lp.hpp"
#include "dpsched/mdp.hpp"
#include "dpsched/sim.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace dpsched::report {

using nlohmann::json;

namespace {

// json number rounded to 12 significant digits; null when not finite
json num(double v) {
    if (!std::isfinite(v)) return nullptr;
    return std::stod(format_number(v));
}

json matrix_json(const Matrix& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(num(m(i, j)));
        rows.push_back(std::move(row));
    }
    return rows;
}

json eval_json(const EvalResult& r) {
    return {{"avg_delay", num(r.avg_delay)},   {"avg_queue", num(r.avg_queue)},
            {"avg_power", num(r.avg_power)},   {"throughput", num(r.throughput)},
            {"discard_rate", num(r.discard_rate)}};
}

std::string status_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::Infeasible:
        case ErrorCode::InfeasibleBudget: return "infeasible";
        case ErrorCode::StructureViolation: return "structure_violation";
        case ErrorCode::NoConvergence: return "no_convergence";
        case ErrorCode::BracketViolation: return "bracket_violation";
        default: return "numerical_failure";
    }
}

double get_number(const json& doc, const std::string& key) {
    const auto it = doc.find(key);
    if (it == doc.end()) throw Error(ErrorCode::InvalidInput, "field '" + key + "': missing");
    if (!it->is_number()) throw Error(ErrorCode::InvalidInput, "field '" + key + "': expected a number");
    return it->get<double>();
}

long get_integer(const json& doc, const std::string& key) {
    const auto it = doc.find(key);
    if (it == doc.end()) throw Error(ErrorCode::InvalidInput, "field '" + key + "': missing");
    if (!it->is_number_integer()) throw Error(ErrorCode::InvalidInput, "field '" + key + "': expected an integer");
    return it->get<long>();
}

Vector get_vector(const json& value, const std::string& where) {
    if (!value.is_array() || value.empty())
        throw Error(ErrorCode::InvalidInput, "field '" + where + "': expected a nonempty array of numbers");
    Vector out(static_cast<Eigen::Index>(value.size()));
    for (std::size_t i = 0; i < value.size(); ++i) {
        if (!value[i].is_number())
            throw Error(ErrorCode::InvalidInput,
                        "field '" + where + "[" + std::to_string(i) + "]': expected a number");
        out(static_cast<Eigen::Index>(i)) = value[i].get<double>();
    }
    return out;
}

Matrix get_matrix(const json& value, const std::string& where) {
    if (!value.is_array() || value.empty())
        throw Error(ErrorCode::InvalidInput, "field '" + where + "': expected a nonempty array of rows");
    const auto rows = value.size();
    Matrix out;
    for (std::size_t i = 0; i < rows; ++i) {
        const Vector row = get_vector(value[i], where + "[" + std::to_string(i) + "]");
        if (i == 0) out.resize(static_cast<Eigen::Index>(rows), row.size());
        if (row.size() != out.cols())
            throw Error(ErrorCode::InvalidInput, "field '" + where + "[" + std::to_string(i) + "]': ragged row");
        out.row(static_cast<Eigen::Index>(i)) = row.transpose();
    }
    return out;
}

json parse_json(const std::string& text, const std::string& what) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        const auto upto = std::min<std::size_t>(e.byte, text.size());
        const long line = 1 + std::count(text.begin(), text.begin() + static_cast<long>(upto), '\n');
        throw Error(ErrorCode::InvalidInput, what + ": syntax error near line " + std::to_string(line));
    }
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::InvalidInput, "cannot read " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string dump(const json& doc) { return doc.dump(2) + "\n"; }

ProblemConfig with_budget(ProblemConfig config, double budget) {
    config.power_budget = budget;
    return config;
}

PolicyTable load_policy_file(const std::string& path, int buffer_size, int states) {
    const json doc = parse_json(read_file(path), path);
    if (!doc.is_object()) throw Error(ErrorCode::InvalidInput, path + ": expected an object");
    if (doc.contains("thresholds")) {
        const Vector v = get_vector(doc["thresholds"], "thresholds");
        ThresholdPolicy t;
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            if (v(i) != std::floor(v(i))) throw Error(ErrorCode::InvalidInput, "field 'thresholds': expected integers");
            t.thresholds.push_back(static_cast<int>(v(i)));
        }
        if (static_cast<int>(t.thresholds.size()) != states)
            throw Error(ErrorCode::InvalidInput, "field 'thresholds': expected one entry per channel state");
        t.validate(buffer_size);
        return threshold_to_policy(t, buffer_size);
    }
    if (doc.contains("transmit_prob")) {
        const Matrix m = get_matrix(doc["transmit_prob"], "transmit_prob");
        if (m.rows() != buffer_size + 1 || m.cols() != states)
            throw Error(ErrorCode::InvalidInput, "field 'transmit_prob': expected K+1 rows of S entries");
        return PolicyTable(m);
    }
    throw Error(ErrorCode::InvalidInput, path + ": needs 'thresholds' or 'transmit_prob'");
}

}  // namespace

std::string format_number(double value) {
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    if (value == 0.0) return "0";  // folds -0
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", value);
    return buf;
}

int exit_code(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidInput:
        case ErrorCode::InvalidConfig:
        case ErrorCode::NonStochasticRow:
        case ErrorCode::NotErgodic:
        case ErrorCode::PowersNotDecreasing:
        case ErrorCode::NonPositivePower: return 1;
        case ErrorCode::Infeasible:
        case ErrorCode::InfeasibleBudget: return 2;
        case ErrorCode::TooLarge: return 3;
        default: return 4;
    }
}

Instance parse_instance(const std::string& text) {
    const json doc = parse_json(text, "config");
    if (!doc.is_object()) throw Error(ErrorCode::InvalidInput, "config: expected a JSON object");
    if (!doc.contains("transition")) throw Error(ErrorCode::InvalidInput, "field 'transition': missing");
    if (!doc.contains("powers")) throw Error(ErrorCode::InvalidInput, "field 'powers': missing");
    const Matrix p = get_matrix(doc["transition"], "transition");
    const Vector x = get_vector(doc["powers"], "powers");
    if (p.rows() != p.cols()) throw Error(ErrorCode::InvalidInput, "field 'transition': matrix is not square");
    if (x.size() != p.rows())
        throw Error(ErrorCode::InvalidInput, "field 'powers': length differs from the number of channel states");

    ProblemConfig config;
    config.arrival_rate = get_number(doc, "arrival_rate");
    const long k = get_integer(doc, "buffer_size");
    if (k < 1 || k > 1000000) throw Error(ErrorCode::InvalidInput, "field 'buffer_size': out of range");
    config.buffer_size = static_cast<int>(k);
    config.power_budget = get_number(doc, "power_budget");
    if (doc.contains("discount")) config.discount = get_number(doc, "discount");
    if (doc.contains("vi_tolerance")) config.vi_tolerance = get_number(doc, "vi_tolerance");
    if (doc.contains("bisection_tolerance")) config.bisection_tolerance = get_number(doc, "bisection_tolerance");
    if (doc.contains("lp_tolerance")) config.lp_tolerance = get_number(doc, "lp_tolerance");
    if (doc.contains("max_vi_sweeps")) config.max_vi_sweeps = get_integer(doc, "max_vi_sweeps");
    if (doc.contains("idle_at_full_buffer")) {
        if (!doc["idle_at_full_buffer"].is_boolean())
            throw Error(ErrorCode::InvalidInput, "field 'idle_at_full_buffer': expected true or false");
        config.idle_at_full_buffer = doc["idle_at_full_buffer"].get<bool>();
    }
    config.validate();
    return Instance{validate_channel_model(p, x), config};
}

Instance load_instance(const std::string& path) { return parse_instance(read_file(path)); }

Outcome run_solve(const Instance& instance) {
    const auto& model = instance.model;
    const auto& config = instance.config;
    const double theta = config.arrival_rate;
    Outcome out;
    json doc;
    doc["schema"] = "dpsched-solve/1";
    doc["instance"] = {{"states", model.states()},
                       {"arrival_rate", num(theta)},
                       {"buffer_size", config.buffer_size},
                       {"power_budget", num(config.power_budget)}};

    const auto sol = lp::solve_delay_lp(model, config);
    json lpj;
    lpj["status"] = sol.status == lp::LpStatus::Optimal ? "optimal" : "infeasible";
    lpj["phase1_residual"] = num(sol.certificate.phase1_residual);
    if (sol.status != lp::LpStatus::Optimal) {
        doc["lp"] = lpj;
        doc["mdp"] = {{"status", "infeasible"}};
        out.exit_code = 2;
        out.text = dump(doc);
        return out;
    }
    const PolicyTable table = lp::extract_policy(sol, theta, config.lp_tolerance);
    const EvalResult exact = eval::exact_evaluate(model, table, theta).result;
    lpj["delay"] = num(sol.objective_delay);
    lpj["avg_queue"] = num(sol.avg_queue);
    // nonzero only below the overflow-free power floor, where the program books
    // drops at a full buffer as transmissions
    lpj["full_buffer_mass"] = num(sol.distribution.mu.row(config.buffer_size).sum());
    lpj["power"] = num(sol.achieved_power);
    lpj["primal_infeasibility"] = num(sol.certificate.primal_infeasibility);
    lpj["dual_infeasibility"] = num(sol.certificate.dual_infeasibility);
    lpj["policy"] = matrix_json(table.matrix());
    lpj["exact"] = eval_json(exact);
    doc["lp"] = lpj;

    json mj;
    try {
        const auto lag = mdp::solve_lagrangian(model, config);
        mj["status"] = "optimal";
        mj["eta"] = num(lag.calibration.eta);
        mj["thresholds"] = lag.policy.first.thresholds;
        mj["thresholds_alt"] = lag.policy.second.thresholds;
        mj["lambda"] = num(lag.policy.weight);
        mj["delay"] = num(lag.result.avg_delay);
        mj["avg_queue"] = num(lag.result.avg_queue);
        mj["power"] = num(lag.result.avg_power);
        mj["vi_runs"] = lag.calibration.vi_runs;
        doc["mdp"] = mj;
        doc["cross_method_delta"] = num(std::abs(lag.result.avg_delay - sol.objective_delay));
    } catch (const Error& e) {
        mj["status"] = status_name(e.code());
        mj["message"] = e.what();
        doc["mdp"] = mj;
        out.exit_code = exit_code(e.code());
    }
    out.text = dump(doc);
    return out;
}

Outcome run_sweep(const Instance& instance, const SweepOptions& options) {
    if (!(options.eps_step > 0.0) || !(options.eps_to >= options.eps_from) || !(options.eps_from > 0.0))
        throw Error(ErrorCode::InvalidInput, "need 0 < eps-from <= eps-to and eps-step > 0");
    const double span = (options.eps_to - options.eps_from) / options.eps_step;
    if (span > 1e5) throw Error(ErrorCode::TooLarge, "grid has more than 1e5 points");
    const long points = static_cast<long>(std::floor(span + 1e-9)) + 1;
    if (options.sim_slots < 0) throw Error(ErrorCode::InvalidInput, "sim-slots must be >= 0");

    const auto& model = instance.model;
    const int states = model.states();
    const double theta = instance.config.arrival_rate;
    const int k = instance.config.buffer_size;

    std::ostringstream csv;
    csv << "# dpsched-sweep/1\n";
    csv << "epsilon,delay_lp,queue_lp,delay_mdp,delay_greedy,se_greedy,lambda";
    for (int s = 1; s <= states; ++s) csv << ",thresholds_" << s;
    csv << ",status,power_lp";
    for (int s = 1; s <= states; ++s) csv << ",thresholds_alt_" << s;
    csv << ",delay_monotone\n";

    double previous = std::numeric_limits<double>::quiet_NaN();
    for (long i = 0; i < points; ++i) {
        // round away accumulated drift so the grid prints cleanly
        const double eps = std::stod(format_number(options.eps_from + static_cast<double>(i) * options.eps_step));
        const ProblemConfig config = with_budget(instance.config, eps);

        std::string status = "optimal";
        std::string delay_lp, queue_lp, power_lp, delay_mdp, lambda, monotone;
        std::vector<std::string> th(states), th_alt(states);
        try {
            const auto sol = lp::solve_delay_lp(model, config);
            if (sol.status != lp::LpStatus::Optimal) {
                status = "infeasible";
            } else {
                delay_lp = format_number(sol.objective_delay);
                queue_lp = format_number(sol.avg_queue);
                power_lp = format_number(sol.achieved_power);
                monotone = std::isnan(previous) || sol.objective_delay <= previous + 1e-9 ? "1" : "0";
                previous = sol.objective_delay;
                const auto lag = mdp::solve_lagrangian(model, config);
                delay_mdp = format_number(lag.result.avg_delay);
                lambda = format_number(lag.policy.weight);
                for (int s = 0; s < states; ++s) {
                    th[s] = std::to_string(lag.policy.first.thresholds[s]);
                    th_alt[s] = std::to_string(lag.policy.second.thresholds[s]);
                }
            }
        } catch (const Error& e) {
            if (exit_code(e.code()) == 1) throw;
            status = status_name(e.code());
        }

        std::string delay_greedy, se_greedy;
        if (options.sim_slots > 0) {
            const auto r = sim::simulate(model, sim::greedy_decision_rule(model, eps), theta, k, options.sim_slots,
                                         options.seed);
            delay_greedy = format_number(r.avg_delay);
            se_greedy = format_number(r.se_delay);
        }

        csv << format_number(eps) << ',' << delay_lp << ',' << queue_lp << ',' << delay_mdp << ',' << delay_greedy
            << ',' << se_greedy << ',' << lambda;
        for (const auto& t : th) csv << ',' << t;
        csv << ',' << status << ',' << power_lp;
        for (const auto& t : th_alt) csv << ',' << t;
        csv << ',' << monotone << '\n';
    }
    return Outcome{csv.str(), 0};
}

Outcome run_simulate(const Instance& instance, const std::string& policy, long slots, std::uint64_t seed) {
    const auto& model = instance.model;
    const auto& config = instance.config;
    const double theta = config.arrival_rate;
    const int k = config.buffer_size;

    json doc;
    doc["schema"] = "dpsched-simulate/1";
    doc["policy"] = policy;
    std::optional<PolicyTable> table;
    if (policy == "lp") {
        const auto sol = lp::solve_delay_lp(model, config);
        if (sol.status != lp::LpStatus::Optimal) throw Error(ErrorCode::Infeasible, "the LP is infeasible at this budget");
        table = lp::extract_policy(sol, theta, config.lp_tolerance);
    } else if (policy == "mdp") {
        table = mdp::solve_lagrangian(model, config).policy.table(k);
    } else if (policy.rfind("file:", 0) == 0) {
        table = load_policy_file(policy.substr(5), k, model.states());
    } else if (policy != "greedy") {
        throw Error(ErrorCode::InvalidInput, "policy must be lp, mdp, greedy or file:<path>");
    }

    const auto rule = table ? sim::policy_rule(*table) : sim::greedy_decision_rule(model, config.power_budget);
    const auto r = sim::simulate(model, rule, theta, k, slots, seed);
    doc["simulation"] = {{"slots", r.slots},
                         {"seed", r.seed},
                         {"avg_queue", num(r.avg_queue)},
                         {"avg_delay", num(r.avg_delay)},
                         {"avg_power", num(r.avg_power)},
                         {"se_queue", num(r.se_queue)},
                         {"se_delay", num(r.se_delay)},
                         {"se_power", num(r.se_power)},
                         {"batches", r.batches},
                         {"arrivals", r.arrivals},
                         {"delivered", r.delivered},
                         {"discarded", r.discarded},
                         {"final_queue", r.final_queue}};
    if (table) doc["exact"] = eval_json(eval::exact_evaluate(model, *table, theta).result);
    return Outcome{dump(doc), 0};
}

Outcome run_enumerate(const Instance& instance) {
    const auto res = eval::enumerate_thresholds(instance.model, instance.config);
    json doc;
    doc["schema"] = "dpsched-enumerate/1";
    doc["best"] = {{"delay", num(res.best_delay)},
                   {"thresholds", res.best.first.thresholds},
                   {"thresholds_alt", res.best.second.thresholds},
                   {"lambda", num(res.best.weight)},
                   {"result", eval_json(res.best_result)}};
    json rows = json::array();
    for (const auto& e : res.table) {
        json row = eval_json(e.result);
        row["thresholds"] = e.policy.thresholds;
        row["overflow_free"] = e.overflow_free;
        rows.push_back(std::move(row));
    }
    doc["policies"] = std::move(rows);
    return Outcome{dump(doc), 0};
}

}  // namespace dpsched::report
