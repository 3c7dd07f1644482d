#include "dpsched/mdp.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace dpsched::mdp {

namespace {

// W(l, s) = sum_s' P(s,s') [theta V(min(l+1,K), s') + (1-theta) V(l, s')]
void continuation(const Matrix& v, const Matrix& p, double theta, Matrix& z, Matrix& w) {
    const auto k = v.rows() - 1;
    for (Eigen::Index l = 0; l <= k; ++l) z.row(l) = theta * v.row(std::min(l + 1, k)) + (1.0 - theta) * v.row(l);
    w.noalias() = z * p.transpose();
}

}  // namespace

ValueFunction value_iteration(const ChannelModel& model, const ProblemConfig& config, double eta,
                              const Matrix* warm_start) {
    config.validate();
    if (!(eta >= 0.0) || !std::isfinite(eta)) throw Error(ErrorCode::InvalidInput, "multiplier must be finite and >= 0");
    const int k = config.buffer_size;
    const int states = model.states();
    const double theta = config.arrival_rate;
    const double alpha = config.discount;
    const Matrix& p = model.transition();
    const Vector& x = model.powers();
    const double shift = eta * config.power_budget;
    const double stop = config.vi_tolerance * (1.0 - alpha) / (2.0 * alpha);

    Matrix v = Matrix::Zero(k + 1, states);
    if (warm_start) {
        if (warm_start->rows() != k + 1 || warm_start->cols() != states)
            throw Error(ErrorCode::InvalidInput, "warm start has the wrong shape");
        v = *warm_start;
    }
    Matrix next(k + 1, states), z(k + 1, states), w(k + 1, states);

    ValueFunction out;
    out.eta = eta;
    out.alpha = alpha;
    out.tolerance = config.vi_tolerance;
    out.idle_at_full_buffer = config.idle_at_full_buffer;
    const bool forced = !config.idle_at_full_buffer;
    for (long sweep = 1; sweep <= config.max_vi_sweeps; ++sweep) {
        continuation(v, p, theta, z, w);
        double change = 0.0;
        for (int s = 0; s < states; ++s) {
            next(0, s) = alpha * w(0, s) - shift;
            for (int q = 1; q <= k; ++q) {
                const double idle = q + alpha * w(q, s);
                const double send = (q - 1) + eta * x(s) + alpha * w(q - 1, s);
                next(q, s) = (forced && q == k ? send : std::min(idle, send)) - shift;
            }
            for (int q = 0; q <= k; ++q) change = std::max(change, std::abs(next(q, s) - v(q, s)));
        }
        v.swap(next);
        if (change <= stop) {
            out.values = v;
            out.sweeps = sweep;
            out.diffs = v.bottomRows(k) - v.topRows(k);
            return out;
        }
    }
    throw Error(ErrorCode::NoConvergence, "value iteration hit the sweep cap");
}

Matrix action_gaps(const ValueFunction& vf, const ChannelModel& model, double arrival_rate) {
    const auto k = vf.values.rows() - 1;
    const auto states = vf.values.cols();
    Matrix z(k + 1, states), w(k + 1, states);
    continuation(vf.values, model.transition(), arrival_rate, z, w);
    Matrix gap(k + 1, states);
    for (Eigen::Index s = 0; s < states; ++s) {
        gap(0, s) = std::numeric_limits<double>::infinity();
        for (Eigen::Index q = 1; q <= k; ++q)
            gap(q, s) = -1.0 + vf.eta * model.powers()(s) + vf.alpha * (w(q - 1, s) - w(q, s));
        if (!vf.idle_at_full_buffer) gap(k, s) = -std::numeric_limits<double>::infinity();
    }
    return gap;
}

StructureReport check_structure(const ValueFunction& vf, const ChannelModel& model, double arrival_rate) {
    const auto k = vf.values.rows() - 1;
    const auto states = vf.values.cols();
    const Matrix gap = action_gaps(vf, model, arrival_rate);
    StructureReport r;
    r.min_diff = vf.diffs.minCoeff();
    auto note = [&](double violation, Eigen::Index row) {
        if (violation > 1e-9 && (r.first_bad_row < 0 || row < r.first_bad_row)) r.first_bad_row = static_cast<int>(row);
    };
    for (Eigen::Index s = 0; s < states; ++s) {
        for (Eigen::Index q = 2; q <= k; ++q) {
            const double dv = vf.diffs(q - 2, s) - vf.diffs(q - 1, s);
            const double gv = gap(q, s) - gap(q - 1, s);
            r.diff_violation = std::max(r.diff_violation, dv);
            r.gap_violation = std::max(r.gap_violation, gv);
            note(dv, q);
            note(gv, q);
        }
    }
    return r;
}

ThresholdPolicy extract_thresholds(const ValueFunction& vf, const ChannelModel& model, double arrival_rate) {
    const int k = static_cast<int>(vf.values.rows()) - 1;
    const int states = static_cast<int>(vf.values.cols());
    const Matrix gap = action_gaps(vf, model, arrival_rate);
    ThresholdPolicy out;
    for (int s = 0; s < states; ++s) {
        int level = 1;
        while (level <= k && gap(level, s) > 0.0) ++level;
        out.thresholds.push_back(level);
    }

    // a post-decision state (q, s) leads to q~ = q and, on an arrival, min(q+1, K)
    const auto chain = eval::policy_transition_matrix(model, threshold_to_policy(out, k), arrival_rate);
    const auto reached = eval::reachable_from_empty(chain);
    // gap accuracy is a few times the value accuracy
    const double slack = 10.0 * std::max(vf.tolerance, 1e-12);
    for (int s = 0; s < states; ++s) {
        for (int q = 0; q <= k; ++q) {
            if (!reached[chain.index(q, s)]) continue;
            for (int qt : {q, std::min(q + 1, k)}) {
                if (qt >= out.thresholds[s] && gap(qt, s) > slack)
                    throw Error(ErrorCode::StructureViolation,
                                "greedy action idles above the threshold (state " + std::to_string(s) + ", q " +
                                    std::to_string(qt) + ")");
            }
        }
    }
    return out;
}

Calibration calibrate_eta(const ChannelModel& model, const ProblemConfig& config) {
    config.validate();
    const int k = config.buffer_size;
    const double budget = config.power_budget;
    const double tol = config.bisection_tolerance;

    // every arrival must eventually be sent, at a cost of at least min X
    if (budget < config.arrival_rate * model.powers().minCoeff() - tol)
        throw Error(ErrorCode::InfeasibleBudget, "budget is below arrival rate times the cheapest transmit power");

    Calibration out;
    Matrix warm;
    auto policy_at = [&](double eta) {
        ValueFunction vf = value_iteration(model, config, eta, warm.size() ? &warm : nullptr);
        ++out.vi_runs;
        out.etas.push_back(eta);
        warm = vf.values;
        ThresholdPolicy pol = extract_thresholds(vf, model, config.arrival_rate);
        EvalResult res = eval::exact_evaluate(model, threshold_to_policy(pol, k), config.arrival_rate).result;
        return std::pair{std::move(pol), res};
    };

    auto [free_policy, free_result] = policy_at(0.0);
    if (free_result.avg_power <= budget + tol) {
        out.eta = 0.0;
        out.within_budget = out.over_budget = free_policy;
        out.within_result = out.over_result = free_result;
        return out;
    }

    double lo = 0.0, hi = 1.0;
    ThresholdPolicy lo_pol = free_policy, hi_pol;
    EvalResult lo_res = free_result, hi_res;
    while (true) {
        auto [pol, res] = policy_at(hi);
        if (res.avg_power <= budget + tol) {
            hi_pol = std::move(pol);
            hi_res = res;
            break;
        }
        lo = hi;
        lo_pol = std::move(pol);
        lo_res = res;
        hi *= 2.0;
        if (hi > kMaxMultiplier) {
            std::ostringstream msg;
            msg << "no threshold policy meets the budget at any multiplier up to " << kMaxMultiplier;
            throw Error(ErrorCode::InfeasibleBudget, msg.str());
        }
    }

    bool exact_hit = std::abs(hi_res.avg_power - budget) <= tol;
    while (!exact_hit && hi - lo > 1e-10 * std::max(1.0, hi)) {
        const double mid = 0.5 * (lo + hi);
        auto [pol, res] = policy_at(mid);
        if (std::abs(res.avg_power - budget) <= tol) {
            hi = mid;
            hi_pol = std::move(pol);
            hi_res = res;
            exact_hit = true;
        } else if (res.avg_power > budget) {
            lo = mid;
            lo_pol = std::move(pol);
            lo_res = res;
        } else {
            hi = mid;
            hi_pol = std::move(pol);
            hi_res = res;
        }
    }

    if (hi_res.discard_rate > eval::kDiscardTolerance)
        throw Error(ErrorCode::InfeasibleBudget,
                    "the budget is only met by policies that overflow the buffer (multiplier " + std::to_string(hi) + ")");
    out.eta = hi;
    out.within_budget = hi_pol;
    out.within_result = hi_res;
    out.over_budget = exact_hit ? hi_pol : lo_pol;
    out.over_result = exact_hit ? hi_res : lo_res;
    return out;
}

MixedPolicy mix_policies(const ThresholdPolicy& within_budget, const ThresholdPolicy& over_budget,
                         const ChannelModel& model, const ProblemConfig& config) {
    config.validate();
    if (within_budget == over_budget) return MixedPolicy{within_budget, over_budget, 1.0};
    const int k = config.buffer_size;
    const auto search = eval::find_mixing_weight(model, threshold_to_policy(within_budget, k),
                                                 threshold_to_policy(over_budget, k), config.arrival_rate,
                                                 config.power_budget, config.bisection_tolerance);
    return MixedPolicy{within_budget, over_budget, search.weight};
}

LagrangianSolution solve_lagrangian(const ChannelModel& model, const ProblemConfig& config) {
    LagrangianSolution out;
    out.calibration = calibrate_eta(model, config);
    out.policy = mix_policies(out.calibration.within_budget, out.calibration.over_budget, model, config);
    out.result =
        eval::exact_evaluate(model, out.policy.table(config.buffer_size), config.arrival_rate).result;
    return out;
}

}  // namespace dpsched::mdp
