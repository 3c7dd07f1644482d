#pragma once

#include "dpsched/eval.hpp"
#include "dpsched/model.hpp"

namespace dpsched::mdp {

/// Discounted value function of the Lagrangian problem on the post-arrival
/// state (q~, s).
struct ValueFunction {
    Matrix values;  // (K+1) x S
    Matrix diffs;   // K x S, diffs(q-1, s) = V(q, s) - V(q-1, s)
    double eta = 0.0;
    double alpha = 0.0;
    double tolerance = 0.0;  // vi_tolerance the iteration stopped at
    bool idle_at_full_buffer = false;
    long sweeps = 0;
};

/// Solves
///   V(q~,s) = min_a  (q~ - a) + eta (X_s a - eps)
///                  + alpha sum_s' P(s,s') [theta V(min(q~-a+1,K), s') + (1-theta) V(q~-a, s')]
/// with a in {0, 1} and a <= q~, and a = 1 at q~ = K unless
/// config.idle_at_full_buffer is set, stopping once the sup-norm change of one
/// sweep is at most vi_tolerance (1 - alpha) / (2 alpha). `warm_start`, if
/// given, must be (K+1) x S. Throws NoConvergence after max_vi_sweeps.
ValueFunction value_iteration(const ChannelModel& model, const ProblemConfig& config, double eta,
                              const Matrix* warm_start = nullptr);

/// Transmit-minus-idle cost gap at every post-arrival state. Row 0 is +inf;
/// row K is -inf when transmission is forced there. Transmitting is greedy
/// where the gap is <= 0.
Matrix action_gaps(const ValueFunction& vf, const ChannelModel& model, double arrival_rate);

struct StructureReport {
    double diff_violation = 0.0;  // max decrease of diffs(., s) from one row to the next
    double gap_violation = 0.0;   // max increase of the action gap from one row to the next
    double min_diff = 0.0;
    int first_bad_row = -1;       // lowest q~ where either property breaks by more than 1e-9, -1 if none

    bool holds(double tolerance) const { return diff_violation <= tolerance && gap_violation <= tolerance; }
};

/// Checks, over the whole table, that value differences are nondecreasing in
/// q~ and the transmit-minus-idle gap is nonincreasing in q~ in every channel
/// state. With idle_at_full_buffer both can fail near q~ = K: arrivals to a
/// full buffer are then dropped for free, and a state that rarely transmits
/// lets the queue saturate, which bends V downwards at the top.
StructureReport check_structure(const ValueFunction& vf, const ChannelModel& model, double arrival_rate);

/// For each s, L_s = smallest q~ >= 1 whose greedy action is transmit
/// (gap <= 0), K + 1 if none (only possible with idle_at_full_buffer). Throws StructureViolation when the greedy
/// action idles at some q~ >= L_s that the closed loop of the resulting
/// threshold policy can reach from an empty queue; rows it never visits
/// cannot affect the policy and are not checked.
ThresholdPolicy extract_thresholds(const ValueFunction& vf, const ChannelModel& model, double arrival_rate);

struct Calibration {
    double eta = 0.0;
    ThresholdPolicy within_budget;  // power <= eps
    ThresholdPolicy over_budget;    // power > eps, lower delay; equals within_budget when the budget is met exactly
    EvalResult within_result;
    EvalResult over_result;
    int vi_runs = 0;
    std::vector<double> etas;  // every multiplier value iteration ran at, in order
};

/// Past this the power term swamps the queue term by many orders of magnitude;
/// a budget still unmet there is treated as infeasible.
inline constexpr double kMaxMultiplier = 1e7;

/// Bisection on the multiplier eta using exact power of the extracted
/// threshold policy. Throws InfeasibleBudget when eps < theta min X, when
/// eta would have to exceed kMaxMultiplier, or when the only policies meeting
/// the budget overflow the buffer.
Calibration calibrate_eta(const ChannelModel& model, const ProblemConfig& config);

/// Weight on `within_budget` that meets the budget, by bisection on exact
/// power. Identical endpoints give weight 1.
MixedPolicy mix_policies(const ThresholdPolicy& within_budget, const ThresholdPolicy& over_budget,
                         const ChannelModel& model, const ProblemConfig& config);

struct LagrangianSolution {
    Calibration calibration;
    MixedPolicy policy;
    EvalResult result;
};

/// calibrate_eta followed by mix_policies, evaluated exactly.
LagrangianSolution solve_lagrangian(const ChannelModel& model, const ProblemConfig& config);

}  // namespace dpsched::mdp
