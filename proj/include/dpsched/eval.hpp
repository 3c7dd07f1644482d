#pragma once

#include "dpsched/model.hpp"

#include <vector>

namespace dpsched::eval {

/// Closed-loop chain over joint states (q, s): q is the post-decision queue
/// length of one slot and s the channel that governs the next decision.
/// Joint state (q, s) has index s * (K + 1) + q.
struct ClosedLoopChain {
    Matrix transition;
    int buffer_size = 0;
    int states = 0;

    int index(int q, int s) const { return s * (buffer_size + 1) + q; }
};

/// One slot from (q, s): an arrival (prob theta) lifts the length to
/// min(q + 1, K), where an arrival into a full buffer is discarded; the
/// policy then transmits with probability f(q~, s); the channel moves to s'
/// with probability P(s, s') independently.
ClosedLoopChain policy_transition_matrix(const ChannelModel& model, const PolicyTable& policy, double arrival_rate);

struct Evaluation {
    EvalResult result;
    JointDistribution distribution;
};

/// Marks the joint states reachable from (0, s) for some s, by chain index.
std::vector<char> reachable_from_empty(const ClosedLoopChain& chain);

/// Stationary metrics of a stationary randomized policy. The stationary law
/// is solved on the states reachable from an empty queue, which hold exactly
/// one closed class. avg_delay = avg_queue / throughput, where throughput is
/// theta minus the discard rate (infinite when nothing is delivered).
Evaluation exact_evaluate(const ChannelModel& model, const PolicyTable& policy, double arrival_rate);

/// Transmit occupancies implied by a policy and its stationary law:
/// y(q, s) is the probability that a slot in channel s ends with q packets
/// right after a transmission. Row K holds theta * mu(K, s), the rate of
/// arrivals that find the buffer full; with that convention
/// sum_s y(q, s) = theta * sum_s mu(q, s) for every q.
Matrix implied_occupancy(const PolicyTable& policy, const JointDistribution& distribution, double arrival_rate);

struct WeightSearch {
    double weight = 1.0;
    Evaluation evaluation;
    int evaluations = 0;
};

/// Finds w in [0, 1] such that the entrywise mixture
/// w * within_budget + (1 - w) * over_budget spends the budget: stops when
/// |power - budget| <= tolerance, otherwise returns the budget-meeting end of
/// the final bracket. The bracket is first located on `grid` equal steps.
/// Exact power is not affine in w; the search only needs it to be monotone,
/// and throws BracketViolation when an interior point leaves the bracket.
WeightSearch find_mixing_weight(const ChannelModel& model, const PolicyTable& within_budget,
                                const PolicyTable& over_budget, double arrival_rate, double budget,
                                double tolerance, int grid = 0);

/// Discard rates at or below this count as "no buffer overflow".
inline constexpr double kDiscardTolerance = 1e-9;

struct EnumeratedPolicy {
    ThresholdPolicy policy;
    EvalResult result;
    bool overflow_free = false;
};

struct EnumerationResult {
    double best_delay = 0.0;
    MixedPolicy best;
    EvalResult best_result;
    std::vector<EnumeratedPolicy> table;  // every deterministic threshold policy
};

/// Brute force over all (K+1)^S threshold policies and all budget-straddling
/// pairs of them. A candidate counts as feasible only if it never overflows
/// the buffer (all thresholds <= K) and its exact power is within the budget;
/// every budget crossing of a pair's mixture power on a `lambda_grid`-point
/// scan is refined by bisection on exact power, since power need not be
/// monotone in the weight for an arbitrary pair. Throws TooLarge when (K+1)^S > 1e5 and
/// InfeasibleBudget when no overflow-free candidate meets the budget.
EnumerationResult enumerate_thresholds(const ChannelModel& model, const ProblemConfig& config, int lambda_grid = 8);

}  // namespace dpsched::eval
