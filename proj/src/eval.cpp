#include "dpsched/eval.hpp"

#include "dpsched/markov.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dpsched::eval {

ClosedLoopChain policy_transition_matrix(const ChannelModel& model, const PolicyTable& policy, double arrival_rate) {
    const int k = policy.buffer_size();
    const int states = model.states();
    if (policy.states() != states) throw Error(ErrorCode::InvalidInput, "policy and channel disagree on S");
    const Matrix& p = model.transition();
    const double theta = arrival_rate;

    ClosedLoopChain chain;
    chain.buffer_size = k;
    chain.states = states;
    chain.transition = Matrix::Zero((k + 1) * states, (k + 1) * states);

    for (int s = 0; s < states; ++s) {
        for (int q = 0; q <= k; ++q) {
            // distribution of the post-decision length after this slot
            Vector next = Vector::Zero(k + 1);
            const int with_arrival = std::min(q + 1, k);
            const double f_up = policy(with_arrival, s);
            next(with_arrival) += theta * (1.0 - f_up);
            if (with_arrival >= 1) next(with_arrival - 1) += theta * f_up;
            const double f_stay = policy(q, s);
            next(q) += (1.0 - theta) * (1.0 - f_stay);
            if (q >= 1) next(q - 1) += (1.0 - theta) * f_stay;

            const int from = chain.index(q, s);
            for (int q2 = 0; q2 <= k; ++q2) {
                if (next(q2) == 0.0) continue;
                for (int s2 = 0; s2 < states; ++s2) chain.transition(from, chain.index(q2, s2)) += next(q2) * p(s, s2);
            }
        }
    }
    return chain;
}

std::vector<char> reachable_from_empty(const ClosedLoopChain& chain) {
    const int n = (chain.buffer_size + 1) * chain.states;
    const Matrix& t = chain.transition;
    std::vector<char> reached(n, 0);
    std::vector<int> stack;
    for (int s = 0; s < chain.states; ++s) {
        reached[chain.index(0, s)] = 1;
        stack.push_back(chain.index(0, s));
    }
    while (!stack.empty()) {
        const int u = stack.back();
        stack.pop_back();
        for (int v = 0; v < n; ++v)
            if (t(u, v) > 0.0 && !reached[v]) {
                reached[v] = 1;
                stack.push_back(v);
            }
    }
    return reached;
}

Evaluation exact_evaluate(const ChannelModel& model, const PolicyTable& policy, double arrival_rate) {
    const auto chain = policy_transition_matrix(model, policy, arrival_rate);
    const int k = chain.buffer_size;
    const int states = chain.states;
    const int n = (k + 1) * states;
    const Matrix& t = chain.transition;

    const std::vector<char> reached = reachable_from_empty(chain);
    std::vector<int> live;
    for (int i = 0; i < n; ++i)
        if (reached[i]) live.push_back(i);
    const int m = static_cast<int>(live.size());
    Matrix sub(m, m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) sub(i, j) = t(live[i], live[j]);

    Vector pi;
    try {
        pi = markov::solve_stationary(sub);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::ReducibleClosedLoop)
            throw Error(ErrorCode::ReducibleClosedLoop, "closed-loop chain has several recurrent classes");
        throw;
    }
    if (markov::stationary_residual(sub, pi) > 1e-11)
        throw Error(ErrorCode::NumericalFailure, "closed-loop stationary residual above 1e-11");

    Evaluation out;
    out.distribution.mu = Matrix::Zero(k + 1, states);
    for (int i = 0; i < m; ++i) {
        const int idx = live[i];
        out.distribution.mu(idx % (k + 1), idx / (k + 1)) = pi(i);
    }

    const Matrix& mu = out.distribution.mu;
    const Vector& x = model.powers();
    const double theta = arrival_rate;
    double queue = 0.0, power = 0.0, sent = 0.0;
    for (int s = 0; s < states; ++s) {
        for (int q = 0; q <= k; ++q) {
            const double w = mu(q, s);
            if (w == 0.0) continue;
            const double tx = theta * policy(std::min(q + 1, k), s) + (1.0 - theta) * policy(q, s);
            queue += q * w;
            sent += w * tx;
            power += w * tx * x(s);
        }
    }
    EvalResult& r = out.result;
    r.avg_queue = queue;
    r.avg_power = power;
    r.throughput = sent;
    r.discard_rate = theta * mu.row(k).sum();
    const double delivered = theta - r.discard_rate;
    r.avg_delay = delivered > 0.0 ? queue / delivered : std::numeric_limits<double>::infinity();
    return out;
}

Matrix implied_occupancy(const PolicyTable& policy, const JointDistribution& distribution, double arrival_rate) {
    const int k = distribution.buffer_size();
    const int states = distribution.states();
    const Matrix& mu = distribution.mu;
    const double theta = arrival_rate;
    Matrix y = Matrix::Zero(k + 1, states);
    for (int s = 0; s < states; ++s) {
        for (int q = 0; q < k; ++q) {
            // from q+1 without an arrival, or from q with one; a full buffer
            // stays at K whether or not a packet arrives
            const double reach = (q + 1 == k ? 1.0 : 1.0 - theta) * mu(q + 1, s) + theta * mu(q, s);
            y(q, s) = reach * policy(q + 1, s);
        }
        y(k, s) = theta * mu(k, s);
    }
    return y;
}

WeightSearch find_mixing_weight(const ChannelModel& model, const PolicyTable& within_budget,
                                const PolicyTable& over_budget, double arrival_rate, double budget,
                                double tolerance, int grid) {
    WeightSearch out;
    auto eval_at = [&](double w) {
        ++out.evaluations;
        return exact_evaluate(model, PolicyTable::mix(within_budget, over_budget, w), arrival_rate);
    };

    Evaluation right = eval_at(1.0);
    Evaluation left = eval_at(0.0);
    if (right.result.avg_power > budget + tolerance)
        throw Error(ErrorCode::BracketViolation, "within-budget endpoint exceeds the budget");
    if (left.result.avg_power < budget - tolerance)
        throw Error(ErrorCode::BracketViolation, "over-budget endpoint is below the budget");
    if (std::abs(right.result.avg_power - budget) <= tolerance) {
        out.weight = 1.0;
        out.evaluation = std::move(right);
        return out;
    }
    if (std::abs(left.result.avg_power - budget) <= tolerance) {
        out.weight = 0.0;
        out.evaluation = std::move(left);
        return out;
    }

    double lo = 0.0, hi = 1.0;
    auto check_inside = [&](const Evaluation& e) {
        const double p = e.result.avg_power;
        if (p > left.result.avg_power + tolerance || p < right.result.avg_power - tolerance)
            throw Error(ErrorCode::BracketViolation, "mixture power is not monotone in the weight");
    };
    if (grid > 1) {
        Evaluation prev = left;
        for (int i = 1; i < grid; ++i) {
            const double w = static_cast<double>(i) / grid;
            Evaluation e = eval_at(w);
            check_inside(e);
            if (e.result.avg_power <= budget) {
                hi = w;
                right = std::move(e);
                break;
            }
            lo = w;
            prev = std::move(e);
        }
        left = std::move(prev);
    }

    while (hi - lo > 1e-15) {
        const double mid = 0.5 * (lo + hi);
        Evaluation e = eval_at(mid);
        check_inside(e);
        const double p = e.result.avg_power;
        if (std::abs(p - budget) <= tolerance) {
            out.weight = mid;
            out.evaluation = std::move(e);
            return out;
        }
        if (p > budget) {
            lo = mid;
        } else {
            hi = mid;
            right = std::move(e);
        }
    }
    out.weight = hi;
    out.evaluation = std::move(right);
    return out;
}

namespace {

// Mixture weights where the power of w * low + (1 - w) * high meets the
// budget: every sign change on a `grid`-step scan, refined by bisection on the
// sign alone. Arbitrary pairs need not have power monotone in w, so each
// crossing is returned.
std::vector<Evaluation> budget_crossings(const ChannelModel& model, const PolicyTable& low, const PolicyTable& high,
                                         double arrival_rate, double budget, double tolerance, int grid,
                                         std::vector<double>& weights) {
    auto eval_at = [&](double w) { return exact_evaluate(model, PolicyTable::mix(low, high, w), arrival_rate); };
    std::vector<Evaluation> out;
    grid = std::max(grid, 1);
    Evaluation prev = eval_at(0.0);
    for (int i = 1; i <= grid; ++i) {
        double hi = static_cast<double>(i) / grid;
        Evaluation next = eval_at(hi);
        const bool was_over = prev.result.avg_power > budget;
        if (was_over != (next.result.avg_power > budget)) {
            double lo = static_cast<double>(i - 1) / grid;
            Evaluation meet = was_over ? next : prev;
            double meet_w = was_over ? hi : lo;
            double a = lo, b = hi;
            while (b - a > 1e-15 && std::abs(meet.result.avg_power - budget) > tolerance) {
                const double mid = 0.5 * (a + b);
                Evaluation e = eval_at(mid);
                const bool over = e.result.avg_power > budget;
                if (over == was_over) {
                    a = mid;
                } else {
                    b = mid;
                }
                if (!over) {
                    meet = std::move(e);
                    meet_w = mid;
                }
            }
            weights.push_back(meet_w);
            out.push_back(std::move(meet));
        }
        prev = std::move(next);
    }
    return out;
}

}  // namespace

EnumerationResult enumerate_thresholds(const ChannelModel& model, const ProblemConfig& config, int lambda_grid) {
    config.validate();
    const int k = config.buffer_size;
    const int states = model.states();
    double count = std::pow(static_cast<double>(k + 1), states);
    if (count > 1e5) throw Error(ErrorCode::TooLarge, "(K+1)^S exceeds 1e5 threshold policies");

    EnumerationResult out;
    ThresholdPolicy current;
    current.thresholds.assign(states, 1);
    while (true) {
        EnumeratedPolicy entry;
        entry.policy = current;
        entry.result = exact_evaluate(model, threshold_to_policy(current, k), config.arrival_rate).result;
        entry.overflow_free = entry.result.discard_rate <= kDiscardTolerance;
        out.table.push_back(std::move(entry));
        int pos = 0;
        while (pos < states && ++current.thresholds[pos] > k + 1) current.thresholds[pos++] = 1;
        if (pos == states) break;
    }

    const double budget = config.power_budget;
    const double tol = config.bisection_tolerance;
    bool found = false;
    auto consider = [&](double delay, const MixedPolicy& mixed, const EvalResult& result) {
        if (!found || delay < out.best_delay) {
            found = true;
            out.best_delay = delay;
            out.best = mixed;
            out.best_result = result;
        }
    };

    for (const auto& e : out.table) {
        if (e.overflow_free && e.result.avg_power <= budget + tol)
            consider(e.result.avg_delay, MixedPolicy{e.policy, e.policy, 1.0}, e.result);
    }
    // A mixture transmits no more often than the entrywise-min-threshold
    // policy in every state, so by a pathwise coupling its queue is at least
    // that policy's queue. Pairs whose bound cannot beat the incumbent are
    // skipped; the pruning is exact.
    auto table_index = [&](const ThresholdPolicy& t) {
        std::size_t idx = 0, stride = 1;
        for (int s = 0; s < states; ++s) {
            idx += static_cast<std::size_t>(t.thresholds[s] - 1) * stride;
            stride *= static_cast<std::size_t>(k + 1);
        }
        return idx;
    };
    struct Pair {
        double bound;
        std::size_t low, high;
    };
    std::vector<Pair> pairs;
    for (std::size_t i = 0; i < out.table.size(); ++i) {
        const auto& low = out.table[i];
        if (!low.overflow_free || low.result.avg_power > budget) continue;
        for (std::size_t j = 0; j < out.table.size(); ++j) {
            const auto& high = out.table[j];
            if (!high.overflow_free || high.result.avg_power <= budget) continue;
            ThresholdPolicy eager = low.policy;
            for (int s = 0; s < states; ++s)
                eager.thresholds[s] = std::min(eager.thresholds[s], high.policy.thresholds[s]);
            pairs.push_back({out.table[table_index(eager)].result.avg_queue / config.arrival_rate, i, j});
        }
    }
    std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) { return a.bound < b.bound; });
    for (const auto& pair : pairs) {
        if (found && pair.bound >= out.best_delay) break;
        const auto& low = out.table[pair.low];
        const auto& high = out.table[pair.high];
        std::vector<double> weights;
        const auto roots = budget_crossings(model, threshold_to_policy(low.policy, k),
                                            threshold_to_policy(high.policy, k), config.arrival_rate, budget, tol,
                                            lambda_grid, weights);
        for (std::size_t r = 0; r < roots.size(); ++r)
            consider(roots[r].result.avg_delay, MixedPolicy{low.policy, high.policy, weights[r]}, roots[r].result);
    }
    if (!found) throw Error(ErrorCode::InfeasibleBudget, "no overflow-free threshold mixture meets the power budget");
    return out;
}

}  // namespace dpsched::eval
