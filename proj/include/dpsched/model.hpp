#pragma once

#include <Eigen/Dense>

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

/// Delay-optimal, power-constrained transmission scheduling over a Markov
/// channel: one FIFO queue with Bernoulli arrivals, finite buffer, and a
/// per-channel-state transmission energy.
namespace dpsched {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class ErrorCode {
    InvalidInput,
    InvalidConfig,
    NonStochasticRow,
    NotErgodic,
    PowersNotDecreasing,
    NonPositivePower,
    SingularTransition,
    Infeasible,
    Unbounded,
    NumericalFailure,
    NoConvergence,
    StructureViolation,
    InfeasibleBudget,
    BracketViolation,
    TooLarge,
    ReducibleClosedLoop,
};

const char* to_string(ErrorCode code);

/// All library failures are reported through this exception; `code()` is the
/// structured reason and `what()` carries the human-readable context.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message);
    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// S-state channel chain with the energy needed to deliver one packet in
/// each state. State 0 is the worst channel; powers strictly decrease with the
/// state index. Only constructible through validate_channel_model().
class ChannelModel {
public:
    const Matrix& transition() const { return transition_; }
    const Vector& powers() const { return powers_; }
    /// Stationary distribution of the channel chain, computed at validation.
    const Vector& stationary() const { return stationary_; }
    int states() const { return static_cast<int>(powers_.size()); }

private:
    friend ChannelModel validate_channel_model(const Matrix&, const Vector&);
    ChannelModel(Matrix p, Vector x, Vector rho)
        : transition_(std::move(p)), powers_(std::move(x)), stationary_(std::move(rho)) {}

    Matrix transition_;
    Vector powers_;
    Vector stationary_;
};

/// Checks stochasticity (rows sum to 1 within 1e-12, entries in [0,1]),
/// ergodicity and strictly decreasing positive powers.
ChannelModel validate_channel_model(const Matrix& transition, const Vector& powers);

struct ProblemConfig {
    double arrival_rate = 0.5;     // theta, Bernoulli arrival probability per slot
    int buffer_size = 10;          // K
    double power_budget = 1.0;     // epsilon, long-run energy per slot
    double discount = 0.999;
    double vi_tolerance = 1e-9;
    double bisection_tolerance = 1e-8;
    double lp_tolerance = 1e-9;
    long max_vi_sweeps = 1000000;
    // Value iteration normally forces a transmission at a full buffer, which
    // keeps its policies overflow-free. Setting this lets it idle there and
    // drop the next arrival at no cost.
    bool idle_at_full_buffer = false;

    /// Throws Error(InvalidConfig) when any field is out of range.
    void validate() const;
};

/// Randomized stationary policy: transmit_prob(q, s) is the probability of
/// sending when the post-arrival queue length is q and the channel is s.
class PolicyTable {
public:
    PolicyTable(int buffer_size, int states);
    explicit PolicyTable(Matrix transmit_prob);

    static PolicyTable never_transmit(int buffer_size, int states);
    static PolicyTable always_transmit(int buffer_size, int states);

    double operator()(int q, int s) const { return prob_(q, s); }
    const Matrix& matrix() const { return prob_; }
    int buffer_size() const { return static_cast<int>(prob_.rows()) - 1; }
    int states() const { return static_cast<int>(prob_.cols()); }

    /// Entrywise convex combination weight * a + (1 - weight) * b.
    static PolicyTable mix(const PolicyTable& a, const PolicyTable& b, double weight);

private:
    Matrix prob_;
};

/// Per-state queue thresholds; thresholds[s] == K + 1 means never transmit in s.
struct ThresholdPolicy {
    std::vector<int> thresholds;

    bool operator==(const ThresholdPolicy&) const = default;
    void validate(int buffer_size) const;
    std::string to_string() const;
};

PolicyTable threshold_to_policy(const ThresholdPolicy& policy, int buffer_size);

/// Inverse of threshold_to_policy; nullopt unless every column is a
/// nondecreasing 0/1 step function with a zero first row.
std::optional<ThresholdPolicy> policy_to_threshold(const PolicyTable& table);

/// Per-slot randomization between two deterministic threshold policies:
/// realized table = weight * table(first) + (1 - weight) * table(second).
struct MixedPolicy {
    ThresholdPolicy first;
    ThresholdPolicy second;
    double weight = 1.0;

    PolicyTable table(int buffer_size) const;
};

/// Steady-state probability mu(q, s) of post-decision queue length q with
/// channel s governing the next slot.
struct JointDistribution {
    Matrix mu;

    int buffer_size() const { return static_cast<int>(mu.rows()) - 1; }
    int states() const { return static_cast<int>(mu.cols()); }
    double total() const { return mu.sum(); }
};

struct EvalResult {
    double avg_queue = 0.0;   // time average of the post-decision queue length
    double avg_delay = 0.0;   // slots per delivered packet
    double avg_power = 0.0;   // energy per slot
    double throughput = 0.0;  // delivered packets per slot
    double discard_rate = 0.0;
};

}  // namespace dpsched
