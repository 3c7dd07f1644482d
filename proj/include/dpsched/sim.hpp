#pragma once

#include "dpsched/model.hpp"

#include <cstdint>
#include <functional>
#include <random>

namespace dpsched::sim {

/// 64-bit Mersenne Twister (MT19937-64, std::mt19937_64) seeded with the
/// 64-bit seed; a uniform double is (x >> 11) * 2^-53 for each raw draw x.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

private:
    std::mt19937_64 engine_;
};

/// Called once per slot with the post-arrival length q~ and the channel
/// state; returns true to transmit (ignored when q~ = 0). Rules may keep
/// internal state; simulate() copies the rule, so every run starts from the
/// rule's initial state.
using DecisionRule = std::function<bool(int q_tilde, int state, Rng& rng)>;

/// Draws from the table; deterministic entries consume no random numbers.
DecisionRule policy_rule(const PolicyTable& policy);

/// Token bucket: credit starts at 0 and gains `budget` at the start of every
/// slot, capped at max_s X_s; transmit iff q~ >= 1 and credit >= X_s, which
/// then spends X_s.
DecisionRule greedy_decision_rule(const ChannelModel& model, double budget);

struct SimResult {
    long slots = 0;
    double avg_queue = 0.0;  // time average of the post-decision length
    double avg_delay = 0.0;  // per delivered packet, in slots
    double avg_power = 0.0;
    long arrivals = 0;
    long delivered = 0;
    long discarded = 0;
    long final_queue = 0;
    std::uint64_t seed = 0;
    // batch-means standard errors
    int batches = 0;
    double se_queue = 0.0;
    double se_delay = 0.0;
    double se_power = 0.0;
};

/// Slot n: channel s[n] is known, an arrival lands with probability theta
/// (discarded when the buffer is full), the rule decides on q~, one packet
/// leaves on transmit, then the channel moves. The initial channel state is
/// drawn from the stationary law, the queue starts empty. Per slot the
/// random draws are: arrival, decision (if the rule needs one), channel.
SimResult simulate(const ChannelModel& model, DecisionRule rule, double arrival_rate, int buffer_size, long slots,
                   std::uint64_t seed, int batches = 100);

}  // namespace dpsched::sim
