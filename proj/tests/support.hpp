#pragma once

#include "dpsched/model.hpp"

#include <random>
#include <vector>

namespace dpsched::testing {

inline ChannelModel reference_model() {
    Matrix p(3, 3);
    p << 0.5, 0.3, 0.2, 0.3, 0.4, 0.3, 0.2, 0.3, 0.5;
    Vector x(3);
    x << 4.5, 1.5, 0.5;
    return validate_channel_model(p, x);
}

inline ProblemConfig reference_config(double budget) {
    ProblemConfig c;
    c.arrival_rate = 0.6;
    c.buffer_size = 11;
    c.power_budget = budget;
    return c;
}

inline std::vector<double> reference_grid() {
    std::vector<double> out;
    for (int i = 0; i <= 10; ++i) out.push_back(0.8 + 0.05 * i);
    return out;
}

inline ChannelModel single_state(double power) {
    return validate_channel_model(Matrix::Ones(1, 1), Vector::Constant(1, power));
}

/// Random ergodic chain with strictly positive entries and random
/// decreasing powers.
inline ChannelModel random_model(std::mt19937_64& rng, int states) {
    std::uniform_real_distribution<double> u(0.05, 1.0);
    Matrix p(states, states);
    for (int i = 0; i < states; ++i) {
        for (int j = 0; j < states; ++j) p(i, j) = u(rng);
        p.row(i) /= p.row(i).sum();
        // exact row sums: put the rounding error on the diagonal
        p(i, i) = 0.0;
        p(i, i) = 1.0 - p.row(i).sum();
    }
    Vector x(states);
    double level = 0.2 + u(rng);
    for (int s = states - 1; s >= 0; --s) {
        x(s) = level;
        level += 0.2 + 2.0 * u(rng);
    }
    return validate_channel_model(p, x);
}

/// All threshold policies for S states and buffer K, odometer order.
inline std::vector<ThresholdPolicy> all_thresholds(int states, int buffer_size) {
    std::vector<ThresholdPolicy> out;
    ThresholdPolicy t;
    t.thresholds.assign(states, 1);
    while (true) {
        out.push_back(t);
        int pos = 0;
        while (pos < states && ++t.thresholds[pos] > buffer_size + 1) t.thresholds[pos++] = 1;
        if (pos == states) return out;
    }
}

}  // namespace dpsched::testing
