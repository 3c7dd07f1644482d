#include "dpsched/model.hpp"

#include "dpsched/markov.hpp"

#include <cmath>
#include <sstream>

namespace dpsched {

const char* to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::NonStochasticRow: return "NonStochasticRow";
    case ErrorCode::NotErgodic: return "NotErgodic";
    case ErrorCode::PowersNotDecreasing: return "PowersNotDecreasing";
    case ErrorCode::NonPositivePower: return "NonPositivePower";
    case ErrorCode::SingularTransition: return "SingularTransition";
    case ErrorCode::Infeasible: return "Infeasible";
    case ErrorCode::Unbounded: return "Unbounded";
    case ErrorCode::NumericalFailure: return "NumericalFailure";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::StructureViolation: return "StructureViolation";
    case ErrorCode::InfeasibleBudget: return "InfeasibleBudget";
    case ErrorCode::BracketViolation: return "BracketViolation";
    case ErrorCode::TooLarge: return "TooLarge";
    case ErrorCode::ReducibleClosedLoop: return "ReducibleClosedLoop";
    }
    return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(dpsched::to_string(code)) + ": " + message), code_(code) {}

ChannelModel validate_channel_model(const Matrix& transition, const Vector& powers) {
    const auto n = transition.rows();
    if (n < 1 || transition.cols() != n)
        throw Error(ErrorCode::InvalidInput, "transition matrix must be square and non-empty");
    if (powers.size() != n)
        throw Error(ErrorCode::InvalidInput, "powers length does not match the number of channel states");

    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            const double p = transition(i, j);
            if (!std::isfinite(p) || p < 0.0 || p > 1.0) {
                std::ostringstream msg;
                msg << "entry (" << i << "," << j << ") = " << p << " outside [0,1]";
                throw Error(ErrorCode::NonStochasticRow, msg.str());
            }
        }
        const double row = transition.row(i).sum();
        if (std::abs(row - 1.0) > 1e-12) {
            std::ostringstream msg;
            msg.precision(17);
            msg << "row " << i << " sums to " << row;
            throw Error(ErrorCode::NonStochasticRow, msg.str());
        }
    }
    for (Eigen::Index s = 0; s < n; ++s) {
        if (!std::isfinite(powers(s)) || powers(s) <= 0.0)
            throw Error(ErrorCode::NonPositivePower, "power of state " + std::to_string(s) + " must be positive");
        if (s > 0 && !(powers(s) < powers(s - 1)))
            throw Error(ErrorCode::PowersNotDecreasing,
                        "powers must strictly decrease with the state index (state " + std::to_string(s) + ")");
    }
    if (!markov::is_ergodic(transition))
        throw Error(ErrorCode::NotErgodic, "channel chain is not irreducible and aperiodic");

    return ChannelModel(transition, powers, markov::stationary_distribution(transition));
}

void ProblemConfig::validate() const {
    auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); };
    if (!(arrival_rate > 0.0 && arrival_rate < 1.0)) fail("arrival_rate must lie strictly inside (0,1)");
    if (buffer_size < 1) fail("buffer_size must be at least 1");
    if (!(power_budget > 0.0) || !std::isfinite(power_budget)) fail("power_budget must be positive and finite");
    if (!(discount > 0.0 && discount < 1.0)) fail("discount must lie strictly inside (0,1)");
    if (!(vi_tolerance > 0.0)) fail("vi_tolerance must be positive");
    if (!(bisection_tolerance > 0.0)) fail("bisection_tolerance must be positive");
    if (!(lp_tolerance > 0.0)) fail("lp_tolerance must be positive");
    if (max_vi_sweeps < 1) fail("max_vi_sweeps must be positive");
}

PolicyTable::PolicyTable(int buffer_size, int states) : prob_(Matrix::Zero(buffer_size + 1, states)) {
    if (buffer_size < 1 || states < 1)
        throw Error(ErrorCode::InvalidInput, "policy table needs K >= 1 and S >= 1");
}

PolicyTable::PolicyTable(Matrix transmit_prob) : prob_(std::move(transmit_prob)) {
    if (prob_.rows() < 2 || prob_.cols() < 1)
        throw Error(ErrorCode::InvalidInput, "policy table needs K >= 1 and S >= 1");
    for (Eigen::Index q = 0; q < prob_.rows(); ++q) {
        for (Eigen::Index s = 0; s < prob_.cols(); ++s) {
            const double f = prob_(q, s);
            if (!(f >= 0.0 && f <= 1.0))
                throw Error(ErrorCode::InvalidInput, "transmit probability outside [0,1] at row " + std::to_string(q));
            if (q == 0 && f != 0.0)
                throw Error(ErrorCode::InvalidInput, "cannot transmit from an empty queue (row 0 must be zero)");
        }
    }
}

PolicyTable PolicyTable::never_transmit(int buffer_size, int states) { return PolicyTable(buffer_size, states); }

PolicyTable PolicyTable::always_transmit(int buffer_size, int states) {
    Matrix m = Matrix::Ones(buffer_size + 1, states);
    m.row(0).setZero();
    return PolicyTable(std::move(m));
}

PolicyTable PolicyTable::mix(const PolicyTable& a, const PolicyTable& b, double weight) {
    if (a.prob_.rows() != b.prob_.rows() || a.prob_.cols() != b.prob_.cols())
        throw Error(ErrorCode::InvalidInput, "cannot mix policy tables of different shapes");
    if (!(weight >= 0.0 && weight <= 1.0))
        throw Error(ErrorCode::InvalidInput, "mixing weight outside [0,1]");
    Matrix m = weight * a.prob_ + (1.0 - weight) * b.prob_;
    // rounding can leave 1 + ulp when both tables hold 1
    m = m.cwiseMax(0.0).cwiseMin(1.0);
    return PolicyTable(std::move(m));
}

void ThresholdPolicy::validate(int buffer_size) const {
    if (thresholds.empty()) throw Error(ErrorCode::InvalidInput, "threshold policy has no states");
    for (int l : thresholds)
        if (l < 1 || l > buffer_size + 1)
            throw Error(ErrorCode::InvalidInput, "threshold " + std::to_string(l) + " outside [1, K+1]");
}

std::string ThresholdPolicy::to_string() const {
    std::string out = "(";
    for (std::size_t i = 0; i < thresholds.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(thresholds[i]);
    }
    return out + ")";
}

PolicyTable threshold_to_policy(const ThresholdPolicy& policy, int buffer_size) {
    policy.validate(buffer_size);
    const int states = static_cast<int>(policy.thresholds.size());
    Matrix m = Matrix::Zero(buffer_size + 1, states);
    for (int s = 0; s < states; ++s)
        for (int q = policy.thresholds[s]; q <= buffer_size; ++q) m(q, s) = 1.0;
    return PolicyTable(std::move(m));
}

std::optional<ThresholdPolicy> policy_to_threshold(const PolicyTable& table) {
    const int k = table.buffer_size();
    ThresholdPolicy out;
    for (int s = 0; s < table.states(); ++s) {
        int level = k + 1;
        for (int q = k; q >= 1; --q) {
            const double f = table(q, s);
            if (f != 0.0 && f != 1.0) return std::nullopt;
            if (f == 1.0) {
                if (level != q + 1) return std::nullopt;
                level = q;
            }
        }
        out.thresholds.push_back(level);
    }
    return out;
}

PolicyTable MixedPolicy::table(int buffer_size) const {
    return PolicyTable::mix(threshold_to_policy(first, buffer_size), threshold_to_policy(second, buffer_size),
                            weight);
}

}  // namespace dpsched
