#include "dpsched/sim.hpp"

#include <cmath>
#include <deque>
#include <vector>

namespace dpsched::sim {

namespace {

int sample(const std::vector<double>& cumulative, double u) {
    for (std::size_t j = 0; j + 1 < cumulative.size(); ++j)
        if (u < cumulative[j]) return static_cast<int>(j);
    return static_cast<int>(cumulative.size()) - 1;
}

std::vector<double> cumulate(const Vector& row) {
    std::vector<double> out(row.size());
    double acc = 0.0;
    for (Eigen::Index j = 0; j < row.size(); ++j) out[j] = acc += row(j);
    return out;
}

double standard_error(const std::vector<double>& means) {
    const auto b = means.size();
    if (b < 2) return 0.0;
    double m = 0.0;
    for (double x : means) m += x;
    m /= static_cast<double>(b);
    double ss = 0.0;
    for (double x : means) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(b - 1) / static_cast<double>(b));
}

}  // namespace

DecisionRule policy_rule(const PolicyTable& policy) {
    return [policy](int q, int s, Rng& rng) {
        const double f = policy(q, s);
        if (f >= 1.0) return true;
        if (f <= 0.0) return false;
        return rng.uniform() < f;
    };
}

DecisionRule greedy_decision_rule(const ChannelModel& model, double budget) {
    if (!(budget > 0.0)) throw Error(ErrorCode::InvalidInput, "greedy budget must be positive");
    const Vector powers = model.powers();
    const double cap = powers.maxCoeff();
    double credit = 0.0;
    return [powers, cap, budget, credit](int q, int s, Rng&) mutable {
        credit = std::min(credit + budget, cap);
        if (q < 1 || credit < powers(s)) return false;
        credit -= powers(s);
        return true;
    };
}

SimResult simulate(const ChannelModel& model, DecisionRule rule, double arrival_rate, int buffer_size, long slots,
                   std::uint64_t seed, int batches) {
    if (slots < 1) throw Error(ErrorCode::InvalidInput, "need at least one slot");
    if (!(arrival_rate > 0.0 && arrival_rate < 1.0)) throw Error(ErrorCode::InvalidInput, "arrival rate must be in (0,1)");
    if (buffer_size < 1) throw Error(ErrorCode::InvalidInput, "buffer size must be >= 1");
    if (batches < 1) throw Error(ErrorCode::InvalidInput, "need at least one batch");
    if (!rule) throw Error(ErrorCode::InvalidInput, "empty decision rule");

    const int states = model.states();
    std::vector<std::vector<double>> rows;
    for (int s = 0; s < states; ++s) rows.push_back(cumulate(model.transition().row(s).transpose()));
    const std::vector<double> initial = cumulate(model.stationary());
    const Vector& x = model.powers();

    Rng rng(seed);
    SimResult r;
    r.slots = slots;
    r.seed = seed;
    const long nb = std::min<long>(batches, slots);
    r.batches = static_cast<int>(nb);

    std::deque<long> arrivals;  // arrival slot of every queued packet, FIFO
    int s = sample(initial, rng.uniform());
    double energy = 0.0, queue_sum = 0.0, delay_sum = 0.0;
    std::vector<double> bq, bp, bd;
    double cq = 0.0, cp = 0.0, cd = 0.0;
    long cn = 0, cdel = 0, batch = 0;
    long batch_end = slots / nb;

    for (long n = 0; n < slots; ++n) {
        if (rng.uniform() < arrival_rate) {
            ++r.arrivals;
            if (static_cast<int>(arrivals.size()) < buffer_size)
                arrivals.push_back(n);
            else
                ++r.discarded;
        }
        const int q = static_cast<int>(arrivals.size());
        if (rule(q, s, rng) && q >= 1) {
            const double d = static_cast<double>(n - arrivals.front());
            arrivals.pop_front();
            ++r.delivered;
            delay_sum += d;
            energy += x(s);
            cp += x(s);
            cd += d;
            ++cdel;
        }
        const double l = static_cast<double>(arrivals.size());
        queue_sum += l;
        cq += l;
        ++cn;
        s = sample(rows[s], rng.uniform());

        if (n + 1 == batch_end) {
            bq.push_back(cq / cn);
            bp.push_back(cp / cn);
            if (cdel > 0) bd.push_back(cd / cdel);
            cq = cp = cd = 0.0;
            cn = cdel = 0;
            ++batch;
            batch_end = batch + 1 == nb ? slots : (batch + 1) * (slots / nb);
        }
    }

    const double ns = static_cast<double>(slots);
    r.avg_queue = queue_sum / ns;
    r.avg_power = energy / ns;
    r.avg_delay = r.delivered > 0 ? delay_sum / static_cast<double>(r.delivered) : 0.0;
    r.final_queue = static_cast<long>(arrivals.size());
    r.se_queue = standard_error(bq);
    r.se_power = standard_error(bp);
    r.se_delay = standard_error(bd);
    return r;
}

}  // namespace dpsched::sim
