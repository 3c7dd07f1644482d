#include "dpsched/eval.hpp"
#include "dpsched/markov.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace dpsched;
using dpsched::testing::reference_model;

namespace {

// oracle: the closed-loop chain written event by event, solved by power
// iteration from the empty queue
Matrix oracle_mu(const ChannelModel& m, const PolicyTable& f, double theta) {
    const int k = f.buffer_size();
    const int states = m.states();
    Matrix mu = Matrix::Zero(k + 1, states);
    mu.row(0) = m.stationary().transpose();
    for (int it = 0; it < 200000; ++it) {
        Matrix next = Matrix::Zero(k + 1, states);
        for (int s = 0; s < states; ++s)
            for (int q = 0; q <= k; ++q)
                for (int b = 0; b <= 1; ++b)
                    for (int a = 0; a <= 1; ++a)
                        for (int s2 = 0; s2 < states; ++s2) {
                            const int qt = std::min(q + b, k);
                            const double pa = a ? f(qt, s) : 1.0 - f(qt, s);
                            const double w = mu(q, s) * (b ? theta : 1.0 - theta) * pa * m.transition()(s, s2);
                            if (w > 0.0) next(qt - a, s2) += w;
                        }
        const double change = (next - mu).cwiseAbs().maxCoeff();
        mu = next;
        if (change < 1e-15) break;
    }
    return mu;
}

}  // namespace

TEST_CASE("closed-loop chain: hand-walked single-state example") {
    const auto m = dpsched::testing::single_state(1.0);
    const auto chain = eval::policy_transition_matrix(m, PolicyTable::always_transmit(1, 1), 0.5);
    Matrix want(2, 2);
    want << 1, 0, 1, 0;
    CHECK((chain.transition - want).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("closed-loop chain rows are stochastic") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        const int s = 1 + trial % 3;
        const int k = 1 + trial % 5;
        const auto m = dpsched::testing::random_model(rng, s);
        Matrix f = Matrix::NullaryExpr(k + 1, s, [&] { return u(rng); });
        f.row(0).setZero();
        const auto chain = eval::policy_transition_matrix(m, PolicyTable(f), 0.2 + 0.6 * u(rng));
        for (Eigen::Index i = 0; i < chain.transition.rows(); ++i)
            CHECK(std::abs(chain.transition.row(i).sum() - 1.0) <= 1e-12);
    }
}

TEST_CASE("single state reduces to a birth-death chain") {
    const auto m = dpsched::testing::single_state(1.0);
    const double theta = 0.4;
    const auto chain = eval::policy_transition_matrix(m, threshold_to_policy(ThresholdPolicy{{3}}, 4), theta);
    // below the threshold the queue only grows; from 2 an arrival lifts to 3
    // and is sent at once
    CHECK(chain.transition(0, 1) == doctest::Approx(theta));
    CHECK(chain.transition(1, 2) == doctest::Approx(theta));
    CHECK(chain.transition(2, 2) == doctest::Approx(1.0));
    CHECK(chain.transition(3, 2) == doctest::Approx(1.0 - theta));
    CHECK(chain.transition(3, 3) == doctest::Approx(theta));
    CHECK(chain.transition(4, 3) == doctest::Approx(1.0));
}

TEST_CASE("exact_evaluate examples") {
    const auto m = dpsched::testing::single_state(1.0);
    const auto always = eval::exact_evaluate(m, PolicyTable::always_transmit(3, 1), 0.5).result;
    CHECK(always.avg_queue == 0.0);
    CHECK(always.avg_delay == 0.0);
    CHECK(always.avg_power == doctest::Approx(0.5).epsilon(1e-14));

    const auto pm = reference_model();
    const auto never = eval::exact_evaluate(pm, PolicyTable::never_transmit(11, 3), 0.6);
    CHECK(never.result.avg_queue == doctest::Approx(11.0));
    CHECK(never.result.avg_power == 0.0);
    CHECK(never.result.discard_rate == doctest::Approx(0.6));
    CHECK(std::isinf(never.result.avg_delay));
}

TEST_CASE("exact_evaluate matches the event-level oracle, with conservation and the level identity") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 30; ++trial) {
        const int s = 1 + trial % 3;
        const int k = 1 + trial % 5;
        const double theta = 0.2 + 0.6 * u(rng);
        const auto m = dpsched::testing::random_model(rng, s);
        Matrix f = Matrix::NullaryExpr(k + 1, s, [&] { return u(rng) < 0.3 ? 0.0 : u(rng); });
        f.row(0).setZero();
        f.row(k).setConstant(1.0);  // keeps the chain from sticking at the top with no departures
        const PolicyTable table(f);
        const auto ev = eval::exact_evaluate(m, table, theta);
        const Matrix mu = oracle_mu(m, table, theta);
        CAPTURE(trial);
        CHECK((ev.distribution.mu - mu).cwiseAbs().maxCoeff() <= 1e-9);
        CHECK(std::abs(ev.distribution.total() - 1.0) <= 1e-12);
        // channel marginals
        for (int c = 0; c < s; ++c) CHECK(std::abs(ev.distribution.mu.col(c).sum() - m.stationary()(c)) <= 1e-9);
        // delivered = departures
        CHECK(std::abs(ev.result.throughput - (theta - ev.result.discard_rate)) <= 1e-10);
        // sum_s y(q, s) = theta sum_s mu(q, s)
        const Matrix y = eval::implied_occupancy(table, ev.distribution, theta);
        for (int q = 0; q <= k; ++q)
            CHECK(std::abs(y.row(q).sum() - theta * ev.distribution.mu.row(q).sum()) <= 1e-10);
        // stationarity on the full chain
        const auto chain = eval::policy_transition_matrix(m, table, theta);
        Vector flat(chain.transition.rows());
        for (int c = 0; c < s; ++c)
            for (int q = 0; q <= k; ++q) flat(chain.index(q, c)) = ev.distribution.mu(q, c);
        CHECK(markov::stationary_residual(chain.transition, flat) <= 1e-11);
    }
}

TEST_CASE("mixing weight search") {
    const auto m = reference_model();
    const auto lo = threshold_to_policy(ThresholdPolicy{{3, 1, 1}}, 11);
    const auto hi = threshold_to_policy(ThresholdPolicy{{2, 1, 1}}, 11);
    const double plo = eval::exact_evaluate(m, lo, 0.6).result.avg_power;
    const double phi = eval::exact_evaluate(m, hi, 0.6).result.avg_power;
    REQUIRE(plo < 0.9);
    REQUIRE(phi > 0.9);

    const auto w = eval::find_mixing_weight(m, lo, hi, 0.6, 0.9, 1e-10);
    CHECK(w.weight > 0.0);
    CHECK(w.weight < 1.0);
    CHECK(std::abs(w.evaluation.result.avg_power - 0.9) <= 1e-10);
    const auto gridded = eval::find_mixing_weight(m, lo, hi, 0.6, 0.9, 1e-10, 8);
    CHECK(std::abs(gridded.weight - w.weight) <= 1e-8);

    CHECK(eval::find_mixing_weight(m, lo, hi, 0.6, plo, 1e-10).weight == 1.0);
    CHECK(eval::find_mixing_weight(m, lo, hi, 0.6, phi, 1e-10).weight == 0.0);
    try {
        eval::find_mixing_weight(m, hi, lo, 0.6, 0.9, 1e-10);
        FAIL("expected BracketViolation");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::BracketViolation);
    }
}

TEST_CASE("mixture power is monotone in the weight between neighbouring thresholds") {
    std::mt19937_64 rng(29);
    for (int trial = 0; trial < 15; ++trial) {
        const int s = 1 + trial % 3;
        const int k = 3 + trial % 3;
        const auto m = dpsched::testing::random_model(rng, s);
        const auto all = dpsched::testing::all_thresholds(s, k);
        // neighbours: b transmits one level earlier than a in one state
        ThresholdPolicy ta = all[rng() % all.size()];
        const int pick = static_cast<int>(rng() % s);
        if (ta.thresholds[pick] == 1) ta.thresholds[pick] = 2;
        ThresholdPolicy tb = ta;
        --tb.thresholds[pick];
        const auto a = threshold_to_policy(ta, k);
        const auto b = threshold_to_policy(tb, k);
        const double pa = eval::exact_evaluate(m, a, 0.5).result.avg_power;
        const double pb = eval::exact_evaluate(m, b, 0.5).result.avg_power;
        double prev = pb;
        for (int i = 1; i <= 20; ++i) {
            const double p = eval::exact_evaluate(m, PolicyTable::mix(a, b, i / 20.0), 0.5).result.avg_power;
            if (pa <= pb)
                CHECK(p <= prev + 1e-12);
            else
                CHECK(p >= prev - 1e-12);
            prev = p;
        }
    }
}

TEST_CASE("enumerate_thresholds examples") {
    const auto m = dpsched::testing::single_state(1.0);
    ProblemConfig c;
    c.arrival_rate = 0.5;
    c.buffer_size = 3;
    c.power_budget = 0.5;
    const auto res = eval::enumerate_thresholds(m, c);
    CHECK(res.best_delay == 0.0);
    CHECK(res.best.first.thresholds == std::vector<int>{1});
    CHECK(res.table.size() == 4);

    c.power_budget = 0.4;
    try {
        eval::enumerate_thresholds(m, c);
        FAIL("expected InfeasibleBudget");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::InfeasibleBudget);
    }

    auto big = dpsched::testing::reference_config(1.0);
    big.buffer_size = 50;
    try {
        eval::enumerate_thresholds(reference_model(), big);
        FAIL("expected TooLarge");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::TooLarge);
    }
}

TEST_CASE("enumeration's pruned search equals the full pair search") {
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 4; ++trial) {
        const int s = 2;
        const int k = 3;
        const auto m = dpsched::testing::random_model(rng, s);
        ProblemConfig c;
        c.arrival_rate = 0.5;
        c.buffer_size = k;
        const auto all = dpsched::testing::all_thresholds(s, k);
        // a budget halfway along the overflow-free power range
        double pmin = 1e9, pmax = 0.0;
        for (const auto& t : all) {
            const auto r = eval::exact_evaluate(m, threshold_to_policy(t, k), 0.5).result;
            if (r.discard_rate > eval::kDiscardTolerance) continue;
            pmin = std::min(pmin, r.avg_power);
            pmax = std::max(pmax, r.avg_power);
        }
        c.power_budget = 0.5 * (pmin + pmax);
        const auto res = eval::enumerate_thresholds(m, c);

        double best = 1e9;
        for (const auto& lo : res.table) {
            if (!lo.overflow_free || lo.result.avg_power > c.power_budget) continue;
            best = std::min(best, lo.result.avg_delay);
            for (const auto& hi : res.table) {
                if (!hi.overflow_free || hi.result.avg_power <= c.power_budget) continue;
                const auto w = eval::find_mixing_weight(m, threshold_to_policy(lo.policy, k),
                                                        threshold_to_policy(hi.policy, k), 0.5, c.power_budget,
                                                        c.bisection_tolerance);
                best = std::min(best, w.evaluation.result.avg_delay);
            }
        }
        CHECK(std::abs(best - res.best_delay) <= 1e-12);
    }
}
