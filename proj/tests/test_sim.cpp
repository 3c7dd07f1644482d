#include "dpsched/eval.hpp"
#include "dpsched/lp.hpp"
#include "dpsched/sim.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cstring>

using namespace dpsched;
using dpsched::testing::reference_config;
using dpsched::testing::reference_model;

TEST_CASE("rng: pinned generator and double mapping") {
    // the 10000th output of MT19937-64 with the default seed is fixed by the
    // C++ standard
    std::mt19937_64 ref(5489u);
    ref.discard(9999);
    CHECK(ref() == 9981545732273789042ULL);

    sim::Rng rng(5489u);
    std::mt19937_64 raw(5489u);
    for (int i = 0; i < 100; ++i) {
        const double u = rng.uniform();
        CHECK(u == static_cast<double>(raw() >> 11) / 9007199254740992.0);
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
}

TEST_CASE("simulation is reproducible bit for bit") {
    const auto pm = reference_model();
    const auto table = threshold_to_policy(ThresholdPolicy{{3, 1, 1}}, 11);
    const auto a = sim::simulate(pm, sim::policy_rule(table), 0.6, 11, 100000, 42);
    const auto b = sim::simulate(pm, sim::policy_rule(table), 0.6, 11, 100000, 42);
    CHECK(std::memcmp(&a.avg_queue, &b.avg_queue, sizeof(double)) == 0);
    CHECK(std::memcmp(&a.avg_delay, &b.avg_delay, sizeof(double)) == 0);
    CHECK(std::memcmp(&a.avg_power, &b.avg_power, sizeof(double)) == 0);
    CHECK(a.delivered == b.delivered);
    CHECK(a.se_queue == b.se_queue);
    const auto c = sim::simulate(pm, sim::policy_rule(table), 0.6, 11, 100000, 43);
    CHECK(c.avg_queue != a.avg_queue);
}

TEST_CASE("single state, always transmit") {
    const auto m = dpsched::testing::single_state(1.0);
    const long n = 1000000;
    const auto r = sim::simulate(m, sim::policy_rule(PolicyTable::always_transmit(3, 1)), 0.5, 3, n, 7);
    CHECK(r.avg_delay == 0.0);
    CHECK(r.avg_queue == 0.0);
    CHECK(std::abs(r.avg_power - 0.5) <= 3.0 * 0.5 / std::sqrt(static_cast<double>(n)));
    // one unit of energy per delivered packet
    CHECK(r.avg_power == static_cast<double>(r.delivered) / static_cast<double>(n));
    CHECK(r.delivered + r.discarded + r.final_queue == r.arrivals);
}

TEST_CASE("near-empty arrivals") {
    const auto m = dpsched::testing::single_state(1.0);
    const auto r = sim::simulate(m, sim::policy_rule(PolicyTable::always_transmit(3, 1)), 1e-6, 3, 1000000, 9);
    CHECK(r.delivered <= 10);
    CHECK(r.avg_power <= 1e-5);
}

TEST_CASE("packet accounting under overflow") {
    const auto pm = reference_model();
    const auto r = sim::simulate(pm, sim::policy_rule(threshold_to_policy(ThresholdPolicy{{12, 12, 4}}, 11)), 0.6,
                                 11, 200000, 3);
    CHECK(r.discarded > 0);
    CHECK(r.delivered + r.discarded + r.final_queue == r.arrivals);
    CHECK(r.batches == 100);
}

TEST_CASE("greedy rule: saturated and starved budgets") {
    const auto pm = reference_model();
    const auto always = sim::simulate(pm, sim::policy_rule(PolicyTable::always_transmit(11, 3)), 0.6, 11, 200000, 5);
    const auto rich = sim::simulate(pm, sim::greedy_decision_rule(pm, 4.5), 0.6, 11, 200000, 5);
    CHECK(rich.avg_queue == always.avg_queue);
    CHECK(rich.avg_power == always.avg_power);
    CHECK(rich.avg_delay == always.avg_delay);

    const auto starved = sim::simulate(pm, sim::greedy_decision_rule(pm, 1e-4), 0.6, 11, 200000, 5);
    CHECK(starved.avg_queue > 10.0);
    CHECK(starved.avg_power <= 1e-4 + 1e-12);

    const auto low = sim::simulate(pm, sim::greedy_decision_rule(pm, 0.8), 0.6, 11, 1000000, 5);
    const auto high = sim::simulate(pm, sim::greedy_decision_rule(pm, 1.3), 0.6, 11, 1000000, 5);
    CHECK(high.avg_delay < low.avg_delay);
    CHECK(low.avg_power <= 0.8 + 1e-9);
}

TEST_CASE("simulated LP policy agrees with the exact evaluation, and Little's law holds") {
    const auto pm = reference_model();
    const auto sol = lp::solve_delay_lp(pm, reference_config(1.0));
    const auto table = lp::extract_policy(sol, 0.6, 1e-9);
    const auto exact = eval::exact_evaluate(pm, table, 0.6).result;
    const long n = 1000000;
    const auto r = sim::simulate(pm, sim::policy_rule(table), 0.6, 11, n, 2024);
    CHECK(std::abs(r.avg_delay - exact.avg_delay) <= 3.0 * r.se_delay);
    CHECK(std::abs(r.avg_queue - exact.avg_queue) <= 3.0 * r.se_queue);
    CHECK(r.avg_power <= 1.0 + 3.0 * r.se_power);
    const double little = r.avg_queue / (static_cast<double>(r.delivered) / static_cast<double>(n));
    CHECK(std::abs(r.avg_delay - little) <= 3.0 * r.se_delay);
}
