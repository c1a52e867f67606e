#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <tuple>
#include <vector>

#include "cpreg/harris.hpp"
#include "cpreg/multigraph.hpp"
#include "cpreg/oracle.hpp"
#include "cpreg/stats.hpp"
#include "cpreg/tree.hpp"

using namespace cpreg;
using Edge = Multigraph::Edge;

namespace {

const Multigraph& k2() {
    static const Multigraph g = Multigraph::from_edges(2, {{0, 1, 1}});
    return g;
}

}  // namespace

TEST_CASE("extinction time on an edge matches the exact solver", "[harris]") {
    const double lambda = 1.0;
    const double exact = exact_extinction_expectation(k2(), 1u, lambda);
    const ExtinctionEstimate mc =
        estimate_extinction_time(k2(), {0}, ProcessParams{lambda}, 400.0, 30'000, 101);
    CHECK(mc.censored == 0);
    CHECK(std::abs(mc.mean - exact) < 4.0 * mc.stderr_);
}

TEST_CASE("parallel edges transmit at multiplicity times lambda", "[harris]") {
    const Multigraph tripled = Multigraph::from_edges(2, {{0, 1, 3}});
    const double exact_tripled = exact_extinction_expectation(tripled, 1u, 0.4);
    CHECK(exact_tripled ==
          Catch::Approx(exact_extinction_expectation(k2(), 1u, 1.2)).epsilon(1e-10));
    const ExtinctionEstimate mc =
        estimate_extinction_time(tripled, {0}, ProcessParams{0.4}, 400.0, 20'000, 102);
    CHECK(std::abs(mc.mean - exact_tripled) < 4.0 * mc.stderr_);
}

TEST_CASE("first event from one infected vertex is an exponential race", "[harris]") {
    const Multigraph tripled = Multigraph::from_edges(2, {{0, 1, 3}});
    const double lambda = 0.4;
    const double rate = 1.0 + 3.0 * lambda;
    const std::size_t n = 20'000;
    std::vector<double> first_times;
    std::size_t transmissions = 0;
    for (std::size_t r = 0; r < n; ++r) {
        GraphSubstrate sub{tripled};
        NextEventEngine<GraphSubstrate> engine(sub, ProcessParams{lambda},
                                               replica_seed(103, r));
        engine.force_infect(0);
        const Event e = engine.advance();
        first_times.push_back(e.time);
        if (e.kind == EventKind::infection) {
            CHECK(e.target == 1);
            ++transmissions;
        }
    }
    const double m = mean(first_times);
    CHECK(std::abs(m - 1.0 / rate) < 4.0 * std_error_of_mean(first_times));
    const double p = 3.0 * lambda / rate;
    CHECK(std::abs(static_cast<double>(transmissions) / n - p) <
          4.0 * std::sqrt(p * (1.0 - p) / n));
}

TEST_CASE("without transmission the marked vertex is never reinfected", "[harris]") {
    std::vector<double> taus;
    for (std::size_t r = 0; r < 2000; ++r) {
        const ReinfectionRecord rec =
            record_reinfections(k2(), 0, ProcessParams{0.0}, 1, 50.0, 0.0,
                                replica_seed(104, r));
        CHECK(rec.times.empty());
        REQUIRE(rec.extinct);
        taus.push_back(rec.extinction_time);
        CHECK(rec.survived_past(rec.extinction_time - 1e-9));
        CHECK_FALSE(rec.survived_past(rec.extinction_time));
    }
    CHECK(std::abs(mean(taus) - 1.0) < 4.0 * std_error_of_mean(taus));
}

/* Absorbing-chain oracle for the first reinfection on a single edge. States:
   0 marked infected alone, 1 both infected, 2 other infected alone; success
   is the reinfection edge firing from state 2. */
TEST_CASE("first reinfection time matches the absorbing-chain oracle", "[harris]") {
    const double lambda = 1.0;
    AbsorbingCtmc chain(3);
    chain.add_fail_rate(0, 1.0);
    chain.add_rate(0, 1, lambda);
    chain.add_rate(1, 2, 1.0);
    chain.add_rate(1, 0, 1.0);
    chain.add_success_rate(2, lambda);
    chain.add_fail_rate(2, 1.0);
    const AbsorbingCtmc::Result oracle = chain.solve();
    CHECK(oracle.p_success[0] == Catch::Approx(1.0 / 6.0).epsilon(1e-10));

    const std::size_t n = 30'000;
    std::size_t successes = 0;
    std::vector<double> first_times;
    for (std::size_t r = 0; r < n; ++r) {
        const ReinfectionRecord rec =
            record_reinfections(k2(), 0, ProcessParams{lambda}, 1, 1000.0, 0.0,
                                replica_seed(105, r));
        if (!rec.times.empty()) {
            ++successes;
            first_times.push_back(rec.times[0]);
        }
    }
    const double p = oracle.p_success[0];
    CHECK(std::abs(static_cast<double>(successes) / n - p) <
          4.0 * std::sqrt(p * (1.0 - p) / n));
    CHECK(std::abs(mean(first_times) - oracle.time_given_success[0]) <
          4.0 * std_error_of_mean(first_times));
}

TEST_CASE("replay walks a hand-written log exactly", "[harris]") {
    EventLog log;
    log.horizon = 2.0;
    log.edge_instances = {{0, 1}};
    log.entries = {{0.5, 1, 0}, {0.7, 0, 0}, {1.2, 0, 1}};

    std::vector<std::tuple<double, std::uint32_t, bool>> seen;
    const std::vector<std::uint8_t> final_state = replay_event_log(
        k2(), log, {0}, nullptr, 2.0,
        [&](double t, std::uint32_t v, bool on) { seen.emplace_back(t, v, on); });
    REQUIRE(seen.size() == 3);
    CHECK(seen[0] == std::make_tuple(0.5, 1u, true));
    CHECK(seen[1] == std::make_tuple(0.7, 0u, false));
    CHECK(seen[2] == std::make_tuple(1.2, 1u, false));
    CHECK(final_state == std::vector<std::uint8_t>{0, 0});

    CHECK(replay_event_log(k2(), log, {0}, 1.0) == std::vector<std::uint8_t>{0, 1});
    CHECK(replay_event_log(k2(), log, {}, 2.0) == std::vector<std::uint8_t>{0, 0});

    // a loop instance never fires
    EventLog looped;
    looped.horizon = 2.0;
    looped.edge_instances = {{0, 0}};
    looped.entries = {{0.5, 1, 0}};
    const Multigraph lg = Multigraph::from_edges(1, {{0, 0, 1}});
    CHECK(replay_event_log(lg, looped, {0}, 2.0) == std::vector<std::uint8_t>{1});
}

TEST_CASE("sampled logs carry Poisson stream intensities", "[harris]") {
    const double lambda = 2.0, horizon = 3.0;
    const std::size_t n = 3000;
    std::vector<double> recoveries, firings;
    for (std::size_t r = 0; r < n; ++r) {
        const EventLog log =
            EventLog::sample(k2(), ProcessParams{lambda}, horizon, replica_seed(106, r));
        REQUIRE(log.edge_instances.size() == 1);
        CHECK(std::is_sorted(log.entries.begin(), log.entries.end(),
                             [](const EventLog::Entry& a, const EventLog::Entry& b) {
                                 return a.time < b.time;
                             }));
        double rec = 0, fire = 0;
        for (const EventLog::Entry& e : log.entries) {
            REQUIRE(e.time <= horizon);
            (e.is_edge ? fire : rec) += 1;
        }
        recoveries.push_back(rec / 2.0);  // two vertices
        firings.push_back(fire);
    }
    CHECK(std::abs(mean(recoveries) - horizon) < 4.0 * std_error_of_mean(recoveries));
    CHECK(std::abs(mean(firings) - lambda * horizon) < 4.0 * std_error_of_mean(firings));

    const EventLog a = EventLog::sample(k2(), ProcessParams{lambda}, horizon, 7);
    const EventLog b = EventLog::sample(k2(), ProcessParams{lambda}, horizon, 7);
    REQUIRE(a.entries.size() == b.entries.size());
    for (std::size_t i = 0; i < a.entries.size(); ++i)
        CHECK(a.entries[i].time == b.entries[i].time);
}

TEST_CASE("shared-log replays are monotone in seeds and edges", "[harris]") {
    const Multigraph tri = Multigraph::from_edges(3, {{0, 1, 1}, {1, 2, 1}, {0, 2, 1}});
    std::size_t edge_instances = 0;
    for (const Edge& e : tri.edges) edge_instances += e.mult;
    for (std::size_t r = 0; r < 200; ++r) {
        const EventLog log =
            EventLog::sample(tri, ProcessParams{0.8}, 5.0, replica_seed(107, r));
        std::vector<std::uint8_t> mask(edge_instances, 1);
        mask[0] = 0;
        for (double t = 0.0; t <= 5.0; t += 0.5) {
            const auto small = replay_event_log(tri, log, {0}, t);
            const auto big = replay_event_log(tri, log, {0, 1}, t);
            const auto cut = replay_event_log(tri, log, {0}, &mask, t,
                                              [](double, std::uint32_t, bool) {});
            for (std::uint32_t v = 0; v < 3; ++v) {
                CHECK(small[v] <= big[v]);
                CHECK(cut[v] <= small[v]);
            }
        }
    }
}

TEST_CASE("seed and probe sets exchange symmetrically", "[harris]") {
    const Multigraph p3 = Multigraph::from_edges(3, {{0, 1, 1}, {1, 2, 1}});
    std::vector<std::uint32_t> all{0, 1, 2};
    const DualityResult r1 =
        duality_check(p3, {0}, {2}, ProcessParams{1.0}, 1.0, 100'000, 108);
    CHECK(std::abs(r1.z) < 4.0);
    const DualityResult r2 =
        duality_check(p3, {0}, all, ProcessParams{1.0}, 1.0, 100'000, 109);
    CHECK(std::abs(r2.z) < 4.0);
}

TEST_CASE("the engine is deterministic for a fixed seed", "[harris]") {
    const Multigraph tri = Multigraph::from_edges(3, {{0, 1, 1}, {1, 2, 1}, {0, 2, 1}});
    auto trace = [&](std::uint64_t seed) {
        GraphSubstrate sub{tri};
        NextEventEngine<GraphSubstrate> engine(sub, ProcessParams{1.5}, seed);
        engine.force_infect(0);
        std::vector<std::tuple<double, int, std::uint32_t, std::uint32_t>> out;
        while (!engine.extinct() && engine.peek_next_time() <= 50.0) {
            const Event e = engine.advance();
            out.emplace_back(e.time, static_cast<int>(e.kind), e.source, e.target);
        }
        return out;
    };
    CHECK(trace(77) == trace(77));
    CHECK(trace(77) != trace(78));
}

TEST_CASE("trajectories report grids, jumps and extinction consistently", "[harris]") {
    SimulateOptions opt;
    opt.horizon = 100.0;
    opt.grid = {0.25, 0.5, 1.0, 2.0, 4.0};
    opt.record_jumps = true;
    const Trajectory tr = simulate(k2(), {0, 1}, ProcessParams{0.0}, opt, 110);
    REQUIRE(tr.grid_counts.size() == opt.grid.size());
    for (std::size_t i = 1; i < tr.grid_counts.size(); ++i)
        CHECK(tr.grid_counts[i] <= tr.grid_counts[i - 1]);  // pure death
    REQUIRE(tr.extinct);
    CHECK(tr.final_count == 0);
    CHECK(tr.jump_times.size() == 2);
    CHECK(tr.deltas.size() == 2);
    for (std::int32_t d : tr.deltas) CHECK(d < 0);
    CHECK(tr.extinction_time == Catch::Approx(tr.jump_times.back()));
}

TEST_CASE("engine guards reject inconsistent driving", "[harris]") {
    const Multigraph one = Multigraph::from_edges(1, {});
    GraphSubstrate sub{one};
    NextEventEngine<GraphSubstrate> engine(sub, ProcessParams{1.0}, 111);
    CHECK_THROWS_AS(engine.force_infect(5), std::invalid_argument);
    engine.force_infect(0);
    CHECK_THROWS_AS(engine.jump_to(-1.0), std::invalid_argument);
    engine.advance();
    REQUIRE(engine.extinct());
    CHECK_THROWS_AS(engine.advance(), std::logic_error);
}

TEST_CASE("staggered seeds at the root survive like independent clocks", "[harris]") {
    // lambda = 0: type i lives exactly while the root avoids recovery on
    // [i, horizon], so E[survivors] = sum_i exp(-(horizon - i)).
    const std::uint32_t k = 3;
    const double horizon = 4.5;
    double expected = 0.0;
    for (std::uint32_t i = 1; i <= k; ++i) expected += std::exp(-(horizon - i));
    const std::size_t n = 20'000;
    std::vector<double> counts;
    for (std::size_t r = 0; r < n; ++r) {
        LazyTree tree(3, false);
        const MultiTypeResult res = multi_type_survivors_on(
            tree, ProcessParams{0.0}, k, horizon, replica_seed(112, r));
        CHECK(res.survivors == static_cast<std::uint32_t>(std::popcount(res.alive_bits)));
        CHECK(res.alive_bits < (1ull << k));
        counts.push_back(res.survivors);
    }
    CHECK(std::abs(mean(counts) - expected) < 4.0 * std_error_of_mean(counts));
}

TEST_CASE("multi-type driving validates its arguments", "[harris]") {
    LazyTree tree(3, false);
    CHECK_THROWS_AS(multi_type_survivors_on(tree, ProcessParams{0.5}, 0, 10.0, 1),
                    std::invalid_argument);
    CHECK_THROWS_AS(multi_type_survivors_on(tree, ProcessParams{0.5}, 65, 100.0, 1),
                    std::invalid_argument);
    CHECK_THROWS_AS(multi_type_survivors_on(tree, ProcessParams{0.5}, 8, 8.0, 1),
                    std::invalid_argument);
}

TEST_CASE("milestone counting can start after a cutoff", "[harris]") {
    const Multigraph tri =
        Multigraph::from_edges(3, {{0, 1, 1}, {1, 2, 1}, {0, 2, 1}});
    const double cutoff = 5.0;
    std::size_t reached = 0;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const ReinfectionRecord plain =
            record_reinfections(tri, 0, ProcessParams{2.0}, 2, 60.0, 0.0, seed);
        const ReinfectionRecord late =
            record_reinfections(tri, 0, ProcessParams{2.0}, 2, 60.0, 0.0, seed, 0, cutoff);
        /* Same event stream, later stop: the plain run's times are a prefix. */
        REQUIRE(plain.times.size() <= late.times.size());
        for (std::size_t i = 0; i < plain.times.size(); ++i)
            CHECK(plain.times[i] == late.times[i]);
        const std::vector<double> post = late.times_after(cutoff);
        for (double t : post) CHECK(t > cutoff);
        if (post.size() >= 2) ++reached;
        /* The only way to stop short of the post-cutoff quota is extinction
           or running out the horizon. */
        if (!late.extinct && post.size() < 2) CHECK(late.end_time > 50.0);
    }
    CHECK(reached > 0);
}

TEST_CASE("early certification only truncates after the quota", "[harris]") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        LazyTree plain_tree(3, false);
        const ReinfectionRecord plain = record_reinfections_on(
            plain_tree, plain_tree.root(), ProcessParams{1.0}, 2, 8.0, 8.0, seed);
        LazyTree certified_tree(3, false);
        const ReinfectionRecord certified = record_reinfections_on(
            certified_tree, certified_tree.root(), ProcessParams{1.0}, 2, 8.0, 8.0, seed, 40);
        if (certified.times.size() >= 2) {
            REQUIRE(plain.times.size() >= 2);
            CHECK(plain.times[0] == certified.times[0]);
            CHECK(plain.times[1] == certified.times[1]);
        } else {
            REQUIRE(plain.times.size() == certified.times.size());
            CHECK(plain.extinct == certified.extinct);
        }
    }
}
