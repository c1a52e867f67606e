#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "cpreg/multigraph.hpp"
#include "cpreg/oracle.hpp"

using namespace cpreg;
using Edge = Multigraph::Edge;

namespace {

double marginal_of(const std::vector<double>& dist, std::uint32_t v) {
    double p = 0.0;
    for (std::uint32_t mask = 0; mask < dist.size(); ++mask)
        if (mask & (1u << v)) p += dist[mask];
    return p;
}

}  // namespace

TEST_CASE("isolated vertices die at unit rate", "[oracle]") {
    const Multigraph one = Multigraph::from_edges(1, {});
    CHECK(exact_extinction_expectation(one, 1u, 0.0) == Catch::Approx(1.0));
    CHECK(exact_extinction_expectation(one, 1u, 5.0) == Catch::Approx(1.0));

    // max of two independent unit exponentials: 1 + 1/2
    const Multigraph two = Multigraph::from_edges(2, {});
    CHECK(exact_extinction_expectation(two, 3u, 7.0) == Catch::Approx(1.5));
}

TEST_CASE("one infected endpoint of an edge has mean lifetime 1 + lambda/2", "[oracle]") {
    const Multigraph k2 = Multigraph::from_edges(2, {{0, 1, 1}});
    CHECK(exact_extinction_expectation(k2, 1u, 0.0) == Catch::Approx(1.0));
    CHECK(exact_extinction_expectation(k2, 1u, 1.0) == Catch::Approx(1.5));
    CHECK(exact_extinction_expectation(k2, 1u, 2.0) == Catch::Approx(2.0));
    CHECK(exact_extinction_expectation(k2, 2u, 3.0) == Catch::Approx(2.5));
}

TEST_CASE("without infection the lifetime is a harmonic number", "[oracle]") {
    const Multigraph tri = Multigraph::from_edges(3, {{0, 1, 1}, {1, 2, 1}, {0, 2, 1}});
    CHECK(exact_extinction_expectation(tri, 1u, 0.0) == Catch::Approx(1.0));
    CHECK(exact_extinction_expectation(tri, 7u, 0.0) ==
          Catch::Approx(1.0 + 0.5 + 1.0 / 3.0));
}

TEST_CASE("edge multiplicity is exactly a rate multiplier; loops are inert", "[oracle]") {
    const Multigraph doubled = Multigraph::from_edges(2, {{0, 1, 2}});
    const Multigraph single = Multigraph::from_edges(2, {{0, 1, 1}});
    CHECK(exact_extinction_expectation(doubled, 1u, 0.7) ==
          Catch::Approx(exact_extinction_expectation(single, 1u, 1.4)).epsilon(1e-10));

    const Multigraph looped = Multigraph::from_edges(2, {{0, 1, 1}, {0, 0, 3}});
    CHECK(exact_extinction_expectation(looped, 1u, 0.9) ==
          Catch::Approx(exact_extinction_expectation(single, 1u, 0.9)).epsilon(1e-10));
}

TEST_CASE("oracle rejects graphs beyond the state-space cap", "[oracle]") {
    const Multigraph big = sample_configuration(14, 3, 1);
    CHECK_THROWS_AS(exact_extinction_expectation(big, 1u, 1.0), std::invalid_argument);
    const Multigraph k2 = Multigraph::from_edges(2, {{0, 1, 1}});
    CHECK_THROWS_AS(exact_extinction_expectation(k2, 4u, 1.0), std::invalid_argument);
}

TEST_CASE("transient marginals decay like the pure-death chain at lambda 0", "[oracle]") {
    const Multigraph k2 = Multigraph::from_edges(2, {{0, 1, 1}});
    for (double t : {0.3, 1.0, 2.5}) {
        const std::vector<double> dist = exact_marginal(k2, 1u, 0.0, t);
        double total = 0.0;
        for (double p : dist) total += p;
        CHECK(total == Catch::Approx(1.0).epsilon(1e-8));
        CHECK(marginal_of(dist, 0) == Catch::Approx(std::exp(-t)).epsilon(1e-6));
        CHECK(marginal_of(dist, 1) == Catch::Approx(0.0).margin(1e-10));
    }
}

TEST_CASE("infection marginals increase with lambda", "[oracle]") {
    const Multigraph p3 = Multigraph::from_edges(3, {{0, 1, 1}, {1, 2, 1}});
    double last = -1.0;
    for (double lambda : {0.5, 1.0, 2.0}) {
        const double p = marginal_of(exact_marginal(p3, 1u, lambda, 1.0), 2);
        CHECK(p > last);
        CHECK(p >= 0.0);
        CHECK(p <= 1.0);
        last = p;
    }
}

TEST_CASE("absorbing chain solves an exponential race exactly", "[oracle]") {
    AbsorbingCtmc race(1);
    race.add_success_rate(0, 1.0);
    race.add_fail_rate(0, 2.0);
    const AbsorbingCtmc::Result r = race.solve();
    CHECK(r.p_success[0] == Catch::Approx(1.0 / 3.0).epsilon(1e-10));
    // the race winner does not change the Exp(3) holding time
    CHECK(r.time_given_success[0] == Catch::Approx(1.0 / 3.0).epsilon(1e-10));

    AbsorbingCtmc chain(2);
    chain.add_rate(0, 1, 1.0);
    chain.add_success_rate(1, 1.0);
    const AbsorbingCtmc::Result c = chain.solve();
    CHECK(c.p_success[0] == Catch::Approx(1.0).epsilon(1e-10));
    CHECK(c.time_given_success[0] == Catch::Approx(2.0).epsilon(1e-10));
}
