#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "cpreg/multigraph.hpp"
#include "cpreg/rng.hpp"
#include "cpreg/stats.hpp"

using namespace cpreg;
using Edge = Multigraph::Edge;

TEST_CASE("from_edges merges duplicates and normalizes orientation", "[multigraph]") {
    const Multigraph g = Multigraph::from_edges(3, {{1, 0, 1}, {0, 1, 2}, {2, 2, 1}});
    REQUIRE(g.edges.size() == 2);
    CHECK(g.edges[0].u == 0);
    CHECK(g.edges[0].v == 1);
    CHECK(g.edges[0].mult == 3);
    CHECK(g.edges[1].u == 2);
    CHECK(g.edges[1].v == 2);
    // a loop contributes two adjacency slots at its vertex
    CHECK(g.vertex_degree(0) == 3);
    CHECK(g.vertex_degree(1) == 3);
    CHECK(g.vertex_degree(2) == 2);
    CHECK_THROWS_AS(Multigraph::from_edges(2, {{0, 2, 1}}), std::invalid_argument);
    CHECK_THROWS_AS(Multigraph::from_edges(2, {{0, 1, 0}}), std::invalid_argument);
}

TEST_CASE("configuration samples satisfy the handshake identity", "[multigraph]") {
    for (const auto& [n, d] : std::vector<std::pair<std::uint32_t, std::uint32_t>>{
             {2, 3}, {10, 3}, {7, 4}, {50, 5}}) {
        const Multigraph g = sample_configuration(n, d, 99 + n);
        REQUIRE(g.n == n);
        CHECK(g.offsets.back() == n * d);
        for (std::uint32_t v = 0; v < n; ++v) CHECK(g.vertex_degree(v) == d);
        std::uint64_t instances = 0;
        for (const Edge& e : g.edges) instances += e.mult;
        // every instance, loop or not, consumes two half-edges
        CHECK(2 * instances == static_cast<std::uint64_t>(n) * d);
        CHECK(g.matching.size() == static_cast<std::size_t>(n) * d / 2);
    }
    CHECK_THROWS_AS(sample_configuration(3, 3, 1), std::invalid_argument);  // odd half-edges
}

/* Two vertices of degree 3 admit 15 equally likely pairings: 6 use three
   cross edges, 9 use one loop on each side. The sampler must reproduce the
   6:9 split. */
TEST_CASE("matchings on two vertices are uniform over pairings", "[multigraph]") {
    const std::size_t samples = 3000;
    std::size_t triple_cross = 0, looped = 0;
    for (std::size_t s = 0; s < samples; ++s) {
        const Multigraph g = sample_configuration(2, 3, replica_seed(5, s, 0));
        bool has_loop = false;
        for (const Edge& e : g.edges) has_loop = has_loop || e.u == e.v;
        if (has_loop)
            ++looped;
        else
            ++triple_cross;
    }
    REQUIRE(triple_cross + looped == samples);
    const double e_cross = samples * 6.0 / 15.0;
    const double e_loop = samples * 9.0 / 15.0;
    const double stat = (triple_cross - e_cross) * (triple_cross - e_cross) / e_cross +
                        (looped - e_loop) * (looped - e_loop) / e_loop;
    CHECK(chi_square_pvalue(stat, 1.0) > 1e-4);
}

TEST_CASE("simplicity frequency matches the pairing-model limit", "[multigraph]") {
    const std::size_t samples = 2000;
    std::size_t simple = 0;
    for (std::size_t s = 0; s < samples; ++s)
        if (is_simple(sample_configuration(300, 3, replica_seed(6, s, 0)))) ++simple;
    // d = 3: exp((1 - d^2)/4) = exp(-2)
    const double p = std::exp(-2.0);
    const double tol = 4.0 * std::sqrt(p * (1.0 - p) / samples);
    CHECK(std::abs(static_cast<double>(simple) / samples - p) < tol);
}

TEST_CASE("is_simple flags loops and parallel edges", "[multigraph]") {
    CHECK(is_simple(Multigraph::from_edges(
        4, {{0, 1, 1}, {0, 2, 1}, {0, 3, 1}, {1, 2, 1}, {1, 3, 1}, {2, 3, 1}})));
    CHECK_FALSE(is_simple(Multigraph::from_edges(2, {{0, 0, 1}, {0, 1, 1}})));
    CHECK_FALSE(is_simple(Multigraph::from_edges(2, {{0, 1, 2}})));
}

TEST_CASE("extract_ball returns the induced rooted ball", "[multigraph]") {
    const Multigraph p3 = Multigraph::from_edges(3, {{0, 1, 1}, {1, 2, 1}});
    const RootedBall b0 = extract_ball(p3, 0, 0);
    CHECK(b0.vertices == std::vector<std::uint32_t>{0});
    CHECK(b0.edges.empty());

    const RootedBall b1 = extract_ball(p3, 0, 1);
    CHECK(b1.vertices == std::vector<std::uint32_t>{0, 1});
    REQUIRE(b1.edges.size() == 1);
    CHECK(b1.distances == std::vector<std::uint32_t>{0, 1});

    const RootedBall b2 = extract_ball(p3, 0, 2);
    CHECK(b2.vertices.size() == 3);
    CHECK(b2.edges.size() == 2);
    CHECK_THROWS_AS(extract_ball(p3, 3, 1), std::invalid_argument);
}

TEST_CASE("regular-tree ball recognition", "[multigraph]") {
    // star with three leaves is exactly the radius-1 ball of the 3-regular tree
    const Multigraph star = Multigraph::from_edges(4, {{0, 1, 1}, {0, 2, 1}, {0, 3, 1}});
    CHECK(ball_matches_regular_tree(extract_ball(star, 0, 1), 3));
    // at radius 2 its leaves become interior vertices with missing branches
    CHECK_FALSE(ball_matches_regular_tree(extract_ball(star, 0, 2), 3));
    // a leaf-rooted radius-1 ball has an interior vertex of degree 1
    CHECK_FALSE(ball_matches_regular_tree(extract_ball(star, 1, 1), 3));

    // explicit radius-2 ball of the 3-regular tree: 1 + 3 + 6 vertices
    std::vector<Edge> edges;
    for (std::uint32_t c = 1; c <= 3; ++c) edges.push_back({0, c, 1});
    std::uint32_t next = 4;
    for (std::uint32_t c = 1; c <= 3; ++c)
        for (int j = 0; j < 2; ++j) edges.push_back({c, next++, 1});
    const Multigraph t2 = Multigraph::from_edges(10, edges);
    CHECK(ball_matches_regular_tree(extract_ball(t2, 0, 2), 3));

    // the triangle is 2-regular at radius 1 but carries a cycle
    const Multigraph tri = Multigraph::from_edges(3, {{0, 1, 1}, {1, 2, 1}, {0, 2, 1}});
    CHECK_FALSE(ball_matches_regular_tree(extract_ball(tri, 0, 1), 2));
}

TEST_CASE("serialize and parse round-trip", "[multigraph]") {
    const Multigraph g = sample_configuration(12, 4, 77);
    const Multigraph h = parse_multigraph(serialize_multigraph(g));
    CHECK(h.n == g.n);
    CHECK(h.degree == g.degree);
    CHECK(h.seed == g.seed);
    REQUIRE(h.edges.size() == g.edges.size());
    for (std::size_t i = 0; i < g.edges.size(); ++i) {
        CHECK(h.edges[i].u == g.edges[i].u);
        CHECK(h.edges[i].v == g.edges[i].v);
        CHECK(h.edges[i].mult == g.edges[i].mult);
    }
    CHECK_THROWS_AS(parse_multigraph("not a graph"), std::invalid_argument);
    CHECK_THROWS_AS(parse_multigraph("2 3 0\n1 5 1\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse_multigraph("2 3 0\n1 2 0\n"), std::invalid_argument);
}
