#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <queue>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cpreg/rng.hpp"

namespace cpreg {

/* Half-edges are numbered 0..d*n-1; half-edge h belongs to vertex h/d, slot h%d. */
struct HalfEdge {
    std::uint32_t vertex = 0;
    std::uint32_t slot = 0;
};

inline HalfEdge half_edge_of(std::uint32_t id, std::uint32_t d) {
    return {id / d, id % d};
}

/* Undirected multigraph. Loops count twice in the adjacency of their vertex,
   so flattened degrees always match the half-edge picture. */
struct Multigraph {
    struct Edge {
        std::uint32_t u = 0, v = 0;  // u <= v; u == v is a loop
        std::uint32_t mult = 1;
    };

    std::uint32_t n = 0;
    std::uint32_t degree = 0;  // regular degree when sampled; 0 for ad-hoc graphs
    std::uint64_t seed = 0;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> matching;  // half-edge id pairs
    std::vector<Edge> edges;            // distinct, sorted by (u, v)
    std::vector<std::uint32_t> offsets;  // size n+1
    std::vector<std::uint32_t> nbr;      // flattened neighbor slots

    std::uint32_t vertex_degree(std::uint32_t v) const { return offsets[v + 1] - offsets[v]; }

    void rebuild_adjacency() {
        offsets.assign(n + 1, 0);
        for (const Edge& e : edges) {
            if (e.u == e.v) {
                offsets[e.u + 1] += 2 * e.mult;
            } else {
                offsets[e.u + 1] += e.mult;
                offsets[e.v + 1] += e.mult;
            }
        }
        for (std::uint32_t v = 0; v < n; ++v) offsets[v + 1] += offsets[v];
        nbr.assign(offsets[n], 0);
        std::vector<std::uint32_t> cursor(offsets.begin(), offsets.end() - 1);
        for (const Edge& e : edges) {
            for (std::uint32_t k = 0; k < e.mult; ++k) {
                if (e.u == e.v) {
                    nbr[cursor[e.u]++] = e.u;
                    nbr[cursor[e.u]++] = e.u;
                } else {
                    nbr[cursor[e.u]++] = e.v;
                    nbr[cursor[e.v]++] = e.u;
                }
            }
        }
    }

    static Multigraph from_edges(std::uint32_t n, std::vector<Edge> edge_list,
                                 std::uint32_t regular_degree = 0, std::uint64_t seed = 0) {
        std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> merged;
        for (Edge& e : edge_list) {
            if (e.u > e.v) std::swap(e.u, e.v);
            if (e.v >= n) throw std::invalid_argument("Multigraph::from_edges: vertex out of range");
            if (e.mult == 0)
                throw std::invalid_argument("Multigraph::from_edges: zero multiplicity");
            merged[{e.u, e.v}] += e.mult;
        }
        Multigraph g;
        g.n = n;
        g.degree = regular_degree;
        g.seed = seed;
        for (const auto& [key, mult] : merged) g.edges.push_back({key.first, key.second, mult});
        g.rebuild_adjacency();
        return g;
    }
};

/* Uniform perfect matching of the d*n half-edges: scan half-edges in index
   order; pair each unmatched one with a partner drawn uniformly from the
   remaining unmatched half-edges. Every matching has probability 1/(dn-1)!!. */
inline Multigraph sample_configuration(std::uint32_t n, std::uint32_t d, std::uint64_t seed) {
    if (d < 3) throw std::invalid_argument("sample_configuration: need d >= 3");
    if (n < 2) throw std::invalid_argument("sample_configuration: need n >= 2");
    if ((static_cast<std::uint64_t>(d) * n) % 2 != 0)
        throw std::invalid_argument("sample_configuration: d*n must be even");

    const std::uint32_t half_edges = d * n;
    rng_t rng(seed);

    std::vector<std::uint32_t> pool(half_edges);
    std::vector<std::uint32_t> pos(half_edges);
    for (std::uint32_t h = 0; h < half_edges; ++h) pool[h] = pos[h] = h;
    auto remove_from_pool = [&](std::uint32_t h) {
        const std::uint32_t p = pos[h];
        const std::uint32_t last = pool.back();
        pool[p] = last;
        pos[last] = p;
        pool.pop_back();
    };

    std::vector<std::uint32_t> partner(half_edges, half_edges);
    Multigraph g;
    g.n = n;
    g.degree = d;
    g.seed = seed;
    g.matching.reserve(half_edges / 2);
    for (std::uint32_t h = 0; h < half_edges; ++h) {
        if (partner[h] != half_edges) continue;
        remove_from_pool(h);
        const std::uint32_t pick = pool[uniform_below(rng, pool.size())];
        remove_from_pool(pick);
        partner[h] = pick;
        partner[pick] = h;
        g.matching.emplace_back(h, pick);
    }

    std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> merged;
    for (const auto& [a, b] : g.matching) {
        std::uint32_t u = a / d, v = b / d;
        if (u > v) std::swap(u, v);
        merged[{u, v}] += 1;
    }
    for (const auto& [key, mult] : merged) g.edges.push_back({key.first, key.second, mult});
    g.rebuild_adjacency();
    return g;
}

inline bool is_simple(const Multigraph& g) {
    for (const Multigraph::Edge& e : g.edges)
        if (e.u == e.v || e.mult > 1) return false;
    return true;
}

struct RootedBall {
    std::uint32_t center = 0;
    std::uint32_t radius = 0;
    std::vector<std::uint32_t> vertices;   // sorted original ids
    std::vector<std::uint32_t> distances;  // parallel to vertices
    std::vector<Multigraph::Edge> edges;   // induced, with multiplicities
};

inline RootedBall extract_ball(const Multigraph& g, std::uint32_t center, std::uint32_t radius) {
    if (center >= g.n) throw std::invalid_argument("extract_ball: center out of range");
    std::vector<std::uint32_t> dist(g.n, ~std::uint32_t{0});
    std::queue<std::uint32_t> queue;
    dist[center] = 0;
    queue.push(center);
    while (!queue.empty()) {
        const std::uint32_t v = queue.front();
        queue.pop();
        if (dist[v] == radius) continue;
        for (std::uint32_t k = g.offsets[v]; k < g.offsets[v + 1]; ++k) {
            const std::uint32_t w = g.nbr[k];
            if (dist[w] == ~std::uint32_t{0}) {
                dist[w] = dist[v] + 1;
                queue.push(w);
            }
        }
    }
    RootedBall ball;
    ball.center = center;
    ball.radius = radius;
    for (std::uint32_t v = 0; v < g.n; ++v) {
        if (dist[v] <= radius) {
            ball.vertices.push_back(v);
            ball.distances.push_back(dist[v]);
        }
    }
    for (const Multigraph::Edge& e : g.edges)
        if (dist[e.u] <= radius && dist[e.v] <= radius) ball.edges.push_back(e);
    return ball;
}

/* True iff the induced ball is isomorphic, as a rooted graph, to the radius-r
   ball of the d-regular tree. In a d-regular multigraph this reduces to: the
   induced ball is loop-free, parallel-edge-free, and a tree (connectivity is
   given by construction, so edge count |V|-1), with interior degrees full. */
inline bool ball_matches_regular_tree(const RootedBall& ball, std::uint32_t d) {
    std::uint64_t total_mult = 0;
    for (const Multigraph::Edge& e : ball.edges) {
        if (e.u == e.v || e.mult > 1) return false;
        total_mult += e.mult;
    }
    if (total_mult != ball.vertices.size() - 1) return false;
    std::map<std::uint32_t, std::uint32_t> deg;
    for (const Multigraph::Edge& e : ball.edges) {
        deg[e.u] += 1;
        deg[e.v] += 1;
    }
    for (std::size_t i = 0; i < ball.vertices.size(); ++i)
        if (ball.distances[i] < ball.radius && deg[ball.vertices[i]] != d) return false;
    return true;
}

/* Text form: header "N d seed", then one "u v multiplicity" line per distinct
   edge, vertices 1-based, sorted. The matching itself is not preserved. */
inline std::string serialize_multigraph(const Multigraph& g) {
    std::ostringstream out;
    out << g.n << ' ' << g.degree << ' ' << g.seed << '\n';
    for (const Multigraph::Edge& e : g.edges)
        out << e.u + 1 << ' ' << e.v + 1 << ' ' << e.mult << '\n';
    return out.str();
}

inline Multigraph parse_multigraph(const std::string& text) {
    std::istringstream in(text);
    std::uint32_t n = 0, d = 0;
    std::uint64_t seed = 0;
    if (!(in >> n >> d >> seed)) throw std::invalid_argument("parse_multigraph: bad header");
    std::vector<Multigraph::Edge> edges;
    std::uint32_t u, v, m;
    while (in >> u >> v >> m) {
        if (u == 0 || v == 0 || u > n || v > n)
            throw std::invalid_argument("parse_multigraph: vertex out of range");
        if (m == 0) throw std::invalid_argument("parse_multigraph: zero multiplicity");
        edges.push_back({u - 1, v - 1, m});
    }
    if (!in.eof()) throw std::invalid_argument("parse_multigraph: trailing garbage");
    return Multigraph::from_edges(n, std::move(edges), d, seed);
}

}  // namespace cpreg
