#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "cpreg/harris.hpp"
#include "cpreg/rng.hpp"

namespace cpreg {

/* Rooted d-regular tree with lazy node materialization. Node ids are interned
   in materialization order; id 0 is the root. Every non-root node keeps its
   parent in slot 0; remaining slots are children, created on first access.
   The severed variant gives the root a single child (degree 1). Ancestors of
   a materialized node are always materialized, so parent pointers never
   dangle. A node budget turns runaway growth into BudgetExceeded. */
class LazyTree {
public:
    LazyTree(std::uint32_t d, bool severed, std::uint64_t node_budget = 10'000'000)
        : d_(d), severed_(severed), budget_(node_budget) {
        if (d < 3) throw std::invalid_argument("LazyTree: need d >= 3");
        if (node_budget == 0) throw std::invalid_argument("LazyTree: zero node budget");
        slots_.assign(root_degree(), kNoVertex);
        depth_.push_back(0);
        count_ = 1;
    }

    std::size_t size() const { return count_; }
    std::uint32_t root() const { return 0; }
    bool severed() const { return severed_; }
    std::uint32_t branching() const { return d_; }
    std::uint32_t depth(std::uint32_t v) const { return depth_[v]; }

    std::uint32_t degree(std::uint32_t v) const { return v == 0 ? root_degree() : d_; }

    std::uint32_t parent(std::uint32_t v) const {
        return v == 0 ? kNoVertex : slots_[offset(v)];
    }

    std::uint32_t peek_neighbor(std::uint32_t v, std::uint32_t slot) const {
        return slots_[offset(v) + slot];
    }

    std::uint32_t neighbor(std::uint32_t v, std::uint32_t slot) {
        const std::size_t idx = offset(v) + slot;
        if (slots_[idx] != kNoVertex) return slots_[idx];
        if (count_ >= budget_)
            throw BudgetExceeded("LazyTree: node budget exceeded at " + std::to_string(count_));
        const std::uint32_t w = static_cast<std::uint32_t>(count_);
        ++count_;
        slots_.resize(slots_.size() + d_, kNoVertex);
        slots_[offset(w)] = v;  // parent
        depth_.push_back(depth_[v] + 1);
        slots_[idx] = w;
        return w;
    }

private:
    std::uint32_t root_degree() const { return severed_ ? 1 : d_; }
    std::size_t offset(std::uint32_t v) const {
        return v == 0 ? 0 : root_degree() + static_cast<std::size_t>(v - 1) * d_;
    }

    std::uint32_t d_;
    bool severed_;
    std::uint64_t budget_;
    std::size_t count_ = 0;
    std::vector<std::uint32_t> slots_;
    std::vector<std::uint32_t> depth_;
};

/* Pioneers of a run: currently infected nodes on the inner boundary of the
   ever-infected set, i.e. with some neighbor never infected so far. An
   unmaterialized neighbor was never infected by construction. */
inline bool is_pioneer(const LazyTree& tree, std::uint32_t v,
                       const std::vector<std::uint8_t>& ever_infected) {
    const std::uint32_t deg = tree.degree(v);
    for (std::uint32_t s = 0; s < deg; ++s) {
        const std::uint32_t w = tree.peek_neighbor(v, s);
        if (w == kNoVertex || w >= ever_infected.size() || !ever_infected[w]) return true;
    }
    return false;
}

inline std::vector<std::uint32_t> pioneer_set(const LazyTree& tree,
                                              const std::vector<std::uint32_t>& current,
                                              const std::vector<std::uint8_t>& ever_infected) {
    std::vector<std::uint32_t> out;
    for (std::uint32_t v : current)
        if (is_pioneer(tree, v, ever_infected)) out.push_back(v);
    std::sort(out.begin(), out.end());
    return out;
}

struct TreeRunOptions {
    double horizon = 10.0;
    std::vector<double> grid;
    bool severed = false;
    std::uint64_t node_budget = 10'000'000;
    bool record_first_infection = false;
};

struct TreeRun {
    std::vector<double> grid;
    std::vector<std::uint32_t> xi;        // |xi_t| at grid times
    std::vector<std::uint32_t> history;   // |cup_{s<=t} xi_s|
    std::vector<std::uint32_t> pioneers;  // pioneer count
    bool alive_at_end = false;
    bool aborted = false;  // node budget hit; grid arrays stop at the abort
    double extinction_time = std::numeric_limits<double>::infinity();
    std::uint64_t nodes_materialized = 0;
    std::vector<double> first_infection;  // per node id; only when requested
};

/* Contact process from an infected root on an existing tree (shared trees
   keep node ids comparable across runs). */
inline TreeRun simulate_tree_on(LazyTree& tree, ProcessParams params, const TreeRunOptions& opt,
                                std::uint64_t seed) {
    NextEventEngine<LazyTree> engine(tree, params, seed);

    TreeRun run;
    std::vector<std::uint8_t> ever;
    std::size_t history_count = 0;
    const double inf = std::numeric_limits<double>::infinity();
    auto mark_infected = [&](std::uint32_t v, double t) {
        if (v >= ever.size()) ever.resize(tree.size(), 0);
        if (!ever[v]) {
            ever[v] = 1;
            ++history_count;
            if (opt.record_first_infection) {
                if (run.first_infection.size() < tree.size())
                    run.first_infection.resize(tree.size(), inf);
                run.first_infection[v] = t;
            }
        }
    };

    auto snapshot = [&](double) {
        run.xi.push_back(static_cast<std::uint32_t>(engine.infected_count()));
        run.history.push_back(static_cast<std::uint32_t>(history_count));
        std::uint32_t pio = 0;
        for (std::uint32_t v : engine.infected_vertices())
            if (is_pioneer(tree, v, ever)) ++pio;
        run.pioneers.push_back(pio);
    };

    engine.force_infect(tree.root());
    mark_infected(tree.root(), 0.0);

    std::size_t gi = 0;
    try {
        for (;;) {
            const double t_next = engine.peek_next_time();
            while (gi < opt.grid.size() && opt.grid[gi] <= std::min(t_next, opt.horizon)) {
                snapshot(opt.grid[gi]);
                run.grid.push_back(opt.grid[gi]);
                ++gi;
            }
            if (t_next > opt.horizon) break;
            const Event e = engine.advance();
            if (e.kind == EventKind::infection) mark_infected(e.target, e.time);
            if (engine.extinct()) {
                run.extinction_time = e.time;
                while (gi < opt.grid.size() && opt.grid[gi] <= opt.horizon) {
                    snapshot(opt.grid[gi]);
                    run.grid.push_back(opt.grid[gi]);
                    ++gi;
                }
                break;
            }
        }
        run.alive_at_end = !engine.extinct();
    } catch (const BudgetExceeded&) {
        run.aborted = true;
        run.alive_at_end = true;
    }
    run.nodes_materialized = tree.size();
    if (opt.record_first_infection && run.first_infection.size() < tree.size())
        run.first_infection.resize(tree.size(), inf);
    return run;
}

/* Contact process on the (severed) d-regular tree from an infected root. */
inline TreeRun simulate_tree(std::uint32_t d, ProcessParams params, const TreeRunOptions& opt,
                             std::uint64_t seed) {
    LazyTree tree(d, opt.severed, opt.node_budget);
    return simulate_tree_on(tree, params, opt, seed);
}

namespace detail {

struct Dsu {
    std::vector<std::uint32_t> up;
    explicit Dsu(std::size_t n) : up(n) { std::iota(up.begin(), up.end(), 0u); }
    std::uint32_t find(std::uint32_t x) {
        while (up[x] != x) {
            up[x] = up[up[x]];
            x = up[x];
        }
        return x;
    }
    void unite(std::uint32_t a, std::uint32_t b) { up[find(a)] = find(b); }
};

}  // namespace detail

/* Free branches of a finite node set S: edges from S into components of the
   complement that touch no other S vertex. For connected S in a tree this is
   exactly the boundary edge count |S|(d-2)+2. The complement components are
   computed on the materialized portion, which is closed under ancestors, so
   connectivity is exact. */
inline std::uint64_t free_branches(LazyTree& tree, const std::vector<std::uint32_t>& subset) {
    if (subset.empty()) return 0;
    for (std::uint32_t v : subset) {
        const std::uint32_t deg = tree.degree(v);
        for (std::uint32_t s = 0; s < deg; ++s) tree.neighbor(v, s);
    }
    const std::size_t n = tree.size();
    std::vector<std::uint8_t> in_s(n, 0);
    for (std::uint32_t v : subset) {
        if (v >= n) throw std::invalid_argument("free_branches: unknown node id");
        in_s[v] = 1;
    }
    detail::Dsu dsu(n);
    for (std::uint32_t v = 1; v < n; ++v) {
        const std::uint32_t p = tree.parent(v);
        if (!in_s[v] && !in_s[p]) dsu.unite(v, p);
    }
    // component -> sorted list of adjacent S vertices (with edge counts)
    std::vector<std::pair<std::uint32_t, std::uint32_t>> touch;  // (component, s vertex)
    for (std::uint32_t v : subset) {
        const std::uint32_t deg = tree.degree(v);
        for (std::uint32_t s = 0; s < deg; ++s) {
            const std::uint32_t w = tree.peek_neighbor(v, s);
            if (!in_s[w]) touch.emplace_back(dsu.find(w), v);
        }
    }
    std::sort(touch.begin(), touch.end());
    std::uint64_t free = 0;
    std::size_t i = 0;
    while (i < touch.size()) {
        std::size_t j = i;
        while (j < touch.size() && touch[j].first == touch[i].first) ++j;
        bool single_attachment = true;
        for (std::size_t k = i + 1; k < j; ++k)
            if (touch[k].second != touch[i].second) single_attachment = false;
        if (single_attachment) free += j - i;
        i = j;
    }
    return free;
}

/* Pure birth process at unit rate per particle: P(Y_t = k) shifts to the
   geometric law with success probability e^{-t'}, t' = rate * t. */
inline double yule_pmf(std::uint64_t k, double t_prime) {
    if (k == 0) return 0.0;
    return std::exp(-t_prime) * std::pow(1.0 - std::exp(-t_prime), static_cast<double>(k - 1));
}

inline double yule_cdf(double k, double t_prime) {
    if (k < 1.0) return 0.0;
    return 1.0 - std::pow(1.0 - std::exp(-t_prime), std::floor(k));
}

inline std::uint64_t yule_sample(rng_t& rng, double rate, double t) {
    std::uint64_t k = 1;
    double s = exp_rv(rng, rate * static_cast<double>(k));
    while (s <= t) {
        ++k;
        s += exp_rv(rng, rate * static_cast<double>(k));
    }
    return k;
}

inline std::vector<std::uint64_t> yule_reference(double rate, double t, std::size_t replicas,
                                                 std::uint64_t seed) {
    std::vector<std::uint64_t> out(replicas);
    for (std::size_t r = 0; r < replicas; ++r) {
        rng_t rng(replica_seed(seed, r));
        out[r] = yule_sample(rng, rate, t);
    }
    return out;
}

}  // namespace cpreg
