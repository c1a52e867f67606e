#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "cpreg/estimators.hpp"
#include "cpreg/fenwick.hpp"
#include "cpreg/harris.hpp"
#include "cpreg/multigraph.hpp"
#include "cpreg/rng.hpp"
#include "cpreg/tree.hpp"

namespace cpreg {

/* Contact process on the d-regular tree that simultaneously explores a
   configuration model on n vertices through a partial labelling of the tree.
   Truly infected tree vertices project to an infection on the graph; the
   projection is exact until the first repeat-label clash. */

enum class CoverMark : std::uint8_t {
    unlabelled,        // no label; infected unlabelled vertices act as false sources
    healthy_labelled,  // labelled, currently healthy
    truly_infected,
    falsely_infected,
};

enum class ClashKind : std::uint8_t { repeat_label, false_source };

struct ClashEvent {
    double time = 0.0;
    std::uint32_t tree_vertex = 0;
    std::int64_t label = -1;  // -1 when the false infection hit an unlabelled vertex
    ClashKind kind = ClashKind::repeat_label;
};

/* One transmission or recovery touching the projected process, in graph
   coordinates: is_edge ? edge (source,target) fired : label recovered. */
struct InducedEvent {
    double time = 0.0;
    std::uint8_t is_edge = 0;
    std::uint32_t source = 0;
    std::uint32_t target = 0;
};

struct CoverOptions {
    std::uint64_t node_budget = 10'000'000;
    bool record_induced = false;
};

class CoverProcess {
public:
    CoverProcess(std::uint32_t n_labels, std::uint32_t d, ProcessParams params,
                 CoverOptions opt = {})
        : n_(n_labels),
          d_(d),
          params_(params),
          opt_(opt),
          tree_(d, false, opt.node_budget),
          free_fen_(n_labels) {
        if (d_ < 3) throw std::invalid_argument("CoverProcess: need d >= 3");
        if (n_ < 2) throw std::invalid_argument("CoverProcess: need n >= 2");
        if ((static_cast<std::uint64_t>(n_) * d_) % 2 != 0)
            throw std::invalid_argument("CoverProcess: d*n must be even");
        if (params_.lambda < 0.0) throw std::invalid_argument("CoverProcess: lambda < 0");
        free_pool_.assign(n_, static_cast<std::int32_t>(d_));
        copies_.assign(n_, 0);
        true_copies_.assign(n_, 0);
        adj_.assign(n_, {});
        touched_flag_.assign(n_, 0);
        for (std::uint32_t l = 0; l < n_; ++l) free_fen_.add(l, d_);
        reset(0);
    }

    /* Restore the untouched-configuration state and restart from the root;
       cost is proportional to the labels touched by the previous run. */
    void reset(std::uint64_t seed) {
        rng_ = rng_t(seed);
        for (std::uint32_t l : touched_) {
            free_fen_.add(l, d_ - free_pool_[l]);
            free_pool_[l] = static_cast<std::int32_t>(d_);
            copies_[l] = 0;
            true_copies_[l] = 0;
            adj_[l].clear();
            touched_flag_[l] = 0;
        }
        touched_.clear();
        total_free_ = static_cast<std::uint64_t>(n_) * d_;
        tree_ = LazyTree(d_, false, opt_.node_budget);
        labelv_.assign(1, -1);
        markv_.assign(1, CoverMark::unlabelled);
        posv_.assign(1, -1);
        infected_.clear();
        n_true_ = 0;
        t_ = 0.0;
        extinction_time_ = std::numeric_limits<double>::infinity();
        matched_pairs_ = 0;
        distinct_labels_ = 0;
        clashes_.clear();
        repeat_seen_ = false;
        false_seen_ = false;
        edge_pairs_.clear();
        induced_.clear();
        snapshots_.clear();

        labelv_[0] = 0;  // ell(root) = first graph vertex
        copies_[0] = 1;
        distinct_labels_ = 1;
        touch_label(0);
        infected_.push_back(0);
        posv_[0] = 0;
        markv_[0] = CoverMark::truly_infected;
        true_copies_[0] = 1;
        n_true_ = 1;
    }

    /* Process one event if it lands by t_max; otherwise move the clock to
       t_max and return false (the discarded draw is memoryless). */
    bool step(double t_max) {
        if (infected_.empty()) return false;
        if (t_ >= t_max) return false;
        const double per_vertex = 1.0 + params_.lambda * d_;
        const double t_next = t_ + exp_rv(rng_, per_vertex * infected_.size());
        if (t_next > t_max) {
            t_ = t_max;
            return false;
        }
        t_ = t_next;
        const std::size_t before = induced_.size();
        const std::uint32_t v = infected_[uniform_below(rng_, infected_.size())];
        const double r = u01(rng_) * per_vertex;
        if (r < 1.0)
            recover(v);
        else
            transmit(v, static_cast<std::uint32_t>(uniform_below(rng_, d_)));
        if (opt_.record_induced && induced_.size() > before) snapshots_.push_back(project());
        return true;
    }

    void run_until(double t_max) {
        while (step(t_max)) {
        }
    }

    double time() const { return t_; }
    bool extinct() const { return infected_.empty(); }
    double extinction_time() const { return extinction_time_; }

    const LazyTree& tree() const { return tree_; }
    std::size_t infected_count() const { return infected_.size(); }
    std::size_t truly_infected_count() const { return n_true_; }
    std::int64_t label_of(std::uint32_t v) const { return labelv_[v]; }
    CoverMark mark_of(std::uint32_t v) const { return markv_[v]; }
    bool is_infected(std::uint32_t v) const { return posv_[v] >= 0; }

    std::uint64_t labels_used() const { return distinct_labels_; }
    std::uint64_t matched_pairs() const { return matched_pairs_; }
    std::int32_t free_half_edges(std::uint32_t label) const { return free_pool_[label]; }
    std::uint64_t total_free_half_edges() const { return total_free_; }

    /* Labels of the truly infected vertices, sorted; distinct by invariant. */
    std::vector<std::uint32_t> project() const {
        std::vector<std::uint32_t> out;
        out.reserve(n_true_);
        for (std::uint32_t v : infected_)
            if (markv_[v] == CoverMark::truly_infected)
                out.push_back(static_cast<std::uint32_t>(labelv_[v]));
        std::sort(out.begin(), out.end());
        if (std::adjacent_find(out.begin(), out.end()) != out.end())
            throw std::logic_error("CoverProcess: duplicate truly infected label");
        return out;
    }

    Multigraph revealed_graph() const {
        std::vector<Multigraph::Edge> edges;
        edges.reserve(edge_pairs_.size());
        for (const auto& [u, v] : edge_pairs_) edges.push_back({u, v, 1});
        return Multigraph::from_edges(n_, std::move(edges));
    }

    const std::vector<ClashEvent>& clashes() const { return clashes_; }
    bool repeat_clash_seen() const { return repeat_seen_; }
    bool false_clash_seen() const { return false_seen_; }
    double first_repeat_time() const {
        for (const ClashEvent& c : clashes_)
            if (c.kind == ClashKind::repeat_label) return c.time;
        return std::numeric_limits<double>::quiet_NaN();
    }

    const std::vector<InducedEvent>& induced_events() const { return induced_; }
    const std::vector<std::vector<std::uint32_t>>& induced_snapshots() const {
        return snapshots_;
    }

private:
    void touch_label(std::uint32_t l) {
        if (!touched_flag_[l]) {
            touched_flag_[l] = 1;
            touched_.push_back(l);
        }
    }

    void dec_pool(std::uint32_t l) {
        touch_label(l);
        --free_pool_[l];
        free_fen_.add(l, -1);
        --total_free_;
    }

    void ensure_arrays() {
        if (labelv_.size() < tree_.size()) {
            labelv_.resize(tree_.size(), -1);
            markv_.resize(tree_.size(), CoverMark::unlabelled);
            posv_.resize(tree_.size(), -1);
        }
    }

    void add_infected(std::uint32_t v) {
        posv_[v] = static_cast<std::int64_t>(infected_.size());
        infected_.push_back(v);
    }

    void note_false(std::uint32_t v, std::int64_t label) {
        if (!false_seen_) {
            false_seen_ = true;
            clashes_.push_back({t_, v, label, ClashKind::false_source});
        }
    }

    void note_repeat(std::uint32_t v, std::uint32_t label) {
        if (!repeat_seen_) {
            repeat_seen_ = true;
            clashes_.push_back({t_, v, static_cast<std::int64_t>(label), ClashKind::repeat_label});
        }
    }

    void mark_truly(std::uint32_t v) {
        if (markv_[v] == CoverMark::truly_infected) return;
        const std::uint32_t l = static_cast<std::uint32_t>(labelv_[v]);
        if (++true_copies_[l] > 1)
            throw std::logic_error("CoverProcess: second truly infected copy of a label");
        markv_[v] = CoverMark::truly_infected;
        ++n_true_;
    }

    void recover(std::uint32_t v) {
        const std::int64_t p = posv_[v];
        const std::uint32_t last = infected_.back();
        infected_[static_cast<std::size_t>(p)] = last;
        posv_[last] = p;
        infected_.pop_back();
        posv_[v] = -1;
        if (markv_[v] == CoverMark::truly_infected) {
            const std::uint32_t l = static_cast<std::uint32_t>(labelv_[v]);
            --true_copies_[l];
            --n_true_;
            markv_[v] = CoverMark::healthy_labelled;
            if (opt_.record_induced) induced_.push_back({t_, 0, l, l});
        } else if (markv_[v] == CoverMark::falsely_infected) {
            markv_[v] = CoverMark::healthy_labelled;
        }
        if (infected_.empty()) extinction_time_ = t_;
    }

    void transmit(std::uint32_t v, std::uint32_t slot) {
        const std::uint32_t u = tree_.neighbor(v, slot);
        ensure_arrays();
        if (markv_[v] == CoverMark::truly_infected)
            transmit_true(v, u);
        else
            transmit_false(u);
    }

    void transmit_true(std::uint32_t v, std::uint32_t u) {
        const std::uint32_t sv = static_cast<std::uint32_t>(labelv_[v]);
        if (labelv_[u] < 0) {
            if (posv_[u] >= 0) return;  // already infected and unlabelled: nothing to determine
            if (free_pool_[sv] > 0)
                pair_new(sv, u);
            else
                infect_false_unlabelled(u);  // label out of half-edges: stale neighbourhood
        } else {
            const std::uint32_t j = static_cast<std::uint32_t>(labelv_[u]);
            if (opt_.record_induced) induced_.push_back({t_, 1, sv, j});
            const bool self_true = markv_[u] == CoverMark::truly_infected;
            const bool another_true = true_copies_[j] > (self_true ? 1 : 0);
            if (another_true) {
                if (self_true)
                    throw std::logic_error("CoverProcess: duplicate truly infected label");
                if (posv_[u] < 0) add_infected(u);
                if (markv_[u] != CoverMark::falsely_infected) note_false(u, j);
                markv_[u] = CoverMark::falsely_infected;
            } else {
                if (posv_[u] < 0) add_infected(u);
                mark_truly(u);
                reflect(u);
            }
        }
    }

    /* Pair a free half-edge of the source label with a uniform other free
       half-edge; the partner vertex labels the target tree vertex. */
    void pair_new(std::uint32_t sv, std::uint32_t u) {
        if (total_free_ < 2)
            throw std::runtime_error(
                "CoverProcess: configuration exhausted (n too small for this exploration)");
        dec_pool(sv);
        const std::uint64_t pick = uniform_below(rng_, total_free_);
        const std::uint32_t j =
            static_cast<std::uint32_t>(free_fen_.find(static_cast<std::int64_t>(pick)));
        dec_pool(j);
        adj_[sv].push_back(static_cast<std::int32_t>(j));
        adj_[j].push_back(static_cast<std::int32_t>(sv));
        edge_pairs_.emplace_back(sv, j);
        ++matched_pairs_;
        const bool repeat = copies_[j] > 0;
        if (repeat)
            note_repeat(u, j);
        else
            ++distinct_labels_;
        labelv_[u] = static_cast<std::int64_t>(j);
        ++copies_[j];
        touch_label(j);
        if (opt_.record_induced) induced_.push_back({t_, 1, sv, j});
        add_infected(u);
        if (true_copies_[j] > 0) {
            markv_[u] = CoverMark::falsely_infected;
            note_false(u, j);
        } else {
            mark_truly(u);
        }
        reflect(u);
    }

    void infect_false_unlabelled(std::uint32_t u) {
        if (posv_[u] >= 0) return;
        add_infected(u);
        note_false(u, -1);
    }

    void transmit_false(std::uint32_t u) {
        if (labelv_[u] < 0) {
            infect_false_unlabelled(u);
            return;
        }
        if (markv_[u] == CoverMark::truly_infected) return;  // continues to be
        const bool was_false = markv_[u] == CoverMark::falsely_infected;
        if (posv_[u] < 0) add_infected(u);
        markv_[u] = CoverMark::falsely_infected;
        if (!was_false) note_false(u, labelv_[u]);
        reflect(u);
    }

    /* Mirror every determined edge of an infected labelled vertex's label
       onto its neighbourhood, each missing instance into a uniform free child
       slot. Vacuous before the first clash: a fresh label has only its parent
       edge determined. A freshly labelled infected child repeats the step. */
    void reflect(std::uint32_t u0) {
        std::vector<std::uint32_t> work{u0};
        std::vector<std::int32_t> need, have;
        std::vector<std::uint32_t> free_slots;
        while (!work.empty()) {
            const std::uint32_t u = work.back();
            work.pop_back();
            if (labelv_[u] < 0 || posv_[u] < 0) continue;
            const std::uint32_t j = static_cast<std::uint32_t>(labelv_[u]);
            if (adj_[j].size() <= 1 && u != 0) continue;  // only the parent edge exists
            need.assign(adj_[j].begin(), adj_[j].end());
            std::sort(need.begin(), need.end());
            have.clear();
            free_slots.clear();
            const std::uint32_t first_child = u == 0 ? 0 : 1;
            const std::uint32_t deg = tree_.degree(u);
            if (u != 0) {
                const std::uint32_t p = tree_.parent(u);
                if (labelv_[p] >= 0) have.push_back(static_cast<std::int32_t>(labelv_[p]));
            }
            for (std::uint32_t s = first_child; s < deg; ++s) {
                const std::uint32_t c = tree_.peek_neighbor(u, s);
                if (c == kNoVertex || labelv_[c] < 0)
                    free_slots.push_back(s);
                else
                    have.push_back(static_cast<std::int32_t>(labelv_[c]));
            }
            std::sort(have.begin(), have.end());
            std::vector<std::int32_t> missing;
            std::set_difference(need.begin(), need.end(), have.begin(), have.end(),
                                std::back_inserter(missing));
            for (std::int32_t m : missing) {
                if (free_slots.empty()) break;  // post-clash bookkeeping corner; skip the rest
                const std::size_t w = uniform_below(rng_, free_slots.size());
                const std::uint32_t s = free_slots[w];
                free_slots[w] = free_slots.back();
                free_slots.pop_back();
                const std::uint32_t c = tree_.neighbor(u, s);
                ensure_arrays();
                labelv_[c] = m;
                ++copies_[static_cast<std::uint32_t>(m)];
                touch_label(static_cast<std::uint32_t>(m));
                if (posv_[c] >= 0) {
                    // an unlabelled infected child gains its label: false infection
                    if (markv_[c] != CoverMark::falsely_infected) {
                        markv_[c] = CoverMark::falsely_infected;
                        note_false(c, m);
                    }
                    work.push_back(c);
                } else {
                    markv_[c] = CoverMark::healthy_labelled;
                }
            }
        }
    }

    std::uint32_t n_;
    std::uint32_t d_;
    ProcessParams params_;
    CoverOptions opt_;
    rng_t rng_{0};
    LazyTree tree_;
    double t_ = 0.0;
    double extinction_time_ = std::numeric_limits<double>::infinity();

    // tree-indexed state
    std::vector<std::int64_t> labelv_;
    std::vector<CoverMark> markv_;
    std::vector<std::int64_t> posv_;
    std::vector<std::uint32_t> infected_;
    std::size_t n_true_ = 0;

    // label-indexed state
    std::vector<std::int32_t> free_pool_;
    FenwickSampler free_fen_;
    std::vector<std::int32_t> copies_;
    std::vector<std::int32_t> true_copies_;
    std::vector<std::vector<std::int32_t>> adj_;
    std::vector<std::uint8_t> touched_flag_;
    std::vector<std::uint32_t> touched_;
    std::uint64_t total_free_ = 0;

    std::uint64_t matched_pairs_ = 0;
    std::uint64_t distinct_labels_ = 0;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> edge_pairs_;
    std::vector<ClashEvent> clashes_;
    bool repeat_seen_ = false;
    bool false_seen_ = false;
    std::vector<InducedEvent> induced_;
    std::vector<std::vector<std::uint32_t>> snapshots_;
};

struct ExploreOptions {
    double grid_step = 0.5;
    CoverOptions cover;
};

struct ExploreResult {
    std::vector<double> grid;
    std::vector<std::uint32_t> xi_tree;  // infected tree vertices
    std::vector<std::uint32_t> xi_true;  // truly infected tree vertices
    Multigraph revealed;
    std::vector<ClashEvent> clashes;
    bool extinct = false;
    double extinction_time = std::numeric_limits<double>::infinity();
    bool aborted = false;
};

inline ExploreResult explore(std::uint32_t n, std::uint32_t d, ProcessParams params,
                             double horizon, std::uint64_t seed,
                             const ExploreOptions& opt = {}) {
    if (horizon <= 0.0) throw std::invalid_argument("explore: need horizon > 0");
    CoverProcess cp(n, d, params, opt.cover);
    cp.reset(seed);
    ExploreResult res;
    res.grid = uniform_grid(horizon, opt.grid_step);
    res.xi_tree.assign(res.grid.size(), 0);
    res.xi_true.assign(res.grid.size(), 0);
    try {
        for (std::size_t i = 0; i < res.grid.size(); ++i) {
            cp.run_until(res.grid[i]);
            res.xi_tree[i] = static_cast<std::uint32_t>(cp.infected_count());
            res.xi_true[i] = static_cast<std::uint32_t>(cp.truly_infected_count());
        }
    } catch (const BudgetExceeded&) {
        res.aborted = true;
    }
    res.revealed = cp.revealed_graph();
    res.clashes = cp.clashes();
    res.extinct = cp.extinct();
    res.extinction_time = cp.extinction_time();
    return res;
}

/* The displayed single-step clash probability after i-1 explored vertices. */
inline double clash_hazard(std::uint64_t i, std::uint32_t d, std::uint64_t n) {
    if (i < 2 || i > n) throw std::invalid_argument("clash_hazard: need 2 <= i <= n");
    const double num = static_cast<double>(d) + (d - 1.0) * (static_cast<double>(i) - 1.0) - 1.0;
    const double den = static_cast<double>(d) * static_cast<double>(n) -
                       2.0 * static_cast<double>(i) + 4.0 - 1.0;
    return num / den;
}

/* Probability that the first k explored vertices produce no clash,
   as the product of per-step clash-free factors; >= 1 - k^2/n for k <= sqrt(n). */
inline double clash_free_probability(std::uint64_t k, std::uint32_t d, std::uint64_t n) {
    if (k < 2 || k > n) throw std::invalid_argument("clash_free_probability: need 2 <= k <= n");
    double p = 1.0;
    for (std::uint64_t i = 2; i <= k; ++i) {
        const double num = (d - 1.0) * (static_cast<double>(i) - 2.0);
        const double den = static_cast<double>(d) * static_cast<double>(n) -
                           2.0 * static_cast<double>(i) + 3.0;
        p *= 1.0 - num / den;
    }
    return p;
}

struct ClashSample {
    double time = std::numeric_limits<double>::quiet_NaN();  // NaN: no clash observed
    std::uint64_t labels = 0;
    bool survived = false;
};

struct FirstClashDistribution {
    std::vector<std::uint32_t> n_grid;
    std::vector<std::vector<ClashSample>> samples;  // per n, per replica
};

/* Empirical first repeat-label times per graph size. A replica ends at its
   first clash, at extinction, or at the safety horizon, whichever is first;
   only clash-reaching replicas carry a time. */
inline FirstClashDistribution first_clash_time(const std::vector<std::uint32_t>& n_grid,
                                               std::uint32_t d, ProcessParams params,
                                               std::size_t replicas, std::uint64_t seed,
                                               double horizon = 200.0,
                                               const CoverOptions& opt = {}) {
    if (n_grid.empty()) throw std::invalid_argument("first_clash_time: empty n grid");
    FirstClashDistribution out;
    out.n_grid = n_grid;
    for (std::uint32_t n : n_grid) {
        CoverProcess cp(n, d, params, opt);
        std::vector<ClashSample> col(replicas);
        for (std::size_t r = 0; r < replicas; ++r) {
            cp.reset(replica_seed(seed, r, n));
            while (!cp.repeat_clash_seen() && cp.step(horizon)) {
            }
            ClashSample s;
            if (cp.repeat_clash_seen()) {
                s.time = cp.first_repeat_time();
                s.survived = true;
            } else {
                s.survived = !cp.extinct();
            }
            s.labels = cp.labels_used();
            col[r] = s;
        }
        out.samples.push_back(std::move(col));
    }
    return out;
}

}  // namespace cpreg
