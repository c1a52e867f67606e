#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "cpreg/fenwick.hpp"
#include "cpreg/multigraph.hpp"
#include "cpreg/rng.hpp"

namespace cpreg {

struct ProcessParams {
    double lambda = 1.0;  // infection rate per edge instance; recovery rate is 1
};

struct BudgetExceeded : std::runtime_error {
    using std::runtime_error::runtime_error;
};

constexpr std::uint32_t kNoVertex = ~std::uint32_t{0};

/* Adapter exposing a Multigraph to the next-event engine. */
struct GraphSubstrate {
    const Multigraph& g;

    std::size_t size() const { return g.n; }
    std::uint32_t root() const { return 0; }
    std::uint32_t degree(std::uint32_t v) const { return g.vertex_degree(v); }
    std::uint32_t neighbor(std::uint32_t v, std::uint32_t slot) const {
        return g.nbr[g.offsets[v] + slot];
    }
    std::uint32_t peek_neighbor(std::uint32_t v, std::uint32_t slot) const {
        return neighbor(v, slot);
    }
};

enum class EventKind : std::uint8_t { infection, recovery, interior_edge };

struct Event {
    EventKind kind;
    double time;
    std::uint32_t source;  // infecting vertex, or recovering vertex
    std::uint32_t target;  // infected vertex; kNoVertex for recoveries
};

/* Aggregated-rate next-event dynamics. One Poisson clock drives everything:
   total rate = |infected| + lambda * (active edge instances), with targets
   drawn through a Fenwick prefix search, O(log n) per event. Self-loops never
   count as active. With track_types enabled, infected-infected edge events
   (no-ops for the occupied set) are also generated so type marks can merge,
   and every vertex carries a 64-bit type mask.

   Event selection and all state updates consume randomness from a single
   seeded stream, so trajectories are reproducible bit for bit. */
template <class Substrate>
class NextEventEngine {
public:
    NextEventEngine(Substrate& sub, ProcessParams params, std::uint64_t seed,
                    bool track_types = false)
        : sub_(sub), lambda_(params.lambda), track_types_(track_types), rng_(seed) {
        if (lambda_ < 0.0) throw std::invalid_argument("NextEventEngine: negative lambda");
        ensure_capacity(sub_.size());
    }

    double time() const { return time_; }
    bool extinct() const { return infected_list_.empty(); }
    std::size_t infected_count() const { return infected_list_.size(); }
    const std::vector<std::uint32_t>& infected_vertices() const { return infected_list_; }
    bool infected(std::uint32_t v) const { return v < infected_.size() && infected_[v] != 0; }
    std::uint64_t type_mask(std::uint32_t v) const { return masks_[v]; }

    std::uint64_t alive_mask() const {
        std::uint64_t m = 0;
        for (std::uint32_t v : infected_list_) m |= masks_[v];
        return m;
    }

    /* Absolute time of the next event; +inf when extinct. Idempotent until the
       state changes. */
    double peek_next_time() {
        if (!pending_) {
            const double rate = total_rate();
            pending_ = rate > 0.0 ? time_ + exp_rv(rng_, rate)
                                  : std::numeric_limits<double>::infinity();
        }
        return *pending_;
    }

    /* Move the clock forward without an event (snapshots, seeding instants). */
    void jump_to(double t) {
        if (t < time_) throw std::invalid_argument("NextEventEngine: time must not move back");
        time_ = t;
        pending_.reset();
    }

    /* External infection (initial conditions, staggered type seeds). The
       memoryless property keeps discarding the pending draw exact. */
    void force_infect(std::uint32_t v, std::uint64_t type_bits = 0) {
        ensure_capacity(sub_.size());
        if (v >= infected_.size()) throw std::invalid_argument("NextEventEngine: bad vertex");
        if (!infected_[v]) apply_infection(v);
        if (track_types_) masks_[v] |= type_bits;
        pending_.reset();
    }

    /* Apply the pending event. Requires a finite peek_next_time(). */
    Event advance() {
        const double t = peek_next_time();
        if (!std::isfinite(t)) throw std::logic_error("NextEventEngine: advance past extinction");
        pending_.reset();
        time_ = t;

        const double n_inf = static_cast<double>(infected_list_.size());
        const double a_boundary = lambda_ * static_cast<double>(pressure_.total());
        const double a_interior =
            track_types_ ? 0.5 * lambda_ * static_cast<double>(interior_.total()) : 0.0;
        const double r = u01(rng_) * (n_inf + a_boundary + a_interior);

        if (r >= n_inf + a_boundary && track_types_ && interior_.total() > 0) {
            const std::uint32_t u = static_cast<std::uint32_t>(
                interior_.find(static_cast<std::int64_t>(uniform_below(rng_, interior_.total()))));
            const std::uint32_t w = pick_infected_neighbor(u);
            const std::uint64_t merged = masks_[u] | masks_[w];
            masks_[u] = merged;
            masks_[w] = merged;
            return {EventKind::interior_edge, time_, u, w};
        }
        if (r >= n_inf && pressure_.total() > 0) {
            const std::uint32_t v = static_cast<std::uint32_t>(pressure_.find(
                static_cast<std::int64_t>(uniform_below(rng_, pressure_.total()))));
            const std::uint32_t u = pick_infected_neighbor(v);
            apply_infection(v);
            if (track_types_) masks_[v] = masks_[u];
            return {EventKind::infection, time_, u, v};
        }
        const std::size_t idx = uniform_below(rng_, infected_list_.size());
        const std::uint32_t v = infected_list_[idx];
        apply_recovery(v);
        return {EventKind::recovery, time_, v, kNoVertex};
    }

private:
    double total_rate() const {
        double rate = static_cast<double>(infected_list_.size()) +
                      lambda_ * static_cast<double>(pressure_.total());
        if (track_types_) rate += 0.5 * lambda_ * static_cast<double>(interior_.total());
        return rate;
    }

    void ensure_capacity(std::size_t n) {
        if (n <= infected_.size()) return;
        infected_.resize(n, 0);
        inf_nb_.resize(n, 0);
        list_pos_.resize(n, kNoVertex);
        pressure_.grow(n);
        if (track_types_) {
            masks_.resize(n, 0);
            interior_.grow(n);
        }
    }

    /* Uniform among v's infected neighbor slots; multiplicity via repeated
       slots. Unmaterialized neighbors are healthy by construction. */
    std::uint32_t pick_infected_neighbor(std::uint32_t v) {
        std::uint32_t r = static_cast<std::uint32_t>(uniform_below(rng_, inf_nb_[v]));
        const std::uint32_t deg = sub_.degree(v);
        for (std::uint32_t s = 0; s < deg; ++s) {
            const std::uint32_t w = sub_.peek_neighbor(v, s);
            if (w == kNoVertex || w == v || w >= infected_.size() || !infected_[w]) continue;
            if (r == 0) return w;
            --r;
        }
        throw std::logic_error("NextEventEngine: neighbor bookkeeping out of sync");
    }

    void apply_infection(std::uint32_t v) {
        infected_[v] = 1;
        list_pos_[v] = static_cast<std::uint32_t>(infected_list_.size());
        infected_list_.push_back(v);
        pressure_.add(v, -static_cast<std::int64_t>(inf_nb_[v]));
        if (track_types_) interior_.add(v, inf_nb_[v]);
        const std::uint32_t deg = sub_.degree(v);
        for (std::uint32_t s = 0; s < deg; ++s) {
            const std::uint32_t w = sub_.neighbor(v, s);  // may materialize
            ensure_capacity(sub_.size());
            if (w == v) continue;
            inf_nb_[w] += 1;
            if (infected_[w]) {
                if (track_types_) interior_.add(w, 1);
            } else {
                pressure_.add(w, 1);
            }
        }
    }

    void apply_recovery(std::uint32_t v) {
        infected_[v] = 0;
        const std::uint32_t idx = list_pos_[v];
        const std::uint32_t last = infected_list_.back();
        infected_list_[idx] = last;
        list_pos_[last] = idx;
        infected_list_.pop_back();
        list_pos_[v] = kNoVertex;
        pressure_.add(v, static_cast<std::int64_t>(inf_nb_[v]));
        if (track_types_) {
            interior_.add(v, -static_cast<std::int64_t>(inf_nb_[v]));
            masks_[v] = 0;
        }
        const std::uint32_t deg = sub_.degree(v);
        for (std::uint32_t s = 0; s < deg; ++s) {
            const std::uint32_t w = sub_.peek_neighbor(v, s);
            if (w == kNoVertex || w == v) continue;
            inf_nb_[w] -= 1;
            if (infected_[w]) {
                if (track_types_) interior_.add(w, -1);
            } else {
                pressure_.add(w, -1);
            }
        }
    }

    Substrate& sub_;
    double lambda_;
    bool track_types_;
    rng_t rng_;
    double time_ = 0.0;
    std::optional<double> pending_;
    std::vector<std::uint8_t> infected_;
    std::vector<std::uint32_t> inf_nb_;  // infected neighbors with multiplicity, loops excluded
    std::vector<std::uint32_t> list_pos_;
    std::vector<std::uint32_t> infected_list_;
    std::vector<std::uint64_t> masks_;
    FenwickSampler pressure_;  // weight = inf_nb on healthy vertices
    FenwickSampler interior_;  // weight = inf_nb on infected vertices (type tracking only)
};

struct SimulateOptions {
    double horizon = 10.0;
    std::vector<double> grid;       // times at which |xi_t| is sampled
    bool record_jumps = false;      // store per-event deltas (small graphs)
};

struct Trajectory {
    std::vector<std::uint32_t> initial;
    std::vector<double> jump_times;
    std::vector<std::int32_t> deltas;  // +(v+1) infection of v, -(v+1) recovery of v
    std::vector<double> grid;
    std::vector<std::uint32_t> grid_counts;
    double end_time = 0.0;
    bool extinct = false;
    double extinction_time = std::numeric_limits<double>::infinity();
    std::size_t final_count = 0;
};

template <class Substrate>
Trajectory simulate_on(Substrate& sub, const std::vector<std::uint32_t>& initial,
                       ProcessParams params, const SimulateOptions& opt, std::uint64_t seed) {
    NextEventEngine<Substrate> engine(sub, params, seed);
    for (std::uint32_t v : initial) engine.force_infect(v);

    Trajectory traj;
    traj.initial = initial;
    traj.grid = opt.grid;
    traj.grid_counts.reserve(opt.grid.size());
    std::size_t gi = 0;

    for (;;) {
        const double t_next = engine.peek_next_time();
        while (gi < opt.grid.size() && opt.grid[gi] <= std::min(t_next, opt.horizon) &&
               opt.grid[gi] <= opt.horizon) {
            traj.grid_counts.push_back(static_cast<std::uint32_t>(engine.infected_count()));
            ++gi;
        }
        if (t_next > opt.horizon) break;
        const Event e = engine.advance();
        if (opt.record_jumps) {
            traj.jump_times.push_back(e.time);
            const std::uint32_t v = e.kind == EventKind::recovery ? e.source : e.target;
            traj.deltas.push_back(e.kind == EventKind::recovery
                                      ? -static_cast<std::int32_t>(v + 1)
                                      : static_cast<std::int32_t>(v + 1));
        }
        if (engine.extinct()) {
            traj.extinct = true;
            traj.extinction_time = e.time;
            while (gi < opt.grid.size() && opt.grid[gi] <= opt.horizon) {
                traj.grid_counts.push_back(0);
                ++gi;
            }
            break;
        }
    }
    traj.end_time = traj.extinct ? traj.extinction_time : opt.horizon;
    traj.final_count = engine.infected_count();
    return traj;
}

inline Trajectory simulate(const Multigraph& g, const std::vector<std::uint32_t>& initial,
                           ProcessParams params, const SimulateOptions& opt, std::uint64_t seed) {
    GraphSubstrate sub{g};
    return simulate_on(sub, initial, params, opt, seed);
}

/* Expected time to extinction, Monte Carlo. Horizon-censored runs report their
   censoring in `censored`; corpus graphs go extinct almost surely well before
   sane horizons. */
struct ExtinctionEstimate {
    double mean = 0.0;
    double stderr_ = 0.0;
    std::size_t censored = 0;
};

inline ExtinctionEstimate estimate_extinction_time(const Multigraph& g,
                                                   const std::vector<std::uint32_t>& initial,
                                                   ProcessParams params, double horizon,
                                                   std::size_t replicas, std::uint64_t seed) {
    std::vector<double> taus;
    taus.reserve(replicas);
    std::size_t censored = 0;
    for (std::size_t r = 0; r < replicas; ++r) {
        GraphSubstrate sub{g};
        NextEventEngine<GraphSubstrate> engine(sub, params, replica_seed(seed, r));
        for (std::uint32_t v : initial) engine.force_infect(v);
        while (!engine.extinct() && engine.peek_next_time() <= horizon) engine.advance();
        if (engine.extinct()) {
            taus.push_back(engine.time());
        } else {
            taus.push_back(horizon);
            ++censored;
        }
    }
    ExtinctionEstimate est;
    double sum = 0.0;
    for (double x : taus) sum += x;
    est.mean = sum / static_cast<double>(taus.size());
    double ss = 0.0;
    for (double x : taus) ss += (x - est.mean) * (x - est.mean);
    est.stderr_ = taus.size() > 1
                      ? std::sqrt(ss / (static_cast<double>(taus.size() - 1) * taus.size()))
                      : 0.0;
    est.censored = censored;
    return est;
}

/* Reinfection times at a marked vertex that starts infected: the k-th time it
   transitions healthy -> infected (the seeding at t=0 is not counted). */
struct ReinfectionRecord {
    std::vector<double> times;
    bool extinct = false;
    double extinction_time = std::numeric_limits<double>::infinity();
    double end_time = 0.0;

    bool survived_past(double t) const { return !(extinct && extinction_time <= t); }

    /* Reinfection times strictly after t0, oldest first. */
    std::vector<double> times_after(double t0) const {
        std::vector<double> out;
        for (double t : times)
            if (t > t0) out.push_back(t);
        return out;
    }
};

/* k_target counts only reinfections strictly after count_from; everything is
   still recorded, so early activity stays visible to the caller. */
template <class Substrate>
ReinfectionRecord record_reinfections_on(Substrate& sub, std::uint32_t marked,
                                         ProcessParams params, std::size_t k_target,
                                         double horizon, double stop_floor, std::uint64_t seed,
                                         std::size_t certify_alive = 0, double count_from = 0.0) {
    NextEventEngine<Substrate> engine(sub, params, seed);
    engine.force_infect(marked);
    ReinfectionRecord rec;
    std::size_t counted = 0;
    for (;;) {
        /* Once the quota is met the run only has to witness survival to the
           floor; an infected count of certify_alive makes extinction before
           any fixed floor vanishingly unlikely, so stop early then. */
        const bool certified =
            certify_alive > 0 && engine.infected_count() >= certify_alive;
        if (counted >= k_target && (engine.time() >= stop_floor || certified)) break;
        const double t_next = engine.peek_next_time();
        if (t_next > horizon) break;
        const Event e = engine.advance();
        if (e.kind == EventKind::infection && e.target == marked) {
            rec.times.push_back(e.time);
            if (e.time > count_from) ++counted;
        }
        if (engine.extinct()) {
            rec.extinct = true;
            rec.extinction_time = e.time;
            break;
        }
    }
    rec.end_time = engine.extinct() ? rec.extinction_time : std::min(engine.time(), horizon);
    return rec;
}

inline ReinfectionRecord record_reinfections(const Multigraph& g, std::uint32_t marked,
                                             ProcessParams params, std::size_t k_target,
                                             double horizon, double stop_floor, std::uint64_t seed,
                                             std::size_t certify_alive = 0,
                                             double count_from = 0.0) {
    GraphSubstrate sub{g};
    return record_reinfections_on(sub, marked, params, k_target, horizon, stop_floor, seed,
                                  certify_alive, count_from);
}

/* Pre-sampled event structure: per edge instance a Poisson(lambda) stream, per
   vertex a Poisson(1) recovery stream, on [0, horizon]. Replays from any
   initial set share the structure, which yields the coupling, additivity and
   duality properties checked in the tests. Ties are broken by (time, kind,
   index); simultaneous distinct times have probability zero. */
struct EventLog {
    struct Entry {
        double time;
        std::uint8_t is_edge;  // 0: recovery at index, 1: edge instance index fires
        std::uint32_t index;
    };

    double horizon = 0.0;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> edge_instances;
    std::vector<Entry> entries;  // sorted

    static EventLog sample(const Multigraph& g, ProcessParams params, double horizon,
                           std::uint64_t seed) {
        EventLog log;
        log.horizon = horizon;
        for (const Multigraph::Edge& e : g.edges)
            for (std::uint32_t k = 0; k < e.mult; ++k) log.edge_instances.emplace_back(e.u, e.v);
        rng_t rng(seed);
        for (std::uint32_t v = 0; v < g.n; ++v)
            for (double t = exp_rv(rng, 1.0); t <= horizon; t += exp_rv(rng, 1.0))
                log.entries.push_back({t, 0, v});
        if (params.lambda > 0.0) {
            for (std::uint32_t i = 0; i < log.edge_instances.size(); ++i)
                for (double t = exp_rv(rng, params.lambda); t <= horizon;
                     t += exp_rv(rng, params.lambda))
                    log.entries.push_back({t, 1, i});
        }
        std::sort(log.entries.begin(), log.entries.end(), [](const Entry& a, const Entry& b) {
            if (a.time != b.time) return a.time < b.time;
            if (a.is_edge != b.is_edge) return a.is_edge < b.is_edge;
            return a.index < b.index;
        });
        return log;
    }
};

/* Replay the log from an initial set, optionally restricted to a subset of
   edge instances (the subgraph process on the same structure). The observer
   receives (time, vertex, became_infected) for every state flip. */
template <class Observer>
std::vector<std::uint8_t> replay_event_log(const Multigraph& g, const EventLog& log,
                                           const std::vector<std::uint32_t>& initial,
                                           const std::vector<std::uint8_t>* edge_enabled,
                                           double until, Observer&& observe) {
    std::vector<std::uint8_t> inf(g.n, 0);
    for (std::uint32_t v : initial) inf[v] = 1;
    for (const EventLog::Entry& e : log.entries) {
        if (e.time > until) break;
        if (e.is_edge) {
            if (edge_enabled && !(*edge_enabled)[e.index]) continue;
            const auto [u, v] = log.edge_instances[e.index];
            if (u == v) continue;
            if (inf[u] && !inf[v]) {
                inf[v] = 1;
                observe(e.time, v, true);
            } else if (inf[v] && !inf[u]) {
                inf[u] = 1;
                observe(e.time, u, true);
            }
        } else {
            if (inf[e.index]) {
                inf[e.index] = 0;
                observe(e.time, e.index, false);
            }
        }
    }
    return inf;
}

inline std::vector<std::uint8_t> replay_event_log(const Multigraph& g, const EventLog& log,
                                                  const std::vector<std::uint32_t>& initial,
                                                  double until) {
    return replay_event_log(g, log, initial, nullptr, until,
                            [](double, std::uint32_t, bool) {});
}

/* Self-duality probe: hat p_AB estimates P(xi_t^A intersects B) and hat p_BA
   the reversed quantity, on independent replicas; returns the two-proportion
   z-score (0 when both proportions are degenerate). */
struct DualityResult {
    double p_ab = 0.0;
    double p_ba = 0.0;
    double z = 0.0;
    std::size_t replicas = 0;
};

inline DualityResult duality_check(const Multigraph& g, const std::vector<std::uint32_t>& a,
                                   const std::vector<std::uint32_t>& b, ProcessParams params,
                                   double t, std::size_t replicas, std::uint64_t seed) {
    auto hits = [&](const std::vector<std::uint32_t>& from, const std::vector<std::uint32_t>& probe,
                    std::uint64_t salt) {
        std::size_t count = 0;
        for (std::size_t r = 0; r < replicas; ++r) {
            const EventLog log = EventLog::sample(g, params, t, replica_seed(seed, r, salt));
            const std::vector<std::uint8_t> inf = replay_event_log(g, log, from, t);
            for (std::uint32_t v : probe) {
                if (inf[v]) {
                    ++count;
                    break;
                }
            }
        }
        return count;
    };
    const std::size_t hit_ab = hits(a, b, 1);
    const std::size_t hit_ba = hits(b, a, 2);
    DualityResult res;
    res.replicas = replicas;
    res.p_ab = static_cast<double>(hit_ab) / static_cast<double>(replicas);
    res.p_ba = static_cast<double>(hit_ba) / static_cast<double>(replicas);
    const double pooled =
        static_cast<double>(hit_ab + hit_ba) / static_cast<double>(2 * replicas);
    if (pooled > 0.0 && pooled < 1.0) {
        const double se = std::sqrt(pooled * (1.0 - pooled) * 2.0 / static_cast<double>(replicas));
        res.z = (res.p_ab - res.p_ba) / se;
    }
    return res;
}

/* k staggered copies on one shared event structure: type i is seeded at the
   root at time i. Marks ride along infections and merge on shared edge
   events, so a type is alive exactly when some currently infected vertex
   carries its bit. Requires k <= 64 and horizon > k. */
struct MultiTypeResult {
    std::uint32_t survivors = 0;
    std::uint64_t alive_bits = 0;
};

template <class Substrate>
MultiTypeResult multi_type_survivors_on(Substrate& sub, ProcessParams params, std::uint32_t k,
                                        double horizon, std::uint64_t seed) {
    if (k < 1 || k > 64) throw std::invalid_argument("multi_type_survivors: need 1 <= k <= 64");
    if (horizon <= static_cast<double>(k))
        throw std::invalid_argument("multi_type_survivors: horizon must exceed k");
    NextEventEngine<Substrate> engine(sub, params, seed, /*track_types=*/true);
    std::uint32_t next_seed = 1;
    for (;;) {
        const double t_next = engine.peek_next_time();
        const double t_seed = next_seed <= k ? static_cast<double>(next_seed)
                                             : std::numeric_limits<double>::infinity();
        if (t_seed <= t_next && t_seed <= horizon) {
            engine.jump_to(t_seed);
            engine.force_infect(sub.root(), std::uint64_t{1} << (next_seed - 1));
            ++next_seed;
            continue;
        }
        if (t_next > horizon) break;
        engine.advance();
        if (engine.extinct() && next_seed > k) break;
    }
    MultiTypeResult res;
    res.alive_bits = engine.alive_mask();
    res.survivors = static_cast<std::uint32_t>(std::popcount(res.alive_bits));
    return res;
}

}  // namespace cpreg
