#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "cpreg/parallel.hpp"
#include "cpreg/stats.hpp"
#include "cpreg/tree.hpp"

namespace cpreg {

inline std::vector<double> uniform_grid(double horizon, double step) {
    if (horizon <= 0.0 || step <= 0.0)
        throw std::invalid_argument("uniform_grid: need positive horizon and step");
    std::vector<double> grid;
    for (double t = 0.0; t <= horizon + 1e-12; t += step) grid.push_back(std::min(t, horizon));
    if (grid.back() < horizon) grid.push_back(horizon);
    return grid;
}

struct EstimatorOptions {
    double grid_step = 0.5;
    unsigned threads = 1;
    std::uint64_t node_budget = 10'000'000;
    std::size_t bootstrap = 100;
};

namespace detail {

/* Per-replica |xi_t| rows on a shared grid; the backbone of the growth and
   moment estimators. Throws BudgetExceeded if any replica hits the budget. */
struct GridRuns {
    std::vector<double> grid;
    std::vector<std::uint32_t> counts;    // replicas x grid, row-major
    std::vector<std::uint32_t> history;   // same layout
    std::vector<std::uint32_t> pioneers;  // same layout
    std::size_t replicas = 0;

    const std::uint32_t* row(std::size_t r) const { return counts.data() + r * grid.size(); }
};

inline GridRuns run_grid_replicas(std::uint32_t d, ProcessParams params, double horizon,
                                  std::size_t replicas, std::uint64_t seed, bool severed,
                                  const EstimatorOptions& opt) {
    GridRuns runs;
    runs.grid = uniform_grid(horizon, opt.grid_step);
    runs.replicas = replicas;
    const std::size_t g = runs.grid.size();
    runs.counts.assign(replicas * g, 0);
    runs.history.assign(replicas * g, 0);
    runs.pioneers.assign(replicas * g, 0);
    parallel_replicas(replicas, opt.threads, [&](std::size_t r) {
        TreeRunOptions tro;
        tro.horizon = horizon;
        tro.grid = runs.grid;
        tro.severed = severed;
        tro.node_budget = opt.node_budget;
        const TreeRun run = simulate_tree(d, params, tro, replica_seed(seed, r));
        if (run.aborted)
            throw BudgetExceeded("estimator: replica " + std::to_string(r) + " hit node budget");
        for (std::size_t i = 0; i < g; ++i) {
            runs.counts[r * g + i] = run.xi[i];
            runs.history[r * g + i] = run.history[i];
            runs.pioneers[r * g + i] = run.pioneers[i];
        }
    });
    return runs;
}

inline std::vector<std::size_t> window_indices(const std::vector<double>& grid, double lo,
                                               double hi) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < grid.size(); ++i)
        if (grid[i] >= lo - 1e-12 && grid[i] <= hi + 1e-12) idx.push_back(i);
    return idx;
}

}  // namespace detail

/* Exponential growth rate of the unconditional mean population on the
   d-regular tree: OLS slope of log E|xi_t| over the late window
   [horizon/2, horizon]. The standard error is a replica bootstrap. */
struct GrowthEstimate {
    double c_hat = 0.0;
    double stderr_ = 0.0;
    double window_lo = 0.0;
    double window_hi = 0.0;
    std::size_t replicas = 0;
    std::vector<double> grid;
    std::vector<double> mean_xi;
    std::vector<double> mean_history;
};

inline GrowthEstimate estimate_c_lambda(std::uint32_t d, ProcessParams params, double horizon,
                                        std::size_t replicas, std::uint64_t seed,
                                        const EstimatorOptions& opt = {}) {
    if (replicas < 2) throw std::invalid_argument("estimate_c_lambda: need replicas >= 2");
    const detail::GridRuns runs =
        detail::run_grid_replicas(d, params, horizon, replicas, seed, false, opt);
    const std::size_t g = runs.grid.size();

    GrowthEstimate est;
    est.window_lo = horizon / 2.0;
    est.window_hi = horizon;
    est.replicas = replicas;
    est.grid = runs.grid;
    est.mean_xi.assign(g, 0.0);
    est.mean_history.assign(g, 0.0);
    for (std::size_t r = 0; r < replicas; ++r)
        for (std::size_t i = 0; i < g; ++i) {
            est.mean_xi[i] += runs.counts[r * g + i];
            est.mean_history[i] += runs.history[r * g + i];
        }
    for (std::size_t i = 0; i < g; ++i) {
        est.mean_xi[i] /= static_cast<double>(replicas);
        est.mean_history[i] /= static_cast<double>(replicas);
    }

    const std::vector<std::size_t> win =
        detail::window_indices(runs.grid, est.window_lo, est.window_hi);
    if (win.size() < 2) throw std::invalid_argument("estimate_c_lambda: window too narrow");
    std::vector<double> xs, ys;
    for (std::size_t i : win) {
        if (est.mean_xi[i] <= 0.0)
            throw std::runtime_error("estimate_c_lambda: mean population vanished in window");
        xs.push_back(runs.grid[i]);
        ys.push_back(std::log(est.mean_xi[i]));
    }
    est.c_hat = ols_fit(xs, ys).slope;

    rng_t boot_rng(replica_seed(seed, 0, /*salt=*/0xb007));
    std::vector<double> slopes;
    slopes.reserve(opt.bootstrap);
    std::vector<double> bys(win.size());
    for (std::size_t b = 0; b < opt.bootstrap && slopes.size() < opt.bootstrap; ++b) {
        std::vector<double> sums(win.size(), 0.0);
        for (std::size_t r = 0; r < replicas; ++r) {
            const std::size_t pick = uniform_below(boot_rng, replicas);
            for (std::size_t w = 0; w < win.size(); ++w)
                sums[w] += runs.counts[pick * g + win[w]];
        }
        bool ok = true;
        for (std::size_t w = 0; w < win.size(); ++w) {
            if (sums[w] <= 0.0) {
                ok = false;
                break;
            }
            bys[w] = std::log(sums[w] / static_cast<double>(replicas));
        }
        if (ok) slopes.push_back(ols_fit(xs, bys).slope);
    }
    est.stderr_ = slopes.size() >= 2 ? std::sqrt(sample_variance(slopes)) : 0.0;
    return est;
}

struct SurvivalEstimate {
    double p_hat = 0.0;
    Interval ci;
    std::size_t replicas = 0;
    std::size_t survived = 0;
    std::size_t budget_hits = 0;  // counted as survivors; keep budgets generous
};

inline SurvivalEstimate estimate_survival(std::uint32_t d, ProcessParams params, double horizon,
                                          std::size_t replicas, std::uint64_t seed,
                                          bool severed = false,
                                          const EstimatorOptions& opt = {}) {
    if (replicas == 0) throw std::invalid_argument("estimate_survival: need replicas");
    std::vector<std::uint8_t> alive(replicas, 0);
    std::vector<std::uint8_t> aborted(replicas, 0);
    parallel_replicas(replicas, opt.threads, [&](std::size_t r) {
        TreeRunOptions tro;
        tro.horizon = horizon;
        tro.severed = severed;
        tro.node_budget = opt.node_budget;
        const TreeRun run = simulate_tree(d, params, tro, replica_seed(seed, r));
        alive[r] = run.alive_at_end ? 1 : 0;
        aborted[r] = run.aborted ? 1 : 0;
    });
    SurvivalEstimate est;
    est.replicas = replicas;
    for (std::size_t r = 0; r < replicas; ++r) {
        est.survived += alive[r];
        est.budget_hits += aborted[r];
    }
    est.p_hat = static_cast<double>(est.survived) / static_cast<double>(replicas);
    est.ci = wilson_interval(est.survived, replicas);
    return est;
}

/* Raw moments E|xi_t|^n for n = 1..n_max with bootstrap CIs on the fitted
   exponential rate of each moment over the late window. */
struct MomentEstimate {
    std::vector<double> grid;
    std::vector<std::vector<double>> raw_moment;  // [n-1][grid]
    std::vector<double> rate_fit;                 // per n, slope of log moment
    std::vector<Interval> rate_ci;
    double window_lo = 0.0;
    double window_hi = 0.0;
    std::uint32_t n_max = 0;
    std::size_t replicas = 0;
};

inline MomentEstimate estimate_moments(std::uint32_t d, ProcessParams params, double horizon,
                                       std::uint32_t n_max, std::size_t replicas,
                                       std::uint64_t seed, const EstimatorOptions& opt = {}) {
    if (n_max < 1 || n_max > 4) throw std::invalid_argument("estimate_moments: n_max in 1..4");
    if (replicas < 2) throw std::invalid_argument("estimate_moments: need replicas >= 2");
    const detail::GridRuns runs =
        detail::run_grid_replicas(d, params, horizon, replicas, seed, false, opt);
    const std::size_t g = runs.grid.size();

    MomentEstimate est;
    est.grid = runs.grid;
    est.n_max = n_max;
    est.replicas = replicas;
    est.window_lo = horizon / 2.0;
    est.window_hi = horizon;
    est.raw_moment.assign(n_max, std::vector<double>(g, 0.0));
    for (std::size_t r = 0; r < replicas; ++r)
        for (std::size_t i = 0; i < g; ++i) {
            const double x = runs.counts[r * g + i];
            double p = x;
            for (std::uint32_t n = 0; n < n_max; ++n) {
                est.raw_moment[n][i] += p;
                p *= x;
            }
        }
    for (std::uint32_t n = 0; n < n_max; ++n)
        for (std::size_t i = 0; i < g; ++i)
            est.raw_moment[n][i] /= static_cast<double>(replicas);

    const std::vector<std::size_t> win =
        detail::window_indices(runs.grid, est.window_lo, est.window_hi);
    if (win.size() < 2) throw std::invalid_argument("estimate_moments: window too narrow");
    std::vector<double> xs;
    for (std::size_t i : win) xs.push_back(runs.grid[i]);

    rng_t boot_rng(replica_seed(seed, 0, /*salt=*/0xb117));
    for (std::uint32_t n = 0; n < n_max; ++n) {
        std::vector<double> ys;
        for (std::size_t i : win) {
            if (est.raw_moment[n][i] <= 0.0)
                throw std::runtime_error("estimate_moments: moment vanished in window");
            ys.push_back(std::log(est.raw_moment[n][i]));
        }
        est.rate_fit.push_back(ols_fit(xs, ys).slope);

        std::vector<double> slopes;
        std::vector<double> bys(win.size());
        for (std::size_t b = 0; b < opt.bootstrap; ++b) {
            std::vector<double> sums(win.size(), 0.0);
            for (std::size_t r = 0; r < replicas; ++r) {
                const std::size_t pick = uniform_below(boot_rng, replicas);
                for (std::size_t w = 0; w < win.size(); ++w) {
                    double p = runs.counts[pick * g + win[w]];
                    for (std::uint32_t m = 0; m < n; ++m) p *= runs.counts[pick * g + win[w]];
                    sums[w] += p;
                }
            }
            bool ok = true;
            for (std::size_t w = 0; w < win.size(); ++w) {
                if (sums[w] <= 0.0) {
                    ok = false;
                    break;
                }
                bys[w] = std::log(sums[w] / static_cast<double>(replicas));
            }
            if (ok) slopes.push_back(ols_fit(xs, bys).slope);
        }
        if (slopes.size() >= 8) {
            std::sort(slopes.begin(), slopes.end());
            est.rate_ci.push_back({quantile(slopes, 0.025), quantile(slopes, 0.975)});
        } else {
            est.rate_ci.push_back({est.rate_fit.back(), est.rate_fit.back()});
        }
    }
    return est;
}

/* Conditional left-tail exceedance P(log|xi_t| <= c t - t^delta | xi_t != 0)
   at chosen times, on the full or severed tree. */
struct LeftTailEstimate {
    std::vector<double> times;
    std::vector<double> exceedance;
    std::vector<std::size_t> alive;
    double c_used = 0.0;
    double delta = 0.0;
    std::size_t replicas = 0;
};

inline LeftTailEstimate estimate_left_tail(std::uint32_t d, ProcessParams params,
                                           std::vector<double> times, double delta, double c_hat,
                                           std::size_t replicas, std::uint64_t seed,
                                           bool severed = false,
                                           const EstimatorOptions& opt = {}) {
    if (times.empty()) throw std::invalid_argument("estimate_left_tail: need times");
    std::sort(times.begin(), times.end());
    if (times.front() <= 0.0) throw std::invalid_argument("estimate_left_tail: times must be > 0");
    std::vector<std::uint32_t> counts(replicas * times.size(), 0);
    parallel_replicas(replicas, opt.threads, [&](std::size_t r) {
        TreeRunOptions tro;
        tro.horizon = times.back();
        tro.grid = times;
        tro.severed = severed;
        tro.node_budget = opt.node_budget;
        const TreeRun run = simulate_tree(d, params, tro, replica_seed(seed, r));
        if (run.aborted)
            throw BudgetExceeded("estimate_left_tail: replica hit node budget");
        for (std::size_t i = 0; i < times.size(); ++i)
            counts[r * times.size() + i] = run.xi[i];
    });
    LeftTailEstimate est;
    est.times = times;
    est.c_used = c_hat;
    est.delta = delta;
    est.replicas = replicas;
    for (std::size_t i = 0; i < times.size(); ++i) {
        const double threshold = c_hat * times[i] - std::pow(times[i], delta);
        std::size_t alive = 0, exceed = 0;
        for (std::size_t r = 0; r < replicas; ++r) {
            const std::uint32_t x = counts[r * times.size() + i];
            if (x == 0) continue;
            ++alive;
            if (std::log(static_cast<double>(x)) <= threshold) ++exceed;
        }
        est.alive.push_back(alive);
        est.exceedance.push_back(alive ? static_cast<double>(exceed) / alive : 0.0);
    }
    return est;
}

/* Mean overlap of the ever-infected sets of two independent runs sharing one
   tree (shared ids make the intersection well defined). */
struct IntersectionEstimate {
    std::vector<double> grid;
    std::vector<double> mean_intersection;
    std::size_t pairs = 0;
};

inline IntersectionEstimate estimate_history_intersection(std::uint32_t d, ProcessParams params,
                                                          double horizon, std::size_t pairs,
                                                          std::uint64_t seed,
                                                          const EstimatorOptions& opt = {}) {
    IntersectionEstimate est;
    est.grid = uniform_grid(horizon, opt.grid_step);
    est.pairs = pairs;
    const std::size_t g = est.grid.size();
    std::vector<double> acc(pairs * g, 0.0);
    parallel_replicas(pairs, opt.threads, [&](std::size_t r) {
        LazyTree tree(d, false, opt.node_budget);
        TreeRunOptions tro;
        tro.horizon = horizon;
        tro.grid = est.grid;
        tro.node_budget = opt.node_budget;
        tro.record_first_infection = true;
        const TreeRun a = simulate_tree_on(tree, params, tro, replica_seed(seed, r, 1));
        const TreeRun b = simulate_tree_on(tree, params, tro, replica_seed(seed, r, 2));
        if (a.aborted || b.aborted)
            throw BudgetExceeded("estimate_history_intersection: replica hit node budget");
        const std::size_t nodes = std::min(a.first_infection.size(), b.first_infection.size());
        for (std::size_t v = 0; v < nodes; ++v) {
            const double fa = a.first_infection[v], fb = b.first_infection[v];
            if (!std::isfinite(fa) || !std::isfinite(fb)) continue;
            const double both = std::max(fa, fb);
            for (std::size_t i = 0; i < g; ++i)
                if (est.grid[i] >= both) acc[r * g + i] += 1.0;
        }
    });
    est.mean_intersection.assign(g, 0.0);
    for (std::size_t r = 0; r < pairs; ++r)
        for (std::size_t i = 0; i < g; ++i) est.mean_intersection[i] += acc[r * g + i];
    for (std::size_t i = 0; i < g; ++i) est.mean_intersection[i] /= static_cast<double>(pairs);
    return est;
}

}  // namespace cpreg
