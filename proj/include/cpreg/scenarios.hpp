#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "cpreg/config.hpp"
#include "cpreg/cover.hpp"
#include "cpreg/csv.hpp"
#include "cpreg/estimators.hpp"
#include "cpreg/harris.hpp"
#include "cpreg/multigraph.hpp"
#include "cpreg/oracle.hpp"
#include "cpreg/parallel.hpp"
#include "cpreg/stats.hpp"
#include "cpreg/tree.hpp"

namespace cpreg {

struct RunContext {
    std::string out_dir = "out";
    std::uint64_t seed = 1;
    unsigned threads = 1;
};

struct ScenarioResult {
    std::string scenario;
    std::vector<std::pair<std::string, std::string>> files;  // name -> bytes
    nlohmann::json summary;
};

/* Small named graphs used by validation scenarios and tests. */
inline Multigraph corpus_graph(const std::string& name) {
    using E = Multigraph::Edge;
    if (name == "isolated") return Multigraph::from_edges(1, {});
    if (name == "k2") return Multigraph::from_edges(2, {E{0, 1, 1}});
    if (name == "p3") return Multigraph::from_edges(3, {E{0, 1, 1}, E{1, 2, 1}});
    if (name == "triangle")
        return Multigraph::from_edges(3, {E{0, 1, 1}, E{1, 2, 1}, E{0, 2, 1}});
    if (name == "k4")
        return Multigraph::from_edges(
            4, {E{0, 1, 1}, E{0, 2, 1}, E{0, 3, 1}, E{1, 2, 1}, E{1, 3, 1}, E{2, 3, 1}});
    if (name == "star3")
        return Multigraph::from_edges(4, {E{0, 1, 1}, E{0, 2, 1}, E{0, 3, 1}});
    throw ConfigError("unknown corpus graph: " + name);
}

inline const std::vector<std::string>& corpus_graph_names() {
    static const std::vector<std::string> names = {"isolated", "k2",       "p3",
                                                   "triangle", "k4",       "star3"};
    return names;
}

namespace detail {

inline std::string csv_missing() { return ""; }

inline std::string csv_num(double v) {
    return std::isnan(v) ? csv_missing() : format_double(v);
}

inline void require(bool ok, const std::string& message) {
    if (!ok) throw ConfigError(message);
}

inline std::uint32_t read_degree(const Config& cfg) {
    const std::uint32_t d = cfg.get_u32("d", 3);
    require(d >= 3 && d <= 16, "d must be in [3, 16]");
    return d;
}

inline double read_lambda(const Config& cfg) {
    const double lambda = cfg.get_double("lambda");
    require(lambda >= 0.0 && lambda <= 100.0, "lambda must be in [0, 100]");
    return lambda;
}

}  // namespace detail

/* ---------------------------------------------------------------- */
/*  reinfection_scaling: milestone scaling on the configuration model */

struct ReinfectionScalingParams {
    std::uint32_t d = 3;
    double lambda = 0.0;
    double epsilon = 0.5;
    std::vector<std::uint32_t> n_grid;
    std::size_t replicas = 0;
    double horizon = 400.0;
    std::size_t certify_alive = 256;
    double c_hat = std::numeric_limits<double>::quiet_NaN();  // optional echo

    static ReinfectionScalingParams read(const Config& cfg) {
        ReinfectionScalingParams p;
        p.d = detail::read_degree(cfg);
        p.lambda = detail::read_lambda(cfg);
        p.epsilon = cfg.get_double("epsilon", 0.5);
        detail::require(p.epsilon > 0.0 && p.epsilon < 1.0, "epsilon must be in (0, 1)");
        p.n_grid = cfg.get_u32_list("n_grid");
        for (std::uint32_t n : p.n_grid) {
            detail::require(n >= 16, "n_grid entries must be >= 16");
            detail::require((static_cast<std::uint64_t>(n) * p.d) % 2 == 0,
                            "n*d must be even for every n_grid entry");
        }
        p.replicas = cfg.get_u64("replicas");
        detail::require(p.replicas >= 1, "replicas must be >= 1");
        p.horizon = cfg.get_double("horizon", 400.0);
        detail::require(p.horizon > 0.0, "horizon must be > 0");
        p.certify_alive = cfg.get_u64("certify_alive", 256);
        p.c_hat = cfg.get_double("c_hat", std::numeric_limits<double>::quiet_NaN());
        return p;
    }
};

inline std::uint32_t reinfection_index(std::uint32_t n, double epsilon) {
    return static_cast<std::uint32_t>(std::floor(std::pow(std::log(static_cast<double>(n)),
                                                          epsilon)));
}

inline double conditioning_floor(std::uint32_t n) {
    return std::max(10.0, std::log(std::log(static_cast<double>(n))));
}

inline ScenarioResult run_reinfection_scaling(const Config& cfg, const RunContext& ctx,
                                       bool dry_run = false) {
    const ReinfectionScalingParams p = ReinfectionScalingParams::read(cfg);
    ScenarioResult res;
    res.scenario = "reinfection_scaling";
    if (dry_run) return res;

    /* Milestones count reinfections strictly after the conditioning floor:
       survivors pick up a handful of early reinfections while the marked
       vertex's neighbourhood is still hot, and at these sizes those would
       swamp a small milestone index.  The floor separates the initial local
       flurry from the reinfections the size-scaling statement is about.
       A shared reference milestone (the largest index on the grid) is also
       recorded for every n, so the slope can be read off medians whose index
       does not jump across the grid. */
    const std::uint32_t k_ref = [&] {
        std::uint32_t m = 1;
        for (std::uint32_t n : p.n_grid) m = std::max(m, reinfection_index(n, p.epsilon));
        return m;
    }();
    CsvWriter csv({"n", "replica", "i_k", "i_ref", "survived_cond"});
    nlohmann::json per_n = nlohmann::json::array();
    std::vector<double> log_ns, medians, medians_ref;
    std::vector<std::uint32_t> ks;
    std::vector<std::vector<double>> pooled_by_n;
    bool warning = false;

    for (const std::uint32_t n : p.n_grid) {
        const std::uint32_t k = reinfection_index(n, p.epsilon);
        const double floor_t = conditioning_floor(n);
        const std::size_t k_collect = std::max(k, k_ref);
        std::vector<double> i_k(p.replicas, std::numeric_limits<double>::quiet_NaN());
        std::vector<double> i_ref(p.replicas, std::numeric_limits<double>::quiet_NaN());
        std::vector<std::uint8_t> survived(p.replicas, 0);
        parallel_replicas(p.replicas, ctx.threads, [&](std::size_t r) {
            const Multigraph g = sample_configuration(
                n, p.d, replica_seed(ctx.seed, r, 2ULL * n));
            const ReinfectionRecord rec = record_reinfections(
                g, 0, ProcessParams{p.lambda}, k_collect, p.horizon, floor_t,
                replica_seed(ctx.seed, r, 2ULL * n + 1), p.certify_alive, floor_t);
            survived[r] = rec.survived_past(floor_t) ? 1 : 0;
            if (!survived[r]) return;
            const std::vector<double> post = rec.times_after(floor_t);
            if (post.size() >= k) i_k[r] = post[k - 1];
            if (post.size() >= k_ref) i_ref[r] = post[k_ref - 1];
        });

        std::vector<double> kept, kept_ref;
        std::size_t censored = 0;
        for (std::size_t r = 0; r < p.replicas; ++r) {
            csv.append_row({std::to_string(n), std::to_string(r), detail::csv_num(i_k[r]),
                            detail::csv_num(i_ref[r]), survived[r] ? "1" : "0"});
            if (survived[r]) {
                if (std::isnan(i_k[r]))
                    ++censored;
                else
                    kept.push_back(i_k[r]);
                if (!std::isnan(i_ref[r])) kept_ref.push_back(i_ref[r]);
            }
        }
        const double med = kept.empty() ? std::numeric_limits<double>::quiet_NaN()
                                        : median(kept);
        const double med_ref = kept_ref.empty() ? std::numeric_limits<double>::quiet_NaN()
                                                : median(kept_ref);
        if (kept.size() < 100) warning = true;
        per_n.push_back({{"n", n},
                         {"k", k},
                         {"attempts", p.replicas},
                         {"survivors", kept.size() + censored},
                         {"censored", censored},
                         {"median_i_k", med},
                         {"median_i_ref", med_ref}});
        if (!kept.empty()) {
            log_ns.push_back(std::log(static_cast<double>(n)));
            medians.push_back(med);
            medians_ref.push_back(med_ref);
            ks.push_back(k);
            pooled_by_n.push_back(std::move(kept));
        }
    }

    res.summary["per_n"] = per_n;
    res.summary["warning_low_survivors"] = warning;
    res.summary["epsilon"] = p.epsilon;
    res.summary["lambda"] = p.lambda;
    res.summary["reference_milestone"] = k_ref;
    if (!std::isnan(p.c_hat)) res.summary["c_hat"] = p.c_hat;
    if (log_ns.size() >= 2) {
        const LinearFit fit = ols_fit(log_ns, medians);
        res.summary["slope_vs_log_n"] = fit.slope;
        res.summary["slope_stderr"] = fit.slope_se;
        res.summary["spearman_vs_log_n"] = spearman(log_ns, medians);
        const LinearFit fit_ref = ols_fit(log_ns, medians_ref);
        res.summary["slope_fixed_milestone"] = fit_ref.slope;
        res.summary["slope_fixed_milestone_stderr"] = fit_ref.slope_se;

        /* Equal k at different n makes the medians exchangeable, so the
           growth check ranks k-groups of pooled samples, not raw points. */
        std::vector<double> group_k, group_median;
        std::vector<double> pool;
        for (std::size_t i = 0; i < ks.size();) {
            std::size_t j = i;
            pool.clear();
            while (j < ks.size() && ks[j] == ks[i]) {
                pool.insert(pool.end(), pooled_by_n[j].begin(), pooled_by_n[j].end());
                ++j;
            }
            group_k.push_back(ks[i]);
            group_median.push_back(median(pool));
            i = j;
        }
        res.summary["k_groups"] = group_k;
        res.summary["k_group_medians"] = group_median;
        res.summary["spearman_k_grouped"] =
            group_k.size() >= 2 ? spearman(group_k, group_median) : 0.0;
    }
    res.files.emplace_back("reinfections.csv", csv.content());
    return res;
}

/* ---------------------------------------------------------------- */
/*  calibrate_lambdas: growth rate and survival across a lambda grid */

struct CalibrateParams {
    std::uint32_t d = 3;
    std::vector<double> lambda_grid;
    double horizon = 12.0;
    std::size_t replicas = 2000;
    double grid_step = 0.5;
    std::uint64_t node_budget = 10'000'000;
    std::size_t bootstrap = 100;

    static CalibrateParams read(const Config& cfg) {
        CalibrateParams p;
        p.d = detail::read_degree(cfg);
        p.lambda_grid = cfg.get_double_list("lambda_grid");
        for (double l : p.lambda_grid)
            detail::require(l >= 0.0 && l <= 100.0, "lambda_grid entries must be in [0, 100]");
        p.horizon = cfg.get_double("horizon", 12.0);
        detail::require(p.horizon > 0.0, "horizon must be > 0");
        p.replicas = cfg.get_u64("replicas", 2000);
        detail::require(p.replicas >= 2, "replicas must be >= 2");
        p.grid_step = cfg.get_double("grid_step", 0.5);
        detail::require(p.grid_step > 0.0, "grid_step must be > 0");
        p.node_budget = cfg.get_u64("node_budget", 10'000'000);
        p.bootstrap = cfg.get_u64("bootstrap", 100);
        return p;
    }
};

inline ScenarioResult run_calibrate_lambdas(const Config& cfg, const RunContext& ctx,
                                            bool dry_run = false) {
    const CalibrateParams p = CalibrateParams::read(cfg);
    ScenarioResult res;
    res.scenario = "calibrate_lambdas";
    if (dry_run) return res;

    EstimatorOptions opt;
    opt.grid_step = p.grid_step;
    opt.threads = ctx.threads;
    opt.node_budget = p.node_budget;
    opt.bootstrap = p.bootstrap;

    CsvWriter csv({"lambda", "c_hat", "c_stderr", "p_survive", "p_lo", "p_hi"});
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < p.lambda_grid.size(); ++i) {
        const double lambda = p.lambda_grid[i];
        double c_hat = std::numeric_limits<double>::quiet_NaN();
        double c_se = std::numeric_limits<double>::quiet_NaN();
        try {
            const GrowthEstimate g = estimate_c_lambda(
                p.d, ProcessParams{lambda}, p.horizon, p.replicas,
                replica_seed(ctx.seed, i, 11), opt);
            c_hat = g.c_hat;
            c_se = g.stderr_;
        } catch (const BudgetExceeded&) {
            throw;
        } catch (const std::exception&) {
            // all replicas extinct inside the fit window; leave the rate empty
        }
        const SurvivalEstimate s =
            estimate_survival(p.d, ProcessParams{lambda}, p.horizon, p.replicas,
                              replica_seed(ctx.seed, i, 12), /*severed=*/false, opt);
        csv.append_row({format_double(lambda), detail::csv_num(c_hat), detail::csv_num(c_se),
                        format_double(s.p_hat), format_double(s.ci.lo),
                        format_double(s.ci.hi)});
        rows.push_back({{"lambda", lambda},
                        {"c_hat", c_hat},
                        {"c_stderr", c_se},
                        {"p_survive", s.p_hat},
                        {"p_lo", s.ci.lo},
                        {"p_hi", s.ci.hi}});
    }
    res.summary["rows"] = rows;
    res.summary["horizon"] = p.horizon;
    res.summary["replicas"] = p.replicas;
    res.files.emplace_back("calibration.csv", csv.content());
    return res;
}

/* ---------------------------------------------------------------- */
/*  clash_time: first repeat-label time against graph size */

struct ClashTimeParams {
    std::uint32_t d = 3;
    double lambda = 0.0;
    std::vector<std::uint32_t> n_grid;
    std::size_t replicas = 400;
    double horizon = 200.0;
    double c_hat = std::numeric_limits<double>::quiet_NaN();

    static ClashTimeParams read(const Config& cfg) {
        ClashTimeParams p;
        p.d = detail::read_degree(cfg);
        p.lambda = detail::read_lambda(cfg);
        p.n_grid = cfg.get_u32_list("n_grid");
        for (std::uint32_t n : p.n_grid) {
            detail::require(n >= 16, "n_grid entries must be >= 16");
            detail::require((static_cast<std::uint64_t>(n) * p.d) % 2 == 0,
                            "n*d must be even for every n_grid entry");
        }
        p.replicas = cfg.get_u64("replicas", 400);
        detail::require(p.replicas >= 1, "replicas must be >= 1");
        p.horizon = cfg.get_double("horizon", 200.0);
        detail::require(p.horizon > 0.0, "horizon must be > 0");
        p.c_hat = cfg.get_double("c_hat", std::numeric_limits<double>::quiet_NaN());
        return p;
    }
};

inline ScenarioResult run_clash_time(const Config& cfg, const RunContext& ctx,
                                     bool dry_run = false) {
    const ClashTimeParams p = ClashTimeParams::read(cfg);
    ScenarioResult res;
    res.scenario = "clash_time";
    if (dry_run) return res;

    const FirstClashDistribution dist = first_clash_time(
        p.n_grid, p.d, ProcessParams{p.lambda}, p.replicas, ctx.seed, p.horizon);

    CsvWriter csv({"replica", "n", "first_clash_time", "labels_at_clash", "survived"});
    nlohmann::json per_n = nlohmann::json::array();
    std::vector<double> log_ns, medians;
    for (std::size_t i = 0; i < dist.n_grid.size(); ++i) {
        const std::uint32_t n = dist.n_grid[i];
        std::vector<double> times;
        std::size_t died = 0;
        for (std::size_t r = 0; r < dist.samples[i].size(); ++r) {
            const ClashSample& s = dist.samples[i][r];
            csv.append_row({std::to_string(r), std::to_string(n), detail::csv_num(s.time),
                            std::to_string(s.labels), s.survived ? "1" : "0"});
            if (!std::isnan(s.time)) times.push_back(s.time);
            if (!s.survived) ++died;
        }
        const double med =
            times.empty() ? std::numeric_limits<double>::quiet_NaN() : median(times);
        per_n.push_back({{"n", n},
                         {"clashes", times.size()},
                         {"extinct", died},
                         {"median_clash_time", med}});
        if (!times.empty()) {
            log_ns.push_back(std::log(static_cast<double>(n)));
            medians.push_back(med);
        }
    }
    res.summary["per_n"] = per_n;
    res.summary["lambda"] = p.lambda;
    if (log_ns.size() >= 2) {
        const LinearFit fit = ols_fit(log_ns, medians);
        res.summary["slope_vs_log_n"] = fit.slope;
        res.summary["slope_stderr"] = fit.slope_se;
    }
    if (!std::isnan(p.c_hat)) {
        res.summary["c_hat"] = p.c_hat;
        res.summary["expected_slope"] = 1.0 / (2.0 * p.c_hat);
    }
    res.files.emplace_back("clash_times.csv", csv.content());
    return res;
}

/* ---------------------------------------------------------------- */
/*  surviving_types: staggered multi-type seeds against matched
    single-seed survival */

struct SurvivingTypesParams {
    std::uint32_t d = 3;
    double lambda = 0.0;
    std::uint32_t k = 50;
    double t_end = 0.0;
    std::size_t replicas = 200;
    std::size_t survival_replicas = 4000;
    std::uint64_t node_budget = 10'000'000;

    static SurvivingTypesParams read(const Config& cfg) {
        SurvivingTypesParams p;
        p.d = detail::read_degree(cfg);
        p.lambda = detail::read_lambda(cfg);
        p.k = cfg.get_u32("k", 50);
        detail::require(p.k >= 1 && p.k <= 64, "k must be in [1, 64]");
        p.t_end = cfg.get_double("t_end", static_cast<double>(p.k) + 25.0);
        detail::require(p.t_end > static_cast<double>(p.k) + 1.0, "t_end must exceed k + 1");
        p.replicas = cfg.get_u64("replicas", 200);
        detail::require(p.replicas >= 2, "replicas must be >= 2");
        p.survival_replicas = cfg.get_u64("survival_replicas", 4000);
        detail::require(p.survival_replicas >= 2, "survival_replicas must be >= 2");
        p.node_budget = cfg.get_u64("node_budget", 10'000'000);
        return p;
    }
};

inline ScenarioResult run_surviving_types(const Config& cfg, const RunContext& ctx,
                                          bool dry_run = false) {
    const SurvivingTypesParams p = SurvivingTypesParams::read(cfg);
    ScenarioResult res;
    res.scenario = "surviving_types";
    if (dry_run) return res;

    std::vector<std::uint32_t> survivors(p.replicas, 0);
    parallel_replicas(p.replicas, ctx.threads, [&](std::size_t r) {
        LazyTree tree(p.d, false, p.node_budget);
        survivors[r] = multi_type_survivors_on(tree, ProcessParams{p.lambda}, p.k, p.t_end,
                                               replica_seed(ctx.seed, r, 21))
                           .survivors;
    });

    /* Marginally, type i is a single-seed process run for t_end - i; compare
       the mean survivor fraction against survival probabilities at exactly
       those durations. */
    std::vector<double> durations;
    for (std::uint32_t i = 1; i <= p.k; ++i)
        durations.push_back(p.t_end - static_cast<double>(i));
    std::sort(durations.begin(), durations.end());
    std::vector<double> alive_frac(p.survival_replicas, 0.0);
    std::vector<std::uint64_t> alive_per_duration(durations.size(), 0);
    {
        std::vector<std::vector<std::uint8_t>> alive(p.survival_replicas);
        parallel_replicas(p.survival_replicas, ctx.threads, [&](std::size_t r) {
            TreeRunOptions tro;
            tro.horizon = durations.back();
            tro.grid = durations;
            tro.node_budget = p.node_budget;
            const TreeRun run =
                simulate_tree(p.d, ProcessParams{p.lambda}, tro, replica_seed(ctx.seed, r, 22));
            if (run.aborted) throw BudgetExceeded("surviving_types: node budget hit");
            std::vector<std::uint8_t> flags(durations.size(), 0);
            for (std::size_t i = 0; i < durations.size(); ++i) flags[i] = run.xi[i] > 0;
            alive[r] = std::move(flags);
        });
        for (std::size_t r = 0; r < p.survival_replicas; ++r) {
            double sum = 0.0;
            for (std::size_t i = 0; i < durations.size(); ++i) {
                sum += alive[r][i];
                alive_per_duration[i] += alive[r][i];
            }
            alive_frac[r] = sum / static_cast<double>(durations.size());
        }
    }

    CsvWriter surv({"replica", "survivors", "k"});
    std::vector<double> frac(p.replicas, 0.0);
    for (std::size_t r = 0; r < p.replicas; ++r) {
        surv.append_row({std::to_string(r), std::to_string(survivors[r]), std::to_string(p.k)});
        frac[r] = static_cast<double>(survivors[r]) / p.k;
    }
    CsvWriter single({"duration", "p_alive"});
    for (std::size_t i = 0; i < durations.size(); ++i)
        single.append_row({format_double(durations[i]),
                           format_double(static_cast<double>(alive_per_duration[i]) /
                                         static_cast<double>(p.survival_replicas))});

    const double s_bar = mean(frac);
    const double s_se = std_error_of_mean(frac);
    const double p_bar = mean(alive_frac);
    const double p_se = std_error_of_mean(alive_frac);
    const double z = (s_bar - p_bar) / std::sqrt(s_se * s_se + p_se * p_se);
    res.summary["k"] = p.k;
    res.summary["t_end"] = p.t_end;
    res.summary["mean_survivor_fraction"] = s_bar;
    res.summary["survivor_fraction_stderr"] = s_se;
    res.summary["matched_survival"] = p_bar;
    res.summary["matched_survival_stderr"] = p_se;
    res.summary["z"] = z;
    res.files.emplace_back("survivors.csv", surv.content());
    res.files.emplace_back("matched_survival.csv", single.content());
    return res;
}

/* ---------------------------------------------------------------- */
/*  duality: occupancy symmetry between seeded set and probe set */

struct DualityParams {
    std::string graph = "p3";
    double lambda = 1.0;
    std::vector<double> t_list{0.5, 1.0, 2.0};
    std::size_t replicas = 100'000;

    static DualityParams read(const Config& cfg) {
        DualityParams p;
        p.graph = cfg.get_string("graph", "p3");
        corpus_graph(p.graph);  // validates the name
        p.lambda = detail::read_lambda(cfg);
        if (cfg.has("t_list")) p.t_list = cfg.get_double_list("t_list");
        for (double t : p.t_list) detail::require(t > 0.0, "t_list entries must be > 0");
        p.replicas = cfg.get_u64("replicas", 100'000);
        detail::require(p.replicas >= 2, "replicas must be >= 2");
        return p;
    }
};

inline std::string join_set(const std::vector<std::uint32_t>& s) {
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ' ';
        out += std::to_string(s[i]);
    }
    return out;
}

inline ScenarioResult run_duality(const Config& cfg, const RunContext& ctx,
                                  bool dry_run = false) {
    const DualityParams p = DualityParams::read(cfg);
    ScenarioResult res;
    res.scenario = "duality";
    if (dry_run) return res;

    const Multigraph g = corpus_graph(p.graph);
    std::vector<std::uint32_t> all(g.n);
    for (std::uint32_t v = 0; v < g.n; ++v) all[v] = v;
    const std::vector<std::pair<std::vector<std::uint32_t>, std::vector<std::uint32_t>>> pairs =
        {{{0}, {g.n - 1}}, {{0}, all}, {all, {g.n - 1}}};

    CsvWriter csv({"graph", "t", "a_set", "b_set", "p_ab", "p_ba", "z", "replicas"});
    double max_abs_z = 0.0;
    std::size_t index = 0;
    for (const double t : p.t_list)
        for (const auto& [a, b] : pairs) {
            const DualityResult d = duality_check(g, a, b, ProcessParams{p.lambda}, t,
                                                  p.replicas, replica_seed(ctx.seed, index, 31));
            ++index;
            csv.append_row({p.graph, format_double(t), join_set(a), join_set(b),
                            format_double(d.p_ab), format_double(d.p_ba), format_double(d.z),
                            std::to_string(p.replicas)});
            max_abs_z = std::max(max_abs_z, std::abs(d.z));
        }
    res.summary["graph"] = p.graph;
    res.summary["lambda"] = p.lambda;
    res.summary["max_abs_z"] = max_abs_z;
    res.files.emplace_back("duality.csv", csv.content());
    return res;
}

/* ---------------------------------------------------------------- */
/*  growth_concentration: growth rate, moments, left tail, overlap */

struct GrowthConcentrationParams {
    std::uint32_t d = 3;
    double lambda = 0.0;
    double horizon = 12.0;
    std::size_t replicas = 4000;
    double grid_step = 0.5;
    std::uint32_t n_moments = 3;
    double delta = 0.5;
    std::vector<double> tail_times{4.0, 8.0, 12.0};
    std::size_t tail_replicas = 4000;
    bool tail_severed = true;
    std::size_t intersection_pairs = 2000;
    std::uint64_t node_budget = 10'000'000;
    std::size_t bootstrap = 100;

    static GrowthConcentrationParams read(const Config& cfg) {
        GrowthConcentrationParams p;
        p.d = detail::read_degree(cfg);
        p.lambda = detail::read_lambda(cfg);
        p.horizon = cfg.get_double("horizon", 12.0);
        detail::require(p.horizon > 0.0, "horizon must be > 0");
        p.replicas = cfg.get_u64("replicas", 4000);
        detail::require(p.replicas >= 2, "replicas must be >= 2");
        p.grid_step = cfg.get_double("grid_step", 0.5);
        detail::require(p.grid_step > 0.0, "grid_step must be > 0");
        p.n_moments = cfg.get_u32("n_moments", 3);
        detail::require(p.n_moments >= 1 && p.n_moments <= 4, "n_moments must be in [1, 4]");
        p.delta = cfg.get_double("delta", 0.5);
        detail::require(p.delta > 0.0 && p.delta < 1.0, "delta must be in (0, 1)");
        if (cfg.has("tail_times")) p.tail_times = cfg.get_double_list("tail_times");
        for (double t : p.tail_times) detail::require(t > 0.0, "tail_times must be > 0");
        p.tail_replicas = cfg.get_u64("tail_replicas", 4000);
        p.tail_severed = cfg.get_u64("tail_severed", 1) != 0;
        p.intersection_pairs = cfg.get_u64("intersection_pairs", 2000);
        p.node_budget = cfg.get_u64("node_budget", 10'000'000);
        p.bootstrap = cfg.get_u64("bootstrap", 100);
        return p;
    }
};

inline ScenarioResult run_growth_concentration(const Config& cfg, const RunContext& ctx,
                                               bool dry_run = false) {
    const GrowthConcentrationParams p = GrowthConcentrationParams::read(cfg);
    ScenarioResult res;
    res.scenario = "growth_concentration";
    if (dry_run) return res;

    EstimatorOptions opt;
    opt.grid_step = p.grid_step;
    opt.threads = ctx.threads;
    opt.node_budget = p.node_budget;
    opt.bootstrap = p.bootstrap;
    const ProcessParams params{p.lambda};

    const GrowthEstimate growth =
        estimate_c_lambda(p.d, params, p.horizon, p.replicas, replica_seed(ctx.seed, 0, 41), opt);
    CsvWriter gcsv({"t", "mean_xi", "mean_history", "scaled_mean_xi"});
    double sand_lo = std::numeric_limits<double>::infinity();
    double sand_hi = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < growth.grid.size(); ++i) {
        const double scaled = growth.mean_xi[i] * std::exp(-growth.c_hat * growth.grid[i]);
        gcsv.append_row({format_double(growth.grid[i]), format_double(growth.mean_xi[i]),
                         format_double(growth.mean_history[i]), format_double(scaled)});
        if (growth.grid[i] >= growth.window_lo - 1e-12) {
            sand_lo = std::min(sand_lo, scaled);
            sand_hi = std::max(sand_hi, scaled);
        }
    }
    res.files.emplace_back("growth.csv", gcsv.content());

    const MomentEstimate moments = estimate_moments(p.d, params, p.horizon, p.n_moments,
                                                    p.replicas, replica_seed(ctx.seed, 0, 42),
                                                    opt);
    {
        std::vector<std::string> header{"t"};
        for (std::uint32_t m = 1; m <= p.n_moments; ++m)
            header.push_back("moment" + std::to_string(m));
        CsvWriter mcsv(header);
        for (std::size_t i = 0; i < moments.grid.size(); ++i) {
            std::vector<std::string> row{format_double(moments.grid[i])};
            for (std::uint32_t m = 0; m < p.n_moments; ++m)
                row.push_back(format_double(moments.raw_moment[m][i]));
            mcsv.append_row(row);
        }
        res.files.emplace_back("moments.csv", mcsv.content());
    }

    const LeftTailEstimate tail =
        estimate_left_tail(p.d, params, p.tail_times, p.delta, growth.c_hat, p.tail_replicas,
                           replica_seed(ctx.seed, 0, 43), p.tail_severed, opt);
    {
        CsvWriter tcsv({"t", "exceedance", "alive"});
        for (std::size_t i = 0; i < tail.times.size(); ++i)
            tcsv.append_row({format_double(tail.times[i]), format_double(tail.exceedance[i]),
                             std::to_string(tail.alive[i])});
        res.files.emplace_back("left_tail.csv", tcsv.content());
    }
    bool tail_decreasing = true;
    for (std::size_t i = 1; i < tail.exceedance.size(); ++i)
        if (!(tail.exceedance[i] < tail.exceedance[i - 1])) tail_decreasing = false;

    const IntersectionEstimate inter = estimate_history_intersection(
        p.d, params, p.horizon, p.intersection_pairs, replica_seed(ctx.seed, 0, 44), opt);
    double max_ratio = 0.0;
    {
        CsvWriter icsv({"t", "mean_intersection", "bound"});
        for (std::size_t i = 0; i < inter.grid.size(); ++i) {
            const double bound = 2.0 * (2.0 + 1.0 / growth.c_hat) *
                                 std::exp(0.5 * growth.c_hat * inter.grid[i]);
            icsv.append_row({format_double(inter.grid[i]),
                             format_double(inter.mean_intersection[i]), format_double(bound)});
            if (bound > 0.0)
                max_ratio = std::max(max_ratio, inter.mean_intersection[i] / bound);
        }
        res.files.emplace_back("intersection.csv", icsv.content());
    }

    res.summary["c_hat"] = growth.c_hat;
    res.summary["c_stderr"] = growth.stderr_;
    res.summary["window"] = {growth.window_lo, growth.window_hi};
    res.summary["scaled_mean_min"] = sand_lo;
    res.summary["scaled_mean_max"] = sand_hi;
    res.summary["moment_rates"] = moments.rate_fit;
    res.summary["tail_exceedance"] = tail.exceedance;
    res.summary["tail_decreasing"] = tail_decreasing;
    res.summary["intersection_max_bound_ratio"] = max_ratio;
    return res;
}

/* ---------------------------------------------------------------- */
/*  oracle_validation: event-driven engine against exact expectations */

struct OracleValidationParams {
    std::vector<double> lambda_grid{0.5, 1.0, 2.0};
    std::size_t replicas = 20'000;
    double horizon = 2000.0;

    static OracleValidationParams read(const Config& cfg) {
        OracleValidationParams p;
        if (cfg.has("lambda_grid")) p.lambda_grid = cfg.get_double_list("lambda_grid");
        for (double l : p.lambda_grid)
            detail::require(l >= 0.0 && l <= 100.0, "lambda_grid entries must be in [0, 100]");
        p.replicas = cfg.get_u64("replicas", 20'000);
        detail::require(p.replicas >= 2, "replicas must be >= 2");
        p.horizon = cfg.get_double("horizon", 2000.0);
        detail::require(p.horizon > 0.0, "horizon must be > 0");
        return p;
    }
};

inline ScenarioResult run_oracle_validation(const Config& cfg, const RunContext& ctx,
                                            bool dry_run = false) {
    const OracleValidationParams p = OracleValidationParams::read(cfg);
    ScenarioResult res;
    res.scenario = "oracle_validation";
    if (dry_run) return res;

    CsvWriter csv({"graph", "lambda", "exact", "mc_mean", "mc_stderr", "z", "censored"});
    double max_abs_z = 0.0;
    std::size_t index = 0;
    for (const std::string& name : corpus_graph_names())
        for (const double lambda : p.lambda_grid) {
            const Multigraph g = corpus_graph(name);
            const double exact = exact_extinction_expectation(g, 1u, lambda);
            const ExtinctionEstimate mc =
                estimate_extinction_time(g, {0}, ProcessParams{lambda}, p.horizon, p.replicas,
                                         replica_seed(ctx.seed, index, 51));
            ++index;
            const double z = mc.stderr_ > 0.0 ? (mc.mean - exact) / mc.stderr_ : 0.0;
            max_abs_z = std::max(max_abs_z, std::abs(z));
            csv.append_row({name, format_double(lambda), format_double(exact),
                            format_double(mc.mean), format_double(mc.stderr_), format_double(z),
                            std::to_string(mc.censored)});
        }
    res.summary["max_abs_z"] = max_abs_z;
    res.summary["within_three_sigma"] = max_abs_z < 3.0;
    res.files.emplace_back("oracle_validation.csv", csv.content());
    return res;
}

/* ---------------------------------------------------------------- */
/*  local_limit: simplicity frequency and tree-like neighbourhoods */

struct LocalLimitParams {
    std::uint32_t d = 3;
    std::vector<std::uint32_t> n_grid;
    std::size_t samples = 2000;
    std::uint32_t radius = 2;

    static LocalLimitParams read(const Config& cfg) {
        LocalLimitParams p;
        p.d = detail::read_degree(cfg);
        p.n_grid = cfg.get_u32_list("n_grid");
        for (std::uint32_t n : p.n_grid) {
            detail::require(n >= 4, "n_grid entries must be >= 4");
            detail::require((static_cast<std::uint64_t>(n) * p.d) % 2 == 0,
                            "n*d must be even for every n_grid entry");
        }
        p.samples = cfg.get_u64("samples", 2000);
        detail::require(p.samples >= 1, "samples must be >= 1");
        p.radius = cfg.get_u32("radius", 2);
        detail::require(p.radius >= 1 && p.radius <= 6, "radius must be in [1, 6]");
        return p;
    }
};

inline ScenarioResult run_local_limit(const Config& cfg, const RunContext& ctx,
                                      bool dry_run = false) {
    const LocalLimitParams p = LocalLimitParams::read(cfg);
    ScenarioResult res;
    res.scenario = "local_limit";
    if (dry_run) return res;

    CsvWriter csv({"n", "sample", "simple", "ball_tree_like"});
    nlohmann::json per_n = nlohmann::json::array();
    for (const std::uint32_t n : p.n_grid) {
        std::vector<std::uint8_t> simple(p.samples, 0), tree_like(p.samples, 0);
        parallel_replicas(p.samples, ctx.threads, [&](std::size_t s) {
            const Multigraph g =
                sample_configuration(n, p.d, replica_seed(ctx.seed, s, 2ULL * n + 60));
            simple[s] = is_simple(g) ? 1 : 0;
            rng_t pick(replica_seed(ctx.seed, s, 2ULL * n + 61));
            const std::uint32_t v = static_cast<std::uint32_t>(uniform_below(pick, n));
            tree_like[s] = ball_matches_regular_tree(extract_ball(g, v, p.radius), p.d) ? 1 : 0;
        });
        std::uint64_t n_simple = 0, n_tree = 0;
        for (std::size_t s = 0; s < p.samples; ++s) {
            csv.append_row({std::to_string(n), std::to_string(s), simple[s] ? "1" : "0",
                            tree_like[s] ? "1" : "0"});
            n_simple += simple[s];
            n_tree += tree_like[s];
        }
        per_n.push_back(
            {{"n", n},
             {"frac_simple", static_cast<double>(n_simple) / static_cast<double>(p.samples)},
             {"frac_tree_like", static_cast<double>(n_tree) / static_cast<double>(p.samples)}});
    }
    res.summary["per_n"] = per_n;
    res.summary["radius"] = p.radius;
    res.files.emplace_back("local_limit.csv", csv.content());
    return res;
}

/* ---------------------------------------------------------------- */

inline const std::vector<std::string>& scenario_names() {
    static const std::vector<std::string> names = {
        "reinfection_scaling", "calibrate_lambdas", "clash_time",
        "surviving_types",    "duality",           "growth_concentration",
        "oracle_validation",  "local_limit"};
    return names;
}

inline ScenarioResult run_scenario(const Config& cfg, const RunContext& ctx,
                                   bool dry_run = false) {
    const std::string name = cfg.get_string("scenario");
    ScenarioResult res;
    if (name == "reinfection_scaling")
        res = run_reinfection_scaling(cfg, ctx, dry_run);
    else if (name == "calibrate_lambdas")
        res = run_calibrate_lambdas(cfg, ctx, dry_run);
    else if (name == "clash_time")
        res = run_clash_time(cfg, ctx, dry_run);
    else if (name == "surviving_types")
        res = run_surviving_types(cfg, ctx, dry_run);
    else if (name == "duality")
        res = run_duality(cfg, ctx, dry_run);
    else if (name == "growth_concentration")
        res = run_growth_concentration(cfg, ctx, dry_run);
    else if (name == "oracle_validation")
        res = run_oracle_validation(cfg, ctx, dry_run);
    else if (name == "local_limit")
        res = run_local_limit(cfg, ctx, dry_run);
    else
        throw ConfigError("unknown scenario: " + name);

    const std::vector<std::string> unused = cfg.unused_keys();
    if (!unused.empty()) {
        std::string msg = "unrecognized config keys:";
        for (const std::string& k : unused) msg += " " + k;
        throw ConfigError(msg);
    }
    return res;
}

/* Common run keys; the CLI reads these before dispatch so they are
   always recognized, and flags override them. */
inline RunContext read_context(const Config& cfg) {
    RunContext ctx;
    ctx.out_dir = cfg.get_string("out_dir", "out");
    ctx.seed = cfg.get_u64("seed", 1);
    ctx.threads = cfg.get_u32("threads", 1);
    detail::require(ctx.threads >= 1 && ctx.threads <= 256, "threads must be in [1, 256]");
    return ctx;
}

/* Write every scenario file plus a manifest into ctx.out_dir. The manifest
   carries a git-blob hash per output so reruns can be compared at a glance. */
inline std::string write_scenario_outputs(const ScenarioResult& res, const Config& cfg,
                                          const RunContext& ctx, double wall_seconds) {
    namespace fs = std::filesystem;
    fs::create_directories(ctx.out_dir);
    nlohmann::json outputs;
    for (const auto& [name, bytes] : res.files) {
        const fs::path path = fs::path(ctx.out_dir) / name;
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write output file: " + path.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        outputs[name] = {{"git_blob_sha1", git_blob_sha1(bytes)}, {"bytes", bytes.size()}};
    }
    nlohmann::json manifest;
    manifest["scenario"] = res.scenario;
    nlohmann::json echo;
    for (const auto& [k, v] : cfg.items()) echo[k] = v;
    manifest["config"] = echo;
    manifest["seed"] = ctx.seed;
    manifest["threads"] = ctx.threads;
    manifest["outputs"] = outputs;
    manifest["wall_seconds"] = wall_seconds;
    manifest["summary"] = res.summary;
    const fs::path mpath = fs::path(ctx.out_dir) / "manifest.json";
    std::ofstream mout(mpath, std::ios::binary);
    if (!mout) throw std::runtime_error("cannot write manifest: " + mpath.string());
    const std::string text = manifest.dump(2) + "\n";
    mout.write(text.data(), static_cast<std::streamsize>(text.size()));
    return mpath.string();
}

}  // namespace cpreg
