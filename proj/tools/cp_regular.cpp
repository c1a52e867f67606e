#include <chrono>
#include <cstdint>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "cpreg/scenarios.hpp"

namespace {

int execute(const std::string& config_path, bool dry_run, const std::string& out_override,
            std::uint64_t seed_override, bool seed_set, unsigned threads_override,
            bool threads_set) {
    using namespace cpreg;
    try {
        Config cfg = Config::parse_file(config_path);
        if (!out_override.empty()) cfg.set("out_dir", out_override);
        if (seed_set) cfg.set("seed", std::to_string(seed_override));
        if (threads_set) cfg.set("threads", std::to_string(threads_override));
        const RunContext ctx = read_context(cfg);
        if (dry_run) {
            run_scenario(cfg, ctx, true);
            std::cout << "ok: " << cfg.get_string("scenario") << "\n";
            return 0;
        }
        const auto t0 = std::chrono::steady_clock::now();
        const ScenarioResult res = run_scenario(cfg, ctx, false);
        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const std::string manifest = write_scenario_outputs(res, cfg, ctx, wall);
        std::cout << res.scenario << ": " << res.files.size() << " output file(s), manifest at "
                  << manifest << "\n";
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const BudgetExceeded& e) {
        std::cerr << "aborted: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"contact process experiments on random regular graphs"};
    app.require_subcommand(1);

    std::string run_config, out_override;
    std::uint64_t seed_override = 0;
    unsigned threads_override = 1;
    CLI::App* run = app.add_subcommand("run", "execute a scenario and write its outputs");
    run->add_option("config", run_config, "scenario config file")->required();
    CLI::Option* seed_opt = run->add_option("--seed", seed_override, "override the config seed");
    CLI::Option* threads_opt =
        run->add_option("--threads", threads_override, "override the worker thread count");
    run->add_option("--out", out_override, "override the output directory");

    std::string validate_config;
    CLI::App* validate =
        app.add_subcommand("validate", "parse and range-check a config without running it");
    validate->add_option("config", validate_config, "scenario config file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    if (validate->parsed()) return execute(validate_config, true, "", 0, false, 0, false);
    return execute(run_config, false, out_override, seed_override, static_cast<bool>(*seed_opt),
                   threads_override, static_cast<bool>(*threads_opt));
}
