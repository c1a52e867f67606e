#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cpreg/config.hpp"
#include "cpreg/csv.hpp"
#include "cpreg/scenarios.hpp"

using namespace cpreg;
namespace fs = std::filesystem;

TEST_CASE("config files parse keys, comments and overrides", "[config]") {
    Config cfg = Config::parse(
        "# header comment\n"
        "scenario = duality   # trailing comment\n"
        "\n"
        "lambda=1.5\n"
        "replicas = 3e5\n"
        "t_list = 0.5, 1, 2\n");
    CHECK(cfg.get_string("scenario") == "duality");
    CHECK(cfg.get_double("lambda") == 1.5);
    CHECK(cfg.get_u64("replicas") == 300'000);
    CHECK(cfg.get_double_list("t_list") == std::vector<double>{0.5, 1.0, 2.0});
    CHECK(cfg.has("lambda"));
    CHECK_FALSE(cfg.has("absent"));
    CHECK(cfg.get_string("absent", "fallback") == "fallback");
    CHECK(cfg.get_double("absent", 2.5) == 2.5);

    cfg.set("lambda", "2.0");
    CHECK(cfg.get_double("lambda") == 2.0);
}

TEST_CASE("config parsing rejects malformed input", "[config]") {
    CHECK_THROWS_AS(Config::parse("key_without_value\n"), ConfigError);
    CHECK_THROWS_AS(Config::parse("= value\n"), ConfigError);
    CHECK_THROWS_AS(Config::parse("a = 1\na = 2\n"), ConfigError);
    Config cfg = Config::parse("x = 1.5y\nn = -3\nbig = 1e300\nfrac = 2.5\nlist = 1,,2\n");
    CHECK_THROWS_AS(cfg.get_double("x"), ConfigError);
    CHECK_THROWS_AS(cfg.get_u64("n"), ConfigError);
    CHECK_THROWS_AS(cfg.get_u64("big"), ConfigError);
    CHECK_THROWS_AS(cfg.get_u64("frac"), ConfigError);
    CHECK_THROWS_AS(cfg.get_u32_list("list"), ConfigError);
    CHECK_THROWS_AS(cfg.get_string("missing"), ConfigError);
}

TEST_CASE("unused keys are tracked for typo detection", "[config]") {
    Config cfg = Config::parse("a = 1\nb = 2\n");
    CHECK(cfg.unused_keys() == std::vector<std::string>{"a", "b"});
    cfg.get_double("a");
    CHECK(cfg.unused_keys() == std::vector<std::string>{"b"});
    cfg.get_u64("b");
    CHECK(cfg.unused_keys().empty());
}

TEST_CASE("every scenario validates from a minimal config", "[scenarios]") {
    const std::vector<std::string> texts = {
        "scenario = reinfection_scaling\nlambda = 0.8\nn_grid = 1000, 10000\nreplicas = 10\n",
        "scenario = calibrate_lambdas\nlambda_grid = 0.4, 0.8\nreplicas = 10\n",
        "scenario = clash_time\nlambda = 1\nn_grid = 1000\nreplicas = 5\n",
        "scenario = surviving_types\nlambda = 0.5\nk = 10\nreplicas = 4\n",
        "scenario = duality\nlambda = 1\ngraph = p3\nreplicas = 100\n",
        "scenario = growth_concentration\nlambda = 0.7\nreplicas = 10\n",
        "scenario = oracle_validation\nreplicas = 10\n",
        "scenario = local_limit\nn_grid = 100\nsamples = 5\n",
    };
    const RunContext ctx;
    for (const std::string& text : texts) {
        Config cfg = Config::parse(text);
        CHECK_NOTHROW(run_scenario(cfg, ctx, /*dry_run=*/true));
    }
}

TEST_CASE("unknown scenarios and stray keys are rejected", "[scenarios]") {
    const RunContext ctx;
    Config bad = Config::parse("scenario = nonesuch\n");
    CHECK_THROWS_AS(run_scenario(bad, ctx, true), ConfigError);
    Config typo = Config::parse("scenario = duality\nlambda = 1\nreplicsa = 100\n");
    CHECK_THROWS_MATCHES(run_scenario(typo, ctx, true), ConfigError,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("replicsa")));
    Config range = Config::parse("scenario = duality\nlambda = -1\n");
    CHECK_THROWS_AS(run_scenario(range, ctx, true), ConfigError);
}

TEST_CASE("run context reads overrides with range checks", "[scenarios]") {
    Config cfg = Config::parse("scenario = duality\nseed = 7\nthreads = 2\nout_dir = x\n");
    const RunContext ctx = read_context(cfg);
    CHECK(ctx.seed == 7);
    CHECK(ctx.threads == 2);
    CHECK(ctx.out_dir == "x");
    Config bad = Config::parse("threads = 0\n");
    CHECK_THROWS_AS(read_context(bad), ConfigError);
}

TEST_CASE("doubles rendered to CSV round-trip exactly", "[csv]") {
    CHECK(format_double(0.1) == "0.1");
    CHECK(format_double(2.0) == "2");
    CHECK(format_double(-0.25) == "-0.25");
    const double third = 1.0 / 3.0;
    CHECK(std::stod(format_double(third)) == third);
    const double tiny = 1.2345678912345678e-12;
    CHECK(std::stod(format_double(tiny)) == tiny);
}

TEST_CASE("CSV quoting and row shape follow the common rules", "[csv]") {
    CHECK(csv_escape("plain") == "plain");
    CHECK(csv_escape("a,b") == "\"a,b\"");
    CHECK(csv_escape("say \"hi\"") == "\"say \"\"hi\"\"\"");
    CHECK(csv_escape("line\nbreak") == "\"line\nbreak\"");

    CsvWriter w({"a", "b"});
    w.append_row({"1", "x,y"});
    CHECK(w.content() == "a,b\r\n1,\"x,y\"\r\n");
    CHECK_THROWS_AS(w.append_row({"only one"}), std::invalid_argument);
}

TEST_CASE("blob hashes match the reference values", "[csv]") {
    CHECK(git_blob_sha1("") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
    CHECK(git_blob_sha1("hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a");
}

TEST_CASE("scenario outputs land on disk with a faithful manifest", "[scenarios]") {
    Config cfg = Config::parse(
        "scenario = local_limit\nn_grid = 50\nsamples = 6\nradius = 1\nseed = 5\n");
    RunContext ctx = read_context(cfg);
    const fs::path dir = fs::temp_directory_path() / "cpreg_test_out";
    fs::remove_all(dir);
    ctx.out_dir = dir.string();

    const ScenarioResult res = run_scenario(cfg, ctx, false);
    REQUIRE(res.files.size() == 1);
    write_scenario_outputs(res, cfg, ctx, 0.25);

    const fs::path csv_path = dir / res.files[0].first;
    REQUIRE(fs::exists(csv_path));
    CHECK(read_text_file(csv_path.string()) == res.files[0].second);

    std::ifstream in(dir / "manifest.json");
    REQUIRE(in.good());
    const nlohmann::json manifest = nlohmann::json::parse(in);
    CHECK(manifest["scenario"] == "local_limit");
    CHECK(manifest["seed"] == 5);
    CHECK(manifest["config"]["n_grid"] == "50");
    CHECK(manifest["outputs"][res.files[0].first]["git_blob_sha1"] ==
          git_blob_sha1(res.files[0].second));
    CHECK(manifest["outputs"][res.files[0].first]["bytes"] == res.files[0].second.size());
    CHECK(manifest["summary"]["per_n"].size() == 1);
    fs::remove_all(dir);
}

TEST_CASE("scenario bytes are reproducible and thread-count independent", "[scenarios]") {
    Config cfg = Config::parse(
        "scenario = local_limit\nn_grid = 60, 100\nsamples = 40\nradius = 2\n");
    RunContext serial;
    serial.seed = 11;
    serial.threads = 1;
    RunContext pooled = serial;
    pooled.threads = 3;

    const ScenarioResult a = run_scenario(cfg, serial, false);
    const ScenarioResult b = run_scenario(cfg, serial, false);
    const ScenarioResult c = run_scenario(cfg, pooled, false);
    REQUIRE(a.files.size() == 1);
    CHECK(a.files[0].second == b.files[0].second);
    CHECK(a.files[0].second == c.files[0].second);
    CHECK(a.summary == c.summary);
}
