#include <doctest.h>

#include <fstream>
#include <sstream>

#include "safeprob/cli.hpp"
#include "safeprob/io.hpp"
#include "support.hpp"

using namespace safeprob;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code = 0;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args) {
    args.insert(args.begin(), "safeprob");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

fs::path write_config(const fs::path& dir, const std::string& name, const json& doc) {
    const fs::path p = dir / (name + ".json");
    std::ofstream(p) << doc.dump(2);
    return p;
}

json drifted(const char* kind) {
    return {{"system", {{"builtin", "drifted_bm_1d"}}},
            {"barrier", {{"builtin", "drifted_bm_1d"}}},
            {"policy", {{"builtin", "drifted_bm_1d"}}},
            {"query", {{"kind", kind}}}};
}

fs::path shipped(const char* name) {
    return fs::path(SAFEPROB_SOURCE_DIR) / "configs" / (std::string(name) + ".json");
}

std::string hash_of(const json& doc) { return config_hash(doc); }

double value_at(const fs::path& csv, std::size_t state, double t) {
    for (const io::Curve& c : io::read_distribution_csv(csv)) {
        if (c.state != state) continue;
        for (std::size_t k = 0; k < c.times.size(); ++k)
            if (std::abs(c.times[k] - t) < 1e-12) return c.values[k];
    }
    FAIL("no row at t=" << t);
    return 0.0;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("solve writes the exit CDF table") {
    testing::TempDir tmp("solve");
    const json doc = drifted("exit_cdf");
    const fs::path cfg = write_config(tmp.path(), "exit", doc);
    const Run r = run({"solve", "--config", cfg.string(), "--out", tmp.path().string()});
    REQUIRE(r.code == 0);
    const std::string h = hash_of(doc);
    const fs::path csv = tmp.path() / cli::distribution_file(DistributionKind::exit_cdf, h, "csv");
    CHECK(std::abs(value_at(csv, 0, 1.0) - testing::hit_probability(1.0, 1.0, 1.0, 0.0, 1.0)) <= 5e-3);
    CHECK(std::abs(value_at(csv, 0, 1.0) - 0.0904) <= 5e-3);

    const json manifest = json::parse(testing::slurp(tmp.path() / ("manifest_solve_" + h + ".json")));
    CHECK(manifest["config_hash"] == h);
    for (const auto& f : manifest["files"]) {
        CHECK(fs::exists(tmp.path() / f.get<std::string>()));
        CHECK(f.get<std::string>().find(h) != std::string::npos);
    }
    const json dist = json::parse(testing::slurp(tmp.path() / cli::distribution_file(DistributionKind::exit_cdf, h, "json")));
    CHECK(dist["source"] == "pde");
    CHECK(dist["levels"][0]["states"][0].contains("summary"));
}

TEST_CASE("zero horizon reproduces the indicator") {
    testing::TempDir tmp("zero");
    json doc = drifted("invariance_ccdf");
    doc["query"]["horizon"] = 0.0;
    const fs::path cfg = write_config(tmp.path(), "zero", doc);
    REQUIRE(run({"solve", "--config", cfg.string(), "--out", tmp.path().string()}).code == 0);
    const fs::path csv = tmp.path() / cli::distribution_file(DistributionKind::invariance_ccdf, hash_of(doc), "csv");
    CHECK(value_at(csv, 0, 0.0) == 1.0);  // x = 1
    CHECK(value_at(csv, 1, 0.0) == 0.0);  // x = -1
}

TEST_CASE("a config without a barrier exits with 2 and names the key") {
    testing::TempDir tmp("nobarrier");
    json doc = drifted("exit_cdf");
    doc.erase("barrier");
    const Run r = run({"solve", "--config", write_config(tmp.path(), "bad", doc).string()});
    CHECK(r.code == 2);
    CHECK(r.err.find("/barrier") != std::string::npos);
}

TEST_CASE("zero paths exit with 2") {
    testing::TempDir tmp("nopaths");
    json doc = drifted("exit_cdf");
    doc["mc"] = {{"n_paths", 0}};
    CHECK(run({"mc", "--config", write_config(tmp.path(), "bad", doc).string()}).code == 2);
}

TEST_CASE("missing inputs and bad arguments exit with 2") {
    CHECK(run({"solve", "--config", "/nonexistent/config.json"}).code == 2);
    CHECK(run({"solve"}).code == 2);
    CHECK(run({"launch", "--config", "x.json"}).code == 2);
    CHECK(run({"--help"}).code == 0);
    testing::TempDir tmp("badjson");
    const fs::path p = tmp.path() / "broken.json";
    std::ofstream(p) << "{ not json";
    CHECK(run({"solve", "--config", p.string()}).code == 2);
}

TEST_CASE("solver failures exit with 3") {
    testing::TempDir tmp("solverfail");
    json doc = drifted("exit_cdf");
    doc["numerics"] = {{"max_iterations", 1}};
    const Run r = run({"solve", "--config", write_config(tmp.path(), "fail", doc).string(), "--out", tmp.path().string()});
    CHECK(r.code == 3);
    CHECK(r.err.find("residual") != std::string::npos);
}

TEST_CASE("too many excluded paths exit with 4") {
    testing::TempDir tmp("excluded");
    const json doc = json::parse(R"({
      "system": {"f": ["-5"], "g": [["0"]], "sigma": [["1"]]},
      "barrier": {"phi": "x1"},
      "policy": {"kind": "zero_cbf", "nominal": ["0"], "gamma": 1.0},
      "query": {"kind": "exit_cdf", "states": [[1.0]], "horizon": 0.5},
      "numerics": {"grid": {"lower": [-2], "upper": [2], "cells": [40]}, "dt": 0.05},
      "mc": {"n_paths": 50, "dt": 0.01}
    })");
    const Run r = run({"mc", "--config", write_config(tmp.path(), "stuck", doc).string(), "--out", tmp.path().string()});
    CHECK(r.code == 4);
    CHECK(r.err.find("excluded") != std::string::npos);
}

TEST_CASE("fixed seeds give byte-identical Monte Carlo output") {
    testing::TempDir a("mc_a"), b("mc_b");
    json doc = drifted("all");
    doc["mc"] = {{"n_paths", 3000}, {"dt", 1e-3}, {"path_log", true}};
    const fs::path cfg = write_config(a.path(), "mc", doc);
    REQUIRE(run({"mc", "--config", cfg.string(), "--out", a.path().string(), "--seed", "17"}).code == 0);
    REQUIRE(run({"mc", "--config", cfg.string(), "--out", b.path().string(), "--seed", "17"}).code == 0);
    std::size_t compared = 0;
    for (const auto& entry : fs::directory_iterator(a.path())) {
        const std::string name = entry.path().filename().string();
        if (name == "mc.json") continue;
        REQUIRE(fs::exists(b.path() / name));
        if (name.starts_with("manifest_")) {
            // The manifest echoes the output directory, which differs by construction.
            json ma = json::parse(testing::slurp(entry.path())), mb = json::parse(testing::slurp(b.path() / name));
            ma["config"].erase("output");
            mb["config"].erase("output");
            CHECK(ma == mb);
        } else {
            CHECK(testing::slurp(entry.path()) == testing::slurp(b.path() / name));
        }
        ++compared;
    }
    CHECK(compared >= 9);  // 4 CSV, 4 JSON, 2 path logs, manifest
}

TEST_CASE("recovery probability from the mc command") {
    testing::TempDir tmp("recovery");
    json doc = drifted("entry_cdf");
    doc["query"]["states"] = json::parse("[[-1.0]]");
    doc["mc"] = {{"n_paths", 100000}};
    const fs::path cfg = write_config(tmp.path(), "rec", doc);
    const Run r = run({"mc", "--config", cfg.string(), "--out", tmp.path().string()});
    REQUIRE(r.code == 0);
    const fs::path csv = tmp.path() / cli::mc_file(DistributionKind::entry_cdf, hash_of(doc), "csv");
    const double band = std::sqrt(std::log(2.0 / 0.05) / (2.0 * 100000));
    CHECK(std::abs(value_at(csv, 0, 1.0) - testing::hit_probability(-1.0, 1.0, 1.0, 0.0, 1.0)) <= band);
}

TEST_CASE("the shipped 1D suite validates") {
    testing::TempDir tmp("suite");
    const Run r = run({"validate", "--config", shipped("drifted_bm_1d").string(), "--out", tmp.path().string()});
    CHECK(r.code == 0);
    CHECK(r.out.find("FAIL") == std::string::npos);
    CHECK(r.out.find("PASS analytic_exit_cdf") != std::string::npos);
    CHECK(r.out.find("PASS mc_ks_entry_cdf") != std::string::npos);
    CHECK(r.out.find("PASS complementarity_invariance_exit") != std::string::npos);
    CHECK(r.out.find("PASS boundary_exit_cdf") != std::string::npos);
}

TEST_CASE("a coarse grid passes monotonicity but fails the closed form") {
    testing::TempDir tmp("coarse");
    const Run r = run({"validate", "--config", shipped("coarse_grid_fixture").string(), "--out", tmp.path().string()});
    CHECK(r.code == 1);
    CHECK(r.out.find("PASS monotone_time_exit_cdf") != std::string::npos);
    CHECK(r.out.find("FAIL analytic_") != std::string::npos);
    CHECK(r.out.find("FAIL monotone") == std::string::npos);
}

TEST_CASE("an artifact compared with itself has zero distance") {
    testing::TempDir tmp("self");
    const json doc = drifted("exit_cdf");
    const fs::path cfg = write_config(tmp.path(), "exit", doc);
    REQUIRE(run({"solve", "--config", cfg.string(), "--out", tmp.path().string()}).code == 0);
    const std::string csv = (tmp.path() / cli::distribution_file(DistributionKind::exit_cdf, hash_of(doc), "csv")).string();
    json vdoc = doc;
    vdoc["validate"] = {{"artifacts", {csv, csv}}};
    const Run r = run({"validate", "--config", write_config(tmp.path(), "self", vdoc).string(), "--out", tmp.path().string()});
    CHECK(r.code == 0);
    CHECK(r.out.find("PASS artifact_ks 0 ") != std::string::npos);

    vdoc["validate"] = {{"artifacts", {csv, (tmp.path() / "missing.csv").string()}}};
    CHECK(run({"validate", "--config", write_config(tmp.path(), "gone", vdoc).string()}).code == 2);
}

TEST_CASE("report writes a node heatmap and time-ordered curves") {
    testing::TempDir tmp("report");
    json doc = json::parse(testing::slurp(shipped("double_integrator_heatmap")));
    doc["numerics"]["grid"]["cells"] = {40, 40};
    doc["numerics"]["dt"] = 0.02;
    doc["query"]["kind"] = "exit_cdf";
    const fs::path cfg = write_config(tmp.path(), "heat", doc);
    CHECK(run({"report", "--config", cfg.string(), "--out", tmp.path().string()}).code == 2);
    REQUIRE(run({"solve", "--config", cfg.string(), "--out", tmp.path().string()}).code == 0);
    const Run r = run({"report", "--config", cfg.string(), "--out", tmp.path().string()});
    REQUIRE(r.code == 0);
    const std::string h = hash_of(doc);

    std::ifstream heat(tmp.path() / ("heatmap_exit_cdf_" + h + ".csv"));
    std::string line;
    std::getline(heat, line);
    CHECK(line == "x1,x2,value");
    std::size_t rows = 0;
    while (std::getline(heat, line)) rows += !line.empty();
    CHECK(rows == 41u * 41u);

    std::ifstream curves(tmp.path() / ("curves_" + h + ".csv"));
    std::getline(curves, line);
    CHECK(line == "kind,state,level,t,value");
    double last_t = -1.0;
    std::string last_key;
    while (std::getline(curves, line)) {
        std::istringstream ls(line);
        std::string kind, state, level, t;
        std::getline(ls, kind, ',');
        std::getline(ls, state, ',');
        std::getline(ls, level, ',');
        std::getline(ls, t, ',');
        const std::string key = kind + state + level;
        if (key == last_key) CHECK(std::stod(t) > last_t);
        last_key = key;
        last_t = std::stod(t);
    }
    const json manifest = json::parse(testing::slurp(tmp.path() / ("manifest_report_" + h + ".json")));
    CHECK(manifest["files"].size() == 2);
}

TEST_CASE("manifests round-trip to identical results") {
    testing::TempDir a("round_a"), b("round_b");
    json doc = drifted("entry_cdf");
    doc["numerics"] = json::parse(R"({"grid": {"lower": [-6], "upper": [6], "cells": [600]}})");
    const fs::path cfg = write_config(a.path(), "orig", doc);
    REQUIRE(run({"solve", "--config", cfg.string(), "--out", a.path().string()}).code == 0);
    const std::string h = hash_of(doc);
    const json manifest = json::parse(testing::slurp(a.path() / ("manifest_solve_" + h + ".json")));
    const fs::path echoed = write_config(b.path(), "echo", manifest["config"]);
    REQUIRE(run({"solve", "--config", echoed.string(), "--out", b.path().string()}).code == 0);
    CHECK(config_hash(manifest["config"]) == h);
    const std::string name = cli::distribution_file(DistributionKind::entry_cdf, h, "csv");
    CHECK(testing::slurp(a.path() / name) == testing::slurp(b.path() / name));
}

TEST_CASE("overrides and flags reach the document") {
    cli::Invocation inv;
    inv.command = "solve";
    inv.config = shipped("drifted_bm_1d");
    inv.overrides = {"numerics.dt=0.002", "query.kind=exit_cdf"};
    inv.seed = 5;
    inv.out = "somewhere";
    const json doc = cli::resolve_document(inv);
    CHECK(doc["numerics"]["dt"] == 0.002);
    CHECK(doc["query"]["kind"] == "exit_cdf");
    CHECK(doc["mc"]["seed"] == 5);
    CHECK(doc["output"]["dir"] == "somewhere");
}

}
