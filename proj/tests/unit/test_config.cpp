#include <doctest.h>

#include "safeprob/config.hpp"
#include "support.hpp"

using namespace safeprob;
using nlohmann::json;
using testing::vec;

namespace {

json builtin_doc(const char* name) {
    return {{"system", {{"builtin", name}}}, {"barrier", {{"builtin", name}}}, {"policy", {{"builtin", name}}}};
}

json inline_doc() {
    return json::parse(R"({
      "params": {"mu": 0.5, "vol": 0.8},
      "system": {"f": ["mu"], "g": [["0"]], "sigma": [["vol"]]},
      "barrier": {"phi": "x1 - 0.25", "grad": ["1"]},
      "policy": {"kind": "none", "nominal": ["0"]},
      "query": {"kind": "exit_cdf", "states": [[1.0]], "horizon": 1.0},
      "numerics": {"grid": {"lower": [-6], "upper": [6], "cells": [1200]}, "dt": 1e-3}
    })");
}

std::string pointer_of(const json& doc) {
    try {
        build_experiment(doc);
    } catch (const ConfigError& e) {
        return e.pointer();
    }
    return "<none>";
}

}  // namespace

TEST_SUITE("config") {

TEST_CASE("builtin experiments take their defaults") {
    const Experiment exp = build_experiment(builtin_doc("drifted_bm_1d"));
    CHECK(exp.kinds.size() == 4);
    CHECK(exp.levels == std::vector<double>{0.0});
    CHECK(exp.model.query.states.size() == 2);
    REQUIRE(exp.model.analytic.has_value());
    CHECK(exp.model.analytic->drift == doctest::Approx(1.0));
    CHECK(exp.model.analytic->vol == doctest::Approx(1.0));
    CHECK_FALSE(build_experiment(builtin_doc("double_integrator")).model.analytic.has_value());
}

TEST_CASE("schema violations point at the offending key") {
    json doc = builtin_doc("drifted_bm_1d");
    doc.erase("barrier");
    CHECK(pointer_of(doc) == "/barrier");

    doc = builtin_doc("drifted_bm_1d");
    doc["mc"] = {{"n_paths", 0}};
    CHECK(pointer_of(doc) == "/mc/n_paths");

    doc = builtin_doc("drifted_bm_1d");
    doc["numerics"] = {{"dt", "fast"}};
    CHECK(pointer_of(doc) == "/numerics/dt");

    doc = builtin_doc("drifted_bm_1d");
    doc["query"] = {{"kind", "hazard"}};
    CHECK(pointer_of(doc) == "/query/kind");

    doc = builtin_doc("drifted_bm_1d");
    doc["solver"] = 1;
    CHECK(pointer_of(doc) == "/solver");

    doc = builtin_doc("drifted_bm_1d");
    doc["system"]["builtin"] = "nope";
    CHECK(pointer_of(doc) == "/system/builtin");

    doc = builtin_doc("drifted_bm_1d");
    doc["numerics"] = {{"theta", 0.2}};
    CHECK(pointer_of(doc) == "/numerics/theta");
}

TEST_CASE("semantic errors point at the offending key") {
    json doc = builtin_doc("drifted_bm_1d");
    doc["query"] = json::parse(R"({"states": [[20.0]]})");
    CHECK(pointer_of(doc) == "/query/states/0");

    doc = builtin_doc("drifted_bm_1d");
    doc["query"] = json::parse(R"({"states": [[0.0, 1.0]]})");
    CHECK(pointer_of(doc) == "/query/states/0");

    doc = builtin_doc("drifted_bm_1d");
    doc["barrier"] = {{"builtin", "double_integrator"}};
    CHECK(pointer_of(doc) == "/barrier/builtin");

    doc = inline_doc();
    doc["system"]["f"] = {"mu * y"};
    CHECK(pointer_of(doc) == "/system/f/0");

    doc = inline_doc();
    doc["numerics"]["grid"]["cells"] = {1200, 10};
    CHECK(pointer_of(doc) == "/numerics/grid/cells");

    doc = inline_doc();
    doc.erase("numerics");
    CHECK(pointer_of(doc) == "/numerics/grid");

    doc = inline_doc();
    doc["query"].erase("states");
    CHECK(pointer_of(doc) == "/query/states");

    doc = inline_doc();
    doc["policy"] = {{"kind", "zero_cbf"}, {"nominal", {"0"}}, {"gamma", 1.0}, {"alpha", "s"}};
    CHECK(pointer_of(doc) != "<none>");
}

TEST_CASE("inline expressions build the model") {
    const Experiment exp = build_experiment(inline_doc());
    CHECK(exp.model.name == "custom");
    CHECK(exp.kinds == std::vector<DistributionKind>{DistributionKind::exit_cdf});
    CHECK(exp.system().drift(vec({2.0}))[0] == 0.5);
    CHECK(exp.system().noise(vec({2.0}))(0, 0) == 0.8);
    CHECK(exp.barrier().value(vec({1.0})) == 0.75);
    REQUIRE(exp.model.analytic.has_value());
    CHECK(exp.model.analytic->drift == doctest::Approx(0.5));
    CHECK(exp.model.analytic->vol == doctest::Approx(0.8));
}

TEST_CASE("inline filters") {
    json doc = inline_doc();
    doc["system"]["g"] = json::parse(R"([["1"]])");
    doc["policy"] = {{"kind", "zero_cbf"}, {"nominal", {"-3"}}, {"alpha", "k * s"}};
    doc["params"]["k"] = 2.0;
    const Experiment exp = build_experiment(doc);
    const Vec x = vec({1.25});  // phi = 1
    const Vec u = closed_loop_control(exp.policy(), exp.system(), exp.barrier(), x);
    CHECK(d_phi(exp.system(), exp.barrier(), x, u) == doctest::Approx(-2.0));
    CHECK(check_cbf_constraint(exp.policy(), exp.system(), exp.barrier(), x));
    CHECK_FALSE(exp.model.analytic.has_value());

    doc["policy"] = {{"kind", "gradient"}, {"nominal", {"0"}}, {"gain", "1 + x1^2"}};
    const Experiment grad = build_experiment(doc);
    CHECK(closed_loop_control(grad.policy(), grad.system(), grad.barrier(), vec({2.0}))[0] == doctest::Approx(5.0));
}

TEST_CASE("overrides set dotted keys") {
    json doc = builtin_doc("drifted_bm_1d");
    apply_override(doc, "numerics.dt=0.002");
    apply_override(doc, "query.kind=exit_cdf");
    apply_override(doc, "query.states=[[1.0]]");
    apply_override(doc, "query.states.0.0=2.5");
    apply_override(doc, "validate.monte_carlo=false");
    CHECK(doc["numerics"]["dt"] == 0.002);
    CHECK(doc["query"]["kind"] == "exit_cdf");
    CHECK(doc["query"]["states"][0][0] == 2.5);
    CHECK(doc["validate"]["monte_carlo"] == false);
    CHECK_THROWS_AS(apply_override(doc, "numerics.dt"), ConfigError);
    CHECK_THROWS_AS(apply_override(doc, "=3"), ConfigError);
    CHECK_THROWS_AS(apply_override(doc, "query.states.7=1"), ConfigError);
}

TEST_CASE("config hash ignores output settings and key order") {
    json a = builtin_doc("drifted_bm_1d");
    json b = a;
    b["output"] = {{"dir", "elsewhere"}};
    CHECK(config_hash(a) == config_hash(b));
    b["mc"] = {{"seed", 9}};
    CHECK(config_hash(a) != config_hash(b));
    const json c = json::parse(R"({"policy":{"builtin":"drifted_bm_1d"},"barrier":{"builtin":"drifted_bm_1d"},"system":{"builtin":"drifted_bm_1d"}})");
    CHECK(config_hash(a) == config_hash(c));
    CHECK(config_hash(a).size() == 16);
}

TEST_CASE("shipped configs load") {
    for (const char* name : {"drifted_bm_1d", "coarse_grid_fixture", "double_integrator", "double_integrator_heatmap",
                             "unicycle_disk", "inline_drifted_bm", "inline_gradient_policy"}) {
        CAPTURE(name);
        const json doc = load_json(std::filesystem::path(SAFEPROB_SOURCE_DIR) / "configs" / (std::string(name) + ".json"));
        CHECK_NOTHROW(build_experiment(doc));
    }
    CHECK_THROWS_AS(load_json("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("schema subset validator") {
    const json schema = json::parse(R"({
      "type": "object", "required": ["a"], "additionalProperties": false,
      "properties": {
        "a": {"type": ["integer", "string"], "minimum": 1},
        "b": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1, "maxItems": 2},
        "c": {"enum": ["x", "y"]}
      }})");
    CHECK_NOTHROW(validate_schema(json{{"a", 3}}, schema));
    CHECK_NOTHROW(validate_schema(json{{"a", "s"}, {"b", {0.5}}, {"c", "y"}}, schema));
    auto ptr = [&](const json& d) {
        try {
            validate_schema(d, schema);
        } catch (const ConfigError& e) {
            return e.pointer();
        }
        return std::string("<none>");
    };
    CHECK(ptr(json::object()) == "/a");
    CHECK(ptr(json{{"a", 0}}) == "/a");
    CHECK(ptr(json{{"a", 1.5}}) == "/a");
    CHECK(ptr(json{{"a", 1}, {"b", json::array()}}) == "/b");
    CHECK(ptr(json{{"a", 1}, {"b", {1, 2, 3}}}) == "/b");
    CHECK(ptr(json{{"a", 1}, {"b", {1, 0}}}) == "/b/1");
    CHECK(ptr(json{{"a", 1}, {"c", "z"}}) == "/c");
    CHECK(ptr(json{{"a", 1}, {"d", 1}}) == "/d");
}

}
