#include "minbal/errors.hpp"
#include "minbal/report.hpp"

#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <string>

using namespace minbal;

namespace {

Json load_schema(const std::string& name) {
    std::ifstream in(std::string(MINBAL_SCHEMA_DIR) + "/" + name);
    REQUIRE(in.good());
    return Json::parse(in);
}

// Top-level "required" keys of a schema are present in the document.
void check_required(const Json& doc, const Json& schema) {
    for (const auto& key : schema.at("required")) CHECK_MESSAGE(doc.contains(key.get<std::string>()), "missing " << key);
}

BenchSpec tiny_sweep() {
    BenchSpec spec;
    spec.n = 120;
    spec.replications = 2;
    spec.modes = {BalanceMode::Exact, BalanceMode::Sweep};
    spec.grid = {0.0, 0.1};
    spec.bootstrap_replicates = 2;
    return spec;
}

} // namespace

TEST_CASE("solve_json") {
    const auto inst = oracle::random_instance(2, 20, 2, false);
    const auto p = DualProblem::population(inst.basis, inst.z, scaled_delta(inst.basis, 0.1), DispersionKind::NegativeEntropy);
    const SolveResult r = solve_dual(p);
    const Json j = solve_json(r, p);
    CHECK(j["dispersion"]["kind"] == "entropy");
    CHECK(j["n"] == 20);
    CHECK(j["weights"].size() == 20);
    CHECK(j["kkt"].size() == 3);
    CHECK(j["kkt"][0]["name"] == "(intercept)");
    CHECK(j["weights_scaled"][0].get<double>() == doctest::Approx(20.0 * r.weights[0]));
    CHECK(j["converged"] == r.converged);
    CHECK(j["status"] == std::string(to_string(r.status)));

    const Json abs = dispersion_json(DispersionKind::SmoothedAbsoluteDeviation, 1e-3);
    CHECK(abs["parameters"]["epsilon"] == 1e-3);
    CHECK(dispersion_json(DispersionKind::Variance, 1e-3)["parameters"].empty());
}

TEST_CASE("tune_json") {
    TuneResult r;
    DeltaScore a;
    a.delta = 0.0;
    a.c_s = 0.2;
    a.converged = true;
    DeltaScore b;
    b.delta = 0.1;
    b.c_s = std::numeric_limits<double>::quiet_NaN();
    b.error = "boom";
    r.per_delta = {a, b};
    r.selected = 0.0;
    TuneConfig cfg;
    cfg.grid = {0.0, 0.1};
    const Json j = tune_json(r, cfg, 4);
    CHECK(j["per_delta"].size() == 2);
    CHECK(j["per_delta"][1]["c_s"].is_null());
    CHECK(j["per_delta"][1]["error"] == "boom");
    CHECK(j["selected"] == 0.0);
    CHECK(j["max_recommended_delta"] == 0.5);
    CHECK(dump(j).find("NaN") == std::string::npos);
    check_required(j, load_schema("tune.schema.json"));
}

TEST_CASE("estimate_json") {
    EstimateReport rep;
    rep.point = 1.5;
    rep.ci_low = 1.0;
    rep.ci_high = 2.0;
    const Json j = estimate_json(rep);
    CHECK(j["ci"] == Json::array({1.0, 2.0}));
    CHECK(j["estimand"] == "mean");
    check_required(j, load_schema("estimate.schema.json"));
}

TEST_CASE("bench spec round trip") {
    BenchSpec spec = bench_preset("wc-b");
    spec.grid = {0.0, 0.05};
    spec.seed = 123456789012345ULL;
    const Json j = bench_spec_json(spec);
    const BenchSpec back = bench_spec_from_json(j);
    CHECK(bench_spec_json(back) == j);
    CHECK(back.seed == spec.seed);

    CHECK_THROWS_AS(bench_spec_from_json(Json::parse(R"({"replicas": 3})")), UsageError);
    CHECK_THROWS_AS(bench_spec_from_json(Json::parse(R"({"n": "many"})")), UsageError);
    CHECK_THROWS_AS(bench_spec_from_json(Json::parse(R"({"dgp": "lalonde"})")), UsageError);
    CHECK_THROWS_AS(bench_spec_from_json(Json::parse("[1, 2]")), UsageError);
    CHECK(bench_spec_from_json(Json::parse(R"({"preset": "ks-bad", "replications": 5})")).replications == 5);
}

TEST_CASE("bench_json") {
    const BenchReport r = run_bench_serial(tiny_sweep());
    const Json j = bench_json(r);
    CHECK(j["rows"].size() == 1);
    CHECK(j["sweep"].size() == 2);
    CHECK(j["log"].size() == 2);
    CHECK(j["grid"] == Json::array({0.0, 0.1}));
    check_required(j, load_schema("bench.schema.json"));
    CHECK(dump(j) == dump(bench_json(run_bench_serial(tiny_sweep()))));
}

TEST_CASE("dump") {
    Json j;
    j["a"] = 1;
    CHECK(dump(j) == "{\n  \"a\": 1\n}\n");
    Json k;
    k["x"] = std::numeric_limits<double>::infinity();
    CHECK(dump(k).find("null") != std::string::npos);
}
