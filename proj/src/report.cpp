#include "minbal/report.hpp"

#include "minbal/errors.hpp"

#include <cmath>
#include <set>

namespace minbal {

namespace {

Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json vector_json(const Vector& v) {
    Json out = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(number(v[i]));
    return out;
}

Json strings(const std::vector<std::string>& v) {
    Json out = Json::array();
    for (const auto& s : v) out.push_back(s);
    return out;
}

} // namespace

Json dispersion_json(DispersionKind kind, double epsilon) {
    Json j;
    j["kind"] = std::string(to_string(kind));
    j["parameters"] = Json::object();
    if (kind == DispersionKind::SmoothedAbsoluteDeviation) j["parameters"]["epsilon"] = epsilon;
    return j;
}

Json solve_json(const SolveResult& result, const DualProblem& problem) {
    Json j;
    j["dispersion"] = dispersion_json(problem.spec().kind, problem.spec().epsilon);
    j["n"] = problem.spec().sample_size;
    j["r"] = problem.spec().respondents;
    j["target"] = problem.target().kind == TargetKind::PopulationMean ? "population" : "treated";
    j["columns"] = strings(problem.basis().names());
    j["delta"] = vector_json(problem.delta());
    j["lambda"] = vector_json(result.lambda);
    j["weights"] = vector_json(result.weights);
    j["weights_scaled"] = vector_json(result.weights * static_cast<double>(problem.spec().sample_size));
    j["converged"] = result.converged;
    j["status"] = std::string(to_string(result.status));
    j["iterations"] = result.iterations;
    j["objective"] = number(result.objective_value);
    Json kkt = Json::array();
    for (const auto& e : result.kkt) {
        Json row;
        row["k"] = e.k;
        row["name"] = e.name;
        row["imbalance"] = number(e.imbalance);
        row["delta"] = number(e.delta);
        row["lambda"] = number(e.lambda);
        row["active"] = e.active;
        row["sign"] = e.sign;
        row["residual"] = number(e.residual);
        row["satisfied"] = e.satisfied;
        kkt.push_back(row);
    }
    j["kkt"] = kkt;
    const auto& d = result.diagnostics;
    j["diagnostics"] = {{"negative_weights", d.negative_weights},
                        {"min_weight", number(d.min_weight)},
                        {"max_weight", number(d.max_weight)},
                        {"rank_deficient", d.rank_deficient},
                        {"gradient_mapping_norm", number(d.gradient_mapping_norm)},
                        {"restarts", d.restarts},
                        {"warnings", strings(d.warnings)}};
    return j;
}

Json tune_json(const TuneResult& result, const TuneConfig& config, int balance_dimension) {
    Json j;
    Json rows = Json::array();
    for (const auto& s : result.per_delta) {
        Json row;
        row["delta"] = s.delta;
        row["c_s"] = number(s.c_s);
        row["converged"] = s.converged;
        row["status"] = s.error.empty() ? std::string(to_string(s.status)) : std::string("error");
        row["iterations"] = s.iterations;
        if (!s.error.empty()) row["error"] = s.error;
        rows.push_back(row);
    }
    j["per_delta"] = rows;
    j["selected"] = result.selected;
    j["selected_index"] = result.selected_index;
    j["balance_dimension"] = balance_dimension;
    j["max_recommended_delta"] = number(max_recommended_delta(balance_dimension));
    j["replicates"] = config.replicates;
    j["fraction"] = config.fraction;
    j["seed"] = config.seed;
    return j;
}

Json estimate_json(const EstimateReport& report) {
    Json j;
    j["estimand"] = std::string(to_string(report.estimand));
    j["point"] = number(report.point);
    j["variance"] = number(report.variance);
    j["ci"] = Json::array({number(report.ci_low), number(report.ci_high)});
    j["form"] = std::string(to_string(report.form));
    j["n"] = report.n;
    j["r"] = report.r;
    j["diagnostics"] = strings(report.diagnostics);
    return j;
}

Json bench_spec_json(const BenchSpec& spec) {
    Json j;
    j["dgp"] = std::string(to_string(spec.dgp));
    j["n"] = spec.n;
    if (spec.dgp == Dgp::KangSchafer)
        j["overlap"] = std::string(to_string(spec.overlap));
    else
        j["outcome_model"] = std::string(to_string(spec.outcome_model));
    j["replications"] = spec.replications;
    j["estimand"] = std::string(to_string(spec.estimand));
    Json disp = Json::array();
    for (auto k : spec.dispersions) disp.push_back(std::string(to_string(k)));
    j["dispersions"] = disp;
    Json modes = Json::array();
    for (auto m : spec.modes) modes.push_back(std::string(to_string(m)));
    j["modes"] = modes;
    j["moments"] = spec.moments;
    j["standardize"] = spec.standardize;
    j["seed"] = spec.seed;
    j["grid"] = spec.grid;
    j["grid_points"] = spec.grid_points;
    j["bootstrap_replicates"] = spec.bootstrap_replicates;
    j["bootstrap_fraction"] = spec.bootstrap_fraction;
    j["form"] = std::string(to_string(spec.form));
    j["epsilon"] = spec.epsilon;
    j["tol"] = spec.solver.tol;
    j["max_iters"] = spec.solver.max_iters;
    j["infeasible_kkt"] = spec.infeasible_kkt;
    return j;
}

BenchSpec bench_spec_from_json(const Json& j) {
    if (!j.is_object()) throw UsageError("bench spec must be a JSON object");
    static const std::set<std::string> known = {
        "preset", "dgp", "n", "overlap", "outcome_model", "replications", "estimand", "dispersions", "modes",
        "moments", "standardize", "seed", "grid", "grid_points", "bootstrap_replicates", "bootstrap_fraction",
        "form", "epsilon", "tol", "max_iters", "infeasible_kkt"};
    for (const auto& [key, value] : j.items())
        if (!known.contains(key)) throw UsageError("unknown bench spec key '" + key + "'");

    try {
        BenchSpec spec = j.contains("preset") ? bench_preset(j.at("preset").get<std::string>()) : BenchSpec{};
        if (j.contains("dgp")) spec.dgp = parse_dgp(j.at("dgp").get<std::string>());
        if (j.contains("n")) spec.n = j.at("n").get<int>();
        if (j.contains("overlap")) spec.overlap = parse_overlap(j.at("overlap").get<std::string>());
        if (j.contains("outcome_model")) spec.outcome_model = parse_outcome_model(j.at("outcome_model").get<std::string>());
        if (j.contains("replications")) spec.replications = j.at("replications").get<int>();
        if (j.contains("estimand")) spec.estimand = parse_estimand(j.at("estimand").get<std::string>());
        if (j.contains("dispersions")) {
            spec.dispersions.clear();
            for (const auto& d : j.at("dispersions")) spec.dispersions.push_back(parse_dispersion(d.get<std::string>()));
        }
        if (j.contains("modes")) {
            spec.modes.clear();
            for (const auto& m : j.at("modes")) spec.modes.push_back(parse_mode(m.get<std::string>()));
        }
        if (j.contains("moments")) spec.moments = j.at("moments").get<int>();
        if (j.contains("standardize")) spec.standardize = j.at("standardize").get<bool>();
        if (j.contains("seed")) spec.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("grid")) spec.grid = j.at("grid").get<std::vector<double>>();
        if (j.contains("grid_points")) spec.grid_points = j.at("grid_points").get<int>();
        if (j.contains("bootstrap_replicates")) spec.bootstrap_replicates = j.at("bootstrap_replicates").get<int>();
        if (j.contains("bootstrap_fraction")) spec.bootstrap_fraction = j.at("bootstrap_fraction").get<double>();
        if (j.contains("form")) spec.form = parse_form(j.at("form").get<std::string>());
        if (j.contains("epsilon")) spec.epsilon = j.at("epsilon").get<double>();
        if (j.contains("tol")) spec.solver.tol = j.at("tol").get<double>();
        if (j.contains("max_iters")) spec.solver.max_iters = j.at("max_iters").get<int>();
        if (j.contains("infeasible_kkt")) spec.infeasible_kkt = j.at("infeasible_kkt").get<double>();
        return spec;
    } catch (const nlohmann::json::exception& e) {
        throw UsageError(std::string("bench spec: ") + e.what());
    }
}

Json bench_json(const BenchReport& report) {
    Json j;
    j["spec"] = bench_spec_json(report.spec);
    j["balance_dimension"] = report.balance_dimension;
    j["max_recommended_delta"] = number(max_recommended_delta(report.balance_dimension));
    j["grid"] = report.grid;
    Json rows = Json::array();
    for (const auto& r : report.rows) {
        Json row;
        row["dispersion"] = std::string(to_string(r.dispersion));
        row["mode"] = std::string(to_string(r.mode));
        row["rmse"] = number(r.rmse);
        row["bias"] = number(r.bias);
        row["mcse_rmse"] = number(r.mcse_rmse);
        row["coverage"] = number(r.coverage);
        row["n_ok"] = r.n_ok;
        row["n_infeasible"] = r.n_infeasible;
        row["n_failed"] = r.n_failed;
        row["n_nonconverged"] = r.n_nonconverged;
        rows.push_back(row);
    }
    j["rows"] = rows;
    Json sweep = Json::array();
    for (const auto& r : report.sweep) {
        Json row;
        row["dispersion"] = std::string(to_string(r.dispersion));
        row["delta"] = r.delta;
        row["mse"] = number(r.mse);
        row["rmse"] = number(r.rmse);
        row["c_s"] = number(r.c_s);
        row["n_ok"] = r.n_ok;
        sweep.push_back(row);
    }
    j["sweep"] = sweep;
    Json log = Json::array();
    for (const auto& r : report.log) {
        Json row;
        row["replication"] = r.replication;
        row["dispersion"] = std::string(to_string(r.dispersion));
        row["mode"] = std::string(to_string(r.mode));
        row["delta"] = number(r.delta);
        row["estimate"] = number(r.estimate);
        row["truth"] = number(r.truth);
        row["ci"] = Json::array({number(r.ci_low), number(r.ci_high)});
        row["status"] = std::string(to_string(r.status));
        row["converged"] = r.converged;
        if (!r.note.empty()) row["note"] = r.note;
        log.push_back(row);
    }
    j["log"] = log;
    return j;
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

} // namespace minbal
