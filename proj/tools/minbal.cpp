// minbal: minimal-dispersion balancing weights from the command line.

#include "minbal/bench.hpp"
#include "minbal/errors.hpp"
#include "minbal/report.hpp"
#include "minbal/simgen.hpp"
#include "minbal/tuning.hpp"

#include <CLI11.hpp>
#include <omp.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

using namespace minbal;

constexpr const char* kVersion = "0.1.0";

enum Exit { kOk = 0, kUsage = 1, kData = 2, kSolver = 3 };

struct Common {
    bool strict = false;
    bool deterministic = false;
    int jobs = 0;
    std::string out;
};

struct DataOptions {
    std::string input;
    std::string z = "z";
    std::string y;
    std::string covariates;
    std::string dispersion = "entropy";
    std::string estimand = "mean";
    double delta = 0.0;
    double epsilon = 1e-4;
    int moments = 1;
    bool no_standardize = false;
    bool no_intercept = false;
    double tol = 1e-8;
    int max_iters = 50000;
};

struct TuneOptions {
    int grid_points = 21;
    std::string grid_max = "auto";
    int replicates = 10;
    double fraction = 0.1;
    std::uint64_t seed = 1;
    bool allow_large_delta = false;
};

// One weighting problem: respondents for the mean, controls for the ATT,
// and each arm for the ATE.
struct Arm {
    std::string label;
    Indicator z;
    BalanceTarget target;
};

struct Inputs {
    Dataset data;
    BasisMatrix basis;
    Estimand estimand = Estimand::PopulationMean;
    DispersionKind dispersion = DispersionKind::NegativeEntropy;
    std::vector<Arm> arms;
};

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

void add_data_options(CLI::App* cmd, DataOptions& o, bool needs_y) {
    cmd->add_option("--input", o.input, "CSV file with covariates and the indicator")->required()->check(CLI::ExistingFile);
    cmd->add_option("--z", o.z, "indicator column (response or treatment)")->capture_default_str();
    auto* y = cmd->add_option("--y", o.y, "outcome column");
    if (needs_y) y->required();
    cmd->add_option("--covariates", o.covariates, "comma-separated covariate columns (default: all others)");
    cmd->add_option("--dispersion", o.dispersion, "variance|entropy|absdev")
        ->capture_default_str()
        ->check(CLI::IsMember({"variance", "entropy", "absdev"}));
    cmd->add_option("--estimand", o.estimand, "mean|att|ate")->capture_default_str()->check(CLI::IsMember({"mean", "att", "ate"}));
    cmd->add_option("--delta", o.delta, "balance tolerance in sd units")->capture_default_str()->check(CLI::NonNegativeNumber);
    cmd->add_option("--epsilon", o.epsilon, "Huber width for absdev")->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--moments", o.moments, "1 or 2")->capture_default_str()->check(CLI::IsMember({1, 2}));
    cmd->add_flag("--no-standardize", o.no_standardize, "keep covariates on their raw scale");
    cmd->add_flag("--no-intercept", o.no_intercept, "drop the normalization constraint");
    cmd->add_option("--tol", o.tol, "solver tolerance")->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--max-iters", o.max_iters, "solver iteration cap")->capture_default_str()->check(CLI::PositiveNumber);
}

void add_tune_options(CLI::App* cmd, TuneOptions& t) {
    cmd->add_option("--grid-points", t.grid_points, "number of grid values")->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--grid-max", t.grid_max, "largest grid value, or auto for K^{-1/2}")->capture_default_str();
    cmd->add_option("--replicates", t.replicates, "bootstrap replicates")->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--fraction", t.fraction, "bootstrap replicate size as a fraction of n")->capture_default_str();
    cmd->add_flag("--allow-large-delta", t.allow_large_delta, "accept grid values above K^{-1/2}");
}

void add_common(CLI::App* cmd, Common& c, bool out_required) {
    auto* out = cmd->add_option("--out", c.out, "output file");
    if (out_required) out->required();
    cmd->add_flag("--strict", c.strict, "exit 3 when a solve does not converge");
    cmd->add_flag("--deterministic", c.deterministic, "omit timestamps from reports");
    cmd->add_option("--jobs", c.jobs, "worker threads (default: logical cores)")->envname("MINBAL_JOBS")->check(CLI::NonNegativeNumber);
}

SolverOptions solver_options(const DataOptions& o) {
    SolverOptions s;
    s.tol = o.tol;
    s.max_iters = o.max_iters;
    return s;
}

Inputs load_inputs(const DataOptions& o, bool needs_y) {
    Inputs in;
    in.estimand = parse_estimand(o.estimand);
    in.dispersion = parse_dispersion(o.dispersion);
    CsvSchema schema;
    schema.z_column = o.z;
    if (!o.y.empty()) schema.y_column = o.y;
    schema.covariate_columns = split_list(o.covariates);
    in.data = load_csv(o.input, schema);
    if (needs_y && !in.data.has_outcome) throw UsageError("an outcome column is required (--y)");

    BasisConfig cfg;
    cfg.moments = o.moments;
    cfg.standardize = !o.no_standardize;
    cfg.intercept = !o.no_intercept;
    in.basis = expand_basis(in.data.x, cfg, in.data.covariate_names);

    const Indicator& z = in.data.z;
    switch (in.estimand) {
    case Estimand::PopulationMean:
        in.arms.push_back({"respondents", z, target_profile(in.basis, z, TargetKind::PopulationMean)});
        break;
    case Estimand::ATT:
        in.arms.push_back({"control", complement(z), target_profile(in.basis, z, TargetKind::TreatedProfile)});
        break;
    case Estimand::ATE:
        in.arms.push_back({"treated", z, target_profile(in.basis, z, TargetKind::PopulationMean)});
        in.arms.push_back({"control", complement(z), target_profile(in.basis, z, TargetKind::PopulationMean)});
        break;
    }
    return in;
}

TuneConfig tune_config(const TuneOptions& t, int balance_dimension) {
    TuneConfig cfg;
    std::optional<double> hi;
    if (t.grid_max != "auto") {
        try {
            std::size_t used = 0;
            hi = std::stod(t.grid_max, &used);
            if (used != t.grid_max.size()) throw std::invalid_argument("trailing characters");
        } catch (const std::exception&) {
            throw UsageError("--grid-max must be 'auto' or a number, got '" + t.grid_max + "'");
        }
    }
    cfg.grid = default_grid(balance_dimension, t.grid_points, hi);
    cfg.replicates = t.replicates;
    cfg.fraction = t.fraction;
    cfg.seed = t.seed;
    cfg.allow_large_delta = t.allow_large_delta;
    validate(cfg, balance_dimension);
    return cfg;
}

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

Json meta(const std::string& command, const Common& c, Json config) {
    Json m;
    m["tool"] = "minbal";
    m["version"] = kVersion;
    m["command"] = command;
    m["config"] = std::move(config);
    if (!c.deterministic) m["generated_at"] = utc_timestamp();
    return m;
}

Json data_config(const DataOptions& o, const Inputs& in) {
    Json j;
    j["input"] = o.input;
    j["z"] = o.z;
    if (!o.y.empty()) j["y"] = o.y;
    Json cols = Json::array();
    for (const auto& name : in.data.covariate_names) cols.push_back(name);
    j["covariates"] = cols;
    j["dispersion"] = dispersion_json(in.dispersion, o.epsilon);
    j["estimand"] = std::string(to_string(in.estimand));
    j["delta"] = o.delta;
    j["moments"] = o.moments;
    j["standardize"] = !o.no_standardize;
    j["intercept"] = !o.no_intercept;
    j["tol"] = o.tol;
    j["max_iters"] = o.max_iters;
    Json basis = Json::array();
    for (const auto& name : in.basis.names()) basis.push_back(name);
    j["basis_columns"] = basis;
    Json warnings = Json::array();
    for (const auto& w : in.basis.warnings) warnings.push_back(w);
    j["basis_warnings"] = warnings;
    return j;
}

Json tune_options_json(const TuneOptions& t, const TuneConfig& cfg) {
    Json j;
    j["grid_points"] = t.grid_points;
    j["grid_max"] = t.grid_max;
    j["grid"] = cfg.grid;
    j["replicates"] = t.replicates;
    j["fraction"] = t.fraction;
    j["seed"] = t.seed;
    j["allow_large_delta"] = t.allow_large_delta;
    return j;
}

void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError(DataError::Code::FileNotFound, "cannot write '" + path + "'");
    out << text;
    if (!out) throw DataError(DataError::Code::Generic, "failed writing '" + path + "'");
}

std::string fmt(double v) {
    if (!std::isfinite(v)) return "NA";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// Tracks non-convergence so --strict can turn it into exit code 3.
struct Convergence {
    bool all = true;
    void note(const std::string& what, bool converged) {
        if (converged) return;
        all = false;
        std::cerr << "warning[nonconvergence]: " << what << " did not converge\n";
    }
    int exit_code(const Common& c) const { return (!all && c.strict) ? kSolver : kOk; }
};

DualProblem make_problem(const Inputs& in, const Arm& arm, double delta, const DataOptions& o) {
    return DualProblem::with_target(in.basis, arm.z, scaled_delta(in.basis, delta), in.dispersion, arm.target, o.epsilon);
}

int run_weights(const DataOptions& o, const Common& c, const std::string& csv) {
    const Inputs in = load_inputs(o, false);
    Convergence conv;
    Json report;
    report["meta"] = meta("weights", c, data_config(o, in));
    std::vector<std::pair<std::string, SolveResult>> results;
    for (const Arm& arm : in.arms) {
        const DualProblem problem = make_problem(in, arm, o.delta, o);
        SolveResult r = solve_dual(problem, solver_options(o));
        conv.note("weights (" + arm.label + ")", r.converged);
        Json block = solve_json(r, problem);
        block["arm"] = arm.label;
        report["arms"].push_back(block);
        results.emplace_back(arm.label, std::move(r));
    }
    if (results.size() == 1) {
        // Single-arm runs also expose the weights and KKT block at the top level.
        const Json arm = report["arms"][0];
        for (const auto& [key, value] : arm.items()) report[key] = value;
    }
    write_text(c.out, dump(report));
    if (!csv.empty()) {
        std::ostringstream os;
        os << "row,arm,z,weight,n_weight\n";
        const double n = static_cast<double>(in.data.size());
        for (std::size_t a = 0; a < results.size(); ++a)
            for (Eigen::Index i = 0; i < in.data.size(); ++i)
                os << i + 1 << ',' << results[a].first << ',' << in.arms[a].z[i] << ',' << fmt(results[a].second.weights[i])
                   << ',' << fmt(n * results[a].second.weights[i]) << '\n';
        write_text(csv, os.str());
    }
    return conv.exit_code(c);
}

int run_tune(const DataOptions& o, const TuneOptions& t, const Common& c, const std::string& csv) {
    const Inputs in = load_inputs(o, false);
    const TuneConfig cfg = tune_config(t, in.basis.balance_dimension());
    Convergence conv;
    Json config = data_config(o, in);
    config["tuning"] = tune_options_json(t, cfg);
    Json report;
    report["meta"] = meta("tune", c, config);
    std::ostringstream table;
    table << "arm,delta,c_s,converged\n";
    for (const Arm& arm : in.arms) {
        const TuneInput input{in.basis, arm.z, arm.target, in.dispersion, o.epsilon};
        const TuneResult result = tune_delta(input, cfg, solver_options(o));
        for (const auto& s : result.per_delta) {
            conv.note("tune (" + arm.label + ", delta=" + fmt(s.delta) + ")", s.converged);
            table << arm.label << ',' << fmt(s.delta) << ',' << fmt(s.c_s) << ',' << (s.converged ? 1 : 0) << '\n';
        }
        Json block = tune_json(result, cfg, in.basis.balance_dimension());
        block["arm"] = arm.label;
        report["arms"].push_back(block);
    }
    if (in.arms.size() == 1) {
        const Json arm = report["arms"][0];
        for (const auto& [key, value] : arm.items()) report[key] = value;
    }
    write_text(c.out, dump(report));
    if (!csv.empty()) write_text(csv, table.str());
    return conv.exit_code(c);
}

int run_estimate(const DataOptions& o, const TuneOptions& t, bool tune, const std::string& form_tag, const Common& c) {
    const Inputs in = load_inputs(o, true);
    const EstimatorForm form = parse_form(form_tag);
    Convergence conv;
    Json config = data_config(o, in);
    config["form"] = form_tag;
    config["tune"] = tune;

    std::optional<TuneConfig> cfg;
    if (tune) {
        cfg = tune_config(t, in.basis.balance_dimension());
        config["tuning"] = tune_options_json(t, *cfg);
    }

    Json arms = Json::array();
    std::vector<Vector> weights;
    for (const Arm& arm : in.arms) {
        double delta = o.delta;
        if (cfg) {
            const TuneInput input{in.basis, arm.z, arm.target, in.dispersion, o.epsilon};
            delta = tune_delta(input, *cfg, solver_options(o)).selected;
        }
        const DualProblem problem = make_problem(in, arm, delta, o);
        const SolveResult r = solve_dual(problem, solver_options(o));
        conv.note("weights (" + arm.label + ")", r.converged);
        arms.push_back({{"arm", arm.label},
                        {"delta", delta},
                        {"converged", r.converged},
                        {"iterations", r.iterations},
                        {"negative_weights", r.diagnostics.negative_weights}});
        weights.push_back(r.weights);
    }

    EstimateReport est;
    switch (in.estimand) {
    case Estimand::PopulationMean: est = estimate_mean(weights[0], in.data.z, in.data.y, in.basis, form); break;
    case Estimand::ATT: est = estimate_effect(in.data.y, in.data.z, in.basis, Vector(), weights[0], Estimand::ATT, form); break;
    case Estimand::ATE: est = estimate_effect(in.data.y, in.data.z, in.basis, weights[0], weights[1], Estimand::ATE, form); break;
    }
    Json report = estimate_json(est);
    report["arms"] = arms;
    Json out;
    out["meta"] = meta("estimate", c, config);
    for (const auto& [key, value] : report.items()) out[key] = value;
    write_text(c.out, dump(out));
    return conv.exit_code(c);
}

int run_simulate(const std::string& dgp, int n, const std::string& overlap, const std::string& model, std::uint64_t seed,
                 const Common& c) {
    const Dgp kind = parse_dgp(dgp);
    const Dataset d = kind == Dgp::KangSchafer ? gen_kang_schafer(n, parse_overlap(overlap), seed)
                                               : gen_wong_chan(n, parse_outcome_model(model), seed);
    write_csv(d, c.out);
    return kOk;
}

std::string summary_csv(const BenchReport& r) {
    std::ostringstream os;
    os << "dispersion,mode,rmse,bias,mcse_rmse,coverage,n_ok,n_infeasible,n_failed,n_nonconverged\n";
    for (const auto& row : r.rows)
        os << to_string(row.dispersion) << ',' << to_string(row.mode) << ',' << fmt(row.rmse) << ',' << fmt(row.bias) << ','
           << fmt(row.mcse_rmse) << ',' << fmt(row.coverage) << ',' << row.n_ok << ',' << row.n_infeasible << ','
           << row.n_failed << ',' << row.n_nonconverged << '\n';
    return os.str();
}

int run_bench_cmd(const std::string& spec_path, const std::string& preset, int replications, std::uint64_t seed,
                  bool seed_given, const std::string& modes, const std::string& out_dir, const Common& c) {
    if (spec_path.empty() == preset.empty()) throw UsageError("bench needs exactly one of --spec or --preset");
    BenchSpec spec;
    if (!spec_path.empty()) {
        std::ifstream in(spec_path);
        if (!in) throw DataError(DataError::Code::FileNotFound, "cannot open '" + spec_path + "'");
        Json j;
        try {
            j = Json::parse(in);
        } catch (const nlohmann::json::parse_error& e) {
            throw DataError(DataError::Code::ParseFailure, spec_path + ": " + e.what());
        }
        spec = bench_spec_from_json(j);
    } else {
        spec = bench_preset(preset);
    }
    if (replications > 0) spec.replications = replications;
    if (seed_given) spec.seed = seed;
    if (!modes.empty()) {
        spec.modes.clear();
        for (const auto& m : split_list(modes)) spec.modes.push_back(parse_mode(m));
    }
    validate(spec);

    const BenchReport report = run_bench(spec, c.jobs);
    std::filesystem::create_directories(out_dir);
    const std::filesystem::path dir(out_dir);
    Json j;
    j["meta"] = meta("bench", c, bench_spec_json(spec));
    const Json body = bench_json(report);
    for (const auto& [key, value] : body.items()) j[key] = value;
    write_text((dir / "report.json").string(), dump(j));
    write_text((dir / "summary.csv").string(), summary_csv(report));
    if (report.has_sweep()) emit_curves(report, (dir / "curves.csv").string(), (dir / "curves.svg").string());

    Convergence conv;
    for (const auto& row : report.rows)
        conv.note("bench " + std::string(to_string(row.dispersion)) + "/" + std::string(to_string(row.mode)) + " (" +
                      std::to_string(row.n_nonconverged) + " replications)",
                  row.n_nonconverged == 0);
    return conv.exit_code(c);
}

int run_check(int points) {
    bool all = true;
    for (DispersionKind kind :
         {DispersionKind::Variance, DispersionKind::NegativeEntropy, DispersionKind::SmoothedAbsoluteDeviation}) {
        // Operating range of the dual scores for r = 50 respondents out of n = 100.
        const DispersionSpec spec = make_dispersion(kind, 50, 100);
        std::vector<double> grid(static_cast<std::size_t>(points));
        for (int i = 0; i < points; ++i) grid[static_cast<std::size_t>(i)] = -2.0 + 6.0 * i / std::max(points - 1, 1);
        if (kind == DispersionKind::NegativeEntropy)
            for (double& t : grid) t = 1.0 + t;
        const double tol = kind == DispersionKind::SmoothedAbsoluteDeviation ? 1e-6 : 1e-8;
        const ConjugacyReport r = check_conjugacy(spec, grid);
        const bool pass = r.max_discrepancy() <= tol;
        all = all && pass;
        std::printf("[%s] conjugacy %-9s max discrepancy %.3e (tol %.0e, %zu points, worst t = %.4g)\n",
                    pass ? "PASS" : "FAIL", std::string(to_string(kind)).c_str(), r.max_discrepancy(), tol, r.points,
                    r.worst_t);
    }
    return all ? kOk : kSolver;
}

int fail(const char* tag, const std::string& message, int code) {
    std::cerr << "error[" << tag << "]: " << message << '\n';
    return code;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Minimal-dispersion approximately balancing weights"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    DataOptions data;
    TuneOptions tune;
    Common common;

    auto* weights = app.add_subcommand("weights", "solve for balancing weights");
    std::string weights_csv;
    add_data_options(weights, data, false);
    add_common(weights, common, false);
    weights->add_option("--csv", weights_csv, "also write per-unit weights as CSV");

    auto* tune_cmd = app.add_subcommand("tune", "select delta by bootstrapped covariate balance");
    std::string tune_csv;
    add_data_options(tune_cmd, data, false);
    add_tune_options(tune_cmd, tune);
    add_common(tune_cmd, common, false);
    tune_cmd->add_option("--seed", tune.seed, "bootstrap seed")->capture_default_str();
    tune_cmd->add_option("--csv", tune_csv, "also write the (delta, c_s) table as CSV");

    auto* estimate = app.add_subcommand("estimate", "weighted estimate with a confidence interval");
    bool estimate_tune = false;
    std::string form = "hajek";
    add_data_options(estimate, data, true);
    add_tune_options(estimate, tune);
    add_common(estimate, common, false);
    estimate->add_option("--seed", tune.seed, "bootstrap seed (with --tune)")->capture_default_str();
    estimate->add_flag("--tune", estimate_tune, "select delta per arm before estimating");
    estimate->add_option("--form", form, "hajek|ht")->capture_default_str()->check(CLI::IsMember({"hajek", "ht"}));

    auto* simulate = app.add_subcommand("simulate", "generate a simulated dataset");
    std::string dgp = "kang-schafer", overlap = "good", model = "A";
    int sim_n = 1000;
    std::uint64_t sim_seed = 1;
    simulate->add_option("--dgp", dgp, "kang-schafer|wong-chan")
        ->capture_default_str()
        ->check(CLI::IsMember({"kang-schafer", "wong-chan"}));
    simulate->add_option("--n", sim_n, "number of units")->capture_default_str()->check(CLI::Range(2, 100000000));
    simulate->add_option("--overlap", overlap, "good|bad")->capture_default_str()->check(CLI::IsMember({"good", "bad"}));
    simulate->add_option("--outcome-model", model, "A|B")->capture_default_str()->check(CLI::IsMember({"A", "B"}));
    simulate->add_option("--seed", sim_seed, "random seed")->capture_default_str();
    add_common(simulate, common, true);

    auto* bench = app.add_subcommand("bench", "run a replication study");
    std::string spec_path, preset, out_dir, modes;
    int replications = 0;
    std::uint64_t bench_seed = 0;
    bench->add_option("--spec", spec_path, "bench spec JSON")->check(CLI::ExistingFile);
    bench->add_option("--preset", preset, "ks-good|ks-bad|wc-a|wc-b")->check(CLI::IsMember({"ks-good", "ks-bad", "wc-a", "wc-b"}));
    bench->add_option("--out-dir", out_dir, "directory for report.json, summary.csv and curves")->required();
    bench->add_option("--replications", replications, "override the replication count")->check(CLI::PositiveNumber);
    auto* seed_opt = bench->add_option("--seed", bench_seed, "override the master seed");
    bench->add_option("--modes", modes, "override balance modes, e.g. exact,tuned,sweep");
    bench->add_flag("--strict", common.strict, "exit 3 when a replication does not converge");
    bench->add_flag("--deterministic", common.deterministic, "omit timestamps from reports");
    bench->add_option("--jobs", common.jobs, "worker threads (default: logical cores)")->envname("MINBAL_JOBS")->check(CLI::NonNegativeNumber);

    auto* check = app.add_subcommand("check", "verify the dispersion transforms");
    int check_points = 101;
    check->add_option("--points", check_points, "grid size")->capture_default_str()->check(CLI::Range(2, 1000000));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail("usage", std::string(e.what()) + " (see --help)", kUsage);
    }

    if (common.jobs > 0) omp_set_num_threads(common.jobs);

    try {
        if (*weights) return run_weights(data, common, weights_csv);
        if (*tune_cmd) return run_tune(data, tune, common, tune_csv);
        if (*estimate) return run_estimate(data, tune, estimate_tune, form, common);
        if (*simulate) return run_simulate(dgp, sim_n, overlap, model, sim_seed, common);
        if (*bench) return run_bench_cmd(spec_path, preset, replications, bench_seed, seed_opt->count() > 0, modes, out_dir, common);
        if (*check) return run_check(check_points);
    } catch (const UsageError& e) {
        return fail("usage", e.what(), kUsage);
    } catch (const DataError& e) {
        return fail((std::string("data:") + to_string(e.code())).c_str(), e.what(), kData);
    } catch (const DomainError& e) {
        return fail("data:domain", e.what(), kData);
    } catch (const SolverError& e) {
        return fail("solver", e.what(), kSolver);
    } catch (const std::exception& e) {
        return fail("internal", e.what(), kData);
    }
    return kUsage;
}
