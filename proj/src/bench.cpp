#include "minbal/bench.hpp"

#include "minbal/errors.hpp"
#include "minbal/rng.hpp"
#include "minbal/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <omp.h>
#include <sstream>

namespace minbal {

std::string_view to_string(Dgp dgp) noexcept { return dgp == Dgp::KangSchafer ? "kang-schafer" : "wong-chan"; }

std::string_view to_string(BalanceMode mode) noexcept {
    switch (mode) {
    case BalanceMode::Exact: return "exact";
    case BalanceMode::Tuned: return "tuned";
    case BalanceMode::Sweep: return "sweep";
    }
    return "unknown";
}

Dgp parse_dgp(std::string_view tag) {
    if (tag == "kang-schafer") return Dgp::KangSchafer;
    if (tag == "wong-chan") return Dgp::WongChan;
    throw UsageError("unknown dgp '" + std::string(tag) + "' (expected kang-schafer|wong-chan)");
}

BalanceMode parse_mode(std::string_view tag) {
    if (tag == "exact") return BalanceMode::Exact;
    if (tag == "tuned") return BalanceMode::Tuned;
    if (tag == "sweep") return BalanceMode::Sweep;
    throw UsageError("unknown balance mode '" + std::string(tag) + "' (expected exact|tuned|sweep)");
}

std::string_view to_string(RunStatus status) noexcept {
    switch (status) {
    case RunStatus::Ok: return "ok";
    case RunStatus::Infeasible: return "infeasible";
    case RunStatus::Failed: return "failed";
    }
    return "unknown";
}

int design_balance_dimension(const BenchSpec& spec) {
    const int d = spec.dgp == Dgp::KangSchafer ? 4 : 10;
    return d * spec.moments;
}

std::vector<double> resolve_grid(const BenchSpec& spec) {
    if (!spec.grid.empty()) return spec.grid;
    return default_grid(design_balance_dimension(spec), spec.grid_points);
}

void validate(const BenchSpec& spec) {
    if (spec.n < 2) throw UsageError("bench: n must be at least 2");
    if (spec.replications < 1) throw UsageError("bench: replications must be at least 1");
    if (spec.dispersions.empty()) throw UsageError("bench: no dispersion configured");
    if (spec.modes.empty()) throw UsageError("bench: no balance mode configured");
    if (spec.moments != 1 && spec.moments != 2) throw UsageError("bench: moments must be 1 or 2");
    if (spec.dgp == Dgp::KangSchafer && spec.estimand != Estimand::PopulationMean)
        throw UsageError("bench: the Kang-Schafer design supports only the mean estimand");
    if (spec.dgp == Dgp::WongChan && spec.estimand == Estimand::PopulationMean)
        throw UsageError("bench: the Wong-Chan design needs estimand att or ate");
    TuneConfig cfg;
    cfg.grid = resolve_grid(spec);
    cfg.replicates = spec.bootstrap_replicates;
    cfg.fraction = spec.bootstrap_fraction;
    validate(cfg, design_balance_dimension(spec));
}

BenchSpec bench_preset(std::string_view name) {
    BenchSpec spec;
    spec.replications = 1000;
    spec.dispersions = {DispersionKind::SmoothedAbsoluteDeviation, DispersionKind::Variance,
                        DispersionKind::NegativeEntropy};
    spec.modes = {BalanceMode::Exact, BalanceMode::Tuned};
    if (name == "ks-good" || name == "ks-bad") {
        spec.dgp = Dgp::KangSchafer;
        spec.n = 1000;
        spec.overlap = name == "ks-good" ? Overlap::Good : Overlap::Bad;
        spec.estimand = Estimand::PopulationMean;
        spec.moments = 1;
        return spec;
    }
    if (name == "wc-a" || name == "wc-b") {
        spec.dgp = Dgp::WongChan;
        spec.n = 5000;
        spec.outcome_model = name == "wc-a" ? OutcomeModel::A : OutcomeModel::B;
        spec.estimand = Estimand::ATE;
        spec.moments = 2;
        return spec;
    }
    throw UsageError("unknown preset '" + std::string(name) + "' (expected ks-good|ks-bad|wc-a|wc-b)");
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Arm {
    Indicator z;
    BalanceTarget target;
};

struct ArmSolution {
    Vector weights;
    RunStatus status = RunStatus::Failed;
    bool converged = false;
    double c_s = kNaN;
    std::string note;
};

RunStatus classify(const SolveResult& solve, const BasisMatrix& basis, double kkt_limit) {
    if (solve.status == SolveStatus::Converged) return RunStatus::Ok;
    if (solve.status == SolveStatus::Diverged) return RunStatus::Infeasible;
    double worst = 0.0;
    for (const auto& e : solve.kkt) worst = std::max(worst, e.residual / basis.columns[static_cast<std::size_t>(e.k)].sd);
    return worst > kkt_limit ? RunStatus::Infeasible : RunStatus::Ok;
}

ArmSolution from_point(const GridPoint& p, const BasisMatrix& basis, double kkt_limit) {
    ArmSolution s;
    if (!p.score.error.empty()) {
        s.note = p.score.error;
        return s;
    }
    s.weights = p.solve.weights;
    s.status = classify(p.solve, basis, kkt_limit);
    s.converged = p.solve.converged;
    s.c_s = p.score.c_s;
    if (s.status == RunStatus::Infeasible) s.note = std::string("solver ") + std::string(to_string(p.solve.status));
    return s;
}

ArmSolution solve_exact(const BenchSpec& spec, const BasisMatrix& basis, const Arm& arm, DispersionKind kind) {
    ArmSolution s;
    try {
        const DualProblem problem =
            DualProblem::with_target(basis, arm.z, scaled_delta(basis, 0.0), kind, arm.target, spec.epsilon);
        const SolveResult r = solve_dual(problem, spec.solver);
        s.weights = r.weights;
        s.status = classify(r, basis, spec.infeasible_kkt);
        s.converged = r.converged;
        if (s.status == RunStatus::Infeasible) s.note = std::string("solver ") + std::string(to_string(r.status));
    } catch (const SolverError& e) {
        s.note = e.what();
    }
    return s;
}

struct Design {
    Dataset data;
    BasisMatrix basis;
    std::vector<Arm> arms;
    double truth = 0.0;
};

Design build_design(const BenchSpec& spec, std::uint64_t data_seed) {
    Design d;
    d.data = spec.dgp == Dgp::KangSchafer ? gen_kang_schafer(spec.n, spec.overlap, data_seed)
                                          : gen_wong_chan(spec.n, spec.outcome_model, data_seed);
    BasisConfig cfg;
    cfg.moments = spec.moments;
    cfg.standardize = spec.standardize;
    cfg.intercept = true;
    d.basis = expand_basis(d.data.x, cfg, d.data.covariate_names);
    const Indicator& z = d.data.z;
    switch (spec.estimand) {
    case Estimand::PopulationMean:
        d.arms.push_back({z, target_profile(d.basis, z, TargetKind::PopulationMean)});
        d.truth = d.data.truth->mean;
        break;
    case Estimand::ATT:
        d.arms.push_back({complement(z), target_profile(d.basis, z, TargetKind::TreatedProfile)});
        d.truth = d.data.truth->sample_att;
        break;
    case Estimand::ATE:
        d.arms.push_back({z, target_profile(d.basis, z, TargetKind::PopulationMean)});
        d.arms.push_back({complement(z), target_profile(d.basis, z, TargetKind::PopulationMean)});
        d.truth = d.data.truth->sample_ate;
        break;
    }
    return d;
}

RunStatus combine(const std::vector<const ArmSolution*>& arms) {
    RunStatus s = RunStatus::Ok;
    for (const auto* a : arms) {
        if (a->status == RunStatus::Failed) return RunStatus::Failed;
        if (a->status == RunStatus::Infeasible) s = RunStatus::Infeasible;
    }
    return s;
}

EstimateReport estimate_from(const BenchSpec& spec, const Design& d, const std::vector<const ArmSolution*>& arms) {
    switch (spec.estimand) {
    case Estimand::PopulationMean: return estimate_mean(arms[0]->weights, d.data.z, d.data.y, d.basis, spec.form);
    case Estimand::ATT:
        return estimate_effect(d.data.y, d.data.z, d.basis, Vector(), arms[0]->weights, Estimand::ATT, spec.form);
    case Estimand::ATE:
        return estimate_effect(d.data.y, d.data.z, d.basis, arms[0]->weights, arms[1]->weights, Estimand::ATE, spec.form);
    }
    throw UsageError("unsupported estimand");
}

double point_from(const BenchSpec& spec, const Design& d, const std::vector<const ArmSolution*>& arms) {
    switch (spec.estimand) {
    case Estimand::PopulationMean: return weighted_mean(arms[0]->weights, d.data.z, d.data.y, spec.form);
    case Estimand::ATT: {
        const Indicator control = complement(d.data.z);
        double treated = 0.0;
        for (Eigen::Index i = 0; i < d.data.z.size(); ++i)
            if (d.data.z[i] == 1) treated += d.data.y[i];
        return treated / d.data.count_z() - weighted_mean(arms[0]->weights, control, d.data.y, spec.form);
    }
    case Estimand::ATE:
        return weighted_mean(arms[0]->weights, d.data.z, d.data.y, spec.form) -
               weighted_mean(arms[1]->weights, complement(d.data.z), d.data.y, spec.form);
    }
    return kNaN;
}

ReplicationRecord make_record(const BenchSpec& spec, const Design& d, int rep, DispersionKind kind, BalanceMode mode,
                              double delta, const std::vector<const ArmSolution*>& arms) {
    ReplicationRecord rec;
    rec.replication = rep;
    rec.dispersion = kind;
    rec.mode = mode;
    rec.delta = delta;
    rec.truth = d.truth;
    rec.estimate = rec.ci_low = rec.ci_high = kNaN;
    rec.status = combine(arms);
    rec.converged = std::all_of(arms.begin(), arms.end(), [](const ArmSolution* a) { return a->converged; });
    for (const auto* a : arms)
        if (!a->note.empty()) rec.note += (rec.note.empty() ? "" : "; ") + a->note;
    if (rec.status != RunStatus::Ok) return rec;
    try {
        const EstimateReport est = estimate_from(spec, d, arms);
        rec.estimate = est.point;
        rec.ci_low = est.ci_low;
        rec.ci_high = est.ci_high;
    } catch (const std::exception& e) {
        rec.status = RunStatus::Failed;
        rec.note += (rec.note.empty() ? "" : "; ") + std::string(e.what());
    }
    return rec;
}

bool has_mode(const BenchSpec& spec, BalanceMode mode) {
    return std::find(spec.modes.begin(), spec.modes.end(), mode) != spec.modes.end();
}

} // namespace

ReplicationOutcome run_replication(const BenchSpec& spec, int replication, const std::vector<double>& grid) {
    const std::uint64_t rep_seed = split_seed(spec.seed, static_cast<std::uint64_t>(replication));
    const Design d = build_design(spec, split_seed(rep_seed, 0));

    TuneConfig tune;
    tune.grid = grid;
    tune.replicates = spec.bootstrap_replicates;
    tune.fraction = spec.bootstrap_fraction;
    tune.seed = split_seed(rep_seed, 1);
    tune.allow_large_delta = true; // validated against the design dimension up front

    const bool need_grid = has_mode(spec, BalanceMode::Tuned) || has_mode(spec, BalanceMode::Sweep);
    ReplicationOutcome out;

    for (DispersionKind kind : spec.dispersions) {
        const std::size_t n_arms = d.arms.size();
        std::vector<std::vector<ArmSolution>> grid_solutions(n_arms);
        std::vector<ArmSolution> exact(n_arms);

        for (std::size_t a = 0; a < n_arms; ++a) {
            if (need_grid) {
                const TuneInput input{d.basis, d.arms[a].z, d.arms[a].target, kind, spec.epsilon};
                for (const GridPoint& p : evaluate_grid(input, tune, spec.solver, false))
                    grid_solutions[a].push_back(from_point(p, d.basis, spec.infeasible_kkt));
            }
            if (has_mode(spec, BalanceMode::Exact)) {
                exact[a] = (need_grid && grid.front() == 0.0) ? grid_solutions[a].front()
                                                              : solve_exact(spec, d.basis, d.arms[a], kind);
            }
        }

        for (BalanceMode mode : spec.modes) {
            if (mode == BalanceMode::Exact) {
                std::vector<const ArmSolution*> arms;
                for (const auto& e : exact) arms.push_back(&e);
                out.records.push_back(make_record(spec, d, replication, kind, mode, 0.0, arms));
            } else if (mode == BalanceMode::Tuned) {
                std::vector<const ArmSolution*> arms;
                double delta_used = 0.0;
                std::string failure;
                for (std::size_t a = 0; a < n_arms; ++a) {
                    std::vector<DeltaScore> scores;
                    for (std::size_t g = 0; g < grid.size(); ++g) {
                        DeltaScore s;
                        s.delta = grid[g];
                        s.c_s = grid_solutions[a][g].c_s;
                        s.converged = grid_solutions[a][g].status == RunStatus::Ok;
                        scores.push_back(s);
                    }
                    try {
                        const std::size_t pick = select_delta(scores);
                        arms.push_back(&grid_solutions[a][pick]);
                        delta_used = std::max(delta_used, grid[pick]);
                    } catch (const SolverError& e) {
                        failure = e.what();
                    }
                }
                if (!failure.empty()) {
                    ReplicationRecord rec;
                    rec.replication = replication;
                    rec.dispersion = kind;
                    rec.mode = mode;
                    rec.truth = d.truth;
                    rec.estimate = rec.ci_low = rec.ci_high = kNaN;
                    rec.delta = kNaN;
                    rec.status = RunStatus::Failed;
                    rec.converged = false;
                    rec.note = failure;
                    out.records.push_back(std::move(rec));
                } else {
                    out.records.push_back(make_record(spec, d, replication, kind, mode, delta_used, arms));
                }
            } else {
                for (std::size_t g = 0; g < grid.size(); ++g) {
                    std::vector<const ArmSolution*> arms;
                    double c_s = 0.0;
                    for (std::size_t a = 0; a < n_arms; ++a) {
                        arms.push_back(&grid_solutions[a][g]);
                        c_s += grid_solutions[a][g].c_s / static_cast<double>(n_arms);
                    }
                    SweepRecord rec;
                    rec.replication = replication;
                    rec.dispersion = kind;
                    rec.delta = grid[g];
                    rec.truth = d.truth;
                    rec.c_s = c_s;
                    rec.status = combine(arms);
                    rec.estimate = kNaN;
                    if (rec.status == RunStatus::Ok) {
                        try {
                            rec.estimate = point_from(spec, d, arms);
                        } catch (const std::exception&) {
                            rec.status = RunStatus::Failed;
                        }
                    }
                    out.sweep.push_back(rec);
                }
            }
        }
    }
    return out;
}

SummaryRow summarize(const std::vector<ReplicationRecord>& records, DispersionKind dispersion, BalanceMode mode) {
    SummaryRow row;
    row.dispersion = dispersion;
    row.mode = mode;
    std::vector<double> errors;
    int covered = 0;
    for (const auto& r : records) {
        if (r.dispersion != dispersion || r.mode != mode) continue;
        if (r.status == RunStatus::Infeasible) {
            ++row.n_infeasible;
            continue;
        }
        if (r.status == RunStatus::Failed) {
            ++row.n_failed;
            continue;
        }
        if (!r.converged) ++row.n_nonconverged;
        errors.push_back(r.estimate - r.truth);
        if (r.ci_low <= r.truth && r.truth <= r.ci_high) ++covered;
    }
    row.n_ok = static_cast<int>(errors.size());
    if (errors.empty()) {
        row.rmse = row.bias = row.mcse_rmse = row.coverage = kNaN;
        return row;
    }
    const double m = static_cast<double>(errors.size());
    double sum = 0.0, sq = 0.0;
    for (double e : errors) {
        sum += e;
        sq += e * e;
    }
    const double mse = sq / m;
    row.bias = sum / m;
    row.rmse = std::sqrt(mse);
    row.coverage = covered / m;
    if (errors.size() > 1 && row.rmse > 0.0) {
        double var = 0.0;
        for (double e : errors) var += (e * e - mse) * (e * e - mse);
        var /= (m - 1.0);
        row.mcse_rmse = std::sqrt(var / m) / (2.0 * row.rmse);
    } else {
        row.mcse_rmse = 0.0;
    }
    return row;
}

namespace {

BenchReport assemble(const BenchSpec& spec, const std::vector<double>& grid, std::vector<ReplicationOutcome>& outcomes) {
    BenchReport report;
    report.spec = spec;
    report.grid = grid;
    report.balance_dimension = design_balance_dimension(spec);
    for (auto& o : outcomes) {
        report.log.insert(report.log.end(), o.records.begin(), o.records.end());
        report.sweep_log.insert(report.sweep_log.end(), o.sweep.begin(), o.sweep.end());
    }
    for (DispersionKind kind : spec.dispersions)
        for (BalanceMode mode : spec.modes)
            if (mode != BalanceMode::Sweep) report.rows.push_back(summarize(report.log, kind, mode));

    if (has_mode(spec, BalanceMode::Sweep)) {
        for (DispersionKind kind : spec.dispersions) {
            for (double delta : grid) {
                SweepRow row;
                row.dispersion = kind;
                row.delta = delta;
                double sq = 0.0, cs = 0.0;
                int cs_count = 0;
                for (const auto& r : report.sweep_log) {
                    if (r.dispersion != kind || r.delta != delta) continue;
                    if (std::isfinite(r.c_s)) {
                        cs += r.c_s;
                        ++cs_count;
                    }
                    if (r.status != RunStatus::Ok) continue;
                    sq += (r.estimate - r.truth) * (r.estimate - r.truth);
                    ++row.n_ok;
                }
                row.mse = row.n_ok > 0 ? sq / row.n_ok : kNaN;
                row.rmse = std::sqrt(row.mse);
                row.c_s = cs_count > 0 ? cs / cs_count : kNaN;
                report.sweep.push_back(row);
            }
        }
    }
    return report;
}

} // namespace

BenchReport run_bench(const BenchSpec& spec, int jobs) {
    validate(spec);
    const std::vector<double> grid = resolve_grid(spec);
    std::vector<ReplicationOutcome> outcomes(static_cast<std::size_t>(spec.replications));
    const int threads = jobs > 0 ? jobs : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
    for (int rep = 0; rep < spec.replications; ++rep)
        outcomes[static_cast<std::size_t>(rep)] = run_replication(spec, rep, grid);
    return assemble(spec, grid, outcomes);
}

BenchReport run_bench_serial(const BenchSpec& spec) {
    validate(spec);
    const std::vector<double> grid = resolve_grid(spec);
    std::vector<ReplicationOutcome> outcomes(static_cast<std::size_t>(spec.replications));
    for (int rep = 0; rep < spec.replications; ++rep)
        outcomes[static_cast<std::size_t>(rep)] = run_replication(spec, rep, grid);
    return assemble(spec, grid, outcomes);
}

namespace {

std::string fmt(double v, const char* spec = "%.17g") {
    if (std::isnan(v)) return "NA";
    char buf[40];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

void require_sweep(const BenchReport& report) {
    if (!report.has_sweep()) throw UsageError("curves need a report produced with the sweep balance mode");
}

} // namespace

std::string curves_csv(const BenchReport& report) {
    require_sweep(report);
    std::ostringstream os;
    os << "dispersion,delta,mse,c_s\n";
    for (const auto& row : report.sweep)
        os << to_string(row.dispersion) << ',' << fmt(row.delta) << ',' << fmt(row.mse) << ',' << fmt(row.c_s) << '\n';
    return os.str();
}

std::string curves_svg(const BenchReport& report) {
    require_sweep(report);
    constexpr double width = 720, height = 420, left = 70, right = 70, top = 40, bottom = 50;
    const double plot_w = width - left - right;
    const double plot_h = height - top - bottom;
    const double marker = max_recommended_delta(report.balance_dimension);

    double x_max = std::isfinite(marker) ? marker : 0.0;
    double mse_max = 0.0, cs_max = 0.0;
    for (const auto& r : report.sweep) {
        x_max = std::max(x_max, r.delta);
        if (std::isfinite(r.mse)) mse_max = std::max(mse_max, r.mse);
        if (std::isfinite(r.c_s)) cs_max = std::max(cs_max, r.c_s);
    }
    if (!(x_max > 0.0)) x_max = 1.0;
    if (!(mse_max > 0.0)) mse_max = 1.0;
    if (!(cs_max > 0.0)) cs_max = 1.0;

    auto px = [&](double x) { return left + plot_w * x / x_max; };
    auto py = [&](double v, double vmax) { return top + plot_h * (1.0 - v / vmax); };
    const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c"};

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
       << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
    os << "<rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
    os << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << plot_w << "\" height=\"" << plot_h
       << "\" fill=\"none\" stroke=\"black\"/>\n";
    os << "<text x=\"" << width / 2 << "\" y=\"" << height - 12 << "\" text-anchor=\"middle\" font-size=\"13\">delta (sd units)</text>\n";
    os << "<text x=\"16\" y=\"" << top + plot_h / 2 << "\" font-size=\"13\" transform=\"rotate(-90 16 " << top + plot_h / 2
       << ")\" text-anchor=\"middle\">MSE (solid), max " << fmt(mse_max, "%.4g") << "</text>\n";
    os << "<text x=\"" << width - 16 << "\" y=\"" << top + plot_h / 2 << "\" font-size=\"13\" transform=\"rotate(90 "
       << width - 16 << ' ' << top + plot_h / 2 << ")\" text-anchor=\"middle\">C_S (dashed), max " << fmt(cs_max, "%.4g")
       << "</text>\n";
    for (int tick = 0; tick <= 4; ++tick) {
        const double x = x_max * tick / 4.0;
        os << "<text x=\"" << fmt(px(x), "%.2f") << "\" y=\"" << top + plot_h + 16
           << "\" text-anchor=\"middle\" font-size=\"11\">" << fmt(x, "%.3g") << "</text>\n";
    }
    if (std::isfinite(marker)) {
        os << "<line x1=\"" << fmt(px(marker), "%.2f") << "\" y1=\"" << top << "\" x2=\"" << fmt(px(marker), "%.2f")
           << "\" y2=\"" << top + plot_h << "\" stroke=\"gray\" stroke-dasharray=\"2,4\" data-delta=\"" << fmt(marker)
           << "\"/>\n";
    }

    std::size_t series = 0;
    for (DispersionKind kind : report.spec.dispersions) {
        const char* color = colors[series++ % 3];
        std::ostringstream mse_pts, cs_pts;
        for (const auto& r : report.sweep) {
            if (r.dispersion != kind) continue;
            if (std::isfinite(r.mse)) mse_pts << fmt(px(r.delta), "%.2f") << ',' << fmt(py(r.mse, mse_max), "%.2f") << ' ';
            if (std::isfinite(r.c_s)) cs_pts << fmt(px(r.delta), "%.2f") << ',' << fmt(py(r.c_s, cs_max), "%.2f") << ' ';
        }
        os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"" << mse_pts.str() << "\"/>\n";
        os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" stroke-dasharray=\"6,4\" points=\""
           << cs_pts.str() << "\"/>\n";
        os << "<text x=\"" << left + 8 << "\" y=\"" << top + 16 * series << "\" font-size=\"12\" fill=\"" << color << "\">"
           << to_string(kind) << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

void emit_curves(const BenchReport& report, const std::string& csv_path, const std::string& svg_path) {
    const std::string csv = curves_csv(report);
    const std::string svg = curves_svg(report);
    std::ofstream c(csv_path);
    std::ofstream s(svg_path);
    if (!c || !s) throw DataError(DataError::Code::FileNotFound, "cannot write curve files");
    c << csv;
    s << svg;
}

} // namespace minbal
