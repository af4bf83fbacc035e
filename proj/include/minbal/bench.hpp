#pragma once

#include "minbal/basis.hpp"
#include "minbal/dispersion.hpp"
#include "minbal/dual_solver.hpp"
#include "minbal/estimator.hpp"
#include "minbal/simgen.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace minbal {

enum class Dgp { KangSchafer, WongChan };
enum class BalanceMode { Exact, Tuned, Sweep };

std::string_view to_string(Dgp dgp) noexcept;
std::string_view to_string(BalanceMode mode) noexcept;
Dgp parse_dgp(std::string_view tag);
BalanceMode parse_mode(std::string_view tag);

struct BenchSpec {
    Dgp dgp = Dgp::KangSchafer;
    int n = 1000;
    Overlap overlap = Overlap::Good;
    OutcomeModel outcome_model = OutcomeModel::A;
    int replications = 200;
    Estimand estimand = Estimand::PopulationMean;
    std::vector<DispersionKind> dispersions{DispersionKind::NegativeEntropy};
    std::vector<BalanceMode> modes{BalanceMode::Exact};
    int moments = 1;
    bool standardize = true;
    std::uint64_t seed = 1;

    // Tuning / sweep grid in sd units; empty means default_grid(K, grid_points).
    std::vector<double> grid;
    int grid_points = 21;
    int bootstrap_replicates = 10;
    double bootstrap_fraction = 0.1;

    EstimatorForm form = EstimatorForm::Hajek;
    SolverOptions solver;
    double epsilon = 1e-4;
    // A non-converged solve whose worst KKT residual (sd units) exceeds this is infeasible.
    double infeasible_kkt = 1e-4;
};

void validate(const BenchSpec& spec);
// "ks-good", "ks-bad", "wc-a", "wc-b".
BenchSpec bench_preset(std::string_view name);

// Number of non-intercept basis columns a BenchSpec's design produces.
int design_balance_dimension(const BenchSpec& spec);
std::vector<double> resolve_grid(const BenchSpec& spec);

enum class RunStatus { Ok, Infeasible, Failed };
std::string_view to_string(RunStatus status) noexcept;

struct ReplicationRecord {
    int replication = 0;
    DispersionKind dispersion = DispersionKind::NegativeEntropy;
    BalanceMode mode = BalanceMode::Exact;
    double delta = 0.0;
    double estimate = 0.0;
    double truth = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    RunStatus status = RunStatus::Ok;
    bool converged = true;
    std::string note;
};

struct SweepRecord {
    int replication = 0;
    DispersionKind dispersion = DispersionKind::NegativeEntropy;
    double delta = 0.0;
    double estimate = 0.0;
    double truth = 0.0;
    double c_s = 0.0;
    RunStatus status = RunStatus::Ok;
};

struct ReplicationOutcome {
    std::vector<ReplicationRecord> records;
    std::vector<SweepRecord> sweep;
};

struct SummaryRow {
    DispersionKind dispersion = DispersionKind::NegativeEntropy;
    BalanceMode mode = BalanceMode::Exact;
    double rmse = 0.0; // NaN when no replication succeeded
    double bias = 0.0;
    double mcse_rmse = 0.0;
    double coverage = 0.0;
    int n_ok = 0;
    int n_infeasible = 0;
    int n_failed = 0;
    int n_nonconverged = 0;
};

struct SweepRow {
    DispersionKind dispersion = DispersionKind::NegativeEntropy;
    double delta = 0.0;
    double mse = 0.0;
    double rmse = 0.0;
    double c_s = 0.0;
    int n_ok = 0;
};

struct BenchReport {
    BenchSpec spec;
    int balance_dimension = 0;
    std::vector<double> grid;
    std::vector<SummaryRow> rows;
    std::vector<SweepRow> sweep;
    std::vector<ReplicationRecord> log;
    std::vector<SweepRecord> sweep_log;

    bool has_sweep() const noexcept { return !sweep.empty(); }
};

// One seeded replication; per-method failures are recorded, never thrown.
ReplicationOutcome run_replication(const BenchSpec& spec, int replication, const std::vector<double>& grid);

// Aggregates the ok records of one (dispersion, mode) cell.
SummaryRow summarize(const std::vector<ReplicationRecord>& records, DispersionKind dispersion, BalanceMode mode);

// Replications spread over OpenMP threads (jobs <= 0: runtime default);
// the report is assembled by replication index.
BenchReport run_bench(const BenchSpec& spec, int jobs = 0);
BenchReport run_bench_serial(const BenchSpec& spec);

// Tidy (dispersion, delta, mse, c_s) rows; throws UsageError for a report without a sweep.
std::string curves_csv(const BenchReport& report);
// Line plot of MSE and C_S against delta with a dotted marker at K^{-1/2}.
std::string curves_svg(const BenchReport& report);
void emit_curves(const BenchReport& report, const std::string& csv_path, const std::string& svg_path);

} // namespace minbal
