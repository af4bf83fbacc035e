#pragma once

#include "minbal/basis.hpp"
#include "minbal/dispersion.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace minbal {

/// The unconstrained dual of the minimal-dispersion balancing program:
///
///   minimize  -sum_j z_j rho(B_j' lambda) + target' lambda + delta' |lambda|
///
/// With the population-mean target this is exactly
/// (1/n) sum_j [ -z_j n rho(B_j' lambda) + B_j' lambda ] + delta' |lambda|.
class DualProblem {
public:
    DualProblem(BasisMatrix basis, Indicator z, Vector delta, DispersionSpec spec, BalanceTarget target);

    // Builds the dispersion spec from the indicator (r = #{z = 1}, n = rows)
    // and uses the population-mean target.
    static DualProblem population(BasisMatrix basis, Indicator z, Vector delta, DispersionKind kind,
                                  double epsilon = 1e-4);

    static DualProblem with_target(BasisMatrix basis, Indicator z, Vector delta, DispersionKind kind,
                                   BalanceTarget target, double epsilon = 1e-4);

    const BasisMatrix& basis() const noexcept { return basis_; }
    const Indicator& z() const noexcept { return z_; }
    const Vector& delta() const noexcept { return delta_; }
    const DispersionSpec& spec() const noexcept { return spec_; }
    const BalanceTarget& target() const noexcept { return target_; }
    Eigen::Index dimension() const noexcept { return basis_.cols(); }
    int respondents() const noexcept { return spec_.respondents; }

private:
    BasisMatrix basis_;
    Indicator z_;
    Vector delta_;
    DispersionSpec spec_;
    BalanceTarget target_;
};

struct SolverOptions {
    double tol = 1e-8;          // gradient-mapping norm, relative to 1 + |objective|
    int max_iters = 50000;
    double initial_step = 1.0;
    double backtrack = 0.5;
    double step_growth = 1.1;   // multiplicative step increase after each accepted iteration
    double objective_floor = -1e10;
    double lambda_bound = 1e10;
    bool precondition = true;   // solve in centred/rescaled coordinates (same minimiser)
};

enum class SolveStatus { Converged, MaxIterations, Diverged };

std::string_view to_string(SolveStatus status) noexcept;

struct KktEntry {
    int k = 0;
    std::string name;
    double imbalance = 0.0;
    double delta = 0.0;
    double lambda = 0.0;
    bool active = false; // lambda_k != 0
    int sign = 0;        // sign(lambda_k)
    double residual = 0.0;
    bool satisfied = false;
};

struct SolveDiagnostics {
    int negative_weights = 0;
    double min_weight = 0.0;
    double max_weight = 0.0;
    bool rank_deficient = false;
    double gradient_mapping_norm = 0.0;
    int restarts = 0;
    double final_step = 0.0;
    std::vector<std::string> warnings;
};

struct SolveResult {
    Vector lambda;
    Vector weights; // zero where z = 0
    int iterations = 0;
    bool converged = false;
    SolveStatus status = SolveStatus::MaxIterations;
    double objective_value = 0.0;
    std::vector<KktEntry> kkt;
    SolveDiagnostics diagnostics;
};

// Full dual objective including the weighted L1 term.
double objective(const DualProblem& problem, const Vector& lambda);
// Smooth part only: -sum_j z_j rho(B_j' lambda) + target' lambda.
double smooth_objective(const DualProblem& problem, const Vector& lambda);
// target - sum_j z_j rho'(B_j' lambda) B_j, i.e. minus the signed imbalance of w = rho'(B lambda).
Vector smooth_gradient(const DualProblem& problem, const Vector& lambda);

// sign(v_k) max(|v_k| - t_k, 0); throws UsageError on a negative threshold.
Vector prox_weighted_l1(const Vector& v, const Vector& thresholds);

// Primal weights w_j = z_j rho'(B_j' lambda).
Vector recover_weights(const DualProblem& problem, const Vector& lambda);

// Accelerated proximal gradient (FISTA) with backtracking and function-value
// restart, started from lambda = 0.
SolveResult solve_dual(const DualProblem& problem, const SolverOptions& options = {});

// Stationarity of each balance constraint: lambda_k > 0 => imb_k = delta_k,
// lambda_k < 0 => imb_k = -delta_k, lambda_k = 0 => |imb_k| <= delta_k.
std::vector<KktEntry> kkt_residual(const SolveResult& result, const DualProblem& problem, double tol = 1e-6);

double max_kkt_residual(const std::vector<KktEntry>& kkt);

} // namespace minbal
