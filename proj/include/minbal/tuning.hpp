#pragma once

#include "minbal/basis.hpp"
#include "minbal/dual_solver.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace minbal {

struct TuneConfig {
    std::vector<double> grid;  // candidate delta scalars in sd units, ascending
    int replicates = 10;
    double fraction = 0.1;
    std::uint64_t seed = 0;
    bool allow_large_delta = false;
    bool identity_sampling = false; // test hook: each replicate is the full sample in order
};

// `points` evenly spaced values from 0 to max_delta (default K^{-1/2}).
std::vector<double> default_grid(int balance_dimension, int points = 21, std::optional<double> max_delta = {});

// Largest admissible grid value: K^{-1/2}, or +inf when K = 0.
double max_recommended_delta(int balance_dimension);

// Throws UsageError on an empty, unsorted or negative grid, a grid value above
// K^{-1/2} (unless allow_large_delta), replicates < 1 or fraction outside (0, 1].
void validate(const TuneConfig& config, int balance_dimension);

// Rows drawn for replicate b: ceil(fraction * n) indices uniform with
// replacement from the sub-stream split_seed(seed, b). Redraws (after a
// zero-mass replicate) continue the same stream.
std::size_t replicate_size(const TuneConfig& config, std::size_t n);

/// Mean bootstrapped covariate balance C_S of fixed weights.
///
/// Each replicate scores the Hajek imbalance of every non-intercept column
/// against the full-sample target, divided by the full-sample sd of the
/// column, and takes the l2 norm; C_S is the mean over replicates. A
/// replicate with zero weighted mass is redrawn, at most 100 times.
double bootstrap_balance(const Vector& weights, const Indicator& z, const BasisMatrix& basis,
                         const BalanceTarget& target, const TuneConfig& config);

struct DeltaScore {
    double delta = 0.0;
    double c_s = 0.0;
    bool converged = false;
    SolveStatus status = SolveStatus::MaxIterations;
    int iterations = 0;
    double max_kkt = 0.0;
    std::string error;
};

struct GridPoint {
    DeltaScore score;
    SolveResult solve;
};

struct TuneResult {
    std::vector<DeltaScore> per_delta;
    std::size_t selected_index = 0;
    double selected = 0.0;
};

struct TuneInput {
    const BasisMatrix& basis;
    const Indicator& z;
    const BalanceTarget& target;
    DispersionKind dispersion = DispersionKind::NegativeEntropy;
    double epsilon = 1e-4;
};

// Solves the dual at every grid point and scores it. `parallel` distributes
// grid points over OpenMP threads; results do not depend on scheduling.
std::vector<GridPoint> evaluate_grid(const TuneInput& input, const TuneConfig& config, const SolverOptions& options,
                                     bool parallel);

// argmin of C_S over converged points, ties to the smaller delta. Throws
// SolverError listing every point when none converged.
std::size_t select_delta(const std::vector<DeltaScore>& scores);

TuneResult tune_delta(const TuneInput& input, const TuneConfig& config, const SolverOptions& options = {});
// Same computation in a plain loop; kept as the reference for the parallel path.
TuneResult tune_delta_serial(const TuneInput& input, const TuneConfig& config, const SolverOptions& options = {});

} // namespace minbal
