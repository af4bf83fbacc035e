#pragma once

#include "minbal/bench.hpp"
#include "minbal/dual_solver.hpp"
#include "minbal/estimator.hpp"
#include "minbal/tuning.hpp"

#include <json.hpp>

#include <string>

namespace minbal {

using Json = nlohmann::ordered_json;

Json dispersion_json(DispersionKind kind, double epsilon);

// {lambda, weights, weights_scaled, converged, status, iterations, objective, kkt, diagnostics, columns, ...}
Json solve_json(const SolveResult& result, const DualProblem& problem);
// {per_delta: [{delta, c_s, converged}], selected, ...}
Json tune_json(const TuneResult& result, const TuneConfig& config, int balance_dimension);
// {estimand, point, variance, ci: [lo, hi], form, n, r, diagnostics}
Json estimate_json(const EstimateReport& report);
Json bench_json(const BenchReport& report);

Json bench_spec_json(const BenchSpec& spec);
// Missing keys keep their defaults; unknown keys or bad tags throw UsageError.
BenchSpec bench_spec_from_json(const Json& j);

// Two-space indentation, trailing newline. NaN and infinities become null.
std::string dump(const Json& j);

} // namespace minbal
