#include "minbal/tuning.hpp"

#include "minbal/errors.hpp"
#include "minbal/rng.hpp"

#include <cmath>
#include <exception>
#include <limits>
#include <sstream>

namespace minbal {

double max_recommended_delta(int balance_dimension) {
    return balance_dimension > 0 ? 1.0 / std::sqrt(static_cast<double>(balance_dimension))
                                 : std::numeric_limits<double>::infinity();
}

std::vector<double> default_grid(int balance_dimension, int points, std::optional<double> max_delta) {
    if (points < 1) throw UsageError("grid needs at least one point");
    double hi = max_delta ? *max_delta : max_recommended_delta(balance_dimension);
    if (!std::isfinite(hi)) hi = 1.0;
    if (!(hi >= 0.0)) throw UsageError("grid maximum must be nonnegative");
    std::vector<double> grid(static_cast<std::size_t>(points));
    if (points == 1) {
        grid[0] = hi;
        return grid;
    }
    for (int i = 0; i < points; ++i) grid[static_cast<std::size_t>(i)] = hi * i / (points - 1);
    grid.back() = hi;
    return grid;
}

void validate(const TuneConfig& config, int balance_dimension) {
    if (config.grid.empty()) throw UsageError("tuning grid is empty");
    const double cap = max_recommended_delta(balance_dimension);
    for (std::size_t i = 0; i < config.grid.size(); ++i) {
        const double d = config.grid[i];
        if (!(d >= 0.0) || !std::isfinite(d)) throw UsageError("tuning grid values must be nonnegative and finite");
        if (i > 0 && d < config.grid[i - 1]) throw UsageError("tuning grid must be sorted ascending");
        if (!config.allow_large_delta && d > cap * (1.0 + 1e-12)) {
            std::ostringstream os;
            os << "tuning grid value " << d << " exceeds K^{-1/2} = " << cap << " (use --allow-large-delta)";
            throw UsageError(os.str());
        }
    }
    if (config.replicates < 1) throw UsageError("replicates must be positive");
    if (!(config.fraction > 0.0 && config.fraction <= 1.0)) throw UsageError("replicate fraction must lie in (0, 1]");
}

std::size_t replicate_size(const TuneConfig& config, std::size_t n) {
    const auto m = static_cast<std::size_t>(std::ceil(config.fraction * static_cast<double>(n) - 1e-12));
    return m == 0 ? 1 : m;
}

double bootstrap_balance(const Vector& weights, const Indicator& z, const BasisMatrix& basis,
                         const BalanceTarget& target, const TuneConfig& config) {
    const Eigen::Index n = basis.rows();
    if (weights.size() != n || z.size() != n || target.values.size() != basis.cols())
        throw DataError(DataError::Code::DimensionMismatch, "bootstrap_balance: dimension mismatch");
    if (config.replicates < 1 || !(config.fraction > 0.0 && config.fraction <= 1.0))
        throw UsageError("bootstrap_balance: invalid replicate settings");

    std::vector<Eigen::Index> cols;
    for (Eigen::Index k = 0; k < basis.cols(); ++k)
        if (!basis.columns[static_cast<std::size_t>(k)].intercept) cols.push_back(k);

    const std::size_t m = config.identity_sampling ? static_cast<std::size_t>(n)
                                                   : replicate_size(config, static_cast<std::size_t>(n));
    const double total_abs_mass = weights.cwiseAbs().sum();

    double sum = 0.0;
    Vector num(static_cast<Eigen::Index>(cols.size()));
    for (int b = 0; b < config.replicates; ++b) {
        RandomStream stream(split_seed(config.seed, static_cast<std::uint64_t>(b)));
        double mass = 0.0;
        for (int attempt = 0;; ++attempt) {
            if (attempt > 100) throw SolverError("bootstrap_balance: replicate has zero weighted mass after 100 redraws");
            num.setZero();
            mass = 0.0;
            for (std::size_t s = 0; s < m; ++s) {
                const auto i = config.identity_sampling ? static_cast<Eigen::Index>(s)
                                                        : static_cast<Eigen::Index>(stream.index(static_cast<std::size_t>(n)));
                if (z[i] == 0) continue;
                const double w = weights[i];
                mass += w;
                for (std::size_t c = 0; c < cols.size(); ++c) num[static_cast<Eigen::Index>(c)] += w * basis.values(i, cols[c]);
            }
            if (std::abs(mass) > 1e-12 * total_abs_mass && mass != 0.0) break;
        }
        double sq = 0.0;
        for (std::size_t c = 0; c < cols.size(); ++c) {
            const Eigen::Index k = cols[c];
            const double sd = basis.columns[static_cast<std::size_t>(k)].sd;
            const double gap = (num[static_cast<Eigen::Index>(c)] / mass - target.values[k]) / sd;
            sq += gap * gap;
        }
        sum += std::sqrt(sq);
    }
    return sum / config.replicates;
}

namespace {

GridPoint evaluate_point(const TuneInput& input, const TuneConfig& config, const SolverOptions& options, double delta) {
    GridPoint point;
    point.score.delta = delta;
    point.score.c_s = std::numeric_limits<double>::quiet_NaN();
    try {
        const DualProblem problem = DualProblem::with_target(input.basis, input.z, scaled_delta(input.basis, delta),
                                                             input.dispersion, input.target, input.epsilon);
        point.solve = solve_dual(problem, options);
        point.score.converged = point.solve.converged;
        point.score.status = point.solve.status;
        point.score.iterations = point.solve.iterations;
        point.score.max_kkt = max_kkt_residual(point.solve.kkt);
        if (point.solve.status != SolveStatus::Diverged)
            point.score.c_s = bootstrap_balance(point.solve.weights, input.z, input.basis, input.target, config);
    } catch (const SolverError& e) {
        point.score.converged = false;
        point.score.error = e.what();
    }
    return point;
}

} // namespace

std::vector<GridPoint> evaluate_grid(const TuneInput& input, const TuneConfig& config, const SolverOptions& options,
                                     bool parallel) {
    validate(config, input.basis.balance_dimension());
    const auto count = static_cast<std::ptrdiff_t>(config.grid.size());
    std::vector<GridPoint> points(config.grid.size());
    if (!parallel) {
        for (std::ptrdiff_t g = 0; g < count; ++g)
            points[static_cast<std::size_t>(g)] = evaluate_point(input, config, options, config.grid[static_cast<std::size_t>(g)]);
        return points;
    }

    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t g = 0; g < count; ++g) {
        try {
            points[static_cast<std::size_t>(g)] = evaluate_point(input, config, options, config.grid[static_cast<std::size_t>(g)]);
        } catch (...) {
#pragma omp critical(minbal_tune_failure)
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
    return points;
}

std::size_t select_delta(const std::vector<DeltaScore>& scores) {
    std::size_t best = scores.size();
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!scores[i].converged || !std::isfinite(scores[i].c_s)) continue;
        if (best == scores.size() || scores[i].c_s < scores[best].c_s) best = i;
    }
    if (best == scores.size()) {
        std::ostringstream os;
        os << "no tuning grid point converged:";
        for (const auto& s : scores)
            os << " [delta=" << s.delta << " status=" << to_string(s.status) << " iterations=" << s.iterations
               << (s.error.empty() ? "" : " error=" + s.error) << "]";
        throw SolverError(os.str());
    }
    return best;
}

namespace {

TuneResult summarize(std::vector<GridPoint> points) {
    TuneResult result;
    result.per_delta.reserve(points.size());
    for (auto& p : points) result.per_delta.push_back(std::move(p.score));
    result.selected_index = select_delta(result.per_delta);
    result.selected = result.per_delta[result.selected_index].delta;
    return result;
}

} // namespace

TuneResult tune_delta(const TuneInput& input, const TuneConfig& config, const SolverOptions& options) {
    return summarize(evaluate_grid(input, config, options, true));
}

TuneResult tune_delta_serial(const TuneInput& input, const TuneConfig& config, const SolverOptions& options) {
    return summarize(evaluate_grid(input, config, options, false));
}

} // namespace minbal
