#include "minbal/dual_solver.hpp"

#include "minbal/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace minbal {

namespace {

int count_respondents(const Indicator& z) {
    int r = 0;
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        if (z[i] != 0 && z[i] != 1) throw DataError(DataError::Code::InvalidIndicator, "indicator entries must be 0 or 1");
        r += z[i];
    }
    return r;
}

} // namespace

DualProblem::DualProblem(BasisMatrix basis, Indicator z, Vector delta, DispersionSpec spec, BalanceTarget target)
    : basis_(std::move(basis)), z_(std::move(z)), delta_(std::move(delta)), spec_(spec), target_(std::move(target)) {
    const Eigen::Index n = basis_.rows();
    const Eigen::Index k = basis_.cols();
    if (k < 1) throw DataError(DataError::Code::DimensionMismatch, "dual problem needs at least one basis column");
    if (z_.size() != n) throw DataError(DataError::Code::DimensionMismatch, "indicator length does not match basis rows");
    if (delta_.size() != k) throw DataError(DataError::Code::DimensionMismatch, "delta length does not match basis columns");
    if (target_.values.size() != k) throw DataError(DataError::Code::DimensionMismatch, "target length does not match basis columns");
    if (!basis_.values.allFinite()) throw DataError(DataError::Code::NonFiniteValue, "basis has non-finite entries");
    for (Eigen::Index j = 0; j < k; ++j)
        if (!(delta_[j] >= 0.0) || !std::isfinite(delta_[j])) throw UsageError("delta entries must be nonnegative and finite");
    if (basis_.has_intercept() && delta_[0] != 0.0) throw UsageError("the intercept constraint must have delta_0 = 0");

    const int r = count_respondents(z_);
    if (r == 0) throw DataError(DataError::Code::EmptyGroup, "no units with z = 1 to weight");
    if (spec_.respondents != r || spec_.sample_size != n) {
        std::ostringstream os;
        os << "dispersion spec (r=" << spec_.respondents << ", n=" << spec_.sample_size
           << ") does not match the indicator (r=" << r << ", n=" << n << ")";
        throw DataError(DataError::Code::DimensionMismatch, os.str());
    }
    spec_.validate();
}

DualProblem DualProblem::population(BasisMatrix basis, Indicator z, Vector delta, DispersionKind kind, double epsilon) {
    BalanceTarget target = target_profile(basis, z, TargetKind::PopulationMean);
    return with_target(std::move(basis), std::move(z), std::move(delta), kind, std::move(target), epsilon);
}

DualProblem DualProblem::with_target(BasisMatrix basis, Indicator z, Vector delta, DispersionKind kind,
                                     BalanceTarget target, double epsilon) {
    const int r = count_respondents(z);
    if (r == 0) throw DataError(DataError::Code::EmptyGroup, "no units with z = 1 to weight");
    DispersionSpec spec{kind, r, static_cast<int>(basis.rows()), epsilon};
    return DualProblem(std::move(basis), std::move(z), std::move(delta), spec, std::move(target));
}

std::string_view to_string(SolveStatus status) noexcept {
    switch (status) {
    case SolveStatus::Converged: return "converged";
    case SolveStatus::MaxIterations: return "max_iterations";
    case SolveStatus::Diverged: return "diverged";
    }
    return "unknown";
}

double smooth_objective(const DualProblem& problem, const Vector& lambda) {
    if (lambda.size() != problem.dimension()) throw DataError(DataError::Code::DimensionMismatch, "lambda length mismatch");
    const Matrix& b = problem.basis().values;
    double value = problem.target().values.dot(lambda);
    for (Eigen::Index j = 0; j < b.rows(); ++j)
        if (problem.z()[j] != 0) value -= rho(b.row(j).dot(lambda), problem.spec());
    return value;
}

double objective(const DualProblem& problem, const Vector& lambda) {
    return smooth_objective(problem, lambda) + problem.delta().dot(lambda.cwiseAbs());
}

Vector recover_weights(const DualProblem& problem, const Vector& lambda) {
    if (lambda.size() != problem.dimension()) throw DataError(DataError::Code::DimensionMismatch, "lambda length mismatch");
    const Matrix& b = problem.basis().values;
    Vector w = Vector::Zero(b.rows());
    for (Eigen::Index j = 0; j < b.rows(); ++j)
        if (problem.z()[j] != 0) w[j] = rho_prime(b.row(j).dot(lambda), problem.spec());
    return w;
}

Vector smooth_gradient(const DualProblem& problem, const Vector& lambda) {
    const Vector w = recover_weights(problem, lambda);
    return -imbalance(w, problem.z(), problem.basis(), problem.target());
}

Vector prox_weighted_l1(const Vector& v, const Vector& thresholds) {
    if (v.size() != thresholds.size()) throw DataError(DataError::Code::DimensionMismatch, "prox: length mismatch");
    Vector out(v.size());
    for (Eigen::Index k = 0; k < v.size(); ++k) {
        const double t = thresholds[k];
        if (t < 0.0) throw UsageError("prox: thresholds must be nonnegative");
        const double a = std::abs(v[k]) - t;
        out[k] = a > 0.0 ? std::copysign(a, v[k]) : 0.0;
    }
    return out;
}

namespace {

// The problem restricted to respondents, written in coordinates mu with
// B~_k = (B_k - c_k) / s_k. Centring is only applied with an unpenalised
// intercept, so the L1 term stays separable: delta~_k = delta_k / s_k.
struct Reparametrized {
    Matrix rows;
    Vector target;
    Vector thresholds;
    Vector center;
    Vector scale;
    bool centered = false;

    Vector to_lambda(const Vector& mu) const {
        Vector lambda = mu.cwiseQuotient(scale);
        if (centered) {
            lambda[0] = mu[0];
            for (Eigen::Index k = 1; k < mu.size(); ++k) lambda[0] -= lambda[k] * center[k];
        }
        return lambda;
    }
};

Reparametrized reparametrize(const DualProblem& problem, bool precondition) {
    const Matrix& b = problem.basis().values;
    const Eigen::Index k_dim = b.cols();
    const int r = problem.respondents();

    Reparametrized rp;
    rp.rows.resize(r, k_dim);
    Eigen::Index row = 0;
    for (Eigen::Index j = 0; j < b.rows(); ++j)
        if (problem.z()[j] != 0) rp.rows.row(row++) = b.row(j);

    rp.center = Vector::Zero(k_dim);
    rp.scale = Vector::Ones(k_dim);
    const Vector& target = problem.target().values;
    const bool has_intercept = problem.basis().has_intercept();
    rp.centered = precondition && has_intercept && problem.delta()[0] == 0.0 && target[0] != 0.0;

    if (precondition) {
        for (Eigen::Index k = has_intercept ? 1 : 0; k < k_dim; ++k) {
            if (rp.centered) rp.center[k] = target[k] / target[0];
            const auto col = rp.rows.col(k).array();
            const double m = col.mean();
            const double sd = r > 1 ? std::sqrt((col - m).square().sum() / (r - 1)) : 0.0;
            const double rms = std::sqrt((col - rp.center[k]).square().mean());
            const double s = rp.centered ? sd : rms;
            rp.scale[k] = (s > 0.0 && std::isfinite(s)) ? s : 1.0;
        }
    }

    rp.target = target;
    rp.thresholds = problem.delta();
    for (Eigen::Index k = 0; k < k_dim; ++k) {
        if (rp.centered && k > 0) {
            rp.rows.col(k).array() -= rp.center[k];
            rp.target[k] -= target[0] * rp.center[k];
        }
        rp.rows.col(k) /= rp.scale[k];
        rp.target[k] /= rp.scale[k];
        rp.thresholds[k] /= rp.scale[k];
    }
    return rp;
}

// Smooth objective and gradient evaluated from precomputed scores t = R mu.
class SmoothPart {
public:
    SmoothPart(const Reparametrized& rp, const DispersionSpec& spec) : rp_(rp), spec_(spec), w_(rp.rows.rows()) {}

    double value(const Vector& mu, const Vector& scores) const {
        double v = rp_.target.dot(mu);
        for (Eigen::Index j = 0; j < scores.size(); ++j) v += neg_rho(scores[j]);
        return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
    }

    const Vector& gradient(const Vector& scores, Vector& grad) {
        for (Eigen::Index j = 0; j < scores.size(); ++j) w_[j] = rho_prime_fast(scores[j]);
        grad.noalias() = rp_.target - rp_.rows.transpose() * w_;
        return grad;
    }

    // f(to) - f(from), summed term by term so that small changes are not lost to cancellation.
    double change(const Vector& mu_from, const Vector& mu_to, const Vector& t_from, const Vector& t_to) const {
        double v = rp_.target.dot(mu_to - mu_from);
        for (Eigen::Index j = 0; j < t_from.size(); ++j) v += neg_rho_change(t_from[j], t_to[j]);
        return v;
    }

    // f(to) - f(from) - grad f(from)'(to - from); the linear target term cancels exactly.
    double bregman(const Vector& t_from, const Vector& t_to) const {
        double v = 0.0;
        for (Eigen::Index j = 0; j < t_from.size(); ++j) v += neg_rho_bregman(t_from[j], t_to[j]);
        return v;
    }

private:
    double neg_rho(double t) const {
        switch (spec_.kind) {
        case DispersionKind::Variance: return 0.25 * t * t - t * spec_.center();
        case DispersionKind::NegativeEntropy: return std::exp(-t - 1.0);
        case DispersionKind::SmoothedAbsoluteDeviation: return std::isfinite(t) ? -rho(t, spec_) : std::numeric_limits<double>::infinity();
        }
        return std::numeric_limits<double>::quiet_NaN();
    }

    // -rho(b) + rho(a)
    double neg_rho_change(double a, double b) const {
        switch (spec_.kind) {
        case DispersionKind::Variance: return (b - a) * (0.25 * (a + b) - spec_.center());
        case DispersionKind::NegativeEntropy: return std::exp(-a - 1.0) * std::expm1(a - b);
        case DispersionKind::SmoothedAbsoluteDeviation: return -integral_rho_prime(a, b);
        }
        return std::numeric_limits<double>::quiet_NaN();
    }

    // -rho(b) + rho(a) + rho'(a)(b - a) >= 0
    double neg_rho_bregman(double a, double b) const {
        const double h = b - a;
        switch (spec_.kind) {
        case DispersionKind::Variance: return 0.25 * h * h;
        case DispersionKind::NegativeEntropy: return std::exp(-a - 1.0) * (std::expm1(-h) + h);
        case DispersionKind::SmoothedAbsoluteDeviation: {
            // rho' is continuous and piecewise linear, so the trapezoid rule over its pieces is exact.
            const double ga = rho_prime_fast(a);
            double v = 0.0;
            for_each_piece(a, b, [&](double s1, double s2) {
                v += (s2 - s1) * (ga - 0.5 * (rho_prime_fast(s1) + rho_prime_fast(s2)));
            });
            return v;
        }
        }
        return std::numeric_limits<double>::quiet_NaN();
    }

    double integral_rho_prime(double a, double b) const {
        double v = 0.0;
        for_each_piece(a, b, [&](double s1, double s2) { v += 0.5 * (s2 - s1) * (rho_prime_fast(s1) + rho_prime_fast(s2)); });
        return v;
    }

    // Splits [a, b] (either orientation) at the kinks of the absdev rho'.
    template <class F>
    void for_each_piece(double a, double b, F&& f) const {
        const double kink = 1.0 + spec_.epsilon * spec_.epsilon;
        double cuts[2] = {-kink, kink};
        if (b < a) std::swap(cuts[0], cuts[1]);
        double from = a;
        for (double c : cuts) {
            if ((a < c && c < b) || (b < c && c < a)) {
                f(from, c);
                from = c;
            }
        }
        f(from, b);
    }

    double rho_prime_fast(double t) const {
        switch (spec_.kind) {
        case DispersionKind::Variance: return -0.5 * t + spec_.center();
        case DispersionKind::NegativeEntropy: return std::exp(-t - 1.0);
        case DispersionKind::SmoothedAbsoluteDeviation: return rho_prime(t, spec_);
        }
        return std::numeric_limits<double>::quiet_NaN();
    }

    const Reparametrized& rp_;
    const DispersionSpec& spec_;
    Vector w_;
};

double penalty(const Vector& thresholds, const Vector& mu) { return thresholds.dot(mu.cwiseAbs()); }

void require_finite_iterate(const Vector& v, int iteration) {
    if (!v.allFinite()) {
        std::ostringstream os;
        os << "solve_dual: non-finite iterate at iteration " << iteration;
        throw SolverError(os.str());
    }
}

bool respondent_gram_singular(const Matrix& rows) {
    const Matrix gram = rows.transpose() * rows / static_cast<double>(rows.rows());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
    const double hi = eig.eigenvalues().cwiseAbs().maxCoeff();
    const double lo = eig.eigenvalues().minCoeff();
    return !(hi > 0.0) || lo <= 1e-10 * hi;
}

void fill_diagnostics(SolveResult& result, const DualProblem& problem) {
    auto& d = result.diagnostics;
    d.min_weight = std::numeric_limits<double>::infinity();
    d.max_weight = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < result.weights.size(); ++j) {
        if (problem.z()[j] == 0) continue;
        const double w = result.weights[j];
        d.min_weight = std::min(d.min_weight, w);
        d.max_weight = std::max(d.max_weight, w);
        if (w < 0.0) ++d.negative_weights;
    }
    if (d.negative_weights > 0)
        d.warnings.push_back(std::to_string(d.negative_weights) + " negative weight(s); not clipped");
}

} // namespace

SolveResult solve_dual(const DualProblem& problem, const SolverOptions& options) {
    if (!(options.tol > 0.0) || options.max_iters < 1 || !(options.initial_step > 0.0) ||
        !(options.backtrack > 0.0 && options.backtrack < 1.0) || !(options.step_growth >= 1.0))
        throw UsageError("solve_dual: invalid solver options");

    const Reparametrized rp = reparametrize(problem, options.precondition);
    SmoothPart smooth(rp, problem.spec());
    const Eigen::Index k_dim = rp.rows.cols();

    SolveResult result;
    auto& diag = result.diagnostics;
    if (respondent_gram_singular(rp.rows)) {
        diag.rank_deficient = true;
        diag.warnings.push_back("respondent Gram matrix is numerically singular; dual solution may be non-unique");
    }

    Vector x = Vector::Zero(k_dim);
    Vector tx = Vector::Zero(rp.rows.rows());
    Vector y = x;
    Vector ty = tx;
    Vector gy(k_dim), gx(k_dim), x_new(k_dim), t_new(rp.rows.rows()), d(k_dim);

    double step = options.initial_step;
    double theta = 1.0;
    double phi_x = smooth.value(x, tx) + penalty(rp.thresholds, x);
    if (!std::isfinite(phi_x)) throw SolverError("solve_dual: objective is not finite at lambda = 0");

    auto gradient_mapping_at = [&](const Vector& point, const Vector& scores) {
        smooth.gradient(scores, gx);
        const Vector moved = prox_weighted_l1(point - step * gx, step * rp.thresholds);
        return (moved - point).norm() / step;
    };

    result.status = SolveStatus::MaxIterations;
    int it = 0;
    for (; it < options.max_iters; ++it) {
        smooth.gradient(ty, gy);
        for (;;) {
            x_new = prox_weighted_l1(y - step * gy, step * rp.thresholds);
            d = x_new - y;
            t_new.noalias() = rp.rows * x_new;
            if (smooth.bregman(ty, t_new) <= d.squaredNorm() / (2.0 * step) * (1.0 + 1e-10)) break;
            step *= options.backtrack;
            if (step < 1e-300) throw SolverError("solve_dual: line search step underflow");
        }
        require_finite_iterate(x_new, it);

        const double mapping_norm = d.norm() / step;
        const double decrease = smooth.change(x, x_new, tx, t_new) + penalty(rp.thresholds, x_new) -
                                penalty(rp.thresholds, x);

        const bool plain_step = theta == 1.0; // y == x, nothing to restart
        if (decrease > 0.0 && !plain_step) {
            // function-value restart: drop momentum and retry from x
            ++diag.restarts;
            theta = 1.0;
            y = x;
            ty = tx;
            continue;
        }

        const double theta_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * theta * theta));
        const double beta = (theta - 1.0) / theta_next;
        y = x_new + beta * (x_new - x);
        ty = t_new + beta * (t_new - tx);
        x = x_new;
        tx = t_new;
        phi_x = smooth.value(x, tx) + penalty(rp.thresholds, x);
        theta = theta_next;

        if (phi_x < options.objective_floor || x.cwiseAbs().maxCoeff() > options.lambda_bound) {
            result.status = SolveStatus::Diverged;
            ++it;
            break;
        }

        const double threshold = options.tol * (1.0 + std::abs(phi_x));
        if (mapping_norm <= threshold) {
            const double at_x = gradient_mapping_at(x, tx);
            diag.gradient_mapping_norm = at_x;
            if (at_x <= threshold) {
                result.status = SolveStatus::Converged;
                ++it;
                break;
            }
        }
        step *= options.step_growth;
    }

    if (result.status != SolveStatus::Converged) diag.gradient_mapping_norm = gradient_mapping_at(x, tx);
    diag.final_step = step;
    result.iterations = it;
    result.converged = result.status == SolveStatus::Converged;
    result.lambda = rp.to_lambda(x);
    require_finite_iterate(result.lambda, it);
    result.weights = recover_weights(problem, result.lambda);
    result.objective_value = objective(problem, result.lambda);
    result.kkt = kkt_residual(result, problem);
    fill_diagnostics(result, problem);
    return result;
}

std::vector<KktEntry> kkt_residual(const SolveResult& result, const DualProblem& problem, double tol) {
    const Vector imb = imbalance(result.weights, problem.z(), problem.basis(), problem.target());
    std::vector<KktEntry> out;
    out.reserve(static_cast<std::size_t>(imb.size()));
    for (Eigen::Index k = 0; k < imb.size(); ++k) {
        KktEntry e;
        e.k = static_cast<int>(k);
        e.name = problem.basis().columns[static_cast<std::size_t>(k)].name;
        e.imbalance = imb[k];
        e.delta = problem.delta()[k];
        e.lambda = result.lambda[k];
        e.active = e.lambda != 0.0;
        e.sign = e.lambda > 0.0 ? 1 : (e.lambda < 0.0 ? -1 : 0);
        if (e.sign > 0)
            e.residual = std::abs(e.imbalance - e.delta);
        else if (e.sign < 0)
            e.residual = std::abs(e.imbalance + e.delta);
        else
            e.residual = std::max(0.0, std::abs(e.imbalance) - e.delta);
        e.satisfied = e.residual <= tol;
        out.push_back(std::move(e));
    }
    return out;
}

double max_kkt_residual(const std::vector<KktEntry>& kkt) {
    double m = 0.0;
    for (const auto& e : kkt) m = std::max(m, e.residual);
    return m;
}

} // namespace minbal
