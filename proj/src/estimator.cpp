#include "minbal/estimator.hpp"

#include "minbal/errors.hpp"

#include <cmath>
#include <sstream>

namespace minbal {

std::string_view to_string(EstimatorForm form) noexcept {
    return form == EstimatorForm::HT ? "ht" : "hajek";
}

EstimatorForm parse_form(std::string_view tag) {
    if (tag == "ht") return EstimatorForm::HT;
    if (tag == "hajek") return EstimatorForm::Hajek;
    throw UsageError("unknown estimator form '" + std::string(tag) + "' (expected ht|hajek)");
}

Indicator complement(const Indicator& z) {
    return (Indicator::Ones(z.size()) - z).eval();
}

namespace {

void check_lengths(const Vector& w, const Indicator& z, const Vector& y) {
    if (w.size() != z.size() || y.size() != z.size())
        throw DataError(DataError::Code::DimensionMismatch, "estimator: weights, indicator and outcome lengths differ");
}

// Outcome with non-respondent entries replaced by zero.
Vector observed(const Indicator& z, const Vector& y) {
    Vector out = Vector::Zero(y.size());
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        if (z[i] == 0) continue;
        if (!std::isfinite(y[i])) {
            std::ostringstream os;
            os << "estimator: missing or non-finite outcome for weighted unit at row " << i;
            throw DataError(DataError::Code::NonFiniteValue, os.str());
        }
        out[i] = y[i];
    }
    return out;
}

std::string collinear_columns(const Matrix& gram, const BasisMatrix& basis) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
    const Vector v = eig.eigenvectors().col(0);
    std::ostringstream os;
    bool first = true;
    for (Eigen::Index k = 0; k < v.size(); ++k) {
        if (std::abs(v[k]) < 0.1) continue;
        os << (first ? "" : ", ") << basis.columns[static_cast<std::size_t>(k)].name;
        first = false;
    }
    return os.str();
}

bool factorization_ok(const Eigen::LDLT<Matrix>& ldlt) {
    if (ldlt.info() != Eigen::Success) return false;
    const Vector d = ldlt.vectorD().cwiseAbs();
    const double hi = d.maxCoeff();
    return hi > 0.0 && std::isfinite(hi) && d.minCoeff() > 1e-12 * hi;
}

} // namespace

double weighted_mean(const Vector& weights, const Indicator& z, const Vector& y, EstimatorForm form) {
    check_lengths(weights, z, y);
    const Vector yo = observed(z, y);
    double num = 0.0;
    double mass = 0.0;
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        if (z[i] == 0) continue;
        num += weights[i] * yo[i];
        mass += weights[i];
    }
    if (form == EstimatorForm::HT) return num;
    if (mass == 0.0) throw DataError(DataError::Code::EmptyGroup, "Hajek estimator: weights have zero mass");
    return num / mass;
}

VarianceEstimate variance_estimate(const Vector& weights, const Indicator& z, const Vector& y,
                                   const BasisMatrix& basis) {
    check_lengths(weights, z, y);
    if (basis.rows() != z.size())
        throw DataError(DataError::Code::DimensionMismatch, "variance_estimate: basis rows differ from sample size");
    const Eigen::Index n = z.size();
    const Eigen::Index k_dim = basis.cols();
    const double nd = static_cast<double>(n);
    const Vector yo = observed(z, y);
    const Matrix& b = basis.values;

    Vector zw(n);
    for (Eigen::Index i = 0; i < n; ++i) zw[i] = z[i] != 0 ? weights[i] : 0.0;

    const Matrix gram = b.transpose() * zw.asDiagonal() * b / nd;
    const Vector cross = b.transpose() * zw.cwiseProduct(yo) / nd;

    VarianceEstimate out;
    Eigen::LDLT<Matrix> ldlt(gram);
    if (!factorization_ok(ldlt)) {
        const double ridge = 1e-10 * gram.trace() / static_cast<double>(k_dim);
        Matrix stabilized = gram;
        stabilized.diagonal().array() += ridge;
        ldlt.compute(stabilized);
        out.ridge_applied = true;
        out.warnings.push_back("weighted Gram matrix singular; ridge-stabilized");
        if (!(ridge > 0.0) || ldlt.info() != Eigen::Success || !factorization_ok(ldlt))
            throw SolverError("variance_estimate: singular weighted Gram matrix; collinear columns: " +
                              collinear_columns(gram, basis));
    }
    out.beta = ldlt.solve(cross);

    const double y_hat = zw.dot(yo);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double nzw = nd * zw[i];
        const double term = nzw * yo[i] - y_hat - b.row(i).dot(out.beta) * (nzw - 1.0);
        acc += term * term;
    }
    out.vk = acc / nd;
    out.half_width = kNormalQuantile975 * std::sqrt(out.vk / nd);
    return out;
}

EstimateReport estimate_mean(const Vector& weights, const Indicator& z, const Vector& y, const BasisMatrix& basis,
                             EstimatorForm form) {
    EstimateReport report;
    report.estimand = Estimand::PopulationMean;
    report.form = form;
    report.n = static_cast<int>(z.size());
    report.r = static_cast<int>(z.sum());
    report.point = weighted_mean(weights, z, y, form);
    const VarianceEstimate v = variance_estimate(weights, z, y, basis);
    report.variance = v.vk / static_cast<double>(report.n);
    report.ci_low = report.point - v.half_width;
    report.ci_high = report.point + v.half_width;
    report.diagnostics = v.warnings;
    return report;
}

EstimateReport estimate_effect(const Vector& y, const Indicator& treatment, const BasisMatrix& basis,
                               const Vector& treated_weights, const Vector& control_weights, Estimand estimand,
                               EstimatorForm form) {
    if (estimand == Estimand::PopulationMean)
        throw UsageError("estimate_effect: use estimate_mean for the population-mean estimand");
    const Indicator control = complement(treatment);
    const int n_treated = static_cast<int>(treatment.sum());
    if (n_treated == 0 || n_treated == treatment.size())
        throw DataError(DataError::Code::EmptyGroup, "estimate_effect: both treatment arms must be non-empty");

    Vector wt = treated_weights;
    if (estimand == Estimand::ATT && wt.size() == 0) {
        wt = Vector::Zero(treatment.size());
        for (Eigen::Index i = 0; i < treatment.size(); ++i)
            if (treatment[i] == 1) wt[i] = 1.0 / n_treated;
    }
    if (wt.size() != treatment.size())
        throw DataError(DataError::Code::DimensionMismatch, "estimate_effect: treated-side weights missing");

    EstimateReport report;
    report.estimand = estimand;
    report.form = form;
    report.n = static_cast<int>(treatment.size());
    report.r = report.n;
    const double treated_mean = weighted_mean(wt, treatment, y, form);
    const double control_mean = weighted_mean(control_weights, control, y, form);
    report.point = treated_mean - control_mean;

    const VarianceEstimate vt = variance_estimate(wt, treatment, y, basis);
    const VarianceEstimate vc = variance_estimate(control_weights, control, y, basis);
    report.variance = (vt.vk + vc.vk) / static_cast<double>(report.n);
    const double half = kNormalQuantile975 * std::sqrt(report.variance);
    report.ci_low = report.point - half;
    report.ci_high = report.point + half;
    for (const auto& w : vt.warnings) report.diagnostics.push_back("treated arm: " + w);
    for (const auto& w : vc.warnings) report.diagnostics.push_back("control arm: " + w);
    report.diagnostics.push_back("effect variance sums per-arm variances (cross-arm covariance ignored)");
    return report;
}

} // namespace minbal
