#pragma once

#include "minbal/basis.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace minbal {

enum class EstimatorForm { HT, Hajek };

std::string_view to_string(EstimatorForm form) noexcept;
EstimatorForm parse_form(std::string_view tag);

// 95% two-sided normal quantile.
inline constexpr double kNormalQuantile975 = 1.959964;

// HT: sum_i w_i z_i y_i. Hajek: the same divided by sum_i w_i z_i.
// Outcomes of units with z = 0 are never read (they may be NaN).
double weighted_mean(const Vector& weights, const Indicator& z, const Vector& y, EstimatorForm form);

struct VarianceEstimate {
    double vk = 0.0;         // plug-in asymptotic variance of sqrt(n)(estimate - truth)
    double half_width = 0.0; // z_{0.975} * sqrt(vk / n)
    Vector beta;             // weighted regression of y on B among respondents
    bool ridge_applied = false;
    std::vector<std::string> warnings;
};

/// Semiparametric variance estimate
///
///   V = (1/n) sum_i [ n z_i w_i y_i - sum_j w_j z_j y_j - B_i' beta (n z_i w_i - 1) ]^2
///
/// with beta = [ (1/n) sum z_i w_i B_i B_i' ]^{-1} [ (1/n) sum z_i w_i B_i y_i ].
/// The Gram matrix is factorized with a symmetric (LDLT) factorization; on
/// failure 1e-10 * trace / K is added to its diagonal. Throws SolverError
/// naming the offending columns if that still fails.
VarianceEstimate variance_estimate(const Vector& weights, const Indicator& z, const Vector& y,
                                   const BasisMatrix& basis);

struct EstimateReport {
    Estimand estimand = Estimand::PopulationMean;
    double point = 0.0;
    double variance = 0.0; // variance of the point estimate, i.e. V / n (summed over arms)
    double ci_low = 0.0;
    double ci_high = 0.0;
    EstimatorForm form = EstimatorForm::Hajek;
    int n = 0;
    int r = 0; // weighted units (respondents, or controls + treated for effects)
    std::vector<std::string> diagnostics;
};

EstimateReport estimate_mean(const Vector& weights, const Indicator& z, const Vector& y, const BasisMatrix& basis,
                             EstimatorForm form = EstimatorForm::Hajek);

// ATT: treated outcome mean minus weighted control mean (treated_weights may
// be empty, meaning uniform 1/n_t). ATE: weighted treated mean minus weighted
// control mean, both arms targeted at the full sample. The variance sums the
// per-arm plug-in variances and ignores cross-arm covariance.
EstimateReport estimate_effect(const Vector& y, const Indicator& treatment, const BasisMatrix& basis,
                               const Vector& treated_weights, const Vector& control_weights, Estimand estimand,
                               EstimatorForm form = EstimatorForm::Hajek);

Indicator complement(const Indicator& z);

} // namespace minbal
