#pragma once

#include <Eigen/Dense>

#include <string>
#include <string_view>
#include <vector>

namespace minbal {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Indicator = Eigen::VectorXi;

struct BasisColumn {
    std::string name;
    bool intercept = false;
    bool standardized = false;
    double scale = 1.0; // divisor applied to the raw column
    double mean = 0.0;  // sample mean of the stored column
    double sd = 1.0;    // sample sd of the stored column; 1 for the intercept
};

struct BasisConfig {
    int moments = 1;
    bool standardize = true;
    bool intercept = true;
    bool cross_products = false;
};

/// Basis functions B_k(X_i) evaluated on every unit, one column per function.
///
/// Standardization divides by the sample sd without centering, so the
/// balance constraints keep their location and delta in sd units maps to
/// delta_k = delta * sd_k.
struct BasisMatrix {
    Matrix values;
    std::vector<BasisColumn> columns;
    std::vector<std::string> warnings;

    Eigen::Index rows() const noexcept { return values.rows(); }
    Eigen::Index cols() const noexcept { return values.cols(); }
    bool has_intercept() const noexcept { return !columns.empty() && columns.front().intercept; }
    // Number of balance functions excluding the intercept.
    int balance_dimension() const noexcept {
        return static_cast<int>(cols()) - (has_intercept() ? 1 : 0);
    }
    std::vector<std::string> names() const;
};

// Throws DataError on non-finite entries, n < 2 or d < 1. Zero-variance
// columns are dropped and reported in warnings.
BasisMatrix expand_basis(const Matrix& covariates, const BasisConfig& config,
                         const std::vector<std::string>& covariate_names = {});

// Wraps an already-expanded matrix; column stats are computed, nothing is rescaled.
BasisMatrix make_basis(Matrix values, bool has_intercept, std::vector<std::string> names = {});

// delta_k = scalar * sd_k for balance columns, 0 for the intercept.
Vector scaled_delta(const BasisMatrix& basis, double scalar);

enum class Estimand { PopulationMean, ATT, ATE };

std::string_view to_string(Estimand estimand) noexcept;
// Accepts "mean", "att", "ate".
Estimand parse_estimand(std::string_view tag);

enum class TargetKind { PopulationMean, TreatedProfile };

struct BalanceTarget {
    Vector values;
    TargetKind kind = TargetKind::PopulationMean;
};

// PopulationMean: column means over all n units. TreatedProfile: column means
// over units with z = 1; the weights are then solved over the z = 0 group.
BalanceTarget target_profile(const BasisMatrix& basis, const Indicator& z, TargetKind kind);

// imb_k = sum_i w_i z_i B_k(X_i) - target_k
Vector imbalance(const Vector& weights, const Indicator& z, const BasisMatrix& basis,
                 const BalanceTarget& target);
Vector imbalance(const Vector& weights, const Indicator& z, const Matrix& basis, const Vector& target);

} // namespace minbal
