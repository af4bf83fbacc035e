#include "minbal/basis.hpp"

#include "minbal/errors.hpp"

#include <cmath>
#include <sstream>

namespace minbal {

namespace {

double sample_mean(const Eigen::Ref<const Vector>& v) { return v.mean(); }

double sample_sd(const Eigen::Ref<const Vector>& v) {
    const double m = v.mean();
    return std::sqrt((v.array() - m).square().sum() / static_cast<double>(v.size() - 1));
}

BasisColumn intercept_column() {
    BasisColumn c;
    c.name = "(intercept)";
    c.intercept = true;
    c.mean = 1.0;
    c.sd = 1.0;
    return c;
}

} // namespace

std::vector<std::string> BasisMatrix::names() const {
    std::vector<std::string> out;
    out.reserve(columns.size());
    for (const auto& c : columns) out.push_back(c.name);
    return out;
}

BasisMatrix expand_basis(const Matrix& covariates, const BasisConfig& config,
                         const std::vector<std::string>& covariate_names) {
    const Eigen::Index n = covariates.rows();
    const Eigen::Index d = covariates.cols();
    if (d < 1) throw DataError(DataError::Code::DimensionMismatch, "expand_basis: need at least one covariate");
    if (n < 2) throw DataError(DataError::Code::DimensionMismatch, "expand_basis: need at least two units");
    if (config.moments != 1 && config.moments != 2) throw UsageError("expand_basis: moments must be 1 or 2");
    if (!covariate_names.empty() && static_cast<Eigen::Index>(covariate_names.size()) != d)
        throw DataError(DataError::Code::DimensionMismatch, "expand_basis: covariate name count mismatch");
    if (!covariates.allFinite()) throw DataError(DataError::Code::NonFiniteValue, "expand_basis: non-finite covariate");

    auto name_of = [&](Eigen::Index j) {
        return covariate_names.empty() ? "x" + std::to_string(j + 1) : covariate_names[static_cast<std::size_t>(j)];
    };

    std::vector<Vector> raw;
    std::vector<std::string> raw_names;
    for (Eigen::Index j = 0; j < d; ++j) {
        raw.emplace_back(covariates.col(j));
        raw_names.push_back(name_of(j));
    }
    if (config.moments == 2) {
        for (Eigen::Index j = 0; j < d; ++j) {
            raw.emplace_back(covariates.col(j).array().square().matrix());
            raw_names.push_back(name_of(j) + "^2");
        }
        if (config.cross_products) {
            for (Eigen::Index a = 0; a < d; ++a)
                for (Eigen::Index b = a + 1; b < d; ++b) {
                    raw.emplace_back(covariates.col(a).cwiseProduct(covariates.col(b)));
                    raw_names.push_back(name_of(a) + "*" + name_of(b));
                }
        }
    }

    BasisMatrix out;
    std::vector<Vector> kept;
    if (config.intercept) {
        kept.push_back(Vector::Ones(n));
        out.columns.push_back(intercept_column());
    }
    for (std::size_t c = 0; c < raw.size(); ++c) {
        const double sd = sample_sd(raw[c]);
        const double mean = sample_mean(raw[c]);
        if (!(sd > 1e-12 * (1.0 + std::abs(mean)))) {
            out.warnings.push_back("dropped zero-variance column '" + raw_names[c] + "'");
            continue;
        }
        BasisColumn col;
        col.name = raw_names[c];
        if (config.standardize) {
            col.standardized = true;
            col.scale = sd;
            kept.emplace_back(raw[c] / sd);
            col.mean = mean / sd;
            col.sd = sample_sd(kept.back());
        } else {
            kept.push_back(raw[c]);
            col.mean = mean;
            col.sd = sd;
        }
        out.columns.push_back(std::move(col));
    }

    out.values.resize(n, static_cast<Eigen::Index>(kept.size()));
    for (std::size_t c = 0; c < kept.size(); ++c) out.values.col(static_cast<Eigen::Index>(c)) = kept[c];
    return out;
}

BasisMatrix make_basis(Matrix values, bool has_intercept, std::vector<std::string> names) {
    if (!values.allFinite()) throw DataError(DataError::Code::NonFiniteValue, "make_basis: non-finite entry");
    if (!names.empty() && static_cast<Eigen::Index>(names.size()) != values.cols())
        throw DataError(DataError::Code::DimensionMismatch, "make_basis: name count mismatch");
    BasisMatrix out;
    out.values = std::move(values);
    for (Eigen::Index k = 0; k < out.values.cols(); ++k) {
        if (k == 0 && has_intercept) {
            out.columns.push_back(intercept_column());
            if ((out.values.col(0).array() != 1.0).any())
                throw DataError(DataError::Code::Generic, "make_basis: intercept column must be constant 1");
            continue;
        }
        BasisColumn c;
        c.name = names.empty() ? "b" + std::to_string(k) : names[static_cast<std::size_t>(k)];
        c.mean = out.values.col(k).mean();
        c.sd = out.values.rows() > 1 ? sample_sd(out.values.col(k)) : 1.0;
        out.columns.push_back(std::move(c));
    }
    return out;
}

Vector scaled_delta(const BasisMatrix& basis, double scalar) {
    if (!(scalar >= 0.0) || !std::isfinite(scalar)) throw UsageError("delta must be a nonnegative finite number");
    Vector delta(basis.cols());
    for (Eigen::Index k = 0; k < basis.cols(); ++k) {
        const auto& c = basis.columns[static_cast<std::size_t>(k)];
        delta[k] = c.intercept ? 0.0 : scalar * c.sd;
    }
    return delta;
}

std::string_view to_string(Estimand estimand) noexcept {
    switch (estimand) {
    case Estimand::PopulationMean: return "mean";
    case Estimand::ATT: return "att";
    case Estimand::ATE: return "ate";
    }
    return "unknown";
}

Estimand parse_estimand(std::string_view tag) {
    if (tag == "mean") return Estimand::PopulationMean;
    if (tag == "att") return Estimand::ATT;
    if (tag == "ate") return Estimand::ATE;
    throw UsageError("unknown estimand '" + std::string(tag) + "' (expected mean|att|ate)");
}

BalanceTarget target_profile(const BasisMatrix& basis, const Indicator& z, TargetKind kind) {
    if (z.size() != basis.rows())
        throw DataError(DataError::Code::DimensionMismatch, "target_profile: indicator length mismatch");
    BalanceTarget target;
    target.kind = kind;
    if (kind == TargetKind::PopulationMean) {
        target.values = basis.values.colwise().mean().transpose();
        return target;
    }
    Vector sum = Vector::Zero(basis.cols());
    int count = 0;
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        if (z[i] == 1) {
            sum += basis.values.row(i).transpose();
            ++count;
        }
    }
    if (count == 0) throw DataError(DataError::Code::EmptyGroup, "target_profile: treated group is empty");
    target.values = sum / static_cast<double>(count);
    return target;
}

Vector imbalance(const Vector& weights, const Indicator& z, const Matrix& basis, const Vector& target) {
    if (weights.size() != basis.rows() || z.size() != basis.rows() || target.size() != basis.cols())
        throw DataError(DataError::Code::DimensionMismatch, "imbalance: dimension mismatch");
    Vector acc = Vector::Zero(basis.cols());
    for (Eigen::Index i = 0; i < basis.rows(); ++i)
        if (z[i] != 0) acc.noalias() += weights[i] * basis.row(i).transpose();
    return acc - target;
}

Vector imbalance(const Vector& weights, const Indicator& z, const BasisMatrix& basis, const BalanceTarget& target) {
    return imbalance(weights, z, basis.values, target.values);
}

} // namespace minbal
