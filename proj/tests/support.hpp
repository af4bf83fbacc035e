#pragma once

// Independent reference computations and random instance generators for the tests.

#include "minbal/basis.hpp"
#include "minbal/dual_solver.hpp"
#include "minbal/rng.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace oracle {

using minbal::Indicator;
using minbal::Matrix;
using minbal::Vector;

struct Instance {
    minbal::BasisMatrix basis;
    Indicator z;
    minbal::BalanceTarget target;
};

// n units, k non-intercept columns of Gaussian covariates, about half respondents
// (at least k + 2). When `interior_target` is set the target is a strictly
// positive convex combination of respondent rows, so exact balance is feasible
// for every dispersion.
inline Instance random_instance(std::uint64_t seed, int n, int k, bool interior_target) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    Matrix values(n, k + 1);
    for (int i = 0; i < n; ++i) {
        values(i, 0) = 1.0;
        for (int j = 1; j <= k; ++j) values(i, j) = normal(gen) + 0.3 * j;
    }
    Indicator z(n);
    int r = 0;
    for (int i = 0; i < n; ++i) {
        z[i] = unif(gen) < 0.55 ? 1 : 0;
        r += z[i];
    }
    for (int i = 0; r < k + 2 && i < n; ++i)
        if (z[i] == 0) {
            z[i] = 1;
            ++r;
        }

    Instance inst{minbal::make_basis(values, true), z, {}};
    if (interior_target) {
        Vector v = Vector::Zero(n);
        double total = 0.0;
        for (int i = 0; i < n; ++i)
            if (z[i] == 1) {
                v[i] = 0.5 + unif(gen);
                total += v[i];
            }
        v /= total;
        inst.target.values = values.transpose() * v;
        inst.target.kind = minbal::TargetKind::PopulationMean;
    } else {
        inst.target = minbal::target_profile(inst.basis, z, minbal::TargetKind::PopulationMean);
    }
    return inst;
}

// Respondent rows of the basis, one per unit with z = 1.
inline Matrix respondent_rows(const Matrix& basis, const Indicator& z) {
    Matrix rows(z.sum(), basis.cols());
    Eigen::Index r = 0;
    for (Eigen::Index i = 0; i < z.size(); ++i)
        if (z[i] == 1) rows.row(r++) = basis.row(i);
    return rows;
}

inline Vector scatter(const Vector& respondent_values, const Indicator& z) {
    Vector out = Vector::Zero(z.size());
    Eigen::Index r = 0;
    for (Eigen::Index i = 0; i < z.size(); ++i)
        if (z[i] == 1) out[i] = respondent_values[r++];
    return out;
}

// min sum (w_j - 1/r)^2 subject to A w = b, A = rows': the stationarity
// conditions give w = 1/r + A'(AA')^{-1}(b - A 1/r).
inline Vector variance_qp(const Matrix& basis, const Indicator& z, const Vector& target) {
    const Matrix a = respondent_rows(basis, z).transpose();
    const double r = static_cast<double>(a.cols());
    const Vector base = Vector::Constant(a.cols(), 1.0 / r);
    const Matrix aat = a * a.transpose();
    const Vector nu = aat.fullPivLu().solve(target - a * base);
    return scatter(base + a.transpose() * nu, z);
}

// Damped Newton on  sum_j exp(-B_j'l - 1) + b'l, the entropy dual at delta = 0.
inline Vector entropy_newton(const Matrix& basis, const Indicator& z, const Vector& target, int* iterations = nullptr) {
    const Matrix rows = respondent_rows(basis, z);
    const Eigen::Index k = rows.cols();
    auto value = [&](const Vector& l) {
        double v = target.dot(l);
        for (Eigen::Index j = 0; j < rows.rows(); ++j) v += std::exp(-rows.row(j).dot(l) - 1.0);
        return v;
    };
    Vector l = Vector::Zero(k);
    int it = 0;
    for (; it < 200; ++it) {
        Vector w(rows.rows());
        for (Eigen::Index j = 0; j < rows.rows(); ++j) w[j] = std::exp(-rows.row(j).dot(l) - 1.0);
        const Vector grad = target - rows.transpose() * w;
        if (grad.norm() < 1e-14) break;
        const Matrix hess = rows.transpose() * w.asDiagonal() * rows;
        const Vector step = hess.ldlt().solve(-grad);
        const double f0 = value(l);
        double s = 1.0;
        while (value(l + s * step) > f0 + 1e-4 * s * grad.dot(step) && s > 1e-12) s *= 0.5;
        l += s * step;
        if ((s * step).norm() < 1e-15) break;
    }
    if (iterations) *iterations = it;
    Vector w(rows.rows());
    for (Eigen::Index j = 0; j < rows.rows(); ++j) w[j] = std::exp(-rows.row(j).dot(l) - 1.0);
    return scatter(w, z);
}

// Direct transcription of
//   V = (1/n) sum_i [ n z_i w_i y_i - sum_j w_j z_j y_j - B_i' beta (n z_i w_i - 1) ]^2,
//   beta = [ (1/n) sum z_i w_i B_i B_i' ]^{-1} (1/n) sum z_i w_i B_i y_i.
inline double vk_direct(const Vector& w, const Indicator& z, const Vector& y, const Matrix& b) {
    const auto n = static_cast<double>(b.rows());
    const Eigen::Index k = b.cols();
    Matrix g = Matrix::Zero(k, k);
    Vector c = Vector::Zero(k);
    double total = 0.0;
    for (Eigen::Index i = 0; i < b.rows(); ++i) {
        if (z[i] == 0) continue;
        for (Eigen::Index p = 0; p < k; ++p) {
            c[p] += w[i] * b(i, p) * y[i] / n;
            for (Eigen::Index q = 0; q < k; ++q) g(p, q) += w[i] * b(i, p) * b(i, q) / n;
        }
        total += w[i] * y[i];
    }
    const Vector beta = g.fullPivLu().solve(c);
    double v = 0.0;
    for (Eigen::Index i = 0; i < b.rows(); ++i) {
        const double zwy = z[i] == 1 ? n * w[i] * y[i] : 0.0;
        const double nzw = z[i] == 1 ? n * w[i] : 0.0;
        double fit = 0.0;
        for (Eigen::Index p = 0; p < k; ++p) fit += b(i, p) * beta[p];
        const double term = zwy - total - fit * (nzw - 1.0);
        v += term * term;
    }
    return v / n;
}

// Re-draws the replicate rows with the documented sub-streams and recomputes
// the mean standardized l2 imbalance with plain loops.
inline double bootstrap_direct(const Vector& w, const Indicator& z, const minbal::BasisMatrix& basis, const Vector& target,
                               int replicates, double fraction, std::uint64_t seed) {
    const auto n = static_cast<std::size_t>(basis.rows());
    const auto m = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-12));
    double sum = 0.0;
    for (int b = 0; b < replicates; ++b) {
        minbal::RandomStream stream(minbal::split_seed(seed, static_cast<std::uint64_t>(b)));
        std::vector<double> num(static_cast<std::size_t>(basis.cols()), 0.0);
        double mass = 0.0;
        do {
            std::fill(num.begin(), num.end(), 0.0);
            mass = 0.0;
            for (std::size_t s = 0; s < m; ++s) {
                const auto i = static_cast<Eigen::Index>(stream.index(n));
                if (z[i] != 1) continue;
                mass += w[i];
                for (Eigen::Index k = 0; k < basis.cols(); ++k) num[static_cast<std::size_t>(k)] += w[i] * basis.values(i, k);
            }
        } while (mass == 0.0);
        double sq = 0.0;
        for (Eigen::Index k = 0; k < basis.cols(); ++k) {
            if (basis.columns[static_cast<std::size_t>(k)].intercept) continue;
            const double gap = (num[static_cast<std::size_t>(k)] / mass - target[k]) / basis.columns[static_cast<std::size_t>(k)].sd;
            sq += gap * gap;
        }
        sum += std::sqrt(sq);
    }
    return sum / replicates;
}

struct KktCheck {
    bool ok = true;
    double worst = 0.0;
};

// Stationarity in standardized units, recomputed from the weights with plain loops.
inline KktCheck check_kkt(const minbal::SolveResult& result, const minbal::DualProblem& problem, double tol = 1e-6) {
    const auto& basis = problem.basis();
    KktCheck out;
    for (Eigen::Index k = 0; k < basis.cols(); ++k) {
        double imb = -problem.target().values[k];
        for (Eigen::Index i = 0; i < basis.rows(); ++i)
            if (problem.z()[i] == 1) imb += result.weights[i] * basis.values(i, k);
        const double sd = basis.columns[static_cast<std::size_t>(k)].sd;
        const double s_imb = imb / sd;
        const double s_delta = problem.delta()[k] / sd;
        const double lambda = result.lambda[k];
        double gap = 0.0;
        if (lambda > 0.0)
            gap = std::abs(s_imb - s_delta);
        else if (lambda < 0.0)
            gap = std::abs(s_imb + s_delta);
        else
            gap = std::max(0.0, std::abs(s_imb) - s_delta);
        out.worst = std::max(out.worst, gap);
        if (gap > tol) out.ok = false;
    }
    return out;
}

} // namespace oracle
