#include "minbal/dual_solver.hpp"
#include "minbal/errors.hpp"

#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace minbal;

namespace {

BasisMatrix small_basis() {
    Matrix x(4, 1);
    x << -1.0, 0.0, 1.0, 2.0;
    BasisConfig raw;
    raw.standardize = false;
    return expand_basis(x, raw, {"x"});
}

Indicator three_of_four() {
    Indicator z(4);
    z << 1, 1, 1, 0;
    return z;
}

// Solve and assert the stationarity certificate on every converged result.
SolveResult certified(const DualProblem& p, const SolverOptions& opts = {}) {
    SolveResult r = solve_dual(p, opts);
    if (r.converged) {
        const auto kkt = oracle::check_kkt(r, p);
        CHECK_MESSAGE(kkt.ok, "KKT residual " << kkt.worst);
    }
    return r;
}

} // namespace

TEST_CASE("objective examples") {
    const BasisMatrix b = small_basis();
    const Indicator z = three_of_four();
    const Vector zero = Vector::Zero(2);

    const auto var = DualProblem::population(b, z, Vector::Zero(2), DispersionKind::Variance);
    CHECK(objective(var, zero) == 0.0);

    Matrix one(2, 1);
    one << 1.0, 1.0;
    Indicator z1(2);
    z1 << 1, 0;
    const auto ent = DualProblem::population(make_basis(one, true), z1, Vector::Zero(1), DispersionKind::NegativeEntropy);
    CHECK(objective(ent, Vector::Zero(1)) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));

    Vector lambda(2);
    lambda << 0.3, -0.7;
    CHECK(objective(var, lambda) == smooth_objective(var, lambda));
    const auto pen = DualProblem::population(b, z, Vector{{0.0, 0.25}}, DispersionKind::Variance);
    CHECK(objective(pen, lambda) == doctest::Approx(smooth_objective(pen, lambda) + 0.25 * 0.7).epsilon(1e-15));
    CHECK_THROWS_AS(objective(var, Vector::Zero(3)), DataError);
}

TEST_CASE("smooth_gradient") {
    const BasisMatrix b = small_basis();
    const Indicator z = three_of_four();
    const auto var = DualProblem::population(b, z, Vector::Zero(2), DispersionKind::Variance);

    // lambda = 0: full mean minus respondent mean
    const Vector g = smooth_gradient(var, Vector::Zero(2));
    CHECK(g[0] == doctest::Approx(0.0).scale(1.0));
    CHECK(g[1] == doctest::Approx(0.5 - 0.0));
    CHECK((g + imbalance(recover_weights(var, Vector::Zero(2)), z, b, var.target())).norm() <= 1e-15);
    CHECK_THROWS_AS(smooth_gradient(var, Vector::Zero(1)), DataError);
}

TEST_CASE("property: smooth_gradient matches finite differences") {
    std::mt19937_64 gen(17);
    std::normal_distribution<double> normal(0.0, 0.3);
    for (auto kind : {DispersionKind::Variance, DispersionKind::NegativeEntropy, DispersionKind::SmoothedAbsoluteDeviation}) {
        for (int trial = 0; trial < 20; ++trial) {
            const auto inst = oracle::random_instance(50 + static_cast<std::uint64_t>(trial), 20, 3, false);
            const auto p = DualProblem::with_target(inst.basis, inst.z, Vector::Zero(4), kind, inst.target, 0.05);
            Vector lambda(4);
            for (int k = 0; k < 4; ++k) lambda[k] = normal(gen);
            const Vector g = smooth_gradient(p, lambda);
            for (int k = 0; k < 4; ++k) {
                const double h = 1e-6;
                Vector up = lambda, down = lambda;
                up[k] += h;
                down[k] -= h;
                const double fd = (smooth_objective(p, up) - smooth_objective(p, down)) / (2 * h);
                CHECK(std::abs(fd - g[k]) <= 1e-6 * std::max(1.0, std::abs(g[k])));
            }
        }
    }
}

TEST_CASE("prox_weighted_l1") {
    CHECK(prox_weighted_l1(Vector{{0.3}}, Vector{{0.5}})[0] == 0.0);
    CHECK(prox_weighted_l1(Vector{{-1.2}}, Vector{{0.5}})[0] == doctest::Approx(-0.7));
    const Vector v{{1.5, -2.0, 0.0}};
    CHECK(prox_weighted_l1(v, Vector::Zero(3)) == v);
    CHECK_THROWS_AS(prox_weighted_l1(v, Vector{{0.1, -0.1, 0.0}}), UsageError);
    CHECK_THROWS_AS(prox_weighted_l1(v, Vector::Zero(2)), DataError);
}

TEST_CASE("solve_dual worked examples") {
    const Indicator z = three_of_four();

    SUBCASE("intercept only: uniform weights") {
        Matrix one = Matrix::Ones(4, 1);
        const auto p = DualProblem::population(make_basis(one, true), z, Vector::Zero(1), DispersionKind::Variance);
        const SolveResult r = certified(p);
        REQUIRE(r.converged);
        for (int i = 0; i < 3; ++i) CHECK(r.weights[i] == doctest::Approx(1.0 / 3).epsilon(1e-9));
        CHECK(r.weights[3] == 0.0);
    }
    SUBCASE("intercept and x: analytic QP") {
        const auto p = DualProblem::population(small_basis(), z, Vector::Zero(2), DispersionKind::Variance);
        const SolveResult r = certified(p);
        REQUIRE(r.converged);
        CHECK(r.weights[0] == doctest::Approx(1.0 / 12).epsilon(1e-8));
        CHECK(r.weights[1] == doctest::Approx(1.0 / 3).epsilon(1e-8));
        CHECK(r.weights[2] == doctest::Approx(7.0 / 12).epsilon(1e-8));
        CHECK(r.weights[3] == 0.0);
        for (const auto& e : r.kkt) CHECK(std::abs(e.imbalance) <= 1e-6);
    }
    SUBCASE("entropy with huge tolerances: uniform weights") {
        const auto inst = oracle::random_instance(4, 30, 3, false);
        const auto p = DualProblem::population(inst.basis, inst.z, scaled_delta(inst.basis, 1e3), DispersionKind::NegativeEntropy);
        const SolveResult r = certified(p);
        REQUIRE(r.converged);
        const double r_count = inst.z.sum();
        for (Eigen::Index k = 1; k < r.lambda.size(); ++k) CHECK(r.lambda[k] == 0.0);
        for (Eigen::Index i = 0; i < inst.z.size(); ++i)
            CHECK(r.weights[i] == doctest::Approx(inst.z[i] == 1 ? 1.0 / r_count : 0.0).epsilon(1e-9));
        for (const auto& e : r.kkt) {
            if (e.k == 0) continue;
            CHECK_FALSE(e.active);
            CHECK(std::abs(e.imbalance) < e.delta);
        }
    }
}

TEST_CASE("active constraints sit on the tolerance boundary") {
    int active = 0;
    for (int trial = 0; trial < 30; ++trial) {
        const auto inst = oracle::random_instance(200 + static_cast<std::uint64_t>(trial), 30, 4, false);
        for (auto kind : {DispersionKind::Variance, DispersionKind::NegativeEntropy, DispersionKind::SmoothedAbsoluteDeviation}) {
            const auto p = DualProblem::population(inst.basis, inst.z, scaled_delta(inst.basis, 0.05), kind, 1e-3);
            const SolveResult r = certified(p);
            if (!r.converged) continue;
            for (const auto& e : r.kkt) {
                if (e.k == 0 || !e.active) continue;
                ++active;
                CHECK(std::abs(e.imbalance - e.delta * e.sign) <= 1e-6);
            }
        }
    }
    CHECK(active > 0);
}

TEST_CASE("variance solves match the analytic QP") {
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 10 + trial % 21;
        const int k = 1 + trial % 4;
        const auto inst = oracle::random_instance(5000 + static_cast<std::uint64_t>(trial), n, k, false);
        const auto p = DualProblem::population(inst.basis, inst.z, Vector::Zero(k + 1), DispersionKind::Variance);
        const SolveResult r = certified(p);
        REQUIRE(r.converged);
        const Vector expected = oracle::variance_qp(inst.basis.values, inst.z, inst.target.values);
        CHECK((r.weights - expected).cwiseAbs().maxCoeff() <= 1e-6);
    }
}

TEST_CASE("entropy solves match damped Newton") {
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 12 + trial % 19;
        const int k = 1 + trial % 4;
        const auto inst = oracle::random_instance(7000 + static_cast<std::uint64_t>(trial), n, k, true);
        const auto p = DualProblem::with_target(inst.basis, inst.z, Vector::Zero(k + 1), DispersionKind::NegativeEntropy, inst.target);
        const SolveResult r = certified(p);
        REQUIRE(r.converged);
        const Vector expected = oracle::entropy_newton(inst.basis.values, inst.z, inst.target.values);
        CHECK((r.weights - expected).cwiseAbs().maxCoeff() <= 1e-6);
    }
}

TEST_CASE("property: strong duality at delta = 0") {
    // The dual minimum equals minus the primal optimum sum_i z_i f(w_i*).
    for (int trial = 0; trial < 30; ++trial) {
        const auto inst = oracle::random_instance(8000 + static_cast<std::uint64_t>(trial), 25, 1 + trial % 3, true);
        for (auto kind : {DispersionKind::Variance, DispersionKind::NegativeEntropy, DispersionKind::SmoothedAbsoluteDeviation}) {
            const auto p = DualProblem::with_target(inst.basis, inst.z, Vector::Zero(inst.basis.cols()), kind, inst.target, 1e-2);
            SolverOptions opts;
            opts.tol = 1e-10;
            opts.max_iters = 200000;
            const SolveResult r = certified(p, opts);
            REQUIRE_MESSAGE(r.converged, to_string(kind) << " trial " << trial);
            double primal = 0.0;
            for (Eigen::Index i = 0; i < inst.z.size(); ++i)
                if (inst.z[i] == 1) primal += primal_f(r.weights[i], p.spec());
            CHECK(r.objective_value == doctest::Approx(-primal).epsilon(1e-8).scale(1.0));
        }
    }
}

TEST_CASE("property: dual objective never increases across accepted iterations") {
    const auto inst = oracle::random_instance(31, 30, 4, false);
    for (auto kind : {DispersionKind::Variance, DispersionKind::NegativeEntropy}) {
        const auto p = DualProblem::population(inst.basis, inst.z, scaled_delta(inst.basis, 0.02), kind);
        double prev = objective(p, Vector::Zero(inst.basis.cols()));
        for (int iters = 1; iters <= 60; ++iters) {
            SolverOptions opts;
            opts.max_iters = iters;
            const SolveResult r = solve_dual(p, opts);
            CHECK(r.objective_value <= prev + 1e-12 * (1.0 + std::abs(prev)));
            prev = r.objective_value;
            if (r.converged) break;
        }
    }
}

TEST_CASE("primal weights satisfy every balance constraint") {
    for (int trial = 0; trial < 30; ++trial) {
        const auto inst = oracle::random_instance(9000 + static_cast<std::uint64_t>(trial), 30, 3, false);
        const double delta = 0.02 * (trial % 5);
        const auto p = DualProblem::population(inst.basis, inst.z, scaled_delta(inst.basis, delta), DispersionKind::NegativeEntropy);
        const SolveResult r = certified(p);
        if (!r.converged) continue;
        const Vector imb = imbalance(r.weights, inst.z, inst.basis, p.target());
        for (Eigen::Index k = 0; k < imb.size(); ++k) CHECK(std::abs(imb[k]) <= p.delta()[k] + 1e-6);
        for (Eigen::Index i = 0; i < inst.z.size(); ++i)
            if (inst.z[i] == 0) CHECK(r.weights[i] == 0.0);
    }
}

TEST_CASE("preconditioning does not change the solution") {
    const auto inst = oracle::random_instance(123, 30, 4, false);
    for (double delta : {0.0, 0.05}) {
        const auto p = DualProblem::population(inst.basis, inst.z, scaled_delta(inst.basis, delta), DispersionKind::NegativeEntropy);
        SolverOptions plain;
        plain.precondition = false;
        plain.tol = 1e-12;
        SolverOptions pre;
        pre.tol = 1e-12;
        const SolveResult a = certified(p, plain);
        const SolveResult b = certified(p, pre);
        REQUIRE(a.converged);
        REQUIRE(b.converged);
        CHECK((a.weights - b.weights).cwiseAbs().maxCoeff() <= 1e-8);
    }
}

TEST_CASE("diagnostics") {
    SUBCASE("negative variance weights are reported") {
        Matrix x(6, 1);
        x << 0.0, 0.1, 0.2, 0.3, 5.0, 6.0;
        Indicator z(6);
        z << 1, 1, 1, 1, 0, 0;
        BasisConfig raw;
        raw.standardize = false;
        const auto p = DualProblem::population(expand_basis(x, raw), z, Vector::Zero(2), DispersionKind::Variance);
        const SolveResult r = certified(p);
        REQUIRE(r.converged);
        CHECK(r.diagnostics.negative_weights > 0);
        CHECK(r.diagnostics.min_weight < 0.0);
    }
    SUBCASE("collinear columns trigger the rank warning") {
        const auto inst = oracle::random_instance(8, 20, 2, false);
        Matrix v(20, 4);
        v << inst.basis.values, inst.basis.values.col(1);
        const auto p = DualProblem::population(make_basis(v, true), inst.z, Vector::Zero(4), DispersionKind::Variance);
        const SolveResult r = solve_dual(p);
        CHECK(r.diagnostics.rank_deficient);
        CHECK_FALSE(r.diagnostics.warnings.empty());
    }
}

TEST_CASE("non-convergence and divergence") {
    const auto inst = oracle::random_instance(21, 30, 4, false);
    SUBCASE("iteration cap") {
        const auto p = DualProblem::population(inst.basis, inst.z, Vector::Zero(5), DispersionKind::NegativeEntropy);
        SolverOptions opts;
        opts.max_iters = 2;
        const SolveResult r = solve_dual(p, opts);
        CHECK_FALSE(r.converged);
        CHECK(r.status == SolveStatus::MaxIterations);
        CHECK(r.iterations == 2);
        CHECK(r.diagnostics.gradient_mapping_norm > 0.0);
    }
    SUBCASE("exact balance outside the respondent hull diverges") {
        Matrix x(5, 1);
        x << 0.0, 1.0, 2.0, 10.0, 12.0;
        Indicator z(5);
        z << 1, 1, 1, 0, 0;
        BasisConfig raw;
        raw.standardize = false;
        const auto p = DualProblem::population(expand_basis(x, raw), z, Vector::Zero(2), DispersionKind::NegativeEntropy);
        SolverOptions opts;
        opts.max_iters = 5000;
        const SolveResult r = solve_dual(p, opts);
        CHECK(r.status != SolveStatus::Converged);
        CHECK_FALSE(r.converged);
        // the imbalance on x cannot be closed
        CHECK(std::abs(r.kkt[1].imbalance) > 1.0);
    }
}

TEST_CASE("problem validation") {
    const BasisMatrix b = small_basis();
    const Indicator z = three_of_four();
    CHECK_THROWS_AS(DualProblem::population(b, Indicator::Zero(4), Vector::Zero(2), DispersionKind::Variance), DataError);
    Indicator bad = z;
    bad[0] = 2;
    CHECK_THROWS_AS(DualProblem::population(b, bad, Vector::Zero(2), DispersionKind::Variance), DataError);
    CHECK_THROWS_AS(DualProblem::population(b, z, Vector{{0.0, -0.1}}, DispersionKind::Variance), UsageError);
    CHECK_THROWS_AS(DualProblem::population(b, z, Vector{{0.1, 0.0}}, DispersionKind::Variance), UsageError);
    CHECK_THROWS_AS(DualProblem::population(b, z, Vector::Zero(3), DispersionKind::Variance), DataError);
    CHECK_THROWS_AS(DualProblem::population(b, Indicator::Ones(3), Vector::Zero(2), DispersionKind::Variance), DataError);
    SolverOptions opts;
    opts.tol = -1.0;
    CHECK_THROWS_AS(solve_dual(DualProblem::population(b, z, Vector::Zero(2), DispersionKind::Variance), opts), UsageError);
}
