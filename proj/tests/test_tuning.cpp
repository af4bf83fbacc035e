#include "minbal/errors.hpp"
#include "minbal/tuning.hpp"

#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace minbal;

namespace {

TuneConfig config_with(std::vector<double> grid, int replicates = 10, double fraction = 0.1, std::uint64_t seed = 7) {
    TuneConfig c;
    c.grid = std::move(grid);
    c.replicates = replicates;
    c.fraction = fraction;
    c.seed = seed;
    return c;
}

Vector uniform_weights(const Indicator& z) {
    Vector w = Vector::Zero(z.size());
    const double r = z.sum();
    for (Eigen::Index i = 0; i < z.size(); ++i)
        if (z[i] == 1) w[i] = 1.0 / r;
    return w;
}

} // namespace

TEST_CASE("default grid") {
    const auto g = default_grid(4, 5);
    REQUIRE(g.size() == 5);
    CHECK(g.front() == 0.0);
    CHECK(g.back() == 0.5);
    CHECK(g[2] == doctest::Approx(0.25));
    CHECK(default_grid(4, 1) == std::vector<double>{0.5});
    CHECK(default_grid(9, 3, 0.2).back() == 0.2);
    CHECK(max_recommended_delta(16) == 0.25);
    CHECK(std::isinf(max_recommended_delta(0)));
    CHECK_THROWS_AS(default_grid(4, 0), UsageError);
}

TEST_CASE("validate") {
    CHECK_NOTHROW(validate(config_with({0.0, 0.1, 0.5}), 4));
    CHECK_THROWS_AS(validate(config_with({}), 4), UsageError);
    CHECK_THROWS_AS(validate(config_with({0.2, 0.1}), 4), UsageError);
    CHECK_THROWS_AS(validate(config_with({-0.1}), 4), UsageError);
    CHECK_THROWS_AS(validate(config_with({0.6}), 4), UsageError);
    TuneConfig large = config_with({0.6});
    large.allow_large_delta = true;
    CHECK_NOTHROW(validate(large, 4));
    CHECK_THROWS_AS(validate(config_with({0.1}, 0), 4), UsageError);
    CHECK_THROWS_AS(validate(config_with({0.1}, 5, 0.0), 4), UsageError);
    CHECK_THROWS_AS(validate(config_with({0.1}, 5, 1.5), 4), UsageError);
}

TEST_CASE("replicate_size rounds up") {
    CHECK(replicate_size(config_with({0.0}, 1, 0.1), 1000) == 100);
    CHECK(replicate_size(config_with({0.0}, 1, 0.1), 1001) == 101);
    CHECK(replicate_size(config_with({0.0}, 1, 0.5), 20) == 10);
    CHECK(replicate_size(config_with({0.0}, 1, 1e-9), 20) == 1);
}

TEST_CASE("identity sampling scores the full-sample imbalance") {
    const auto inst = oracle::random_instance(41, 40, 3, true);
    TuneConfig cfg = config_with({0.0}, 1, 1.0);
    cfg.identity_sampling = true;

    SUBCASE("exact balance scores zero") {
        const Vector w = oracle::entropy_newton(inst.basis.values, inst.z, inst.target.values);
        CHECK(bootstrap_balance(w, inst.z, inst.basis, inst.target, cfg) <= 1e-6);
    }
    SUBCASE("uniform weights score the standardized l2 imbalance") {
        const Vector w = uniform_weights(inst.z);
        const Vector imb = imbalance(w, inst.z, inst.basis, inst.target);
        double sq = 0.0;
        for (Eigen::Index k = 1; k < imb.size(); ++k) sq += std::pow(imb[k] / inst.basis.columns[static_cast<std::size_t>(k)].sd, 2);
        CHECK(bootstrap_balance(w, inst.z, inst.basis, inst.target, cfg) == doctest::Approx(std::sqrt(sq)).epsilon(1e-12));
    }
}

TEST_CASE("bootstrap_balance matches an independent recomputation") {
    for (int trial = 0; trial < 20; ++trial) {
        const auto inst = oracle::random_instance(60 + static_cast<std::uint64_t>(trial), 20, 2, false);
        Vector w = uniform_weights(inst.z);
        for (Eigen::Index i = 0; i < w.size(); ++i) w[i] *= 1.0 + 0.1 * static_cast<double>(i % 3);
        const TuneConfig cfg = config_with({0.0}, 2, 0.5, 1000 + static_cast<std::uint64_t>(trial));
        const double got = bootstrap_balance(w, inst.z, inst.basis, inst.target, cfg);
        const double want = oracle::bootstrap_direct(w, inst.z, inst.basis, inst.target.values, 2, 0.5, cfg.seed);
        CHECK(std::abs(got - want) <= 1e-12);
    }
}

TEST_CASE("bootstrap_balance is deterministic in the seed") {
    const auto inst = oracle::random_instance(5, 60, 3, false);
    const Vector w = uniform_weights(inst.z);
    const TuneConfig cfg = config_with({0.0}, 25, 0.2, 123);
    const double a = bootstrap_balance(w, inst.z, inst.basis, inst.target, cfg);
    CHECK(a == bootstrap_balance(w, inst.z, inst.basis, inst.target, cfg));
    CHECK(a != bootstrap_balance(w, inst.z, inst.basis, inst.target, config_with({0.0}, 25, 0.2, 124)));
}

TEST_CASE("singleton grid returns its only value") {
    const auto inst = oracle::random_instance(9, 50, 3, false);
    const TuneInput input{inst.basis, inst.z, inst.target};
    const TuneResult r = tune_delta(input, config_with({0.01}));
    CHECK(r.selected == 0.01);
    CHECK(r.selected_index == 0);
    CHECK(r.per_delta.size() == 1);
}

TEST_CASE("grid {0, huge} agrees with the oracle C_S values") {
    // Respondents selected on the first covariate, so uniform weights are badly imbalanced.
    auto inst = oracle::random_instance(17, 80, 2, true);
    for (Eigen::Index i = 0; i < inst.z.size(); ++i) inst.z[i] = inst.basis.values(i, 1) > 0.0 || i % 5 == 0 ? 1 : 0;
    inst.target = target_profile(inst.basis, inst.z, TargetKind::PopulationMean);

    TuneConfig cfg = config_with({0.0, 1e3}, 20, 0.25, 99);
    cfg.allow_large_delta = true;
    const TuneResult r = tune_delta(TuneInput{inst.basis, inst.z, inst.target}, cfg);
    REQUIRE(r.per_delta.size() == 2);
    REQUIRE(r.per_delta[0].converged);
    REQUIRE(r.per_delta[1].converged);

    const Vector w_exact = oracle::entropy_newton(inst.basis.values, inst.z, inst.target.values);
    const Vector w_flat = uniform_weights(inst.z);
    const double c_exact = oracle::bootstrap_direct(w_exact, inst.z, inst.basis, inst.target.values, 20, 0.25, 99);
    const double c_flat = oracle::bootstrap_direct(w_flat, inst.z, inst.basis, inst.target.values, 20, 0.25, 99);
    CHECK(r.per_delta[0].c_s == doctest::Approx(c_exact).epsilon(1e-6));
    CHECK(r.per_delta[1].c_s == doctest::Approx(c_flat).epsilon(1e-9));
    CHECK(r.selected_index == (c_exact <= c_flat ? 0u : 1u));
}

TEST_CASE("ties go to the smaller delta") {
    // Intercept-only basis: no balance columns, so every C_S is 0.
    const int n = 30;
    const BasisMatrix b = make_basis(Matrix::Ones(n, 1), true);
    Indicator z(n);
    for (int i = 0; i < n; ++i) z[i] = i % 2;
    const BalanceTarget t = target_profile(b, z, TargetKind::PopulationMean);
    const TuneResult r = tune_delta(TuneInput{b, z, t}, config_with({0.0, 0.3, 2.0}));
    for (const auto& s : r.per_delta) CHECK(s.c_s == 0.0);
    CHECK(r.selected_index == 0);
    CHECK(r.selected == 0.0);

    std::vector<DeltaScore> scores(3);
    for (std::size_t i = 0; i < 3; ++i) {
        scores[i].delta = 0.1 * static_cast<double>(i);
        scores[i].converged = true;
        scores[i].c_s = i == 0 ? 0.5 : 0.2;
    }
    CHECK(select_delta(scores) == 1);
    scores[1].converged = false;
    CHECK(select_delta(scores) == 2);
}

TEST_CASE("serial and parallel tuning agree exactly") {
    const auto inst = oracle::random_instance(23, 120, 4, false);
    const TuneInput input{inst.basis, inst.z, inst.target};
    const TuneConfig cfg = config_with(default_grid(4, 9), 10, 0.2, 5);
    const TuneResult a = tune_delta(input, cfg);
    const TuneResult b = tune_delta_serial(input, cfg);
    REQUIRE(a.per_delta.size() == b.per_delta.size());
    for (std::size_t i = 0; i < a.per_delta.size(); ++i) {
        CHECK(a.per_delta[i].c_s == b.per_delta[i].c_s);
        CHECK(a.per_delta[i].iterations == b.per_delta[i].iterations);
    }
    CHECK(a.selected_index == b.selected_index);
}

TEST_CASE("no converged grid point is an error") {
    const auto inst = oracle::random_instance(3, 40, 3, false);
    SolverOptions opts;
    opts.max_iters = 1;
    try {
        (void)tune_delta(TuneInput{inst.basis, inst.z, inst.target}, config_with({0.0, 0.1}), opts);
        FAIL("expected SolverError");
    } catch (const SolverError& e) {
        CHECK(std::string(e.what()).find("delta=0.1") != std::string::npos);
    }
}
