#pragma once

#include <span>
#include <string>
#include <string_view>

namespace minbal {

enum class DispersionKind { Variance, NegativeEntropy, SmoothedAbsoluteDeviation };

std::string_view to_string(DispersionKind kind) noexcept;
// Accepts the CLI tags "variance", "entropy", "absdev".
DispersionKind parse_dispersion(std::string_view tag);

/// A per-unit dispersion measure f(w) together with the sample sizes that
/// enter its dual transform.
///
/// Weights are recovered from a dual score t as w = rho_prime(t); rho is the
/// concave transform whose negative sum appears in the dual objective.
struct DispersionSpec {
    DispersionKind kind = DispersionKind::NegativeEntropy;
    int respondents = 1;   // r, units with z = 1
    int sample_size = 1;   // n
    double epsilon = 1e-4; // Huber width, SmoothedAbsoluteDeviation only

    // Throws DomainError unless 1 <= r <= n and epsilon > 0.
    void validate() const;

    double center() const noexcept { return 1.0 / respondents; }
};

DispersionSpec make_dispersion(DispersionKind kind, int respondents, int sample_size,
                               double epsilon = 1e-4);

double rho(double t, const DispersionSpec& spec);
double rho_prime(double t, const DispersionSpec& spec);
// Curvature -rho''(t) >= 0; used for the Gram/Hessian of the dual.
double neg_rho_second(double t, const DispersionSpec& spec);

double primal_f(double w, const DispersionSpec& spec);
double primal_f_prime(double w, const DispersionSpec& spec);

struct ConjugacyReport {
    double max_rho_discrepancy = 0.0;
    double max_rho_prime_discrepancy = 0.0;
    double worst_t = 0.0;
    std::size_t points = 0;

    double max_discrepancy() const noexcept {
        return max_rho_discrepancy > max_rho_prime_discrepancy ? max_rho_discrepancy
                                                               : max_rho_prime_discrepancy;
    }
};

// Re-derives rho(t) from h(x) = f(1/n - x) by inverting h' with bisection
// and compares it with the closed forms. Throws SolverError naming t when
// the bisection cannot bracket the root.
ConjugacyReport check_conjugacy(const DispersionSpec& spec, std::span<const double> grid);

} // namespace minbal
