#include "minbal/dispersion.hpp"

#include "minbal/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace minbal {

std::string_view to_string(DispersionKind kind) noexcept {
    switch (kind) {
    case DispersionKind::Variance: return "variance";
    case DispersionKind::NegativeEntropy: return "entropy";
    case DispersionKind::SmoothedAbsoluteDeviation: return "absdev";
    }
    return "unknown";
}

DispersionKind parse_dispersion(std::string_view tag) {
    if (tag == "variance") return DispersionKind::Variance;
    if (tag == "entropy") return DispersionKind::NegativeEntropy;
    if (tag == "absdev") return DispersionKind::SmoothedAbsoluteDeviation;
    throw UsageError("unknown dispersion '" + std::string(tag) + "' (expected variance|entropy|absdev)");
}

void DispersionSpec::validate() const {
    if (respondents < 1 || sample_size < 1 || respondents > sample_size) {
        std::ostringstream os;
        os << "dispersion requires 1 <= r <= n, got r=" << respondents << " n=" << sample_size;
        throw DomainError(os.str());
    }
    if (!(epsilon > 0.0) || !std::isfinite(epsilon))
        throw DomainError("dispersion smoothing epsilon must be positive and finite");
}

DispersionSpec make_dispersion(DispersionKind kind, int respondents, int sample_size, double epsilon) {
    DispersionSpec spec{kind, respondents, sample_size, epsilon};
    spec.validate();
    return spec;
}

namespace {

void require_finite(double t) {
    if (!std::isfinite(t)) throw DomainError("dual score must be finite");
}

// Smoothed absolute deviation: f(w) = huber_eps(u) + eps*u^2/2 with u = w - 1/r.
// The small ridge keeps f' unbounded so that (f')^{-1} exists on the whole line.
double huber(double u, double eps) {
    const double a = std::abs(u);
    return a <= eps ? u * u / (2.0 * eps) : a - 0.5 * eps;
}

double absdev_f_prime_u(double u, double eps) {
    return std::clamp(u / eps, -1.0, 1.0) + eps * u;
}

// Solves absdev_f_prime_u(u) = s for u.
double absdev_inverse(double s, double eps) {
    const double kink = 1.0 + eps * eps;
    if (s > kink) return (s - 1.0) / eps;
    if (s < -kink) return (s + 1.0) / eps;
    return s * eps / kink;
}

} // namespace

double rho_prime(double t, const DispersionSpec& spec) {
    require_finite(t);
    switch (spec.kind) {
    case DispersionKind::Variance: return -0.5 * t + spec.center();
    case DispersionKind::NegativeEntropy: return std::exp(-t - 1.0);
    case DispersionKind::SmoothedAbsoluteDeviation:
        return spec.center() + absdev_inverse(-t, spec.epsilon);
    }
    return std::numeric_limits<double>::quiet_NaN();
}

double rho(double t, const DispersionSpec& spec) {
    require_finite(t);
    switch (spec.kind) {
    case DispersionKind::Variance: return -0.25 * t * t + t * spec.center();
    case DispersionKind::NegativeEntropy: return -std::exp(-t - 1.0);
    case DispersionKind::SmoothedAbsoluteDeviation: {
        // rho(t) = t w + f(w) at w = rho'(t)
        const double u = absdev_inverse(-t, spec.epsilon);
        return t * (spec.center() + u) + huber(u, spec.epsilon) + 0.5 * spec.epsilon * u * u;
    }
    }
    return std::numeric_limits<double>::quiet_NaN();
}

double neg_rho_second(double t, const DispersionSpec& spec) {
    require_finite(t);
    switch (spec.kind) {
    case DispersionKind::Variance: return 0.5;
    case DispersionKind::NegativeEntropy: return std::exp(-t - 1.0);
    case DispersionKind::SmoothedAbsoluteDeviation: {
        const double eps = spec.epsilon;
        const double kink = 1.0 + eps * eps;
        return std::abs(t) > kink ? 1.0 / eps : eps / kink;
    }
    }
    return std::numeric_limits<double>::quiet_NaN();
}

double primal_f(double w, const DispersionSpec& spec) {
    if (!std::isfinite(w)) throw DomainError("weight must be finite");
    switch (spec.kind) {
    case DispersionKind::Variance: {
        const double u = w - spec.center();
        return u * u;
    }
    case DispersionKind::NegativeEntropy:
        if (w <= 0.0) throw DomainError("negative entropy requires a positive weight");
        return w * std::log(w);
    case DispersionKind::SmoothedAbsoluteDeviation: {
        const double u = w - spec.center();
        return huber(u, spec.epsilon) + 0.5 * spec.epsilon * u * u;
    }
    }
    return std::numeric_limits<double>::quiet_NaN();
}

double primal_f_prime(double w, const DispersionSpec& spec) {
    if (!std::isfinite(w)) throw DomainError("weight must be finite");
    switch (spec.kind) {
    case DispersionKind::Variance: return 2.0 * (w - spec.center());
    case DispersionKind::NegativeEntropy:
        if (w <= 0.0) throw DomainError("negative entropy requires a positive weight");
        return std::log(w) + 1.0;
    case DispersionKind::SmoothedAbsoluteDeviation:
        return absdev_f_prime_u(w - spec.center(), spec.epsilon);
    }
    return std::numeric_limits<double>::quiet_NaN();
}

namespace {

// h(x) = f(1/n - x) and its derivative h'(x) = -f'(1/n - x).
struct ShiftedDispersion {
    const DispersionSpec& spec;
    double inv_n;

    double h(double x) const { return primal_f(inv_n - x, spec); }
    double h_prime(double x) const { return -primal_f_prime(inv_n - x, spec); }

    // Upper end of dom h: entropy needs 1/n - x > 0.
    bool bounded_above() const { return spec.kind == DispersionKind::NegativeEntropy; }
};

std::string bracket_failure(double t) {
    std::ostringstream os;
    os.precision(17);
    os << "check_conjugacy: cannot bracket (h')^{-1}(t) at t=" << t;
    return os.str();
}

// Inverse of the increasing function h' by bisection.
double invert_h_prime(const ShiftedDispersion& sd, double t) {
    constexpr int kMaxExpansions = 200;

    double lo = sd.inv_n - 1.0;
    double width = 1.0;
    int expand = 0;
    while (sd.h_prime(lo) > t) {
        width *= 2.0;
        lo = sd.inv_n - width;
        if (++expand > kMaxExpansions || !std::isfinite(lo)) throw SolverError(bracket_failure(t));
    }

    double hi;
    expand = 0;
    if (sd.bounded_above()) {
        double gap = 1.0;
        hi = sd.inv_n - gap;
        while (sd.h_prime(hi) < t) {
            gap *= 0.5;
            hi = sd.inv_n - gap;
            if (++expand > kMaxExpansions || gap == 0.0) throw SolverError(bracket_failure(t));
        }
    } else {
        width = 1.0;
        hi = sd.inv_n + width;
        while (sd.h_prime(hi) < t) {
            width *= 2.0;
            hi = sd.inv_n + width;
            if (++expand > kMaxExpansions || !std::isfinite(hi)) throw SolverError(bracket_failure(t));
        }
    }
    if (lo > hi) throw SolverError(bracket_failure(t));

    for (int it = 0; it < 2000; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (sd.h_prime(mid) < t)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace

ConjugacyReport check_conjugacy(const DispersionSpec& spec, std::span<const double> grid) {
    spec.validate();
    const ShiftedDispersion sd{spec, 1.0 / spec.sample_size};
    ConjugacyReport report;
    double worst = -1.0;
    for (double t : grid) {
        require_finite(t);
        const double s = invert_h_prime(sd, t);
        const double rho_def = t * sd.inv_n - t * s + sd.h(s);
        const double rho_prime_def = sd.inv_n - s;
        const double d_rho = std::abs(rho(t, spec) - rho_def);
        const double d_prime = std::abs(rho_prime(t, spec) - rho_prime_def);
        report.max_rho_discrepancy = std::max(report.max_rho_discrepancy, d_rho);
        report.max_rho_prime_discrepancy = std::max(report.max_rho_prime_discrepancy, d_prime);
        if (std::max(d_rho, d_prime) > worst) {
            worst = std::max(d_rho, d_prime);
            report.worst_t = t;
        }
        ++report.points;
    }
    return report;
}

} // namespace minbal
