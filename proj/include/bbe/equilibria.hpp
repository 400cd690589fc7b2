#pragma once

#include "bbe/core.hpp"
#include "bbe/field.hpp"
#include "bbe/quad_rules.hpp"

#include <cmath>

namespace bbe {

enum class EquilibriumKind {
    Maxwellian, // mu = exp(-|v|^2/2)
    BoseM,      // M_rho = mu / (1 - rho mu)
    BoseN,      // N_rho = mu^{1/2} / (1 - rho mu)
    CalM,       // rho M_rho
    CalN,       // rho^{1/2} N_rho
};

inline double maxwellian(const Vec3& v) { return std::exp(-0.5 * norm2(v)); }

inline double eval_equilibrium(EquilibriumKind kind, const Fugacity& rho, const Vec3& v)
{
    const double mu = maxwellian(v);
    const double den = 1.0 - rho.value() * mu;
    switch (kind) {
    case EquilibriumKind::Maxwellian:
        return mu;
    case EquilibriumKind::BoseM:
        return mu / den;
    case EquilibriumKind::BoseN:
        return std::sqrt(mu) / den;
    case EquilibriumKind::CalM:
        return rho.value() * mu / den;
    case EquilibriumKind::CalN:
        return std::sqrt(rho.value() * mu) / den;
    }
    return 0.0;
}

// ---------------------------------------------------------------------------
// Weights
// ---------------------------------------------------------------------------

struct WeightSpec {
    enum class Kind { Polynomial, Localized };
    Kind kind;
    double param; // order l for W_l, delta for U_delta

    static WeightSpec polynomial(double l) { return {Kind::Polynomial, l}; }
    static WeightSpec localized(double delta)
    {
        if (!(delta > 0.0 && delta < 1.0))
            throw RangeError("U_delta requires 0 < delta < 1");
        return {Kind::Localized, delta};
    }
};

/// W_l(v) = (1 + |v|^2)^{l/2}
inline double weight_w(double l, double r2) { return std::pow(1.0 + r2, 0.5 * l); }

/// U_delta(v) = (1 + delta^2 |v|^2)^{1/2}
inline double weight_u(double delta, double r2) { return std::sqrt(1.0 + delta * delta * r2); }

inline double eval_weight(const WeightSpec& spec, const Vec3& v)
{
    const double r2 = norm2(v);
    return spec.kind == WeightSpec::Kind::Polynomial ? weight_w(spec.param, r2) : weight_u(spec.param, r2);
}

// ---------------------------------------------------------------------------
// Riemann zeta for s > 1: direct sum plus Euler-Maclaurin tail.
// ---------------------------------------------------------------------------

inline double riemann_zeta(double s)
{
    if (!(s > 1.0))
        throw RangeError("zeta series requires s > 1");
    constexpr int n_direct = 64;
    double sum = 0.0;
    for (int n = n_direct - 1; n >= 1; --n)
        sum += std::pow(static_cast<double>(n), -s);
    // Tail sum_{n >= N} n^{-s} by Euler-Maclaurin with Bernoulli terms B2..B8.
    const double N = n_direct;
    double tail = std::pow(N, 1.0 - s) / (s - 1.0) + 0.5 * std::pow(N, -s);
    const double b[] = {1.0 / 6.0, -1.0 / 30.0, 1.0 / 42.0, -1.0 / 30.0};
    double fact = 1.0;  // (2k)!
    double rising = s;  // s (s+1) ... (s + 2k - 2)
    for (int k = 1; k <= 4; ++k) {
        fact *= (2.0 * k - 1.0) * (2.0 * k);
        tail += b[k - 1] / fact * rising * std::pow(N, -s - 2.0 * k + 1.0);
        rising *= (s + 2.0 * k - 1.0) * (s + 2.0 * k);
    }
    return sum + tail;
}

inline const double zeta_3_2 = riemann_zeta(1.5);
inline const double zeta_5_2 = riemann_zeta(2.5);

// ---------------------------------------------------------------------------
// Moments and temperatures
// ---------------------------------------------------------------------------

struct TemperatureReport {
    double m0;
    double m2;
    double kinetic;  // T bar
    double critical; // T bar_c
};

inline TemperatureReport temperatures_from_moments(double m0, double m2, double mass = 1.0, double k_b = 1.0)
{
    if (!(m0 > 0.0))
        throw DegenerateError("zeroth moment must be positive");
    TemperatureReport t{m0, m2, 0.0, 0.0};
    t.kinetic = mass * m2 / (3.0 * k_b * m0);
    t.critical = mass * zeta_5_2 / (2.0 * pi * k_b * zeta_3_2) * std::pow(m0 / zeta_3_2, 2.0 / 3.0);
    return t;
}

inline TemperatureReport moments_and_temperatures(const AnalyticField& f, double mass = 1.0, double k_b = 1.0,
                                                  const VolumeRuleSpec& spec = {.radius = 12.0,
                                                                                .radial_points = 64,
                                                                                .polar_points = 8,
                                                                                .azimuth_points = 8,
                                                                                .refine_origin = true})
{
    const VolumeRule rule = volume_rule(spec);
    double m0 = 0.0, m2 = 0.0;
    for (std::size_t i = 0; i < rule.size(); ++i) {
        const PointCache p(rule.points[i]);
        const double val = f.eval(p);
        m0 += rule.weights[i] * val;
        m2 += rule.weights[i] * p.r2 * val;
    }
    return temperatures_from_moments(m0, m2, mass, k_b);
}

// ---------------------------------------------------------------------------
// Pointwise sandwich mu <= M_rho <= mu/(1-rho), mu^{1/2} <= N_rho <= mu^{1/2}/(1-rho)
// ---------------------------------------------------------------------------

struct SandwichCheck {
    bool m_lower;
    bool m_upper;
    bool n_bounds;

    bool all() const { return m_lower && m_upper && n_bounds; }
};

inline SandwichCheck sandwich_pointwise(const Fugacity& rho, const Vec3& v)
{
    const double mu = maxwellian(v);
    const double sq = std::sqrt(mu);
    const double m = eval_equilibrium(EquilibriumKind::BoseM, rho, v);
    const double n = eval_equilibrium(EquilibriumKind::BoseN, rho, v);
    const double d = rho.one_minus();
    return {mu <= m, m <= mu / d, sq <= n && n <= sq / d};
}

} // namespace bbe
