#pragma once

#include "bbe/core.hpp"
#include "bbe/field.hpp"
#include "bbe/norms.hpp"
#include "bbe/quad_rules.hpp"

#include <array>
#include <cmath>
#include <memory>

namespace bbe {

/// Orthonormal basis e_1..e_5 of ker L^rho, built from
/// d = {N, N v1, N v2, N v3, N |v|^2 - <N |v|^2, N> |N|^{-2} N}.
struct KernelBasis {
    double rho = 0.0;
    std::array<AnalyticField, 5> d;
    std::array<AnalyticField, 5> e;
    std::array<std::array<double, 5>, 5> gram{}; // <e_i, e_j>
    double d5_shift = 0.0;                       // <N |v|^2, N> / |N|^2
    std::shared_ptr<const VolumeRule> rule;

    double inner(const AnalyticField& f, const AnalyticField& g) const { return inner_product(f, g, *rule); }
    double norm(const AnalyticField& f) const { return std::sqrt(inner(f, f)); }
};

inline KernelBasis build_basis(const Fugacity& rho, const NormConfig& cfg = {})
{
    KernelBasis b;
    b.rho = rho.value();
    b.rule = std::make_shared<const VolumeRule>(volume_rule(cfg.volume_spec(rho.value() > cfg.refine_above_rho)));
    const AnalyticField n = rho.value() == 0.0 ? sqrt_mu_field() : n_rho_field(rho.value());
    const AnalyticField n_v2 = n * AnalyticField::speed_squared();
    b.d5_shift = b.inner(n_v2, n) / b.inner(n, n);
    b.d = {n, n * AnalyticField::monomial(1.0, 1, 0, 0), n * AnalyticField::monomial(1.0, 0, 1, 0),
           n * AnalyticField::monomial(1.0, 0, 0, 1), n_v2 - b.d5_shift * n};
    for (int i = 0; i < 5; ++i) {
        const double len = b.norm(b.d[i]);
        if (!(len >= 1e-10))
            throw SingularGramError("kernel basis element d_" + std::to_string(i + 1) + " has vanishing norm");
        b.e[i] = (1.0 / len) * b.d[i];
    }
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j)
            b.gram[i][j] = b.inner(b.e[i], b.e[j]);
    return b;
}

inline double gram_deviation(const KernelBasis& b)
{
    double dev = 0.0;
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j)
            dev = std::max(dev, std::abs(b.gram[i][j] - (i == j ? 1.0 : 0.0)));
    return dev;
}

struct Projection {
    AnalyticField projected; // P f
    AnalyticField residual;  // f - P f
    std::array<double, 5> coefficients;
};

/// P_rho f = sum <f, e_i> e_i
inline Projection project(const AnalyticField& f, const KernelBasis& b)
{
    Projection p;
    for (int i = 0; i < 5; ++i) {
        p.coefficients[i] = b.inner(f, b.e[i]);
        p.projected += p.coefficients[i] * b.e[i];
    }
    p.residual = f - p.projected;
    return p;
}

/// max_i |<f, e_i>|
inline double kernel_overlap(const AnalyticField& f, const KernelBasis& b)
{
    double m = 0.0;
    for (int i = 0; i < 5; ++i)
        m = std::max(m, std::abs(b.inner(f, b.e[i])));
    return m;
}

/// w_f = (a + b.v + c |v|^2) N and Phi_f = (f - w_f)(1 - rho mu).
struct WfPhif {
    double a = 0.0;
    Vec3 b;
    double c = 0.0;
    AnalyticField w_f;
    AnalyticField phi_f;
    double classical_overlap = 0.0; // max |<Phi_f, e_i^c>| against the rho = 0 basis
};

/// Coefficients solve <w_f, N^{-1} mu psi> = <f, N^{-1} mu psi> for psi in {1, v, |v|^2};
/// the (2 pi)^{-3/2} factor normalizes the Gaussian moments of mu.
inline WfPhif wf_phif(const AnalyticField& f, const KernelBasis& basis, const KernelBasis& classical,
                      double tolerance = 1e-8)
{
    const double rho = basis.rho;
    const double fn = basis.norm(f);
    if (kernel_overlap(f, basis) > tolerance * std::max(1.0, fn))
        throw OrthogonalityError("w_f/Phi_f construction needs f orthogonal to ker L^rho");

    // N^{-1} mu = (1 - rho mu) mu^{1/2}
    const AnalyticField n_inv_mu = AnalyticField::mu_power_quarters(2) * AnalyticField::rho_factor(rho, 1);
    const double A = basis.inner(f, n_inv_mu);
    const double C = basis.inner(f, n_inv_mu * AnalyticField::speed_squared());
    const Vec3 B{basis.inner(f, n_inv_mu * AnalyticField::monomial(1.0, 1, 0, 0)),
                 basis.inner(f, n_inv_mu * AnalyticField::monomial(1.0, 0, 1, 0)),
                 basis.inner(f, n_inv_mu * AnalyticField::monomial(1.0, 0, 0, 1))};
    const double z = std::pow(2.0 * pi, -1.5);

    WfPhif out;
    out.a = z * (2.5 * A - 0.5 * C);
    out.b = z * B;
    out.c = z * (C / 6.0 - 0.5 * A);
    const AnalyticField poly = AnalyticField::constant(out.a) + AnalyticField::monomial(out.b.x, 1, 0, 0) +
                               AnalyticField::monomial(out.b.y, 0, 1, 0) + AnalyticField::monomial(out.b.z, 0, 0, 1) +
                               out.c * AnalyticField::speed_squared();
    const AnalyticField n = rho == 0.0 ? sqrt_mu_field() : n_rho_field(rho);
    out.w_f = poly * n;
    out.phi_f = rho == 0.0 ? f - out.w_f : (f - out.w_f) * AnalyticField::rho_factor(rho, 1);
    out.classical_overlap = kernel_overlap(out.phi_f, classical);
    return out;
}

inline WfPhif wf_phif(const AnalyticField& f, const Fugacity& rho, const NormConfig& cfg = {})
{
    const KernelBasis basis = build_basis(rho, cfg);
    const KernelBasis classical = build_basis(Fugacity(0.0), cfg);
    return wf_phif(f, basis, classical);
}

} // namespace bbe
