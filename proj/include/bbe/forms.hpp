#pragma once

#include "bbe/collision.hpp"
#include "bbe/core.hpp"
#include "bbe/equilibria.hpp"
#include "bbe/field.hpp"
#include "bbe/quad.hpp"

#include <array>
#include <cmath>
#include <random>

namespace bbe {

// ---------------------------------------------------------------------------
// Pointwise integrands
// ---------------------------------------------------------------------------

/// |v - v*|^gamma sin^{-2-2s}(theta/2) on the kernel support.
inline double kernel_at(const CollisionConfig& c, const KernelParams& p)
{
    return std::pow(c.rel_speed, p.gamma()) * angular_b(c.theta, c.sin_half, p.s());
}

/// N N* N' N'* = mu mu* / prod (1 - rho mu_i)
inline double n_product(const FourPoint& q, double rho)
{
    const double den = (1.0 - rho * q.v.mu) * (1.0 - rho * q.v_star.mu) * (1.0 - rho * q.v_prime.mu) *
                       (1.0 - rho * q.v_prime_star.mu);
    return q.v.mu * q.v_star.mu / den;
}

// ---------------------------------------------------------------------------
// Quadratic forms
// ---------------------------------------------------------------------------

struct FormResult {
    Estimate dirichlet; // <L f, f>
    Estimate j_value;   // J_rho(f)
    Estimate hc_value;  // H_c(companion)
    Estimate dirichlet_minus_rho_j;      // <L f, f> - rho J
    Estimate upper_minus_dirichlet;      // (1 - rho)^{-4} rho J - <L f, f>
    Estimate j_minus_hc;                 // J_rho(f) - H_c(companion)
    bool common_random_numbers = true;
};

/// Joint estimate of <L^rho f, f>, J_rho(f) and H_c(companion) on one sample
/// stream. Companion defaults to zero.
inline MultiEstimate<3> evaluate_forms_multi(const AnalyticField& f, const AnalyticField& companion,
                                             const Fugacity& rho, const KernelParams& p, const QuadConfig& cfg)
{
    const double r = rho.value();
    const AnalyticField g = divide_by_n_rho(f, r);
    const AnalyticField h = divide_by_sqrt_mu(companion);
    const SamplerSpec spec = SamplerSpec::for_kernel(p);
    return mc_integrate_multi<3>(
        [&](const CollisionConfig& c) {
            const FourPoint q(c);
            const double b = kernel_at(c, p);
            if (b == 0.0)
                return std::array<double, 3>{0.0, 0.0, 0.0};
            const double mm = q.v.mu * q.v_star.mu;
            const double sg = s_operator(g, q);
            const double sh = h.empty() ? 0.0 : s_operator(h, q);
            const double jq = 0.25 * b * mm * sg * sg;
            const double dq = r == 0.0 ? 0.0 : 0.25 * r * b * n_product(q, r) * sg * sg;
            return std::array<double, 3>{dq, jq, 0.25 * b * mm * sh * sh};
        },
        spec, cfg);
}

inline FormResult evaluate_forms(const AnalyticField& f, const AnalyticField& companion, const Fugacity& rho,
                                 const KernelParams& p, const QuadConfig& cfg)
{
    const MultiEstimate<3> m = evaluate_forms_multi(f, companion, rho, p, cfg);
    const double r = rho.value();
    FormResult out;
    out.dirichlet = m.component(0);
    out.j_value = m.component(1);
    out.hc_value = m.component(2);
    out.dirichlet_minus_rho_j = m.linear({1.0, -r, 0.0});
    out.upper_minus_dirichlet = m.linear({-1.0, r / std::pow(1.0 - r, 4.0), 0.0});
    out.j_minus_hc = m.linear({0.0, 1.0, -1.0});
    return out;
}

/// <L^rho f, f> = (rho/4) int B N N* N' N'* S^2(N^{-1} f)
inline Estimate dirichlet_quantum(const AnalyticField& f, const Fugacity& rho, const KernelParams& p,
                                  const QuadConfig& cfg)
{
    if (rho.value() == 0.0)
        return {0.0, 0.0, cfg.mc_samples, cfg.seed};
    return evaluate_forms_multi(f, AnalyticField::zero(), rho, p, cfg).component(0);
}

/// Same integrand as dirichlet_quantum on the deterministic tensor grid.
inline double dirichlet_oracle(const AnalyticField& f, const Fugacity& rho, const KernelParams& p,
                               const QuadConfig& cfg)
{
    const double r = rho.value();
    if (r == 0.0)
        return 0.0;
    const AnalyticField g = divide_by_n_rho(f, r);
    return tensor_oracle_integrate(
        [&](const CollisionConfig& c) {
            const double b = kernel_at(c, p);
            if (b == 0.0)
                return 0.0;
            const FourPoint q(c);
            const double sg = s_operator(g, q);
            return 0.25 * r * b * n_product(q, r) * sg * sg;
        },
        p, cfg.oracle_grid, cfg.truncation_radius, cfg.threads);
}

/// J_rho(f) = (1/4) int B mu mu* S^2(N^{-1} f)
inline Estimate j_functional(const AnalyticField& f, const Fugacity& rho, const KernelParams& p, const QuadConfig& cfg)
{
    return evaluate_forms_multi(f, AnalyticField::zero(), rho, p, cfg).component(1);
}

/// H_c(f) = (1/4) int B mu mu* S^2(mu^{-1/2} f)
inline Estimate h_classical(const AnalyticField& f, const KernelParams& p, const QuadConfig& cfg)
{
    return evaluate_forms_multi(AnalyticField::zero(), f, Fugacity(0.0), p, cfg).component(2);
}

/// Polarized forms <L g, h> and <g, L h> on one sample stream, using the
/// unsymmetrized representation <L g, h> = rho int B N N* N' N'* S(N^{-1} g) (N^{-1} h)(v).
/// The sampler pairs phi with phi + pi, which cancels the O(theta) part of S.
struct PairingResult {
    Estimate lg_h;
    Estimate g_lh;
    Estimate difference; // <L g, h> - <g, L h>
};

inline PairingResult polarized_pairing(const AnalyticField& g, const AnalyticField& h, const Fugacity& rho,
                                       const KernelParams& p, const QuadConfig& cfg)
{
    const double r = rho.value();
    const AnalyticField G = divide_by_n_rho(g, r);
    const AnalyticField H = divide_by_n_rho(h, r);
    SamplerSpec spec = SamplerSpec::for_kernel(p);
    spec.antithetic = true;
    const MultiEstimate<2> m = mc_integrate_multi<2>(
        [&](const CollisionConfig& c) {
            const FourPoint q(c);
            const double b = kernel_at(c, p);
            if (b == 0.0)
                return std::array<double, 2>{0.0, 0.0};
            const double w = r * b * n_product(q, r);
            return std::array<double, 2>{w * s_operator(G, q) * H.eval(q.v), w * s_operator(H, q) * G.eval(q.v)};
        },
        spec, cfg);
    return {m.component(0), m.component(1), m.difference(0, 1)};
}

/// Classical polarized pairing (rho = 0 and weights mu mu*).
inline PairingResult polarized_pairing_classical(const AnalyticField& g, const AnalyticField& h, const KernelParams& p,
                                                 const QuadConfig& cfg)
{
    const AnalyticField G = divide_by_sqrt_mu(g);
    const AnalyticField H = divide_by_sqrt_mu(h);
    const MultiEstimate<2> m = mc_integrate_multi<2>(
        [&](const CollisionConfig& c) {
            const FourPoint q(c);
            const double b = kernel_at(c, p);
            if (b == 0.0)
                return std::array<double, 2>{0.0, 0.0};
            const double w = b * q.v.mu * q.v_star.mu;
            return std::array<double, 2>{w * s_operator(G, q) * H.eval(q.v), w * s_operator(H, q) * G.eval(q.v)};
        },
        SamplerSpec::for_kernel(p), cfg);
    return {m.component(0), m.component(1), m.difference(0, 1)};
}

struct SandwichFormsResult {
    bool lhs_ok;
    bool rhs_ok;
    FormResult forms;
};

/// rho J <= <L f, f> <= (1 - rho)^{-4} rho J, each side with 3 stderr slack on the
/// correlated difference.
inline SandwichFormsResult sandwich_forms(const AnalyticField& f, const Fugacity& rho, const KernelParams& p,
                                          const QuadConfig& cfg)
{
    const FormResult fr = evaluate_forms(f, AnalyticField::zero(), rho, p, cfg);
    const bool lhs = fr.dirichlet_minus_rho_j.value >= -3.0 * fr.dirichlet_minus_rho_j.std_error;
    const bool rhs = fr.upper_minus_dirichlet.value >= -3.0 * fr.upper_minus_dirichlet.std_error;
    return {lhs, rhs, fr};
}

/// mu mu* <= N N* N' N'* <= (1 - rho)^{-4} mu mu* at one configuration.
inline bool integrand_sandwich_holds(const CollisionConfig& c, const Fugacity& rho)
{
    const FourPoint q(c);
    const double mm = q.v.mu * q.v_star.mu;
    const double np = n_product(q, rho.value());
    const double d = rho.one_minus();
    return mm <= np * (1.0 + 1e-14) && np <= mm / (d * d * d * d) * (1.0 + 1e-14);
}

// ---------------------------------------------------------------------------
// Technical lemma integrals with the localized weight U_delta
// ---------------------------------------------------------------------------

struct LemmaArgs {
    double alpha;
    double beta;
    double delta;
    double s;

    void validate() const
    {
        if (!(alpha < 0.0))
            throw RangeError("lemma requires alpha < 0");
        if (!(beta < 0.0))
            throw RangeError("lemma requires beta < 0");
        if (!(s > 0.0 && s < 1.0))
            throw RangeError("lemma requires 0 < s < 1");
        if (!(delta > 0.0 && delta < 1.0))
            throw RangeError("lemma requires 0 < delta < 1");
        if (!(alpha + 2.0 * s > -3.0))
            throw RangeError("lemma requires alpha + 2s > -3");
    }
};

/// Fitted constants for the lemma envelopes: 1.5 times the largest ratio
/// value / envelope seen for alpha = -1, beta = -0.5, s = 0.5, |v| in {0, 2, 5, 10},
/// delta in {2^-1, ..., 2^-4}.
inline constexpr double lemma_x_envelope_constant = 20.0;
inline constexpr double lemma_phi_envelope_constant = 16.0;

/// Right-hand envelope max{1/s, 1/(1-s)} |beta|^{2s} delta^{2s} / (alpha + 2s + 3) <v>^{alpha+beta+2s}.
inline double lemma_x_envelope(const Vec3& v, const LemmaArgs& a)
{
    const double c = std::max(1.0 / a.s, 1.0 / (1.0 - a.s));
    return c * std::pow(std::abs(a.beta) * a.delta, 2.0 * a.s) / (a.alpha + 2.0 * a.s + 3.0) *
           std::pow(1.0 + norm2(v), 0.5 * (a.alpha + a.beta + 2.0 * a.s));
}

/// max{beta^2 delta^2 / s, 1/(1-s)} |beta|^{2s} delta^{2s} / (alpha + 2s + 3) <v*>^{alpha+2s}.
inline double lemma_phi_envelope(const Vec3& v_star, const LemmaArgs& a)
{
    const double c = std::max(a.beta * a.beta * a.delta * a.delta / a.s, 1.0 / (1.0 - a.s));
    return c * std::pow(std::abs(a.beta) * a.delta, 2.0 * a.s) / (a.alpha + 2.0 * a.s + 3.0) *
           std::pow(1.0 + norm2(v_star), 0.5 * (a.alpha + 2.0 * a.s));
}

/// X(beta, delta) = delta^{-beta} ((U^{beta/2})'(U^{beta/2})'_* - U^{beta/2} U^{beta/2}_*)^2,
/// evaluated through log1p/expm1 so the small-delta cancellation stays accurate.
inline double lemma_x_value(const CollisionConfig& c, double beta, double delta)
{
    const double d2 = delta * delta;
    const double a = d2 * norm2(c.v), b = d2 * norm2(c.v_star);
    const double ap = d2 * norm2(c.v_prime), bp = d2 * norm2(c.v_prime_star);
    const double log_p = 0.25 * beta * (std::log1p(a) + std::log1p(b));
    const double ratio = ((ap - a) + (bp - b) + (ap * bp - a * b)) / ((1.0 + a) * (1.0 + b));
    const double diff = std::exp(log_p) * std::expm1(0.25 * beta * std::log1p(ratio));
    return std::pow(delta, -beta) * diff * diff;
}

/// phi_{beta,delta}(v) = (1 - U^{beta/2}) mu^{1/2}
inline double lemma_phi_function(const Vec3& v, double beta, double delta)
{
    const double r2 = norm2(v);
    return -std::expm1(0.25 * beta * std::log1p(delta * delta * r2)) * std::exp(-0.25 * r2);
}

namespace detail {

/// Defensive mixture for a free velocity w around a fixed velocity x:
/// components (weights p_k) N(0, I), radial law for w - x with density
/// ~ r^{alpha+2} exp(-r^2/4), and N(0, wide^2 I).
class FixedPointMixture {
public:
    FixedPointMixture(const Vec3& fixed, double alpha, double wide, std::array<double, 3> weights)
        : x_(fixed)
        , alpha_(alpha)
        , wide_(wide)
        , p_(weights)
    {
        shape_ = 0.5 * (alpha + 3.0);
        log_z_ = std::log(4.0 * pi) + (alpha + 2.0) * std::log(2.0) + std::lgamma(shape_);
    }

    Vec3 draw(std::mt19937_64& rng) const
    {
        const double pick = uniform01(rng);
        std::normal_distribution<double> nd(0.0, 1.0);
        if (pick < p_[0])
            return gaussian_vec(rng, nd);
        if (pick < p_[0] + p_[1]) {
            std::gamma_distribution<double> gd(shape_, 1.0);
            const double r = 2.0 * std::sqrt(gd(rng));
            return x_ + r * uniform_direction(rng);
        }
        return wide_ * gaussian_vec(rng, nd);
    }

    double density(const Vec3& w) const
    {
        const double n2 = norm2(w);
        double d = p_[0] * std::exp(-0.5 * n2 - 1.5 * std::log(2.0 * pi));
        const double r = norm(w - x_);
        if (r > 0.0)
            d += p_[1] * std::exp(alpha_ * std::log(r) - 0.25 * r * r - log_z_);
        if (p_[2] > 0.0)
            d += p_[2] * std::exp(-0.5 * n2 / (wide_ * wide_) - 1.5 * std::log(2.0 * pi * wide_ * wide_));
        return d;
    }

private:
    Vec3 x_;
    double alpha_;
    double wide_;
    std::array<double, 3> p_;
    double shape_;
    double log_z_;
};

/// Integral over (w, sigma) of F(config) where the collision pair is built by
/// `pair(w)` returning (v, v*). sigma is drawn about v - v* with the graded law.
template <class Pair, class F>
Estimate fixed_point_integrate(const FixedPointMixture& mix, double s, const QuadConfig& cfg, Pair&& pair, F&& f)
{
    cfg.validate();
    return run_batches<1>(cfg.mc_samples, cfg.seed, cfg.threads,
                          [&](std::mt19937_64& rng) {
                              const Vec3 w = mix.draw(rng);
                              const auto [v, vs] = pair(w);
                              const Vec3 u = v - vs;
                              const double r = norm(u);
                              const double dens = mix.density(w);
                              const ThetaDraw td = sample_theta_graded(s, uniform_open0(rng), cfg.theta_floor);
                              const double phi = 2.0 * pi * uniform01(rng);
                              if (!(r > 0.0) || !(dens > 0.0))
                                  return std::array<double, 1>{0.0};
                              const Vec3 k = (1.0 / r) * u;
                              Vec3 e1, e2;
                              orthonormal_frame(k, e1, e2);
                              const double wt = 2.0 * pi * td.weight / dens;
                              double acc = 0.0;
                              for (double ph : {phi, phi + pi}) {
                                  const CollisionConfig c = make_collision_unchecked(
                                      v, vs, sigma_from_angles(k, e1, e2, td.theta, ph), r, td.theta, td.t);
                                  acc += 0.5 * wt * f(c);
                              }
                              return std::array<double, 1>{acc};
                          })
        .component(0);
}

} // namespace detail

/// int b_s(theta) |v - v*|^alpha X(beta, delta) mu(v*) dsigma dv*, v fixed.
inline Estimate lemma_x_integral(const Vec3& v, const LemmaArgs& a, const QuadConfig& cfg)
{
    a.validate();
    const detail::FixedPointMixture mix(v, a.alpha, 1.0, {0.6, 0.4, 0.0});
    return detail::fixed_point_integrate(
        mix, a.s, cfg, [&](const Vec3& w) { return std::pair<Vec3, Vec3>{v, w}; },
        [&](const CollisionConfig& c) {
            return std::pow(c.rel_speed, a.alpha) * angular_b(c.theta, c.sin_half, a.s) *
                   lemma_x_value(c, a.beta, a.delta) * maxwellian(c.v_star);
        });
}

/// int b_s(theta) |v - v*|^alpha (phi' - phi)^2 dsigma dv, v* fixed.
inline Estimate lemma_phi_integral(const Vec3& v_star, const LemmaArgs& a, const QuadConfig& cfg)
{
    a.validate();
    const double wide = std::max(2.0, norm(v_star));
    const detail::FixedPointMixture mix(v_star, a.alpha, wide, {0.45, 0.35, 0.2});
    return detail::fixed_point_integrate(
        mix, a.s, cfg, [&](const Vec3& w) { return std::pair<Vec3, Vec3>{w, v_star}; },
        [&](const CollisionConfig& c) {
            const double d = lemma_phi_function(c.v_prime, a.beta, a.delta) - lemma_phi_function(c.v, a.beta, a.delta);
            return std::pow(c.rel_speed, a.alpha) * angular_b(c.theta, c.sin_half, a.s) * d * d;
        });
}

} // namespace bbe
