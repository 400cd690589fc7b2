#pragma once

#include "bbe/core.hpp"
#include "bbe/field.hpp"

#include <cmath>

namespace bbe {

/// A collision configuration in the sigma-representation.
///
/// v' = (v + v*)/2 + |v - v*|/2 sigma,  v'* = (v + v*)/2 - |v - v*|/2 sigma,
/// theta is the angle between v - v* and sigma.
struct CollisionConfig {
    Vec3 v;
    Vec3 v_star;
    Vec3 sigma;
    Vec3 v_prime;
    Vec3 v_prime_star;
    double rel_speed; // |v - v*|
    double theta;
    double sin_half; // sin(theta/2)
};

/// Angle between a (nonzero) vector and a unit vector, via atan2 of the
/// perpendicular and parallel components.
inline double deviation_angle(const Vec3& rel, const Vec3& sigma)
{
    const double par = dot(rel, sigma);
    const double perp = norm(cross(rel, sigma));
    return std::atan2(perp, par);
}

inline CollisionConfig make_collision(const Vec3& v, const Vec3& v_star, const Vec3& sigma)
{
    const Vec3 rel = v - v_star;
    const double r = norm(rel);
    if (!(r > 0.0))
        throw DegenerateError("post-collision velocities need v != v*");
    if (std::abs(norm2(sigma) - 1.0) > 1e-12)
        throw RangeError("sigma must be a unit vector");
    CollisionConfig c;
    c.v = v;
    c.v_star = v_star;
    c.sigma = sigma;
    c.rel_speed = r;
    const Vec3 center = 0.5 * (v + v_star);
    const Vec3 half = (0.5 * r) * sigma;
    c.v_prime = center + half;
    c.v_prime_star = center - half;
    c.theta = deviation_angle(rel, sigma);
    c.sin_half = std::sin(0.5 * c.theta);
    return c;
}

/// Fast path for samplers that already know theta; skips the checks.
inline CollisionConfig make_collision_unchecked(const Vec3& v, const Vec3& v_star, const Vec3& sigma, double rel_speed,
                                                double theta, double sin_half)
{
    CollisionConfig c;
    c.v = v;
    c.v_star = v_star;
    c.sigma = sigma;
    c.rel_speed = rel_speed;
    const Vec3 center = 0.5 * (v + v_star);
    const Vec3 half = (0.5 * rel_speed) * sigma;
    c.v_prime = center + half;
    c.v_prime_star = center - half;
    c.theta = theta;
    c.sin_half = sin_half;
    return c;
}

struct PostCollision {
    Vec3 v_prime;
    Vec3 v_prime_star;
};

inline PostCollision post_collision(const Vec3& v, const Vec3& v_star, const Vec3& sigma)
{
    const CollisionConfig c = make_collision(v, v_star, sigma);
    return {c.v_prime, c.v_prime_star};
}

// ---------------------------------------------------------------------------
// Kernels
// ---------------------------------------------------------------------------

/// Angular part sin^{-2-2s}(theta/2) 1_{theta <= pi/2}.
inline double angular_b(double theta, double sin_half, double s)
{
    if (theta > 0.5 * pi)
        return 0.0;
    return std::pow(sin_half, -2.0 - 2.0 * s);
}

/// B^{gamma,s} = |v - v*|^gamma sin^{-2-2s}(theta/2) on 0 <= theta <= pi/2.
inline double kernel_b(double rel_speed, double theta, const KernelParams& p)
{
    if (theta > 0.5 * pi)
        return 0.0;
    return std::pow(rel_speed, p.gamma()) * std::pow(std::sin(0.5 * theta), -2.0 - 2.0 * p.s());
}

inline double kernel_b(const Vec3& v_rel, const Vec3& sigma, const KernelParams& p)
{
    return kernel_b(norm(v_rel), deviation_angle(v_rel, sigma), p);
}

/// B_phi = |v - v*|^gamma (sin^{-1-s}(theta/2) + cos^{-1-s}(theta/2))^2 on the same
/// support, with the generic constant set to 1.
inline double kernel_b_phi(double rel_speed, double theta, const KernelParams& p)
{
    if (theta > 0.5 * pi)
        return 0.0;
    const double e = -1.0 - p.s();
    const double a = std::pow(std::sin(0.5 * theta), e) + std::pow(std::cos(0.5 * theta), e);
    return std::pow(rel_speed, p.gamma()) * a * a;
}

inline double kernel_b_phi(const Vec3& v_rel, const Vec3& sigma, const KernelParams& p)
{
    return kernel_b_phi(norm(v_rel), deviation_angle(v_rel, sigma), p);
}

// ---------------------------------------------------------------------------
// S(g) = g + g* - g' - g'*
// ---------------------------------------------------------------------------

/// Field values at the four velocities of a collision.
struct FourPoint {
    PointCache v;
    PointCache v_star;
    PointCache v_prime;
    PointCache v_prime_star;

    explicit FourPoint(const CollisionConfig& c)
        : v(c.v)
        , v_star(c.v_star)
        , v_prime(c.v_prime)
        , v_prime_star(c.v_prime_star)
    {
    }
};

inline double s_operator(const AnalyticField& g, const FourPoint& p)
{
    return g.eval(p.v) + g.eval(p.v_star) - g.eval(p.v_prime) - g.eval(p.v_prime_star);
}

inline double s_operator(const AnalyticField& g, const CollisionConfig& c) { return s_operator(g, FourPoint(c)); }

} // namespace bbe
