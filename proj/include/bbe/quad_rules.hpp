#pragma once

#include "bbe/core.hpp"

#include <cmath>
#include <vector>

namespace bbe {

struct Rule1D {
    std::vector<double> nodes;
    std::vector<double> weights;

    std::size_t size() const { return nodes.size(); }

    void append(const Rule1D& o)
    {
        nodes.insert(nodes.end(), o.nodes.begin(), o.nodes.end());
        weights.insert(weights.end(), o.weights.begin(), o.weights.end());
    }
};

/// n-point Gauss-Legendre rule on [a, b] (Newton iteration on P_n).
inline Rule1D gauss_legendre(int n, double a = -1.0, double b = 1.0)
{
    Rule1D r;
    r.nodes.resize(n);
    r.weights.resize(n);
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    const int m = (n + 1) / 2;
    for (int i = 0; i < m; ++i) {
        double z = std::cos(pi * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p1 = 1.0, p2 = 0.0;
            for (int j = 0; j < n; ++j) {
                const double p3 = p2;
                p2 = p1;
                p1 = ((2.0 * j + 1.0) * z * p2 - j * p3) / (j + 1.0);
            }
            pp = n * (z * p1 - p2) / (z * z - 1.0);
            const double z1 = z;
            z = z1 - p1 / pp;
            if (std::abs(z - z1) < 1e-15)
                break;
        }
        // Recompute derivative at the converged root.
        double p1 = 1.0, p2 = 0.0;
        for (int j = 0; j < n; ++j) {
            const double p3 = p2;
            p2 = p1;
            p1 = ((2.0 * j + 1.0) * z * p2 - j * p3) / (j + 1.0);
        }
        pp = n * (z * p1 - p2) / (z * z - 1.0);
        const double w = 2.0 / ((1.0 - z * z) * pp * pp);
        r.nodes[i] = mid - half * z;
        r.nodes[n - 1 - i] = mid + half * z;
        r.weights[i] = r.weights[n - 1 - i] = half * w;
    }
    return r;
}

/// n-point Gauss-Hermite rule for weight exp(-x^2) on the real line.
inline Rule1D gauss_hermite(int n)
{
    Rule1D r;
    r.nodes.resize(n);
    r.weights.resize(n);
    const double pim4 = 0.7511255444649425; // pi^(-1/4)
    const int m = (n + 1) / 2;
    double z = 0.0;
    for (int i = 0; i < m; ++i) {
        if (i == 0)
            z = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -0.16667);
        else if (i == 1)
            z -= 1.14 * std::pow(static_cast<double>(n), 0.426) / z;
        else if (i == 2)
            z = 1.86 * z - 0.86 * r.nodes[0];
        else if (i == 3)
            z = 1.91 * z - 0.91 * r.nodes[1];
        else
            z = 2.0 * z - r.nodes[i - 2];
        double pp = 0.0;
        for (int it = 0; it < 200; ++it) {
            double p1 = pim4, p2 = 0.0;
            for (int j = 0; j < n; ++j) {
                const double p3 = p2;
                p2 = p1;
                p1 = z * std::sqrt(2.0 / (j + 1)) * p2 - std::sqrt(static_cast<double>(j) / (j + 1)) * p3;
            }
            pp = std::sqrt(2.0 * n) * p2;
            const double z1 = z;
            z = z1 - p1 / pp;
            if (std::abs(z - z1) <= 1e-15)
                break;
        }
        r.nodes[i] = z;
        r.nodes[n - 1 - i] = -z;
        r.weights[i] = r.weights[n - 1 - i] = 2.0 / (pp * pp);
    }
    return r;
}

/// Composite Gauss-Legendre on geometric panels [0, x_K], [x_K, x_{K-1}], ..., [x_1, b]
/// with x_k = b * ratio^k. Resolves integrands concentrated or singular at 0.
inline Rule1D geometric_panels(double b, int panels, double ratio, int points_per_panel)
{
    Rule1D r;
    double hi = b;
    for (int k = 0; k < panels; ++k) {
        const double lo = hi * ratio;
        r.append(gauss_legendre(points_per_panel, lo, hi));
        hi = lo;
    }
    r.append(gauss_legendre(points_per_panel, 0.0, hi));
    return r;
}

/// Radial rule on [0, R] for integrands f(r) r^2 dr. With `refine`, 32 extra radii
/// resolve [0, 1] geometrically (for fields concentrated near the origin).
inline Rule1D radial_rule(double R, int n_main, bool refine)
{
    if (!refine)
        return gauss_legendre(n_main, 0.0, R);
    Rule1D r = geometric_panels(1.0, 3, 0.25, 8);
    r.append(gauss_legendre(n_main, 1.0, R));
    return r;
}

/// Tensor rule on the unit sphere: Gauss-Legendre in cos(theta) times uniform azimuth.
/// Exact for spherical polynomials of degree <= min(2 n_polar - 1, n_azimuth - 1).
struct SphereRule {
    std::vector<Vec3> points;
    std::vector<double> weights;
    std::vector<double> polar;   // theta of each point
    std::vector<double> azimuth; // phi of each point

    std::size_t size() const { return points.size(); }
};

inline SphereRule sphere_rule(int n_polar, int n_azimuth)
{
    SphereRule s;
    const Rule1D gl = gauss_legendre(n_polar, -1.0, 1.0);
    const double dphi = 2.0 * pi / n_azimuth;
    for (int i = 0; i < n_polar; ++i) {
        const double ct = gl.nodes[i];
        const double st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
        const double theta = std::acos(ct);
        for (int j = 0; j < n_azimuth; ++j) {
            const double phi = (j + 0.5) * dphi;
            s.points.push_back({st * std::cos(phi), st * std::sin(phi), ct});
            s.weights.push_back(gl.weights[i] * dphi);
            s.polar.push_back(theta);
            s.azimuth.push_back(phi);
        }
    }
    return s;
}

/// Product rule on the ball |v| <= R: radial rule times sphere rule.
struct VolumeRule {
    Rule1D radial;
    SphereRule sphere;
    std::vector<Vec3> points;
    std::vector<double> weights; // include r^2 dr dsigma

    std::size_t size() const { return points.size(); }
};

struct VolumeRuleSpec {
    double radius = 12.0;
    int radial_points = 48;
    int polar_points = 24;
    int azimuth_points = 40;
    bool refine_origin = false;
};

inline VolumeRule volume_rule(const VolumeRuleSpec& spec)
{
    VolumeRule v;
    v.radial = radial_rule(spec.radius, spec.radial_points, spec.refine_origin);
    v.sphere = sphere_rule(spec.polar_points, spec.azimuth_points);
    v.points.reserve(v.radial.size() * v.sphere.size());
    v.weights.reserve(v.radial.size() * v.sphere.size());
    for (std::size_t i = 0; i < v.radial.size(); ++i) {
        const double r = v.radial.nodes[i];
        const double wr = v.radial.weights[i] * r * r;
        for (std::size_t j = 0; j < v.sphere.size(); ++j) {
            v.points.push_back(r * v.sphere.points[j]);
            v.weights.push_back(wr * v.sphere.weights[j]);
        }
    }
    return v;
}

/// Integral of f over the ball with a volume rule.
template <class F>
double integrate(const VolumeRule& rule, F&& f)
{
    double sum = 0.0;
    for (std::size_t i = 0; i < rule.size(); ++i)
        sum += rule.weights[i] * f(rule.points[i]);
    return sum;
}

} // namespace bbe
