#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace bbe {

// ---------------------------------------------------------------------------
// Error hierarchy. NumericalError subclasses map to CLI exit code 3.
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RangeError : Error {
    using Error::Error;
};
struct ClosureError : Error {
    using Error::Error;
};
struct DegenerateError : Error {
    using Error::Error;
};
struct OrthogonalityError : Error {
    using Error::Error;
};

struct NumericalError : Error {
    using Error::Error;
};
struct NonFiniteError : NumericalError {
    using NumericalError::NumericalError;
};
struct BudgetError : NumericalError {
    using NumericalError::NumericalError;
};
struct ResolutionError : NumericalError {
    using NumericalError::NumericalError;
};
struct TruncationError : NumericalError {
    using NumericalError::NumericalError;
};
struct SingularGramError : NumericalError {
    using NumericalError::NumericalError;
};

inline constexpr double pi = 3.14159265358979323846;

// ---------------------------------------------------------------------------
// Velocities
// ---------------------------------------------------------------------------

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    constexpr double operator[](std::size_t i) const { return i == 0 ? x : (i == 1 ? y : z); }

    constexpr Vec3& operator+=(const Vec3& o)
    {
        x += o.x;
        y += o.y;
        z += o.z;
        return *this;
    }
    constexpr Vec3& operator-=(const Vec3& o)
    {
        x -= o.x;
        y -= o.y;
        z -= o.z;
        return *this;
    }
    constexpr Vec3& operator*=(double c)
    {
        x *= c;
        y *= c;
        z *= c;
        return *this;
    }

    friend constexpr Vec3 operator+(Vec3 a, const Vec3& b) { return a += b; }
    friend constexpr Vec3 operator-(Vec3 a, const Vec3& b) { return a -= b; }
    friend constexpr Vec3 operator-(const Vec3& a) { return {-a.x, -a.y, -a.z}; }
    friend constexpr Vec3 operator*(double c, Vec3 a) { return a *= c; }
    friend constexpr Vec3 operator*(Vec3 a, double c) { return a *= c; }
    friend constexpr bool operator==(const Vec3&, const Vec3&) = default;
};

using Velocity = Vec3;

constexpr double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
constexpr double norm2(const Vec3& a) { return dot(a, a); }
inline double norm(const Vec3& a) { return std::sqrt(norm2(a)); }
constexpr Vec3 cross(const Vec3& a, const Vec3& b)
{
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline bool is_finite(const Vec3& a) { return std::isfinite(a.x) && std::isfinite(a.y) && std::isfinite(a.z); }

/// Completes a unit vector to a right-handed orthonormal frame (e1, e2, k).
inline void orthonormal_frame(const Vec3& k, Vec3& e1, Vec3& e2)
{
    // Pick the axis least aligned with k to avoid cancellation.
    Vec3 a = std::abs(k.x) < 0.6 ? Vec3{1, 0, 0} : (std::abs(k.y) < 0.6 ? Vec3{0, 1, 0} : Vec3{0, 0, 1});
    e1 = a - dot(a, k) * k;
    e1 *= 1.0 / norm(e1);
    e2 = cross(k, e1);
}

// ---------------------------------------------------------------------------
// Kernel parameters (gamma, s)
// ---------------------------------------------------------------------------

class KernelParams {
public:
    /// Throws RangeError unless -3 < gamma <= 0 and 0 < s < 1.
    KernelParams(double gamma, double s)
        : gamma_(gamma)
        , s_(s)
    {
        if (!std::isfinite(gamma) || !(gamma > -3.0))
            throw RangeError("kernel parameter gamma must satisfy -3 < gamma (got " + std::to_string(gamma) + ")");
        if (!(gamma <= 0.0))
            throw RangeError("kernel parameter gamma must satisfy gamma <= 0 (got " + std::to_string(gamma) + ")");
        if (!std::isfinite(s) || !(s > 0.0))
            throw RangeError("kernel parameter s must satisfy 0 < s (got " + std::to_string(s) + ")");
        if (!(s < 1.0))
            throw RangeError("kernel parameter s must satisfy s < 1 (got " + std::to_string(s) + ")");
    }

    double gamma() const { return gamma_; }
    double s() const { return s_; }

private:
    double gamma_;
    double s_;
};

inline KernelParams validate_kernel_params(double gamma, double s) { return KernelParams(gamma, s); }

enum class PotentialKind { Hard, Soft };

struct PotentialClass {
    PotentialKind kind;
    int induction_depth; // -1 for hard potentials
};

inline PotentialClass classify_potential(const KernelParams& p)
{
    const double g2s = p.gamma() + 2.0 * p.s();
    if (g2s >= 0.0)
        return {PotentialKind::Hard, -1};
    // Guard against (2 - 1)/0.5 evaluating to 1.9999999.
    const double ratio = (-g2s) / p.s();
    return {PotentialKind::Soft, static_cast<int>(std::floor(ratio + 1e-12))};
}

/// Power of (1 - rho) in the coercivity lower bound: 13 * 2^N - 3.
inline double lower_bound_exponent(const PotentialClass& c)
{
    return 13.0 * std::ldexp(1.0, c.induction_depth) - 3.0;
}

inline const char* to_string(PotentialKind k) { return k == PotentialKind::Hard ? "hard" : "soft"; }

// ---------------------------------------------------------------------------
// Fugacity
// ---------------------------------------------------------------------------

class Fugacity {
public:
    /// 0 <= rho < 1; rho = 1 is the condensation threshold and is rejected.
    explicit Fugacity(double rho)
        : rho_(rho)
    {
        if (!std::isfinite(rho) || rho < 0.0 || rho >= 1.0)
            throw RangeError("fugacity must satisfy 0 <= rho < 1 (got " + std::to_string(rho) + ")");
    }

    double value() const { return rho_; }
    double one_minus() const { return 1.0 - rho_; }
    /// (1 - rho)^p
    double one_minus_pow(double p) const { return std::pow(1.0 - rho_, p); }

private:
    double rho_;
};

// ---------------------------------------------------------------------------
// Quadrature configuration
// ---------------------------------------------------------------------------

/// Point counts for the deterministic tensor-product oracle.
struct OracleGrid {
    int center = 6;       // Gauss-Hermite points per axis for (v + v*)/2
    int radial = 20;      // Gauss-Legendre points for |v - v*|
    int polar = 6;        // Gauss-Legendre points in cos of the polar angle of v - v*
    int azimuth = 12;     // uniform azimuth points of v - v*
    int theta_panels = 4; // geometric panels in sin(theta/2)
    int theta_points = 4; // Gauss-Legendre points per theta panel
    int phi = 8;          // uniform azimuth points of sigma about v - v*

    std::size_t total() const
    {
        return static_cast<std::size_t>(center) * center * center * radial * polar * azimuth *
               static_cast<std::size_t>(theta_panels + 1) * theta_points * phi;
    }
};

struct QuadConfig {
    std::size_t mc_samples = 1'000'000;
    std::uint64_t seed = 20240607;
    double truncation_radius = 12.0;
    double theta_floor = 1e-8;
    OracleGrid oracle_grid{};
    unsigned threads = 0; // 0: hardware concurrency

    void validate() const
    {
        if (mc_samples < 1000)
            throw RangeError("mc_samples must be >= 1000");
        if (!(truncation_radius >= 8.0))
            throw RangeError("truncation radius must be >= 8");
        if (!(theta_floor > 0.0 && theta_floor <= 1e-6))
            throw RangeError("theta floor must lie in (0, 1e-6]");
    }
};

} // namespace bbe
