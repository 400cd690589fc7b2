#pragma once

#include "bbe/collision.hpp"
#include "bbe/core.hpp"
#include "bbe/quad_rules.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <random>
#include <thread>
#include <type_traits>
#include <vector>

namespace bbe {

/// Monte Carlo result: value with standard error.
struct Estimate {
    double value = 0.0;
    double std_error = 0.0;
    std::size_t n_samples = 0;
    std::uint64_t seed = 0;

    /// |value - target| <= k * std_error
    bool consistent_with(double target, double k = 3.0) const { return std::abs(value - target) <= k * std_error; }
};

/// Joint estimate of K integrals from one sample stream. The covariance lets
/// linear combinations of correlated (common random number) estimates carry a
/// correct standard error.
template <std::size_t K>
struct MultiEstimate {
    std::array<double, K> mean{};
    std::array<std::array<double, K>, K> cov{}; // per-sample covariance
    std::size_t n_samples = 0;
    std::uint64_t seed = 0;

    Estimate component(std::size_t i) const
    {
        const double var = n_samples > 0 ? std::max(0.0, cov[i][i]) / static_cast<double>(n_samples) : 0.0;
        return {mean[i], std::sqrt(var), n_samples, seed};
    }

    Estimate linear(const std::array<double, K>& w) const
    {
        double value = 0.0, var = 0.0;
        for (std::size_t i = 0; i < K; ++i) {
            value += w[i] * mean[i];
            for (std::size_t j = 0; j < K; ++j)
                var += w[i] * w[j] * cov[i][j];
        }
        var = n_samples > 0 ? std::max(0.0, var) / static_cast<double>(n_samples) : 0.0;
        return {value, std::sqrt(var), n_samples, seed};
    }

    /// Estimate of I_i - c I_j.
    Estimate difference(std::size_t i, std::size_t j, double c = 1.0) const
    {
        std::array<double, K> w{};
        w[i] += 1.0;
        w[j] -= c;
        return linear(w);
    }
};

// ---------------------------------------------------------------------------
// Batch engine
// ---------------------------------------------------------------------------

inline constexpr std::size_t mc_batch_size = 4096;

inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Stream seed of one batch: depends only on (seed, batch index).
inline std::uint64_t batch_seed(std::uint64_t seed, std::uint64_t batch) { return splitmix64(seed + batch); }

namespace detail {

template <std::size_t K>
struct Moments {
    std::size_t n = 0;
    std::array<double, K> mean{};
    std::array<std::array<double, K>, K> m2{};
    bool finite = true;

    void push(const std::array<double, K>& x)
    {
        ++n;
        std::array<double, K> d{};
        for (std::size_t i = 0; i < K; ++i) {
            if (!std::isfinite(x[i]))
                finite = false;
            d[i] = x[i] - mean[i];
            mean[i] += d[i] / static_cast<double>(n);
        }
        for (std::size_t i = 0; i < K; ++i)
            for (std::size_t j = 0; j < K; ++j)
                m2[i][j] += d[i] * (x[j] - mean[j]);
    }

    void merge(const Moments& o)
    {
        if (o.n == 0)
            return;
        finite = finite && o.finite;
        if (n == 0) {
            *this = o;
            return;
        }
        const double na = static_cast<double>(n), nb = static_cast<double>(o.n);
        const double nt = na + nb;
        std::array<double, K> d{};
        for (std::size_t i = 0; i < K; ++i)
            d[i] = o.mean[i] - mean[i];
        for (std::size_t i = 0; i < K; ++i)
            for (std::size_t j = 0; j < K; ++j)
                m2[i][j] += o.m2[i][j] + d[i] * d[j] * na * nb / nt;
        for (std::size_t i = 0; i < K; ++i)
            mean[i] += d[i] * nb / nt;
        n += o.n;
    }
};

inline unsigned resolve_threads(unsigned requested, std::size_t jobs)
{
    unsigned t = requested ? requested : std::max(1u, std::thread::hardware_concurrency());
    return static_cast<unsigned>(std::min<std::size_t>(t, std::max<std::size_t>(jobs, 1)));
}

/// Runs job(i) for i in [0, jobs) on a small pool. Exceptions are rethrown.
template <class Job>
void parallel_for(std::size_t jobs, unsigned threads, Job&& job)
{
    const unsigned nt = resolve_threads(threads, jobs);
    if (nt <= 1) {
        for (std::size_t i = 0; i < jobs; ++i)
            job(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr err;
    std::mutex err_mu;
    std::vector<std::thread> pool;
    pool.reserve(nt);
    for (unsigned t = 0; t < nt; ++t) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= jobs)
                    return;
                try {
                    job(i);
                } catch (...) {
                    std::lock_guard lock(err_mu);
                    if (!err)
                        err = std::current_exception();
                    next = jobs;
                    return;
                }
            }
        });
    }
    for (auto& th : pool)
        th.join();
    if (err)
        std::rethrow_exception(err);
}

} // namespace detail

/// Draws `n` samples of an R^K-valued random variable in fixed-size batches.
/// `draw(rng)` must return std::array<double, K>. Batch b uses an mt19937_64
/// seeded by batch_seed(seed, b); batch moments are merged in index order, so the
/// result does not depend on the thread count.
template <std::size_t K, class Draw>
MultiEstimate<K> run_batches(std::size_t n, std::uint64_t seed, unsigned threads, Draw&& draw)
{
    const std::size_t n_batches = (n + mc_batch_size - 1) / mc_batch_size;
    std::vector<detail::Moments<K>> parts(n_batches);
    detail::parallel_for(n_batches, threads, [&](std::size_t b) {
        std::mt19937_64 rng(batch_seed(seed, b));
        const std::size_t count = std::min(mc_batch_size, n - b * mc_batch_size);
        detail::Moments<K>& m = parts[b];
        for (std::size_t i = 0; i < count; ++i)
            m.push(draw(rng));
    });
    detail::Moments<K> total;
    for (const auto& p : parts)
        total.merge(p);
    if (!total.finite)
        throw NonFiniteError("Monte Carlo sample evaluated to a non-finite value");
    MultiEstimate<K> out;
    out.mean = total.mean;
    out.n_samples = total.n;
    out.seed = seed;
    if (total.n > 1)
        for (std::size_t i = 0; i < K; ++i)
            for (std::size_t j = 0; j < K; ++j)
                out.cov[i][j] = total.m2[i][j] / static_cast<double>(total.n - 1);
    return out;
}

// ---------------------------------------------------------------------------
// Sampling laws
// ---------------------------------------------------------------------------

enum class RelativeLaw { Gaussian, RelativeRadial };
enum class ThetaLaw { GradedSine, UniformSphere };

/// Sampling law over (v, v*, sigma), written in center-of-mass coordinates
/// V = (v + v*)/2 and u = v - v* (unit Jacobian).
///   V ~ N(0, scale^2 I / 2); u ~ N(0, 2 scale^2 I) or, for RelativeRadial,
///   |u| with density ~ r^{gamma+2} exp(-r^2 / (4 scale^2)) and uniform direction.
/// With scale = 1 the Gaussian part is exactly mu(v) mu(v*) up to normalization.
struct SamplerSpec {
    double scale = 1.0;
    RelativeLaw relative = RelativeLaw::Gaussian;
    double gamma = 0.0; // radial exponent parameter for RelativeRadial
    ThetaLaw theta = ThetaLaw::GradedSine;
    double s = 0.5;
    bool antithetic = true; // pair phi with phi + pi

    static SamplerSpec for_kernel(const KernelParams& p)
    {
        SamplerSpec sp;
        sp.gamma = p.gamma();
        sp.s = p.s();
        sp.relative = p.gamma() <= -1.5 ? RelativeLaw::RelativeRadial : RelativeLaw::Gaussian;
        return sp;
    }
};

inline constexpr double sin_quarter_pi = 0.70710678118654752440; // sin(pi/4) = t_max

struct ThetaDraw {
    double theta;
    double t;      // sin(theta/2)
    double weight; // 1 / density of sigma's polar part w.r.t. dsigma / (2 pi)
};

/// Graded polar draw for the sin^{-2-2s}(theta/2) singularity: t = sin(theta/2)
/// on (0, sqrt(2)/2] with density (2 - 2s) t^{1-2s} / t_max^{2-2s}, by inverse CDF.
/// `u` in (0, 1] is clamped so that theta >= theta_floor. The weight converts to
/// dsigma = 4 t dt dphi (phi handled by the caller).
inline ThetaDraw sample_theta_graded(double s, double u, double theta_floor = 1e-8)
{
    const double e = 2.0 - 2.0 * s;
    const double t_floor = std::sin(0.5 * theta_floor);
    const double u_floor = std::pow(t_floor / sin_quarter_pi, e);
    u = std::clamp(u, u_floor, 1.0);
    const double t = u >= 1.0 ? sin_quarter_pi : sin_quarter_pi * std::pow(u, 1.0 / e);
    const double theta = u >= 1.0 ? 0.5 * pi : 2.0 * std::asin(t);
    const double density = e * std::pow(t, 1.0 - 2.0 * s) / std::pow(sin_quarter_pi, e);
    return {theta, t, 4.0 * t / density};
}

/// Analytic CDF of the graded law in theta.
inline double graded_theta_cdf(double s, double theta)
{
    if (theta <= 0.0)
        return 0.0;
    if (theta >= 0.5 * pi)
        return 1.0;
    return std::pow(std::sin(0.5 * theta) / sin_quarter_pi, 2.0 - 2.0 * s);
}

/// sigma = cos(theta) k + sin(theta) (cos(phi) e1 + sin(phi) e2)
inline Vec3 sigma_from_angles(const Vec3& k, const Vec3& e1, const Vec3& e2, double theta, double phi)
{
    const double st = std::sin(theta);
    return std::cos(theta) * k + st * (std::cos(phi) * e1 + std::sin(phi) * e2);
}

namespace detail {

inline double uniform_open0(std::mt19937_64& rng)
{
    // (0, 1]
    return 1.0 - std::generate_canonical<double, 53>(rng);
}

inline double uniform01(std::mt19937_64& rng) { return std::generate_canonical<double, 53>(rng); }

inline Vec3 gaussian_vec(std::mt19937_64& rng, std::normal_distribution<double>& nd)
{
    const double x = nd(rng), y = nd(rng), z = nd(rng);
    return {x, y, z};
}

inline Vec3 uniform_direction(std::mt19937_64& rng)
{
    const double c = 2.0 * uniform01(rng) - 1.0;
    const double ph = 2.0 * pi * uniform01(rng);
    const double sn = std::sqrt(std::max(0.0, 1.0 - c * c));
    return {sn * std::cos(ph), sn * std::sin(ph), c};
}

} // namespace detail

/// Per-batch sampler state: draws collision configurations with importance weights.
class CollisionSampler {
public:
    CollisionSampler(const SamplerSpec& spec, double theta_floor)
        : spec_(spec)
        , theta_floor_(theta_floor)
    {
        if (!(spec.scale > 0.0))
            throw RangeError("sampler scale must be positive");
        if (!(spec.s > 0.0 && spec.s < 1.0))
            throw RangeError("sampler s must lie in (0, 1)");
        const double sc = spec.scale;
        log_norm_v_ = -1.5 * std::log(pi * sc * sc);
        if (spec.relative == RelativeLaw::RelativeRadial) {
            if (!(spec.gamma > -3.0))
                throw RangeError("RelativeRadial law needs gamma > -3");
            shape_ = 0.5 * (spec.gamma + 3.0);
            // Z = scale^{gamma+3} 2^{gamma+2} Gamma((gamma+3)/2)
            log_norm_u_ = -(std::log(4.0 * pi) + (spec.gamma + 3.0) * std::log(sc) + (spec.gamma + 2.0) * std::log(2.0) +
                            std::lgamma(shape_));
        } else {
            log_norm_u_ = -1.5 * std::log(4.0 * pi * sc * sc);
        }
    }

    /// Calls visit(config, weight) once, or twice with half weights when antithetic.
    /// The weights make sum(weight * F) an unbiased estimate of the integral of F
    /// over dv dv* dsigma.
    template <class Visit>
    void draw(std::mt19937_64& rng, Visit&& visit) const
    {
        const double sc = spec_.scale;
        std::normal_distribution<double> normal(0.0, 1.0);
        const Vec3 V = (sc * std::sqrt(0.5)) * detail::gaussian_vec(rng, normal);
        Vec3 u;
        double log_pdf_u;
        if (spec_.relative == RelativeLaw::RelativeRadial) {
            std::gamma_distribution<double> gd(shape_, 1.0);
            const double r = 2.0 * sc * std::sqrt(gd(rng));
            u = r * detail::uniform_direction(rng);
            log_pdf_u = log_norm_u_ + spec_.gamma * std::log(r) - r * r / (4.0 * sc * sc);
        } else {
            u = (sc * std::sqrt(2.0)) * detail::gaussian_vec(rng, normal);
            log_pdf_u = log_norm_u_ - norm2(u) / (4.0 * sc * sc);
        }
        const double r = norm(u);
        if (!(r > 0.0) || !std::isfinite(log_pdf_u)) {
            // measure-zero event; contributes nothing
            return;
        }
        const double log_pdf_v = log_norm_v_ - norm2(V) / (sc * sc);
        double w = std::exp(-(log_pdf_v + log_pdf_u));

        const Vec3 k = (1.0 / r) * u;
        Vec3 e1, e2;
        orthonormal_frame(k, e1, e2);
        const Vec3 v = V + 0.5 * u;
        const Vec3 vs = V - 0.5 * u;

        double theta, t;
        if (spec_.theta == ThetaLaw::GradedSine) {
            const ThetaDraw td = sample_theta_graded(spec_.s, detail::uniform_open0(rng), theta_floor_);
            theta = td.theta;
            t = td.t;
            w *= 2.0 * pi * td.weight;
        } else {
            const double c = 2.0 * detail::uniform01(rng) - 1.0;
            theta = std::acos(c);
            t = std::sqrt(std::max(0.0, 0.5 * (1.0 - c)));
            w *= 4.0 * pi;
        }
        const double phi = 2.0 * pi * detail::uniform01(rng);
        if (spec_.antithetic) {
            visit(make_collision_unchecked(v, vs, sigma_from_angles(k, e1, e2, theta, phi), r, theta, t), 0.5 * w);
            visit(make_collision_unchecked(v, vs, sigma_from_angles(k, e1, e2, theta, phi + pi), r, theta, t), 0.5 * w);
        } else {
            visit(make_collision_unchecked(v, vs, sigma_from_angles(k, e1, e2, theta, phi), r, theta, t), w);
        }
    }

private:
    SamplerSpec spec_;
    double theta_floor_;
    double shape_ = 0.0;
    double log_norm_v_ = 0.0;
    double log_norm_u_ = 0.0;
};

/// Monte Carlo integral over (v, v*, sigma) of an R^K-valued integrand
/// `f(const CollisionConfig&) -> std::array<double, K>`.
template <std::size_t K, class F>
MultiEstimate<K> mc_integrate_multi(F&& f, const SamplerSpec& spec, const QuadConfig& cfg)
{
    cfg.validate();
    const CollisionSampler sampler(spec, cfg.theta_floor);
    return run_batches<K>(cfg.mc_samples, cfg.seed, cfg.threads, [&](std::mt19937_64& rng) {
        std::array<double, K> acc{};
        sampler.draw(rng, [&](const CollisionConfig& c, double w) {
            const std::array<double, K> val = f(c);
            for (std::size_t i = 0; i < K; ++i)
                acc[i] += w * val[i];
        });
        return acc;
    });
}

/// Scalar version of mc_integrate_multi.
template <class F>
Estimate mc_integrate(F&& f, const SamplerSpec& spec, const QuadConfig& cfg)
{
    return mc_integrate_multi<1>([&](const CollisionConfig& c) { return std::array<double, 1>{f(c)}; }, spec, cfg)
        .component(0);
}

// ---------------------------------------------------------------------------
// Deterministic tensor-product oracle
// ---------------------------------------------------------------------------

inline constexpr std::size_t oracle_budget = 100'000'000;

/// Polar rule for sigma about v - v*: geometric panels in t = sin(theta/2) on
/// (0, sqrt(2)/2] with ratio 1/4, weights for dsigma = 4 t dt dphi (phi excluded).
inline Rule1D theta_panel_rule(int panels, int points_per_panel)
{
    Rule1D r = geometric_panels(sin_quarter_pi, panels, 0.25, points_per_panel);
    for (std::size_t i = 0; i < r.size(); ++i)
        r.weights[i] *= 4.0 * r.nodes[i];
    return r;
}

/// Deterministic integral over (v, v*, sigma) on a tensor grid:
///  - V = (v + v*)/2 by Gauss-Hermite per axis (the integrand is divided by exp(-|V|^2));
///  - u = v - v* in spherical coordinates: |u| = R y^{1/(3+gamma)} with Gauss-Legendre in y,
///    which absorbs |u|^{gamma+2} dr, Gauss-Legendre in the polar cosine, uniform azimuth;
///  - sigma by geometric panels in sin(theta/2) and uniform azimuth about u.
/// The integrand must vanish outside theta <= pi/2 (kernel support).
template <class F>
double tensor_oracle_integrate(F&& f, const KernelParams& params, const OracleGrid& grid, double R,
                               unsigned threads = 0)
{
    if (grid.total() > oracle_budget)
        throw BudgetError("tensor oracle grid needs " + std::to_string(grid.total()) + " evaluations (cap " +
                          std::to_string(oracle_budget) + ")");
    const Rule1D gh = gauss_hermite(grid.center);
    const double ex = 1.0 / (3.0 + params.gamma());
    const Rule1D gy = gauss_legendre(grid.radial, 0.0, 1.0);
    const SphereRule dir = sphere_rule(grid.polar, grid.azimuth);
    const Rule1D tr = theta_panel_rule(grid.theta_panels, grid.theta_points);
    const double dphi = 2.0 * pi / grid.phi;

    // radius nodes and weights for r^2 dr: r = R y^ex, r^2 dr = R^3 ex y^{3 ex - 1} dy
    std::vector<double> rad(gy.size()), radw(gy.size());
    for (std::size_t i = 0; i < gy.size(); ++i) {
        rad[i] = R * std::pow(gy.nodes[i], ex);
        radw[i] = gy.weights[i] * R * R * R * ex * std::pow(gy.nodes[i], 3.0 * ex - 1.0);
    }

    const std::size_t nc = gh.size();
    const std::size_t jobs = nc * nc * nc;
    std::vector<double> partial(jobs, 0.0);
    detail::parallel_for(jobs, threads, [&](std::size_t job) {
        const std::size_t i = job / (nc * nc), j = (job / nc) % nc, l = job % nc;
        const Vec3 V{gh.nodes[i], gh.nodes[j], gh.nodes[l]};
        const double wv = gh.weights[i] * gh.weights[j] * gh.weights[l] * std::exp(norm2(V));
        double sum = 0.0;
        for (std::size_t a = 0; a < rad.size(); ++a) {
            const double r = rad[a];
            for (std::size_t b = 0; b < dir.size(); ++b) {
                const Vec3 k = dir.points[b];
                Vec3 e1, e2;
                orthonormal_frame(k, e1, e2);
                const Vec3 u = r * k;
                const Vec3 v = V + 0.5 * u;
                const Vec3 vs = V - 0.5 * u;
                double inner = 0.0;
                for (std::size_t c = 0; c < tr.size(); ++c) {
                    const double t = tr.nodes[c];
                    const double theta = 2.0 * std::asin(t);
                    double ring = 0.0;
                    for (int p = 0; p < grid.phi; ++p) {
                        const double phi = (p + 0.5) * dphi;
                        ring += f(make_collision_unchecked(v, vs, sigma_from_angles(k, e1, e2, theta, phi), r, theta, t));
                    }
                    inner += tr.weights[c] * dphi * ring;
                }
                sum += radw[a] * dir.weights[b] * inner;
            }
        }
        partial[job] = wv * sum;
    });
    double total = 0.0;
    for (double p : partial)
        total += p;
    if (!std::isfinite(total))
        throw NonFiniteError("tensor oracle produced a non-finite value");
    return total;
}

} // namespace bbe
