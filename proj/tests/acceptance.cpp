// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include "bbe/bbe.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>

using namespace bbe;

namespace {

// Pinned tolerances.
constexpr double tol_conservation = 1e-12;
constexpr double tol_rule = 1e-6;
constexpr int min_consistent_seeds = 99;
constexpr double kernel_vanish_ratio = 1e-3;
constexpr double key_relation_rel = 0.01;
constexpr double nrho_slope_tol = 0.05;
constexpr double nrho_fd_tol = 1e-10;
constexpr double delta_slope_slack = 0.15;
constexpr double tol_norm_identity = 1e-6;
constexpr double tol_harmonic_ratio = 1e-4;
constexpr double tol_projection = 1e-8;
constexpr double oracle_rel = 0.02;
constexpr double k_sigma = 3.0;

const KernelParams hard(-1.0, 0.5);
const std::uint64_t calibration_seed = 20240607;
const std::uint64_t fresh_seeds[] = {1, 2, 3};

int failures = 0;

void report(int id, bool ok, const std::string& what, const std::string& detail, double seconds)
{
    std::printf("%s criterion %2d: %s [%s] (%.1f s)\n", ok ? "PASS" : "FAIL", id, what.c_str(), detail.c_str(),
                seconds);
    std::fflush(stdout);
    if (!ok)
        ++failures;
}

template <class F>
void run(int id, const std::string& what, F body)
{
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = false;
    std::string detail;
    try {
        ok = body(detail);
    } catch (const std::exception& e) {
        detail = std::string("exception: ") + e.what();
        ok = false;
    }
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report(id, ok, what, detail, dt);
}

std::string g6(double x)
{
    char b[32];
    std::snprintf(b, sizeof b, "%.6g", x);
    return b;
}

Vec3 random_unit(std::mt19937_64& rng)
{
    std::normal_distribution<double> g;
    Vec3 s{g(rng), g(rng), g(rng)};
    return (1.0 / norm(s)) * s;
}

QuadConfig quad(std::uint64_t seed = calibration_seed, std::size_t n = 1'000'000)
{
    QuadConfig q;
    q.seed = seed;
    q.mc_samples = n;
    return q;
}

SweepConfig sweep_config(std::uint64_t seed, std::size_t n = 1'000'000, unsigned threads = 0)
{
    SweepConfig c;
    c.quad = quad(seed, n);
    c.quad.threads = threads;
    return c;
}

std::string csv(const std::vector<SweepRow>& rows)
{
    std::ostringstream os;
    write_sweep_csv(os, rows);
    return os.str();
}

} // namespace

int main()
{
    run(1, "collision invariants on 1e5 configurations", [](std::string& d) {
        std::mt19937_64 rng(1);
        std::normal_distribution<double> g(0.0, 3.0);
        double worst_p = 0, worst_e = 0, worst_m = 0;
        for (int i = 0; i < 100000; ++i) {
            const Vec3 v{g(rng), g(rng), g(rng)}, vs{g(rng), g(rng), g(rng)};
            const auto c = make_collision(v, vs, random_unit(rng));
            const double e0 = norm2(v) + norm2(vs);
            worst_p = std::max(worst_p, norm(c.v_prime + c.v_prime_star - v - vs) / (norm(v) + norm(vs)));
            worst_e = std::max(worst_e, std::abs(norm2(c.v_prime) + norm2(c.v_prime_star) - e0) / e0);
            const double mm = std::exp(-0.5 * e0);
            const double mp = std::exp(-0.5 * (norm2(c.v_prime) + norm2(c.v_prime_star)));
            if (mm > 0.0)
                worst_m = std::max(worst_m, std::abs(mm - mp) / mm / std::max(1.0, e0));
        }
        d = "momentum " + g6(worst_p) + ", energy " + g6(worst_e) + ", mu mu* " + g6(worst_m);
        return worst_p <= tol_conservation && worst_e <= tol_conservation && worst_m <= tol_conservation;
    });

    run(2, "kernel sandwich 1 <= B_phi / B <= 4 on 1e4 samples", [](std::string& d) {
        std::mt19937_64 rng(2);
        std::uniform_real_distribution<double> ut(1e-6, pi / 2), ug(-2.99, 0.0), us(0.01, 0.99), ur(0.01, 10.0);
        double lo = INFINITY, hi = 0;
        for (int i = 0; i < 10000; ++i) {
            const KernelParams p(ug(rng), us(rng));
            const double th = ut(rng), r = ur(rng);
            const double q = kernel_b_phi(r, th, p) / kernel_b(r, th, p);
            lo = std::min(lo, q);
            hi = std::max(hi, q);
        }
        d = "ratio in [" + g6(lo) + ", " + g6(hi) + "]";
        return lo >= 1.0 && hi <= 4.0;
    });

    run(3, "closed-form quadrature", [](std::string& d) {
        // With mu = exp(-|v|^2/2) the L2 norm of mu^{1/2} is (2 pi)^{3/4}.
        const double l2 = norm_L2_l(sqrt_mu_field(), 0.0);
        const double want_l2 = std::pow(2 * pi, 0.75);
        const VolumeRule r = volume_rule({});
        const double m = integrate(r, [](const Vec3& v) { return std::exp(-0.5 * norm2(v)); });
        const double gauss3 = std::pow(2 * pi, 1.5);
        const double e1 = std::abs(l2 / want_l2 - 1), e2 = std::abs(m / gauss3 - 1);

        SamplerSpec wide;
        wide.theta = ThetaLaw::UniformSphere;
        wide.scale = 1.25;
        const double exact = gauss3 * gauss3 * 4 * pi;
        int ok = 0;
        for (std::uint64_t seed = 1; seed <= 100; ++seed) {
            QuadConfig q = quad(seed, 4096);
            q.threads = 1;
            ok += mc_integrate([](const CollisionConfig& c) { return std::exp(-0.5 * (norm2(c.v) + norm2(c.v_star))); },
                               wide, q)
                      .consistent_with(exact, k_sigma)
                      ? 1
                      : 0;
        }
        d = "|mu^1/2| rel " + g6(e1) + ", int mu rel " + g6(e2) + ", MC " + std::to_string(ok) + "/100 seeds";
        return e1 <= tol_rule && e2 <= tol_rule && ok >= min_consistent_seeds;
    });

    run(4, "kernel vanishing at rho = 0.5", [](std::string& d) {
        const Fugacity rho(0.5);
        const KernelBasis b = build_basis(rho);
        const double ref = dirichlet_quantum(family_member("F1", b).f, rho, hard, quad()).value;
        bool ok = ref > 0.0;
        double worst = 0;
        for (int i = 0; i < 5; ++i) {
            const Estimate e = dirichlet_quantum(b.e[i], rho, hard, quad());
            ok = ok && e.consistent_with(0.0, k_sigma) && std::abs(e.value) <= kernel_vanish_ratio * ref;
            worst = std::max(worst, std::abs(e.value));
        }
        d = "max |D(e_i)| " + g6(worst) + ", D(F1) " + g6(ref);
        return ok;
    });

    run(5, "polarized self-adjointness on 10 pairs", [](std::string& d) {
        const Fugacity rho(0.5);
        const KernelBasis b = build_basis(rho);
        const auto fam = test_family(b);
        int ok = 0, n = 0;
        double worst = 0;
        for (std::size_t i = 0; i < fam.size(); ++i)
            for (std::size_t j = i + 1; j < fam.size(); ++j) {
                const auto r = polarized_pairing(fam[i].f, fam[j].f, rho, hard, quad());
                ++n;
                ok += r.difference.consistent_with(0.0, k_sigma) ? 1 : 0;
                if (r.difference.std_error > 0)
                    worst = std::max(worst, std::abs(r.difference.value) / r.difference.std_error);
            }
        d = std::to_string(ok) + "/" + std::to_string(n) + " pairs, worst |diff|/stderr " + g6(worst);
        return n == 10 && ok == n;
    });

    // The calibration sweep feeds criteria 6, 7 and 12.
    NormTable norms;
    std::vector<SweepRow> calibration;
    {
        const auto t0 = std::chrono::steady_clock::now();
        try {
            calibration = rho_sweep(hard, sweep_config(calibration_seed), &norms);
        } catch (const std::exception& e) {
            std::printf("calibration sweep failed: %s\n", e.what());
        }
        std::printf("calibration sweep: %zu rows, seed %llu (%.1f s)\n", calibration.size(),
                    static_cast<unsigned long long>(calibration_seed),
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }

    run(6, "form sandwich over family x rho grid", [&](std::string& d) {
        int ok = 0;
        for (const auto& r : calibration)
            ok += (r.lower_gap.value >= -k_sigma * r.lower_gap.std_error &&
                   r.upper_gap.value >= -k_sigma * r.upper_gap.std_error)
                      ? 1
                      : 0;
        d = std::to_string(ok) + "/" + std::to_string(calibration.size()) + " rows";
        return !calibration.empty() && ok == static_cast<int>(calibration.size());
    });

    run(7, "key relation J(f) = H_c(Phi_f) at rho in {0.1, 0.5, 0.9}", [&](std::string& d) {
        int ok = 0, n = 0;
        double worst = 0;
        for (const auto& r : calibration) {
            if (r.rho != 0.1 && r.rho != 0.5 && r.rho != 0.9)
                continue;
            ++n;
            const double gap = std::abs(r.j_minus_hc.value);
            worst = std::max(worst, gap / r.j_value.value);
            ok += gap <= std::max(key_relation_rel * r.j_value.value, k_sigma * r.j_minus_hc.std_error) ? 1 : 0;
        }
        d = std::to_string(ok) + "/" + std::to_string(n) + " rows, worst relative gap " + g6(worst);
        return n == 15 && ok == n;
    });

    run(8, "N_rho norm exponents and gradient formula", [](std::string& d) {
        bool ok = true;
        for (double a : {0.25, 0.5, 1.0}) {
            const NrhoAsymptotics q = nrho_asymptotics(a);
            const bool la = std::abs(q.l2_fit.slope + 0.25) <= nrho_slope_tol;
            const bool ga = std::abs(q.grad_fit.slope + 0.75) <= nrho_slope_tol;
            ok = ok && la && ga;
            d += "a=" + g6(a) + ": L2 " + g6(q.l2_fit.slope) + (la ? "" : "!") + ", grad " + g6(q.grad_fit.slope) +
                 (ga ? "" : "!") + "; ";
        }
        std::mt19937_64 rng(8);
        std::normal_distribution<double> g(0.0, 1.5);
        std::uniform_real_distribution<double> ua(0.25, 1.0), ur(0.0, 0.95);
        double worst = 0;
        for (int i = 0; i < 100; ++i) {
            const Vec3 v{g(rng), g(rng), g(rng)};
            const double a = ua(rng), rho = ur(rng);
            worst = std::max(worst, norm(nrho_scaled_gradient(v, a, rho) - nrho_scaled_gradient_fd(v, a, rho)));
        }
        d += "FD max " + g6(worst);
        return ok && worst <= nrho_fd_tol;
    });

    run(9, "delta scaling of both lemmas", [](std::string& d) {
        const Vec3 fixed{1.2, -0.8, 0.5};
        bool ok = true;
        double worst = INFINITY;
        for (auto [alpha, beta] : {std::pair{-1.0, -0.5}, std::pair{-1.5, -0.25}})
            for (double s : {0.25, 0.5, 0.75})
                for (LemmaKind k : {LemmaKind::X, LemmaKind::Phi}) {
                    const DeltaScaling r = delta_scaling(k, fixed, alpha, beta, s, default_delta_grid(), quad(9, 100000));
                    const double margin = r.fit.slope - (2 * s - delta_slope_slack);
                    worst = std::min(worst, margin);
                    ok = ok && margin >= 0.0;
                }
        d = "12 fits, smallest slope margin " + g6(worst);
        return ok;
    });

    run(10, "norm identities", [](std::string& d) {
        const AnalyticField radial = mu_field() * (AnalyticField::constant(2.0) - AnalyticField::speed_squared());
        double e_an = 0;
        for (double n : {0.5, 1.0, 2.0})
            e_an = std::max(e_an, std::abs(norm_An_l(radial, n, -0.5) / norm_L2_l(radial, -0.5) - 1));

        const AnalyticField h = sqrt_mu_field();
        const GriddedField gh = sample_field(h);
        const double e_h0 = std::abs(norm_Hs_l(gh, 0.0, 0.0) / norm_L2_l(h, 0.0) - 1);

        const KernelBasis b = build_basis(Fugacity(0.5));
        const AnalyticField y2 = family_member("F4", b).f;
        double e_y = 0;
        for (double n : {0.5, 1.0, 1.5})
            e_y = std::max(e_y, std::abs(norm_An_l(y2, n, 0.0) / norm_L2_l(y2, 0.0) / std::pow(7.0, n / 2) - 1));

        bool ls = true;
        for (const auto& m : test_family(b))
            ls = ls && norm_Ls_l(m.f, hard, 0.5 * hard.gamma()).value() >=
                           norm_L2_l(m.f, 0.5 * hard.gamma() + hard.s());
        d = "A^n radial " + g6(e_an) + ", H^0 " + g6(e_h0) + ", Y2 ratio " + g6(e_y) + ", Ls >= L2 " +
            (ls ? "yes" : "no");
        return e_an <= tol_norm_identity && e_h0 <= tol_norm_identity && e_y <= tol_harmonic_ratio && ls;
    });

    run(11, "projection algebra", [](std::string& d) {
        double gram = 0, idem = 0, adj = 0;
        for (double rho : {0.0, 0.25, 0.5, 0.9, 0.99}) {
            const KernelBasis b = build_basis(Fugacity(rho));
            gram = std::max(gram, gram_deviation(b));
            const AnalyticField f = (rho == 0.0 ? sqrt_mu_field() : n_rho_field(rho)) *
                                    (AnalyticField::monomial(1.0, 2, 1, 0) + AnalyticField::constant(1.0));
            const AnalyticField g = sqrt_mu_field() * AnalyticField::speed_squared() * AnalyticField::speed_squared();
            const Projection pf = project(f, b), pg = project(g, b);
            idem = std::max(idem, b.norm(project(pf.projected, b).projected - pf.projected));
            adj = std::max(adj, std::abs(b.inner(pf.projected, g) - b.inner(f, pg.projected)));
        }
        // rho = 0 basis against mu^{1/2} {1, v, (|v|^2 - 3) / sqrt 6} / (2 pi)^{3/4}.
        const KernelBasis c = build_basis(Fugacity(0.0));
        const double m0 = std::pow(2 * pi, 0.75);
        std::mt19937_64 rng(11);
        std::normal_distribution<double> g(0.0, 2.0);
        double cls = 0;
        for (int i = 0; i < 1000; ++i) {
            const Vec3 v{g(rng), g(rng), g(rng)};
            const double h = std::exp(-0.25 * norm2(v)) / m0;
            const double want[5] = {h, v.x * h, v.y * h, v.z * h, (norm2(v) - 3) * h / std::sqrt(6.0)};
            for (int k = 0; k < 5; ++k)
                cls = std::max(cls, std::abs(c.e[k](v) - want[k]));
        }
        d = "Gram " + g6(gram) + ", idempotence " + g6(idem) + ", adjoint " + g6(adj) + ", classical " + g6(cls);
        return gram <= tol_projection && idem <= tol_projection && adj <= tol_projection && cls <= tol_projection;
    });

    run(12, "coercivity envelope (calibration + seeds 1, 2, 3)", [&](std::string& d) {
        const EnvelopeSummary cal = envelope_report(calibration, hard, frozen_envelope_hard);
        bool ok = cal.pass;
        d = "seed " + std::to_string(calibration_seed) + ": min " + g6(cal.min_normalized_lower) + " max_up " +
            g6(cal.max_ratio_upper) + (cal.pass ? "" : " FAIL");
        for (std::uint64_t seed : fresh_seeds) {
            const EnvelopeSummary s = envelope_report(rho_sweep(hard, sweep_config(seed), &norms), hard,
                                                      frozen_envelope_hard);
            ok = ok && s.pass;
            d += "; seed " + std::to_string(seed) + ": min " + g6(s.min_normalized_lower) + " max_up " +
                 g6(s.max_ratio_upper) + (s.pass ? "" : " FAIL");
        }
        d += "; frozen lambda " + g6(frozen_envelope_hard.lambda) + " C0 " + g6(frozen_envelope_hard.c0);
        for (const auto& [id, fit] : fitted_lower_exponents(calibration))
            d += "; " + id + " fitted exponent " + g6(fit.slope);
        return ok;
    });

    run(13, "Monte Carlo against tensor oracle, F1 at rho = 0.5", [](std::string& d) {
        const Fugacity rho(0.5);
        const KernelBasis b = build_basis(rho);
        const AnalyticField f = project(family_member("F1", b).f, b).residual;
        const Estimate mc = dirichlet_quantum(f, rho, hard, quad());
        const double o = dirichlet_oracle(f, rho, hard, quad());
        const double gap = std::abs(mc.value - o);
        d = "MC " + g6(mc.value) + " +- " + g6(mc.std_error) + ", oracle " + g6(o) + ", rel gap " + g6(gap / o);
        return gap <= std::max(oracle_rel * std::abs(o), k_sigma * mc.std_error);
    });

    run(14, "sweep CSV byte-identical across thread counts", [&](std::string& d) {
        const std::string a = csv(rho_sweep(hard, sweep_config(calibration_seed, 100000, 1), &norms));
        const std::string b = csv(rho_sweep(hard, sweep_config(calibration_seed, 100000, 3), &norms));
        d = std::to_string(a.size()) + " bytes, threads 1 vs 3 " + (a == b ? "equal" : "differ");
        return !a.empty() && a == b;
    });

    std::printf("%d criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
