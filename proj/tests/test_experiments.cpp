#include "bbe/bbe.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <sstream>

using namespace bbe;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

const KernelParams hard(-1.0, 0.5);

SweepConfig small_sweep(std::size_t threads)
{
    SweepConfig c;
    c.rho_grid = {0.0, 0.5};
    c.ids = {"F1", "F2"};
    c.quad.mc_samples = 4096;
    c.quad.seed = 99;
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

TEST_CASE("exponent fits", "[experiments]")
{
    const std::vector<double> xs{0.5, 1, 2, 4, 8};
    std::vector<double> sq, flat(xs.size(), 3.0);
    for (double x : xs)
        sq.push_back(x * x);
    const FitResult a = fit_exponent(xs, sq);
    CHECK_THAT(a.slope, WithinAbs(2.0, 1e-14));
    CHECK_THAT(a.r_squared, WithinAbs(1.0, 1e-14));
    CHECK(a.points == 5);
    CHECK_THAT(fit_exponent(xs, flat).slope, WithinAbs(0.0, 1e-14));

    CHECK_THROWS_AS(fit_exponent({1, 2, 3}, {1, 2, 3}), DegenerateError);
    CHECK_THROWS_AS(fit_exponent({1, 2, 3, 4}, {1, -2, 3, 4}), DegenerateError);
    CHECK_THROWS_AS(fit_exponent({1, 2, 3, 4}, {1, 2, 3}), DegenerateError);
    CHECK_THROWS_AS(fit_exponent({2, 2, 2, 2}, {1, 2, 3, 4}), DegenerateError);
}

TEST_CASE("fit r-squared stays in [0, 1]", "[experiments][property]")
{
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.01, 10.0);
    for (int k = 0; k < 1000; ++k) {
        std::vector<double> xs(6), ys(6);
        for (int i = 0; i < 6; ++i) {
            xs[i] = u(rng);
            ys[i] = u(rng);
        }
        const FitResult f = fit_exponent(xs, ys);
        REQUIRE(f.r_squared >= 0.0);
        REQUIRE(f.r_squared <= 1.0);
    }
}

TEST_CASE("test family is genuinely non-kernel", "[experiments]")
{
    for (double rho : default_rho_grid()) {
        const KernelBasis b = build_basis(Fugacity(rho));
        const auto fam = test_family(b);
        REQUIRE(fam.size() == 5);
        for (const auto& m : fam)
            CHECK(b.norm(project(m.f, b).residual) > 1e-3);
    }
    CHECK_THROWS_AS(family_member("F9", build_basis(Fugacity(0.5))), RangeError);
}

TEST_CASE("N_rho norms", "[experiments]")
{
    // mu^{-1/4} N_0 = mu^{1/4}, whose square integrates to (4 pi)^{3/2}.
    const NrhoPoint p0 = nrho_norms(0.25, 0.0);
    CHECK_THAT(p0.l2 * p0.l2, WithinRel(std::pow(4 * pi, 1.5), 1e-10));
    // |grad mu^{1/4}|^2 = |v|^2 mu^{1/2} / 16
    CHECK_THAT(p0.grad * p0.grad, WithinRel(3.0 * 2.0 * std::pow(4 * pi, 1.5) / 16.0, 1e-10));

    const NrhoAsymptotics q = nrho_asymptotics(0.25);
    CHECK_THAT(q.l2_fit.slope, WithinAbs(-0.25, 0.05));
    CHECK_THAT(q.grad_fit.slope, WithinAbs(-0.75, 0.05));
    CHECK(q.points.size() == 6);

    CHECK_THROWS_AS(nrho_asymptotics(0.2), RangeError);
    CHECK_THROWS_AS(nrho_asymptotics(1.5), RangeError);
}

TEST_CASE("N_rho gradient against finite differences", "[experiments][property]")
{
    std::mt19937_64 rng(21);
    std::normal_distribution<double> g(0.0, 1.5);
    std::uniform_real_distribution<double> ua(0.25, 1.0);
    for (double rho : {0.0, 0.5, 0.9}) {
        for (int i = 0; i < 100; ++i) {
            const Vec3 v{g(rng), g(rng), g(rng)};
            const double a = ua(rng);
            const Vec3 d = nrho_scaled_gradient(v, a, rho) - nrho_scaled_gradient_fd(v, a, rho, 2.5e-4);
            REQUIRE(norm(d) < 1e-10);
        }
    }
}

TEST_CASE("envelope exponents", "[experiments]")
{
    CHECK(lower_bound_exponent(classify_potential(hard)) == 3.5);
    CHECK(lower_bound_exponent(classify_potential(KernelParams(-2.0, 0.5))) == 49.0);
}

TEST_CASE("envelope report guards", "[experiments]")
{
    SweepRow empty;
    empty.f_id = "F1";
    empty.rho = 0.5;
    empty.norm_sq = 0.0;
    CHECK_THROWS_AS(envelope_report({empty}, hard, frozen_envelope_hard), DegenerateError);

    SweepRow good = empty;
    good.f_id = "F2";
    good.norm_sq = 1.0;
    good.dirichlet = Estimate{100.0, 1.0, 1000, 1};
    good.ratio_lower = 200.0;
    good.ratio_upper = 200.0 * std::pow(0.5, 4);
    const EnvelopeSummary s = envelope_report({empty, good}, hard, frozen_envelope_hard);
    CHECK(s.warnings.size() == 1);
    CHECK(s.rows.size() == 1);
    CHECK_THAT(s.min_normalized_lower, WithinRel(200.0 * std::pow(0.5, -3.5), 1e-14));
    CHECK(s.pass);
}

TEST_CASE("small sweep", "[experiments]")
{
    NormTable cache;
    const auto rows = rho_sweep(hard, small_sweep(1), &cache);
    REQUIRE(rows.size() == 4);
    CHECK(cache.size() == 4);
    for (const auto& r : rows) {
        CHECK(r.norm_sq > 0.0);
        if (r.rho == 0.0) {
            CHECK(r.dirichlet.value == 0.0);
            CHECK(r.ratio_lower == 0.0);
            CHECK(r.ratio_upper == 0.0);
            continue;
        }
        CHECK(r.lower_gap.value >= -3 * r.lower_gap.std_error);
        CHECK(r.upper_gap.value >= -3 * r.upper_gap.std_error);
        CHECK(r.dirichlet.value > 3 * r.dirichlet.std_error);
    }

    // Thread count and norm caching leave the output untouched.
    const auto again = rho_sweep(hard, small_sweep(3), &cache);
    CHECK(csv(rows) == csv(again));
    CHECK(csv(rows) == csv(rho_sweep(hard, small_sweep(2))));

    const std::string text = csv(rows);
    CHECK(text.rfind(std::string(sweep_csv_header()) + "\n", 0) == 0);
    CHECK(fmt17(0.1) == "0.10000000000000001");

    std::ostringstream svg;
    write_svg_plot(svg, sweep_plot_series(rows), "sweep", "rho", "ratio_lower");
    CHECK(svg.str().find("<svg") == 0);
    CHECK(svg.str().find("<polyline") != std::string::npos);
}

TEST_CASE("lemma scaling trivial limit and temperatures", "[experiments]")
{
    QuadConfig q;
    q.mc_samples = 5000;
    const DeltaScaling d = delta_scaling(LemmaKind::X, {0.5, 0.5, 0.5}, -1.0, -1e-10, 0.5, default_delta_grid(), q);
    CHECK(d.deltas.size() == 7);
    for (const auto& e : d.values)
        CHECK(e.value < 1e-12);

    CHECK_THROWS_AS(temperature_ratio(Fugacity(0.0)), DegenerateError);
    const TemperatureRatio t = temperature_ratio(Fugacity(0.5));
    CHECK(t.ratio > 1.0);
    CHECK_THAT(t.predicted, WithinRel(std::pow(0.5, -2.0 / 3.0), 1e-15));
}
