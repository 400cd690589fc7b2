#include "bbe/bbe.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

using namespace bbe;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

const KernelParams hard(-1.0, 0.5);

QuadConfig mc(std::size_t n = 100000, std::uint64_t seed = 20240607)
{
    QuadConfig q;
    q.mc_samples = n;
    q.seed = seed;
    return q;
}

AnalyticField f1(double rho)
{
    return n_rho_field(rho) * (AnalyticField::monomial(1.0, 2, 0, 0) - (1.0 / 3.0) * AnalyticField::speed_squared());
}

bool near_zero(const Estimate& e) { return e.consistent_with(0.0); }

} // namespace

TEST_CASE("Dirichlet form basics", "[forms]")
{
    const Estimate z = dirichlet_quantum(f1(0.5), Fugacity(0.0), hard, mc());
    CHECK(z.value == 0.0);
    CHECK(z.std_error == 0.0);

    CHECK(near_zero(dirichlet_quantum(n_rho_field(0.5), Fugacity(0.5), hard, mc())));
    CHECK(near_zero(j_functional(n_rho_field(0.5), Fugacity(0.5), hard, mc())));

    const Estimate d = dirichlet_quantum(f1(0.5), Fugacity(0.5), hard, mc());
    CHECK(d.value > 10 * d.std_error);
}

TEST_CASE("Dirichlet form against the tensor oracle", "[forms][oracle][slow]")
{
    const Fugacity rho(0.5);
    const Estimate d = dirichlet_quantum(f1(0.5), rho, hard, mc(1'000'000));
    const double o = dirichlet_oracle(f1(0.5), rho, hard, mc());
    CHECK(std::abs(d.value - o) <= std::max(0.02 * o, 3 * d.std_error));
}

TEST_CASE("classical functional", "[forms]")
{
    const AnalyticField h = sqrt_mu_field();
    const AnalyticField v2 = AnalyticField::speed_squared();
    for (const AnalyticField& k : {h, h * AnalyticField::monomial(1.0, 1, 0, 0), h * v2})
        CHECK(near_zero(h_classical(k, hard, mc())));

    // mu^{1/2} v1 v2 against an oracle evaluation of the same integrand.
    const AnalyticField g = h * AnalyticField::monomial(1.0, 1, 1, 0);
    const Estimate e = h_classical(g, hard, mc(400000));
    const AnalyticField G = divide_by_sqrt_mu(g);
    QuadConfig q = mc();
    q.oracle_grid = {6, 20, 6, 12, 4, 4, 8};
    const double o = tensor_oracle_integrate(
        [&](const CollisionConfig& c) {
            const double b = kernel_at(c, hard);
            if (b == 0.0)
                return 0.0;
            const FourPoint p(c);
            const double sg = s_operator(G, p);
            return 0.25 * b * p.v.mu * p.v_star.mu * sg * sg;
        },
        hard, q.oracle_grid, 12.0);
    CHECK(e.value > 0.0);
    CHECK(std::abs(e.value - o) <= std::max(0.02 * o, 3 * e.std_error));
}

TEST_CASE("J and H_c identities with common random numbers", "[forms]")
{
    const AnalyticField g = sqrt_mu_field() * AnalyticField::monomial(1.0, 2, 1, 0);
    const FormResult at0 = evaluate_forms(g, g, Fugacity(0.0), hard, mc());
    CHECK(near_zero(at0.j_minus_hc));
    CHECK_THAT(at0.j_value.value, WithinRel(at0.hc_value.value, 1e-12));

    for (double rho : {0.3, 0.8}) {
        const AnalyticField f = f1(rho);
        const AnalyticField companion = f * AnalyticField::rho_factor(rho, 1);
        const FormResult r = evaluate_forms(f, companion, Fugacity(rho), hard, mc());
        CHECK(near_zero(r.j_minus_hc));
        CHECK(std::abs(r.j_minus_hc.value) <= 1e-10 * r.j_value.value);
    }
}

TEST_CASE("form sandwich", "[forms][property]")
{
    for (double rho : {0.25, 0.9}) {
        const KernelBasis basis = build_basis(Fugacity(rho));
        for (const auto& m : test_family(basis)) {
            const auto s = sandwich_forms(m.f, Fugacity(rho), hard, mc(50000));
            CHECK(s.lhs_ok);
            CHECK(s.rhs_ok);
            CHECK(s.forms.dirichlet.value >= -3 * s.forms.dirichlet.std_error);
            CHECK(s.forms.j_value.value >= -3 * s.forms.j_value.std_error);
        }
    }
    const auto s0 = sandwich_forms(f1(0.0), Fugacity(0.0), hard, mc(20000));
    CHECK(s0.lhs_ok);
    CHECK(s0.rhs_ok);
    CHECK(s0.forms.dirichlet.value == 0.0);
}

TEST_CASE("pointwise integrand sandwich", "[forms][property]")
{
    std::mt19937_64 rng(17);
    std::normal_distribution<double> g(0.0, 2.0);
    std::uniform_real_distribution<double> ur(0.0, 0.99);
    for (int i = 0; i < 10000; ++i) {
        const Vec3 v{g(rng), g(rng), g(rng)}, vs{g(rng), g(rng), g(rng)};
        Vec3 s{g(rng), g(rng), g(rng)};
        s = (1.0 / norm(s)) * s;
        CHECK(integrand_sandwich_holds(make_collision(v, vs, s), Fugacity(ur(rng))));
    }
}

TEST_CASE("small-rho limit of the Dirichlet form", "[forms]")
{
    const AnalyticField base = AnalyticField::monomial(1.0, 1, 1, 0);
    for (double rho : {0.01, 0.05}) {
        const AnalyticField f = base * n_rho_field(rho);
        const MultiEstimate<3> m = evaluate_forms_multi(f, AnalyticField::zero(), Fugacity(rho), hard, mc(50000));
        const Estimate gap = m.linear({1.0 / rho, -1.0, 0.0});
        const double bound = (std::pow(1.0 - rho, -4.0) - 1.0) * m.mean[1];
        CHECK(gap.value >= -3 * gap.std_error);
        CHECK(gap.value <= bound + 3 * gap.std_error);
    }
}

TEST_CASE("polarized self-adjointness", "[forms][property]")
{
    const double rho = 0.5;
    const KernelBasis basis = build_basis(Fugacity(rho));
    const auto fam = test_family(basis);
    for (std::size_t i = 0; i + 1 < fam.size(); ++i) {
        const auto r = polarized_pairing(fam[i].f, fam[i + 1].f, Fugacity(rho), hard, mc(100000));
        CHECK(near_zero(r.difference));
    }
    const AnalyticField h = sqrt_mu_field();
    const auto c = polarized_pairing_classical(h * AnalyticField::monomial(1.0, 2, 0, 0),
                                               h * AnalyticField::monomial(1.0, 1, 1, 1), hard, mc(100000));
    CHECK(near_zero(c.difference));
}

TEST_CASE("lemma argument validation and trivial limit", "[forms][lemma]")
{
    const Vec3 v{1, 2, 0};
    CHECK_THROWS_AS(lemma_x_integral(v, {-1, 0.0, 0.5, 0.5}, mc()), RangeError);
    CHECK_THROWS_AS(lemma_x_integral(v, {-1, -0.5, 1.0, 0.5}, mc()), RangeError);
    CHECK_THROWS_AS(lemma_phi_integral(v, {-3.2, -0.5, 0.5, 0.1}, mc()), RangeError);
    CHECK_THROWS_AS(lemma_phi_integral(v, {0.5, -0.5, 0.5, 0.5}, mc()), RangeError);

    const LemmaArgs tiny{-1, -1e-9, 0.5, 0.5};
    CHECK(lemma_x_integral(v, tiny, mc(20000)).value < 1e-15);
    CHECK(lemma_phi_integral(v, tiny, mc(20000)).value < 1e-15);
}

TEST_CASE("lemma X value matches direct evaluation", "[forms][lemma]")
{
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g(0.0, 3.0);
    const double beta = -0.7, delta = 0.3;
    const auto u = [&](const Vec3& w) { return std::pow(1 + delta * delta * norm2(w), beta / 4); };
    for (int i = 0; i < 1000; ++i) {
        const Vec3 v{g(rng), g(rng), g(rng)}, vs{g(rng), g(rng), g(rng)};
        Vec3 s{g(rng), g(rng), g(rng)};
        s = (1.0 / norm(s)) * s;
        const auto c = make_collision(v, vs, s);
        const double d = u(c.v_prime) * u(c.v_prime_star) - u(v) * u(vs);
        const double direct = std::pow(delta, -beta) * d * d;
        CHECK_THAT(lemma_x_value(c, beta, delta), WithinAbs(direct, 1e-12 * (1 + direct)));
        const double phi = (1 - u(v)) * std::exp(-0.25 * norm2(v));
        CHECK_THAT(lemma_phi_function(v, beta, delta), WithinAbs(phi, 1e-14));
    }
}

TEST_CASE("lemma envelopes", "[forms][lemma]")
{
    for (double delta : {0.5, 0.125}) {
        const LemmaArgs a{-1, -0.5, delta, 0.5};
        for (double r : {0.0, 2.0, 5.0, 10.0}) {
            const Vec3 v{r, 0, 0};
            const Estimate x = lemma_x_integral(v, a, mc(50000));
            const Estimate p = lemma_phi_integral(v, a, mc(50000));
            CHECK(x.value > 0.0);
            CHECK(x.value <= lemma_x_envelope_constant * lemma_x_envelope(v, a));
            CHECK(p.value <= lemma_phi_envelope_constant * lemma_phi_envelope(v, a));
        }
    }
}

TEST_CASE("lemma phi decay in v*", "[forms][lemma]")
{
    // Corrections to the <v*>^{alpha + 2s} law fall off like 1/|v*|; fit well past the bulk.
    const LemmaArgs a{-1.5, -0.5, 0.25, 0.5};
    std::vector<double> xs, ys;
    for (double r : {10.0, 20.0, 40.0, 80.0}) {
        xs.push_back(std::sqrt(1 + r * r));
        ys.push_back(lemma_phi_integral(Vec3{0, 0, r}, a, mc(100000)).value);
    }
    const FitResult fit = fit_exponent(xs, ys);
    CHECK(std::abs(fit.slope - (a.alpha + 2 * a.s)) <= 0.3);
}

TEST_CASE("delta scaling of both lemmas", "[forms][lemma]")
{
    const Vec3 fixed{1.2, -0.8, 0.5};
    for (double s : {0.25, 0.5}) {
        for (LemmaKind k : {LemmaKind::X, LemmaKind::Phi}) {
            const DeltaScaling d = delta_scaling(k, fixed, -1.0, -0.5, s, default_delta_grid(), mc(50000));
            CHECK(d.fit.slope >= 2 * s - 0.15);
        }
    }
}
