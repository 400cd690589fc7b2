#pragma once

#include "bbe/core.hpp"
#include "bbe/equilibria.hpp"
#include "bbe/field.hpp"
#include "bbe/forms.hpp"
#include "bbe/kernelspace.hpp"
#include "bbe/norms.hpp"
#include "bbe/quad.hpp"
#include "bbe/quad_rules.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace bbe {

// ---------------------------------------------------------------------------
// Test family
// ---------------------------------------------------------------------------

struct FamilyMember {
    std::string id;
    AnalyticField f;
};

inline const std::vector<std::string>& family_ids()
{
    static const std::vector<std::string> ids{"F1", "F2", "F3", "F4", "F5"};
    return ids;
}

/// F1 = N (v1^2 - |v|^2/3), F2 = N v1 v2, F3 = (I - P)(mu^{1/2} |v|^4),
/// F4 = mu^{1/2} Y_2^0(v/|v|) |v|^2, F5 = mu v1.
inline std::vector<FamilyMember> test_family(const KernelBasis& basis)
{
    const double rho = basis.rho;
    const AnalyticField n = rho == 0.0 ? sqrt_mu_field() : n_rho_field(rho);
    const AnalyticField v2 = AnalyticField::speed_squared();
    const AnalyticField x = AnalyticField::monomial(1.0, 1, 0, 0);
    const AnalyticField y = AnalyticField::monomial(1.0, 0, 1, 0);
    const AnalyticField z = AnalyticField::monomial(1.0, 0, 0, 1);
    const double y20 = std::sqrt(5.0 / (16.0 * pi));
    std::vector<FamilyMember> fam;
    fam.push_back({"F1", n * (x * x - (1.0 / 3.0) * v2)});
    fam.push_back({"F2", n * x * y});
    fam.push_back({"F3", project(sqrt_mu_field() * v2 * v2, basis).residual});
    fam.push_back({"F4", sqrt_mu_field() * (y20 * (3.0 * z * z - v2))});
    fam.push_back({"F5", mu_field() * x});
    return fam;
}

inline FamilyMember family_member(const std::string& id, const KernelBasis& basis)
{
    for (auto& m : test_family(basis))
        if (m.id == id)
            return m;
    throw RangeError("unknown test function id '" + id + "' (expected F1..F5)");
}

inline const std::vector<double>& default_rho_grid()
{
    static const std::vector<double> g{0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95, 0.99};
    return g;
}

// ---------------------------------------------------------------------------
// Fits
// ---------------------------------------------------------------------------

struct FitResult {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    std::size_t points = 0;
};

/// Least-squares line through (log x, log y).
inline FitResult fit_exponent(const std::vector<double>& xs, const std::vector<double>& ys)
{
    if (xs.size() != ys.size() || xs.size() < 4)
        throw DegenerateError("exponent fit needs at least 4 (x, y) pairs");
    const std::size_t n = xs.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!(xs[i] > 0.0) || !(ys[i] > 0.0))
            throw DegenerateError("exponent fit needs positive data");
        const double lx = std::log(xs[i]), ly = std::log(ys[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        syy += ly * ly;
    }
    const double dn = static_cast<double>(n);
    const double vx = sxx - sx * sx / dn;
    const double vy = syy - sy * sy / dn;
    const double cxy = sxy - sx * sy / dn;
    if (!(vx > 0.0))
        throw DegenerateError("exponent fit needs distinct x values");
    FitResult r;
    r.points = n;
    r.slope = cxy / vx;
    r.intercept = (sy - r.slope * sx) / dn;
    r.r_squared = vy > 0.0 ? std::clamp(cxy * cxy / (vx * vy), 0.0, 1.0) : 1.0;
    return r;
}

// ---------------------------------------------------------------------------
// rho sweep
// ---------------------------------------------------------------------------

struct SweepRow {
    std::string f_id;
    double rho = 0.0;
    double gamma = 0.0;
    double s = 0.0;
    Estimate dirichlet;
    Estimate j_value;
    Estimate hc_phi;        // H_c(Phi_f) on the same samples
    Estimate j_minus_hc;    // J_rho(f) - H_c(Phi_f)
    Estimate lower_gap;     // <L f, f> - rho J
    Estimate upper_gap;     // (1 - rho)^{-4} rho J - <L f, f>
    double norm_sq = 0.0;   // |(I - P) f|^2 in L^s_{gamma/2}
    double ratio_lower = 0.0;
    double ratio_upper = 0.0;
    std::uint64_t seed = 0;
    std::size_t n_samples = 0;
};

struct SweepConfig {
    std::vector<double> rho_grid = default_rho_grid();
    std::vector<std::string> ids = family_ids();
    QuadConfig quad{};
    NormConfig norms{};
};

/// Per-(f, rho) norms, independent of the Monte Carlo seed.
struct NormKey {
    std::string f_id;
    double rho;
    auto operator<=>(const NormKey&) const = default;
};
using NormTable = std::map<NormKey, double>;

/// Computes the rows in (rho, f_id) order. Norms found in `cache` are reused; new
/// ones are stored back.
inline std::vector<SweepRow> rho_sweep(const KernelParams& p, const SweepConfig& cfg, NormTable* cache = nullptr)
{
    std::vector<SweepRow> rows;
    const KernelBasis classical = build_basis(Fugacity(0.0), cfg.norms);
    for (double r : cfg.rho_grid) {
        const Fugacity rho(r);
        const KernelBasis basis = build_basis(rho, cfg.norms);
        for (const auto& id : cfg.ids) {
            const FamilyMember m = family_member(id, basis);
            const Projection pr = project(m.f, basis);
            const AnalyticField g = pr.residual;

            double norm_sq;
            const NormKey key{id, r};
            if (cache && cache->count(key)) {
                norm_sq = cache->at(key);
            } else {
                norm_sq = norm_Ls_l(g, p, 0.5 * p.gamma(), cfg.norms).squared();
                if (cache)
                    (*cache)[key] = norm_sq;
            }

            SweepRow row;
            row.f_id = id;
            row.rho = r;
            row.gamma = p.gamma();
            row.s = p.s();
            row.norm_sq = norm_sq;
            row.seed = cfg.quad.seed;
            row.n_samples = cfg.quad.mc_samples;
            const WfPhif wp = wf_phif(g, basis, classical);
            const FormResult fr = evaluate_forms(g, wp.phi_f, rho, p, cfg.quad);
            row.dirichlet = fr.dirichlet;
            row.j_value = fr.j_value;
            row.hc_phi = fr.hc_value;
            row.j_minus_hc = fr.j_minus_hc;
            row.lower_gap = fr.dirichlet_minus_rho_j;
            row.upper_gap = fr.upper_minus_dirichlet;
            if (r > 0.0 && norm_sq > 0.0) {
                row.ratio_lower = row.dirichlet.value / (r * norm_sq);
                row.ratio_upper = row.dirichlet.value / (r * std::pow(1.0 - r, -4.0) * norm_sq);
            }
            rows.push_back(row);
        }
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Coercivity envelope
// ---------------------------------------------------------------------------

/// Constants frozen from the calibration sweep (seed 20240607, 10^6 samples,
/// gamma = -1, s = 0.5, default rho grid and family).
/// lambda is the calibration minimum; other seeds must stay within lambda_tolerance
/// of it. c0 is 1.2 times the calibration maximum of ratio_upper.
struct EnvelopeConstants {
    double lambda;           // lower bound for ratio_lower (1 - rho)^{-p}
    double c0;               // upper bound for ratio_upper
    double lambda_tolerance; // relative
};

inline constexpr EnvelopeConstants frozen_envelope_hard{73.89, 80.0, 0.2};

struct EnvelopeRow {
    std::string f_id;
    double rho;
    double normalized_lower; // ratio_lower (1 - rho)^{-p}
    double ratio_upper;
    bool lower_positive;     // ratio_lower > 3 stderr
};

struct EnvelopeSummary {
    double exponent = 0.0;
    double min_normalized_lower = 0.0;
    double max_ratio_upper = 0.0;
    std::vector<EnvelopeRow> rows;
    std::vector<std::string> warnings;
    bool all_positive = true;
    bool pass = false;
};

inline EnvelopeSummary envelope_report(const std::vector<SweepRow>& sweep, const KernelParams& p,
                                       const EnvelopeConstants& frozen)
{
    EnvelopeSummary out;
    out.exponent = lower_bound_exponent(classify_potential(p));
    out.min_normalized_lower = INFINITY;
    out.max_ratio_upper = 0.0;
    for (const auto& r : sweep) {
        if (!(r.norm_sq > 1e-12) || r.rho == 0.0) {
            out.warnings.push_back("row " + r.f_id + " at rho " + std::to_string(r.rho) +
                                   " excluded (empty kernel residual or rho = 0)");
            continue;
        }
        EnvelopeRow e;
        e.f_id = r.f_id;
        e.rho = r.rho;
        e.normalized_lower = r.ratio_lower * std::pow(1.0 - r.rho, -out.exponent);
        e.ratio_upper = r.ratio_upper;
        e.lower_positive = r.dirichlet.value > 3.0 * r.dirichlet.std_error;
        out.all_positive = out.all_positive && e.lower_positive;
        out.min_normalized_lower = std::min(out.min_normalized_lower, e.normalized_lower);
        out.max_ratio_upper = std::max(out.max_ratio_upper, e.ratio_upper);
        out.rows.push_back(e);
    }
    if (out.rows.empty())
        throw DegenerateError("envelope report needs at least one usable sweep row");
    out.pass = out.all_positive && out.min_normalized_lower > 0.0 &&
               out.min_normalized_lower >= (1.0 - frozen.lambda_tolerance) * frozen.lambda &&
               out.max_ratio_upper <= frozen.c0;
    return out;
}

/// Empirical exponent of ratio_lower against (1 - rho), per test function.
inline std::map<std::string, FitResult> fitted_lower_exponents(const std::vector<SweepRow>& sweep)
{
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> data;
    for (const auto& r : sweep)
        if (r.rho > 0.0 && r.ratio_lower > 0.0) {
            data[r.f_id].first.push_back(1.0 - r.rho);
            data[r.f_id].second.push_back(r.ratio_lower);
        }
    std::map<std::string, FitResult> out;
    for (const auto& [id, xy] : data)
        if (xy.first.size() >= 4)
            out[id] = fit_exponent(xy.first, xy.second);
    return out;
}

// ---------------------------------------------------------------------------
// N_rho asymptotics
// ---------------------------------------------------------------------------

/// Composite Gauss-Legendre on [0, R] with geometric panels refining towards 0.
inline Rule1D refined_radial_rule(double R = 14.0)
{
    Rule1D r = geometric_panels(1.0, 30, 0.5, 16);
    r.append(gauss_legendre(64, 1.0, R));
    return r;
}

/// mu^{-1/2 + a} N_rho = mu^a / (1 - rho mu)
inline double nrho_scaled(const Vec3& v, double a, double rho)
{
    const double mu = maxwellian(v);
    return std::pow(mu, a) / (1.0 - rho * mu);
}

/// grad(mu^{-1/2+a} N_rho) = -(1 - rho mu)^{-2} (a + (1 - a) rho mu) mu^a v
inline Vec3 nrho_scaled_gradient(const Vec3& v, double a, double rho)
{
    const double mu = maxwellian(v);
    const double den = 1.0 - rho * mu;
    return (-(a + (1.0 - a) * rho * mu) * std::pow(mu, a) / (den * den)) * v;
}

/// Five-point central differences of nrho_scaled.
inline Vec3 nrho_scaled_gradient_fd(const Vec3& v, double a, double rho, double h = 2.5e-4)
{
    std::array<double, 3> g{};
    for (int i = 0; i < 3; ++i) {
        auto at = [&](double t) {
            Vec3 w = v;
            (i == 0 ? w.x : (i == 1 ? w.y : w.z)) += t;
            return nrho_scaled(w, a, rho);
        };
        g[i] = (-at(2 * h) + 8 * at(h) - 8 * at(-h) + at(-2 * h)) / (12 * h);
    }
    return {g[0], g[1], g[2]};
}

struct NrhoPoint {
    double rho;
    double l2;   // |mu^{-1/2+a} N_rho|_{L^2}
    double grad; // |grad(mu^{-1/2+a} N_rho)|_{L^2}
};

inline NrhoPoint nrho_norms(double a, double rho)
{
    static const Rule1D rule = refined_radial_rule();
    double l2 = 0.0, gr = 0.0;
    for (std::size_t i = 0; i < rule.size(); ++i) {
        const double r = rule.nodes[i];
        const double mu = std::exp(-0.5 * r * r);
        const double den = 1.0 - rho * mu;
        const double base = std::pow(mu, 2.0 * a) / (den * den);
        const double c = a + (1.0 - a) * rho * mu;
        l2 += rule.weights[i] * r * r * base;
        gr += rule.weights[i] * r * r * r * r * base * c * c / (den * den);
    }
    return {rho, std::sqrt(4.0 * pi * l2), std::sqrt(4.0 * pi * gr)};
}

struct NrhoAsymptotics {
    double a;
    std::vector<NrhoPoint> points;
    FitResult l2_fit;
    FitResult grad_fit;
};

/// Norms on rho_k = 1 - 4^{-k}, k = 1..k_max, and their fitted exponents in (1 - rho).
inline NrhoAsymptotics nrho_asymptotics(double a, int k_max = 6)
{
    if (!(a >= 0.25 && a <= 1.0))
        throw RangeError("N_rho asymptotics requires 1/4 <= a <= 1");
    NrhoAsymptotics out;
    out.a = a;
    std::vector<double> xs, yl, yg;
    for (int k = 1; k <= k_max; ++k) {
        const double one_minus = std::pow(4.0, -k);
        const NrhoPoint pt = nrho_norms(a, 1.0 - one_minus);
        out.points.push_back(pt);
        xs.push_back(one_minus);
        yl.push_back(pt.l2);
        yg.push_back(pt.grad);
    }
    out.l2_fit = fit_exponent(xs, yl);
    out.grad_fit = fit_exponent(xs, yg);
    return out;
}

// ---------------------------------------------------------------------------
// delta scaling of the technical lemmas
// ---------------------------------------------------------------------------

enum class LemmaKind { X, Phi };

struct DeltaScaling {
    LemmaKind which;
    std::vector<double> deltas;
    std::vector<Estimate> values;
    FitResult fit;
};

inline std::vector<double> default_delta_grid()
{
    std::vector<double> d;
    for (int k = 1; k <= 7; ++k)
        d.push_back(std::ldexp(1.0, -k));
    return d;
}

inline DeltaScaling delta_scaling(LemmaKind which, const Vec3& fixed, double alpha, double beta, double s,
                                  const std::vector<double>& deltas, const QuadConfig& cfg)
{
    DeltaScaling out;
    out.which = which;
    out.deltas = deltas;
    std::vector<double> ys;
    for (double d : deltas) {
        const LemmaArgs a{alpha, beta, d, s};
        const Estimate e = which == LemmaKind::X ? lemma_x_integral(fixed, a, cfg) : lemma_phi_integral(fixed, a, cfg);
        out.values.push_back(e);
        ys.push_back(e.value);
    }
    out.fit = fit_exponent(deltas, ys);
    return out;
}

// ---------------------------------------------------------------------------
// Temperatures
// ---------------------------------------------------------------------------

struct TemperatureRatio {
    TemperatureReport report;
    double ratio;     // T / T_c
    double predicted; // rho^{-2/3}
};

inline TemperatureRatio temperature_ratio(const Fugacity& rho)
{
    if (rho.value() == 0.0)
        throw DegenerateError("temperature ratio needs rho > 0");
    const AnalyticField cal_m = rho.value() * m_rho_field(rho.value());
    TemperatureRatio t;
    t.report = moments_and_temperatures(cal_m);
    t.ratio = t.report.kinetic / t.report.critical;
    t.predicted = std::pow(rho.value(), -2.0 / 3.0);
    return t;
}

// ---------------------------------------------------------------------------
// Output
// ---------------------------------------------------------------------------

inline std::string fmt17(double x)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline const char* sweep_csv_header()
{
    return "f_id,rho,gamma,s,dirichlet,dirichlet_stderr,j_value,j_stderr,norm_sq,ratio_lower,ratio_upper,seed,n_samples";
}

inline void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows)
{
    os << sweep_csv_header() << '\n';
    for (const auto& r : rows)
        os << r.f_id << ',' << fmt17(r.rho) << ',' << fmt17(r.gamma) << ',' << fmt17(r.s) << ','
           << fmt17(r.dirichlet.value) << ',' << fmt17(r.dirichlet.std_error) << ',' << fmt17(r.j_value.value) << ','
           << fmt17(r.j_value.std_error) << ',' << fmt17(r.norm_sq) << ',' << fmt17(r.ratio_lower) << ','
           << fmt17(r.ratio_upper) << ',' << r.seed << ',' << r.n_samples << '\n';
}

/// Minimal SVG line plot: one polyline per series, log-scaled y.
struct PlotSeries {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
};

inline void write_svg_plot(std::ostream& os, const std::vector<PlotSeries>& series, const std::string& title,
                           const std::string& xlabel, const std::string& ylabel)
{
    const double w = 640, h = 420, ml = 70, mr = 110, mt = 40, mb = 50;
    double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!(s.y[i] > 0.0))
                continue;
            x0 = std::min(x0, s.x[i]);
            x1 = std::max(x1, s.x[i]);
            y0 = std::min(y0, std::log10(s.y[i]));
            y1 = std::max(y1, std::log10(s.y[i]));
        }
    if (!(x1 > x0)) {
        x0 = 0.0;
        x1 = 1.0;
    }
    if (!(y1 > y0)) {
        y0 -= 1.0;
        y1 += 1.0;
    }
    auto px = [&](double x) { return ml + (x - x0) / (x1 - x0) * (w - ml - mr); };
    auto py = [&](double y) { return h - mb - (std::log10(y) - y0) / (y1 - y0) * (h - mt - mb); };
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << w / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << title << "</text>\n";
    os << "<line x1=\"" << ml << "\" y1=\"" << h - mb << "\" x2=\"" << w - mr << "\" y2=\"" << h - mb
       << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << h - mb << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << (ml + w - mr) / 2 << "\" y=\"" << h - 12 << "\" text-anchor=\"middle\" font-size=\"12\">"
       << xlabel << "</text>\n";
    os << "<text x=\"16\" y=\"" << h / 2 << "\" font-size=\"12\" transform=\"rotate(-90 16," << h / 2 << ")\">"
       << ylabel << " (log10)</text>\n";
    for (int t = 0; t <= 4; ++t) {
        const double xv = x0 + (x1 - x0) * t / 4.0;
        const double yv = y0 + (y1 - y0) * t / 4.0;
        os << "<text x=\"" << px(xv) << "\" y=\"" << h - mb + 16 << "\" text-anchor=\"middle\" font-size=\"10\">"
           << fmt17(std::round(xv * 1000) / 1000) << "</text>\n";
        os << "<text x=\"" << ml - 6 << "\" y=\"" << py(std::pow(10.0, yv)) + 3
           << "\" text-anchor=\"end\" font-size=\"10\">" << fmt17(std::round(yv * 100) / 100) << "</text>\n";
    }
    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        const char* c = colors[k % 6];
        os << "<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i)
            if (s.y[i] > 0.0)
                os << px(s.x[i]) << ',' << py(s.y[i]) << ' ';
        os << "\"/>\n";
        os << "<text x=\"" << w - mr + 8 << "\" y=\"" << mt + 16 * (k + 1) << "\" font-size=\"12\" fill=\"" << c
           << "\">" << s.name << "</text>\n";
    }
    os << "</svg>\n";
}

inline std::vector<PlotSeries> sweep_plot_series(const std::vector<SweepRow>& rows)
{
    std::vector<PlotSeries> out;
    for (const auto& id : family_ids()) {
        PlotSeries s;
        s.name = id;
        for (const auto& r : rows)
            if (r.f_id == id) {
                s.x.push_back(r.rho);
                s.y.push_back(r.ratio_lower);
            }
        if (!s.x.empty())
            out.push_back(std::move(s));
    }
    return out;
}

} // namespace bbe
