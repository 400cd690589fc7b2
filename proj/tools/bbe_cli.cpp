// bbe: command-line driver for the experiments.
//
// Exit codes: 0 success, 1 check failure, 2 usage or config error, 3 numerical error.

#include "bbe/bbe.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

using namespace bbe;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CheckFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Config file: flat "key = value" lines, keys named like the long flags.
// ---------------------------------------------------------------------------

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> read_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw UsageError("cannot open config file '" + path + "'");
    std::vector<std::string> args;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#')
            continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw UsageError(path + ":" + std::to_string(lineno) + ": expected 'key = value'");
        const std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
            value = value.substr(1, value.size() - 2);
        if (key.empty() || key == "config")
            throw UsageError(path + ":" + std::to_string(lineno) + ": invalid key '" + key + "'");
        args.push_back("--" + key);
        args.push_back(value);
    }
    return args;
}

/// Inserts config arguments right after the subcommand so later command-line flags win.
std::vector<std::string> splice_config(int argc, char** argv, const std::vector<std::string>& subcommands)
{
    std::vector<std::string> args(argv, argv + argc);
    std::string path;
    for (std::size_t i = 1; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size())
            path = args[i + 1];
        else if (args[i].rfind("--config=", 0) == 0)
            path = args[i].substr(9);
    }
    if (path.empty())
        return args;
    const std::vector<std::string> extra = read_config(path);
    auto sub = std::find_if(args.begin() + 1, args.end(), [&](const std::string& a) {
        return std::find(subcommands.begin(), subcommands.end(), a) != subcommands.end();
    });
    if (sub == args.end())
        return args;
    args.insert(sub + 1, extra.begin(), extra.end());
    return args;
}

std::vector<double> parse_doubles(const std::string& s)
{
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty())
            continue;
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size())
                throw std::invalid_argument(item);
        } catch (const std::logic_error&) {
            throw UsageError("not a number: '" + item + "'");
        }
    }
    return out;
}

std::vector<std::string> parse_ids(const std::string& s)
{
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!trim(item).empty())
            out.push_back(trim(item));
    return out;
}

// ---------------------------------------------------------------------------
// Tabular output
// ---------------------------------------------------------------------------

using Cell = std::variant<std::string, double, std::uint64_t, bool>;

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;
};

std::string cell_text(const Cell& c)
{
    if (auto s = std::get_if<std::string>(&c))
        return *s;
    if (auto d = std::get_if<double>(&c))
        return fmt17(*d);
    if (auto u = std::get_if<std::uint64_t>(&c))
        return std::to_string(*u);
    return std::get<bool>(c) ? "true" : "false";
}

nlohmann::json cell_json(const Cell& c)
{
    return std::visit([](const auto& v) { return nlohmann::json(v); }, c);
}

void write_table(std::ostream& os, const Table& t, const std::string& format)
{
    if (format == "json") {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& r : t.rows) {
            nlohmann::json o = nlohmann::json::object();
            for (std::size_t i = 0; i < t.columns.size(); ++i)
                o[t.columns[i]] = cell_json(r[i]);
            arr.push_back(o);
        }
        os << arr.dump(2) << '\n';
        return;
    }
    for (std::size_t i = 0; i < t.columns.size(); ++i)
        os << (i ? "," : "") << t.columns[i];
    os << '\n';
    for (const auto& r : t.rows) {
        for (std::size_t i = 0; i < r.size(); ++i)
            os << (i ? "," : "") << cell_text(r[i]);
        os << '\n';
    }
}

Table sweep_table(const std::vector<SweepRow>& rows)
{
    Table t;
    t.columns = parse_ids(sweep_csv_header());
    for (const auto& r : rows)
        t.rows.push_back({r.f_id, r.rho, r.gamma, r.s, r.dirichlet.value, r.dirichlet.std_error, r.j_value.value,
                          r.j_value.std_error, r.norm_sq, r.ratio_lower, r.ratio_upper, r.seed,
                          static_cast<std::uint64_t>(r.n_samples)});
    return t;
}

// ---------------------------------------------------------------------------
// Options
// ---------------------------------------------------------------------------

struct Options {
    double gamma = -1.0;
    double s = 0.5;
    std::uint64_t seed = 20240607;
    std::size_t samples = 1'000'000;
    unsigned threads = 0;
    std::string config;
    std::string out;
    std::string format = "csv";
    std::string plot;

    std::string f_id = "F1";
    double rho = 0.5;
    std::string which_norm = "Ls";
    std::string rho_grid;
    std::string ids;
    double a = 0.25;
    std::string which_lemma = "X";
    double alpha = -1.0;
    double beta = -0.5;
};

KernelParams kernel(const Options& o) { return KernelParams(o.gamma, o.s); }

QuadConfig quad(const Options& o)
{
    QuadConfig q;
    q.seed = o.seed;
    q.mc_samples = o.samples;
    q.threads = o.threads;
    q.validate();
    return q;
}

SweepConfig sweep_config(const Options& o)
{
    SweepConfig c;
    c.quad = quad(o);
    if (!o.rho_grid.empty())
        c.rho_grid = parse_doubles(o.rho_grid);
    if (!o.ids.empty())
        c.ids = parse_ids(o.ids);
    for (double r : c.rho_grid)
        (void)Fugacity(r);
    return c;
}

class Output {
public:
    explicit Output(const std::string& path)
    {
        if (!path.empty()) {
            file_.open(path);
            if (!file_)
                throw UsageError("cannot write '" + path + "'");
        }
    }
    std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

private:
    std::ofstream file_;
};

void write_plot(const Options& o, const std::vector<PlotSeries>& series, const std::string& title,
                const std::string& xlabel, const std::string& ylabel)
{
    if (o.plot.empty())
        return;
    std::ofstream svg(o.plot);
    if (!svg)
        throw UsageError("cannot write '" + o.plot + "'");
    write_svg_plot(svg, series, title, xlabel, ylabel);
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

void cmd_check(const Options& o)
{
    const KernelParams p = kernel(o);
    Table t;
    t.columns = {"check", "pass", "detail"};
    bool all = true;
    auto add = [&](const std::string& name, bool ok, const std::string& detail) {
        t.rows.push_back({name, ok, detail});
        all = all && ok;
    };

    std::mt19937_64 rng(o.seed);
    std::normal_distribution<double> g(0.0, 3.0);
    double worst = 0;
    for (int i = 0; i < 10000; ++i) {
        const Vec3 v{g(rng), g(rng), g(rng)}, vs{g(rng), g(rng), g(rng)};
        Vec3 s{g(rng), g(rng), g(rng)};
        const auto c = make_collision(v, vs, (1.0 / norm(s)) * s);
        const double e0 = norm2(v) + norm2(vs);
        worst = std::max(worst, std::abs(norm2(c.v_prime) + norm2(c.v_prime_star) - e0) / e0);
        worst = std::max(worst, norm(c.v_prime + c.v_prime_star - v - vs) / (norm(v) + norm(vs)));
    }
    add("collision_conservation", worst <= 1e-12, "max relative defect " + fmt17(worst));

    std::uniform_real_distribution<double> ut(1e-6, pi / 2), ur(0.01, 10.0);
    double lo = INFINITY, hi = 0;
    for (int i = 0; i < 10000; ++i) {
        const double th = ut(rng), r = ur(rng);
        const double q = kernel_b_phi(r, th, p) / kernel_b(r, th, p);
        lo = std::min(lo, q);
        hi = std::max(hi, q);
    }
    add("kernel_sandwich", lo >= 1.0 && hi <= 4.0, "ratio in [" + fmt17(lo) + ", " + fmt17(hi) + "]");

    const Fugacity rho(o.rho);
    const KernelBasis b = build_basis(rho);
    add("gram_identity", gram_deviation(b) <= 1e-8, "max deviation " + fmt17(gram_deviation(b)));

    const AnalyticField h = sqrt_mu_field();
    const double e_h0 = std::abs(norm_Hs_l(sample_field(h), 0.0, 0.0) / norm_L2_l(h, 0.0) - 1);
    add("h0_equals_l2", e_h0 <= 1e-6, "relative gap " + fmt17(e_h0));

    QuadConfig q = quad(o);
    q.mc_samples = std::min<std::size_t>(q.mc_samples, 100000);
    const Estimate d = dirichlet_quantum(b.e[0], rho, p, q);
    add("kernel_vanishing", d.consistent_with(0.0), "D(e_1) = " + fmt17(d.value) + " +- " + fmt17(d.std_error));

    const FamilyMember f = family_member(o.f_id, b);
    const auto sw = sandwich_forms(project(f.f, b).residual, rho, p, q);
    add("form_sandwich", sw.lhs_ok && sw.rhs_ok, o.f_id + " at rho " + fmt17(o.rho));

    Output out(o.out);
    write_table(out.stream(), t, o.format);
    if (!all)
        throw CheckFailure("one or more checks failed");
}

void cmd_dirichlet(const Options& o)
{
    const Fugacity rho(o.rho);
    const KernelParams p = kernel(o);
    const KernelBasis b = build_basis(rho);
    const KernelBasis classical = build_basis(Fugacity(0.0));
    const AnalyticField f = project(family_member(o.f_id, b).f, b).residual;
    const WfPhif wp = wf_phif(f, b, classical);
    const FormResult r = evaluate_forms(f, wp.phi_f, rho, p, quad(o));
    Table t;
    t.columns = {"f_id",      "rho",      "gamma",           "s",
                 "dirichlet", "dirichlet_stderr", "j_value", "j_stderr",
                 "hc_phi",    "hc_phi_stderr",    "lower_gap", "lower_gap_stderr",
                 "upper_gap", "upper_gap_stderr", "seed",    "n_samples"};
    t.rows.push_back({o.f_id, o.rho, o.gamma, o.s, r.dirichlet.value, r.dirichlet.std_error, r.j_value.value,
                      r.j_value.std_error, r.hc_value.value, r.hc_value.std_error, r.dirichlet_minus_rho_j.value,
                      r.dirichlet_minus_rho_j.std_error, r.upper_minus_dirichlet.value,
                      r.upper_minus_dirichlet.std_error, o.seed, static_cast<std::uint64_t>(o.samples)});
    Output out(o.out);
    write_table(out.stream(), t, o.format);
}

void cmd_norm(const Options& o)
{
    const Fugacity rho(o.rho);
    const KernelParams p = kernel(o);
    const KernelBasis b = build_basis(rho);
    const AnalyticField f = project(family_member(o.f_id, b).f, b).residual;
    const double l = 0.5 * p.gamma();
    double value;
    if (o.which_norm == "L2")
        value = norm_L2_l(f, l);
    else if (o.which_norm == "Hs")
        value = norm_Hs_l(sample_field(f).cubic, p.s(), l);
    else if (o.which_norm == "As")
        value = norm_An_l(f, p.s(), l);
    else
        value = norm_Ls_l(f, p, l).value();
    Table t;
    t.columns = {"f_id", "rho", "gamma", "s", "which", "weight", "value"};
    t.rows.push_back({o.f_id, o.rho, o.gamma, o.s, o.which_norm, l, value});
    Output out(o.out);
    write_table(out.stream(), t, o.format);
}

void cmd_sweep(const Options& o)
{
    const std::vector<SweepRow> rows = rho_sweep(kernel(o), sweep_config(o));
    Output out(o.out);
    write_table(out.stream(), sweep_table(rows), o.format);
    write_plot(o, sweep_plot_series(rows), "ratio_lower against rho", "rho", "ratio_lower");
}

void cmd_nrho(const Options& o)
{
    const NrhoAsymptotics q = nrho_asymptotics(o.a);
    Table t;
    t.columns = {"a", "rho", "l2", "grad", "l2_slope", "grad_slope"};
    for (const auto& pt : q.points)
        t.rows.push_back({o.a, pt.rho, pt.l2, pt.grad, q.l2_fit.slope, q.grad_fit.slope});
    Output out(o.out);
    write_table(out.stream(), t, o.format);

    PlotSeries l2{"L2", {}, {}}, gr{"grad", {}, {}};
    for (const auto& pt : q.points) {
        l2.x.push_back(pt.rho);
        l2.y.push_back(pt.l2);
        gr.x.push_back(pt.rho);
        gr.y.push_back(pt.grad);
    }
    write_plot(o, {l2, gr}, "N_rho norms", "rho", "norm");
}

void cmd_lemma(const Options& o)
{
    const LemmaKind k = o.which_lemma == "X" ? LemmaKind::X : LemmaKind::Phi;
    const Vec3 fixed{1.2, -0.8, 0.5};
    const DeltaScaling d = delta_scaling(k, fixed, o.alpha, o.beta, o.s, default_delta_grid(), quad(o));
    Table t;
    t.columns = {"which", "alpha", "beta", "s", "delta", "value", "stderr", "slope", "r_squared"};
    for (std::size_t i = 0; i < d.deltas.size(); ++i)
        t.rows.push_back({o.which_lemma, o.alpha, o.beta, o.s, d.deltas[i], d.values[i].value,
                          d.values[i].std_error, d.fit.slope, d.fit.r_squared});
    Output out(o.out);
    write_table(out.stream(), t, o.format);

    PlotSeries sr{o.which_lemma, d.deltas, {}};
    for (const auto& e : d.values)
        sr.y.push_back(e.value);
    write_plot(o, {sr}, "lemma value against delta", "delta", "value");
}

void cmd_envelope(const Options& o)
{
    const KernelParams p = kernel(o);
    const std::vector<SweepRow> rows = rho_sweep(p, sweep_config(o));
    const bool frozen = p.gamma() == -1.0 && p.s() == 0.5;
    const EnvelopeSummary s = envelope_report(rows, p, frozen ? frozen_envelope_hard : EnvelopeConstants{0.0, INFINITY, 0.0});
    for (const auto& w : s.warnings)
        std::cerr << "warning: " << w << '\n';
    if (!frozen)
        std::cerr << "warning: no frozen envelope constants for these kernel parameters; only positivity is gated\n";

    Table t;
    t.columns = {"f_id", "rho", "normalized_lower", "ratio_upper", "lower_positive", "exponent"};
    for (const auto& r : s.rows)
        t.rows.push_back({r.f_id, r.rho, r.normalized_lower, r.ratio_upper, r.lower_positive, s.exponent});
    Output out(o.out);
    write_table(out.stream(), t, o.format);
    std::cerr << "min normalized lower " << fmt17(s.min_normalized_lower) << ", max ratio_upper "
              << fmt17(s.max_ratio_upper) << ", " << (s.pass ? "PASS" : "FAIL") << '\n';

    std::vector<PlotSeries> series;
    for (const auto& id : family_ids()) {
        PlotSeries ps{id, {}, {}};
        for (const auto& r : s.rows)
            if (r.f_id == id) {
                ps.x.push_back(r.rho);
                ps.y.push_back(r.normalized_lower);
            }
        if (!ps.x.empty())
            series.push_back(ps);
    }
    write_plot(o, series, "normalized lower ratio", "rho", "ratio_lower (1 - rho)^-p");
    if (!s.pass)
        throw CheckFailure("envelope check failed");
}

void cmd_temperatures(const Options& o)
{
    const TemperatureRatio r = temperature_ratio(Fugacity(o.rho));
    Table t;
    t.columns = {"rho", "m0", "m2", "kinetic", "critical", "ratio", "rho_pow_minus_two_thirds"};
    t.rows.push_back({o.rho, r.report.m0, r.report.m2, r.report.kinetic, r.report.critical, r.ratio, r.predicted});
    Output out(o.out);
    write_table(out.stream(), t, o.format);
}

} // namespace

int main(int argc, char** argv)
{
    Options o;
    CLI::App app{"Numerical experiments for the linearized Boltzmann-Bose operator"};
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.require_subcommand(1);

    app.add_option("--gamma", o.gamma, "kinetic exponent gamma in (-3, 0]");
    app.add_option("--s", o.s, "angular exponent s in (0, 1)");
    app.add_option("--seed", o.seed, "Monte Carlo seed");
    app.add_option("--samples", o.samples, "Monte Carlo samples per estimate");
    app.add_option("--threads", o.threads, "worker threads (0: hardware concurrency)");
    app.add_option("--config", o.config, "flat key = value file; flags override it");
    app.add_option("--out", o.out, "output path (default stdout)");
    app.add_option("--format", o.format, "output format")->check(CLI::IsMember({"csv", "json"}));
    app.add_option("--plot", o.plot, "write an SVG line plot");

    const std::vector<std::string> names{"check",          "dirichlet",     "norm",     "sweep-rho",
                                         "nrho-asymptotics", "lemma-scaling", "envelope", "temperatures"};

    auto* check = app.add_subcommand("check", "run the invariant suites");
    check->add_option("--rho", o.rho, "fugacity");
    check->add_option("--f", o.f_id, "test function id (F1..F5)");

    auto* dir = app.add_subcommand("dirichlet", "Dirichlet form and companions for one test function");
    dir->add_option("--f", o.f_id, "test function id (F1..F5)")->required();
    dir->add_option("--rho", o.rho, "fugacity")->required();

    auto* nrm = app.add_subcommand("norm", "norms of one test function");
    nrm->add_option("--f", o.f_id, "test function id (F1..F5)")->required();
    nrm->add_option("--which", o.which_norm, "norm")->required()->check(CLI::IsMember({"L2", "Hs", "As", "Ls"}));
    nrm->add_option("--rho", o.rho, "fugacity");

    auto* sweep = app.add_subcommand("sweep-rho", "forms, norms and ratios over the family and a rho grid");
    auto* env = app.add_subcommand("envelope", "coercivity envelope against the frozen constants");
    for (auto* sc : {sweep, env}) {
        sc->add_option("--rho-grid", o.rho_grid, "comma-separated fugacities");
        sc->add_option("--ids", o.ids, "comma-separated test function ids");
    }

    auto* nr = app.add_subcommand("nrho-asymptotics", "N_rho norm exponents as rho -> 1");
    nr->add_option("--a", o.a, "weight exponent in [1/4, 1]")->required();

    auto* lem = app.add_subcommand("lemma-scaling", "delta scaling of the difference-term lemmas");
    lem->add_option("--which", o.which_lemma, "lemma")->required()->check(CLI::IsMember({"X", "phi"}));
    lem->add_option("--alpha", o.alpha, "alpha < 0");
    lem->add_option("--beta", o.beta, "beta < 0");

    auto* tmp = app.add_subcommand("temperatures", "kinetic and critical temperatures");
    tmp->add_option("--rho", o.rho, "fugacity")->required();

    for (auto* sc : app.get_subcommands({}))
        sc->fallthrough();

    try {
        std::vector<std::string> args = splice_config(argc, argv, names);
        args.erase(args.begin());
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }

    try {
        if (*check)
            cmd_check(o);
        else if (*dir)
            cmd_dirichlet(o);
        else if (*nrm)
            cmd_norm(o);
        else if (*sweep)
            cmd_sweep(o);
        else if (*nr)
            cmd_nrho(o);
        else if (*lem)
            cmd_lemma(o);
        else if (*env)
            cmd_envelope(o);
        else if (*tmp)
            cmd_temperatures(o);
    } catch (const CheckFailure& e) {
        std::cerr << "FAIL: " << e.what() << '\n';
        return 1;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const RangeError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
