#pragma once

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "experiments.hpp"

namespace nonunif {

enum ExitCode { kExitOk = 0, kExitFailed = 1, kExitUsage = 2 };

namespace cli {

struct UsageError : Error {
    using Error::Error;
};

inline std::filesystem::path relative_to(const std::string& config, const std::string& path) {
    const std::filesystem::path p(path);
    if (p.is_absolute() || config.empty()) return p;
    return std::filesystem::path(config).parent_path() / p;
}

inline IniDocument read_config(const std::string& path) {
    if (path.empty()) throw UsageError("--config is required");
    if (!std::filesystem::is_regular_file(path)) throw UsageError("config file '" + path + "' does not exist");
    return IniDocument::parse(read_text_file(path));
}

inline std::vector<Vec2> parse_points(const std::string& text) {
    std::vector<Vec2> out;
    std::string item;
    std::istringstream is(text);
    while (std::getline(is, item, ';')) {
        item = Descriptor::trim(item);
        if (item.empty()) continue;
        const auto comma = item.find(',');
        if (comma == std::string::npos) throw ParseError("point '" + item + "' must be x,y");
        out.push_back({Descriptor::parse_number(Descriptor::trim(item.substr(0, comma)), "point"),
                       Descriptor::parse_number(Descriptor::trim(item.substr(comma + 1)), "point")});
    }
    return out;
}

inline void emit(const std::string& out_path, const std::string& name, const std::string& text, std::ostream& out) {
    if (out_path.empty()) {
        out << text;
        return;
    }
    std::filesystem::create_directories(out_path);
    write_text_file((std::filesystem::path(out_path) / name).string(), text);
}

struct Options {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    int verbosity = 0;

    // potential
    std::string kind;
    std::optional<double> beta, p, radius, t, gamma;
    std::optional<int> dim;
    std::string measure;
    std::vector<std::string> points;

    // regime
    int n = 2;
    double rp = 2.0, rq = 2.0, ralpha = 1.0;
    std::string family = "double_phase";
    bool bounded = false;

    std::optional<int> workers;
};

inline int run_potential(const Options& o, std::ostream& out, std::ostream& err) {
    IniSection s{"potential", {}};
    if (!o.config.empty()) s = read_config(o.config).require("potential");
    const std::string kind = o.kind.empty() ? s.text_or("kind", "riesz") : o.kind;
    const double beta = o.beta.value_or(s.number_or("beta", 1.0));
    const double p = o.p.value_or(s.number_or("p", 2.0));
    const double r = o.radius.value_or(s.number_or("radius", 1.0));
    const int n = o.dim.value_or(s.integer_or("dimension", 2));
    std::string mpath = o.measure.empty() ? s.text_or("measure", "") : o.measure;
    if (mpath.empty()) throw UsageError("a measure file is required (--measure or measure = in [potential])");
    if (o.measure.empty()) mpath = relative_to(o.config, mpath).string();
    std::istringstream ms(read_text_file(mpath));
    const Measure mu = read_measure_csv(ms, n);
    std::vector<Vec2> xs;
    for (const auto& pt : o.points) {
        const auto more = parse_points(pt);
        xs.insert(xs.end(), more.begin(), more.end());
    }
    if (xs.empty()) xs = parse_points(s.text_or("points", "0,0"));
    std::vector<double> vals;
    for (const Vec2& x : xs) {
        if (kind == "riesz")
            vals.push_back(riesz(mu, x, r, beta));
        else if (kind == "wolff")
            vals.push_back(wolff(mu, x, r, beta, p));
        else if (kind == "p")
            vals.push_back(p_potential(mu, x, r,
                                       PParams{s.number_or("t", 2.0), s.number_or("delta", 1.0), s.number_or("m", 1.0),
                                               s.number_or("theta", 1.0)}));
        else
            throw UsageError("--kind must be riesz, wolff or p");
    }
    if (o.verbosity) err << kind << " potential at " << xs.size() << " points, radius " << fmt_real(r) << '\n';
    std::ostringstream os;
    write_potential_csv(os, xs, vals);
    emit(o.out, "potential.csv", os.str(), out);
    return kExitOk;
}

inline int run_lorentz(const Options& o, std::ostream& out, std::ostream&) {
    const IniDocument doc = read_config(o.config);
    const IniSection& s = doc.require("lorentz");
    const double t = o.t.value_or(s.number("t"));
    const double gamma = o.gamma.value_or(s.number("gamma"));
    std::vector<double> values = detail::parse_list(s.text("values"), "values");
    std::vector<double> weights = detail::parse_list(s.text_or("weights", ""), "weights");
    if (weights.empty()) weights.assign(values.size(), 1.0);
    if (weights.size() != values.size()) throw ValidationError("values and weights differ in length");
    emit(o.out, "lorentz.txt", fmt_real(lorentz_norm(values, weights, LorentzIndex{t, gamma})) + "\n", out);
    return kExitOk;
}

inline MinimizeOptions solver_from(const IniDocument& doc) {
    MinimizeOptions m;
    if (const auto* s = doc.first("solver")) {
        const std::string method = s->text_or("method", "newton");
        if (method == "newton")
            m.method = Method::DampedNewton;
        else if (method == "gradient")
            m.method = Method::PreconditionedGradient;
        else
            throw ParseError("solver method must be newton or gradient");
        m.tolerance = s->number_or("tolerance", m.tolerance);
        m.max_iter = s->integer_or("max_iter", m.max_iter);
    }
    return m;
}

inline int run_minimize(const Options& o, std::ostream& out, std::ostream& err) {
    const IniDocument doc = read_config(o.config);
    const Problem pr = problem_from(doc);
    const auto r = minimize(pr, solver_from(doc));
    std::ostringstream os;
    write_run_summary(os, pr.id, r);
    emit(o.out, "run_summary.csv", os.str(), out);
    if (!o.out.empty()) {
        std::ostringstream us;
        us << "x,y,u\n";
        for (int k = 0; k < pr.grid.nodes(); ++k) {
            const Vec2 x = pr.grid.node(k);
            us << fmt_real(x.x) << ',' << fmt_real(x.y) << ',' << fmt_real(r.u[k]) << '\n';
        }
        write_text_file((std::filesystem::path(o.out) / "solution.csv").string(), us.str());
    }
    if (!r.converged) err << "minimizer did not converge: residual " << fmt_real(r.residual_norm) << '\n';
    return r.converged ? kExitOk : kExitFailed;
}

inline int run_gap(const Options& o, std::ostream& out, std::ostream& err) {
    const IniDocument doc = read_config(o.config);
    const Problem pr = problem_from(doc);
    LavrentievOptions lo;
    if (const auto* s = doc.first("lavrentiev")) {
        lo.gap_tolerance = s->number_or("gap_tolerance", lo.gap_tolerance);
        lo.stabilization = s->number_or("stabilization", lo.stabilization);
        lo.extrapolate = s->flag_or("extrapolate", lo.extrapolate);
        if (const auto* radii = s->find("radii")) lo.radii = detail::parse_list(*radii, "radii");
    }
    const auto rep = lavrentiev_gap(pr, lo);
    std::ostringstream os;
    os << "problem_id,inf_broad,inf_smooth,gap,gap_positive,stabilized\n"
       << pr.id << ',' << fmt_real(rep.inf_broad) << ',' << fmt_real(rep.inf_smooth) << ',' << fmt_real(rep.gap) << ','
       << gap_flag_name(rep.gap_positive) << ',' << (rep.stabilized ? "true" : "false") << '\n';
    emit(o.out, "gap.csv", os.str(), out);
    if (o.verbosity)
        for (std::size_t i = 0; i < rep.radii.size(); ++i)
            err << "radius " << fmt_real(rep.radii[i]) << ": " << fmt_real(rep.values[i]) << '\n';
    return kExitOk;
}

inline int run_regime(const Options& o, std::ostream& out, std::ostream& err) {
    RegimeInput in;
    if (!o.config.empty()) {
        in = detail::regime_of(integrand_from(read_config(o.config)), o.bounded);
        in.n = o.n;
    } else {
        in.n = o.n;
        in.p = o.rp;
        in.q = o.rq;
        in.alpha = o.ralpha;
        in.bounded = o.bounded;
        in.family = parse_family(o.family);
    }
    const auto res = classify_regime(in);
    out << verdict_name(res.verdict) << '\n';
    if (o.verbosity) err << "boundx=" << (res.boundx ? "true" : "false") << '\n';
    return kExitOk;
}

inline int run_lemma(const Options& o, std::ostream& out, std::ostream& err) {
    const IniDocument doc = read_config(o.config);
    const IniSection& s = doc.require("lemma");
    const std::string name = s.text("name");
    const std::uint64_t seed = o.seed.value_or(std::uint64_t(s.number_or("seed", 1.0)));
    const int cases = s.integer_or("cases", 50);
    if (cases < 1) throw ValidationError("cases must be positive");
    std::vector<LemmaRow> rows;
    if (name == "revlem")
        rows = detail::lemma_rows_de_giorgi(seed, cases);
    else if (name == "lamoser")
        rows = detail::lemma_rows_moser(seed, cases);
    else if (name == "l5")
        rows = detail::lemma_rows_hole_filling(seed, cases);
    else if (name == "l4")
        rows = detail::lemma_rows_l4(seed, cases);
    else if (name == "crit")
        rows = detail::lemma_rows_crit(seed, cases);
    else
        throw ParseError("lemma name must be revlem, lamoser, l5, l4 or crit");
    std::ostringstream os;
    write_lemma_csv(os, rows);
    emit(o.out, "lemma_" + name + ".csv", os.str(), out);
    const auto bad = std::count_if(rows.begin(), rows.end(), [](const LemmaRow& r) { return !r.pass; });
    if (bad) err << bad << " of " << rows.size() << " cases violate the certified bound\n";
    return bad ? kExitFailed : kExitOk;
}

inline Scenario scenario_with_overrides(const std::string& path, const Options& o) {
    Scenario sc = scenario_from(read_config(path));
    if (o.seed) sc.seed = *o.seed;
    if (o.workers) sc.workers = *o.workers;
    return sc;
}

inline int finish_report(const std::vector<SweepRecord>& recs, const Options& o, std::ostream& err) {
    const std::string dir = o.out.empty() ? "." : o.out;
    const auto files = emit_report(recs, dir);
    const auto bad = failure_count(recs);
    if (o.verbosity)
        for (const auto& f : files) err << "wrote " << f << '\n';
    for (const auto& r : recs)
        if (!r.pass()) err << "FAILED " << r.scenario << ' ' << r.key << (r.note.empty() ? "" : ": " + r.note) << '\n';
    err << recs.size() << " records, " << bad << " failed\n";
    return bad ? kExitFailed : kExitOk;
}

inline int run_scenario_cmd(const Options& o, std::ostream&, std::ostream& err) {
    const Scenario sc = scenario_with_overrides(o.config, o);
    return finish_report(run_scenario(sc), o, err);
}

inline int run_report(const Options& o, std::ostream&, std::ostream& err) {
    const IniDocument doc = read_config(o.config);
    const std::string list = doc.require("report").text("scenarios");
    std::vector<SweepRecord> all;
    std::string item;
    std::istringstream is(list);
    while (std::getline(is, item, ';')) {
        item = Descriptor::trim(item);
        if (item.empty()) continue;
        const std::string path = relative_to(o.config, item).string();
        const Scenario sc = scenario_with_overrides(path, o);
        if (o.verbosity) err << "running " << sc.id << '\n';
        auto recs = run_scenario(sc);
        all.insert(all.end(), recs.begin(), recs.end());
    }
    return finish_report(all, o, err);
}

}  // namespace cli

// Parses the command line, runs one subcommand and returns its exit code.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    cli::Options o;
    CLI::App app{"Numerical experiments for nonuniformly elliptic variational problems", "nonunif_cli"};
    app.require_subcommand(1, 1);
    app.fallthrough();
    app.add_flag("-v,--verbose", o.verbosity, "Print diagnostics to standard error (repeat for more)");

    auto with_config = [&](CLI::App* sub, const std::string& what) {
        sub->add_option("-c,--config", o.config, what);
        sub->add_option("-o,--out", o.out, "Output directory; standard output when omitted");
    };

    auto* pot = app.add_subcommand("potential", "Truncated Riesz, Wolff or P potentials of an atomic measure");
    with_config(pot, "INI file with a [potential] section: kind, beta, p, radius, dimension, measure, points, t, delta, m, theta");
    pot->add_option("--kind", o.kind, "riesz (radial integral of mass/rho^(n-beta)), wolff (exponent 1/(p-1)) or p")
        ->check(CLI::IsMember({"riesz", "wolff", "p"}));
    pot->add_option("--beta", o.beta, "Order beta of the potential");
    pot->add_option("--p", o.p, "Growth exponent p of the Wolff potential");
    pot->add_option("--radius,-r", o.radius, "Truncation radius r");
    pot->add_option("--dim", o.dim, "Ambient dimension n entering the kernel");
    pot->add_option("--measure", o.measure, "Measure CSV with header kind,x,y,weight");
    pot->add_option("--point", o.points, "Evaluation point x,y (repeatable; several separated by ';')");

    auto* lor = app.add_subcommand("lorentz", "Lorentz quasinorm L(t,gamma) of a weighted sample");
    with_config(lor, "INI file with a [lorentz] section: t, gamma, values, weights");
    lor->add_option("--t", o.t, "Primary index t");
    lor->add_option("--gamma", o.gamma, "Secondary index gamma (inf for the weak space)");

    auto* mini = app.add_subcommand("minimize", "Minimize a Dirichlet energy on a square grid");
    with_config(mini, "INI file with [integrand], [problem] and optional [solver] sections");

    auto* gap = app.add_subcommand("gap", "Compare the broad and mollified infima of a Dirichlet energy");
    with_config(gap, "INI file with [integrand], [problem] and optional [lavrentiev] sections");

    auto* reg = app.add_subcommand("regime", "Classify exponents into Regular, Counterexample, RegularIfBounded or Open");
    reg->add_option("-c,--config", o.config, "INI file with an [integrand] section; replaces --p/--q/--alpha/--family");
    reg->add_option("--n", o.n, "Dimension n")->check(CLI::PositiveNumber);
    reg->add_option("--p", o.rp, "Lower growth exponent p");
    reg->add_option("--q", o.rq, "Upper growth exponent q");
    reg->add_option("--alpha", o.ralpha, "Hölder exponent alpha of the coefficient");
    reg->add_option("--family", o.family, "Integrand family name");
    reg->add_flag("--bounded", o.bounded, "Restrict to bounded minimizers");

    auto* lem = app.add_subcommand("lemma", "Check a quantitative lemma on synthetic inputs");
    with_config(lem, "INI file with a [lemma] section: name (revlem, lamoser, l5, l4, crit), cases, seed");
    lem->add_option("--seed", o.seed, "Seed overriding the config");

    auto* scn = app.add_subcommand("scenario", "Run one experiment scenario and write records.csv and plot data");
    with_config(scn, "Scenario INI file with [scenario] id, seed, mesh_levels, workers and [parameters]");
    scn->add_option("--seed", o.seed, "Seed overriding the config");
    scn->add_option("--workers", o.workers, "Worker threads (default NONUNIF_WORKERS or all cores)");

    auto* rep = app.add_subcommand("report", "Run several scenarios into one combined report");
    with_config(rep, "INI file with [report] scenarios = path; path (paths relative to this file)");
    rep->add_option("--seed", o.seed, "Seed overriding every scenario");
    rep->add_option("--workers", o.workers, "Worker threads (default NONUNIF_WORKERS or all cores)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        const auto subs = app.get_subcommands();
        out << (subs.empty() ? app.help() : subs.front()->help());
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n' << app.help();
        return kExitUsage;
    }

    CLI::App* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    try {
        if (name == "potential") return cli::run_potential(o, out, err);
        if (name == "lorentz") return cli::run_lorentz(o, out, err);
        if (name == "minimize") return cli::run_minimize(o, out, err);
        if (name == "gap") return cli::run_gap(o, out, err);
        if (name == "regime") return cli::run_regime(o, out, err);
        if (name == "lemma") return cli::run_lemma(o, out, err);
        if (name == "scenario") return cli::run_scenario_cmd(o, out, err);
        return cli::run_report(o, out, err);
    } catch (const cli::UsageError& e) {
        err << "error: " << e.what() << '\n' << sub->help();
        return kExitUsage;
    } catch (const ParseError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const ValidationError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const PreconditionError& e) {
        err << "invalid input: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailed;
    }
}

}  // namespace nonunif
