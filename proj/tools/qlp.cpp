// qlp: command-line front end for the mKdV pipeline, verification suites,
// spectra and formal asymptotics.
//
// Exit codes: 0 ok, 1 verification failure, 2 parse/usage error,
// 3 Miura gate failure, 4 numerical failure, 5 asymptotic obstruction.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "checks.hpp"
#include "json.hpp"
#include "qlpair/asymptotics.hpp"
#include "qlpair/error.hpp"
#include "qlpair/kdv.hpp"
#include "qlpair/miura.hpp"
#include "qlpair/spectral.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace qlp;

namespace {

enum Exit { kOk = 0, kVerifyFailed = 1, kUsage = 2, kGate = 3, kNumerical = 4, kObstruction = 5 };

int exit_code(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Parse:
        case ErrorKind::InvalidArgument:
            return kUsage;
        case ErrorKind::MiuraGate:
            return kGate;
        case ErrorKind::Obstruction:
            return kObstruction;
        default:
            return kNumerical;
    }
}

struct Outcome {
    int code = kOk;
    std::string message;
    json details = json::object();
};

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::InvalidArgument, "cannot open " + path.string() + " for writing");
    out << text;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

std::vector<double> parse_list(const std::string& text, const char* what) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw Error(ErrorKind::Parse, std::string(what) + ": `" + item + "` is not a number");
        }
    }
    if (out.empty()) throw Error(ErrorKind::Parse, std::string(what) + " is empty");
    return out;
}

/// key=value lines overriding the subcommand's flags; '#' starts a comment.
void apply_config(const std::string& path, CLI::App& sub) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Parse, "cannot open config " + path);
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        line = line.substr(0, line.find('#'));
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw Error(ErrorKind::Parse, path + ":" + std::to_string(number) + ": expected key=value");
        }
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r");
            const auto b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        CLI::Option* opt = key.empty() || key == "config" ? nullptr : sub.get_option_no_throw("--" + key);
        if (!opt) {
            throw Error(ErrorKind::Parse, path + ":" + std::to_string(number) + ": unknown key `" + key + "` for " +
                                              sub.get_name());
        }
        opt->clear();
        opt->add_result(value);
        opt->run_callback();
    }
}

// ---------------------------------------------------------------------------
// solve-mkdv

struct SolveArgs {
    std::string r0;
    std::string q = "auto";
    double xmin = -10, xmax = 10, tmax = 0.5;
    int nx = 2001, nt = 501;
    double gate_tol = 1e-6;
};

struct InitialR {
    std::string kind;
    Profile profile{[](double) { return 0.0; }};
    std::optional<Slice> samples;
};

InitialR parse_r0(const std::string& text) {
    InitialR out;
    if (text.rfind("csv:", 0) == 0) {
        std::string path = text.substr(4);
        if (path.rfind("file=", 0) == 0) path = path.substr(5);
        out.kind = "csv";
        out.samples = read_slice_csv(path);
        out.profile = Profile(*out.samples);
        return out;
    }
    const SpecNode node = parse_spec(text);
    if (node.inner) throw Error(ErrorKind::Parse, "r0 presets take no inner spec");
    out.kind = node.name;
    if (node.name == "kink") {
        node.require_keys({});
        out.profile = Profile([](double x) { return -std::tanh(x); });
    } else if (node.name == "const") {
        node.require_keys({"c"});
        const double c = node.number("c");
        out.profile = Profile([c](double) { return c; });
    } else if (node.name == "zero") {
        node.require_keys({});
    } else {
        throw Error(ErrorKind::Parse, "unknown r0 preset `" + node.name + "` (kink, const:c=.., zero, csv:file)");
    }
    return out;
}

Axis auto_axis(const SolveArgs& a) {
    // power-of-two axis twice as wide as the output window
    const double width = a.xmax - a.xmin;
    int n = 1;
    while (n < 2 * (a.nx - 1)) n *= 2;
    return Axis{a.xmin - width / 2, 2 * width / n, n};
}

Outcome solve_mkdv(const SolveArgs& a, const fs::path& out_dir) {
    if (a.r0.empty()) throw Error(ErrorKind::Parse, "--r0 is required");
    if (!(a.xmax > a.xmin) || a.nx < 2 || a.nt < 2 || !(a.tmax > 0)) {
        throw Error(ErrorKind::InvalidArgument, "need xmax > xmin, nx >= 2, nt >= 2 and tmax > 0");
    }
    const InitialR r0 = parse_r0(a.r0);
    PipelineOptions opt;
    opt.gate_tol = a.gate_tol;
    const Grid grid(a.xmin, a.xmax, a.nx, 0.0, a.tmax, a.nt);

    PipelineResult res = [&] {
        if (a.q != "auto") return invert_miura_flow(r0.profile, KdvSolution::from_spec(parse_kdv_spec(a.q), &grid), grid, opt);
        const Slice r_samples = r0.samples ? *r0.samples : r0.profile.on(auto_axis(a));
        const SampledField q = solve_numeric(miura_map(r_samples), a.tmax, a.nt);
        return invert_miura_flow(r_samples, q, grid.x(), opt);
    }();

    write_csv(res.r, (out_dir / "r.csv").string());
    write_json(out_dir / "psi_diag.json", to_json(res.diagnostics));
    Outcome o;
    o.message = "ok";
    o.details["diagnostics"] = to_json(res.diagnostics);
    return o;
}

// ---------------------------------------------------------------------------
// verify

Outcome verify(const std::string& name, std::uint64_t seed) {
    const auto ids = checks::suite(name);
    if (ids.empty()) {
        std::string names;
        for (const auto& n : checks::suite_names()) names += (names.empty() ? "" : ", ") + n;
        throw Error(ErrorKind::Parse, "unknown suite `" + name + "` (" + names + ")");
    }
    checks::Context ctx(seed);
    Outcome o;
    json groups = json::array();
    std::vector<std::string> failing;
    for (const auto& spec : checks::groups()) {
        if (std::find(ids.begin(), ids.end(), spec.id) == ids.end()) continue;
        const checks::Group g = checks::run_group(spec, ctx);
        groups.push_back(checks::to_json(g));
        std::printf("%s %-16s %s\n", g.pass() ? "PASS" : "FAIL", g.id.c_str(), g.title.c_str());
        for (const auto& c : g.checks) {
            if (!c.pass) {
                failing.push_back(g.id + ": " + c.name);
                std::printf("     failed: %s", c.name.c_str());
                if (c.relation != "holds") std::printf(" (%.6g %s %.6g)", c.value, c.relation.c_str(), c.bound);
                if (!c.note.empty()) std::printf(" [%s]", c.note.c_str());
                std::printf("\n");
            }
        }
        std::fflush(stdout);
    }
    o.details["suite"] = name;
    o.details["seed"] = seed;
    o.details["groups"] = groups;
    o.details["failing"] = failing;
    o.code = failing.empty() ? kOk : kVerifyFailed;
    o.message = failing.empty() ? "all checks passed" : "failed: " + failing.front();
    return o;
}

// ---------------------------------------------------------------------------
// spectrum

struct SpectrumArgs {
    std::string q;
    std::string times = "0,0.25,0.5";
    std::string window = "-5,0";
    double xmin = -30, xmax = 30;
    int nx = 2000;
    int nt = 101;  // time levels of the numeric solve
    double tol = 1e-12, pair_tol = 1e-5;
};

Outcome spectrum(const SpectrumArgs& a, const fs::path& out_dir) {
    if (a.q.empty()) throw Error(ErrorKind::Parse, "--q is required");
    const auto times = parse_list(a.times, "--times");
    const auto w = parse_list(a.window, "--window");
    if (w.size() != 2 || !(w[1] > w[0])) throw Error(ErrorKind::Parse, "--window needs lo,hi with lo < hi");
    if (a.nx < 3 || !(a.xmax > a.xmin)) throw Error(ErrorKind::InvalidArgument, "need nx >= 3 and xmax > xmin");
    for (double t : times) {
        if (!(t >= 0)) throw Error(ErrorKind::InvalidArgument, "times must be non-negative");
    }
    const KdvSpec spec = parse_kdv_spec(a.q);
    const double t_end = std::max(*std::max_element(times.begin(), times.end()), 1e-12);
    const Axis x{a.xmin, (a.xmax - a.xmin) / (a.nx - 1), a.nx};
    std::optional<Grid> numeric_grid;
    if (spec.kind == KdvSpec::Kind::Numeric) numeric_grid.emplace(spec.q0->axis, Axis{0.0, t_end / (a.nt - 1), a.nt});
    const KdvSolution sol = KdvSolution::from_spec(spec, numeric_grid ? &*numeric_grid : nullptr);
    SpectrumOptions opt;
    opt.tol = a.tol;
    opt.pair_tol = a.pair_tol;
    const SpectrumReport rep = spectrum_invariance(sol, x, times, Window{w[0], w[1]}, opt);
    write_json(out_dir / "spectrum.json", to_json(rep));
    Outcome o;
    o.details["spectrum"] = to_json(rep);
    o.code = rep.paired && rep.multiplicities_agree ? kOk : kVerifyFailed;
    o.message = rep.message.empty() ? "ok" : rep.message;
    return o;
}

// ---------------------------------------------------------------------------
// asymptotics

struct AsymptoticsArgs {
    std::string symbol_file;
    double tmax = 1.0;
    int nt = 100;
};

Outcome asymptotics(const AsymptoticsArgs& a, const fs::path& out_dir) {
    if (a.symbol_file.empty()) throw Error(ErrorKind::Parse, "--r0-symbol is required");
    // q(t) is interpolated in time with a 6-point stencil
    if (a.nt < 6 || !(a.tmax > 0)) throw Error(ErrorKind::InvalidArgument, "need nt >= 6 and tmax > 0");
    std::ifstream in(a.symbol_file);
    if (!in) throw Error(ErrorKind::Parse, "cannot open " + a.symbol_file);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Parse, a.symbol_file + ": " + e.what());
    }
    const Symbol r0 = symbol_from_json(j);
    const GateResult gate = beta_gate(r0);
    if (!gate.pass) throw Error(ErrorKind::Obstruction, gate.message);

    const Axis times{0.0, a.tmax / (a.nt - 1), a.nt};
    const Symbol q = kdv_symbol_flow(miura_symbol(r0), times);
    const StarSymbol p = formal_evolution(integrate_symbol(r0), q, times);

    std::ostringstream csv;
    csv << "t,k,a_k\n";
    for (int i = 0; i < times.size; ++i) {
        const std::string t = format_double(times.at(i));
        for (std::size_t k = 0; k < p.powers.terms.size(); ++k) {
            csv << t << ',' << k << ',' << format_double(p.powers.coeff(k, times.at(i))) << '\n';
        }
    }
    write_text(out_dir / "coefficients.csv", csv.str());

    Outcome o;
    o.message = "ok";
    json exps = json::array();
    for (const auto& term : p.powers.terms) exps.push_back(to_string(term.exponent));
    o.details["exponents"] = exps;
    o.details["beta"] = gate.beta ? json(to_string(*gate.beta)) : json(nullptr);
    o.details["log_coefficient_end"] = p.log_at(a.tmax);
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"qlp: recover mKdV solutions from KdV flows through the Miura map, and verify the construction"};
    app.require_subcommand(1);
    app.fallthrough();
    std::string config;
    std::string out = ".";
    app.add_option("--config", config, "key=value file overriding the subcommand's flags");

    SolveArgs solve;
    auto* s = app.add_subcommand("solve-mkdv", "transport psi under the KdV flow and write r = psi_x / psi");
    s->add_option("--r0", solve.r0, "initial r: kink, const:c=<v>, zero or csv:<file>");
    s->add_option("--q", solve.q, "KdV solution spec, or auto for a numeric solve from the Miura image of r0")
        ->capture_default_str();
    s->add_option("--xmin", solve.xmin)->capture_default_str();
    s->add_option("--xmax", solve.xmax)->capture_default_str();
    s->add_option("--nx", solve.nx)->capture_default_str();
    s->add_option("--tmax", solve.tmax)->capture_default_str();
    s->add_option("--nt", solve.nt)->capture_default_str();
    s->add_option("--gate-tol", solve.gate_tol, "tolerance of the Miura consistency gate")->capture_default_str();

    std::string suite;
    std::uint64_t seed = 20240611;
    auto* v = app.add_subcommand("verify", "run a verification suite and write report.json");
    v->add_option("--suite", suite, "commutator, wronskian, spectrum, impedance, asymptotics, characteristics or all");
    v->add_option("--seed", seed, "seed of the randomized batteries")->capture_default_str();

    SpectrumArgs spec;
    auto* sp = app.add_subcommand("spectrum", "eigenvalues of -d^2/dx^2 + q(t) in a window at several times");
    sp->add_option("--q", spec.q, "KdV solution spec");
    sp->add_option("--times", spec.times)->capture_default_str();
    sp->add_option("--window", spec.window, "lo,hi")->capture_default_str();
    sp->add_option("--xmin", spec.xmin)->capture_default_str();
    sp->add_option("--xmax", spec.xmax)->capture_default_str();
    sp->add_option("--nx", spec.nx)->capture_default_str();
    sp->add_option("--nt", spec.nt, "time levels of a numeric KdV solve")->capture_default_str();
    sp->add_option("--tol", spec.tol, "bisection tolerance")->capture_default_str();
    sp->add_option("--pair-tol", spec.pair_tol, "pairing tolerance across times")->capture_default_str();

    AsymptoticsArgs asym;
    auto* as = app.add_subcommand("asymptotics", "formal evolution of the asymptotic expansion of psi");
    as->add_option("--r0-symbol", asym.symbol_file, "symbol JSON of r0");
    as->add_option("--tmax", asym.tmax)->capture_default_str();
    as->add_option("--nt", asym.nt)->capture_default_str();

    for (CLI::App* sub : {s, v, sp, as}) {
        sub->add_option("--out", out, "output directory (created if missing)")->capture_default_str();
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    CLI::App* chosen = app.get_subcommands().front();
    json report{{"command", chosen->get_name()}};
    Outcome outcome;
    try {
        if (!config.empty()) apply_config(config, *chosen);
        fs::create_directories(out);
        json cfg = json::object();
        for (const CLI::Option* opt : chosen->get_options()) {
            if (opt->get_name() == "--help" || opt->get_name().empty()) continue;
            cfg[opt->get_name().substr(2)] = opt->as<std::string>();
        }
        report["config"] = cfg;
        if (chosen == s) outcome = solve_mkdv(solve, out);
        if (chosen == v) outcome = verify(suite, seed);
        if (chosen == sp) outcome = spectrum(spec, out);
        if (chosen == as) outcome = asymptotics(asym, out);
    } catch (const Error& e) {
        outcome.code = exit_code(e.kind());
        outcome.message = e.what();
        report["error_kind"] = to_string(e.kind());
    } catch (const CLI::ParseError& e) {
        outcome.code = kUsage;
        outcome.message = e.what();
    } catch (const std::exception& e) {
        outcome.code = kNumerical;
        outcome.message = e.what();
    }
    report["exit_code"] = outcome.code;
    report["status"] = outcome.code == kOk ? "ok" : "failed";
    report["message"] = outcome.message;
    for (auto& [key, value] : outcome.details.items()) report[key] = value;
    try {
        fs::create_directories(out);
        write_json(fs::path(out) / "report.json", report);
    } catch (const std::exception& e) {
        std::cerr << "qlp: could not write report.json: " << e.what() << "\n";
    }
    if (outcome.code != kOk) std::cerr << "qlp: " << outcome.message << "\n";
    return outcome.code;
}
