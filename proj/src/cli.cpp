#include "vconv/cli.hpp"

#include "vconv/convex_core.hpp"
#include "vconv/error.hpp"
#include "vconv/io.hpp"
#include "vconv/polarization.hpp"
#include "vconv/valuation.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <ostream>
#include <sstream>

namespace vconv {

namespace {

using io::Json;

constexpr int kExitParse = 2;
constexpr int kExitViolation = 3;

struct Common {
    std::vector<std::string> in;
    std::string spec;
    std::string out;
    std::uint64_t seed = 0;
    std::optional<double> tol;
    std::string grid;
    bool unchecked = false;
};

struct Params {
    std::string op;
    double r = 1.0;
    double R = 1.0;
    std::string dual_grid;
    std::vector<std::string> bumps;
    double step = 0.0;
    bool diagonal = false;
    std::optional<std::size_t> k;
    double probe_radius = 0.5;
    std::string box;
    double s = 0.25;
    std::size_t samples = 32;
};

std::string kind_name(ErrorKind k) {
    switch (k) {
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Precondition: return "precondition";
    case ErrorKind::DomainExceeded: return "domain_exceeded";
    case ErrorKind::ConvexityViolation: return "convexity_violation";
    case ErrorKind::IllConditioned: return "ill_conditioned";
    }
    return "unknown";
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

Json common_config(const std::string& command, const Common& c) {
    Json j{{"command", command}, {"in", c.in}, {"seed", c.seed}};
    if (!c.spec.empty()) j["spec"] = c.spec;
    if (!c.out.empty()) j["out"] = c.out;
    if (!c.grid.empty()) j["grid"] = io::to_json(io::parse_grid(c.grid));
    j["unchecked"] = c.unchecked;
    return j;
}

// c1,..,cn:radius:amplitude
Bump parse_bump(const std::string& text) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ':')) parts.push_back(part);
    if (parts.size() != 3) fail(ErrorKind::Parse, "bump \"" + text + "\" is not c1,..,cn:radius:amplitude");
    auto number = [&](const std::string& s) {
        try {
            std::size_t used = 0;
            const double v = std::stod(s, &used);
            if (used != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
            return v;
        } catch (const std::logic_error&) {
            fail(ErrorKind::Parse, "bump \"" + text + "\" has a malformed number \"" + s + "\"");
        }
    };
    Bump b;
    std::stringstream cs(parts[0]);
    while (std::getline(cs, part, ',')) b.center.push_back(number(part));
    b.radius = number(parts[1]);
    b.amplitude = number(parts[2]);
    return b;
}

Json bump_json(const Bump& b) { return Json{{"center", b.center}, {"radius", b.radius}, {"amplitude", b.amplitude}}; }

// lo:hi per axis, comma separated.
std::pair<Point, Point> parse_box(const std::string& text) {
    Point lo, hi;
    std::stringstream axes(text);
    std::string axis;
    while (std::getline(axes, axis, ',')) {
        const auto colon = axis.find(':');
        if (colon == std::string::npos) fail(ErrorKind::Parse, "box axis \"" + axis + "\" is not lo:hi");
        try {
            lo.push_back(std::stod(axis.substr(0, colon)));
            hi.push_back(std::stod(axis.substr(colon + 1)));
        } catch (const std::logic_error&) {
            fail(ErrorKind::Parse, "box axis \"" + axis + "\" is not lo:hi");
        }
    }
    if (lo.empty()) fail(ErrorKind::Parse, "empty box");
    return {lo, hi};
}

void emit(std::ostream& out, const Common& c, const Json& report, bool report_is_output) {
    const std::string line = report.dump();
    if (report_is_output && !c.out.empty()) io::write_atomic(c.out, line + '\n');
    out << line << '\n';
}

const ExtGridFn& single_input(const std::vector<ExtGridFn>& fs) {
    require(fs.size() == 1, "exactly one --in file is required", ErrorKind::Parse);
    return fs.front();
}

int cmd_transform(const Common& c, const Params& p, std::ostream& out) {
    const std::vector<ExtGridFn> inputs = [&] {
        std::vector<ExtGridFn> v;
        for (const auto& path : c.in) v.push_back(io::load_grid_fn(path));
        return v;
    }();
    const ExtGridFn& f = single_input(inputs);
    require(!c.out.empty(), "--out is required", ErrorKind::Parse);
    const double tol = c.tol.value_or(kDefaultConvexTol);

    Json config = common_config("transform", c);
    config["op"] = p.op;
    config["tol"] = tol;
    Json report{{"config", Json()}, {"input_convex", is_discretely_convex(f, tol)}};

    std::optional<ExtGridFn> result;
    if (p.op == "legendre") {
        const GridDomain dual = p.dual_grid.empty() ? default_dual_domain(f) : io::parse_grid(p.dual_grid);
        config["dual_grid"] = io::to_json(dual);
        result = legendre(f, dual);
        double err = 0.0;
        const GridDomain& d = f.domain();
        for (std::size_t i = 0; i < dual.size(); ++i) {
            const Point y = dual.point(i);
            if (!d.contains(y, 0.0) || !result->finite_at(i)) continue;
            const auto corners = f.interpolation_footprint(y);
            if (std::any_of(corners.begin(), corners.end(), [&](std::size_t k) { return !f.finite_at(k); })) continue;
            err = std::max(err, std::abs((*result)[i] - f.interpolate(y)));
        }
        report["self_conjugacy_error"] = err;
    } else if (p.op == "reg") {
        config["r"] = p.r;
        result = lipschitz_regularize(f, p.r);
        double err = 0.0;
        for (std::size_t i = 0; i < f.size(); ++i)
            if (f.finite_at(i) && result->finite_at(i)) err = std::max(err, std::abs((*result)[i] - f[i]));
        report["sup_error"] = err;
    } else if (p.op == "reconstruct") {
        config["R"] = p.R;
        result = reconstruct_from_conjugate(f, p.R);
        double err = 0.0;
        for (std::size_t i = 0; i < f.size(); ++i)
            if (norm(f.domain().point(i)) <= p.R + 1.0 && f.finite_at(i) && result->finite_at(i))
                err = std::max(err, std::abs((*result)[i] - f[i]));
        report["sup_error_ball"] = err;
    } else {
        fail(ErrorKind::Parse, "unknown op \"" + p.op + "\"");
    }
    report["biconjugate_gap"] = biconjugate_gap(f);
    report["config"] = std::move(config);
    io::write_atomic(c.out, io::to_json(*result).dump() + '\n');
    emit(out, c, report, false);
    return 0;
}

int cmd_decompose(const Common& c, std::ostream& out) {
    require(!c.spec.empty(), "--spec is required", ErrorKind::Parse);
    const ValuationSpec mu = io::load_valuation(c.spec, !c.unchecked);
    std::vector<ExtGridFn> inputs;
    for (const auto& path : c.in) inputs.push_back(io::load_grid_fn(path));
    const ExtGridFn& f = single_input(inputs);
    const std::size_t n = f.domain().dim();

    const HomogeneousComponents h = homogeneous_decompose(mu, f, n);
    std::string csv = "degree,value\n";
    for (std::size_t i = 0; i <= n; ++i) csv += std::to_string(i) + "," + format_double(h.components[i]) + "\n";
    csv += "residual_" + std::to_string(n + 1) + "," + format_double(h.residual) + "\n";

    if (c.out.empty()) {
        out << csv;
        return 0;
    }
    io::write_atomic(c.out, csv);
    Json report{{"config", common_config("decompose", c)},
                {"components", h.components},
                {"residual", h.residual},
                {"scale", h.scale}};
    emit(out, c, report, false);
    return 0;
}

int cmd_polarize(const Common& c, std::ostream& out) {
    require(!c.spec.empty(), "--spec is required", ErrorKind::Parse);
    const ValuationSpec mu = io::load_valuation(c.spec, !c.unchecked);
    std::vector<ExtGridFn> fs;
    for (const auto& path : c.in) fs.push_back(io::load_grid_fn(path));
    require(!fs.empty(), "at least one --in file is required", ErrorKind::Parse);

    Json config = common_config("polarize", c);
    config["k"] = fs.size();
    const double value = polarize(mu, fs.size(), fs);
    emit(out, c, Json{{"config", config}, {"value", value}}, true);
    return 0;
}

Json gw_json(const GWResult& r) {
    return Json{{"value", r.value},         {"value_half", r.value_half}, {"step", r.step},
                {"step_half", r.step / 2}, {"agreement", r.agreement},   {"noise", r.noise},
                {"halvings", r.halvings}};
}

int cmd_gw(const Common& c, const Params& p, std::ostream& out) {
    require(!c.spec.empty(), "--spec is required", ErrorKind::Parse);
    require(!c.grid.empty(), "--grid is required", ErrorKind::Parse);
    const ValuationSpec mu = io::load_valuation(c.spec, !c.unchecked);
    const GridDomain domain = io::parse_grid(c.grid);

    std::vector<TestFunction> tests;
    Json bumps = Json::array();
    for (const auto& text : p.bumps) {
        Bump b = parse_bump(text);
        bumps.push_back(bump_json(b));
        tests.emplace_back(std::move(b));
    }
    for (const auto& path : c.in) tests.emplace_back(io::load_grid_fn(path));
    require(!tests.empty(), "at least one --bump or --in test function is required", ErrorKind::Parse);

    Json config = common_config("gw", c);
    config["bumps"] = bumps;
    config["step"] = p.step;
    config["diagonal"] = p.diagonal;
    config["k"] = tests.size();

    Json report{{"config", config}};
    if (p.diagonal) {
        const DiagonalityReport d = diagonality_residual(mu, tests, domain);
        report["gw"] = gw_json(d.gw);
        report["residual"] = d.residual;
        report["scale"] = d.scale;
    } else {
        report["gw"] = gw_json(gw_eval(mu, GWQuery::standard(domain, tests, p.step)));
    }
    emit(out, c, report, true);
    return 0;
}

int cmd_scan(const Common& c, const Params& p, std::ostream& out) {
    require(!c.spec.empty(), "--spec is required", ErrorKind::Parse);
    require(!c.grid.empty(), "--grid is required", ErrorKind::Parse);
    require(!c.out.empty(), "--out is required", ErrorKind::Parse);
    const ValuationSpec mu = io::load_valuation(c.spec, !c.unchecked);
    const GridDomain domain = io::parse_grid(c.grid);

    std::size_t k = 0;
    if (p.k) k = *p.k;
    else if (const auto deg = mu.degree()) k = *deg;
    else fail(ErrorKind::Precondition, "valuation is not homogeneous; pass --k");

    const ScanOptions options{p.probe_radius, c.tol.value_or(1e-6)};
    const ScanResult scan = support_scan(mu, k, domain, options);

    Json config = common_config("scan", c);
    config["k"] = k;
    config["probe_radius"] = options.probe_radius;
    config["tol"] = options.tol;
    double peak = 0.0;
    for (double v : scan.response) peak = std::max(peak, std::abs(v));

    io::write_atomic(c.out, io::to_json(scan.mask).dump() + '\n');
    emit(out, c,
         Json{{"config", config},
              {"marked", scan.mask.count()},
              {"components", scan.mask.components()},
              {"peak_response", peak}},
         false);
    return 0;
}

int cmd_seminorm(const Common& c, const Params& p, std::ostream& out) {
    require(!c.spec.empty(), "--spec is required", ErrorKind::Parse);
    require(!c.grid.empty(), "--grid is required", ErrorKind::Parse);
    require(!p.box.empty(), "--box is required", ErrorKind::Parse);
    const ValuationSpec mu = io::load_valuation(c.spec, !c.unchecked);
    const GridDomain domain = io::parse_grid(c.grid);
    const auto [lo, hi] = parse_box(p.box);

    Json config = common_config("seminorm", c);
    config["box"] = Json{{"lo", lo}, {"hi", hi}};
    config["s"] = p.s;
    config["samples"] = p.samples;

    const SeminormResult r = seminorm_estimate(mu, domain, lo, hi, p.s, p.samples, c.seed);
    emit(out, c,
         Json{{"config", config},
              {"estimate", r.estimate},
              {"best_sample", r.best_sample},
              {"samples", r.samples}},
         true);
    return 0;
}

int cmd_embed(const Common& c, std::ostream& out) {
    require(!c.spec.empty(), "--spec is required", ErrorKind::Parse);
    require(!c.grid.empty(), "--grid is required", ErrorKind::Parse);
    require(c.in.size() == 1, "exactly one --in polytope file is required", ErrorKind::Parse);
    const ValuationSpec mu = io::load_valuation(c.spec, !c.unchecked);
    const Polytope body = io::load_polytope(c.in.front());
    const GridDomain domain = io::parse_grid(c.grid);

    Json config = common_config("embed", c);
    config["vertices"] = body.vertices();
    const double value = embed_T(mu, body, domain);
    emit(out, c, Json{{"config", config}, {"value", value}}, true);
    return 0;
}

void add_common(CLI::App* sub, Common& c, bool needs_spec) {
    sub->add_option("--in", c.in, "Input file (repeatable)");
    if (needs_spec) sub->add_option("--spec", c.spec, "Valuation spec file");
    sub->add_option("--out", c.out, "Output file");
    sub->add_option("--seed", c.seed, "Random seed")->capture_default_str();
    sub->add_option("--tol", c.tol, "Tolerance");
    sub->add_option("--grid", c.grid, "Grid as lo:hi:points per axis, comma separated");
    if (needs_spec) sub->add_flag("--unchecked", c.unchecked, "Accept pairings violating the weight conditions");
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Valuations on grid-sampled convex functions"};
    app.require_subcommand(1);
    Common c;
    Params p;

    auto* transform = app.add_subcommand("transform", "Legendre transform, Lipschitz regularization or reconstruction");
    add_common(transform, c, false);
    transform->add_option("--op", p.op, "legendre | reg | reconstruct")
        ->required()
        ->check(CLI::IsMember({"legendre", "reg", "reconstruct"}));
    transform->add_option("--r", p.r, "Slope bound for reg")->capture_default_str();
    transform->add_option("--R", p.R, "Ball radius for reconstruct")->capture_default_str();
    transform->add_option("--dual-grid", p.dual_grid, "Dual grid for legendre");

    auto* decompose = app.add_subcommand("decompose", "Homogeneous components of a valuation at a probe function");
    add_common(decompose, c, true);

    auto* polar = app.add_subcommand("polarize", "Polarization at the --in functions");
    add_common(polar, c, true);

    auto* gw = app.add_subcommand("gw", "Goodey-Weil distribution on test functions");
    add_common(gw, c, true);
    gw->add_option("--bump", p.bumps, "Bump test function c1,..,cn:radius:amplitude (repeatable)");
    gw->add_option("--step", p.step, "Fixed step, 0 for automatic")->capture_default_str();
    gw->add_flag("--diagonal", p.diagonal, "Report the diagonality residual for disjoint tests");

    auto* scan = app.add_subcommand("scan", "Support scan with bump probes");
    add_common(scan, c, true);
    scan->add_option("--k", p.k, "Homogeneity degree (defaults to the valuation's degree)");
    scan->add_option("--probe-radius", p.probe_radius, "Probe bump radius")->capture_default_str();

    auto* seminorm = app.add_subcommand("seminorm", "Sampled lower bound for the semi-norm on a box");
    add_common(seminorm, c, true);
    seminorm->add_option("--box", p.box, "Box A as lo:hi per axis, comma separated");
    seminorm->add_option("--s", p.s, "Margin")->capture_default_str();
    seminorm->add_option("--samples", p.samples, "Number of sampled functions")->capture_default_str();

    auto* embed = app.add_subcommand("embed", "Valuation on the support function of a polytope");
    add_common(embed, c, true);

    auto report_error = [&](const std::string& kind, const std::string& message) {
        err << Json{{"level", "error"}, {"kind", kind}, {"message", message}}.dump() << '\n';
    };

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        report_error("parse", e.what());
        return kExitParse;
    }

    try {
        if (*transform) return cmd_transform(c, p, out);
        if (*decompose) return cmd_decompose(c, out);
        if (*polar) return cmd_polarize(c, out);
        if (*gw) return cmd_gw(c, p, out);
        if (*scan) return cmd_scan(c, p, out);
        if (*seminorm) return cmd_seminorm(c, p, out);
        if (*embed) return cmd_embed(c, out);
    } catch (const Error& e) {
        report_error(kind_name(e.kind()), e.what());
        return e.kind() == ErrorKind::Parse ? kExitParse : kExitViolation;
    } catch (const io::Json::exception& e) {
        report_error("parse", e.what());
        return kExitParse;
    } catch (const std::exception& e) {
        report_error("internal", e.what());
        return kExitViolation;
    }
    return kExitParse;
}

} // namespace vconv
