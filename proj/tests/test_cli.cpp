#include "fixtures.hpp"

#include "vconv/cli.hpp"
#include "vconv/io.hpp"
#include "vconv/polarization.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

using namespace vconv;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Workspace {
    fs::path dir;
    Workspace() {
        dir = fs::temp_directory_path() / ("vconv_cli_" + std::to_string(::getpid()));
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    ~Workspace() { fs::remove_all(dir); }
    Workspace(const Workspace&) = delete;
    Workspace& operator=(const Workspace&) = delete;

    std::string path(const std::string& name) const { return (dir / name).string(); }
    std::string write(const std::string& name, const io::Json& j) const {
        std::ofstream(dir / name) << j.dump();
        return path(name);
    }
    std::string write_text(const std::string& name, const std::string& text) const {
        std::ofstream(dir / name) << text;
        return path(name);
    }
    std::size_t file_count() const {
        return static_cast<std::size_t>(std::distance(fs::directory_iterator(dir), fs::directory_iterator{}));
    }
};

io::Json last_line(const std::string& text) {
    const auto end = text.find_last_not_of('\n');
    const auto start = text.rfind('\n', end);
    return io::Json::parse(text.substr(start == std::string::npos ? 0 : start + 1, end + 1));
}

std::vector<std::pair<std::string, double>> csv_rows(const std::string& text) {
    std::vector<std::pair<std::string, double>> rows;
    std::stringstream ss(text);
    std::string line;
    std::getline(ss, line);
    while (std::getline(ss, line)) {
        const auto comma = line.find(',');
        rows.emplace_back(line.substr(0, comma), std::stod(line.substr(comma + 1)));
    }
    return rows;
}

io::Json second_difference_json() {
    return io::Json{{"kind", "pairing"}, {"nodes", {{-1.0}, {0.0}, {1.0}}}, {"weights", {1.0, -2.0, 1.0}}};
}

} // namespace

TEST_CASE("cli transform") {
    Workspace ws;
    const auto d = GridDomain::cube(1, -2, 2, 81);
    const auto f = ws.write("f.json", io::to_json(fixture::quadratic(d)));

    SUBCASE("legendre of the self-conjugate quadratic") {
        const auto r = run({"transform", "--op", "legendre", "--in", f, "--out", ws.path("fs.json")});
        REQUIRE(r.code == 0);
        const auto report = last_line(r.out);
        CHECK(report["self_conjugacy_error"].get<double>() <= 2 * d.spacing(0));
        CHECK(report["config"]["op"] == "legendre");
        CHECK(report["config"].contains("dual_grid"));
        CHECK(io::load_grid_fn(ws.path("fs.json")).domain().dim() == 1);
    }
    SUBCASE("regularization keeps slope-bounded affine functions bit for bit") {
        const auto affine = add_affine(ExtGridFn::constant(d, 0.0), std::vector<double>{0.75}, 0.3);
        const auto in = ws.write("aff.json", io::to_json(affine));
        const auto r = run({"transform", "--op", "reg", "--r", "1.0", "--in", in, "--out", ws.path("reg.json")});
        REQUIRE(r.code == 0);
        CHECK(io::read_json(ws.path("reg.json"))["values"] == io::read_json(in)["values"]);
    }
    SUBCASE("missing input writes nothing") {
        const std::size_t before = ws.file_count();
        const auto r = run({"transform", "--op", "legendre", "--in", ws.path("absent.json"), "--out", ws.path("o.json")});
        CHECK(r.code == 2);
        CHECK_FALSE(fs::exists(ws.path("o.json")));
        CHECK(ws.file_count() == before);
    }
    SUBCASE("malformed grid values are parse errors") {
        auto j = io::to_json(fixture::quadratic(d));
        j["values"][3] = "nan";
        CHECK(run({"transform", "--op", "legendre", "--in", ws.write("nan.json", j), "--out", ws.path("o.json")}).code == 2);
        j["values"][3] = "-inf";
        CHECK(run({"transform", "--op", "legendre", "--in", ws.write("ninf.json", j), "--out", ws.path("o.json")}).code == 2);
        CHECK(run({"transform", "--op", "legendre", "--in", ws.write_text("junk.json", "{"), "--out", ws.path("o.json")})
                  .code == 2);
        CHECK_FALSE(fs::exists(ws.path("o.json")));
    }
    SUBCASE("unknown flags and ops are parse errors") {
        CHECK(run({"transform", "--op", "median", "--in", f, "--out", ws.path("o.json")}).code == 2);
        CHECK(run({"transform", "--frobnicate"}).code == 2);
        CHECK(run({}).code == 2);
    }
}

TEST_CASE("cli decompose") {
    Workspace ws;
    const auto d = GridDomain::cube(2, -2, 2, 41);
    const auto f = fixture::quadratic(d, 1.0, {0.2, -0.1});
    const auto f_path = ws.write("f.json", io::to_json(f));

    SUBCASE("constant valuation has a single degree-0 row") {
        const auto spec = ws.write("c.json", io::Json{{"kind", "constant"}, {"value", 3.0}});
        const auto r = run({"decompose", "--spec", spec, "--in", f_path});
        REQUIRE(r.code == 0);
        const auto rows = csv_rows(r.out);
        REQUIRE(rows.size() == 4);
        CHECK(rows[0].second == doctest::Approx(3.0).epsilon(1e-12));
        CHECK(std::abs(rows[1].second) <= 1e-12);
        CHECK(std::abs(rows[2].second) <= 1e-12);
        CHECK(rows[3].first == "residual_3");
    }
    SUBCASE("composite rows match separate evaluation") {
        const auto weight = ws.write("w.json", io::to_json(fixture::bump_weight(d, {0.0, 0.0}, 1.2)));
        ws.write("mu1.json", io::Json{{"kind", "pairing"},
                                      {"nodes", {{-1.0, 0.0}, {0.0, 0.0}, {1.0, 0.0}}},
                                      {"weights", {1.0, -2.0, 1.0}}});
        ws.write("ma.json", io::Json{{"kind", "hessian"}, {"k", 2}, {"weight", "w.json"}});
        const auto spec = ws.write(
            "comp.json",
            io::Json{{"kind", "composite"}, {"terms", {{1.0, {{"kind", "constant"}, {"value", 3.0}}}, {1.0, "mu1.json"}, {1.0, "ma.json"}}}});
        const auto r = run({"decompose", "--spec", spec, "--in", f_path, "--out", ws.path("comp.csv")});
        REQUIRE(r.code == 0);
        const auto rows = csv_rows(slurp(ws.path("comp.csv")));
        REQUIRE(rows.size() == 4);
        const double first = evaluate(io::load_valuation(ws.path("mu1.json")), f);
        const double second = evaluate(ValuationSpec::hessian(2, io::load_grid_fn(weight)), f);
        CHECK(rows[0].second == doctest::Approx(3.0).epsilon(1e-9));
        CHECK(rows[1].second == doctest::Approx(first).epsilon(1e-9));
        CHECK(rows[2].second == doctest::Approx(second).epsilon(1e-9));
        CHECK(std::abs(rows[3].second) <= 1e-8 * last_line(r.out)["scale"].get<double>());
    }
    SUBCASE("weights violating the mass condition are refused by name") {
        const auto spec = ws.write("bad.json", io::Json{{"kind", "pairing"},
                                                        {"nodes", {{-1.0, 0.0}, {0.0, 0.0}, {1.0, 0.0}}},
                                                        {"weights", {1.0, -2.0, 1.5}}});
        const auto r = run({"decompose", "--spec", spec, "--in", f_path});
        CHECK(r.code == 3);
        CHECK(r.err.find("sum w = 0") != std::string::npos);
        CHECK(run({"decompose", "--spec", spec, "--in", f_path, "--unchecked"}).code == 0);
    }
    SUBCASE("unknown valuation kinds are parse errors") {
        const auto spec = ws.write("odd.json", io::Json{{"kind", "area"}});
        CHECK(run({"decompose", "--spec", spec, "--in", f_path}).code == 2);
    }
}

TEST_CASE("cli polarize and embed") {
    Workspace ws;
    const auto d = GridDomain::cube(1, -2, 2, 81);
    const auto spec = ws.write("mu1.json", second_difference_json());
    const auto f = fixture::quadratic(d, 2.0);
    const auto r = run({"polarize", "--spec", spec, "--in", ws.write("f.json", io::to_json(f))});
    REQUIRE(r.code == 0);
    CHECK(last_line(r.out)["value"].get<double>() == evaluate(io::load_valuation(spec), f));

    const Polytope segment({{-1.0, 0.0}, {1.0, 0.5}});
    const auto body = ws.write("body.json", io::to_json(segment));
    const auto e = run({"embed", "--spec", spec, "--in", body, "--grid", "-2:2:81"});
    REQUIRE(e.code == 0);
    CHECK(last_line(e.out)["value"].get<double>() == embed_T(io::load_valuation(spec), segment, d));
}

TEST_CASE("cli gw, scan and seminorm") {
    Workspace ws;
    const auto mu1 = ws.write("mu1.json", second_difference_json());

    SUBCASE("diagonality on disjoint bumps") {
        const auto d = GridDomain::cube(2, -3, 3, 61);
        ws.write("w.json", io::to_json(fixture::bump_weight(d, {0.0, 0.0}, 2.8)));
        const auto ma = ws.write("ma.json", io::Json{{"kind", "hessian"}, {"k", 2}, {"weight", "w.json"}});
        const auto r = run({"gw", "--spec", ma, "--grid", "-3:3:61,-3:3:61", "--bump", "-2,0:0.5:1", "--bump",
                            "2,0:0.5:1", "--diagonal"});
        REQUIRE(r.code == 0);
        const auto report = last_line(r.out);
        CHECK(report["residual"].get<double>() <= 1e-8 * report["scale"].get<double>());
        CHECK(report["gw"].contains("value_half"));
        CHECK(report["config"]["bumps"].size() == 2);
    }
    SUBCASE("scan of the second difference covers its nodes") {
        const auto r = run({"scan", "--spec", mu1, "--grid", "-2:2:81", "--probe-radius", "0.25", "--out", ws.path("m.json")});
        REQUIRE(r.code == 0);
        const ScanMask m = io::load_mask(ws.path("m.json"));
        for (double node : {-1.0, 0.0, 1.0}) CHECK(m[m.domain().ravel(m.domain().nearest(std::vector<double>{node}))]);
        CHECK(m.components() == 3);
    }
    SUBCASE("seeded runs are byte-identical") {
        auto seminorm = [&](const std::string& out) {
            return run({"seminorm", "--spec", mu1, "--grid", "-3:3:121", "--box", "-1:1", "--s", "0.25", "--samples",
                        "12", "--seed", "7", "--out", out});
        };
        const auto a = seminorm(ws.path("a.json"));
        const std::string first = slurp(ws.path("a.json"));
        const auto b = seminorm(ws.path("a.json"));
        REQUIRE(a.code == 0);
        REQUIRE(b.code == 0);
        CHECK(a.out == b.out);
        CHECK(first == slurp(ws.path("a.json")));
        CHECK(last_line(a.out)["estimate"].get<double>() >= 2.0);
        CHECK(last_line(a.out)["config"]["seed"] == 7);

        auto scan = [&](const std::string& out) {
            return run({"scan", "--spec", mu1, "--grid", "-2:2:81", "--seed", "7", "--out", out}).out;
        };
        CHECK(scan(ws.path("s1.json")) != scan(ws.path("s2.json")));
        CHECK(slurp(ws.path("s1.json")) == slurp(ws.path("s2.json")));
    }
    SUBCASE("out-of-grid boxes are violations") {
        const auto r = run({"seminorm", "--spec", mu1, "--grid", "-3:3:121", "--box", "-1:1", "--s", "1.5", "--out",
                            ws.path("x.json")});
        CHECK(r.code == 3);
        CHECK_FALSE(fs::exists(ws.path("x.json")));
    }
}
