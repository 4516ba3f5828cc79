#include "vconv/io.hpp"

#include "vconv/error.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>
#include <unistd.h>

namespace vconv::io {

namespace {

[[noreturn]] void parse_fail(const std::string& what) { fail(ErrorKind::Parse, what); }

const Json& field(const Json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) parse_fail(std::string("missing field \"") + key + "\"");
    return j.at(key);
}

double finite_number(const Json& v, const std::string& what) {
    if (!v.is_number()) parse_fail(what + " must be a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) parse_fail(what + " must be finite");
    return x;
}

std::vector<double> number_list(const Json& v, const std::string& what) {
    if (!v.is_array()) parse_fail(what + " must be an array");
    std::vector<double> out;
    out.reserve(v.size());
    for (const Json& x : v) out.push_back(finite_number(x, what));
    return out;
}

Matrix matrix_from_json(const Json& v) {
    if (!v.is_array() || v.empty()) parse_fail("matrix must be a nonempty array of rows");
    const auto n = static_cast<Eigen::Index>(v.size());
    Matrix m(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto row = number_list(v[static_cast<std::size_t>(i)], "matrix entry");
        if (static_cast<Eigen::Index>(row.size()) != n) parse_fail("matrix must be square");
        for (Eigen::Index k = 0; k < n; ++k) m(i, k) = row[static_cast<std::size_t>(k)];
    }
    return m;
}

// A constant matrix, or a file / object {"domain":{...},"values":[matrix per cell]}.
MatrixField matrix_field_from_json(const Json& v, const std::filesystem::path& base_dir) {
    if (v.is_string()) return matrix_field_from_json(read_json(base_dir / v.get<std::string>()), base_dir);
    if (v.is_array()) return MatrixField(matrix_from_json(v));
    const GridDomain d = domain_from_json(field(v, "domain"));
    const Json& vals = field(v, "values");
    if (!vals.is_array()) parse_fail("matrix field values must be an array");
    std::vector<Matrix> per_cell;
    per_cell.reserve(vals.size());
    for (const Json& m : vals) per_cell.push_back(matrix_from_json(m));
    return MatrixField(d, std::move(per_cell));
}

ExtGridFn grid_fn_ref(const Json& v, const std::filesystem::path& base_dir) {
    if (v.is_string()) return load_grid_fn(base_dir / v.get<std::string>());
    return grid_fn_from_json(v);
}

template <class F>
auto guarded(const std::filesystem::path& path, F&& fn) {
    try {
        return fn();
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::Parse) parse_fail(path.string() + ": " + e.what());
        throw;
    } catch (const Json::exception& e) {
        parse_fail(path.string() + ": " + e.what());
    }
}

} // namespace

Json to_json(const GridDomain& domain) {
    return Json{{"lo", domain.lo()}, {"hi", domain.hi()}, {"shape", domain.shape()}};
}

GridDomain domain_from_json(const Json& j) {
    const auto lo = number_list(field(j, "lo"), "domain lo");
    const auto hi = number_list(field(j, "hi"), "domain hi");
    const Json& shape_j = field(j, "shape");
    if (!shape_j.is_array()) parse_fail("domain shape must be an array");
    std::vector<std::size_t> shape;
    for (const Json& s : shape_j) {
        if (!s.is_number_unsigned()) parse_fail("domain shape entries must be positive integers");
        shape.push_back(s.get<std::size_t>());
    }
    if (lo.size() != hi.size() || lo.size() != shape.size()) parse_fail("domain lo, hi and shape differ in length");
    try {
        return GridDomain(lo, hi, shape);
    } catch (const Error& e) {
        parse_fail(std::string("invalid domain: ") + e.what());
    }
}

Json to_json(const ExtGridFn& f) {
    Json values = Json::array();
    for (double v : f.values()) {
        if (v == kInf) values.push_back("inf");
        else values.push_back(v);
    }
    return Json{{"domain", to_json(f.domain())}, {"values", std::move(values)}};
}

ExtGridFn grid_fn_from_json(const Json& j) {
    GridDomain d = domain_from_json(field(j, "domain"));
    const Json& vals = field(j, "values");
    if (!vals.is_array()) parse_fail("values must be an array");
    if (vals.size() != d.size()) parse_fail("values has " + std::to_string(vals.size()) + " entries, domain has " +
                                            std::to_string(d.size()) + " cells");
    std::vector<double> values;
    values.reserve(vals.size());
    for (const Json& v : vals) {
        if (v.is_string()) {
            if (v.get<std::string>() != "inf") parse_fail("the only string value allowed is \"inf\"");
            values.push_back(kInf);
        } else {
            values.push_back(finite_number(v, "grid value"));
        }
    }
    try {
        return ExtGridFn(std::move(d), std::move(values));
    } catch (const Error& e) {
        parse_fail(std::string("invalid grid function: ") + e.what());
    }
}

Json to_json(const ScanMask& mask) {
    Json marked = Json::array();
    for (bool b : mask.marked()) marked.push_back(b ? 1 : 0);
    return Json{{"domain", to_json(mask.domain())}, {"marked", std::move(marked)}};
}

ScanMask mask_from_json(const Json& j) {
    GridDomain d = domain_from_json(field(j, "domain"));
    const Json& vals = field(j, "marked");
    if (!vals.is_array() || vals.size() != d.size()) parse_fail("marked must have one entry per cell");
    std::vector<bool> marked;
    marked.reserve(vals.size());
    for (const Json& v : vals) {
        if (v.is_boolean()) marked.push_back(v.get<bool>());
        else if (v.is_number_integer() && (v.get<int>() == 0 || v.get<int>() == 1)) marked.push_back(v.get<int>() == 1);
        else parse_fail("marked entries must be 0 or 1");
    }
    return ScanMask(std::move(d), std::move(marked));
}

Json to_json(const Polytope& body) { return Json{{"vertices", body.vertices()}}; }

Polytope polytope_from_json(const Json& j) {
    const Json& vs = field(j, "vertices");
    if (!vs.is_array() || vs.empty()) parse_fail("vertices must be a nonempty array");
    std::vector<Point> vertices;
    for (const Json& v : vs) vertices.push_back(number_list(v, "vertex coordinate"));
    for (const Point& v : vertices)
        if (v.size() != vertices.front().size() || v.size() < 2) parse_fail("vertices must share a length of at least 2");
    return Polytope(std::move(vertices));
}

ValuationSpec valuation_from_json(const Json& j, const std::filesystem::path& base_dir, bool checked) {
    const Json& kind_j = field(j, "kind");
    if (!kind_j.is_string()) parse_fail("kind must be a string");
    const std::string kind = kind_j.get<std::string>();

    if (kind == "pairing") {
        const Json& nodes_j = field(j, "nodes");
        if (!nodes_j.is_array() || nodes_j.empty()) parse_fail("nodes must be a nonempty array");
        std::vector<Point> nodes;
        for (const Json& n : nodes_j) nodes.push_back(number_list(n, "node coordinate"));
        auto weights = number_list(field(j, "weights"), "weight");
        if (weights.size() != nodes.size()) parse_fail("nodes and weights differ in length");
        for (const Point& n : nodes)
            if (n.size() != nodes.front().size()) parse_fail("nodes must share one dimension");
        return ValuationSpec::pairing(std::move(nodes), std::move(weights), checked);
    }
    if (kind == "hessian") {
        const Json& k_j = field(j, "k");
        if (!k_j.is_number_unsigned()) parse_fail("k must be a nonnegative integer");
        ExtGridFn weight = grid_fn_ref(field(j, "weight"), base_dir);
        std::vector<MatrixField> aux;
        if (j.contains("aux")) {
            if (!j.at("aux").is_array()) parse_fail("aux must be an array");
            for (const Json& a : j.at("aux")) aux.push_back(matrix_field_from_json(a, base_dir));
        }
        return ValuationSpec::hessian(k_j.get<std::size_t>(), std::move(weight), std::move(aux));
    }
    if (kind == "constant") return ValuationSpec::constant(finite_number(field(j, "value"), "constant value"));
    if (kind == "composite") {
        const Json& terms_j = field(j, "terms");
        if (!terms_j.is_array()) parse_fail("terms must be an array");
        std::vector<ValuationSpec::Term> terms;
        for (const Json& t : terms_j) {
            if (!t.is_array() || t.size() != 2) parse_fail("each term must be [coefficient, spec]");
            const double coef = finite_number(t[0], "term coefficient");
            std::shared_ptr<const ValuationSpec> spec;
            if (t[1].is_string()) {
                spec = std::make_shared<const ValuationSpec>(load_valuation(base_dir / t[1].get<std::string>(), checked));
            } else {
                spec = std::make_shared<const ValuationSpec>(valuation_from_json(t[1], base_dir, checked));
            }
            terms.push_back({coef, std::move(spec)});
        }
        return ValuationSpec::composite(std::move(terms));
    }
    parse_fail("unknown valuation kind \"" + kind + "\"");
}

Json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) parse_fail("cannot open " + path.string());
    try {
        return Json::parse(in);
    } catch (const Json::exception& e) {
        parse_fail(path.string() + ": " + e.what());
    }
}

ExtGridFn load_grid_fn(const std::filesystem::path& path) {
    return guarded(path, [&] { return grid_fn_from_json(read_json(path)); });
}

ScanMask load_mask(const std::filesystem::path& path) {
    return guarded(path, [&] { return mask_from_json(read_json(path)); });
}

Polytope load_polytope(const std::filesystem::path& path) {
    return guarded(path, [&] { return polytope_from_json(read_json(path)); });
}

ValuationSpec load_valuation(const std::filesystem::path& path, bool checked) {
    return guarded(path, [&] { return valuation_from_json(read_json(path), path.parent_path(), checked); });
}

void write_atomic(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::path tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) parse_fail("cannot write " + tmp.string());
        out << content;
        out.flush();
        if (!out) {
            std::error_code ignored;
            std::filesystem::remove(tmp, ignored);
            parse_fail("failed writing " + tmp.string());
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::error_code ignored;
        std::filesystem::remove(tmp, ignored);
        parse_fail("cannot rename onto " + path.string() + ": " + ec.message());
    }
}

GridDomain parse_grid(const std::string& text) {
    std::vector<double> lo, hi;
    std::vector<std::size_t> shape;
    std::stringstream axes(text);
    std::string axis;
    while (std::getline(axes, axis, ',')) {
        std::stringstream parts(axis);
        std::string a, b, c, extra;
        if (!std::getline(parts, a, ':') || !std::getline(parts, b, ':') || !std::getline(parts, c, ':') ||
            std::getline(parts, extra, ':'))
            parse_fail("grid axis \"" + axis + "\" is not lo:hi:points");
        try {
            std::size_t used = 0;
            lo.push_back(std::stod(a, &used));
            if (used != a.size()) throw std::invalid_argument(a);
            hi.push_back(std::stod(b, &used));
            if (used != b.size()) throw std::invalid_argument(b);
            const long long n = std::stoll(c, &used);
            if (used != c.size() || n <= 0) throw std::invalid_argument(c);
            shape.push_back(static_cast<std::size_t>(n));
        } catch (const std::logic_error&) {
            parse_fail("grid axis \"" + axis + "\" is not lo:hi:points");
        }
    }
    if (lo.empty()) parse_fail("empty grid description");
    try {
        return GridDomain(lo, hi, shape);
    } catch (const Error& e) {
        parse_fail(std::string("invalid grid: ") + e.what());
    }
}

} // namespace vconv::io
