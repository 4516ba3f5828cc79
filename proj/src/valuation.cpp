#include "vconv/valuation.hpp"

#include "vconv/convex_core.hpp"
#include "vconv/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace vconv {

MatrixField::MatrixField(Matrix constant) {
    require(constant.rows() == constant.cols() && constant.rows() >= 1, "matrix must be square");
    require(constant.isApprox(constant.transpose(), 1e-12) || constant.isZero(), "matrix must be symmetric");
    values_.push_back(std::move(constant));
}

MatrixField::MatrixField(const GridDomain& domain, std::vector<Matrix> per_cell)
    : domain_(domain), values_(std::move(per_cell)) {
    require(values_.size() == domain.size(), "matrix field needs one matrix per cell");
    for (const Matrix& m : values_) {
        require(m.rows() == static_cast<Eigen::Index>(domain.dim()) && m.cols() == m.rows(),
                "matrix field entries must be dim x dim");
        require(m.isApprox(m.transpose(), 1e-12) || m.isZero(), "matrix field entries must be symmetric");
    }
}

double pairing_defect(const std::vector<Point>& nodes, const std::vector<double>& weights) {
    double total = 0.0;
    std::vector<double> moment(nodes.empty() ? 0 : nodes.front().size(), 0.0);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        total += weights[i];
        for (std::size_t a = 0; a < moment.size(); ++a) moment[a] += weights[i] * nodes[i][a];
    }
    double defect = std::abs(total);
    for (double m : moment) defect = std::max(defect, std::abs(m));
    return defect;
}

ValuationSpec ValuationSpec::pairing(std::vector<Point> nodes, std::vector<double> weights, bool checked) {
    require(!nodes.empty(), "pairing needs at least one node");
    require(nodes.size() == weights.size(), "pairing needs one weight per node");
    const std::size_t n = nodes.front().size();
    require(n >= 1 && n <= kMaxDim, "pairing nodes must have dimension 1..3");
    for (const Point& p : nodes) {
        require(p.size() == n, "pairing nodes must share one dimension");
        for (double v : p) require(std::isfinite(v), "pairing node is not finite", ErrorKind::Parse);
    }
    for (double w : weights) require(std::isfinite(w), "pairing weight is not finite", ErrorKind::Parse);
    if (checked) {
        double mass = 0.0;
        std::vector<double> moment(n, 0.0);
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            mass += weights[i];
            for (std::size_t a = 0; a < n; ++a) moment[a] += weights[i] * nodes[i][a];
        }
        const double moment_size = std::abs(*std::max_element(moment.begin(), moment.end(), [](double x, double y) {
            return std::abs(x) < std::abs(y);
        }));
        const bool bad_mass = std::abs(mass) > kPairingTol;
        const bool bad_moment = moment_size > kPairingTol;
        if (bad_mass || bad_moment) {
            std::ostringstream msg;
            msg << "pairing weights violate";
            if (bad_mass) msg << " sum w = 0 (sum w = " << mass << ")";
            if (bad_mass && bad_moment) msg << " and";
            if (bad_moment) msg << " sum w x = 0 (max |sum w x| = " << moment_size << ")";
            fail(ErrorKind::Precondition, msg.str());
        }
    }
    ValuationSpec s;
    s.kind_ = Kind::Pairing;
    s.nodes_ = std::move(nodes);
    s.weights_ = std::move(weights);
    s.order_ = 1;
    return s;
}

ValuationSpec ValuationSpec::hessian(std::size_t k, ExtGridFn weight, std::vector<MatrixField> aux) {
    const GridDomain& d = weight.domain();
    const std::size_t n = d.dim();
    require(k >= 1 && k <= n, "Hessian order must lie in 1..dim");
    require(aux.size() == n - k, "Hessian density of order k needs dim - k auxiliary matrices");
    require(weight.all_finite(), "Hessian weight must be finite");
    for (const MatrixField& a : aux) {
        require(a.dim() == n, "auxiliary matrices must be dim x dim");
        if (a.domain()) require(*a.domain() == d, "auxiliary field lives on a different grid");
    }
    for (std::size_t c = 0; c < d.size(); ++c) {
        if (weight[c] == 0.0) continue;
        const MultiIndex idx = d.unravel(c);
        for (std::size_t a = 0; a < n; ++a) {
            const auto last = static_cast<std::ptrdiff_t>(d.shape()[a]) - 1;
            require(idx[a] >= 2 && idx[a] <= last - 2,
                    "Hessian weight must vanish on a 2-cell margin at the boundary");
        }
    }
    ValuationSpec s;
    s.kind_ = Kind::Hessian;
    s.order_ = k;
    s.density_ = std::move(weight);
    s.aux_ = std::move(aux);
    return s;
}

ValuationSpec ValuationSpec::constant(double value) {
    require(std::isfinite(value), "constant valuation must be finite", ErrorKind::Parse);
    ValuationSpec s;
    s.kind_ = Kind::Constant;
    s.value_ = value;
    return s;
}

ValuationSpec ValuationSpec::composite(std::vector<Term> terms) {
    for (const Term& t : terms) {
        require(t.spec != nullptr, "composite term is empty");
        require(std::isfinite(t.coefficient), "composite coefficient is not finite", ErrorKind::Parse);
    }
    ValuationSpec s;
    s.kind_ = Kind::Composite;
    s.terms_ = std::move(terms);
    return s;
}

std::optional<std::size_t> ValuationSpec::degree() const {
    switch (kind_) {
    case Kind::Pairing:
    case Kind::Hessian:
        return order_;
    case Kind::Constant:
        return 0;
    case Kind::Composite: {
        std::optional<std::size_t> deg;
        for (const Term& t : terms_) {
            const auto td = t.spec->degree();
            if (!td || (deg && *deg != *td)) return std::nullopt;
            deg = td;
        }
        return deg ? deg : std::optional<std::size_t>(0);
    }
    }
    return std::nullopt;
}

ValuationSpec ValuationSpec::dilated_nodes(double t) const {
    ValuationSpec s = *this;
    for (Point& p : s.nodes_)
        for (double& v : p) v *= t;
    for (Term& term : s.terms_) term.spec = std::make_shared<const ValuationSpec>(term.spec->dilated_nodes(t));
    return s;
}

double mixed_determinant(const std::vector<Matrix>& matrices) {
    const std::size_t n = matrices.size();
    require(n >= 1 && n <= kMaxDim, "mixed determinant needs 1..3 matrices");
    for (const Matrix& m : matrices)
        require(m.rows() == static_cast<Eigen::Index>(n) && m.cols() == static_cast<Eigen::Index>(n),
                "mixed determinant needs n matrices of size n x n");
    double sum = 0.0;
    for (std::size_t mask = 1; mask < (std::size_t{1} << n); ++mask) {
        Matrix acc = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
        std::size_t size = 0;
        for (std::size_t i = 0; i < n; ++i)
            if ((mask >> i) & 1U) {
                acc += matrices[i];
                ++size;
            }
        const double sign = ((n - size) % 2 == 0) ? 1.0 : -1.0;
        sum += sign * acc.determinant();
    }
    double factorial = 1.0;
    for (std::size_t i = 2; i <= n; ++i) factorial *= static_cast<double>(i);
    return sum / factorial;
}

namespace {

struct HessianSample {
    Matrix value;
    Matrix magnitude; // entrywise sum of |addends|
};

HessianSample central_hessian(const ExtGridFn& f, std::size_t cell) {
    const GridDomain& d = f.domain();
    const auto n = static_cast<Eigen::Index>(d.dim());
    const MultiIndex idx = d.unravel(cell);
    auto at = [&](const MultiIndex& off) {
        const auto j = d.neighbor(idx, off);
        require(j.has_value(), "Hessian stencil leaves the grid", ErrorKind::DomainExceeded);
        require(f.finite_at(*j), "Hessian stencil reads a +inf cell");
        return f[*j];
    };
    HessianSample h{Matrix::Zero(n, n), Matrix::Zero(n, n)};
    const double center = at({0, 0, 0});
    for (Eigen::Index a = 0; a < n; ++a) {
        const auto ua = static_cast<std::size_t>(a);
        MultiIndex e{0, 0, 0};
        e[ua] = 1;
        MultiIndex me{0, 0, 0};
        me[ua] = -1;
        const double ha = d.spacing(ua);
        const double p = at(e);
        const double m = at(me);
        h.value(a, a) = (p - 2.0 * center + m) / (ha * ha);
        h.magnitude(a, a) = (std::abs(p) + 2.0 * std::abs(center) + std::abs(m)) / (ha * ha);
        for (Eigen::Index b = a + 1; b < n; ++b) {
            const auto ub = static_cast<std::size_t>(b);
            MultiIndex pp{0, 0, 0}, pm{0, 0, 0}, mp{0, 0, 0}, mm{0, 0, 0};
            pp[ua] = 1, pp[ub] = 1;
            pm[ua] = 1, pm[ub] = -1;
            mp[ua] = -1, mp[ub] = 1;
            mm[ua] = -1, mm[ub] = -1;
            const double denom = 4.0 * ha * d.spacing(ub);
            const double vpp = at(pp), vpm = at(pm), vmp = at(mp), vmm = at(mm);
            h.value(a, b) = h.value(b, a) = (vpp - vpm - vmp + vmm) / denom;
            h.magnitude(a, b) = h.magnitude(b, a) =
                (std::abs(vpp) + std::abs(vpm) + std::abs(vmp) + std::abs(vmm)) / denom;
        }
    }
    return h;
}

std::vector<Matrix> density_arguments(const ValuationSpec& mu, const Matrix& hessian, std::size_t cell) {
    std::vector<Matrix> args(mu.order(), hessian);
    for (const MatrixField& a : mu.aux()) args.push_back(a.at(cell));
    return args;
}

void require_same_grid(const ValuationSpec& mu, const ExtGridFn& f) {
    require(mu.density().domain() == f.domain(), "Hessian weight and function live on different grids");
}

double evaluate_hessian(const ValuationSpec& mu, const ExtGridFn& f) {
    require_same_grid(mu, f);
    const ExtGridFn& phi = mu.density();
    const double vol = phi.domain().cell_volume();
    double sum = 0.0;
    for (std::size_t c = 0; c < phi.size(); ++c) {
        if (phi[c] == 0.0) continue;
        const HessianSample h = central_hessian(f, c);
        sum += phi[c] * mixed_determinant(density_arguments(mu, h.value, c)) * vol;
    }
    return sum;
}

double magnitude_hessian(const ValuationSpec& mu, const ExtGridFn& f) {
    require_same_grid(mu, f);
    const ExtGridFn& phi = mu.density();
    const std::size_t n = phi.domain().dim();
    const double vol = phi.domain().cell_volume();
    double sum = 0.0;
    for (std::size_t c = 0; c < phi.size(); ++c) {
        if (phi[c] == 0.0) continue;
        const HessianSample h = central_hessian(f, c);
        // n! terms of the determinant, each a product of one entry per argument.
        double bound = 1.0;
        for (std::size_t i = 2; i <= n; ++i) bound *= static_cast<double>(i);
        for (const Matrix& m : density_arguments(mu, h.magnitude, c)) bound *= m.cwiseAbs().maxCoeff();
        sum += std::abs(phi[c]) * bound * vol;
    }
    return sum;
}

} // namespace

double evaluate(const ValuationSpec& mu, const ExtGridFn& f) {
    switch (mu.kind()) {
    case ValuationSpec::Kind::Pairing: {
        double s = 0.0;
        for (std::size_t i = 0; i < mu.nodes().size(); ++i) s += mu.weights()[i] * f.interpolate(mu.nodes()[i]);
        return s;
    }
    case ValuationSpec::Kind::Hessian:
        return evaluate_hessian(mu, f);
    case ValuationSpec::Kind::Constant:
        return mu.value();
    case ValuationSpec::Kind::Composite: {
        double s = 0.0;
        for (const auto& t : mu.terms()) s += t.coefficient * evaluate(*t.spec, f);
        return s;
    }
    }
    return 0.0;
}

double evaluation_magnitude(const ValuationSpec& mu, const ExtGridFn& f) {
    switch (mu.kind()) {
    case ValuationSpec::Kind::Pairing: {
        double s = 0.0;
        for (std::size_t i = 0; i < mu.nodes().size(); ++i) {
            double m = 0.0;
            for (std::size_t c : f.interpolation_footprint(mu.nodes()[i])) m = std::max(m, std::abs(f[c]));
            s += std::abs(mu.weights()[i]) * m;
        }
        return s;
    }
    case ValuationSpec::Kind::Hessian:
        return magnitude_hessian(mu, f);
    case ValuationSpec::Kind::Constant:
        return std::abs(mu.value());
    case ValuationSpec::Kind::Composite: {
        double s = 0.0;
        for (const auto& t : mu.terms()) s += std::abs(t.coefficient) * evaluation_magnitude(*t.spec, f);
        return s;
    }
    }
    return 0.0;
}

ScanMask footprint(const ValuationSpec& mu, const GridDomain& domain) {
    std::vector<bool> marked(domain.size(), false);
    std::function<void(const ValuationSpec&)> visit = [&](const ValuationSpec& s) {
        switch (s.kind()) {
        case ValuationSpec::Kind::Pairing: {
            const ExtGridFn probe = ExtGridFn::constant(domain, 0.0);
            for (const Point& p : s.nodes())
                for (std::size_t c : probe.interpolation_footprint(p)) marked[c] = true;
            break;
        }
        case ValuationSpec::Kind::Hessian: {
            require(s.density().domain() == domain, "Hessian weight lives on a different grid");
            const auto dirs = stencil_directions(domain.dim(), true);
            for (std::size_t c = 0; c < domain.size(); ++c) {
                if (s.density()[c] == 0.0) continue;
                marked[c] = true;
                const MultiIndex idx = domain.unravel(c);
                for (const MultiIndex& dir : dirs)
                    for (int sign : {1, -1}) {
                        const MultiIndex off{sign * dir[0], sign * dir[1], sign * dir[2]};
                        if (const auto j = domain.neighbor(idx, off)) marked[*j] = true;
                    }
            }
            break;
        }
        case ValuationSpec::Kind::Constant:
            break;
        case ValuationSpec::Kind::Composite:
            for (const auto& t : s.terms())
                if (t.coefficient != 0.0) visit(*t.spec);
            break;
        }
    };
    visit(mu);
    return ScanMask(domain, std::move(marked));
}

Functional as_functional(const ValuationSpec& mu) {
    auto shared = std::make_shared<const ValuationSpec>(mu);
    return [shared](const ExtGridFn& f) { return evaluate(*shared, f); };
}

double valuation_residual(const Functional& mu, const ExtGridFn& f, const ExtGridFn& h) {
    const ExtGridFn lower = pointwise_min(f, h);
    if (!is_discretely_convex(lower))
        fail(ErrorKind::ConvexityViolation, "min(f, h) is not discretely convex");
    const ExtGridFn upper = pointwise_max(f, h);
    return std::abs(mu(f) + mu(h) - mu(upper) - mu(lower));
}

double valuation_residual(const ValuationSpec& mu, const ExtGridFn& f, const ExtGridFn& h) {
    return valuation_residual(as_functional(mu), f, h);
}

double depi_invariance_residual(const ValuationSpec& mu, const ExtGridFn& f, std::span<const double> slope, double c) {
    return std::abs(evaluate(mu, add_affine(f, slope, c)) - evaluate(mu, f));
}

namespace {

// Rows: coefficients of t^0..t^{n+1}; columns: probes t = 1..n+2.
Matrix vandermonde_inverse(std::size_t n) {
    const auto m = static_cast<Eigen::Index>(n + 2);
    Matrix V(m, m);
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = 0; j < m; ++j) V(i, j) = std::pow(static_cast<double>(i + 1), static_cast<double>(j));
    Eigen::JacobiSVD<Matrix> svd(V);
    const auto& sv = svd.singularValues();
    const double cond = sv(0) / sv(sv.size() - 1);
    if (!(cond <= 1e12)) fail(ErrorKind::IllConditioned, "Vandermonde system is ill-conditioned");
    return V.fullPivLu().inverse();
}

} // namespace

HomogeneousComponents homogeneous_decompose(const Functional& mu, const ExtGridFn& f, std::size_t n) {
    require(n >= 1 && n <= kMaxDim, "ambient dimension must be 1..3");
    const Matrix inv = vandermonde_inverse(n);
    const auto m = static_cast<Eigen::Index>(n + 2);
    Eigen::VectorXd probes(m);
    HomogeneousComponents out;
    for (Eigen::Index t = 0; t < m; ++t) {
        probes(t) = mu(static_cast<double>(t + 1) * f);
        out.scale = std::max(out.scale, std::abs(probes(t)));
    }
    const Eigen::VectorXd coeff = inv * probes;
    out.components.assign(coeff.data(), coeff.data() + n + 1);
    out.residual = std::abs(coeff(m - 1));
    return out;
}

HomogeneousComponents homogeneous_decompose(const ValuationSpec& mu, const ExtGridFn& f, std::size_t n) {
    return homogeneous_decompose(as_functional(mu), f, n);
}

Functional homogeneous_component(const Functional& mu, std::size_t degree, std::size_t n) {
    require(degree <= n, "component degree must lie in 0..n");
    const Matrix inv = vandermonde_inverse(n);
    std::vector<double> row(n + 2);
    for (std::size_t t = 0; t < n + 2; ++t)
        row[t] = inv(static_cast<Eigen::Index>(degree), static_cast<Eigen::Index>(t));
    return [mu, row](const ExtGridFn& f) {
        double s = 0.0;
        for (std::size_t t = 0; t < row.size(); ++t) s += row[t] * mu(static_cast<double>(t + 1) * f);
        return s;
    };
}

double embed_T(const ValuationSpec& mu, const Polytope& body, const GridDomain& domain) {
    require(body.base_dim() == domain.dim(), "body and grid dimensions differ");
    return evaluate(mu, body_to_function(body, domain));
}

double res_star(const ValuationSpec& mu_U, const ScanMask& U, const ExtGridFn& f) {
    require(U.domain() == f.domain(), "mask and function live on different grids");
    const ScanMask looks = footprint(mu_U, f.domain());
    for (std::size_t c = 0; c < f.size(); ++c) {
        if (U[c]) require(f.finite_at(c), "f must be finite on the open set");
        if (looks[c]) require(U[c], "valuation reads cells outside the open set");
    }
    return evaluate(mu_U, restrict_to(f, U));
}

double extend_star(const ValuationSpec& mu, const ScanMask& U, const ExtGridFn& g) {
    return evaluate(mu, lsc_extend(g, U));
}

} // namespace vconv
