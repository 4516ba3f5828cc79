#include "vconv/grid.hpp"

#include "vconv/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <deque>
#include <string>

namespace vconv {

double norm(std::span<const double> x) {
    return std::sqrt(dot(x, x));
}

double distance(std::span<const double> x, std::span<const double> y) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
    return std::sqrt(s);
}

// ---------------------------------------------------------------------------
// GridDomain

GridDomain::GridDomain(std::vector<double> lo, std::vector<double> hi,
                       std::vector<std::size_t> shape)
    : lo_(std::move(lo)), hi_(std::move(hi)), shape_(std::move(shape)) {
    const std::size_t n = lo_.size();
    require(n >= 1 && n <= kMaxDim, "grid dimension must be 1, 2 or 3");
    require(hi_.size() == n && shape_.size() == n, "grid lo/hi/shape lengths differ");
    size_ = 1;
    spacing_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        require(std::isfinite(lo_[i]) && std::isfinite(hi_[i]) && lo_[i] < hi_[i],
                "grid axis " + std::to_string(i) + " needs finite lo < hi");
        require(shape_[i] >= 3, "grid axis " + std::to_string(i) + " needs at least 3 points");
        spacing_[i] = (hi_[i] - lo_[i]) / static_cast<double>(shape_[i] - 1);
        require(std::isfinite(spacing_[i]) && spacing_[i] > 0.0, "degenerate grid spacing");
        size_ *= shape_[i];
    }
}

GridDomain GridDomain::cube(std::size_t dim, double lo, double hi, std::size_t points) {
    return GridDomain(std::vector<double>(dim, lo), std::vector<double>(dim, hi),
                      std::vector<std::size_t>(dim, points));
}

double GridDomain::max_spacing() const {
    return *std::max_element(spacing_.begin(), spacing_.end());
}

double GridDomain::min_spacing() const {
    return *std::min_element(spacing_.begin(), spacing_.end());
}

double GridDomain::cell_volume() const {
    double v = 1.0;
    for (double s : spacing_) v *= s;
    return v;
}

MultiIndex GridDomain::unravel(std::size_t flat) const {
    MultiIndex idx{0, 0, 0};
    for (std::size_t a = dim(); a-- > 0;) {
        idx[a] = static_cast<std::ptrdiff_t>(flat % shape_[a]);
        flat /= shape_[a];
    }
    return idx;
}

std::size_t GridDomain::ravel(const MultiIndex& idx) const {
    std::size_t flat = 0;
    for (std::size_t a = 0; a < dim(); ++a) flat = flat * shape_[a] + static_cast<std::size_t>(idx[a]);
    return flat;
}

bool GridDomain::in_bounds(const MultiIndex& idx) const {
    for (std::size_t a = 0; a < dim(); ++a)
        if (idx[a] < 0 || idx[a] >= static_cast<std::ptrdiff_t>(shape_[a])) return false;
    return true;
}

std::optional<std::size_t> GridDomain::neighbor(const MultiIndex& idx, const MultiIndex& offset) const {
    MultiIndex j = idx;
    for (std::size_t a = 0; a < dim(); ++a) j[a] += offset[a];
    if (!in_bounds(j)) return std::nullopt;
    return ravel(j);
}

bool GridDomain::on_boundary(std::size_t flat) const {
    const MultiIndex idx = unravel(flat);
    for (std::size_t a = 0; a < dim(); ++a)
        if (idx[a] == 0 || idx[a] + 1 == static_cast<std::ptrdiff_t>(shape_[a])) return true;
    return false;
}

Point GridDomain::point(std::size_t flat) const {
    const MultiIndex idx = unravel(flat);
    Point p(dim());
    for (std::size_t a = 0; a < dim(); ++a) p[a] = coord(a, idx[a]);
    return p;
}

std::vector<double> GridDomain::coordinates() const {
    std::vector<double> xs(size_ * dim());
    for (std::size_t k = 0; k < size_; ++k) {
        const MultiIndex idx = unravel(k);
        for (std::size_t a = 0; a < dim(); ++a) xs[k * dim() + a] = coord(a, idx[a]);
    }
    return xs;
}

Point GridDomain::center() const {
    Point c(dim());
    for (std::size_t a = 0; a < dim(); ++a) c[a] = 0.5 * (lo_[a] + hi_[a]);
    return c;
}

double GridDomain::radius() const {
    double s = 0.0;
    for (std::size_t a = 0; a < dim(); ++a) s += 0.25 * (hi_[a] - lo_[a]) * (hi_[a] - lo_[a]);
    return std::sqrt(s);
}

bool GridDomain::contains(std::span<const double> x, double slack) const {
    for (std::size_t a = 0; a < dim(); ++a)
        if (x[a] < lo_[a] - slack || x[a] > hi_[a] + slack) return false;
    return true;
}

MultiIndex GridDomain::nearest(std::span<const double> x) const {
    MultiIndex idx{0, 0, 0};
    for (std::size_t a = 0; a < dim(); ++a) {
        const double t = std::round((x[a] - lo_[a]) / spacing_[a]);
        idx[a] = std::clamp(static_cast<std::ptrdiff_t>(t), std::ptrdiff_t{0},
                            static_cast<std::ptrdiff_t>(shape_[a]) - 1);
    }
    return idx;
}

std::vector<MultiIndex> stencil_directions(std::size_t dim, bool include_diagonals) {
    std::vector<MultiIndex> dirs;
    for (std::size_t a = 0; a < dim; ++a) {
        MultiIndex d{0, 0, 0};
        d[a] = 1;
        dirs.push_back(d);
    }
    if (!include_diagonals) return dirs;
    // Every {-1,0,1}^dim vector with >= 2 nonzeros whose first nonzero is +1.
    std::size_t total = 1;
    for (std::size_t a = 0; a < dim; ++a) total *= 3;
    for (std::size_t code = 0; code < total; ++code) {
        MultiIndex d{0, 0, 0};
        std::size_t c = code;
        int nonzero = 0;
        for (std::size_t a = 0; a < dim; ++a) {
            d[a] = static_cast<std::ptrdiff_t>(c % 3) - 1;
            c /= 3;
            nonzero += d[a] != 0;
        }
        if (nonzero < 2) continue;
        std::size_t first = 0;
        while (d[first] == 0) ++first;
        if (d[first] == 1) dirs.push_back(d);
    }
    return dirs;
}

// ---------------------------------------------------------------------------
// ExtGridFn

ExtGridFn::ExtGridFn(GridDomain domain, std::vector<double> values)
    : domain_(std::move(domain)), values_(std::move(values)) {
    require(values_.size() == domain_.size(), "value count does not match the grid shape",
            ErrorKind::Parse);
    bool any_finite = false;
    for (double v : values_) {
        require(!std::isnan(v), "NaN in grid function", ErrorKind::Parse);
        require(v != -kInf, "-inf in grid function", ErrorKind::Parse);
        any_finite = any_finite || v < kInf;
    }
    require(any_finite, "grid function is identically +inf (not proper)");
}

ExtGridFn ExtGridFn::sample(const GridDomain& domain,
                            const std::function<double(std::span<const double>)>& fn) {
    std::vector<double> v(domain.size());
    for (std::size_t k = 0; k < domain.size(); ++k) v[k] = fn(domain.point(k));
    return ExtGridFn(domain, std::move(v));
}

ExtGridFn ExtGridFn::constant(const GridDomain& domain, double value) {
    return ExtGridFn(domain, std::vector<double>(domain.size(), value));
}

bool ExtGridFn::all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return v < kInf; });
}

std::size_t ExtGridFn::finite_count() const {
    return static_cast<std::size_t>(
        std::count_if(values_.begin(), values_.end(), [](double v) { return v < kInf; }));
}

double ExtGridFn::sup_abs() const {
    double m = 0.0;
    for (double v : values_)
        if (v < kInf) m = std::max(m, std::abs(v));
    return m;
}

namespace {

struct Corner {
    std::size_t flat;
    double weight;
};

std::vector<Corner> interpolation_corners(const GridDomain& d, std::span<const double> x) {
    const std::size_t n = d.dim();
    require(x.size() == n, "point dimension does not match the grid");
    require(d.contains(x, 1e-12 * (1.0 + d.radius())), "point lies outside the grid",
            ErrorKind::DomainExceeded);
    MultiIndex base{0, 0, 0};
    std::array<double, kMaxDim> frac{0, 0, 0};
    for (std::size_t a = 0; a < n; ++a) {
        const double t = (x[a] - d.lo()[a]) / d.spacing(a);
        const auto last = static_cast<std::ptrdiff_t>(d.shape()[a]) - 1;
        auto i = static_cast<std::ptrdiff_t>(std::floor(t));
        i = std::clamp(i, std::ptrdiff_t{0}, last - 1);
        double fr = std::clamp(t - static_cast<double>(i), 0.0, 1.0);
        // Snap values that are a rounding error away from a grid line.
        if (fr < 1e-12) fr = 0.0;
        if (fr > 1.0 - 1e-12) fr = 1.0;
        base[a] = i;
        frac[a] = fr;
    }
    std::vector<Corner> corners;
    for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
        MultiIndex idx = base;
        double w = 1.0;
        for (std::size_t a = 0; a < n; ++a) {
            const bool up = (mask >> a) & 1U;
            idx[a] += up ? 1 : 0;
            w *= up ? frac[a] : 1.0 - frac[a];
        }
        if (w != 0.0) corners.push_back({d.ravel(idx), w});
    }
    return corners;
}

} // namespace

double ExtGridFn::interpolate(std::span<const double> x) const {
    double s = 0.0;
    for (const Corner& c : interpolation_corners(domain_, x)) {
        require(values_[c.flat] < kInf, "interpolation reads a +inf cell");
        s += c.weight * values_[c.flat];
    }
    return s;
}

std::vector<std::size_t> ExtGridFn::interpolation_footprint(std::span<const double> x) const {
    std::vector<std::size_t> out;
    for (const Corner& c : interpolation_corners(domain_, x)) out.push_back(c.flat);
    return out;
}

namespace {

template <class Op>
ExtGridFn combine(const ExtGridFn& f, const ExtGridFn& g, Op op) {
    require(f.domain() == g.domain(), "grid functions live on different domains");
    std::vector<double> v(f.size());
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = op(f[k], g[k]);
    return ExtGridFn(f.domain(), std::move(v));
}

} // namespace

ExtGridFn operator+(const ExtGridFn& f, const ExtGridFn& g) {
    return combine(f, g, [](double a, double b) { return (a < kInf && b < kInf) ? a + b : kInf; });
}

ExtGridFn operator-(const ExtGridFn& f, const ExtGridFn& g) {
    return combine(f, g, [](double a, double b) {
        require(b < kInf, "cannot subtract a +inf value");
        return a < kInf ? a - b : kInf;
    });
}

ExtGridFn operator*(double t, const ExtGridFn& f) {
    require(t >= 0.0 || f.all_finite(), "negative multiple of a function with +inf values");
    std::vector<double> v(f.size());
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = f[k] < kInf ? t * f[k] : kInf;
    return ExtGridFn(f.domain(), std::move(v));
}

ExtGridFn pointwise_max(const ExtGridFn& f, const ExtGridFn& g) {
    return combine(f, g, [](double a, double b) { return std::max(a, b); });
}

ExtGridFn pointwise_min(const ExtGridFn& f, const ExtGridFn& g) {
    return combine(f, g, [](double a, double b) { return std::min(a, b); });
}

ExtGridFn add_affine(const ExtGridFn& f, std::span<const double> slope, double offset) {
    const GridDomain& d = f.domain();
    require(slope.size() == d.dim(), "slope dimension does not match the grid");
    std::vector<double> v(f.size());
    for (std::size_t k = 0; k < v.size(); ++k) {
        if (f[k] == kInf) {
            v[k] = kInf;
            continue;
        }
        const Point x = d.point(k);
        v[k] = f[k] + dot(slope, x) + offset;
    }
    return ExtGridFn(d, std::move(v));
}

namespace {

double step_length(const GridDomain& d, const MultiIndex& dir) {
    double s = 0.0;
    for (std::size_t a = 0; a < d.dim(); ++a) {
        const double h = static_cast<double>(dir[a]) * d.spacing(a);
        s += h * h;
    }
    return std::sqrt(s);
}

} // namespace

double discrete_c2_norm(const ExtGridFn& f) {
    const GridDomain& d = f.domain();
    const auto dirs = stencil_directions(d.dim(), true);
    double c = f.sup_abs();
    for (std::size_t k = 0; k < f.size(); ++k) {
        if (!f.finite_at(k)) continue;
        const MultiIndex idx = d.unravel(k);
        for (const MultiIndex& dir : dirs) {
            MultiIndex back{-dir[0], -dir[1], -dir[2]};
            const double len = step_length(d, dir);
            const auto fwd = d.neighbor(idx, dir);
            const auto bwd = d.neighbor(idx, back);
            if (fwd && f.finite_at(*fwd)) c = std::max(c, std::abs(f[*fwd] - f[k]) / len);
            if (fwd && bwd && f.finite_at(*fwd) && f.finite_at(*bwd))
                c = std::max(c, std::abs(f[*fwd] - 2.0 * f[k] + f[*bwd]) / (len * len));
        }
    }
    return c;
}

double discrete_lipschitz(const ExtGridFn& f) {
    const GridDomain& d = f.domain();
    const auto dirs = stencil_directions(d.dim(), true);
    double lip = 0.0;
    for (std::size_t k = 0; k < f.size(); ++k) {
        if (!f.finite_at(k)) continue;
        const MultiIndex idx = d.unravel(k);
        for (const MultiIndex& dir : dirs) {
            const auto fwd = d.neighbor(idx, dir);
            if (fwd && f.finite_at(*fwd))
                lip = std::max(lip, std::abs(f[*fwd] - f[k]) / step_length(d, dir));
        }
    }
    return lip;
}

// ---------------------------------------------------------------------------
// ScanMask

ScanMask::ScanMask(GridDomain domain, std::vector<bool> marked)
    : domain_(std::move(domain)), marked_(std::move(marked)) {
    require(marked_.size() == domain_.size(), "mask size does not match the grid shape",
            ErrorKind::Parse);
}

ScanMask ScanMask::empty(const GridDomain& domain) {
    return ScanMask(domain, std::vector<bool>(domain.size(), false));
}

ScanMask ScanMask::where(const GridDomain& domain,
                         const std::function<bool(std::span<const double>)>& pred) {
    std::vector<bool> m(domain.size());
    for (std::size_t k = 0; k < domain.size(); ++k) m[k] = pred(domain.point(k));
    return ScanMask(domain, std::move(m));
}

std::size_t ScanMask::count() const {
    return static_cast<std::size_t>(std::count(marked_.begin(), marked_.end(), true));
}

std::size_t ScanMask::components() const {
    std::vector<bool> seen(marked_.size(), false);
    const auto axes = stencil_directions(domain_.dim(), false);
    std::size_t n = 0;
    for (std::size_t start = 0; start < marked_.size(); ++start) {
        if (!marked_[start] || seen[start]) continue;
        ++n;
        std::deque<std::size_t> queue{start};
        seen[start] = true;
        while (!queue.empty()) {
            const std::size_t k = queue.front();
            queue.pop_front();
            const MultiIndex idx = domain_.unravel(k);
            for (const MultiIndex& ax : axes) {
                for (int sign : {1, -1}) {
                    const MultiIndex off{sign * ax[0], sign * ax[1], sign * ax[2]};
                    const auto j = domain_.neighbor(idx, off);
                    if (j && marked_[*j] && !seen[*j]) {
                        seen[*j] = true;
                        queue.push_back(*j);
                    }
                }
            }
        }
    }
    return n;
}

// ---------------------------------------------------------------------------
// Polytope

Polytope::Polytope(std::vector<Point> vertices) : vertices_(std::move(vertices)) {
    require(!vertices_.empty(), "polytope needs at least one vertex");
    const std::size_t m = vertices_.front().size();
    require(m >= 2 && m <= kMaxDim + 1, "polytope vertices must live in V* x R with dim V in 1..3");
    for (const Point& v : vertices_) {
        require(v.size() == m, "polytope vertices have mixed dimensions", ErrorKind::Parse);
        for (double c : v) require(std::isfinite(c), "non-finite polytope coordinate", ErrorKind::Parse);
    }
}

double Polytope::lower_support(std::span<const double> x) const {
    const std::size_t n = base_dim();
    double best = -kInf;
    for (const Point& v : vertices_) {
        const double val = dot(std::span<const double>(v.data(), n), x) - v[n];
        best = std::max(best, val);
    }
    return best;
}

Polytope Polytope::translated(std::span<const double> shift) const {
    require(shift.size() == base_dim() + 1, "translation must live in V* x R");
    std::vector<Point> out = vertices_;
    for (Point& v : out)
        for (std::size_t i = 0; i < v.size(); ++i) v[i] += shift[i];
    return Polytope(std::move(out));
}

Polytope Polytope::scaled(double t) const {
    std::vector<Point> out = vertices_;
    for (Point& v : out)
        for (double& c : v) c *= t;
    return Polytope(std::move(out));
}

// ---------------------------------------------------------------------------
// Bump

namespace {

// u = 1 - |x-c|^2 / r^2, positive inside the support.
double bump_u(const Bump& b, std::span<const double> x) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - b.center[i]) * (x[i] - b.center[i]);
    return 1.0 - s / (b.radius * b.radius);
}

} // namespace

double Bump::operator()(std::span<const double> x) const {
    const double u = bump_u(*this, x);
    if (u <= 0.0) return 0.0;
    return amplitude * std::exp(1.0 - 1.0 / u);
}

Point Bump::gradient(std::span<const double> x) const {
    Point g(x.size(), 0.0);
    const double u = bump_u(*this, x);
    if (u <= 0.0) return g;
    const double v = amplitude * std::exp(1.0 - 1.0 / u);
    const double r2 = radius * radius;
    for (std::size_t i = 0; i < x.size(); ++i) g[i] = v * (-2.0 * (x[i] - center[i]) / r2) / (u * u);
    return g;
}

std::vector<double> Bump::hessian(std::span<const double> x) const {
    const std::size_t n = x.size();
    std::vector<double> h(n * n, 0.0);
    const double u = bump_u(*this, x);
    if (u <= 0.0) return h;
    const double v = amplitude * std::exp(1.0 - 1.0 / u);
    const double r2 = radius * radius;
    // value = A exp(1 + q), q = -1/u; d_i q = u_i / u^2, d_ij q = u_ij / u^2 - 2 u_i u_j / u^3.
    std::vector<double> du(n);
    for (std::size_t i = 0; i < n; ++i) du[i] = -2.0 * (x[i] - center[i]) / r2;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double qi = du[i] / (u * u);
            const double qj = du[j] / (u * u);
            const double uij = i == j ? -2.0 / r2 : 0.0;
            const double qij = uij / (u * u) - 2.0 * du[i] * du[j] / (u * u * u);
            h[i * n + j] = v * (qi * qj + qij);
        }
    }
    return h;
}

ExtGridFn Bump::sample(const GridDomain& domain) const {
    require(center.size() == domain.dim(), "bump center dimension does not match the grid");
    require(radius > 0.0, "bump radius must be positive");
    return ExtGridFn::sample(domain, [this](std::span<const double> x) { return (*this)(x); });
}

double Bump::c2_norm(const GridDomain& domain, std::size_t refine) const {
    std::vector<std::size_t> shape(domain.dim());
    for (std::size_t a = 0; a < domain.dim(); ++a) shape[a] = (domain.shape()[a] - 1) * refine + 1;
    const GridDomain fine(domain.lo(), domain.hi(), shape);
    const std::size_t n = domain.dim();
    double c = 0.0;
    for (std::size_t k = 0; k < fine.size(); ++k) {
        const Point x = fine.point(k);
        if (bump_u(*this, x) <= 0.0) continue;
        c = std::max(c, std::abs((*this)(x)));
        c = std::max(c, norm(gradient(x)));
        const auto h = hessian(x);
        Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> hm(
            h.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(hm, Eigen::EigenvaluesOnly);
        c = std::max(c, es.eigenvalues().cwiseAbs().maxCoeff());
    }
    return c;
}

} // namespace vconv
