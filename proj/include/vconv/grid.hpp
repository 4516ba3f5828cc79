#pragma once

// Grid-sampled extended-real functions and the small geometric value types
// the rest of the library is built on. Dimensions 1..3, row-major storage
// with the last axis fastest.

#include <array>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <vector>

namespace vconv {

using Point = std::vector<double>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr std::size_t kMaxDim = 3;

using MultiIndex = std::array<std::ptrdiff_t, kMaxDim>;

// Same summation order everywhere a pairing <x, y> is needed, so that two
// transforms computing the "same" product agree bit for bit.
inline double dot(std::span<const double> x, std::span<const double> y) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
    return s;
}

double norm(std::span<const double> x);
double distance(std::span<const double> x, std::span<const double> y);

/// Axis-aligned box sampled uniformly, `shape[i] >= 3` points per axis.
class GridDomain {
public:
    GridDomain(std::vector<double> lo, std::vector<double> hi, std::vector<std::size_t> shape);

    /// Same box with the same number of points per axis on every axis.
    static GridDomain cube(std::size_t dim, double lo, double hi, std::size_t points);

    [[nodiscard]] std::size_t dim() const noexcept { return lo_.size(); }
    [[nodiscard]] std::size_t size() const noexcept { return size_; }
    [[nodiscard]] const std::vector<double>& lo() const noexcept { return lo_; }
    [[nodiscard]] const std::vector<double>& hi() const noexcept { return hi_; }
    [[nodiscard]] const std::vector<std::size_t>& shape() const noexcept { return shape_; }
    [[nodiscard]] double spacing(std::size_t axis) const { return spacing_[axis]; }
    [[nodiscard]] double max_spacing() const;
    [[nodiscard]] double min_spacing() const;
    [[nodiscard]] double cell_volume() const;

    [[nodiscard]] double coord(std::size_t axis, std::ptrdiff_t i) const {
        return lo_[axis] + spacing_[axis] * static_cast<double>(i);
    }

    [[nodiscard]] MultiIndex unravel(std::size_t flat) const;
    [[nodiscard]] std::size_t ravel(const MultiIndex& idx) const;
    [[nodiscard]] bool in_bounds(const MultiIndex& idx) const;
    /// Flat index of `idx + offset`, or nullopt when it leaves the grid.
    [[nodiscard]] std::optional<std::size_t> neighbor(const MultiIndex& idx,
                                                      const MultiIndex& offset) const;
    [[nodiscard]] bool on_boundary(std::size_t flat) const;

    [[nodiscard]] Point point(std::size_t flat) const;
    /// All cell coordinates, `size() * dim()` values, cell-major.
    [[nodiscard]] std::vector<double> coordinates() const;

    [[nodiscard]] Point center() const;
    /// Largest distance from the box center to a grid point.
    [[nodiscard]] double radius() const;
    [[nodiscard]] bool contains(std::span<const double> x, double slack = 0.0) const;
    /// Grid index closest to `x` (clamped into the box).
    [[nodiscard]] MultiIndex nearest(std::span<const double> x) const;

    friend bool operator==(const GridDomain&, const GridDomain&) = default;

private:
    std::vector<double> lo_;
    std::vector<double> hi_;
    std::vector<std::size_t> shape_;
    std::vector<double> spacing_;
    std::size_t size_ = 0;
};

/// Offsets of the discrete directions used by convexity and Hessian stencils:
/// the axes followed by every {-1,0,1} diagonal, one representative per +-pair.
std::vector<MultiIndex> stencil_directions(std::size_t dim, bool include_diagonals);

/// Values in (-inf, +inf] on a GridDomain. Proper: at least one finite value.
class ExtGridFn {
public:
    ExtGridFn(GridDomain domain, std::vector<double> values);

    static ExtGridFn sample(const GridDomain& domain,
                            const std::function<double(std::span<const double>)>& fn);
    static ExtGridFn constant(const GridDomain& domain, double value);

    [[nodiscard]] const GridDomain& domain() const noexcept { return domain_; }
    [[nodiscard]] const std::vector<double>& values() const noexcept { return values_; }
    [[nodiscard]] double operator[](std::size_t i) const { return values_[i]; }
    [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }
    [[nodiscard]] bool finite_at(std::size_t i) const { return values_[i] < kInf; }
    [[nodiscard]] bool all_finite() const;
    [[nodiscard]] std::size_t finite_count() const;

    /// max |f| over finite cells.
    [[nodiscard]] double sup_abs() const;

    /// Multilinear interpolation. Corners with zero weight are not looked at;
    /// throws if a contributing corner is +inf or `x` leaves the box.
    [[nodiscard]] double interpolate(std::span<const double> x) const;
    /// Flat indices of the corners `interpolate(x)` reads with nonzero weight.
    [[nodiscard]] std::vector<std::size_t> interpolation_footprint(std::span<const double> x) const;

private:
    GridDomain domain_;
    std::vector<double> values_;
};

ExtGridFn operator+(const ExtGridFn& f, const ExtGridFn& g);
ExtGridFn operator-(const ExtGridFn& f, const ExtGridFn& g); // both must be finite where used
ExtGridFn operator*(double t, const ExtGridFn& f);           // +inf cells stay +inf (0 * indicator = indicator)
ExtGridFn pointwise_max(const ExtGridFn& f, const ExtGridFn& g);
ExtGridFn pointwise_min(const ExtGridFn& f, const ExtGridFn& g);
/// f + <slope, x> + offset.
ExtGridFn add_affine(const ExtGridFn& f, std::span<const double> slope, double offset);

/// Discrete C^2 size: max of |f|, |one-sided first differences| and
/// |second differences / step^2| over axis and diagonal stencils.
double discrete_c2_norm(const ExtGridFn& f);

/// Largest |difference quotient| between adjacent finite cells (axes and diagonals).
double discrete_lipschitz(const ExtGridFn& f);

/// Boolean cell set on a domain.
class ScanMask {
public:
    ScanMask(GridDomain domain, std::vector<bool> marked);
    static ScanMask empty(const GridDomain& domain);
    static ScanMask where(const GridDomain& domain,
                          const std::function<bool(std::span<const double>)>& pred);

    [[nodiscard]] const GridDomain& domain() const noexcept { return domain_; }
    [[nodiscard]] const std::vector<bool>& marked() const noexcept { return marked_; }
    [[nodiscard]] bool operator[](std::size_t i) const { return marked_[i]; }
    [[nodiscard]] std::size_t count() const;
    [[nodiscard]] bool none() const { return count() == 0; }
    /// Number of face-connected components.
    [[nodiscard]] std::size_t components() const;

    friend bool operator==(const ScanMask&, const ScanMask&) = default;

private:
    GridDomain domain_;
    std::vector<bool> marked_;
};

/// Finite vertex list in V* x R; the last coordinate is the R component.
class Polytope {
public:
    explicit Polytope(std::vector<Point> vertices);

    [[nodiscard]] const std::vector<Point>& vertices() const noexcept { return vertices_; }
    /// Dimension of V (one less than the ambient vertex dimension).
    [[nodiscard]] std::size_t base_dim() const { return vertices_.front().size() - 1; }

    /// h_K(x, -1) = max over vertices (y, t) of <y, x> - t.
    [[nodiscard]] double lower_support(std::span<const double> x) const;
    [[nodiscard]] Polytope translated(std::span<const double> shift) const;
    [[nodiscard]] Polytope scaled(double t) const;

private:
    std::vector<Point> vertices_;
};

/// amplitude * exp(1 - 1/(1 - |x-c|^2/r^2)) inside the ball, 0 outside.
struct Bump {
    Point center;
    double radius = 1.0;
    double amplitude = 1.0;

    [[nodiscard]] double operator()(std::span<const double> x) const;
    [[nodiscard]] Point gradient(std::span<const double> x) const;
    /// Row-major dim x dim Hessian.
    [[nodiscard]] std::vector<double> hessian(std::span<const double> x) const;
    [[nodiscard]] ExtGridFn sample(const GridDomain& domain) const;
    /// sup |value|, |gradient| and spectral |Hessian| sampled on a refined grid.
    [[nodiscard]] double c2_norm(const GridDomain& domain, std::size_t refine = 4) const;
};

} // namespace vconv
