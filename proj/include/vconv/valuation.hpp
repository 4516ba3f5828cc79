#pragma once

// Declarative dually epi-translation invariant valuations on grid functions:
// pairings with signed point measures, Hessian densities built from mixed
// determinants, constants, and finite linear combinations of these.

#include "vconv/grid.hpp"

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <optional>
#include <vector>

namespace vconv {

using Matrix = Eigen::MatrixXd;

/// A symmetric-matrix field: either one constant matrix or one per grid cell.
class MatrixField {
public:
    explicit MatrixField(Matrix constant);
    MatrixField(const GridDomain& domain, std::vector<Matrix> per_cell);

    [[nodiscard]] bool is_constant() const noexcept { return values_.size() == 1 && !domain_; }
    [[nodiscard]] const Matrix& at(std::size_t cell) const { return values_.size() == 1 ? values_[0] : values_[cell]; }
    [[nodiscard]] std::size_t dim() const { return static_cast<std::size_t>(values_.front().rows()); }
    [[nodiscard]] const std::optional<GridDomain>& domain() const noexcept { return domain_; }
    [[nodiscard]] const std::vector<Matrix>& values() const noexcept { return values_; }

private:
    std::optional<GridDomain> domain_;
    std::vector<Matrix> values_;
};

inline constexpr double kPairingTol = 1e-10;

class ValuationSpec {
public:
    enum class Kind { Pairing, Hessian, Constant, Composite };

    struct Term {
        double coefficient;
        std::shared_ptr<const ValuationSpec> spec;
    };

    /// sum_i w_i f(node_i). `checked` enforces sum w = 0 and sum w node = 0.
    static ValuationSpec pairing(std::vector<Point> nodes, std::vector<double> weights, bool checked = true);
    /// integral of weight * D(H_f, .., H_f, aux_1, .., aux_{n-k}) with H_f repeated k times.
    static ValuationSpec hessian(std::size_t k, ExtGridFn weight, std::vector<MatrixField> aux = {});
    static ValuationSpec constant(double value);
    static ValuationSpec composite(std::vector<Term> terms);

    [[nodiscard]] Kind kind() const noexcept { return kind_; }
    [[nodiscard]] const std::vector<Point>& nodes() const noexcept { return nodes_; }
    [[nodiscard]] const std::vector<double>& weights() const noexcept { return weights_; }
    [[nodiscard]] std::size_t order() const noexcept { return order_; }
    [[nodiscard]] const ExtGridFn& density() const { return *density_; }
    [[nodiscard]] const std::vector<MatrixField>& aux() const noexcept { return aux_; }
    [[nodiscard]] double value() const noexcept { return value_; }
    [[nodiscard]] const std::vector<Term>& terms() const noexcept { return terms_; }

    /// Degree of homogeneity when every part shares one, else nullopt.
    [[nodiscard]] std::optional<std::size_t> degree() const;

    /// Same valuation with every pairing node multiplied by t.
    [[nodiscard]] ValuationSpec dilated_nodes(double t) const;

private:
    ValuationSpec() = default;

    Kind kind_ = Kind::Constant;
    std::vector<Point> nodes_;
    std::vector<double> weights_;
    std::size_t order_ = 0;
    std::optional<ExtGridFn> density_;
    std::vector<MatrixField> aux_;
    double value_ = 0.0;
    std::vector<Term> terms_;
};

/// max of |sum w| and |sum w node| over the pairing conditions.
double pairing_defect(const std::vector<Point>& nodes, const std::vector<double>& weights);

double evaluate(const ValuationSpec& mu, const ExtGridFn& f);

/// Sum of the absolute values of every addend `evaluate` combines; the
/// natural scale for rounding-level comparisons.
double evaluation_magnitude(const ValuationSpec& mu, const ExtGridFn& f);

/// Cells whose values `evaluate` reads on `domain`.
ScanMask footprint(const ValuationSpec& mu, const GridDomain& domain);

using Functional = std::function<double(const ExtGridFn&)>;

Functional as_functional(const ValuationSpec& mu);

/// |mu(f) + mu(h) - mu(max(f,h)) - mu(min(f,h))|. Throws ConvexityViolation
/// unless min(f,h) is discretely convex.
double valuation_residual(const Functional& mu, const ExtGridFn& f, const ExtGridFn& h);
double valuation_residual(const ValuationSpec& mu, const ExtGridFn& f, const ExtGridFn& h);

/// |mu(f + <slope, .> + c) - mu(f)|.
double depi_invariance_residual(const ValuationSpec& mu, const ExtGridFn& f, std::span<const double> slope, double c);

struct HomogeneousComponents {
    std::vector<double> components; // degrees 0..n
    double residual = 0.0;          // |degree n+1 coefficient|
    double scale = 0.0;             // max |mu(t f)| over the probes
};

/// Probes mu(t f) for t = 1..n+2 and inverts the Vandermonde system.
HomogeneousComponents homogeneous_decompose(const Functional& mu, const ExtGridFn& f, std::size_t n);
HomogeneousComponents homogeneous_decompose(const ValuationSpec& mu, const ExtGridFn& f, std::size_t n);

/// f -> degree-`degree` component of mu, as a functional in its own right.
Functional homogeneous_component(const Functional& mu, std::size_t degree, std::size_t n);

/// Polarization of det: (1/n!) sum over nonempty S of (-1)^(n-|S|) det(sum_{i in S} A_i).
double mixed_determinant(const std::vector<Matrix>& matrices);

/// T(mu)[K] = mu(h_K(., -1)) with h_K sampled on `domain`.
double embed_T(const ValuationSpec& mu, const Polytope& body, const GridDomain& domain);

/// mu_U(f restricted to U). mu_U must only read cells of U, f must be finite on U.
double res_star(const ValuationSpec& mu_U, const ScanMask& U, const ExtGridFn& f);

/// mu(lsc extension of g from U): the inverse direction of `res_star`.
double extend_star(const ValuationSpec& mu, const ScanMask& U, const ExtGridFn& g);

} // namespace vconv
