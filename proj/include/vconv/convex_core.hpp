#pragma once

// Convex-analysis toolbox on grid functions: discrete convexity, the
// Legendre-Fenchel transform, Lipschitz regularization, an epi-distance
// surrogate, support functions of polytopes, and domain extension and
// restriction.
//
// A grid function stands for the function that equals the samples on the
// grid and +inf off the sampled box. Every sup/inf below runs over finite
// cells only.

#include "vconv/grid.hpp"

#include <utility>
#include <vector>

namespace vconv {

inline constexpr double kDefaultConvexTol = 1e-9;

/// Second differences along axes and {-1,0,1} diagonals on finite triples
/// must be >= -tol * (1 + max |f|), and finite cells must be contiguous on
/// every scan line.
bool is_discretely_convex(const ExtGridFn& f, double tol = kDefaultConvexTol);

/// Per-axis [min, max] of one-sided difference quotients between finite neighbours.
std::vector<std::pair<double, double>> slope_range(const ExtGridFn& f);

/// Slope range padded by 10% of its width on each side (at least 0.1),
/// same resolution as the primal grid.
GridDomain default_dual_domain(const ExtGridFn& f);

/// f*(y) = max over finite cells x of <y, x> - f(x), sampled on `dual`.
///
/// The subtraction is rounded toward +inf, which makes two facts hold bit
/// for bit on the grid: f <= g implies f* >= g*, and f** <= f.
ExtGridFn legendre(const ExtGridFn& f, const GridDomain& dual);
ExtGridFn legendre(const ExtGridFn& f);

/// Linear-time 1D transform (lower hull + monotone sweep). Same values as
/// `legendre` for 1D inputs.
ExtGridFn legendre_1d_fast(const ExtGridFn& f, const GridDomain& dual);

/// sup over finite interior cells of |f** - f|, with f* on the default dual grid.
double biconjugate_gap(const ExtGridFn& f);

/// reg_r f(x) = min over finite y of f(y) + |x - y| / r.
ExtGridFn lipschitz_regularize(const ExtGridFn& f, double r);

/// An r such that regularizing max(f, h) and min(f, h) with any r' <= r
/// commutes with the cellwise max/min: below it every minimiser of
/// g(y) + |x - y| / r' is the grid point of dom g nearest to x.
double regularization_compatibility_radius(const ExtGridFn& f, const ExtGridFn& h);

/// sum_{j=1..8} 2^-j min(1, d_j). d_j is the sup over cells in the ball of
/// radius j * radius / 8 around the box center of
///   |f - g|                 where both are finite,
///   1 / (1 + max(v, 0))     where exactly one is finite with value v.
double epi_distance(const ExtGridFn& f, const ExtGridFn& g);

/// x -> h_K(x, -1) on the grid.
ExtGridFn body_to_function(const Polytope& body, const GridDomain& domain);

/// h_K(., -1) for K = epi(f*) cut to |y| <= 2c, |t| <= (2R+3)c with
/// c = max |f| on the ball of radius R + 2. Agrees with f on the ball of
/// radius R + 1 up to discretization.
ExtGridFn reconstruct_from_conjugate(const ExtGridFn& f, double R);

/// Finite convex extension of f from the inner box [A_lo - s/2, A_hi + s/2]:
/// equal to f there, and elsewhere the max over inner cells y of
/// f(y) + <p(y), x - y>, where p(y) is the subgradient of f on the data box
/// [A_lo - s, A_hi + s] that grows least away from the inner box center.
/// In 1D this is the chord continuation sup l f(y) + (1 - l) f(z), l >= 1.
/// Slopes are bounded by 2 |f| / (s/2) with |f| the sup on the data box.
ExtGridFn extend_from_subdomain(const ExtGridFn& f, std::span<const double> A_lo,
                                std::span<const double> A_hi, double s);

/// Marked cells keep their value, unmarked face-neighbours of the mask get
/// the minimum of their marked neighbours, everything else becomes +inf.
ExtGridFn lsc_extend(const ExtGridFn& f_open, const ScanMask& U);

/// +inf on every unmarked cell.
ExtGridFn restrict_to(const ExtGridFn& f, const ScanMask& U);

struct ConvexSplit {
    ExtGridFn convex_part; // c |x|^2 / 2 + phi
    ExtGridFn quadratic;   // c |x|^2 / 2
    double c;
};

/// phi = convex_part - quadratic with both halves discretely convex.
ConvexSplit convex_split(const ExtGridFn& phi);
/// Same with c taken from the analytic derivatives of the bump.
ConvexSplit convex_split(const Bump& phi, const GridDomain& domain);

} // namespace vconv
