#pragma once

// Multilinear structure of homogeneous valuations: polarization, evaluation
// of the Goodey-Weil distributions on smooth test functions, support
// scanning, and a sampled lower bound for the semi-norms |mu|_{A,s}.

#include "vconv/grid.hpp"
#include "vconv/valuation.hpp"

#include <cstdint>
#include <variant>
#include <vector>

namespace vconv {

/// (1/k!) sum over nonempty S of (-1)^(k-|S|) mu(sum_{i in S} f_i).
/// Throws Precondition when |mu(2F) - 2^k mu(F)| > 1e-8 * scale for F = sum f_i.
double polarize(const ValuationSpec& mu, std::size_t k, const std::vector<ExtGridFn>& fs);

using TestFunction = std::variant<Bump, ExtGridFn>;

ExtGridFn sample(const TestFunction& phi, const GridDomain& domain);
/// Analytic for bumps, discrete for grid functions.
double c2_norm(const TestFunction& phi, const GridDomain& domain);

struct GWQuery {
    std::vector<TestFunction> tests; // k = tests.size()
    ExtGridFn base;                  // strictly convex base function
    double step = 0.0;               // 0 selects the default step and halving
    double test_norm = 0.0;          // max C2 norm of the tests; computed when 0

    /// Base |x|^2 on `domain`.
    static GWQuery standard(const GridDomain& domain, std::vector<TestFunction> tests, double step = 0.0);
};

struct GWResult {
    double value = 0.0;      // mixed difference at step h
    double value_half = 0.0; // same at h/2
    double step = 0.0;       // h
    double agreement = 0.0;  // |value - value_half| / max(|value|, |value_half|), 0 when both vanish
    double noise = 0.0;      // rounding bound on the mixed difference at h/2
    std::size_t halvings = 0;
};

inline constexpr std::size_t kMaxHalvings = 10;
inline constexpr double kStepAgreementTol = 1e-7;

/// GW(mu)[phi_1 x .. x phi_k] = (1/(k! h^k)) sum over S of (-1)^(k-|S|) mu(f + h sum_{i in S} phi_i).
/// Every corner function must be discretely convex (ConvexityViolation
/// otherwise); the h and h/2 values must agree to 1e-7 relative above the
/// rounding floor (Precondition otherwise).
GWResult gw_eval(const ValuationSpec& mu, const GWQuery& query);

/// Sum of |weights| for pairings, n! * integral |density| * prod |aux| for
/// Hessian densities, |c| for constants, combined linearly for composites.
double valuation_norm_proxy(const ValuationSpec& mu);

struct DiagonalityReport {
    GWResult gw;
    double residual = 0.0; // |gw value|
    double scale = 0.0;    // norm proxy * prod c2 norms
};

/// Throws Precondition unless the test functions' Hessian stencils never
/// overlap, i.e. at least two empty cells separate any two supports.
DiagonalityReport diagonality_residual(const ValuationSpec& mu, const std::vector<TestFunction>& tests,
                                       const GridDomain& domain);

struct ScanOptions {
    double probe_radius = 0.5;
    double tol = 1e-6;
};

struct ScanResult {
    ScanMask mask;
    std::vector<double> response; // s(c) per cell
};

/// s(c) = GW(mu) with every test function a unit bump of the probe radius at
/// cell c; marks |s(c)| > tol * max |s|. Degree-0 valuations give an empty mask.
ScanResult support_scan(const ValuationSpec& mu, std::size_t k, const GridDomain& domain, const ScanOptions& options);

/// Hausdorff distance, in cells, between the scan of the pairing with nodes
/// shifted by v and the scan of the original shifted by v.
double translate_covariance_residual(const ValuationSpec& mu, std::span<const double> v, const GridDomain& domain,
                                     const ScanOptions& options);

/// Hausdorff distance between the marked cells of two masks, in cell units
/// per axis, after moving the cells of `a` by `shift`.
double mask_hausdorff(const ScanMask& a, const ScanMask& b, std::span<const double> shift = {});

struct SeminormResult {
    double estimate = 0.0;
    std::size_t best_sample = 0;
    std::size_t samples = 0;
};

/// Lower bound for sup |mu(f)| over convex f with |f| <= 1 on A + 2s: sample
/// 0 is |x - center(A)|, the rest random convex functions; each is extended
/// from A by `extend_from_subdomain` and rescaled to [-1, 1] on [A - 2s, A + 2s].
SeminormResult seminorm_estimate(const ValuationSpec& mu, const GridDomain& domain, std::span<const double> A_lo,
                                 std::span<const double> A_hi, double s, std::size_t n_samples, std::uint64_t seed);

} // namespace vconv
