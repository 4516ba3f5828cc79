#pragma once

#include "vconv/grid.hpp"
#include "vconv/valuation.hpp"

#include <cmath>

namespace fixture {

using namespace vconv;

/// f(e) + f(-e) - 2 f(0) along the first axis.
inline ValuationSpec second_difference(std::size_t dim, double t = 1.0) {
    Point plus(dim, 0.0), minus(dim, 0.0), zero(dim, 0.0);
    plus[0] = t;
    minus[0] = -t;
    return ValuationSpec::pairing({plus, minus, zero}, {1.0, 1.0, -2.0});
}

/// c |x - center|^2 / 2 (center defaults to the origin).
inline ExtGridFn quadratic(const GridDomain& d, double c = 1.0, Point center = {}) {
    if (center.empty()) center.assign(d.dim(), 0.0);
    return ExtGridFn::sample(d, [c, center](std::span<const double> x) {
        double s = 0.0;
        for (std::size_t a = 0; a < x.size(); ++a) s += (x[a] - center[a]) * (x[a] - center[a]);
        return 0.5 * c * s;
    });
}

inline ExtGridFn bump_weight(const GridDomain& d, Point center, double radius, double amplitude = 1.0) {
    return Bump{std::move(center), radius, amplitude}.sample(d);
}

/// Determinant of the Hessian weighted by a bump (2D, order 2).
inline ValuationSpec monge_ampere(const GridDomain& d, Point center = {0.0, 0.0}, double radius = 1.0) {
    return ValuationSpec::hessian(2, bump_weight(d, std::move(center), radius));
}

inline double quadrature(const ExtGridFn& phi) {
    double s = 0.0;
    for (std::size_t c = 0; c < phi.size(); ++c) s += phi[c];
    return s * phi.domain().cell_volume();
}

} // namespace fixture
