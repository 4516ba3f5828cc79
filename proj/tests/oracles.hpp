#pragma once

// Brute-force reference computations used only by the tests. They share no
// code path with the library beyond the grid types.

#include "vconv/grid.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace oracle {

using vconv::ExtGridFn;
using vconv::GridDomain;
using vconv::kInf;

/// sup_x <y, x> - f(x) by a plain double loop in ordinary rounding.
inline std::vector<double> conjugate(const ExtGridFn& f, const GridDomain& dual) {
    const GridDomain& d = f.domain();
    std::vector<double> out(dual.size(), -kInf);
    for (std::size_t j = 0; j < dual.size(); ++j) {
        const auto y = dual.point(j);
        for (std::size_t i = 0; i < d.size(); ++i) {
            if (!(f[i] < kInf)) continue;
            const auto x = d.point(i);
            double p = 0.0;
            for (std::size_t a = 0; a < x.size(); ++a) p += x[a] * y[a];
            out[j] = std::max(out[j], p - f[i]);
        }
    }
    return out;
}

/// Lower convex envelope of 1D samples by minimising over all chords.
inline std::vector<double> convex_envelope_1d(const std::vector<double>& x, const std::vector<double>& f) {
    const std::size_t n = x.size();
    std::vector<double> env(f);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t a = 0; a <= i; ++a)
            for (std::size_t b = i; b < n; ++b) {
                if (a == b) continue;
                const double t = (x[i] - x[a]) / (x[b] - x[a]);
                env[i] = std::min(env[i], (1 - t) * f[a] + t * f[b]);
            }
    return env;
}

/// min_y f(y) + L |x - y| over every grid pair.
inline std::vector<double> inf_convolution(const ExtGridFn& f, double L) {
    const GridDomain& d = f.domain();
    std::vector<double> out(d.size(), kInf);
    for (std::size_t k = 0; k < d.size(); ++k) {
        const auto x = d.point(k);
        for (std::size_t i = 0; i < d.size(); ++i) {
            if (!(f[i] < kInf)) continue;
            const auto y = d.point(i);
            double s = 0.0;
            for (std::size_t a = 0; a < x.size(); ++a) s += (x[a] - y[a]) * (x[a] - y[a]);
            out[k] = std::min(out[k], f[i] + L * std::sqrt(s));
        }
    }
    return out;
}

/// 1D chord extension: sup over grid pairs y, z inside [lo_idx, hi_idx] with
/// x = l y + (1 - l) z, l >= 1, of l f(y) + (1 - l) f(z).
inline std::vector<double> chord_extension_1d(const ExtGridFn& f, std::size_t lo_idx, std::size_t hi_idx) {
    const GridDomain& d = f.domain();
    std::vector<double> out(d.size());
    for (std::size_t k = 0; k < d.size(); ++k) {
        if (k >= lo_idx && k <= hi_idx) {
            out[k] = f[k];
            continue;
        }
        const double x = d.coord(0, static_cast<std::ptrdiff_t>(k));
        double best = -kInf;
        for (std::size_t iy = lo_idx; iy <= hi_idx; ++iy)
            for (std::size_t iz = lo_idx; iz <= hi_idx; ++iz) {
                if (iy == iz) continue;
                const double y = d.coord(0, static_cast<std::ptrdiff_t>(iy));
                const double z = d.coord(0, static_cast<std::ptrdiff_t>(iz));
                const double l = (x - z) / (y - z);
                if (l < 1.0) continue;
                best = std::max(best, l * f[iy] + (1 - l) * f[iz]);
            }
        out[k] = best;
    }
    return out;
}

/// h_K(x, -1) for K = epi(f*) cut to |y| <= 2c, |t| <= (2R+3)c, with f* taken
/// over every dual grid point of `dual` (brute force, no clipping tricks).
inline std::vector<double> truncated_epigraph_support(const ExtGridFn& f, double R, const GridDomain& dual) {
    const GridDomain& d = f.domain();
    double c = 0.0;
    for (std::size_t k = 0; k < d.size(); ++k) {
        const auto x = d.point(k);
        double r2 = 0.0;
        for (double v : x) r2 += v * v;
        if (std::sqrt(r2) <= (R + 2) * (1 + 1e-12)) c = std::max(c, std::abs(f[k]));
    }
    const auto fstar = conjugate(f, dual);
    std::vector<double> out(d.size(), -kInf);
    for (std::size_t j = 0; j < dual.size(); ++j) {
        const auto y = dual.point(j);
        double ny = 0.0;
        for (double v : y) ny += v * v;
        if (std::sqrt(ny) > 2 * c || fstar[j] > (2 * R + 3) * c) continue;
        const double t = std::max(fstar[j], -(2 * R + 3) * c);
        for (std::size_t k = 0; k < d.size(); ++k) {
            const auto x = d.point(k);
            double p = 0.0;
            for (std::size_t a = 0; a < x.size(); ++a) p += x[a] * y[a];
            out[k] = std::max(out[k], p - t);
        }
    }
    return out;
}

inline double sup_diff(const ExtGridFn& f, const ExtGridFn& g) {
    double m = 0.0;
    for (std::size_t k = 0; k < f.size(); ++k)
        if (f[k] < kInf && g[k] < kInf) m = std::max(m, std::abs(f[k] - g[k]));
    return m;
}

/// Coefficient of lambda_1 ... lambda_n in det(sum lambda_i A_i), divided by
/// n!, extracted with a 5-point first-derivative stencil in every lambda_i.
inline double mixed_determinant(const std::vector<Eigen::MatrixXd>& A) {
    const std::size_t n = A.size();
    const double offsets[4] = {-2.0, -1.0, 1.0, 2.0};
    const double coeffs[4] = {1.0 / 12.0, -8.0 / 12.0, 8.0 / 12.0, -1.0 / 12.0};
    double total = 0.0;
    std::size_t combos = 1;
    for (std::size_t i = 0; i < n; ++i) combos *= 4;
    for (std::size_t code = 0; code < combos; ++code) {
        Eigen::MatrixXd M = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
        double weight = 1.0;
        std::size_t c = code;
        for (std::size_t i = 0; i < n; ++i, c /= 4) {
            M += offsets[c % 4] * A[i];
            weight *= coeffs[c % 4];
        }
        total += weight * M.determinant();
    }
    double factorial = 1.0;
    for (std::size_t i = 2; i <= n; ++i) factorial *= static_cast<double>(i);
    return total / factorial;
}

} // namespace oracle
