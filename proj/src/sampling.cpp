#include "vconv/sampling.hpp"

#include <algorithm>

namespace vconv {

ExtGridFn ConvexSampler::next(const GridDomain& domain, std::span<const double> center_lo,
                              std::span<const double> center_hi) {
    const std::size_t n = domain.dim();
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> pieces(1, std::max<std::size_t>(opts_.max_pieces, 1));

    const std::size_t m = pieces(rng_);
    std::vector<Point> slopes(m, Point(n));
    std::vector<double> offsets(m);
    for (std::size_t j = 0; j < m; ++j) {
        for (double& a : slopes[j]) a = opts_.slope_scale * normal(rng_);
        offsets[j] = normal(rng_);
    }

    // Q = B B^T
    std::vector<double> B(n * n);
    for (double& b : B) b = opts_.curvature_scale * normal(rng_);
    std::vector<double> Q(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t l = 0; l < n; ++l) Q[i * n + j] += B[i * n + l] * B[j * n + l];

    Point c(n);
    for (std::size_t a = 0; a < n; ++a) {
        const double lo = center_lo.empty() ? domain.lo()[a] : center_lo[a];
        const double hi = center_hi.empty() ? domain.hi()[a] : center_hi[a];
        c[a] = lo + (hi - lo) * unit(rng_);
    }

    return ExtGridFn::sample(domain, [&](std::span<const double> x) {
        double piece = -kInf;
        for (std::size_t j = 0; j < m; ++j) piece = std::max(piece, dot(slopes[j], x) + offsets[j]);
        double quad = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) quad += (x[i] - c[i]) * Q[i * n + j] * (x[j] - c[j]);
        return piece + 0.5 * quad;
    });
}

} // namespace vconv
