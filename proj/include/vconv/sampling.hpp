#pragma once

#include "vconv/grid.hpp"

#include <cstdint>
#include <random>

namespace vconv {

/// Seeded generator of random finite convex functions
///   x -> max_j (<a_j, x> + b_j) + (x - c)^T Q (x - c) / 2
/// with 1..max_pieces affine pieces and a random positive semidefinite Q.
class ConvexSampler {
public:
    struct Options {
        std::size_t max_pieces = 8;
        double slope_scale = 1.0;
        double curvature_scale = 0.5;
    };

    explicit ConvexSampler(std::uint64_t seed) : ConvexSampler(seed, Options{}) {}
    ConvexSampler(std::uint64_t seed, Options opts) : rng_(seed), opts_(opts) {}

    /// Next function sampled on `domain`; the quadratic is centered inside
    /// [center_lo, center_hi] (the whole box when those are empty).
    ExtGridFn next(const GridDomain& domain, std::span<const double> center_lo = {},
                   std::span<const double> center_hi = {});

private:
    std::mt19937_64 rng_;
    Options opts_;
};

} // namespace vconv
