#include "fixtures.hpp"
#include "oracles.hpp"

#include "vconv/convex_core.hpp"
#include "vconv/error.hpp"
#include "vconv/polarization.hpp"
#include "vconv/sampling.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace vconv;

namespace {

Matrix random_psd(std::mt19937_64& rng, std::size_t n) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Matrix B(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < B.rows(); ++i)
        for (Eigen::Index j = 0; j < B.cols(); ++j) B(i, j) = u(rng);
    return B * B.transpose();
}

ExtGridFn quadratic_form(const GridDomain& d, const Matrix& A) {
    return ExtGridFn::sample(d, [&A](std::span<const double> x) {
        Eigen::VectorXd v(static_cast<Eigen::Index>(x.size()));
        for (std::size_t a = 0; a < x.size(); ++a) v(static_cast<Eigen::Index>(a)) = x[a];
        return 0.5 * v.dot(A * v);
    });
}

// delta_1 delta_2 coefficient of mu(f + d1 phi1 + d2 phi2) from a 3 x 3 stencil in (d1, d2), over 2!.
double stencil_gw2(const ValuationSpec& mu, const ExtGridFn& f, const ExtGridFn& p1, const ExtGridFn& p2, double step) {
    auto at = [&](double a, double b) { return evaluate(mu, f + a * p1 + b * p2); };
    const double coeff = (at(step, step) - at(step, -step) - at(-step, step) + at(-step, -step)) / (4 * step * step);
    return coeff / 2.0;
}

} // namespace

TEST_CASE("polarization") {
    const auto d = GridDomain::cube(2, -2, 2, 41);
    const auto phi = fixture::bump_weight(d, {0.0, 0.0}, 1.2);
    const auto ma = ValuationSpec::hessian(2, phi);
    ConvexSampler sampler(43);

    SUBCASE("order one is evaluation") {
        const auto mu1 = fixture::second_difference(2);
        const auto f = sampler.next(d);
        CHECK(polarize(mu1, 1, {f}) == evaluate(mu1, f));
    }
    SUBCASE("diagonal recovery, symmetry and additivity") {
        for (int trial = 0; trial < 5; ++trial) {
            const auto f = sampler.next(d);
            const auto g = sampler.next(d);
            const auto h = sampler.next(d);
            const double scale = evaluation_magnitude(ma, f) + evaluation_magnitude(ma, g) + evaluation_magnitude(ma, h);
            CHECK(std::abs(polarize(ma, 2, {f, f}) - evaluate(ma, f)) <= 1e-12 * scale);
            CHECK(std::abs(polarize(ma, 2, {f, g}) - polarize(ma, 2, {g, f})) <= 1e-12 * scale);
            const double sum = polarize(ma, 2, {f + g, h});
            const double parts = polarize(ma, 2, {f, h}) + polarize(ma, 2, {g, h});
            CHECK(std::abs(sum - parts) <= 1e-9 * scale);
        }
    }
    SUBCASE("quadratics give the mixed determinant of their matrices") {
        std::mt19937_64 rng(47);
        for (int trial = 0; trial < 5; ++trial) {
            const Matrix A1 = random_psd(rng, 2);
            const Matrix A2 = random_psd(rng, 2);
            const double expect = fixture::quadrature(phi) * oracle::mixed_determinant({A1, A2});
            const double got = polarize(ma, 2, {quadratic_form(d, A1), quadratic_form(d, A2)});
            CHECK(got == doctest::Approx(expect).epsilon(1e-8));
        }
    }
    SUBCASE("inhomogeneous valuations are refused") {
        auto one = std::make_shared<const ValuationSpec>(ValuationSpec::constant(1.0));
        auto m = std::make_shared<const ValuationSpec>(ma);
        const auto mixed = ValuationSpec::composite({{1.0, one}, {1.0, m}});
        const auto f = sampler.next(d);
        CHECK_THROWS_AS((void)polarize(mixed, 2, {f, f}), Error);
    }
}

TEST_CASE("goodey-weil evaluation") {
    SUBCASE("pairings act on the test function") {
        const auto d = GridDomain::cube(1, -2, 2, 81);
        const auto mu = ValuationSpec::pairing({{-1.0}, {0.0}, {1.0}}, {1.0, -2.0, 1.0});
        const Bump b{{0.3}, 1.0, 1.0};
        const auto r = gw_eval(mu, GWQuery::standard(d, {b}));
        const auto sampled = b.sample(d);
        const double expect = sampled.interpolate(std::vector<double>{-1.0}) - 2 * sampled.interpolate(std::vector<double>{0.0}) +
                              sampled.interpolate(std::vector<double>{1.0});
        CHECK(std::abs(r.value - expect) <= 1e-12);
        CHECK(r.agreement <= 1e-7);

        const auto far = gw_eval(mu, GWQuery::standard(d, {Bump{{-1.6}, 0.3, 1.0}}));
        CHECK(std::abs(far.value) <= 1e-12);
    }
    SUBCASE("order two hessian density matches a delta stencil") {
        const auto d = GridDomain::cube(2, -2, 2, 41);
        const auto ma = fixture::monge_ampere(d, {0.0, 0.0}, 1.5);
        const Bump b1{{0.2, 0.0}, 0.8, 1.0};
        const Bump b2{{-0.3, 0.1}, 0.9, 0.5};
        const auto r = gw_eval(ma, GWQuery::standard(d, {b1, b2}));
        const auto base = ExtGridFn::sample(d, [](std::span<const double> x) { return dot(x, x); });
        const double expect = stencil_gw2(ma, base, b1.sample(d), b2.sample(d), 1e-2);
        CHECK(r.value == doctest::Approx(expect).epsilon(1e-6));
        CHECK(r.agreement <= 1e-7);

        SUBCASE("multilinear in each test function") {
            const double alpha = 2.5;
            const auto scaled = gw_eval(ma, GWQuery::standard(d, {Bump{b1.center, b1.radius, alpha}, b2}));
            CHECK(scaled.value == doctest::Approx(alpha * r.value).epsilon(1e-10));
        }
        SUBCASE("explicit steps that break convexity are refused") {
            CHECK_THROWS_AS((void)gw_eval(ma, GWQuery::standard(d, {b1, b2}, 10.0)), Error);
        }
    }
    SUBCASE("h and h/2 agree on random queries") {
        std::mt19937_64 rng(53);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        const auto d = GridDomain::cube(2, -2, 2, 33);
        const auto ma = fixture::monge_ampere(d, {0.0, 0.0}, 1.4);
        for (int trial = 0; trial < 6; ++trial) {
            const Bump b1{{u(rng), u(rng)}, 0.6 + 0.3 * std::abs(u(rng)), u(rng)};
            const Bump b2{{u(rng), u(rng)}, 0.6 + 0.3 * std::abs(u(rng)), u(rng)};
            const auto r = gw_eval(ma, GWQuery::standard(d, {b1, b2}));
            CHECK(std::abs(r.value - r.value_half) <= 1e-7 * std::max(std::abs(r.value), std::abs(r.value_half)) + 2 * r.noise);
        }
    }
}

TEST_CASE("diagonality") {
    const auto d = GridDomain::cube(2, -3, 3, 61);
    const auto ma = fixture::monge_ampere(d, {0.0, 0.0}, 2.8);
    const Bump left{{-2.0, 0.0}, 0.5, 1.0};
    const Bump right{{2.0, 0.0}, 0.5, 1.0};
    const auto report = diagonality_residual(ma, {left, right}, d);
    CHECK(report.residual <= 1e-8 * report.scale);

    const auto same = gw_eval(ma, GWQuery::standard(d, {left, left}));
    CHECK(std::abs(same.value) > 1e-3);

    SUBCASE("supports closer than two empty cells are refused") {
        const Bump a{{0.0, 0.0}, 0.5, 1.0};
        const Bump b{{1.0, 0.0}, 0.5, 1.0};
        CHECK_THROWS_AS((void)diagonality_residual(ma, {a, b}, d), Error);
    }
    SUBCASE("order one has nothing to separate") {
        const auto mu = ValuationSpec::pairing({{-1, 0}, {0, 0}, {1, 0}}, {1, -2, 1});
        const auto one = diagonality_residual(mu, {left}, d);
        CHECK(one.residual == doctest::Approx(std::abs(one.gw.value)));
    }
}

TEST_CASE("support scan") {
    SUBCASE("second difference is supported on its nodes") {
        const auto d = GridDomain::cube(1, -2, 2, 81);
        const auto mu1 = fixture::second_difference(1);
        const ScanOptions opt{0.25, 1e-6};
        const auto scan = support_scan(mu1, 1, d, opt);
        for (std::size_t c = 0; c < d.size(); ++c) {
            const double x = d.point(c)[0];
            const double gap = std::min({std::abs(x + 1), std::abs(x), std::abs(x - 1)});
            if (scan.mask[c]) CHECK(gap < opt.probe_radius);
            if (gap >= opt.probe_radius) CHECK(scan.response[c] == 0.0);
        }
        for (double node : {-1.0, 0.0, 1.0}) CHECK(scan.mask[d.ravel(d.nearest(std::vector<double>{node}))]);
    }
    SUBCASE("constants have empty support") {
        const auto d = GridDomain::cube(1, -2, 2, 21);
        CHECK(support_scan(ValuationSpec::constant(1.0), 0, d, {}).mask.none());
        CHECK(support_scan(ValuationSpec::constant(1.0), 1, d, {}).mask.none());
    }
    SUBCASE("hessian density stays near its weight") {
        const auto d = GridDomain::cube(2, -2.5, 2.5, 41);
        const auto ma = fixture::monge_ampere(d, {0.0, 0.0}, 1.0);
        const ScanOptions opt{0.5, 1e-6};
        const auto scan = support_scan(ma, 2, d, opt);
        CHECK_FALSE(scan.mask.none());
        // A stencil reaches one diagonal step beyond the bump support.
        const double reach = 1.0 + opt.probe_radius + std::sqrt(2.0) * d.spacing(0);
        for (std::size_t c = 0; c < d.size(); ++c)
            if (scan.mask[c]) CHECK(norm(d.point(c)) < reach);
    }
    SUBCASE("argmax follows dilation of the nodes") {
        const auto d = GridDomain::cube(1, -4, 4, 161);
        const auto mu = ValuationSpec::pairing({{0.5}, {1.0}, {2.0}}, {2.0, -3.0, 1.0});
        const ScanOptions opt{0.2, 1e-6};
        auto argmax = [&](const ValuationSpec& m) {
            const auto scan = support_scan(m, 1, d, opt);
            std::size_t best = 0;
            for (std::size_t c = 0; c < d.size(); ++c)
                if (std::abs(scan.response[c]) > std::abs(scan.response[best])) best = c;
            return d.point(best)[0];
        };
        const double base = argmax(mu);
        for (double t : {1.5, 0.8}) CHECK(std::abs(argmax(mu.dilated_nodes(t)) - t * base) <= d.spacing(0) + 1e-12);
    }
}

TEST_CASE("translation covariance of the scan") {
    const auto d = GridDomain::cube(1, -3, 3, 121);
    const auto mu1 = fixture::second_difference(1);
    const ScanOptions opt{0.3, 1e-6};
    CHECK(translate_covariance_residual(mu1, std::vector<double>{0.0}, d, opt) == 0.0);
    CHECK(translate_covariance_residual(mu1, std::vector<double>{0.5}, d, opt) <= 1.0);
    CHECK_THROWS_AS((void)translate_covariance_residual(mu1, std::vector<double>{3.0}, d, opt), Error);
}

TEST_CASE("seminorm lower bound") {
    const auto d = GridDomain::cube(1, -3, 3, 121);
    const std::vector<double> lo{-1.0}, hi{1.0};
    CHECK(seminorm_estimate(ValuationSpec::constant(0.0), d, lo, hi, 0.25, 5, 1).estimate == 0.0);

    const auto mu1 = fixture::second_difference(1);
    const auto first = seminorm_estimate(mu1, d, lo, hi, 0.25, 1, 9);
    CHECK(first.estimate == doctest::Approx(4.0 / 1.5).epsilon(1e-12));
    CHECK(first.estimate >= 2.0);

    const auto few = seminorm_estimate(mu1, d, lo, hi, 0.25, 10, 9);
    const auto many = seminorm_estimate(mu1, d, lo, hi, 0.25, 100, 9);
    CHECK(few.estimate <= many.estimate);
    CHECK(many.samples == 100);
    CHECK(seminorm_estimate(mu1, d, lo, hi, 0.25, 10, 9).estimate == few.estimate);

    CHECK_THROWS_AS((void)seminorm_estimate(mu1, d, lo, hi, 1.5, 3, 9), Error);
}
