#include "vconv/polarization.hpp"

#include "vconv/convex_core.hpp"
#include "vconv/error.hpp"
#include "vconv/sampling.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <exception>
#include <limits>
#include <thread>

namespace vconv {

namespace {

double factorial(std::size_t k) {
    double f = 1.0;
    for (std::size_t i = 2; i <= k; ++i) f *= static_cast<double>(i);
    return f;
}

double subset_sign(std::size_t k, std::size_t mask) {
    const auto size = static_cast<std::size_t>(std::popcount(mask));
    return ((k - size) % 2 == 0) ? 1.0 : -1.0;
}

// Runs body(i) for i in [0, n) on all hardware threads; each index is
// independent, so the result does not depend on the schedule.
template <class Body>
void parallel_for(std::size_t n, Body body) {
    const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(std::thread::hardware_concurrency(), n));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < n; i += workers) body(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
}

ExtGridFn corner(const ExtGridFn& base, const std::vector<ExtGridFn>& phis, double h, std::size_t mask) {
    std::vector<double> v = base.values();
    for (std::size_t i = 0; i < phis.size(); ++i) {
        if (!((mask >> i) & 1U)) continue;
        for (std::size_t c = 0; c < v.size(); ++c)
            if (v[c] < kInf) v[c] += h * phis[i][c];
    }
    return ExtGridFn(base.domain(), std::move(v));
}

struct MixedDifference {
    double value;
    double noise;
};

MixedDifference mixed_difference(const ValuationSpec& mu, const ExtGridFn& base, const std::vector<ExtGridFn>& phis,
                                 double h) {
    const std::size_t k = phis.size();
    double sum = 0.0;
    double magnitude = 0.0;
    for (std::size_t mask = 0; mask < (std::size_t{1} << k); ++mask) {
        const ExtGridFn f = corner(base, phis, h, mask);
        sum += subset_sign(k, mask) * evaluate(mu, f);
        magnitude += evaluation_magnitude(mu, f);
    }
    const double denom = factorial(k) * std::pow(h, static_cast<double>(k));
    return {sum / denom, 64.0 * std::numeric_limits<double>::epsilon() * magnitude / denom};
}

bool corners_convex(const ExtGridFn& base, const std::vector<ExtGridFn>& phis, double h) {
    for (std::size_t mask = 0; mask < (std::size_t{1} << phis.size()); ++mask)
        if (!is_discretely_convex(corner(base, phis, h, mask))) return false;
    return true;
}

} // namespace

double polarize(const ValuationSpec& mu, std::size_t k, const std::vector<ExtGridFn>& fs) {
    require(k >= 1 && fs.size() == k, "polarization needs k >= 1 functions");
    for (const ExtGridFn& f : fs) require(f.domain() == fs.front().domain(), "functions live on different grids");

    ExtGridFn total = fs.front();
    for (std::size_t i = 1; i < k; ++i) total = total + fs[i];
    const double lift = std::pow(2.0, static_cast<double>(k));
    const double homogeneity = std::abs(evaluate(mu, 2.0 * total) - lift * evaluate(mu, total));
    const double scale = evaluation_magnitude(mu, 2.0 * total) + lift * evaluation_magnitude(mu, total);
    require(homogeneity <= 1e-8 * scale, "valuation is not homogeneous of the requested degree");

    double sum = 0.0;
    for (std::size_t mask = 1; mask < (std::size_t{1} << k); ++mask) {
        std::optional<ExtGridFn> partial;
        for (std::size_t i = 0; i < k; ++i)
            if ((mask >> i) & 1U) partial = partial ? *partial + fs[i] : fs[i];
        sum += subset_sign(k, mask) * evaluate(mu, *partial);
    }
    return sum / factorial(k);
}

ExtGridFn sample(const TestFunction& phi, const GridDomain& domain) {
    if (const auto* b = std::get_if<Bump>(&phi)) return b->sample(domain);
    const auto& g = std::get<ExtGridFn>(phi);
    require(g.domain() == domain, "test function lives on a different grid");
    require(g.all_finite(), "test function must be finite");
    return g;
}

double c2_norm(const TestFunction& phi, const GridDomain& domain) {
    if (const auto* b = std::get_if<Bump>(&phi)) return b->c2_norm(domain);
    return discrete_c2_norm(std::get<ExtGridFn>(phi));
}

GWQuery GWQuery::standard(const GridDomain& domain, std::vector<TestFunction> tests, double step) {
    return GWQuery{std::move(tests), ExtGridFn::sample(domain, [](std::span<const double> x) { return dot(x, x); }),
                   step, 0.0};
}

GWResult gw_eval(const ValuationSpec& mu, const GWQuery& query) {
    const std::size_t k = query.tests.size();
    const GridDomain& d = query.base.domain();
    require(k >= 1 && k <= d.dim(), "Goodey-Weil order must lie in 1..dim");
    require(query.step >= 0.0 && std::isfinite(query.step), "step must be nonnegative");

    std::vector<ExtGridFn> phis;
    double norm = query.test_norm;
    for (const TestFunction& t : query.tests) {
        phis.push_back(sample(t, d));
        if (query.test_norm <= 0.0) norm = std::max(norm, c2_norm(t, d));
    }

    GWResult r;
    const bool fixed = query.step > 0.0;
    double h = fixed ? query.step : (norm > 0.0 ? std::min(0.1, 1.0 / (static_cast<double>(k) * norm)) : 0.1);
    while (!corners_convex(query.base, phis, h)) {
        if (fixed) fail(ErrorKind::ConvexityViolation, "corner functions are not convex at the requested step");
        if (r.halvings == kMaxHalvings)
            fail(ErrorKind::ConvexityViolation, "corner functions stay nonconvex after 10 step halvings");
        h *= 0.5;
        ++r.halvings;
    }

    const MixedDifference full = mixed_difference(mu, query.base, phis, h);
    const MixedDifference half = mixed_difference(mu, query.base, phis, 0.5 * h);
    r.step = h;
    r.value = full.value;
    r.value_half = half.value;
    r.noise = half.noise;
    const double diff = std::abs(full.value - half.value);
    const double size = std::max(std::abs(full.value), std::abs(half.value));
    r.agreement = size > 0.0 ? diff / size : 0.0;
    if (diff > kStepAgreementTol * size + full.noise + half.noise)
        fail(ErrorKind::Precondition, "Goodey-Weil values at h and h/2 disagree; the valuation is not polynomial");
    return r;
}

double valuation_norm_proxy(const ValuationSpec& mu) {
    switch (mu.kind()) {
    case ValuationSpec::Kind::Pairing: {
        double s = 0.0;
        for (double w : mu.weights()) s += std::abs(w);
        return s;
    }
    case ValuationSpec::Kind::Hessian: {
        const ExtGridFn& phi = mu.density();
        double s = 0.0;
        for (std::size_t c = 0; c < phi.size(); ++c) s += std::abs(phi[c]);
        s *= phi.domain().cell_volume() * factorial(phi.domain().dim());
        for (const MatrixField& a : mu.aux()) {
            double m = 0.0;
            for (const Matrix& v : a.values()) m = std::max(m, v.cwiseAbs().maxCoeff());
            s *= m;
        }
        return s;
    }
    case ValuationSpec::Kind::Constant:
        return std::abs(mu.value());
    case ValuationSpec::Kind::Composite: {
        double s = 0.0;
        for (const auto& t : mu.terms()) s += std::abs(t.coefficient) * valuation_norm_proxy(*t.spec);
        return s;
    }
    }
    return 0.0;
}

namespace {

std::vector<bool> dilated_support(const ExtGridFn& phi) {
    const GridDomain& d = phi.domain();
    std::vector<bool> out(d.size(), false);
    const auto dirs = stencil_directions(d.dim(), true);
    for (std::size_t c = 0; c < d.size(); ++c) {
        if (phi[c] == 0.0) continue;
        out[c] = true;
        const MultiIndex idx = d.unravel(c);
        for (const MultiIndex& dir : dirs)
            for (int sign : {1, -1}) {
                const MultiIndex off{sign * dir[0], sign * dir[1], sign * dir[2]};
                if (const auto j = d.neighbor(idx, off)) out[*j] = true;
            }
    }
    return out;
}

} // namespace

DiagonalityReport diagonality_residual(const ValuationSpec& mu, const std::vector<TestFunction>& tests,
                                       const GridDomain& domain) {
    std::vector<std::vector<bool>> halos;
    double scale = valuation_norm_proxy(mu);
    for (const TestFunction& t : tests) {
        halos.push_back(dilated_support(sample(t, domain)));
        scale *= c2_norm(t, domain);
    }
    for (std::size_t i = 0; i < halos.size(); ++i)
        for (std::size_t j = i + 1; j < halos.size(); ++j)
            for (std::size_t c = 0; c < domain.size(); ++c)
                require(!(halos[i][c] && halos[j][c]),
                        "test function supports must be separated by at least two empty cells");

    DiagonalityReport report;
    report.gw = gw_eval(mu, GWQuery::standard(domain, tests));
    report.residual = std::abs(report.gw.value);
    report.scale = scale;
    return report;
}

ScanResult support_scan(const ValuationSpec& mu, std::size_t k, const GridDomain& domain, const ScanOptions& options) {
    require(options.probe_radius > 0.0, "probe radius must be positive");
    require(options.tol >= 0.0, "scan tolerance must be nonnegative");
    ScanResult out{ScanMask::empty(domain), std::vector<double>(domain.size(), 0.0)};
    const auto degree = mu.degree();
    if (k == 0 || (degree && *degree == 0)) return out;
    if (degree) require(*degree == k, "scan order does not match the valuation's degree");

    const double probe_norm = Bump{domain.center(), options.probe_radius, 1.0}.c2_norm(domain);
    const GWQuery prototype = GWQuery::standard(domain, {});
    parallel_for(domain.size(), [&](std::size_t c) {
        GWQuery q = prototype;
        q.tests.assign(k, Bump{domain.point(c), options.probe_radius, 1.0});
        q.test_norm = probe_norm;
        out.response[c] = gw_eval(mu, q).value;
    });

    double peak = 0.0;
    for (double s : out.response) peak = std::max(peak, std::abs(s));
    if (peak == 0.0) return out;
    std::vector<bool> marked(domain.size());
    for (std::size_t c = 0; c < domain.size(); ++c) marked[c] = std::abs(out.response[c]) > options.tol * peak;
    out.mask = ScanMask(domain, std::move(marked));
    return out;
}

double mask_hausdorff(const ScanMask& a, const ScanMask& b, std::span<const double> shift) {
    const GridDomain& d = a.domain();
    require(b.domain() == d, "masks live on different grids");
    require(shift.empty() || shift.size() == d.dim(), "shift dimension does not match the grid");
    auto cells = [&](const ScanMask& m, bool shifted) {
        std::vector<Point> pts;
        for (std::size_t c = 0; c < d.size(); ++c) {
            if (!m[c]) continue;
            const MultiIndex idx = d.unravel(c);
            Point p(d.dim());
            for (std::size_t ax = 0; ax < d.dim(); ++ax)
                p[ax] = static_cast<double>(idx[ax]) + (shifted && !shift.empty() ? shift[ax] / d.spacing(ax) : 0.0);
            pts.push_back(std::move(p));
        }
        return pts;
    };
    const auto pa = cells(a, true);
    const auto pb = cells(b, false);
    if (pa.empty() && pb.empty()) return 0.0;
    if (pa.empty() || pb.empty()) return kInf;
    auto directed = [](const std::vector<Point>& from, const std::vector<Point>& to) {
        double worst = 0.0;
        for (const Point& p : from) {
            double best = kInf;
            for (const Point& q : to) best = std::min(best, distance(p, q));
            worst = std::max(worst, best);
        }
        return worst;
    };
    return std::max(directed(pa, pb), directed(pb, pa));
}

double translate_covariance_residual(const ValuationSpec& mu, std::span<const double> v, const GridDomain& domain,
                                     const ScanOptions& options) {
    require(mu.kind() == ValuationSpec::Kind::Pairing, "translation probe needs a pairing valuation");
    require(v.size() == domain.dim(), "shift dimension does not match the grid");
    std::vector<Point> moved = mu.nodes();
    for (Point& p : moved) {
        for (std::size_t a = 0; a < p.size(); ++a) p[a] += v[a];
        require(domain.contains(p, 1e-12 * (1.0 + domain.radius())), "shifted node leaves the grid",
                ErrorKind::DomainExceeded);
    }
    const auto shifted = ValuationSpec::pairing(std::move(moved), mu.weights(), false);
    const ScanMask original = support_scan(mu, 1, domain, options).mask;
    const ScanMask translated = support_scan(shifted, 1, domain, options).mask;
    return mask_hausdorff(original, translated, v);
}

SeminormResult seminorm_estimate(const ValuationSpec& mu, const GridDomain& domain, std::span<const double> A_lo,
                                 std::span<const double> A_hi, double s, std::size_t n_samples, std::uint64_t seed) {
    const std::size_t n = domain.dim();
    require(A_lo.size() == n && A_hi.size() == n, "box corners must match the grid dimension");
    require(n_samples >= 1, "at least one sample is needed");
    require(s > 0.0, "margin s must be positive");

    Point center(n), box_lo(n), box_hi(n);
    for (std::size_t a = 0; a < n; ++a) {
        center[a] = 0.5 * (A_lo[a] + A_hi[a]);
        box_lo[a] = A_lo[a] - 2.0 * s;
        box_hi[a] = A_hi[a] + 2.0 * s;
        require(box_lo[a] >= domain.lo()[a] - 1e-9 * domain.spacing(a) &&
                    box_hi[a] <= domain.hi()[a] + 1e-9 * domain.spacing(a),
                "box [A - 2s, A + 2s] exceeds the grid", ErrorKind::DomainExceeded);
    }
    std::vector<std::size_t> box_cells;
    for (std::size_t c = 0; c < domain.size(); ++c) {
        const Point x = domain.point(c);
        bool in = true;
        for (std::size_t a = 0; a < n; ++a)
            in = in && x[a] >= box_lo[a] - 1e-9 * domain.spacing(a) && x[a] <= box_hi[a] + 1e-9 * domain.spacing(a);
        if (in) box_cells.push_back(c);
    }

    ConvexSampler sampler(seed);
    SeminormResult out;
    for (std::size_t i = 0; i < n_samples; ++i) {
        const ExtGridFn raw =
            i == 0 ? ExtGridFn::sample(domain, [&](std::span<const double> x) { return distance(x, center); })
                   : sampler.next(domain, A_lo, A_hi);
        const ExtGridFn ext = extend_from_subdomain(raw, A_lo, A_hi, s);
        double lo = kInf, hi = -kInf;
        for (std::size_t c : box_cells) {
            lo = std::min(lo, ext[c]);
            hi = std::max(hi, ext[c]);
        }
        const std::vector<double> flat(n, 0.0);
        const ExtGridFn normalized = hi > lo ? add_affine((2.0 / (hi - lo)) * ext, flat, -2.0 * lo / (hi - lo) - 1.0)
                                             : add_affine(ext, flat, -lo);
        const double value = std::abs(evaluate(mu, normalized));
        if (i == 0 || value > out.estimate) {
            out.estimate = value;
            out.best_sample = i;
        }
        ++out.samples;
    }
    return out;
}

} // namespace vconv
