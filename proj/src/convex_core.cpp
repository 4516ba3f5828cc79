#include "vconv/convex_core.hpp"

#include "vconv/diagnostics.hpp"
#include "vconv/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <sstream>

namespace vconv {

namespace {

// p - v rounded toward +inf, via the exact TwoSum residual.
double sub_round_up(double p, double v) {
    const double b = -v;
    const double s = p + b;
    const double bb = s - p;
    const double err = (p - (s - bb)) + (b - bb);
    return err > 0.0 ? std::nextafter(s, kInf) : s;
}

MultiIndex negate(const MultiIndex& d) { return {-d[0], -d[1], -d[2]}; }

struct FiniteCells {
    std::vector<double> coords; // cell-major, dim values per cell
    std::vector<double> values;
    std::vector<std::size_t> flat;
};

FiniteCells finite_cells(const ExtGridFn& f) {
    const GridDomain& d = f.domain();
    const std::size_t n = d.dim();
    const std::vector<double> all = d.coordinates();
    FiniteCells out;
    for (std::size_t k = 0; k < f.size(); ++k) {
        if (!f.finite_at(k)) continue;
        out.coords.insert(out.coords.end(), all.begin() + static_cast<std::ptrdiff_t>(k * n),
                          all.begin() + static_cast<std::ptrdiff_t>((k + 1) * n));
        out.values.push_back(f[k]);
        out.flat.push_back(k);
    }
    return out;
}

bool domain_in_ball(std::span<const double> x, double radius) {
    return norm(x) <= radius * (1.0 + 1e-12);
}

} // namespace

// ---------------------------------------------------------------------------

bool is_discretely_convex(const ExtGridFn& f, double tol) {
    require(tol >= 0.0, "convexity tolerance must be nonnegative");
    const GridDomain& d = f.domain();
    const double slack = tol * (1.0 + f.sup_abs());
    const auto dirs = stencil_directions(d.dim(), true);

    for (std::size_t k = 0; k < f.size(); ++k) {
        const MultiIndex idx = d.unravel(k);
        for (const MultiIndex& dir : dirs) {
            const auto fwd = d.neighbor(idx, dir);
            const auto bwd = d.neighbor(idx, negate(dir));

            // Scan lines start where the backward neighbour leaves the grid.
            if (!bwd) {
                int state = 0; // 0: before finite run, 1: inside, 2: after
                MultiIndex cur = idx;
                for (std::optional<std::size_t> j = k; j; j = d.neighbor(cur, dir)) {
                    cur = d.unravel(*j);
                    const bool fin = f.finite_at(*j);
                    if (state == 0 && fin) state = 1;
                    else if (state == 1 && !fin) state = 2;
                    else if (state == 2 && fin) return false;
                }
            }

            if (!f.finite_at(k) || !fwd || !bwd) continue;
            if (!f.finite_at(*fwd) || !f.finite_at(*bwd)) continue;
            if (f[*fwd] - 2.0 * f[k] + f[*bwd] < -slack) return false;
        }
    }
    return true;
}

std::vector<std::pair<double, double>> slope_range(const ExtGridFn& f) {
    const GridDomain& d = f.domain();
    std::vector<std::pair<double, double>> range(d.dim(), {kInf, -kInf});
    for (std::size_t k = 0; k < f.size(); ++k) {
        if (!f.finite_at(k)) continue;
        const MultiIndex idx = d.unravel(k);
        for (std::size_t a = 0; a < d.dim(); ++a) {
            MultiIndex e{0, 0, 0};
            e[a] = 1;
            const auto j = d.neighbor(idx, e);
            if (!j || !f.finite_at(*j)) continue;
            const double s = (f[*j] - f[k]) / d.spacing(a);
            range[a].first = std::min(range[a].first, s);
            range[a].second = std::max(range[a].second, s);
        }
    }
    // Axes without a finite pair carry no slope information.
    for (auto& r : range)
        if (r.first > r.second) r = {0.0, 0.0};
    return range;
}

GridDomain default_dual_domain(const ExtGridFn& f) {
    const auto range = slope_range(f);
    std::vector<double> lo, hi;
    for (const auto& [a, b] : range) {
        const double pad = 0.1 * std::max(b - a, 1.0);
        lo.push_back(a - pad);
        hi.push_back(b + pad);
    }
    return GridDomain(lo, hi, f.domain().shape());
}

ExtGridFn legendre(const ExtGridFn& f, const GridDomain& dual) {
    const GridDomain& d = f.domain();
    require(dual.dim() == d.dim(), "dual grid dimension does not match the function");
    const std::size_t n = d.dim();

    const auto range = slope_range(f);
    for (std::size_t a = 0; a < n; ++a) {
        const double slack = 1e-9 * (dual.hi()[a] - dual.lo()[a]);
        if (range[a].first < dual.lo()[a] - slack || range[a].second > dual.hi()[a] + slack) {
            std::ostringstream msg;
            msg << "dual grid axis " << a << " [" << dual.lo()[a] << ", " << dual.hi()[a]
                << "] does not cover the slope range [" << range[a].first << ", "
                << range[a].second << "]";
            warn(msg.str());
        }
    }

    const FiniteCells cells = finite_cells(f);
    const std::vector<double> ys = dual.coordinates();
    std::vector<double> out(dual.size());
    for (std::size_t j = 0; j < dual.size(); ++j) {
        const std::span<const double> y(ys.data() + j * n, n);
        double best = -kInf;
        for (std::size_t i = 0; i < cells.values.size(); ++i) {
            const std::span<const double> x(cells.coords.data() + i * n, n);
            best = std::max(best, sub_round_up(dot(x, y), cells.values[i]));
        }
        out[j] = best;
    }
    return ExtGridFn(dual, std::move(out));
}

ExtGridFn legendre(const ExtGridFn& f) {
    return legendre(f, default_dual_domain(f));
}

ExtGridFn legendre_1d_fast(const ExtGridFn& f, const GridDomain& dual) {
    const GridDomain& d = f.domain();
    require(d.dim() == 1 && dual.dim() == 1, "fast transform is one-dimensional");
    const FiniteCells cells = finite_cells(f);

    // Lower convex hull of (x_i, f_i); x is already increasing.
    std::vector<std::size_t> hull;
    for (std::size_t i = 0; i < cells.values.size(); ++i) {
        while (hull.size() >= 2) {
            const std::size_t a = hull[hull.size() - 2];
            const std::size_t b = hull.back();
            const double xa = cells.coords[a], xb = cells.coords[b], xi = cells.coords[i];
            const double fa = cells.values[a], fb = cells.values[b], fi = cells.values[i];
            // b is not below the chord a-i.
            if ((fb - fa) * (xi - xa) >= (fi - fa) * (xb - xa)) hull.pop_back();
            else break;
        }
        hull.push_back(i);
    }

    auto value = [&](std::size_t h, double y) {
        const std::size_t i = hull[h];
        return sub_round_up(cells.coords[i] * y, cells.values[i]);
    };

    std::vector<double> out(dual.size());
    std::size_t h = 0;
    for (std::size_t j = 0; j < dual.size(); ++j) {
        const double y = dual.coord(0, static_cast<std::ptrdiff_t>(j));
        while (h + 1 < hull.size() && value(h + 1, y) >= value(h, y)) ++h;
        out[j] = value(h, y);
    }
    return ExtGridFn(dual, std::move(out));
}

double biconjugate_gap(const ExtGridFn& f) {
    const ExtGridFn fss = legendre(legendre(f), f.domain());
    const GridDomain& d = f.domain();
    double gap = 0.0;
    bool any_interior = false;
    for (std::size_t k = 0; k < f.size(); ++k) {
        if (!f.finite_at(k) || d.on_boundary(k)) continue;
        any_interior = true;
        gap = std::max(gap, std::abs(fss[k] - f[k]));
    }
    if (!any_interior) {
        for (std::size_t k = 0; k < f.size(); ++k)
            if (f.finite_at(k)) gap = std::max(gap, std::abs(fss[k] - f[k]));
    }
    return gap;
}

ExtGridFn lipschitz_regularize(const ExtGridFn& f, double r) {
    require(r > 0.0 && std::isfinite(r), "regularization radius r must be positive");
    const double L = 1.0 / r;
    const GridDomain& d = f.domain();
    const std::size_t n = d.dim();
    const FiniteCells cells = finite_cells(f);
    const std::vector<double> xs = d.coordinates();
    std::vector<double> out(d.size());
    for (std::size_t k = 0; k < d.size(); ++k) {
        const std::span<const double> x(xs.data() + k * n, n);
        double best = f[k];
        for (std::size_t i = 0; i < cells.values.size(); ++i) {
            const std::span<const double> y(cells.coords.data() + i * n, n);
            best = std::min(best, cells.values[i] + L * distance(x, y));
        }
        out[k] = best;
    }
    return ExtGridFn(d, std::move(out));
}

double regularization_compatibility_radius(const ExtGridFn& f, const ExtGridFn& h) {
    require(f.domain() == h.domain(), "grid functions live on different domains");
    const GridDomain& d = f.domain();
    const std::size_t n = d.dim();
    const std::vector<double> xs = d.coordinates();
    const ExtGridFn hi = pointwise_max(f, h);
    const ExtGridFn lo = pointwise_min(f, h);

    double required = 0.0;
    for (const ExtGridFn* g : {&f, &h, &hi, &lo}) {
        const FiniteCells cells = finite_cells(*g);
        for (std::size_t k = 0; k < d.size(); ++k) {
            const std::span<const double> x(xs.data() + k * n, n);
            std::vector<double> dist(cells.values.size());
            std::size_t p = 0;
            for (std::size_t i = 0; i < dist.size(); ++i) {
                dist[i] = distance(x, std::span<const double>(cells.coords.data() + i * n, n));
                if (dist[i] < dist[p]) p = i;
            }
            for (std::size_t i = 0; i < dist.size(); ++i) {
                if (i == p) continue;
                const double gap = dist[i] - dist[p];
                const double rise = cells.values[p] - cells.values[i];
                if (gap <= 1e-14 * (1.0 + dist[p])) {
                    // Two nearest points: only harmless when values agree.
                    if (cells.values[i] != cells.values[p]) return 0.0;
                    continue;
                }
                if (rise > 0.0) required = std::max(required, rise / gap);
            }
        }
    }
    return required > 0.0 ? 0.5 / required : kInf;
}

double epi_distance(const ExtGridFn& f, const ExtGridFn& g) {
    require(f.domain() == g.domain(), "grid functions live on different domains");
    const GridDomain& d = f.domain();
    const Point c = d.center();
    const double R = d.radius();

    std::vector<double> cell_gap(d.size(), 0.0);
    std::vector<double> cell_r(d.size());
    for (std::size_t k = 0; k < d.size(); ++k) {
        cell_r[k] = distance(d.point(k), c);
        const bool ff = f.finite_at(k), gf = g.finite_at(k);
        if (ff && gf) cell_gap[k] = std::abs(f[k] - g[k]);
        else if (ff != gf) cell_gap[k] = 1.0 / (1.0 + std::max(ff ? f[k] : g[k], 0.0));
    }

    double total = 0.0;
    double weight = 1.0;
    for (int j = 1; j <= 8; ++j) {
        weight *= 0.5;
        const double radius = j * R / 8.0 * (1.0 + 1e-12);
        double sup = 0.0;
        for (std::size_t k = 0; k < d.size(); ++k)
            if (cell_r[k] <= radius) sup = std::max(sup, cell_gap[k]);
        total += weight * std::min(1.0, sup);
    }
    return total;
}

ExtGridFn body_to_function(const Polytope& body, const GridDomain& domain) {
    require(body.base_dim() == domain.dim(), "polytope lives in V* x R for a different V");
    return ExtGridFn::sample(domain, [&](std::span<const double> x) { return body.lower_support(x); });
}

ExtGridFn reconstruct_from_conjugate(const ExtGridFn& f, double R) {
    require(R > 0.0 && std::isfinite(R), "R must be positive");
    const GridDomain& d = f.domain();
    const std::size_t n = d.dim();
    const double outer = R + 2.0;
    for (std::size_t a = 0; a < n; ++a)
        require(d.lo()[a] <= -outer && d.hi()[a] >= outer,
                "ball of radius R + 2 exceeds the grid", ErrorKind::DomainExceeded);

    double c = 0.0;
    for (std::size_t k = 0; k < d.size(); ++k) {
        if (!domain_in_ball(d.point(k), outer)) continue;
        require(f.finite_at(k), "f must be finite on the ball of radius R + 2");
        c = std::max(c, std::abs(f[k]));
    }
    if (c == 0.0) return ExtGridFn::constant(d, 0.0);

    const double y_cap = 2.0 * c;
    const double t_cap = (2.0 * R + 3.0) * c;

    // Only slopes of f can be maximisers; clip them to the body's |y| bound.
    const GridDomain slopes = default_dual_domain(f);
    std::vector<double> lo(n), hi(n);
    for (std::size_t a = 0; a < n; ++a) {
        lo[a] = std::max(slopes.lo()[a], -y_cap);
        hi[a] = std::min(slopes.hi()[a], y_cap);
        if (!(lo[a] < hi[a])) {
            const double mid = std::clamp(0.5 * (slopes.lo()[a] + slopes.hi()[a]), -y_cap, y_cap);
            const double half = 1e-6 * (1.0 + std::abs(mid));
            lo[a] = mid - half;
            hi[a] = mid + half;
        }
    }
    const GridDomain dual(lo, hi, d.shape());
    const ExtGridFn fstar = legendre(f, dual);

    struct Generator {
        Point y;
        double t;
    };
    std::vector<Generator> gens;
    for (std::size_t j = 0; j < dual.size(); ++j) {
        const Point y = dual.point(j);
        if (norm(y) > y_cap || !(fstar[j] <= t_cap)) continue;
        gens.push_back({y, std::max(fstar[j], -t_cap)});
    }
    require(!gens.empty(), "truncated epigraph of the conjugate is empty on the dual grid");

    std::vector<double> out(d.size());
    for (std::size_t k = 0; k < d.size(); ++k) {
        const Point x = d.point(k);
        double best = -kInf;
        for (const Generator& g : gens) best = std::max(best, dot(x, g.y) - g.t);
        out[k] = best;
    }
    return ExtGridFn(d, std::move(out));
}

namespace {

struct IndexBox {
    MultiIndex lo{0, 0, 0};
    MultiIndex hi{0, 0, 0}; // inclusive
};

IndexBox index_box(const GridDomain& d, std::span<const double> lo, std::span<const double> hi) {
    IndexBox b;
    for (std::size_t a = 0; a < d.dim(); ++a) {
        const double tl = (lo[a] - d.lo()[a]) / d.spacing(a);
        const double th = (hi[a] - d.lo()[a]) / d.spacing(a);
        const auto last = static_cast<std::ptrdiff_t>(d.shape()[a]) - 1;
        b.lo[a] = std::clamp(static_cast<std::ptrdiff_t>(std::ceil(tl - 1e-9)), std::ptrdiff_t{0}, last);
        b.hi[a] = std::clamp(static_cast<std::ptrdiff_t>(std::floor(th + 1e-9)), std::ptrdiff_t{0}, last);
    }
    return b;
}

bool inside(const IndexBox& b, const MultiIndex& idx, std::size_t n) {
    for (std::size_t a = 0; a < n; ++a)
        if (idx[a] < b.lo[a] || idx[a] > b.hi[a]) return false;
    return true;
}

// argmin <objective, p> over the subgradients p of f at `y` with respect to
// the cells in `cells`: <p, x - y> <= f(x) - f(y). Cutting planes: start
// from the stencil neighbours, solve the small LP by vertex enumeration, add
// the most violated constraint and repeat.
Point least_subgradient(const GridDomain& d, const ExtGridFn& f, std::size_t y,
                        const std::vector<std::size_t>& cells, const Point& objective, double tol) {
    const std::size_t n = d.dim();
    const Point yc = d.point(y);
    struct Cut {
        Point a;
        double b;
    };
    auto cut_for = [&](std::size_t x) {
        Cut c{d.point(x), f[x] - f[y]};
        for (std::size_t a = 0; a < n; ++a) c.a[a] -= yc[a];
        return c;
    };

    std::vector<Cut> active;
    const MultiIndex yi = d.unravel(y);
    for (const MultiIndex& dir : stencil_directions(n, true))
        for (const MultiIndex& off : {dir, negate(dir)})
            if (const auto j = d.neighbor(yi, off)) active.push_back(cut_for(*j));

    using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 3, 3>;
    using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 3, 1>;
    for (std::size_t round = 0; round <= cells.size(); ++round) {
        std::optional<Point> best;
        double best_value = kInf;
        std::vector<std::size_t> pick(n);
        std::function<void(std::size_t, std::size_t)> enumerate = [&](std::size_t depth, std::size_t from) {
            if (depth == n) {
                Mat A(n, n);
                Vec b(n);
                for (std::size_t r = 0; r < n; ++r) {
                    for (std::size_t a = 0; a < n; ++a) A(r, a) = active[pick[r]].a[a];
                    b(r) = active[pick[r]].b;
                }
                Eigen::FullPivLU<Mat> lu(A);
                if (!lu.isInvertible()) return;
                const Vec sol = lu.solve(b);
                Point p(sol.data(), sol.data() + n);
                for (const Cut& c : active)
                    if (dot(c.a, p) > c.b + tol) return;
                const double value = dot(objective, p);
                if (value < best_value) {
                    best_value = value;
                    best = std::move(p);
                }
                return;
            }
            for (std::size_t i = from; i < active.size(); ++i) {
                pick[depth] = i;
                enumerate(depth + 1, i + 1);
            }
        };
        enumerate(0, 0);
        if (!best) fail(ErrorKind::ConvexityViolation, "f has no subgradient on [A - s, A + s]");

        double worst = tol;
        std::optional<std::size_t> violated;
        for (std::size_t x : cells) {
            const Cut c = cut_for(x);
            const double excess = dot(c.a, *best) - c.b;
            if (excess > worst) {
                worst = excess;
                violated = x;
            }
        }
        if (!violated) return *best;
        active.push_back(cut_for(*violated));
    }
    fail(ErrorKind::ConvexityViolation, "subgradient search did not converge");
}

} // namespace

ExtGridFn extend_from_subdomain(const ExtGridFn& f, std::span<const double> A_lo,
                                std::span<const double> A_hi, double s) {
    const GridDomain& d = f.domain();
    const std::size_t n = d.dim();
    require(A_lo.size() == n && A_hi.size() == n, "box corners must match the grid dimension");
    for (std::size_t a = 0; a < n; ++a) require(A_lo[a] <= A_hi[a], "box corners are inverted");
    require(s > 0.0 && s >= 2.0 * d.max_spacing() * (1.0 - 1e-12),
            "extension margin s must be at least two grid spacings");

    std::vector<double> olo(n), ohi(n), ilo(n), ihi(n);
    for (std::size_t a = 0; a < n; ++a) {
        olo[a] = A_lo[a] - s;
        ohi[a] = A_hi[a] + s;
        ilo[a] = A_lo[a] - 0.5 * s;
        ihi[a] = A_hi[a] + 0.5 * s;
        require(olo[a] >= d.lo()[a] - 1e-9 * d.spacing(a) && ohi[a] <= d.hi()[a] + 1e-9 * d.spacing(a),
                "box [A - s, A + s] exceeds the grid", ErrorKind::DomainExceeded);
    }

    const IndexBox outer = index_box(d, olo, ohi);
    const IndexBox inner = index_box(d, ilo, ihi);
    for (std::size_t a = 0; a < n; ++a)
        require(inner.hi[a] - inner.lo[a] + 1 >= 3, "inner box needs at least 3 cells per axis");

    std::vector<double> data(d.size(), kInf);
    for (std::size_t k = 0; k < d.size(); ++k) {
        if (!inside(outer, d.unravel(k), n)) continue;
        require(f.finite_at(k), "f must be finite on [A - s, A + s]");
        data[k] = f[k];
    }
    if (!is_discretely_convex(ExtGridFn(d, data)))
        fail(ErrorKind::ConvexityViolation, "f is not discretely convex on [A - s, A + s]");

    std::vector<std::size_t> outer_cells, inner_cells;
    for (std::size_t k = 0; k < d.size(); ++k) {
        const MultiIndex idx = d.unravel(k);
        if (inside(outer, idx, n)) outer_cells.push_back(k);
        if (inside(inner, idx, n)) inner_cells.push_back(k);
    }
    const double tol = 1e-11 * (1.0 + ExtGridFn(d, data).sup_abs());
    const Point mid = [&] {
        Point m(n);
        for (std::size_t a = 0; a < n; ++a) m[a] = 0.5 * (d.coord(a, inner.lo[a]) + d.coord(a, inner.hi[a]));
        return m;
    }();

    // One supporting affine function per inner cell: its slope is a
    // subgradient of the data on the outer box with the least growth away
    // from the inner box center.
    const std::vector<double> xs = d.coordinates();
    std::vector<double> slopes(inner_cells.size() * n);
    for (std::size_t i = 0; i < inner_cells.size(); ++i) {
        const std::size_t y = inner_cells[i];
        const double* yc = xs.data() + y * n;
        Point objective(n);
        for (std::size_t a = 0; a < n; ++a) objective[a] = yc[a] - mid[a];
        const Point p = least_subgradient(d, f, y, outer_cells, objective, tol);
        std::copy(p.begin(), p.end(), slopes.begin() + static_cast<std::ptrdiff_t>(i * n));
    }

    std::vector<double> out(d.size());
    std::vector<double> offset(n);
    for (std::size_t k = 0; k < d.size(); ++k) {
        if (inside(inner, d.unravel(k), n)) {
            out[k] = f[k];
            continue;
        }
        const double* x = xs.data() + k * n;
        double best = -kInf;
        for (std::size_t i = 0; i < inner_cells.size(); ++i) {
            const double* yc = xs.data() + inner_cells[i] * n;
            for (std::size_t a = 0; a < n; ++a) offset[a] = x[a] - yc[a];
            best = std::max(best, f[inner_cells[i]] + dot({slopes.data() + i * n, n}, offset));
        }
        out[k] = best;
    }
    return ExtGridFn(d, std::move(out));
}

ExtGridFn lsc_extend(const ExtGridFn& f_open, const ScanMask& U) {
    const GridDomain& d = f_open.domain();
    require(U.domain() == d, "mask and function live on different domains");
    require(!U.none(), "open set mask is empty");
    require(U.components() == 1, "open set mask is disconnected");

    const auto axes = stencil_directions(d.dim(), false);
    std::vector<double> out(d.size(), kInf);
    for (std::size_t k = 0; k < d.size(); ++k) {
        if (U[k]) {
            require(f_open.finite_at(k), "function must be finite on the open set");
            out[k] = f_open[k];
            continue;
        }
        const MultiIndex idx = d.unravel(k);
        for (const MultiIndex& ax : axes) {
            for (const MultiIndex& off : {ax, negate(ax)}) {
                const auto j = d.neighbor(idx, off);
                if (j && U[*j]) {
                    require(f_open.finite_at(*j), "function must be finite on the open set");
                    out[k] = std::min(out[k], f_open[*j]);
                }
            }
        }
    }
    return ExtGridFn(d, std::move(out));
}

ExtGridFn restrict_to(const ExtGridFn& f, const ScanMask& U) {
    require(U.domain() == f.domain(), "mask and function live on different domains");
    std::vector<double> out(f.size(), kInf);
    for (std::size_t k = 0; k < f.size(); ++k)
        if (U[k]) out[k] = f[k];
    return ExtGridFn(f.domain(), std::move(out));
}

namespace {

ConvexSplit split_with(const ExtGridFn& phi, double c) {
    const ExtGridFn q = ExtGridFn::sample(phi.domain(), [c](std::span<const double> x) {
        return 0.5 * c * dot(x, x);
    });
    return ConvexSplit{q + phi, q, c};
}

} // namespace

ConvexSplit convex_split(const ExtGridFn& phi) {
    require(phi.all_finite(), "convex_split needs a finite function");
    return split_with(phi, discrete_c2_norm(phi));
}

ConvexSplit convex_split(const Bump& phi, const GridDomain& domain) {
    return split_with(phi.sample(domain), phi.c2_norm(domain));
}

} // namespace vconv
