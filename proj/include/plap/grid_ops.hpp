#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "plap/errors.hpp"
#include "plap/extended_real.hpp"
#include "plap/grid.hpp"

namespace plap {

inline double norm(const Point& v, int n) noexcept {
    double s = 0.0;
    for (int d = 0; d < n; ++d) s += v[d] * v[d];
    return std::sqrt(s);
}

namespace detail {

inline double overlap(double a0, double a1, double b0, double b1) noexcept {
    return std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
}

/// Antiderivative of sqrt(R^2 - u^2).
inline double sqrt_cap_primitive(double u, double R) noexcept {
    const double c = std::clamp(u / R, -1.0, 1.0);
    return 0.5 * (u * std::sqrt(std::max(0.0, R * R - u * u)) + R * R * std::asin(c));
}

/// Exact area of [x0,x1] x [y0,y1] intersected with the disc of radius R
/// centred at (cx, cy).
inline double disc_rect_area(double cx, double cy, double R, double x0, double x1, double y0,
                             double y1) {
    if (R <= 0.0 || x1 <= x0 || y1 <= y0) return 0.0;
    std::vector<double> cuts{x0, x1};
    auto add = [&](double x) {
        if (x > x0 && x < x1) cuts.push_back(x);
    };
    add(cx - R);
    add(cx + R);
    for (double ye : {y0, y1}) {
        const double d = ye - cy;
        if (std::abs(d) < R) {
            const double w = std::sqrt(R * R - d * d);
            add(cx - w);
            add(cx + w);
        }
    }
    std::sort(cuts.begin(), cuts.end());
    double area = 0.0;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
        const double a = cuts[k];
        const double b = cuts[k + 1];
        if (b <= a) continue;
        const double m = 0.5 * (a + b);
        const double um = m - cx;
        if (std::abs(um) >= R) continue;
        const double sm = std::sqrt(R * R - um * um);
        // On each piece the top and bottom are either a rectangle edge or the circle.
        const bool top_is_edge = cy + sm >= y1;
        const bool bottom_is_edge = cy - sm <= y0;
        const double top_m = top_is_edge ? y1 : cy + sm;
        const double bottom_m = bottom_is_edge ? y0 : cy - sm;
        if (top_m <= bottom_m) continue;
        const double cap = sqrt_cap_primitive(b - cx, R) - sqrt_cap_primitive(a - cx, R);
        const double top = top_is_edge ? y1 * (b - a) : cy * (b - a) + cap;
        const double bottom = bottom_is_edge ? y0 * (b - a) : cy * (b - a) - cap;
        area += top - bottom;
    }
    return area;
}

/// Volume of the box [lo, hi] intersected with the ball B_R(c) in 3D:
/// slices in x are disc/rectangle areas, integrated piecewise by
/// Gauss-Legendre between the radii where the slice changes shape.
inline double ball_box_volume(const Point& c, double R, const Point& lo, const Point& hi) {
    std::vector<double> cuts{lo[0], hi[0]};
    auto add_radius = [&](double d2) {
        if (d2 < R * R) {
            const double w = std::sqrt(R * R - d2);
            for (double x : {c[0] - w, c[0] + w}) {
                if (x > lo[0] && x < hi[0]) cuts.push_back(x);
            }
        }
    };
    add_radius(0.0);
    for (double ye : {lo[1], hi[1]}) {
        const double dy2 = (ye - c[1]) * (ye - c[1]);
        add_radius(dy2);
        for (double ze : {lo[2], hi[2]}) add_radius(dy2 + (ze - c[2]) * (ze - c[2]));
    }
    for (double ze : {lo[2], hi[2]}) add_radius((ze - c[2]) * (ze - c[2]));
    std::sort(cuts.begin(), cuts.end());
    auto slice = [&](double x) {
        const double u2 = R * R - (x - c[0]) * (x - c[0]);
        if (u2 <= 0.0) return 0.0;
        return disc_rect_area(c[1], c[2], std::sqrt(u2), lo[1], hi[1], lo[2], hi[2]);
    };
    double vol = 0.0;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
        if (cuts[k + 1] > cuts[k]) {
            vol += boost::math::quadrature::gauss<double, 20>::integrate(slice, cuts[k], cuts[k + 1]);
        }
    }
    return vol;
}

}  // namespace detail

/// Measure of each node's dual cell (clipped to the grid box) inside the
/// region's spatial part. Midpoint rule in space uses these as weights.
inline std::vector<double> spatial_weights(const SpaceTimeGrid& g, const Region& region) {
    const int n = g.n();
    const double h = g.h();
    const double L = g.half_width();
    std::vector<double> w(g.spatial_size(), 0.0);
    for (std::size_t s = 0; s < w.size(); ++s) {
        const auto x = g.position(s);
        Point lo{0, 0, 0};
        Point hi{0, 0, 0};
        for (int d = 0; d < n; ++d) {
            lo[d] = std::max(x[d] - 0.5 * h, -L);
            hi[d] = std::min(x[d] + 0.5 * h, L);
        }
        if (region.shape == Region::Shape::box) {
            double m = 1.0;
            for (int d = 0; d < n; ++d) {
                m *= detail::overlap(lo[d], hi[d], region.center[d] - region.half_widths[d],
                                     region.center[d] + region.half_widths[d]);
            }
            w[s] = m;
            continue;
        }
        const double R = region.radius;
        double near2 = 0.0;
        double far2 = 0.0;
        double full = 1.0;
        for (int d = 0; d < n; ++d) {
            const double c = region.center[d];
            const double dn = std::max({lo[d] - c, 0.0, c - hi[d]});
            const double df = std::max(std::abs(lo[d] - c), std::abs(hi[d] - c));
            near2 += dn * dn;
            far2 += df * df;
            full *= hi[d] - lo[d];
        }
        if (near2 >= R * R) continue;
        if (far2 <= R * R) {
            w[s] = full;
            continue;
        }
        const auto& c = region.center;
        if (n == 1) {
            w[s] = detail::overlap(lo[0], hi[0], c[0] - R, c[0] + R);
        } else if (n == 2) {
            w[s] = detail::disc_rect_area(c[0], c[1], R, lo[0], hi[0], lo[1], hi[1]);
        } else {
            w[s] = detail::ball_box_volume(c, R, lo, hi);
        }
    }
    return w;
}

/// Length of each level's dual time cell inside [t_lo, t_hi]; the
/// trapezoid rule in time uses these as weights.
inline std::vector<double> time_weights(const SpaceTimeGrid& g, const Region& region) {
    std::vector<double> w(g.time_levels(), 0.0);
    for (int j = 0; j < g.time_levels(); ++j) {
        const double t = g.time(j);
        const double a = std::max(t - 0.5 * g.dt(), g.t_start());
        const double b = std::min(t + 0.5 * g.dt(), g.t_end());
        w[j] = detail::overlap(a, b, region.t_lo, region.t_hi);
    }
    return w;
}

/// Central-difference spatial gradient at an interior node.
inline Point gradient(const GridFunction& u, const Node& node) {
    const auto& g = u.grid();
    if (!g.is_interior(node.i, 1)) throw DomainError("gradient: node is on the spatial boundary");
    Point grad{0.0, 0.0, 0.0};
    for (int d = 0; d < g.n(); ++d) {
        Index ip = node.i;
        Index im = node.i;
        ++ip[d];
        --im[d];
        grad[d] = (u.at(g.flatten(ip), node.level) - u.at(g.flatten(im), node.level)) / (2.0 * g.h());
    }
    return grad;
}

namespace detail {

/// Cell containing x along one axis and the local coordinate in [0, 1].
inline std::pair<int, double> locate(double x, double origin, double step, int count) {
    double f = (x - origin) / step;
    int i = static_cast<int>(std::floor(f));
    i = std::clamp(i, 0, count - 2);
    return {i, std::clamp(f - i, 0.0, 1.0)};
}

template <class NodeValue>
double multilinear(const SpaceTimeGrid& g, const Point& x, double t, NodeValue&& value) {
    const int n = g.n();
    std::array<std::pair<int, double>, 3> cell{};
    for (int d = 0; d < n; ++d) cell[d] = locate(x[d], -g.half_width(), g.h(), g.per_axis());
    const auto [j, ft] = locate(t, g.t_start(), g.dt(), g.time_levels());
    double acc = 0.0;
    for (int corner = 0; corner < (1 << n); ++corner) {
        Index idx{0, 0, 0};
        double wgt = 1.0;
        for (int d = 0; d < n; ++d) {
            const int bit = (corner >> d) & 1;
            idx[d] = cell[d].first + bit;
            wgt *= bit ? cell[d].second : 1.0 - cell[d].second;
        }
        if (wgt == 0.0) continue;
        const double v0 = value(idx, j);
        const double v1 = ft > 0.0 ? value(idx, j + 1) : v0;
        acc += wgt * ((1.0 - ft) * v0 + ft * v1);
    }
    return acc;
}

inline void check_inside(const SpaceTimeGrid& g, const Point& x, double t, const char* who) {
    const double tol = 1e-9 * g.h();
    if (!g.contains(x, tol) || t < g.t_start() - 1e-9 * g.dt() || t > g.t_end() + 1e-9 * g.dt()) {
        throw DomainError(std::string(who) + ": point outside the grid");
    }
}

}  // namespace detail

/// Multilinear interpolation in space, linear in time.
inline double interpolate(const GridFunction& u, const Point& x, double t) {
    const auto& g = u.grid();
    detail::check_inside(g, x, t, "interpolate");
    return detail::multilinear(g, x, t, [&](const Index& i, int j) { return u.at(g.flatten(i), j); });
}

/// Gradient at an arbitrary point: multilinear interpolation of the
/// central-difference node gradients of the surrounding cell.
inline Point gradient_at(const GridFunction& u, const Point& x, double t) {
    const auto& g = u.grid();
    detail::check_inside(g, x, t, "gradient_at");
    Point out{0.0, 0.0, 0.0};
    for (int d = 0; d < g.n(); ++d) {
        out[d] = detail::multilinear(g, x, t, [&](const Index& i, int j) {
            if (!g.is_interior(i, 1)) throw DomainError("gradient_at: point too close to the boundary");
            return gradient(u, Node{i, j})[d];
        });
    }
    return out;
}

/// Iterated norm (int (int |f|^q dx)^{r/q} dt)^{1/r} over the region, with
/// the midpoint rule in space and the trapezoid rule in time. Infinite
/// exponents take the max over nodes (or levels) carrying positive weight.
inline double anisotropic_norm(const GridFunction& f, const ExtendedReal& q, const ExtendedReal& r,
                               const Region& region) {
    if ((q.is_finite() && q.value() < 1.0) || (r.is_finite() && r.value() < 1.0)) {
        throw DomainError("anisotropic_norm: exponents must lie in [1, inf]");
    }
    const auto& g = f.grid();
    const auto sw = spatial_weights(g, region);
    const auto tw = time_weights(g, region);
    const bool space_empty = std::none_of(sw.begin(), sw.end(), [](double w) { return w > 0.0; });
    const bool time_empty = std::none_of(tw.begin(), tw.end(), [](double w) { return w > 0.0; });
    if (space_empty || (time_empty && r.is_finite())) {
        throw DomainError("anisotropic_norm: region does not meet the grid");
    }
    // An instantaneous region (t_lo == t_hi) under r = inf reduces to the level it hits.
    std::vector<char> active(tw.size(), 0);
    for (std::size_t j = 0; j < tw.size(); ++j) active[j] = tw[j] > 0.0;
    if (time_empty) {
        for (int j = 0; j < g.time_levels(); ++j) active[j] = region.contains_time(g.time(j), g.dt());
    }

    const std::size_t ns = g.spatial_size();
    double outer = 0.0;
    for (int j = 0; j < g.time_levels(); ++j) {
        if (!active[j]) continue;
        double inner = 0.0;
        if (q.is_infinite()) {
            for (std::size_t s = 0; s < ns; ++s) {
                if (sw[s] > 0.0) inner = std::max(inner, std::abs(f.at(s, j)));
            }
        } else {
            const double qq = q.value();
            for (std::size_t s = 0; s < ns; ++s) {
                if (sw[s] > 0.0) inner += sw[s] * std::pow(std::abs(f.at(s, j)), qq);
            }
            inner = std::pow(inner, 1.0 / qq);
        }
        if (r.is_infinite()) {
            outer = std::max(outer, inner);
        } else {
            outer += tw[j] * std::pow(inner, r.value());
        }
    }
    return r.is_infinite() ? outer : std::pow(outer, 1.0 / r.value());
}

/// Sliding average (1/w) int_t^{t+w} u dtau by the trapezoid rule; zero on
/// levels closer than w to the final time.
inline GridFunction steklov_average(const GridFunction& u, double window) {
    const auto& g = u.grid();
    const double ratio = window / g.dt();
    const long m = std::lround(ratio);
    if (!(window > 0.0) || m < 1 || std::abs(ratio - m) > 1e-9 * std::max(1.0, ratio)) {
        throw DomainError("steklov_average: window must be a positive multiple of dt");
    }
    if (m > g.time_levels() - 1) throw DomainError("steklov_average: window exceeds the time extent");
    const std::size_t ns = g.spatial_size();
    std::vector<double> out(g.size(), 0.0);
    for (int j = 0; j + m < g.time_levels(); ++j) {
        for (std::size_t s = 0; s < ns; ++s) {
            double acc = 0.5 * (u.at(s, j) + u.at(s, static_cast<int>(j + m)));
            for (long k = 1; k < m; ++k) acc += u.at(s, static_cast<int>(j + k));
            out[j * ns + s] = acc / static_cast<double>(m);
        }
    }
    return GridFunction(g, std::move(out));
}

/// max_t ||u(t)||_{L^2} + ||grad u||_{L^p} over the region.
inline double energy_norm(const GridFunction& u, double p, const Region& region) {
    if (!(p >= 1.0)) throw DomainError("energy_norm: p must be >= 1");
    const auto& g = u.grid();
    const auto sw = spatial_weights(g, region);
    const auto tw = time_weights(g, region);
    if (std::none_of(sw.begin(), sw.end(), [](double w) { return w > 0.0; }) ||
        std::none_of(tw.begin(), tw.end(), [](double w) { return w > 0.0; })) {
        throw DomainError("energy_norm: region does not meet the grid");
    }
    const std::size_t ns = g.spatial_size();
    for (std::size_t s = 0; s < ns; ++s) {
        if (sw[s] > 0.0 && !g.is_interior(g.unflatten(s), 1)) {
            throw DomainError("energy_norm: region must stay one node inside the grid");
        }
    }
    double sup_l2 = 0.0;
    double grad_p = 0.0;
    for (int j = 0; j < g.time_levels(); ++j) {
        if (!(tw[j] > 0.0)) continue;
        double l2 = 0.0;
        double gp = 0.0;
        for (std::size_t s = 0; s < ns; ++s) {
            if (!(sw[s] > 0.0)) continue;
            const double v = u.at(s, j);
            l2 += sw[s] * v * v;
            gp += sw[s] * std::pow(norm(gradient(u, Node{g.unflatten(s), j}), g.n()), p);
        }
        sup_l2 = std::max(sup_l2, std::sqrt(l2));
        grad_p += tw[j] * gp;
    }
    return sup_l2 + std::pow(grad_p, 1.0 / p);
}

/// Affine reference u(x0,t0) + grad . (x - x0) for the corrected oscillation.
struct AffinePart {
    double value = 0.0;
    Point gradient{0.0, 0.0, 0.0};
};

/// Visits every node inside the region (membership rule of Region).
template <class Visitor>
void for_each_member(const SpaceTimeGrid& g, const Region& region, Visitor&& visit) {
    const std::size_t ns = g.spatial_size();
    std::vector<std::size_t> members;
    // Restrict the scan to the bounding box of the region.
    const double reach = region.shape == Region::Shape::ball
                             ? region.radius
                             : *std::max_element(region.half_widths.begin(),
                                                 region.half_widths.begin() + g.n());
    Index lo{0, 0, 0};
    Index hi{0, 0, 0};
    for (int d = 0; d < g.n(); ++d) {
        lo[d] = std::max(0, static_cast<int>(std::floor((region.center[d] - reach + g.half_width()) / g.h())) - 1);
        hi[d] = std::min(g.per_axis() - 1,
                         static_cast<int>(std::ceil((region.center[d] + reach + g.half_width()) / g.h())) + 1);
    }
    Index i = lo;
    while (true) {
        const auto x = g.position(i);
        if (region.contains_space(x, g.n(), g.h())) members.push_back(g.flatten(i));
        int d = g.n() - 1;
        while (d >= 0 && i[d] == hi[d]) {
            i[d] = lo[d];
            --d;
        }
        if (d < 0) break;
        ++i[d];
    }
    (void)ns;
    for (int j = 0; j < g.time_levels(); ++j) {
        if (!region.contains_time(g.time(j), g.dt())) continue;
        for (std::size_t s : members) visit(s, j);
    }
}

/// sup over region nodes of |u - u(center)|, or of |u - value - grad.(x-x0)|
/// when an affine part is supplied.
inline double sup_oscillation(const GridFunction& u, const Region& region, const Node& center,
                              const std::optional<AffinePart>& affine = std::nullopt) {
    const auto& g = u.grid();
    const auto x0 = g.position(center.i);
    if (!region.contains_space(x0, g.n(), g.h()) || !region.contains_time(g.time(center.level), g.dt())) {
        throw DomainError("sup_oscillation: center lies outside the region");
    }
    const double base = affine ? affine->value : u.at(center);
    double sup = 0.0;
    for_each_member(g, region, [&](std::size_t s, int j) {
        double ref = base;
        if (affine) {
            const auto x = g.position(s);
            for (int d = 0; d < g.n(); ++d) ref += affine->gradient[d] * (x[d] - x0[d]);
        }
        sup = std::max(sup, std::abs(u.at(s, j) - ref));
    });
    return sup;
}

/// Bound on the error of replacing the continuous sup by the nodal sup:
/// max over member nodes of (sum_d |D2_d u| + |D2_t u|) / 8, using the
/// neighbours that exist.
inline double interpolation_error_estimate(const GridFunction& u, const Region& region) {
    const auto& g = u.grid();
    double est = 0.0;
    for_each_member(g, region, [&](std::size_t s, int j) {
        const auto i = g.unflatten(s);
        double acc = 0.0;
        for (int d = 0; d < g.n(); ++d) {
            if (i[d] < 1 || i[d] > g.per_axis() - 2) continue;
            Index ip = i;
            Index im = i;
            ++ip[d];
            --im[d];
            acc += std::abs(u.at(g.flatten(ip), j) - 2.0 * u.at(s, j) + u.at(g.flatten(im), j));
        }
        if (j >= 1 && j + 1 < g.time_levels()) {
            acc += std::abs(u.at(s, j + 1) - 2.0 * u.at(s, j) + u.at(s, j - 1));
        }
        est = std::max(est, acc / 8.0);
    });
    return est;
}

}  // namespace plap
