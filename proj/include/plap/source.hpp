#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "plap/errors.hpp"
#include "plap/extended_real.hpp"
#include "plap/grid.hpp"
#include "plap/grid_ops.hpp"

namespace plap {

enum class SignPattern { positive, odd_in_x, odd_in_t };

/// Source term f of the equation. separable_power is
///   amplitude * sign * |x - x_s|^{-a} * |t - t_s|^{-b},
/// where sign is +1, sign(x_1 - x_s1) or sign(t - t_s).
struct SourceSpec {
    enum class Kind { zero, constant, separable_power, tabulated };

    Kind kind = Kind::zero;
    double amplitude = 0.0;
    double a = 0.0;
    double b = 0.0;
    SignPattern signs = SignPattern::positive;
    Point x_singular{0.0, 0.0, 0.0};
    double t_singular = 0.0;
    ExtendedReal q = infinity;
    ExtendedReal r = infinity;
    std::shared_ptr<const GridFunction> table;

    static SourceSpec zero() { return {}; }

    static SourceSpec constant(double c) {
        SourceSpec s;
        s.kind = Kind::constant;
        s.amplitude = c;
        return s;
    }

    static SourceSpec separable_power(double amplitude, double a, double b, ExtendedReal q,
                                      ExtendedReal r, SignPattern signs = SignPattern::positive) {
        if (a < 0.0 || b < 0.0) throw DomainError("SourceSpec: exponents a, b must be >= 0");
        SourceSpec s;
        s.kind = Kind::separable_power;
        s.amplitude = amplitude;
        s.a = a;
        s.b = b;
        s.q = q;
        s.r = r;
        s.signs = signs;
        return s;
    }

    static SourceSpec tabulated(GridFunction f, ExtendedReal q = infinity, ExtendedReal r = infinity) {
        SourceSpec s;
        s.kind = Kind::tabulated;
        s.table = std::make_shared<const GridFunction>(std::move(f));
        s.q = q;
        s.r = r;
        return s;
    }

    SourceSpec scaled(double c) const {
        SourceSpec s = *this;
        if (kind == Kind::tabulated) {
            s.table = std::make_shared<const GridFunction>(table->scaled(c));
        } else {
            s.amplitude *= c;
        }
        return s;
    }

    bool is_zero() const noexcept {
        return kind == Kind::zero || (kind != Kind::tabulated && amplitude == 0.0);
    }
};

/// Whether the source has finite L^{q,r} norm on bounded cylinders.
struct NormCertificate {
    bool finite = true;
    std::string reason;
};

inline NormCertificate norm_certificate(const SourceSpec& spec, int n) {
    if (spec.kind != SourceSpec::Kind::separable_power || spec.amplitude == 0.0) return {};
    NormCertificate c;
    if (spec.a > 0.0 && !(spec.q.is_finite() && spec.a * spec.q.value() < n)) {
        c.finite = false;
        c.reason = "a*q must be < n";
    } else if (spec.b > 0.0 && !(spec.r.is_finite() && spec.b * spec.r.value() < 1.0)) {
        c.finite = false;
        c.reason = "b*r must be < 1";
    }
    return c;
}

namespace detail {

/// Tensor Gauss-Legendre over a box in n <= 3 dimensions.
template <int N, class F>
double tensor_gauss(const Point& lo, const Point& hi, int n, F&& f) {
    using G = boost::math::quadrature::gauss<double, N>;
    if (n == 1) {
        return G::integrate([&](double x) { return f(Point{x, 0.0, 0.0}); }, lo[0], hi[0]);
    }
    if (n == 2) {
        return G::integrate(
            [&](double x) {
                return G::integrate([&](double y) { return f(Point{x, y, 0.0}); }, lo[1], hi[1]);
            },
            lo[0], hi[0]);
    }
    return G::integrate(
        [&](double x) {
            return G::integrate(
                [&](double y) {
                    return G::integrate([&](double z) { return f(Point{x, y, z}); }, lo[2], hi[2]);
                },
                lo[1], hi[1]);
        },
        lo[0], hi[0]);
}

inline double radial_power(const Point& x, const Point& c, int n, double beta) {
    double d2 = 0.0;
    for (int d = 0; d < n; ++d) d2 += (x[d] - c[d]) * (x[d] - c[d]);
    return std::pow(d2, -0.5 * beta);
}

/// int_box |x - c|^{-beta} for a box not containing c; boxes close to c
/// relative to their size are bisected first.
inline double smooth_power_integral(const Point& lo, const Point& hi, const Point& c, int n,
                                    double beta, int depth = 0) {
    double dist2 = 0.0;
    double diam2 = 0.0;
    for (int d = 0; d < n; ++d) {
        const double g = std::max({lo[d] - c[d], 0.0, c[d] - hi[d]});
        dist2 += g * g;
        diam2 += (hi[d] - lo[d]) * (hi[d] - lo[d]);
    }
    if (depth < 8 && dist2 < 4.0 * diam2) {
        double sum = 0.0;
        for (int corner = 0; corner < (1 << n); ++corner) {
            Point a = lo;
            Point b = hi;
            for (int d = 0; d < n; ++d) {
                const double mid = 0.5 * (lo[d] + hi[d]);
                if ((corner >> d) & 1) {
                    a[d] = mid;
                } else {
                    b[d] = mid;
                }
            }
            sum += smooth_power_integral(a, b, c, n, beta, depth + 1);
        }
        return sum;
    }
    return tensor_gauss<6>(lo, hi, n, [&](const Point& x) { return radial_power(x, c, n, beta); });
}

/// int over [0,e_1]x...x[0,e_n] of |x|^{-beta}, beta < n. Halving the box
/// scales the integral by 2^{beta-n}, so I = (sum over the other 2^n - 1
/// halves) / (1 - 2^{beta-n}).
inline double corner_power_integral(const Point& extent, int n, double beta) {
    const Point origin{0.0, 0.0, 0.0};
    double others = 0.0;
    for (int corner = 1; corner < (1 << n); ++corner) {
        Point a{0.0, 0.0, 0.0};
        Point b{0.0, 0.0, 0.0};
        for (int d = 0; d < n; ++d) {
            const double mid = 0.5 * extent[d];
            a[d] = ((corner >> d) & 1) ? mid : 0.0;
            b[d] = ((corner >> d) & 1) ? extent[d] : mid;
        }
        others += smooth_power_integral(a, b, origin, n, beta);
    }
    return others / (1.0 - std::pow(2.0, beta - n));
}

/// int_box |x - c|^{-beta} dx for beta < n; c may lie anywhere.
inline double box_power_integral(const Point& lo, const Point& hi, const Point& c, int n, double beta) {
    if (beta == 0.0) {
        double v = 1.0;
        for (int d = 0; d < n; ++d) v *= hi[d] - lo[d];
        return v;
    }
    if (!(beta < n)) throw DomainError("box_power_integral: exponent not integrable");
    bool touches = true;
    for (int d = 0; d < n; ++d) {
        if (c[d] < lo[d] || c[d] > hi[d]) touches = false;
    }
    if (!touches) return smooth_power_integral(lo, hi, c, n, beta);
    // Split at c so that c is a corner of each piece.
    double sum = 0.0;
    for (int corner = 0; corner < (1 << n); ++corner) {
        Point extent{0.0, 0.0, 0.0};
        bool empty = false;
        for (int d = 0; d < n; ++d) {
            extent[d] = ((corner >> d) & 1) ? hi[d] - c[d] : c[d] - lo[d];
            if (extent[d] <= 0.0) empty = true;
        }
        if (!empty) sum += corner_power_integral(extent, n, beta);
    }
    return sum;
}

/// int_a^b |t - ts|^{-beta} dt, or of sign(t - ts)|t - ts|^{-beta} when signed.
inline double time_power_integral(double a, double b, double ts, double beta, bool is_signed) {
    if (beta == 0.0 && !is_signed) return b - a;
    if (!(beta < 1.0)) throw DomainError("time_power_integral: exponent not integrable");
    const double e = 1.0 - beta;
    auto prim = [&](double u) {
        const double m = std::pow(std::abs(u), e) / e;
        if (is_signed) return m;
        return u < 0.0 ? -m : m;
    };
    return prim(b - ts) - prim(a - ts);
}

/// int_a^b w(t) (t - a) dt with w as in time_power_integral.
inline double time_power_moment(double a, double b, double ts, double beta, bool is_signed) {
    if (!(beta < 1.0)) throw DomainError("time_power_moment: exponent not integrable");
    // int u w(u) du has primitive |u|^{2-beta}/(2-beta), odd-extended when signed.
    const double e = 2.0 - beta;
    auto prim = [&](double u) {
        const double m = std::pow(std::abs(u), e) / e;
        if (is_signed) return u < 0.0 ? -m : m;
        return m;
    };
    const double first = prim(b - ts) - prim(a - ts);
    return first + (ts - a) * time_power_integral(a, b, ts, beta, is_signed);
}

/// Dual cell of a node, clipped to the grid box.
inline std::pair<Point, Point> dual_cell(const SpaceTimeGrid& g, std::size_t s) {
    const auto x = g.position(s);
    Point lo{0.0, 0.0, 0.0};
    Point hi{0.0, 0.0, 0.0};
    for (int d = 0; d < g.n(); ++d) {
        lo[d] = std::max(x[d] - 0.5 * g.h(), -g.half_width());
        hi[d] = std::min(x[d] + 0.5 * g.h(), g.half_width());
    }
    return {lo, hi};
}

inline double cell_volume(const Point& lo, const Point& hi, int n) {
    double v = 1.0;
    for (int d = 0; d < n; ++d) v *= hi[d] - lo[d];
    return v;
}

inline double sign_of(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

/// Per-node mean over the dual cell of |x - x_s|^{-beta}, raised to 1/exponent.
inline std::vector<double> spatial_power_means(const SpaceTimeGrid& g, const Point& xs, double beta,
                                               double root) {
    std::vector<double> out(g.spatial_size(), 1.0);
    if (beta == 0.0) return out;
    for (std::size_t s = 0; s < out.size(); ++s) {
        const auto [lo, hi] = dual_cell(g, s);
        const double mean = box_power_integral(lo, hi, xs, g.n(), beta) / cell_volume(lo, hi, g.n());
        out[s] = std::pow(mean, 1.0 / root);
    }
    return out;
}

}  // namespace detail

/// Source sampled on a grid, with its L^{q,r} norm over the whole grid.
struct SourceField {
    GridFunction values;
    double norm = 0.0;
};

/// Nodal values of the source. For separable_power the node value is the
/// q-mean over the node's dual cell in space and the r-mean over its dual
/// interval in time, so singular cells carry finite values and the midpoint
/// norm of the field equals the exact norm on whole cells.
inline SourceField make_source(const SourceSpec& spec, const SpaceTimeGrid& g) {
    const auto cert = norm_certificate(spec, g.n());
    if (!cert.finite) throw DomainError("make_source: source not in L^{q,r}: " + cert.reason);
    const auto whole = Region::whole(g);
    switch (spec.kind) {
        case SourceSpec::Kind::zero:
            return {GridFunction::zeros(g), 0.0};
        case SourceSpec::Kind::constant: {
            auto f = GridFunction(g, std::vector<double>(g.size(), spec.amplitude));
            const double nrm = anisotropic_norm(f, spec.q, spec.r, whole);
            return {std::move(f), nrm};
        }
        case SourceSpec::Kind::tabulated: {
            if (!spec.table || !(spec.table->grid() == g)) {
                throw DomainError("make_source: tabulated source lives on a different grid");
            }
            const double nrm = anisotropic_norm(*spec.table, spec.q, spec.r, whole);
            return {*spec.table, nrm};
        }
        case SourceSpec::Kind::separable_power:
            break;
    }
    const double qv = spec.q.is_finite() ? spec.q.value() : 1.0;
    const double rv = spec.r.is_finite() ? spec.r.value() : 1.0;
    const auto space = detail::spatial_power_means(g, spec.x_singular, spec.a * qv, qv);
    std::vector<double> time(g.time_levels(), 1.0);
    if (spec.b > 0.0) {
        for (int j = 0; j < g.time_levels(); ++j) {
            const double t = g.time(j);
            const double lo = std::max(t - 0.5 * g.dt(), g.t_start());
            const double hi = std::min(t + 0.5 * g.dt(), g.t_end());
            const double mean =
                detail::time_power_integral(lo, hi, spec.t_singular, spec.b * rv, false) / (hi - lo);
            time[j] = std::pow(mean, 1.0 / rv);
        }
    }
    const std::size_t ns = g.spatial_size();
    std::vector<double> v(g.size());
    for (int j = 0; j < g.time_levels(); ++j) {
        const double ts = spec.signs == SignPattern::odd_in_t ? detail::sign_of(g.time(j) - spec.t_singular) : 1.0;
        for (std::size_t s = 0; s < ns; ++s) {
            const double xsgn = spec.signs == SignPattern::odd_in_x
                                    ? detail::sign_of(g.position(s)[0] - spec.x_singular[0])
                                    : 1.0;
            v[j * ns + s] = spec.amplitude * xsgn * ts * space[s] * time[j];
        }
    }
    GridFunction f(g, std::move(v));
    const double nrm = anisotropic_norm(f, spec.q, spec.r, whole);
    return {std::move(f), nrm};
}

/// Step-averaged forcing for the time stepper: exact time averages of the
/// temporal factor and plain dual-cell means in space.
class SourceForcing {
public:
    SourceForcing(const SourceSpec& spec, const SpaceTimeGrid& g) : spec_(spec), grid_(g) {
        if (spec.kind == SourceSpec::Kind::separable_power) {
            if (!(spec.a < g.n())) throw DomainError("SourceForcing: |x|^{-a} not locally integrable");
            if (!(spec.b < 1.0)) throw DomainError("SourceForcing: |t|^{-b} not locally integrable");
            space_ = detail::spatial_power_means(g, spec.x_singular, spec.a, 1.0);
            for (std::size_t s = 0; s < space_.size(); ++s) {
                if (spec.signs == SignPattern::odd_in_x) {
                    space_[s] *= detail::sign_of(g.position(s)[0] - spec.x_singular[0]);
                }
                space_[s] *= spec.amplitude;
            }
        }
        if (spec.kind == SourceSpec::Kind::tabulated) {
            if (!spec.table || !(spec.table->grid() == g)) {
                throw DomainError("SourceForcing: tabulated source lives on a different grid");
            }
        }
    }

    bool is_zero() const noexcept { return spec_.is_zero(); }

    /// out[s] = (1/(tb-ta)) int_ta^tb f(node s, t) dt.
    void step_average(double ta, double tb, std::vector<double>& out) const {
        const std::size_t ns = grid_.spatial_size();
        out.assign(ns, 0.0);
        switch (spec_.kind) {
            case SourceSpec::Kind::zero:
                return;
            case SourceSpec::Kind::constant:
                std::fill(out.begin(), out.end(), spec_.amplitude);
                return;
            case SourceSpec::Kind::separable_power: {
                const double tf = detail::time_power_integral(ta, tb, spec_.t_singular, spec_.b,
                                                              spec_.signs == SignPattern::odd_in_t) /
                                  (tb - ta);
                for (std::size_t s = 0; s < ns; ++s) out[s] = space_[s] * tf;
                return;
            }
            case SourceSpec::Kind::tabulated: {
                // Linear in time between stored levels; averaged with the trapezoid rule.
                for (double t : {ta, tb}) {
                    const double f = std::clamp((t - grid_.t_start()) / grid_.dt(), 0.0,
                                                static_cast<double>(grid_.time_levels() - 1));
                    const int j = std::min(static_cast<int>(std::floor(f)), grid_.time_levels() - 2);
                    const double w = f - j;
                    for (std::size_t s = 0; s < ns; ++s) {
                        out[s] += 0.5 * ((1.0 - w) * spec_.table->at(s, j) + w * spec_.table->at(s, j + 1));
                    }
                }
                return;
            }
        }
    }

    /// Spatial factor (dual-cell mean, amplitude and spatial sign included) of a separable source.
    const std::vector<double>& spatial_factor() const noexcept { return space_; }
    const SourceSpec& spec() const noexcept { return spec_; }

private:
    SourceSpec spec_;
    SpaceTimeGrid grid_;
    std::vector<double> space_;
};

}  // namespace plap
