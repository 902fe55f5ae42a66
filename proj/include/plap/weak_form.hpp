#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "plap/errors.hpp"
#include "plap/grid.hpp"
#include "plap/grid_ops.hpp"
#include "plap/solver.hpp"
#include "plap/source.hpp"

namespace plap {

namespace detail {

inline int snap_level(const SpaceTimeGrid& g, double t, const char* who) {
    const int j = g.nearest_level(t);
    if (std::abs(g.time(j) - t) > 1e-9 * g.dt() + 1e-12) {
        throw DomainError(std::string(who) + ": region time bounds must fall on time levels");
    }
    return j;
}

/// Second-order time derivative of a grid function at level j (one-sided at the ends).
inline double time_derivative(const GridFunction& u, std::size_t s, int j) {
    const auto& g = u.grid();
    const int L = g.time_levels();
    const double dt = g.dt();
    if (L < 3) return (u.at(s, 1) - u.at(s, 0)) / dt;
    if (j == 0) return (-3.0 * u.at(s, 0) + 4.0 * u.at(s, 1) - u.at(s, 2)) / (2.0 * dt);
    if (j == L - 1) return (3.0 * u.at(s, j) - 4.0 * u.at(s, j - 1) + u.at(s, j - 2)) / (2.0 * dt);
    return (u.at(s, j + 1) - u.at(s, j - 1)) / (2.0 * dt);
}

/// Trapezoid weights of levels j1..j2.
inline double trapezoid_weight(const SpaceTimeGrid& g, int j, int j1, int j2) {
    if (j1 == j2) return 0.0;
    return (j == j1 || j == j2) ? 0.5 * g.dt() : g.dt();
}

inline void check_support(const GridFunction& psi, const Region& region, const char* who) {
    const auto& g = psi.grid();
    const double scale = std::max(psi.max_abs(), 1e-300);
    for (int j = 0; j < g.time_levels(); ++j) {
        for (std::size_t s = 0; s < g.spatial_size(); ++s) {
            if (std::abs(psi.at(s, j)) <= 1e-14 * scale) continue;
            if (!g.is_interior(g.unflatten(s), 1) || !region.contains_space(g.position(s), g.n(), g.h())) {
                throw DomainError(std::string(who) + ": test function not compactly supported in the region");
            }
        }
    }
}

}  // namespace detail

/// LHS - RHS of the weak formulation on K x [t1, t2]:
///   int_K u psi |_{t1}^{t2} + int int (-u psi_t + |grad u|^{p-2} grad u . grad psi) - int int f psi.
/// Midpoint rule in space, trapezoid in time. For separable power sources
/// the time integral of f psi uses exact moments of |t - t_s|^{-b} against
/// the piecewise-linear interpolant of psi.
inline double weak_residual(const GridFunction& u, const SourceSpec& source, const GridFunction& psi,
                            const Region& region, double p) {
    const auto& g = u.grid();
    if (!(psi.grid() == g)) throw DomainError("weak_residual: u and psi live on different grids");
    detail::check_support(psi, region, "weak_residual");
    const int j1 = detail::snap_level(g, region.t_lo, "weak_residual");
    const int j2 = detail::snap_level(g, region.t_hi, "weak_residual");
    const double vol = std::pow(g.h(), g.n());
    const std::size_t ns = g.spatial_size();

    // Nodes where psi is nonzero, plus their neighbours: the central
    // difference of psi is nonzero one node outside its support.
    std::vector<char> mark(ns, 0);
    for (std::size_t s = 0; s < ns; ++s) {
        bool nonzero = false;
        for (int j = j1; j <= j2 && !nonzero; ++j) nonzero = psi.at(s, j) != 0.0;
        if (!nonzero) continue;
        mark[s] = 1;
        const auto idx = g.unflatten(s);
        for (int d = 0; d < g.n(); ++d) {
            for (int step : {-1, 1}) {
                Index nb = idx;
                nb[d] += step;
                if (g.is_interior(nb, 1)) mark[g.flatten(nb)] = 1;
            }
        }
    }
    std::vector<std::size_t> support;
    for (std::size_t s = 0; s < ns; ++s) {
        if (mark[s]) support.push_back(s);
    }

    double boundary = 0.0;
    for (std::size_t s : support) boundary += vol * (u.at(s, j2) * psi.at(s, j2) - u.at(s, j1) * psi.at(s, j1));

    double bulk = 0.0;
    for (int j = j1; j <= j2; ++j) {
        const double w = detail::trapezoid_weight(g, j, j1, j2);
        if (w == 0.0) continue;
        double level = 0.0;
        for (std::size_t s : support) {
            const Node node{g.unflatten(s), j};
            const auto gu = gradient(u, node);
            const auto gp = gradient(psi, node);
            const double m = norm(gu, g.n());
            const double a = p == 2.0 ? 1.0 : (m > 0.0 ? std::pow(m, p - 2.0) : 0.0);
            double dot = 0.0;
            for (int d = 0; d < g.n(); ++d) dot += gu[d] * gp[d];
            level += a * dot;
        }
        bulk += w * vol * level;
    }
    // Interval-wise trapezoid pairing of u with the difference quotient of
    // psi; for u constant in time it telescopes against the boundary term.
    for (int j = j1; j < j2; ++j) {
        double level = 0.0;
        for (std::size_t s : support) {
            level += 0.5 * (u.at(s, j) + u.at(s, j + 1)) * (psi.at(s, j + 1) - psi.at(s, j));
        }
        bulk -= vol * level;
    }

    double forcing = 0.0;
    switch (source.kind) {
        case SourceSpec::Kind::zero:
            break;
        case SourceSpec::Kind::constant:
            for (int j = j1; j <= j2; ++j) {
                const double w = detail::trapezoid_weight(g, j, j1, j2);
                for (std::size_t s : support) forcing += w * vol * source.amplitude * psi.at(s, j);
            }
            break;
        case SourceSpec::Kind::tabulated:
            if (!(source.table->grid() == g)) throw DomainError("weak_residual: source grid mismatch");
            for (int j = j1; j <= j2; ++j) {
                const double w = detail::trapezoid_weight(g, j, j1, j2);
                for (std::size_t s : support) forcing += w * vol * source.table->at(s, j) * psi.at(s, j);
            }
            break;
        case SourceSpec::Kind::separable_power: {
            const SourceForcing sf(source, g);
            const bool odd_t = source.signs == SignPattern::odd_in_t;
            for (int j = j1; j < j2; ++j) {
                const double ta = g.time(j);
                const double tb = g.time(j + 1);
                const double m0 = detail::time_power_integral(ta, tb, source.t_singular, source.b, odd_t);
                const double m1 = detail::time_power_moment(ta, tb, source.t_singular, source.b, odd_t);
                const double len = tb - ta;
                for (std::size_t s : support) {
                    const double slope = (psi.at(s, j + 1) - psi.at(s, j)) / len;
                    forcing += vol * sf.spatial_factor()[s] * (psi.at(s, j) * m0 + slope * m1);
                }
            }
            break;
        }
    }
    return boundary + bulk - forcing;
}

/// Polynomial bump (1 - |x - c|^2 / rho^2)_+^k times a smoothstep ramp that
/// rises from 0 at t1 to 1 at t2.
inline GridFunction bump_test_function(const SpaceTimeGrid& g, const Point& center, double rho, int k,
                                       double t1, double t2) {
    if (!(rho > 0.0) || k < 1 || !(t2 > t1)) throw DomainError("bump_test_function: bad parameters");
    return GridFunction::sample(g, [&](const Point& x, double t) {
        double r2 = 0.0;
        for (int d = 0; d < g.n(); ++d) r2 += (x[d] - center[d]) * (x[d] - center[d]);
        const double base = 1.0 - r2 / (rho * rho);
        if (base <= 0.0) return 0.0;
        const double z = std::clamp((t - t1) / (t2 - t1), 0.0, 1.0);
        return std::pow(base, k) * z * z * (3.0 - 2.0 * z);
    });
}

struct TestFunction {
    int k = 2;
    double rho = 0.0;
    GridFunction psi;
};

/// k in {2, 3} at scales rho, 3rho/4, rho/2.
inline std::vector<TestFunction> test_function_battery(const SpaceTimeGrid& g, const Point& center, double rho,
                                                       double t1, double t2) {
    std::vector<TestFunction> out;
    for (int k : {2, 3}) {
        for (double scale : {1.0, 0.75, 0.5}) {
            out.push_back({k, scale * rho, bump_test_function(g, center, scale * rho, k, t1, t2)});
        }
    }
    return out;
}

/// Size of the backward-Euler / central-difference truncation error tested
/// against |psi|: int int |psi| (dt/2 |u_tt| + h^2/12 sum_d |d_d^4 u|).
inline double truncation_estimate(const GridFunction& u, const GridFunction& psi, const Region& region) {
    const auto& g = u.grid();
    const int j1 = detail::snap_level(g, region.t_lo, "truncation_estimate");
    const int j2 = detail::snap_level(g, region.t_hi, "truncation_estimate");
    const auto strides = detail::strides_of(g);
    const double vol = std::pow(g.h(), g.n());
    double est = 0.0;
    for (int j = std::max(j1, 1); j <= std::min(j2, g.time_levels() - 2); ++j) {
        for (std::size_t s = 0; s < g.spatial_size(); ++s) {
            const double w = std::abs(psi.at(s, j));
            if (w == 0.0) continue;
            const double utt = (u.at(s, j + 1) - 2.0 * u.at(s, j) + u.at(s, j - 1)) / (g.dt() * g.dt());
            double d4 = 0.0;
            const auto idx = g.unflatten(s);
            if (g.is_interior(idx, 2)) {
                for (int d = 0; d < g.n(); ++d) {
                    const std::size_t st = strides[d];
                    d4 += std::abs(u.at(s + 2 * st, j) - 4.0 * u.at(s + st, j) + 6.0 * u.at(s, j) -
                                   4.0 * u.at(s - st, j) + u.at(s - 2 * st, j)) /
                          std::pow(g.h(), 4);
                }
            }
            est += g.dt() * vol * w * (0.5 * g.dt() * std::abs(utt) + g.h() * g.h() / 12.0 * d4);
        }
    }
    return est;
}

/// Terms of the energy inequality
///   sup_t int u^2 xi^p + int int |grad u|^p xi^p
///     <= int int |u|^p (xi^p + |grad xi|^p) + C int int u^2 xi^{p-1} |xi_t| + C ||f||_{L^{q,r}}.
struct CaccioppoliTerms {
    double sup_energy = 0.0;
    double gradient_energy = 0.0;
    double lower_order = 0.0;
    double time_term = 0.0;
    double source_term = 0.0;
    double lhs = 0.0;
    double rhs = 0.0;
};

inline CaccioppoliTerms caccioppoli_gap(const GridFunction& u, const SourceSpec& source, const GridFunction& cutoff,
                                        const Region& region, double p, double C_fit) {
    const auto& g = u.grid();
    if (!(cutoff.grid() == g)) throw DomainError("caccioppoli_gap: u and cutoff live on different grids");
    for (double v : cutoff.values()) {
        if (v < -1e-14 || v > 1.0 + 1e-14) throw DomainError("caccioppoli_gap: cutoff values must lie in [0, 1]");
    }
    detail::check_support(cutoff, region, "caccioppoli_gap");
    const int j1 = detail::snap_level(g, region.t_lo, "caccioppoli_gap");
    const int j2 = detail::snap_level(g, region.t_hi, "caccioppoli_gap");
    const double vol = std::pow(g.h(), g.n());

    CaccioppoliTerms t;
    for (int j = j1; j <= j2; ++j) {
        const double w = detail::trapezoid_weight(g, j, j1, j2);
        double energy = 0.0;
        for (std::size_t s = 0; s < g.spatial_size(); ++s) {
            const double xi = std::clamp(cutoff.at(s, j), 0.0, 1.0);
            const Node node{g.unflatten(s), j};
            if (!g.is_interior(node.i, 1)) continue;
            if (xi == 0.0 && cutoff.at(s, std::min(j + 1, g.time_levels() - 1)) == 0.0 &&
                cutoff.at(s, std::max(j - 1, 0)) == 0.0 && norm(gradient(cutoff, node), g.n()) == 0.0) {
                continue;
            }
            const double uv = u.at(s, j);
            const double xp = std::pow(xi, p);
            energy += vol * uv * uv * xp;
            const double gu = norm(gradient(u, node), g.n());
            const double gx = norm(gradient(cutoff, node), g.n());
            const double xt = std::abs(detail::time_derivative(cutoff, s, j));
            t.gradient_energy += w * vol * std::pow(gu, p) * xp;
            t.lower_order += w * vol * std::pow(std::abs(uv), p) * (xp + std::pow(gx, p));
            t.time_term += w * vol * uv * uv * std::pow(xi, p - 1.0) * xt;
        }
        t.sup_energy = std::max(t.sup_energy, energy);
    }
    if (!source.is_zero()) {
        const auto field = make_source(source, g);
        t.source_term = anisotropic_norm(field.values, source.q, source.r, region);
    }
    t.lhs = t.sup_energy + t.gradient_energy;
    t.rhs = t.lower_order + C_fit * (t.time_term + t.source_term);
    return t;
}

/// Smallest C for which lhs <= rhs holds for every member of a corpus.
inline double fit_caccioppoli_constant(const std::vector<CaccioppoliTerms>& corpus) {
    double C = 0.0;
    for (const auto& t : corpus) {
        const double excess = t.lhs - t.lower_order;
        if (excess <= 0.0) continue;
        const double weight = t.time_term + t.source_term;
        if (!(weight > 0.0)) return std::numeric_limits<double>::infinity();
        C = std::max(C, excess / weight);
    }
    return C;
}

}  // namespace plap
