#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "plap/errors.hpp"
#include "plap/exponent_calculus.hpp"
#include "plap/grid.hpp"
#include "plap/grid_ops.hpp"

namespace plap {

/// B_radius(x0) x (t0 - depth, t0] with depth = rho^{theta_eff}.
struct Cylinder {
    Point center{0.0, 0.0, 0.0};
    double t0 = 0.0;
    double rho = 0.0;
    double radius = 0.0;
    double theta_eff = 2.0;
    double depth = 0.0;
    bool corrected = false;
    int k = 0;
    double sigma = 1.0;

    Region region() const { return Region::ball(center, radius, t0 - depth, t0); }
};

/// Q_rho = B_rho x (t0 - rho^theta, t0].
inline Cylinder intrinsic_cylinder(const Point& center, double t0, double rho, double theta) {
    if (!(rho > 0.0 && rho < 1.0)) throw DomainError("intrinsic_cylinder: rho must lie in (0, 1)");
    Cylinder c;
    c.center = center;
    c.t0 = t0;
    c.rho = rho;
    c.radius = rho;
    c.theta_eff = theta;
    c.depth = std::pow(rho, theta);
    return c;
}

namespace detail {

inline Cylinder make_corrected(const Point& center, double t0, double rho, int k, double theta,
                               double sigma) {
    if (!(sigma * theta >= 2.0 - 1e-12)) {
        std::ostringstream os;
        os << "corrected_cylinder: sigma*theta = " << sigma * theta << " < 2";
        throw DomainError(os.str());
    }
    Cylinder c;
    c.center = center;
    c.t0 = t0;
    c.rho = rho;
    c.radius = std::pow(rho, k);
    c.theta_eff = theta * (sigma + k - 1);
    c.depth = std::pow(rho, c.theta_eff);
    c.corrected = true;
    c.k = k;
    c.sigma = sigma;
    return c;
}

}  // namespace detail

/// Corrected cylinder of index k: radius rho^k, depth rho^{theta (sigma + k - 1)},
/// with theta from the gradient magnitude at the centre.
inline Cylinder corrected_cylinder(const Point& center, double t0, double rho, int k, const ProblemParams& params,
                                   double grad_mag) {
    if (!(rho > 0.0 && rho < 1.0)) throw DomainError("corrected_cylinder: rho must lie in (0, 1)");
    if (k < 1) throw DomainError("corrected_cylinder: k must be >= 1");
    const auto e = sharp_exponents(params);
    return detail::make_corrected(center, t0, rho, k, theta(params, grad_mag, rho), e.sigma);
}

/// Variant that takes theta from the per-step accumulated gradient sum.
inline Cylinder corrected_cylinder_dyadic(const Point& center, double t0, double lambda, int k,
                                          const ProblemParams& params, double grad_mag) {
    if (!(lambda > 0.0 && lambda < 1.0)) throw DomainError("corrected_cylinder: lambda must lie in (0, 1)");
    if (k < 1) throw DomainError("corrected_cylinder: k must be >= 1");
    const auto e = sharp_exponents(params);
    return detail::make_corrected(center, t0, lambda, k, theta_dyadic_step(params, grad_mag, lambda, k), e.sigma);
}

inline nlohmann::json to_json(const Cylinder& c, int n) {
    return {{"center", std::vector<double>(c.center.begin(), c.center.begin() + n)},
            {"t0", c.t0},
            {"rho", c.rho},
            {"radius", c.radius},
            {"theta_eff", c.theta_eff},
            {"depth", c.depth},
            {"corrected", c.corrected},
            {"k", c.k},
            {"sigma", c.sigma}};
}

struct CriticalZone {
    double threshold = 0.0;  // rho^alpha
    std::vector<Node> nodes;
    std::vector<char> critical;
    double fraction = 0.0;  // measure fraction of the critical set in the region
};

/// Flags nodes of the region with |grad u| <= rho^alpha.
inline CriticalZone critical_zone(const GridFunction& u, double rho, double alpha, const Region& region) {
    const auto& g = u.grid();
    const auto sw = spatial_weights(g, region);
    const auto tw = time_weights(g, region);
    CriticalZone z;
    z.threshold = std::pow(rho, alpha);
    double total = 0.0;
    double crit = 0.0;
    for_each_member(g, region, [&](std::size_t s, int j) {
        const Node node{g.unflatten(s), j};
        if (!g.is_interior(node.i, 1)) throw DomainError("critical_zone: region must stay inside the grid");
        const bool c = norm(gradient(u, node), g.n()) <= z.threshold;
        z.nodes.push_back(node);
        z.critical.push_back(c ? 1 : 0);
        // Instantaneous regions count each level with unit time weight.
        const double w = sw[s] * (tw[j] > 0.0 ? tw[j] : 1.0);
        total += w;
        if (c) crit += w;
    });
    z.fraction = total > 0.0 ? crit / total : 0.0;
    return z;
}

inline nlohmann::json to_json(const CriticalZone& z, const SpaceTimeGrid& g) {
    nlohmann::json pts = nlohmann::json::array();
    for (std::size_t k = 0; k < z.nodes.size(); ++k) {
        if (!z.critical[k]) continue;
        const auto x = g.position(z.nodes[k].i);
        pts.push_back({{"x", std::vector<double>(x.begin(), x.begin() + g.n())}, {"t", g.time(z.nodes[k].level)}});
    }
    return {{"threshold", z.threshold}, {"fraction", z.fraction}, {"critical_nodes", pts}};
}

enum class Provenance { normalize, outside_zone };

struct RescaledProblem {
    GridFunction v;
    std::optional<GridFunction> g;
    Provenance provenance = Provenance::normalize;
    /// normalize: mu and kappa; outside_zone: grad_scale tau and gamma.
    double scale = 1.0;
    double exponent = 0.0;
    /// normalize: time exponent 2s(p-1); outside_zone: gamma.
    double time_exponent = 2.0;
    double sup_v = 0.0;
    double g_norm = 0.0;
    /// outside_zone: |grad v(0,0)| and 1 - alpha(p-1) - (n/q + gamma/r).
    double grad_v_center = 0.0;
    double source_exponent = 0.0;
};

/// v(x,t) = mu^s u(mu^s x, mu^{2s(p-1)} t),
/// g(x,t) = mu^{(2p-1)s} f(mu^s x, mu^{2s(p-1)} t),
/// sampled by interpolation on `target` (u's own grid when omitted).
inline RescaledProblem rescale_normalize(const GridFunction& u, const GridFunction& f, const ProblemParams& params,
                                         double s, double delta, double mu,
                                         const std::optional<SpaceTimeGrid>& target = std::nullopt) {
    const auto& gu = u.grid();
    if (!(f.grid() == gu)) throw DomainError("rescale_normalize: u and f live on different grids");
    const auto whole = Region::whole(gu);
    const double f_norm = anisotropic_norm(f, params.q(), params.r(), whole);
    const auto km = kappa_mu(params, s, delta, u.max_abs(), f_norm);
    if (!(mu > 0.0 && mu <= km.mu_max)) {
        std::ostringstream os;
        os << "rescale_normalize: mu=" << mu << " outside (0, mu_max=" << km.mu_max << "]";
        throw DomainError(os.str());
    }
    const SpaceTimeGrid grid = target.value_or(gu);
    if (grid.n() != gu.n()) throw DomainError("rescale_normalize: dimension mismatch");
    const double xs = std::pow(mu, s);
    const double tau = 2.0 * s * (params.p() - 1.0);
    const double ts = std::pow(mu, tau);
    const double gs = std::pow(mu, (2.0 * params.p() - 1.0) * s);
    auto map = [&](const Point& x) {
        Point y{0.0, 0.0, 0.0};
        for (int d = 0; d < grid.n(); ++d) y[d] = xs * x[d];
        return y;
    };
    auto v = GridFunction::sample(grid, [&](const Point& x, double t) { return xs * interpolate(u, map(x), ts * t); });
    auto g = GridFunction::sample(grid, [&](const Point& x, double t) { return gs * interpolate(f, map(x), ts * t); });
    RescaledProblem out{std::move(v), std::nullopt, Provenance::normalize, mu, km.kappa, tau};
    out.sup_v = out.v.max_abs();
    out.g_norm = anisotropic_norm(g, params.q(), params.r(), Region::whole(grid));
    out.g = std::move(g);
    return out;
}

/// v(x,t) = (u(x0 + tau x, t0 + tau^gamma t) - u(x0,t0)) / tau^{1+alpha},
/// tau = |grad u(x0,t0)|^{1/alpha}, on [-1,1]^n x [-1,0] with u's node counts.
/// The optional source maps to tau^{1-alpha(p-1)} f(x0 + tau x, t0 + tau^gamma t).
inline RescaledProblem rescale_outside(const GridFunction& u, const Node& center, const ProblemParams& params,
                                       const std::optional<GridFunction>& f = std::nullopt) {
    const auto& gu = u.grid();
    const auto e = sharp_exponents(params);
    const double alpha = e.alpha;
    const auto grad = gradient(u, center);
    const double gm = norm(grad, gu.n());
    if (!(gm > 0.0)) throw DomainError("rescale_outside: gradient vanishes at the centre");
    const double tau = std::pow(gm, 1.0 / alpha);
    const double depth = std::pow(tau, e.gamma);
    const auto x0 = gu.position(center.i);
    const double t0 = gu.time(center.level);
    if (tau < 4.0 * gu.h() || depth < gu.dt()) {
        std::ostringstream os;
        os << "rescale_outside: grad scale tau=" << tau << " below grid resolution (h=" << gu.h()
           << "); the centre lies in the critical zone at this resolution";
        throw DomainError(os.str());
    }
    for (int d = 0; d < gu.n(); ++d) {
        if (std::abs(x0[d]) + tau > gu.half_width() - gu.h()) {
            throw DomainError("rescale_outside: rescaled cylinder leaves the spatial domain");
        }
    }
    if (t0 - depth < gu.t_start()) throw DomainError("rescale_outside: rescaled cylinder leaves the time range");

    const auto grid = SpaceTimeGrid::with_counts(gu.n(), 1.0, gu.per_axis(), -1.0, 0.0, gu.time_levels());
    const double u0 = u.at(center);
    const double vs = std::pow(tau, 1.0 + alpha);
    auto map = [&](const Point& x) {
        Point y{0.0, 0.0, 0.0};
        for (int d = 0; d < gu.n(); ++d) y[d] = x0[d] + tau * x[d];
        return y;
    };
    auto v = GridFunction::sample(grid, [&](const Point& x, double t) {
        return (interpolate(u, map(x), t0 + depth * t) - u0) / vs;
    });
    RescaledProblem out{std::move(v), std::nullopt, Provenance::outside_zone, tau, alpha, e.gamma};
    out.sup_v = out.v.max_abs();
    out.source_exponent = 1.0 - alpha * (params.p() - 1.0) - (params.n_over_q() + e.gamma * params.inv_r());
    Point origin{0.0, 0.0, 0.0};
    out.grad_v_center = norm(gradient_at(out.v, origin, 0.0), gu.n());
    if (f) {
        if (!(f->grid() == gu)) throw DomainError("rescale_outside: u and f live on different grids");
        const double fs = std::pow(tau, 1.0 - alpha * (params.p() - 1.0));
        auto g = GridFunction::sample(grid, [&](const Point& x, double t) {
            return fs * interpolate(*f, map(x), t0 + depth * t);
        });
        out.g_norm = anisotropic_norm(g, params.q(), params.r(), Region::whole(grid));
        out.g = std::move(g);
    }
    return out;
}

}  // namespace plap
