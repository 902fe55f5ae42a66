#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "plap/errors.hpp"
#include "plap/exponent_calculus.hpp"
#include "plap/grid.hpp"
#include "plap/grid_ops.hpp"
#include "plap/intrinsic_geometry.hpp"
#include "plap/solver.hpp"

namespace plap {

enum class OscillationMode { plain, affine };
enum class CylinderVariant { corrected, dyadic_step };

struct ProfileEntry {
    int k = 0;
    double rho = 0.0;  // lambda^k, the cylinder radius
    double theta = 0.0;
    double depth = 0.0;
    double sup_osc = 0.0;
    double grad_mag = 0.0;
};

struct OscillationProfile {
    Node center;
    Point x0{0.0, 0.0, 0.0};
    double t0 = 0.0;
    double lambda = 0.25;
    OscillationMode mode = OscillationMode::plain;
    CylinderVariant variant = CylinderVariant::corrected;
    double grad_mag = 0.0;
    Point grad{0.0, 0.0, 0.0};
    std::vector<ProfileEntry> entries;
    /// Interpolation-error estimate on the smallest cylinder, and 10x that.
    double interpolation_error = 0.0;
    double noise_floor = 0.0;
};

/// Sup-oscillations over the lambda-adic family of corrected cylinders
/// centred at `center`, k = 1..K.
inline OscillationProfile oscillation_profile(const GridFunction& u, const Node& center, double lambda, int K,
                                              const ProblemParams& params, OscillationMode mode,
                                              CylinderVariant variant = CylinderVariant::corrected) {
    if (!(lambda > 0.0 && lambda < 0.5)) throw DomainError("oscillation_profile: lambda must lie in (0, 1/2)");
    if (K < 4) throw DomainError("oscillation_profile: K must be >= 4");
    const auto& g = u.grid();
    if (!g.is_interior(center.i, 1)) throw ProbeError("oscillation_profile: centre too close to the spatial boundary");

    OscillationProfile prof;
    prof.center = center;
    prof.x0 = g.position(center.i);
    prof.t0 = g.time(center.level);
    prof.lambda = lambda;
    prof.mode = mode;
    prof.variant = variant;
    prof.grad = gradient(u, center);
    prof.grad_mag = norm(prof.grad, g.n());

    std::optional<AffinePart> affine;
    if (mode == OscillationMode::affine) affine = AffinePart{u.at(center), prof.grad};

    std::vector<Cylinder> cyl;
    for (int k = 1; k <= K; ++k) {
        cyl.push_back(variant == CylinderVariant::corrected
                          ? corrected_cylinder(prof.x0, prof.t0, lambda, k, params, prof.grad_mag)
                          : corrected_cylinder_dyadic(prof.x0, prof.t0, lambda, k, params, prof.grad_mag));
    }
    const auto& first = cyl.front();
    for (int d = 0; d < g.n(); ++d) {
        if (std::abs(prof.x0[d]) + first.radius > g.half_width() + 1e-12) {
            throw ProbeError("oscillation_profile: largest cylinder leaves the spatial domain");
        }
    }
    if (prof.t0 - first.depth < g.t_start() - 1e-12) {
        throw ProbeError("oscillation_profile: largest cylinder reaches below the initial time");
    }
    const auto& last = cyl.back();
    if (last.radius < 2.0 * g.h() - 1e-12 || last.depth < g.dt() - 1e-12) {
        std::ostringstream os;
        os << "oscillation_profile: smallest cylinder (radius " << last.radius << ", depth " << last.depth
           << ") is not resolved by h=" << g.h() << ", dt=" << g.dt();
        throw ProbeError(os.str());
    }
    for (const auto& c : cyl) {
        prof.entries.push_back({c.k, c.radius, c.theta_eff, c.depth, sup_oscillation(u, c.region(), center, affine),
                                prof.grad_mag});
    }
    prof.interpolation_error = interpolation_error_estimate(u, last.region());
    prof.noise_floor = 10.0 * prof.interpolation_error;
    return prof;
}

struct DyadicLevel {
    int k = 0;
    double rho = 0.0;
    double sup_osc = 0.0;
    double shape = 0.0;  // rho^{1+alpha} (1 + g rho^{-alpha})
    double ratio = 0.0;
    double bound = 0.0;  // M * shape
    double series_sum = 0.0;
    double series_closed = 0.0;
    double chain_bound = 0.0;
    bool chain_ok = true;
};

struct DyadicReport {
    double alpha = 0.0;
    double M = 0.0;
    bool finite = true;
    double identity_error = 0.0;
    std::vector<DyadicLevel> levels;
};

/// Fitted constant M = max_k S_k / [rho_k^{1+alpha} (1 + g rho_k^{-alpha})]
/// together with the bound sequence B_k of the dyadic iteration, its closed
/// form and the chain estimate of the constant.
inline DyadicReport check_dyadic_bound(const OscillationProfile& prof, const ProblemParams& params) {
    if (prof.mode != OscillationMode::plain) throw DomainError("check_dyadic_bound: profile must be in plain mode");
    DyadicReport rep;
    rep.alpha = sharp_exponents(params).alpha;
    const double a = rep.alpha;
    const double lam = prof.lambda;
    const double gm = prof.grad_mag;
    for (const auto& e : prof.entries) {
        DyadicLevel lv;
        lv.k = e.k;
        lv.rho = e.rho;
        lv.sup_osc = e.sup_osc;
        lv.shape = std::pow(e.rho, 1.0 + a) * (1.0 + gm * std::pow(e.rho, -a));
        lv.ratio = e.sup_osc / lv.shape;
        double sum = 0.0;
        for (int j = 0; j < e.k; ++j) sum += std::pow(lam, e.k + j * a);
        lv.series_sum = std::pow(lam, e.k * (1.0 + a)) + gm * sum;
        lv.series_closed = std::pow(lam, e.k * (1.0 + a)) +
                          gm * std::pow(lam, e.k) * (1.0 - std::pow(lam, e.k * a)) / (1.0 - std::pow(lam, a));
        rep.identity_error =
            std::max(rep.identity_error, std::abs(lv.series_sum - lv.series_closed) / std::max(1.0, lv.series_sum));
        lv.chain_bound = (1.0 / std::pow(lam, 1.0 + a)) * (1.0 + 1.0 / (1.0 - std::pow(lam, a))) *
                         (1.0 + gm * std::pow(e.rho, -a));
        lv.chain_ok = lv.series_closed / std::pow(e.rho, 1.0 + a) <= lv.chain_bound * (1.0 + 1e-12);
        rep.M = std::max(rep.M, lv.ratio);
        rep.levels.push_back(lv);
    }
    rep.finite = std::isfinite(rep.M);
    for (auto& lv : rep.levels) lv.bound = rep.M * lv.shape;
    return rep;
}

struct ExponentFit {
    bool fittable = false;
    std::string reason;
    double slope = 0.0;
    double logM = 0.0;
    double residual = 0.0;
    std::vector<int> k_used;
};

/// Least-squares slope of log S_k against log rho_k over entries above the
/// noise floor; fewer than three such entries is reported as unfittable.
inline ExponentFit fit_exponent(const OscillationProfile& prof) {
    ExponentFit fit;
    std::vector<double> xs;
    std::vector<double> ys;
    for (const auto& e : prof.entries) {
        if (e.sup_osc > prof.noise_floor && e.sup_osc > 0.0) {
            xs.push_back(std::log(e.rho));
            ys.push_back(std::log(e.sup_osc));
            fit.k_used.push_back(e.k);
        }
    }
    if (xs.size() < 3) {
        fit.reason = "fewer than 3 entries above the noise floor";
        return fit;
    }
    const double m = static_cast<double>(xs.size());
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
    }
    const double den = m * sxx - sx * sx;
    fit.slope = (m * sxy - sx * sy) / den;
    fit.logM = (sy - fit.slope * sx) / m;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        fit.residual = std::max(fit.residual, std::abs(ys[i] - fit.logM - fit.slope * xs[i]));
    }
    fit.fittable = true;
    return fit;
}

/// Outside-zone analysis at a centre with |grad u| > 0: the rescaled field,
/// the largest varsigma = lambda^j with |grad v| > 1/2 on B_varsigma x (-varsigma^2, 0],
/// and the affine-mode constant of v against beta*.
struct RescaledProbe {
    double tau = 0.0;
    double grad_v_center = 0.0;
    double source_exponent = 0.0;
    double beta_star = 0.0;
    std::optional<double> varsigma;
    std::optional<double> M_rescaled;
};

struct PointwiseReport {
    double alpha = 0.0;
    double predicted_slope = 0.0;
    double grad_mag = 0.0;
    double tau = 0.0;  // |grad u|^{1/alpha}
    bool critical = true;
    std::vector<int> case1_levels;  // rho_k >= tau
    std::vector<int> case2_levels;  // rho_k < tau
    double M = 0.0;                 // max_k S_k^aff / rho_k^{1+alpha}
    bool holds = false;
    /// 1 + |grad u| tau^{-alpha}, equal to 2 at the split radius.
    std::optional<double> case1_factor;
    OscillationProfile affine_profile;
    OscillationProfile plain_profile;
    ExponentFit fit;
    std::optional<RescaledProbe> rescaled;
    std::string note;
};

inline PointwiseReport check_pointwise_c1alpha(const GridFunction& u, const Node& center, const ProblemParams& params,
                                               double lambda, int K,
                                               CylinderVariant variant = CylinderVariant::corrected) {
    const auto e = sharp_exponents(params);
    PointwiseReport rep{e.alpha,
                        1.0 + e.alpha,
                        0.0,
                        0.0,
                        true,
                        {},
                        {},
                        0.0,
                        false,
                        std::nullopt,
                        oscillation_profile(u, center, lambda, K, params, OscillationMode::affine, variant),
                        oscillation_profile(u, center, lambda, K, params, OscillationMode::plain, variant),
                        {},
                        std::nullopt,
                        {}};
    rep.grad_mag = rep.affine_profile.grad_mag;
    rep.tau = rep.grad_mag > 0.0 ? std::pow(rep.grad_mag, 1.0 / e.alpha) : 0.0;
    for (const auto& en : rep.affine_profile.entries) {
        (en.rho >= rep.tau ? rep.case1_levels : rep.case2_levels).push_back(en.k);
        rep.M = std::max(rep.M, en.sup_osc / std::pow(en.rho, 1.0 + e.alpha));
    }
    rep.critical = rep.case2_levels.empty();
    if (!rep.critical && params.p() < 2.0) {
        throw DomainError("check_pointwise_c1alpha: non-critical centres require p >= 2");
    }
    rep.holds = std::isfinite(rep.M);
    if (rep.tau > 0.0) rep.case1_factor = 1.0 + rep.grad_mag * std::pow(rep.tau, -e.alpha);
    rep.fit = fit_exponent(rep.affine_profile);

    if (!rep.critical) {
        try {
            const auto rs = rescale_outside(u, center, params);
            RescaledProbe rp;
            rp.tau = rs.scale;
            rp.grad_v_center = rs.grad_v_center;
            rp.source_exponent = rs.source_exponent;
            rp.beta_star = e.beta_star;
            const auto& gv = rs.v.grid();
            const Node origin{{gv.per_axis() / 2, gv.per_axis() / 2, gv.per_axis() / 2}, gv.time_levels() - 1};
            for (int j = 0; j < 16; ++j) {
                const double vs = std::pow(lambda, j);
                if (vs < 2.0 * gv.h()) break;
                const auto region = Region::ball({0.0, 0.0, 0.0}, std::min(vs, 1.0 - gv.h()), -vs * vs, 0.0);
                bool ok = true;
                for_each_member(gv, region, [&](std::size_t s, int lv) {
                    if (ok && norm(gradient(rs.v, Node{gv.unflatten(s), lv}), gv.n()) <= 0.5) ok = false;
                });
                if (ok) {
                    rp.varsigma = vs;
                    break;
                }
            }
            if (rp.varsigma) {
                double M = 0.0;
                const AffinePart aff{rs.v.at(origin), gradient(rs.v, origin)};
                for (int k = 1; k <= K; ++k) {
                    const double rho = *rp.varsigma * std::pow(lambda, k);
                    if (rho < 2.0 * gv.h() || rho * rho < gv.dt()) break;
                    const auto region = Region::ball({0.0, 0.0, 0.0}, rho, -rho * rho, 0.0);
                    M = std::max(M, sup_oscillation(rs.v, region, origin, aff) / std::pow(rho, 1.0 + e.beta_star));
                }
                rp.M_rescaled = M;
            }
            rep.rescaled = rp;
        } catch (const DomainError& err) {
            rep.note = err.what();
        }
    }
    return rep;
}

struct ProximityReport {
    double value_dist = 0.0;
    double gradient_dist = 0.0;
    double source_norm = 0.0;
};

/// Distance between the solution with `source` and the zero-source solution
/// with identical data, over B_{L/2} x [last quarter of the time range].
inline ProximityReport p_caloric_proximity(const SpaceTimeGrid& grid, const SolveConfig& config,
                                           const SourceSpec& source, const std::vector<double>& initial) {
    const auto u = solve(grid, config, source, initial);
    const auto phi = source.is_zero() ? u : solve(grid, config, SourceSpec::zero(), initial);
    const double T = grid.t_end() - grid.t_start();
    const auto region = Region::ball({0.0, 0.0, 0.0}, 0.5 * grid.half_width(), grid.t_end() - 0.25 * T, grid.t_end());
    ProximityReport rep;
    for_each_member(grid, region, [&](std::size_t s, int j) {
        const Node node{grid.unflatten(s), j};
        rep.value_dist = std::max(rep.value_dist, std::abs(u.at(s, j) - phi.at(s, j)));
        const auto gu = gradient(u, node);
        const auto gp = gradient(phi, node);
        Point diff{0.0, 0.0, 0.0};
        for (int d = 0; d < grid.n(); ++d) diff[d] = gu[d] - gp[d];
        rep.gradient_dist = std::max(rep.gradient_dist, norm(diff, grid.n()));
    });
    if (!source.is_zero()) rep.source_norm = make_source(source, grid).norm;
    return rep;
}

}  // namespace plap
