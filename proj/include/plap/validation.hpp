#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "plap/exponent_calculus.hpp"
#include "plap/grid.hpp"
#include "plap/grid_ops.hpp"
#include "plap/regularity_probe.hpp"
#include "plap/solver.hpp"

namespace plap {

struct OracleResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

/// Small built-in oracle suite: closed-form exponents, exact fixed points
/// of the solver, heat-mode convergence and synthetic exponent recovery.
inline std::vector<OracleResult> validation_suite() {
    std::vector<OracleResult> out;
    auto check = [&](const std::string& name, const std::function<std::pair<bool, std::string>()>& fn) {
        try {
            auto [ok, detail] = fn();
            out.push_back({name, ok, detail});
        } catch (const std::exception& e) {
            out.push_back({name, false, e.what()});
        }
    };

    check("alpha_p2_n2_q8_r8", [] {
        const auto e = sharp_exponents(ProblemParams::make(2.0, 2, 8.0, 8.0, 1.0));
        return std::pair{std::abs(e.alpha - 0.5) < 1e-15, "alpha=" + std::to_string(e.alpha)};
    });
    check("alpha_hat_p3_infinite", [] {
        const auto e = sharp_exponents(ProblemParams::make(3.0, 2, infinity, infinity, 1.0));
        return std::pair{std::abs(e.alpha_hat - 0.5) < 1e-15, "alpha_hat=" + std::to_string(e.alpha_hat)};
    });
    check("constant_fixed_point", [] {
        const auto g = SpaceTimeGrid::make(2, 1.0, 1.0 / 8, 0.01, 0.0, 0.1);
        SolveConfig cfg;
        cfg.p = 3.0;
        cfg.boundary = BoundarySpec::constant(0.7);
        const auto u = solve(g, cfg, SourceSpec::zero(), std::vector<double>(g.spatial_size(), 0.7));
        double err = 0.0;
        for (double v : u.values()) err = std::max(err, std::abs(v - 0.7));
        return std::pair{err < 1e-8, "max deviation " + std::to_string(err)};
    });
    check("heat_mode_order", [] {
        std::vector<double> errs;
        for (double h : {1.0 / 16, 1.0 / 32, 1.0 / 64}) {
            const auto g = SpaceTimeGrid::make(1, 1.0, h, h * h, 0.0, 1.0 / 16);
            const auto ref = reference_solution(ReferenceName::heat_mode, 2.0, g);
            SolveConfig cfg;
            cfg.boundary = BoundarySpec::constant(0.0);
            const auto u = solve(g, cfg, SourceSpec::zero(), ref.u.slice(0));
            double err = 0.0;
            for (std::size_t k = 0; k < u.values().size(); ++k) {
                err = std::max(err, std::abs(u.values()[k] - ref.u.values()[k]));
            }
            errs.push_back(err);
        }
        const double order = std::log2(errs[1] / errs[2]);
        return std::pair{order >= 1.7, "observed order " + std::to_string(order)};
    });
    check("synthetic_exponent_recovery", [] {
        const auto g = SpaceTimeGrid::with_counts(1, 0.25, 257, 0.0, 1.0 / 16, 4097);
        const auto u = GridFunction::sample(g, [](const Point& x, double) { return std::pow(std::abs(x[0]), 1.5); });
        const auto pp = ProblemParams::make(2.0, 1, infinity, infinity, 1.0);
        const Node c{{128, 0, 0}, 4096};
        const auto prof = oscillation_profile(u, c, 0.25, 4, pp, OscillationMode::plain);
        const auto fit = fit_exponent(prof);
        return std::pair{fit.fittable && std::abs(fit.slope - 1.5) <= 0.05, "slope " + std::to_string(fit.slope)};
    });
    return out;
}

inline nlohmann::json to_json(const std::vector<OracleResult>& results) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : results) arr.push_back({{"name", r.name}, {"pass", r.pass}, {"detail", r.detail}});
    return arr;
}

}  // namespace plap
