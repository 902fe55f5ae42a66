#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <iomanip>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "plap/errors.hpp"
#include "plap/exponent_calculus.hpp"
#include "plap/grid.hpp"
#include "plap/grid_ops.hpp"
#include "plap/intrinsic_geometry.hpp"
#include "plap/regularity_probe.hpp"
#include "plap/solver.hpp"
#include "plap/source.hpp"

namespace plap {

using json = nlohmann::json;

struct ParamsBlock {
    double p = 2.0;
    int n = 1;
    ExtendedReal q = infinity;
    ExtendedReal r = infinity;
    std::optional<double> alpha_H;
};

struct GridBlock {
    double half_width = 1.0;
    double h = 0.0;
    double dt = 0.0;
    double t_start = 0.0;
    double t_end = 0.0;
};

struct InitialBlock {
    /// constant | affine | heat_mode | barenblatt | radial_power
    std::string kind = "constant";
    double value = 0.0;
    std::vector<double> gradient;
    double amplitude = 1.0;
    double exponent = 1.5;
    double barenblatt_C = 0.25;
};

struct BoundaryBlock {
    /// constant | affine | hold_initial | heat_mode | barenblatt
    std::string kind = "hold_initial";
    double value = 0.0;
    std::vector<double> gradient;
};

struct SolveBlock {
    std::optional<double> eps_reg;
    std::string scheme = "semi_implicit";
    double newton_tol = 1e-10;
    int max_inner_iters = 20000;
    int substeps = 1;
    BoundaryBlock boundary;
};

struct SourceBlock {
    /// zero | constant | separable_power
    std::string kind = "zero";
    double amplitude = 0.0;
    double a = 0.0;
    double b = 0.0;
    std::string signs = "positive";
    std::vector<double> x_singular;
    double t_singular = 0.0;
    ExtendedReal q = infinity;
    ExtendedReal r = infinity;
};

struct ProbeBlock {
    double lambda = 0.25;
    int K = 6;
    std::string mode = "affine";
    std::string variant = "corrected";
    /// explicit | critical_extrema
    std::string center_rule = "explicit";
    /// Each centre is [x_1, ..., x_n, t].
    std::vector<std::vector<double>> centers;
    int max_centers = 8;
};

struct RegionBlock {
    int resolution = 40;
    std::optional<double> q_max;
    std::optional<double> r_max;
};

struct LayersBlock {
    double s = 0.5;
    std::vector<double> eps{0.2, 0.1, 0.05, 0.01};
};

struct ExperimentConfig {
    std::string scenario = "unnamed";
    std::optional<ParamsBlock> params;
    std::optional<GridBlock> grid;
    std::optional<SolveBlock> solve;
    std::optional<SourceBlock> source;
    std::optional<InitialBlock> initial;
    std::optional<ProbeBlock> probe;
    std::optional<RegionBlock> region;
    std::optional<LayersBlock> layers;
    std::string output = "out";
    std::uint64_t seed = 0;
};

namespace config_detail {

inline std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
}

inline const json& require(const json& obj, const std::string& key, const std::string& path) {
    if (!obj.is_object()) throw ConfigError(path, "expected an object");
    auto it = obj.find(key);
    if (it == obj.end()) throw ConfigError(join(path, key), "missing required field");
    return *it;
}

inline double number(const json& v, const std::string& path) {
    if (!v.is_number()) throw ConfigError(path, "expected a number");
    return v.get<double>();
}

inline int integer(const json& v, const std::string& path) {
    if (!v.is_number_integer()) throw ConfigError(path, "expected an integer");
    return v.get<int>();
}

inline std::string string(const json& v, const std::string& path) {
    if (!v.is_string()) throw ConfigError(path, "expected a string");
    return v.get<std::string>();
}

inline ExtendedReal extended(const json& v, const std::string& path) {
    if (v.is_string()) {
        if (v.get<std::string>() == "inf") return infinity;
        throw ConfigError(path, "expected a number or \"inf\"");
    }
    const double x = number(v, path);
    if (!std::isfinite(x)) throw ConfigError(path, "expected a finite number or \"inf\"");
    return x;
}

inline json extended_to_json(const ExtendedReal& x) {
    return x.is_infinite() ? json("inf") : json(x.value());
}

inline std::vector<double> vector_of(const json& v, const std::string& path) {
    if (!v.is_array()) throw ConfigError(path, "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(number(v[i], path + "[" + std::to_string(i) + "]"));
    return out;
}

template <class F>
void optional_field(const json& obj, const std::string& key, const std::string& path, F&& read) {
    auto it = obj.find(key);
    if (it != obj.end() && !it->is_null()) read(*it, join(path, key));
}

inline void one_of(const std::string& value, std::initializer_list<const char*> allowed, const std::string& path) {
    for (const char* a : allowed) {
        if (value == a) return;
    }
    std::string msg = "must be one of";
    for (const char* a : allowed) msg += std::string(" ") + a;
    throw ConfigError(path, msg);
}

inline void reject_unknown(const json& obj, std::initializer_list<const char*> known, const std::string& path) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool ok = false;
        for (const char* k : known) ok = ok || it.key() == k;
        if (!ok) throw ConfigError(join(path, it.key()), "unknown field");
    }
}

}  // namespace config_detail

inline ExperimentConfig config_from_json(const json& j) {
    using namespace config_detail;
    if (!j.is_object()) throw ConfigError("", "config must be a JSON object");
    reject_unknown(j, {"scenario", "params", "grid", "solve", "source", "initial", "probe", "region", "layers",
                       "output", "seed"},
                   "");
    ExperimentConfig c;
    optional_field(j, "scenario", "", [&](const json& v, const std::string& p) { c.scenario = string(v, p); });
    optional_field(j, "output", "", [&](const json& v, const std::string& p) { c.output = string(v, p); });
    optional_field(j, "seed", "", [&](const json& v, const std::string& p) {
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
            throw ConfigError(p, "expected a nonnegative integer");
        }
        c.seed = v.get<std::uint64_t>();
    });
    optional_field(j, "params", "", [&](const json& v, const std::string& path) {
        reject_unknown(v, {"p", "n", "q", "r", "alpha_H"}, path);
        ParamsBlock b;
        b.p = number(require(v, "p", path), join(path, "p"));
        b.n = integer(require(v, "n", path), join(path, "n"));
        b.q = extended(require(v, "q", path), join(path, "q"));
        b.r = extended(require(v, "r", path), join(path, "r"));
        optional_field(v, "alpha_H", path, [&](const json& x, const std::string& p) { b.alpha_H = number(x, p); });
        c.params = b;
    });
    optional_field(j, "grid", "", [&](const json& v, const std::string& path) {
        reject_unknown(v, {"half_width", "h", "dt", "t_start", "t_end"}, path);
        GridBlock b;
        optional_field(v, "half_width", path, [&](const json& x, const std::string& p) { b.half_width = number(x, p); });
        b.h = number(require(v, "h", path), join(path, "h"));
        b.dt = number(require(v, "dt", path), join(path, "dt"));
        optional_field(v, "t_start", path, [&](const json& x, const std::string& p) { b.t_start = number(x, p); });
        b.t_end = number(require(v, "t_end", path), join(path, "t_end"));
        c.grid = b;
    });
    optional_field(j, "solve", "", [&](const json& v, const std::string& path) {
        reject_unknown(v, {"eps_reg", "scheme", "newton_tol", "max_inner_iters", "substeps", "boundary"}, path);
        SolveBlock b;
        optional_field(v, "eps_reg", path, [&](const json& x, const std::string& p) { b.eps_reg = number(x, p); });
        optional_field(v, "scheme", path, [&](const json& x, const std::string& p) {
            b.scheme = string(x, p);
            one_of(b.scheme, {"semi_implicit", "explicit"}, p);
        });
        optional_field(v, "newton_tol", path, [&](const json& x, const std::string& p) { b.newton_tol = number(x, p); });
        optional_field(v, "max_inner_iters", path,
                       [&](const json& x, const std::string& p) { b.max_inner_iters = integer(x, p); });
        optional_field(v, "substeps", path, [&](const json& x, const std::string& p) { b.substeps = integer(x, p); });
        optional_field(v, "boundary", path, [&](const json& x, const std::string& bp) {
            reject_unknown(x, {"kind", "value", "gradient"}, bp);
            b.boundary.kind = string(require(x, "kind", bp), join(bp, "kind"));
            one_of(b.boundary.kind, {"constant", "affine", "hold_initial", "heat_mode", "barenblatt"}, join(bp, "kind"));
            optional_field(x, "value", bp, [&](const json& y, const std::string& p) { b.boundary.value = number(y, p); });
            optional_field(x, "gradient", bp,
                           [&](const json& y, const std::string& p) { b.boundary.gradient = vector_of(y, p); });
        });
        c.solve = b;
    });
    optional_field(j, "source", "", [&](const json& v, const std::string& path) {
        reject_unknown(v, {"kind", "amplitude", "a", "b", "signs", "x_singular", "t_singular", "q", "r"}, path);
        SourceBlock b;
        b.kind = string(require(v, "kind", path), join(path, "kind"));
        one_of(b.kind, {"zero", "constant", "separable_power"}, join(path, "kind"));
        optional_field(v, "amplitude", path, [&](const json& x, const std::string& p) { b.amplitude = number(x, p); });
        optional_field(v, "a", path, [&](const json& x, const std::string& p) { b.a = number(x, p); });
        optional_field(v, "b", path, [&](const json& x, const std::string& p) { b.b = number(x, p); });
        optional_field(v, "signs", path, [&](const json& x, const std::string& p) {
            b.signs = string(x, p);
            one_of(b.signs, {"positive", "odd_in_x", "odd_in_t"}, p);
        });
        optional_field(v, "x_singular", path, [&](const json& x, const std::string& p) { b.x_singular = vector_of(x, p); });
        optional_field(v, "t_singular", path, [&](const json& x, const std::string& p) { b.t_singular = number(x, p); });
        optional_field(v, "q", path, [&](const json& x, const std::string& p) { b.q = extended(x, p); });
        optional_field(v, "r", path, [&](const json& x, const std::string& p) { b.r = extended(x, p); });
        c.source = b;
    });
    optional_field(j, "initial", "", [&](const json& v, const std::string& path) {
        reject_unknown(v, {"kind", "value", "gradient", "amplitude", "exponent", "barenblatt_C"}, path);
        InitialBlock b;
        b.kind = string(require(v, "kind", path), join(path, "kind"));
        one_of(b.kind, {"constant", "affine", "heat_mode", "barenblatt", "radial_power"}, join(path, "kind"));
        optional_field(v, "value", path, [&](const json& x, const std::string& p) { b.value = number(x, p); });
        optional_field(v, "gradient", path, [&](const json& x, const std::string& p) { b.gradient = vector_of(x, p); });
        optional_field(v, "amplitude", path, [&](const json& x, const std::string& p) { b.amplitude = number(x, p); });
        optional_field(v, "exponent", path, [&](const json& x, const std::string& p) { b.exponent = number(x, p); });
        optional_field(v, "barenblatt_C", path,
                       [&](const json& x, const std::string& p) { b.barenblatt_C = number(x, p); });
        c.initial = b;
    });
    optional_field(j, "probe", "", [&](const json& v, const std::string& path) {
        reject_unknown(v, {"lambda", "K", "mode", "variant", "center_rule", "centers", "max_centers"}, path);
        ProbeBlock b;
        optional_field(v, "lambda", path, [&](const json& x, const std::string& p) { b.lambda = number(x, p); });
        optional_field(v, "K", path, [&](const json& x, const std::string& p) { b.K = integer(x, p); });
        optional_field(v, "mode", path, [&](const json& x, const std::string& p) {
            b.mode = string(x, p);
            one_of(b.mode, {"plain", "affine"}, p);
        });
        optional_field(v, "variant", path, [&](const json& x, const std::string& p) {
            b.variant = string(x, p);
            one_of(b.variant, {"corrected", "dyadic_step"}, p);
        });
        optional_field(v, "center_rule", path, [&](const json& x, const std::string& p) {
            b.center_rule = string(x, p);
            one_of(b.center_rule, {"explicit", "critical_extrema"}, p);
        });
        optional_field(v, "centers", path, [&](const json& x, const std::string& p) {
            if (!x.is_array()) throw ConfigError(p, "expected an array of points");
            for (std::size_t i = 0; i < x.size(); ++i) b.centers.push_back(vector_of(x[i], p + "[" + std::to_string(i) + "]"));
        });
        optional_field(v, "max_centers", path, [&](const json& x, const std::string& p) { b.max_centers = integer(x, p); });
        c.probe = b;
    });
    optional_field(j, "region", "", [&](const json& v, const std::string& path) {
        reject_unknown(v, {"resolution", "q_max", "r_max"}, path);
        RegionBlock b;
        optional_field(v, "resolution", path, [&](const json& x, const std::string& p) { b.resolution = integer(x, p); });
        optional_field(v, "q_max", path, [&](const json& x, const std::string& p) { b.q_max = number(x, p); });
        optional_field(v, "r_max", path, [&](const json& x, const std::string& p) { b.r_max = number(x, p); });
        c.region = b;
    });
    optional_field(j, "layers", "", [&](const json& v, const std::string& path) {
        reject_unknown(v, {"s", "eps"}, path);
        LayersBlock b;
        optional_field(v, "s", path, [&](const json& x, const std::string& p) { b.s = number(x, p); });
        optional_field(v, "eps", path, [&](const json& x, const std::string& p) { b.eps = vector_of(x, p); });
        c.layers = b;
    });
    return c;
}

inline json config_to_json(const ExperimentConfig& c) {
    using config_detail::extended_to_json;
    json j;
    j["scenario"] = c.scenario;
    j["output"] = c.output;
    j["seed"] = c.seed;
    if (c.params) {
        j["params"] = {{"p", c.params->p}, {"n", c.params->n}, {"q", extended_to_json(c.params->q)},
                       {"r", extended_to_json(c.params->r)}};
        if (c.params->alpha_H) j["params"]["alpha_H"] = *c.params->alpha_H;
    }
    if (c.grid) {
        j["grid"] = {{"half_width", c.grid->half_width}, {"h", c.grid->h}, {"dt", c.grid->dt},
                     {"t_start", c.grid->t_start}, {"t_end", c.grid->t_end}};
    }
    if (c.solve) {
        const auto& s = *c.solve;
        j["solve"] = {{"scheme", s.scheme},
                      {"newton_tol", s.newton_tol},
                      {"max_inner_iters", s.max_inner_iters},
                      {"substeps", s.substeps},
                      {"boundary", {{"kind", s.boundary.kind}, {"value", s.boundary.value}, {"gradient", s.boundary.gradient}}}};
        if (s.eps_reg) j["solve"]["eps_reg"] = *s.eps_reg;
    }
    if (c.source) {
        const auto& s = *c.source;
        j["source"] = {{"kind", s.kind},          {"amplitude", s.amplitude},   {"a", s.a},
                       {"b", s.b},                {"signs", s.signs},           {"x_singular", s.x_singular},
                       {"t_singular", s.t_singular}, {"q", extended_to_json(s.q)}, {"r", extended_to_json(s.r)}};
    }
    if (c.initial) {
        const auto& s = *c.initial;
        j["initial"] = {{"kind", s.kind},         {"value", s.value},       {"gradient", s.gradient},
                        {"amplitude", s.amplitude}, {"exponent", s.exponent}, {"barenblatt_C", s.barenblatt_C}};
    }
    if (c.probe) {
        const auto& s = *c.probe;
        j["probe"] = {{"lambda", s.lambda},           {"K", s.K},           {"mode", s.mode},
                      {"variant", s.variant},         {"center_rule", s.center_rule},
                      {"centers", s.centers},         {"max_centers", s.max_centers}};
    }
    if (c.region) {
        j["region"] = {{"resolution", c.region->resolution}};
        if (c.region->q_max) j["region"]["q_max"] = *c.region->q_max;
        if (c.region->r_max) j["region"]["r_max"] = *c.region->r_max;
    }
    if (c.layers) j["layers"] = {{"s", c.layers->s}, {"eps", c.layers->eps}};
    return j;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config file " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("", std::string("malformed JSON: ") + e.what());
    }
    return config_from_json(j);
}

/// FNV-1a 64 of the canonical serialization.
inline std::string config_hash(const ExperimentConfig& c) {
    const std::string text = config_to_json(c).dump();
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

/// Builders from config blocks.
namespace build {

inline ProblemParams params(const ExperimentConfig& c) {
    if (!c.params) throw ConfigError("params", "missing required block");
    try {
        return ProblemParams::make(c.params->p, c.params->n, c.params->q, c.params->r, c.params->alpha_H);
    } catch (const DomainError& e) {
        throw ConfigError("params", e.what());
    }
}

inline int dimension(const ExperimentConfig& c) {
    if (!c.params) throw ConfigError("params", "missing required block");
    return c.params->n;
}

inline SpaceTimeGrid grid(const ExperimentConfig& c) {
    if (!c.grid) throw ConfigError("grid", "missing required block");
    try {
        return SpaceTimeGrid::make(dimension(c), c.grid->half_width, c.grid->h, c.grid->dt, c.grid->t_start,
                                   c.grid->t_end);
    } catch (const DomainError& e) {
        throw ConfigError("grid", e.what());
    }
}

inline Point point_of(const std::vector<double>& v, int n, const std::string& path) {
    if (v.empty()) return {0.0, 0.0, 0.0};
    if (static_cast<int>(v.size()) != n) throw ConfigError(path, "expected " + std::to_string(n) + " components");
    Point x{0.0, 0.0, 0.0};
    for (int d = 0; d < n; ++d) x[d] = v[d];
    return x;
}

inline SourceSpec source(const ExperimentConfig& c) {
    if (!c.source) return SourceSpec::zero();
    const auto& s = *c.source;
    const int n = dimension(c);
    SourceSpec spec;
    if (s.kind == "zero") {
        spec = SourceSpec::zero();
    } else if (s.kind == "constant") {
        spec = SourceSpec::constant(s.amplitude);
    } else {
        const SignPattern signs = s.signs == "odd_in_x" ? SignPattern::odd_in_x
                                  : s.signs == "odd_in_t" ? SignPattern::odd_in_t
                                                          : SignPattern::positive;
        try {
            spec = SourceSpec::separable_power(s.amplitude, s.a, s.b, s.q, s.r, signs);
        } catch (const DomainError& e) {
            throw ConfigError("source", e.what());
        }
        spec.x_singular = point_of(s.x_singular, n, "source.x_singular");
        spec.t_singular = s.t_singular;
        const auto cert = norm_certificate(spec, n);
        if (!cert.finite) throw ConfigError("source", "not in L^{q,r}: " + cert.reason);
    }
    spec.q = s.q;
    spec.r = s.r;
    return spec;
}

inline ReferenceOptions reference_options(const ExperimentConfig& c) {
    ReferenceOptions o;
    if (c.initial) o.barenblatt_C = c.initial->barenblatt_C;
    return o;
}

inline std::vector<double> initial(const ExperimentConfig& c, const SpaceTimeGrid& g) {
    if (!c.initial) throw ConfigError("initial", "missing required block");
    const auto& b = *c.initial;
    const int n = g.n();
    const Point grad = point_of(b.gradient, n, "initial.gradient");
    std::vector<double> u(g.spatial_size());
    const double t0 = g.t_start();
    std::function<double(const Point&, double)> barenblatt;
    if (b.kind == "barenblatt") {
        const double p = c.params ? c.params->p : 2.0;
        try {
            const auto one = SpaceTimeGrid::with_counts(n, g.half_width(), 3, t0, t0 + 1.0, 2);
            barenblatt = reference_solution(ReferenceName::barenblatt, p, one, reference_options(c)).value;
        } catch (const DomainError& e) {
            throw ConfigError("initial", e.what());
        }
    }
    for (std::size_t s = 0; s < u.size(); ++s) {
        const auto x = g.position(s);
        if (b.kind == "constant") {
            u[s] = b.value;
        } else if (b.kind == "affine") {
            double v = b.value;
            for (int d = 0; d < n; ++d) v += grad[d] * x[d];
            u[s] = v;
        } else if (b.kind == "heat_mode") {
            double v = b.amplitude * std::exp(-n * M_PI * M_PI * t0);
            for (int d = 0; d < n; ++d) v *= std::sin(M_PI * x[d]);
            u[s] = v;
        } else if (b.kind == "barenblatt") {
            u[s] = barenblatt(x, t0);
        } else {
            u[s] = b.amplitude * std::pow(norm(x, n), b.exponent);
        }
    }
    return u;
}

inline SolveConfig solve_config(const ExperimentConfig& c, const SpaceTimeGrid& g) {
    if (!c.solve) throw ConfigError("solve", "missing required block");
    const auto& s = *c.solve;
    SolveConfig cfg;
    cfg.p = c.params ? c.params->p : 2.0;
    cfg.eps_reg = s.eps_reg;
    cfg.scheme = s.scheme == "explicit" ? Scheme::explicit_euler : Scheme::semi_implicit;
    cfg.newton_tol = s.newton_tol;
    cfg.max_inner_iters = s.max_inner_iters;
    cfg.substeps = s.substeps;
    const int n = g.n();
    const auto& b = s.boundary;
    if (b.kind == "constant") {
        cfg.boundary = BoundarySpec::constant(b.value);
    } else if (b.kind == "affine") {
        cfg.boundary = BoundarySpec::affine(b.value, point_of(b.gradient, n, "solve.boundary.gradient"));
    } else if (b.kind == "hold_initial") {
        cfg.boundary = BoundarySpec::hold_initial();
    } else {
        const auto name = b.kind == "heat_mode" ? ReferenceName::heat_mode : ReferenceName::barenblatt;
        const double amp = c.initial ? c.initial->amplitude : 1.0;
        try {
            const auto one = SpaceTimeGrid::with_counts(n, g.half_width(), 3, g.t_start(),
                                                        g.t_start() + 1.0, 2);
            auto value = reference_solution(name, cfg.p, name == ReferenceName::heat_mode ? g : one,
                                            reference_options(c))
                             .value;
            const double scale = name == ReferenceName::heat_mode ? amp : 1.0;
            cfg.boundary = BoundarySpec::from_function(
                [value, scale](const Point& x, double t) { return scale * value(x, t); });
        } catch (const DomainError& e) {
            throw ConfigError("solve.boundary", e.what());
        }
    }
    if (cfg.substeps < 1) throw ConfigError("solve.substeps", "must be >= 1");
    return cfg;
}

}  // namespace build

/// Report values tagged with where they come from.
inline json predicted(double v) { return {{"value", v}, {"provenance", "predicted"}}; }
inline json measured(double v) { return {{"value", v}, {"provenance", "measured"}}; }

struct RunResult {
    json summary;
    std::optional<std::string> profile_csv;
    std::optional<std::string> region_csv;
    std::optional<GridFunction> solution;
};

inline int thread_count() {
    if (const char* env = std::getenv("PLAP_THREADS")) {
        const int v = std::atoi(env);
        if (v >= 1) return v;
    }
    return 1;
}

namespace run_detail {

inline json exponent_summary(const ProblemParams& pp) {
    const auto compat = check_compatibility(pp);
    json out{{"compatibility",
              {{"admissible", compat.admissible},
               {"minimal_integrability", predicted(compat.minimal_integrability)},
               {"holder_band", predicted(compat.holder_band)},
               {"lower_band", predicted(compat.lower_band)},
               {"violations", compat.violations}}}};
    if (!compat.admissible) return out;
    const auto e = sharp_exponents(pp);
    const auto tb = theta_bounds(pp);
    out["exponents"] = {{"alpha_hat", predicted(e.alpha_hat)},
                        {"alpha", predicted(e.alpha)},
                        {"attained_by_homogeneous", e.attained_by_homogeneous},
                        {"sigma", predicted(e.sigma)},
                        {"gamma", predicted(e.gamma)},
                        {"beta_star", predicted(e.beta_star)},
                        {"denominator", predicted(e.denominator)}};
    out["theta_bounds"] = {{"lower", predicted(tb.lower)}, {"upper", predicted(tb.upper)}};
    if (tb.degenerate_closed_form) out["theta_bounds"]["degenerate_closed_form"] = predicted(*tb.degenerate_closed_form);
    return out;
}

inline json layers_summary(const ProblemParams& pp, const LayersBlock& lb) {
    json out = json::object();
    for (auto branch : {LayerBranch::degenerate, LayerBranch::singular}) {
        const char* name = branch == LayerBranch::degenerate ? "degenerate" : "singular";
        if (branch == LayerBranch::singular && !(pp.p() < 2.0)) continue;
        if (branch == LayerBranch::degenerate && pp.p() < 2.0) continue;
        json rows = json::array();
        for (double eps : lb.eps) {
            try {
                const auto L = epsilon_layers(pp, branch, lb.s, eps);
                json row{{"eps", eps}, {"q", predicted(L.q)}, {"r", predicted(L.r)}, {"alpha_eps", predicted(L.alpha_eps)}};
                if (L.closed_form) row["closed_form"] = predicted(*L.closed_form);
                if (L.varsigma) row["varsigma"] = predicted(*L.varsigma);
                if (L.stated_alpha) row["stated_alpha"] = predicted(*L.stated_alpha);
                rows.push_back(row);
            } catch (const DomainError& e) {
                rows.push_back({{"eps", eps}, {"error", e.what()}});
            }
        }
        out[name] = rows;
    }
    return out;
}

/// Local extrema of u at the final level lying in the critical zone
/// |grad u| <= lambda^{K alpha}, restricted to centres whose cylinder family fits.
inline std::vector<Node> critical_extrema(const GridFunction& u, const ProblemParams& pp, const ProbeBlock& pb,
                                          std::uint64_t seed) {
    const auto& g = u.grid();
    const int level = g.time_levels() - 1;
    const double alpha = sharp_exponents(pp).alpha;
    const double thr = std::pow(pb.lambda, pb.K * alpha);
    const auto strides = detail::strides_of(g);
    std::vector<Node> found;
    for (std::size_t s = 0; s < g.spatial_size(); ++s) {
        const Node node{g.unflatten(s), level};
        if (!g.is_interior(node.i, 1)) continue;
        const auto x = g.position(s);
        bool fits = true;
        for (int d = 0; d < g.n(); ++d) fits = fits && std::abs(x[d]) + pb.lambda <= g.half_width();
        if (!fits) continue;
        const double gm = norm(gradient(u, node), g.n());
        if (gm > thr) continue;
        try {
            const auto cyl = corrected_cylinder(x, g.time(level), pb.lambda, 1, pp, gm);
            if (g.time(level) - cyl.depth < g.t_start()) continue;
        } catch (const DomainError&) {
            continue;
        }
        bool is_max = true;
        bool is_min = true;
        for (int d = 0; d < g.n(); ++d) {
            for (std::size_t nb : {s + strides[d], s - strides[d]}) {
                const double dv = u.at(nb, level) - u.at(s, level);
                is_max = is_max && dv <= 0.0;
                is_min = is_min && dv >= 0.0;
            }
        }
        if (is_max || is_min) found.push_back(node);
    }
    if (static_cast<int>(found.size()) > pb.max_centers) {
        std::vector<Node> pick;
        std::mt19937_64 rng(seed);
        std::sample(found.begin(), found.end(), std::back_inserter(pick), pb.max_centers, rng);
        found = std::move(pick);
    }
    return found;
}

inline std::vector<Node> explicit_centers(const SpaceTimeGrid& g, const ProbeBlock& pb) {
    std::vector<Node> out;
    for (std::size_t i = 0; i < pb.centers.size(); ++i) {
        const auto& c = pb.centers[i];
        const std::string path = "probe.centers[" + std::to_string(i) + "]";
        if (static_cast<int>(c.size()) != g.n() + 1) {
            throw ConfigError(path, "expected n spatial coordinates followed by t");
        }
        Node node;
        for (int d = 0; d < g.n(); ++d) node.i[d] = g.nearest_index(c[d]);
        node.level = g.nearest_level(c[g.n()]);
        out.push_back(node);
    }
    if (out.empty()) throw ConfigError("probe.centers", "explicit rule needs at least one centre");
    return out;
}

inline std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

}  // namespace run_detail

/// Runs one subcommand: exponent | region | solve | probe.
inline RunResult run_experiment(const ExperimentConfig& c, const std::string& subcommand) {
    RunResult res;
    res.summary["scenario"] = c.scenario;
    res.summary["subcommand"] = subcommand;
    res.summary["config_hash"] = config_hash(c);
    res.summary["seed"] = c.seed;

    if (subcommand == "exponent") {
        const auto pp = build::params(c);
        res.summary["result"] = run_detail::exponent_summary(pp);
        if (c.layers && check_compatibility(pp).admissible) {
            res.summary["result"]["epsilon_layers"] = run_detail::layers_summary(pp, *c.layers);
        }
        return res;
    }
    if (subcommand == "region") {
        if (!c.params) throw ConfigError("params", "missing required block");
        const RegionBlock rb = c.region.value_or(RegionBlock{});
        if (rb.resolution < 2) throw ConfigError("region.resolution", "must be >= 2");
        RegionScan scan;
        try {
            scan = admissible_region(c.params->p, c.params->n, rb.resolution, rb.q_max.value_or(0.0), rb.r_max.value_or(200.0));
        } catch (const DomainError& e) {
            throw ConfigError("params", e.what());
        }
        std::size_t admissible = 0;
        for (const auto& s : scan.samples) admissible += s.report.admissible ? 1 : 0;
        res.summary["result"] = {{"samples", scan.samples.size()},
                                 {"admissible", admissible},
                                 {"lower_curve_present", !scan.lower_curve.empty()}};
        res.region_csv = region_csv(scan);
        return res;
    }
    if (subcommand != "solve" && subcommand != "probe") {
        throw ConfigError("", "unknown subcommand " + subcommand);
    }

    const auto g = build::grid(c);
    const auto cfg = build::solve_config(c, g);
    const auto src = build::source(c);
    const auto u0 = build::initial(c, g);
    SolveStats stats;
    auto u = solve(g, cfg, src, u0, &stats);
    json sj{{"steps", stats.steps},
            {"linear_iterations", stats.linear_iterations},
            {"max_linear_error", measured(stats.max_linear_error)},
            {"sup_u", measured(u.max_abs())},
            {"eps_reg", cfg.eps_reg.value_or(g.h())}};
    if (!src.is_zero()) sj["source_norm"] = measured(make_source(src, g).norm);
    res.summary["solve"] = sj;
    res.solution = u;
    if (subcommand == "solve") return res;

    const auto pp = build::params(c);
    const auto e = sharp_exponents(pp);
    const ProbeBlock pb = c.probe.value_or(ProbeBlock{});
    if (!(pb.lambda > 0.0 && pb.lambda < 0.5)) throw ConfigError("probe.lambda", "must lie in (0, 1/2)");
    if (pb.K < 4) throw ConfigError("probe.K", "must be >= 4");
    const auto centers = pb.center_rule == "explicit" ? run_detail::explicit_centers(g, pb)
                                                      : run_detail::critical_extrema(u, pp, pb, c.seed);
    const auto variant = pb.variant == "dyadic_step" ? CylinderVariant::dyadic_step : CylinderVariant::corrected;

    struct CenterResult {
        PointwiseReport pw;
        DyadicReport dy;
    };
    auto probe_one = [&](const Node& node) {
        auto pw = check_pointwise_c1alpha(u, node, pp, pb.lambda, pb.K, variant);
        auto dy = check_dyadic_bound(pw.plain_profile, pp);
        return CenterResult{std::move(pw), std::move(dy)};
    };
    std::vector<CenterResult> results;
    const int threads = thread_count();
    for (std::size_t first = 0; first < centers.size(); first += threads) {
        std::vector<std::future<CenterResult>> batch;
        for (std::size_t i = first; i < std::min(centers.size(), first + threads); ++i) {
            batch.push_back(std::async(threads > 1 ? std::launch::async : std::launch::deferred, probe_one, centers[i]));
        }
        for (auto& f : batch) results.push_back(f.get());
    }

    std::ostringstream csv;
    csv << "center,k,rho,theta_k,S_k,bound_k,ratio\n";
    json cj = json::array();
    for (std::size_t i = 0; i < results.size(); ++i) {
        const auto& r = results[i];
        const auto& prof = pb.mode == "plain" ? r.pw.plain_profile : r.pw.affine_profile;
        for (std::size_t k = 0; k < prof.entries.size(); ++k) {
            const auto& en = prof.entries[k];
            const auto& lv = r.dy.levels[k];
            const double bound = pb.mode == "plain" ? lv.bound : r.pw.M * std::pow(en.rho, 1.0 + e.alpha);
            const double ratio = bound > 0.0 ? en.sup_osc / bound : 0.0;
            csv << i << ',' << en.k << ',' << run_detail::fmt(en.rho) << ',' << run_detail::fmt(en.theta) << ','
                << run_detail::fmt(en.sup_osc) << ',' << run_detail::fmt(bound) << ',' << run_detail::fmt(ratio) << '\n';
        }
        const auto x = g.position(centers[i].i);
        const auto fit = fit_exponent(prof);
        json entry{{"x", std::vector<double>(x.begin(), x.begin() + g.n())},
                   {"t", g.time(centers[i].level)},
                   {"grad_mag", measured(r.pw.grad_mag)},
                   {"critical", r.pw.critical},
                   {"predicted_alpha", predicted(e.alpha)},
                   {"predicted_slope", predicted(1.0 + e.alpha)},
                   {"fittable", fit.fittable},
                   {"M_dyadic", measured(r.dy.M)},
                   {"M_affine", measured(r.pw.M)},
                   {"noise_floor", measured(prof.noise_floor)},
                   {"pass", r.dy.finite && r.pw.holds}};
        if (fit.fittable) {
            entry["fitted_slope"] = measured(fit.slope);
            entry["logM"] = measured(fit.logM);
            entry["fit_residual"] = measured(fit.residual);
            entry["slope_pass"] = fit.slope >= 1.0 + e.alpha - 0.1;
        } else {
            entry["fit_status"] = "unfittable";
        }
        cj.push_back(entry);
    }
    res.summary["probe"] = {{"lambda", pb.lambda},
                            {"K", pb.K},
                            {"mode", pb.mode},
                            {"variant", pb.variant},
                            {"center_rule", pb.center_rule},
                            {"predicted_alpha", predicted(e.alpha)},
                            {"centers", cj}};
    res.profile_csv = csv.str();
    return res;
}

/// Writes summary.json and whichever of profile.csv, region.csv and
/// solution.bin the run produced.
inline std::vector<std::string> emit_report(const RunResult& res, const std::string& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir + ": " + ec.message());
    std::vector<std::string> written;
    auto write = [&](const std::string& name, const std::string& text) {
        const auto path = (fs::path(dir) / name).string();
        std::ofstream out(path, std::ios::binary);
        if (!out) throw IoError("cannot write " + path);
        out << text;
        if (!out) throw IoError("write failed for " + path);
        written.push_back(path);
    };
    write("summary.json", res.summary.dump(2) + "\n");
    if (res.profile_csv) write("profile.csv", *res.profile_csv);
    if (res.region_csv) write("region.csv", *res.region_csv);
    if (res.solution) {
        std::ostringstream os(std::ios::binary);
        io::write_binary(os, *res.solution);
        write("solution.bin", os.str());
    }
    return written;
}

}  // namespace plap
