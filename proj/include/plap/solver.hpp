#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCore>

#include "plap/errors.hpp"
#include "plap/grid.hpp"
#include "plap/grid_ops.hpp"
#include "plap/source.hpp"

namespace plap {

enum class Scheme { semi_implicit, explicit_euler };

/// Dirichlet data on the spatial boundary.
struct BoundarySpec {
    enum class Kind { constant, affine, hold_initial, reference, function };

    Kind kind = Kind::hold_initial;
    double value = 0.0;
    Point gradient{0.0, 0.0, 0.0};
    std::shared_ptr<const GridFunction> reference;
    std::function<double(const Point&, double)> fn;

    static BoundarySpec constant(double c) {
        BoundarySpec b;
        b.kind = Kind::constant;
        b.value = c;
        return b;
    }
    static BoundarySpec affine(double value, const Point& gradient) {
        BoundarySpec b;
        b.kind = Kind::affine;
        b.value = value;
        b.gradient = gradient;
        return b;
    }
    static BoundarySpec hold_initial() { return {}; }
    static BoundarySpec from_reference(GridFunction u) {
        BoundarySpec b;
        b.kind = Kind::reference;
        b.reference = std::make_shared<const GridFunction>(std::move(u));
        return b;
    }
    static BoundarySpec from_function(std::function<double(const Point&, double)> fn) {
        BoundarySpec b;
        b.kind = Kind::function;
        b.fn = std::move(fn);
        return b;
    }
};

struct SolveConfig {
    double p = 2.0;
    /// Diffusivity regularization; defaults to h when unset.
    std::optional<double> eps_reg;
    Scheme scheme = Scheme::semi_implicit;
    /// Relative residual tolerance of the per-step linear solve.
    double newton_tol = 1e-10;
    int max_inner_iters = 20000;
    BoundarySpec boundary;
    /// Internal steps per stored time level.
    int substeps = 1;
};

struct SolveStats {
    long steps = 0;
    long linear_iterations = 0;
    int max_linear_iterations = 0;
    double max_linear_error = 0.0;
    double max_diffusivity = 0.0;
};

namespace detail {

/// Central differences along each axis, one-sided on the boundary faces.
inline std::array<std::vector<double>, 3> node_gradients(const SpaceTimeGrid& g,
                                                          const std::vector<double>& u) {
    std::array<std::vector<double>, 3> out;
    const int N = g.per_axis();
    const std::size_t ns = g.spatial_size();
    std::size_t stride = 1;
    for (int d = g.n() - 1; d >= 0; --d) {
        auto& gd = out[d];
        gd.resize(ns);
        for (std::size_t s = 0; s < ns; ++s) {
            const int i = static_cast<int>((s / stride) % N);
            if (i == 0) {
                gd[s] = (u[s + stride] - u[s]) / g.h();
            } else if (i == N - 1) {
                gd[s] = (u[s] - u[s - stride]) / g.h();
            } else {
                gd[s] = (u[s + stride] - u[s - stride]) / (2.0 * g.h());
            }
        }
        stride *= N;
    }
    return out;
}

/// Face diffusivities (|grad u|^2 + eps^2)^{(p-2)/2} on the face between
/// node s and s + e_d, stored at index s of entry d. The normal component is
/// the one-sided difference; tangential components average the two nodes.
inline std::array<std::vector<double>, 3> face_diffusivities(const SpaceTimeGrid& g,
                                                              const std::vector<double>& u, double p,
                                                              double eps) {
    std::array<std::vector<double>, 3> a;
    const int N = g.per_axis();
    const std::size_t ns = g.spatial_size();
    if (p == 2.0) {
        for (int d = 0; d < g.n(); ++d) a[d].assign(ns, 1.0);
        return a;
    }
    const auto grad = node_gradients(g, u);
    std::array<std::size_t, 3> strides{1, 1, 1};
    {
        std::size_t st = 1;
        for (int d = g.n() - 1; d >= 0; --d) {
            strides[d] = st;
            st *= N;
        }
    }
    for (int d = 0; d < g.n(); ++d) {
        a[d].assign(ns, 0.0);
        const std::size_t st = strides[d];
        for (std::size_t s = 0; s < ns; ++s) {
            const int i = static_cast<int>((s / st) % N);
            if (i == N - 1) continue;
            const double normal = (u[s + st] - u[s]) / g.h();
            double m2 = normal * normal;
            for (int e = 0; e < g.n(); ++e) {
                if (e == d) continue;
                const double tan = 0.5 * (grad[e][s] + grad[e][s + st]);
                m2 += tan * tan;
            }
            a[d][s] = std::pow(m2 + eps * eps, 0.5 * (p - 2.0));
        }
    }
    return a;
}

inline std::array<std::size_t, 3> strides_of(const SpaceTimeGrid& g) {
    std::array<std::size_t, 3> strides{1, 1, 1};
    std::size_t st = 1;
    for (int d = g.n() - 1; d >= 0; --d) {
        strides[d] = st;
        st *= g.per_axis();
    }
    return strides;
}

/// div(a grad u) at the interior nodes by the five-point (2n+1) flux
/// difference; boundary entries are left at zero.
inline std::vector<double> flux_divergence(const SpaceTimeGrid& g, const std::vector<double>& u,
                                           const std::array<std::vector<double>, 3>& a) {
    const std::size_t ns = g.spatial_size();
    const auto strides = strides_of(g);
    const double ih2 = 1.0 / (g.h() * g.h());
    std::vector<double> out(ns, 0.0);
    for (std::size_t s = 0; s < ns; ++s) {
        if (!g.is_interior(g.unflatten(s), 1)) continue;
        double acc = 0.0;
        for (int d = 0; d < g.n(); ++d) {
            const std::size_t st = strides[d];
            acc += a[d][s] * (u[s + st] - u[s]) - a[d][s - st] * (u[s] - u[s - st]);
        }
        out[s] = acc * ih2;
    }
    return out;
}

inline double boundary_value(const BoundarySpec& b, const SpaceTimeGrid& g, const std::vector<double>& initial,
                             std::size_t s, double t) {
    switch (b.kind) {
        case BoundarySpec::Kind::constant:
            return b.value;
        case BoundarySpec::Kind::affine: {
            const auto x = g.position(s);
            double v = b.value;
            for (int d = 0; d < g.n(); ++d) v += b.gradient[d] * x[d];
            return v;
        }
        case BoundarySpec::Kind::hold_initial:
            return initial[s];
        case BoundarySpec::Kind::reference: {
            const auto& ref = *b.reference;
            const double f = std::clamp((t - g.t_start()) / g.dt(), 0.0, static_cast<double>(g.time_levels() - 1));
            const int j = std::min(static_cast<int>(std::floor(f)), g.time_levels() - 2);
            const double w = f - j;
            return (1.0 - w) * ref.at(s, j) + w * ref.at(s, j + 1);
        }
        case BoundarySpec::Kind::function:
            return b.fn(g.position(s), t);
    }
    return 0.0;
}

}  // namespace detail

/// Marches u_t - div(|grad u|^{p-2} grad u) = f from `initial` with
/// Dirichlet data on the spatial boundary. The semi-implicit scheme lags the
/// regularized diffusivity and solves one SPD system per step by
/// Jacobi-preconditioned conjugate gradients.
inline GridFunction solve(const SpaceTimeGrid& grid, const SolveConfig& config, const SourceSpec& source,
                          const std::vector<double>& initial, SolveStats* stats = nullptr) {
    const double p = config.p;
    if (!(p > 1.0)) throw DomainError("solve: p must exceed 1");
    if (initial.size() != grid.spatial_size()) throw DomainError("solve: initial data size mismatch");
    if (config.substeps < 1) throw DomainError("solve: substeps must be >= 1");
    if (config.max_inner_iters < 1) throw DomainError("solve: max_inner_iters must be positive");
    if (!(config.newton_tol > 0.0)) throw DomainError("solve: newton_tol must be positive");
    const double eps = config.eps_reg.value_or(grid.h());
    if (eps < 0.0 || (p != 2.0 && !(eps > 0.0))) {
        throw DomainError("solve: eps_reg must be positive when p != 2");
    }
    const auto& bc = config.boundary;
    if (bc.kind == BoundarySpec::Kind::reference && (!bc.reference || !(bc.reference->grid() == grid))) {
        throw DomainError("solve: reference boundary data lives on a different grid");
    }
    if (bc.kind == BoundarySpec::Kind::function && !bc.fn) throw DomainError("solve: boundary function missing");

    const SourceForcing forcing(source, grid);
    const std::size_t ns = grid.spatial_size();
    const auto strides = detail::strides_of(grid);
    const double dt = grid.dt() / config.substeps;
    const double ih2 = 1.0 / (grid.h() * grid.h());

    std::vector<long> unknown(ns, -1);
    std::vector<std::size_t> interior;
    for (std::size_t s = 0; s < ns; ++s) {
        if (grid.is_interior(grid.unflatten(s), 1)) {
            unknown[s] = static_cast<long>(interior.size());
            interior.push_back(s);
        }
    }

    std::vector<double> out(grid.size());
    std::copy(initial.begin(), initial.end(), out.begin());
    std::vector<double> u(initial);
    std::vector<double> f;
    SolveStats st;

    using SpMat = Eigen::SparseMatrix<double>;
    Eigen::ConjugateGradient<SpMat, Eigen::Lower | Eigen::Upper, Eigen::DiagonalPreconditioner<double>> cg;
    cg.setTolerance(config.newton_tol);
    cg.setMaxIterations(config.max_inner_iters);
    std::vector<Eigen::Triplet<double>> triplets;
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(interior.size()));
    Eigen::VectorXd guess(rhs.size());

    for (int level = 1; level < grid.time_levels(); ++level) {
        const double t_level0 = grid.time(level - 1);
        for (int sub = 0; sub < config.substeps; ++sub) {
            const double ta = t_level0 + sub * dt;
            const double tb = sub + 1 == config.substeps ? grid.time(level) : ta + dt;
            const double h_step = tb - ta;
            forcing.step_average(ta, tb, f);
            const auto a = detail::face_diffusivities(grid, u, p, eps);
            std::vector<double> next(u);
            for (std::size_t s = 0; s < ns; ++s) {
                if (unknown[s] < 0) next[s] = detail::boundary_value(bc, grid, initial, s, tb);
            }

            if (config.scheme == Scheme::explicit_euler) {
                double amax = 0.0;
                for (int d = 0; d < grid.n(); ++d) {
                    for (double v : a[d]) amax = std::max(amax, v);
                }
                st.max_diffusivity = std::max(st.max_diffusivity, amax);
                const double limit = grid.h() * grid.h() / (2.0 * grid.n() * amax);
                if (h_step > limit * (1.0 + 1e-12)) {
                    std::ostringstream os;
                    os << "solve: explicit step dt=" << h_step << " exceeds the stability limit h^2/(2n max a)="
                       << limit << " at t=" << ta;
                    throw SolverError(os.str());
                }
                const auto div = detail::flux_divergence(grid, u, a);
                for (std::size_t s : interior) next[s] = u[s] + h_step * (div[s] + f[s]);
            } else {
                triplets.clear();
                triplets.reserve(interior.size() * (2 * grid.n() + 1));
                for (std::size_t k = 0; k < interior.size(); ++k) {
                    const std::size_t s = interior[k];
                    double diag = 1.0 / h_step;
                    double b = u[s] / h_step + f[s];
                    for (int d = 0; d < grid.n(); ++d) {
                        const std::size_t stv = strides[d];
                        const double ap = a[d][s] * ih2;
                        const double am = a[d][s - stv] * ih2;
                        st.max_diffusivity = std::max({st.max_diffusivity, a[d][s], a[d][s - stv]});
                        diag += ap + am;
                        for (auto [nb, c] : {std::pair{s + stv, ap}, std::pair{s - stv, am}}) {
                            if (unknown[nb] >= 0) {
                                triplets.emplace_back(static_cast<int>(k), static_cast<int>(unknown[nb]), -c);
                            } else {
                                b += c * next[nb];
                            }
                        }
                    }
                    triplets.emplace_back(static_cast<int>(k), static_cast<int>(k), diag);
                    rhs[static_cast<Eigen::Index>(k)] = b;
                    guess[static_cast<Eigen::Index>(k)] = u[s];
                }
                SpMat A(rhs.size(), rhs.size());
                A.setFromTriplets(triplets.begin(), triplets.end());
                cg.compute(A);
                const Eigen::VectorXd x = cg.solveWithGuess(rhs, guess);
                if (cg.info() != Eigen::Success) {
                    std::ostringstream os;
                    os << "solve: linear solve did not converge at t=" << tb << " (iterations "
                       << cg.iterations() << ", relative residual " << cg.error() << ", tolerance "
                       << config.newton_tol << ")";
                    throw SolverError(os.str());
                }
                st.linear_iterations += cg.iterations();
                st.max_linear_iterations = std::max<int>(st.max_linear_iterations, static_cast<int>(cg.iterations()));
                st.max_linear_error = std::max(st.max_linear_error, cg.error());
                for (std::size_t k = 0; k < interior.size(); ++k) next[interior[k]] = x[static_cast<Eigen::Index>(k)];
            }
            for (double v : next) {
                if (!std::isfinite(v)) throw SolverError("solve: non-finite value produced");
            }
            u.swap(next);
            ++st.steps;
        }
        std::copy(u.begin(), u.end(), out.begin() + static_cast<std::ptrdiff_t>(level * ns));
    }
    if (stats) *stats = st;
    return GridFunction(grid, std::move(out));
}

enum class ReferenceName { heat_mode, barenblatt };

struct ReferenceOptions {
    /// Barenblatt mass constant C in [C - gamma_p xi^{p/(p-1)}]_+.
    double barenblatt_C = 0.25;
};

/// Closed-form solution sampled on a grid, with its pointwise value and time
/// derivative for residual checks.
struct ReferenceSolution {
    ReferenceName name = ReferenceName::heat_mode;
    double p = 2.0;
    GridFunction u;
    std::function<double(const Point&, double)> value;
    std::function<double(const Point&, double)> time_derivative;
    /// Barenblatt support radius R(t); empty for the heat mode.
    std::function<double(double)> support_radius;
};

/// heat_mode: e^{-n pi^2 t} prod sin(pi x_d) on [-1,1]^n (p = 2).
/// barenblatt: t^{-k}[C - gamma_p (|x| t^{-k/n})^{p/(p-1)}]_+^{(p-1)/(p-2)},
/// k = 1/(p-2+p/n), gamma_p = ((p-2)/p)(k/n)^{1/(p-1)} (p > 2, t > 0).
inline ReferenceSolution reference_solution(ReferenceName name, double p, const SpaceTimeGrid& grid,
                                            const ReferenceOptions& opts = {}) {
    const int n = grid.n();
    ReferenceSolution ref{name, p, GridFunction::zeros(grid), {}, {}, {}};
    if (name == ReferenceName::heat_mode) {
        if (p != 2.0) throw DomainError("reference_solution: heat_mode requires p = 2");
        const double lam = n * M_PI * M_PI;
        ref.value = [n, lam](const Point& x, double t) {
            double v = std::exp(-lam * t);
            for (int d = 0; d < n; ++d) v *= std::sin(M_PI * x[d]);
            return v;
        };
        ref.time_derivative = [v = ref.value, lam](const Point& x, double t) { return -lam * v(x, t); };
    } else {
        if (!(p > 2.0)) throw DomainError("reference_solution: barenblatt requires p > 2");
        if (!(grid.t_start() > 0.0)) throw DomainError("reference_solution: barenblatt needs t_start > 0");
        const double C = opts.barenblatt_C;
        if (!(C > 0.0)) throw DomainError("reference_solution: barenblatt_C must be positive");
        const double k = 1.0 / (p - 2.0 + p / n);
        const double gam = ((p - 2.0) / p) * std::pow(k / n, 1.0 / (p - 1.0));
        const double m = (p - 1.0) / (p - 2.0);
        const double e = p / (p - 1.0);
        auto radius = [n](const Point& x) {
            double r2 = 0.0;
            for (int d = 0; d < n; ++d) r2 += x[d] * x[d];
            return std::sqrt(r2);
        };
        ref.value = [=](const Point& x, double t) {
            const double xi = radius(x) * std::pow(t, -k / n);
            const double base = C - gam * std::pow(xi, e);
            return base > 0.0 ? std::pow(t, -k) * std::pow(base, m) : 0.0;
        };
        ref.time_derivative = [=](const Point& x, double t) {
            const double xi = radius(x) * std::pow(t, -k / n);
            const double base = C - gam * std::pow(xi, e);
            if (!(base > 0.0)) return 0.0;
            const double F = std::pow(base, m);
            const double dF = -m * std::pow(base, m - 1.0) * gam * e * std::pow(xi, e - 1.0);
            return -std::pow(t, -k - 1.0) * (k * F + (k / n) * xi * dF);
        };
        ref.support_radius = [=](double t) { return std::pow(C / gam, 1.0 / e) * std::pow(t, k / n); };
    }
    ref.u = GridFunction::sample(grid, ref.value);
    return ref;
}

struct ResidualCertificate {
    double max_residual = 0.0;
    std::size_t nodes = 0;
};

/// max |u_t - div_h(|grad_h u|^{p-2} grad_h u)| over interior nodes, with the
/// exact u_t and the unregularized finite-volume operator on the sampled
/// values. For the Barenblatt profile only nodes with
/// r_min_fraction R(t) <= |x| <= r_max_fraction R(t) count, which keeps away
/// from the free boundary and from the non-smooth centre.
inline ResidualCertificate residual_certificate(const ReferenceSolution& ref, double r_min_fraction = 0.2,
                                                double r_max_fraction = 0.8) {
    const auto& g = ref.u.grid();
    ResidualCertificate cert;
    for (int j = 0; j < g.time_levels(); ++j) {
        const auto slice = ref.u.slice(j);
        const auto a = detail::face_diffusivities(g, slice, ref.p, 0.0);
        const auto div = detail::flux_divergence(g, slice, a);
        const double t = g.time(j);
        for (std::size_t s = 0; s < g.spatial_size(); ++s) {
            if (!g.is_interior(g.unflatten(s), 1)) continue;
            const auto x = g.position(s);
            if (ref.support_radius) {
                const double R = ref.support_radius(t);
                const double rad = norm(x, g.n());
                if (rad < r_min_fraction * R || rad > r_max_fraction * R) continue;
            }
            cert.max_residual = std::max(cert.max_residual, std::abs(ref.time_derivative(x, t) - div[s]));
            ++cert.nodes;
        }
    }
    return cert;
}

}  // namespace plap
