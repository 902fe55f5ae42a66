#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "plap/grid.hpp"
#include "plap/grid_ops.hpp"
#include "test_support.hpp"

using namespace plap;

namespace {

double max_gradient_error(const GridFunction& u, const std::function<double(double)>& du) {
    const auto& g = u.grid();
    double err = 0.0;
    for (int i = 1; i + 1 < g.per_axis(); ++i) {
        const Node node{{i, 0, 0}, 0};
        err = std::max(err, std::abs(gradient(u, node)[0] - du(g.coord(i))));
    }
    return err;
}

}  // namespace

TEST(SpaceTimeGrid, RejectsIncommensurateSpacing) {
    EXPECT_THROW(SpaceTimeGrid::make(1, 1.0, 0.3, 0.1, 0.0, 1.0), DomainError);
    EXPECT_THROW(SpaceTimeGrid::make(1, 1.0, 0.25, 0.3, 0.0, 1.0), DomainError);
    EXPECT_THROW(SpaceTimeGrid::make(4, 1.0, 0.25, 0.25, 0.0, 1.0), DomainError);
}

TEST(SpaceTimeGrid, FlattenRoundTrip) {
    const auto g = SpaceTimeGrid::make(3, 1.0, 0.5, 0.5, 0.0, 1.0);
    for (std::size_t s = 0; s < g.spatial_size(); ++s) EXPECT_EQ(g.flatten(g.unflatten(s)), s);
}

TEST(Gradient, ExactOnAffine) {
    const auto g = SpaceTimeGrid::make(2, 1.0, 1.0 / 16, 0.25, 0.0, 1.0);
    const auto u = GridFunction::sample(g, [](const Point& x, double t) { return 0.3 + 1.7 * x[0] - 0.4 * x[1] + t; });
    for (std::size_t s = 0; s < g.spatial_size(); ++s) {
        const Node node{g.unflatten(s), 2};
        if (!g.is_interior(node.i, 1)) continue;
        const auto grad = gradient(u, node);
        EXPECT_NEAR(grad[0], 1.7, 1e-12);
        EXPECT_NEAR(grad[1], -0.4, 1e-12);
    }
}

TEST(Gradient, ZeroOnConstant) {
    const auto g = SpaceTimeGrid::make(2, 1.0, 1.0 / 8, 0.5, 0.0, 1.0);
    const auto u = GridFunction::sample(g, [](const Point&, double) { return 2.5; });
    const auto grad = gradient(u, Node{{4, 5, 0}, 1});
    EXPECT_EQ(grad[0], 0.0);
    EXPECT_EQ(grad[1], 0.0);
}

TEST(Gradient, SecondOrderUnderRefinement) {
    std::vector<double> hs;
    std::vector<double> quad;
    std::vector<double> cubic;
    for (double h : {1.0 / 16, 1.0 / 32, 1.0 / 64}) {
        const auto g = SpaceTimeGrid::make(1, 1.0, h, 1.0, 0.0, 1.0);
        const auto u2 = GridFunction::sample(g, [](const Point& x, double) { return x[0] * x[0]; });
        const auto u3 = GridFunction::sample(g, [](const Point& x, double) { return std::sin(2.0 * x[0]); });
        hs.push_back(h);
        quad.push_back(max_gradient_error(u2, [](double x) { return 2.0 * x; }));
        cubic.push_back(max_gradient_error(u3, [](double x) { return 2.0 * std::cos(2.0 * x); }));
    }
    for (std::size_t k = 0; k < hs.size(); ++k) EXPECT_LE(quad[k], hs[k] * hs[k]);
    EXPECT_NEAR(testing_support::loglog_slope(hs, cubic), 2.0, 0.05);
}

TEST(Gradient, BoundaryNodeThrows) {
    const auto g = SpaceTimeGrid::make(1, 1.0, 0.25, 1.0, 0.0, 1.0);
    const auto u = GridFunction::zeros(g);
    EXPECT_THROW(gradient(u, Node{{0, 0, 0}, 0}), DomainError);
}

TEST(AnisotropicNorm, ConstantOnUnitMeasure) {
    const auto g = SpaceTimeGrid::make(1, 1.0, 1.0 / 16, 1.0 / 16, 0.0, 1.0);
    const auto f = GridFunction::sample(g, [](const Point&, double) { return 3.0; });
    const auto region = Region::box({0.0, 0.0, 0.0}, {0.5, 0.0, 0.0}, 0.0, 1.0);
    EXPECT_NEAR(anisotropic_norm(f, 2.0, 3.0, region), 3.0, 1e-13);
    EXPECT_NEAR(anisotropic_norm(f, infinity, 4.0, region), 3.0, 1e-13);
    EXPECT_NEAR(anisotropic_norm(f, 1.5, infinity, region), 3.0, 1e-13);
}

TEST(AnisotropicNorm, SeparableProduct) {
    const auto g = SpaceTimeGrid::make(1, 1.0, 1.0 / 128, 1.0 / 128, 0.0, 1.0);
    const auto f = GridFunction::sample(g, [](const Point& x, double t) { return (1.0 + x[0] * x[0]) * (1.0 + t); });
    const double gx = std::sqrt(2.0 + 4.0 / 3.0 + 2.0 / 5.0);
    const double et = std::cbrt(15.0 / 4.0);
    EXPECT_NEAR(anisotropic_norm(f, 2.0, 3.0, Region::whole(g)), gx * et, 1e-3 * gx * et);
}

TEST(AnisotropicNorm, RadialSingularityMatchesClosedForm) {
    // Even node count keeps the origin off the grid.
    const auto g = SpaceTimeGrid::with_counts(2, 1.0, 256, 0.0, 1.0, 2);
    const double a = 0.5;
    const double q = 2.0;
    const auto f = GridFunction::sample(g, [a](const Point& x, double) { return std::pow(std::hypot(x[0], x[1]), -a); });
    const double exact = std::pow(2.0 * M_PI / (2.0 - a * q), 1.0 / q);
    const double got = anisotropic_norm(f, q, 2.0, Region::ball({0.0, 0.0, 0.0}, 1.0, 0.0, 1.0));
    EXPECT_NEAR(got, exact, 0.02 * exact);
}

TEST(AnisotropicNorm, EqualExponentsCollapse) {
    const auto g = SpaceTimeGrid::make(2, 1.0, 1.0 / 16, 1.0 / 16, 0.0, 0.5);
    const auto f = GridFunction::sample(g, [](const Point& x, double t) { return std::sin(3.0 * x[0]) * std::exp(x[1] - t); });
    const auto region = Region::ball({0.1, -0.2, 0.0}, 0.6, 0.1, 0.4);
    const auto sw = spatial_weights(g, region);
    const auto tw = time_weights(g, region);
    const double q = 2.5;
    double acc = 0.0;
    for (int j = 0; j < g.time_levels(); ++j) {
        for (std::size_t s = 0; s < g.spatial_size(); ++s) acc += tw[j] * sw[s] * std::pow(std::abs(f.at(s, j)), q);
    }
    EXPECT_NEAR(anisotropic_norm(f, q, q, region), std::pow(acc, 1.0 / q), 1e-12);
}

TEST(AnisotropicNorm, AbsolutelyHomogeneous) {
    const auto g = SpaceTimeGrid::make(2, 1.0, 1.0 / 16, 1.0 / 16, 0.0, 0.5);
    const auto f = GridFunction::sample(g, [](const Point& x, double t) { return x[0] - x[1] * t + 0.1; });
    const auto region = Region::whole(g);
    for (double c : {-3.0, 0.5, 7.0}) {
        for (auto [q, r] : {std::pair<ExtendedReal, ExtendedReal>{3.0, 4.0}, {infinity, 2.5}, {1.0, infinity}}) {
            const double base = anisotropic_norm(f, q, r, region);
            EXPECT_NEAR(anisotropic_norm(f.scaled(c), q, r, region), std::abs(c) * base, 1e-13 * std::abs(c) * base);
        }
    }
}

TEST(AnisotropicNorm, MonotoneInRegion) {
    const auto g = SpaceTimeGrid::make(2, 1.0, 1.0 / 16, 1.0 / 16, 0.0, 0.5);
    const auto f = GridFunction::sample(g, [](const Point& x, double t) { return std::cos(x[0] + t) + x[1]; });
    double prev = 0.0;
    for (double R : {0.2, 0.4, 0.6, 0.8}) {
        const double cur = anisotropic_norm(f, 3.0, 5.0, Region::ball({0.0, 0.0, 0.0}, R, 0.5 - R / 2, 0.5));
        EXPECT_GE(cur, prev);
        prev = cur;
    }
}

TEST(SteklovAverage, ConstantInTimeUnchanged) {
    const auto g = SpaceTimeGrid::make(1, 1.0, 0.25, 0.125, 0.0, 1.0);
    const auto u = GridFunction::sample(g, [](const Point& x, double) { return x[0] * x[0]; });
    const auto uh = steklov_average(u, 0.25);
    for (int j = 0; j + 2 < g.time_levels(); ++j) {
        for (std::size_t s = 0; s < g.spatial_size(); ++s) EXPECT_NEAR(uh.at(s, j), u.at(s, j), 1e-15);
    }
}

TEST(SteklovAverage, LinearInTimeShiftsByHalfWindow) {
    const auto g = SpaceTimeGrid::make(1, 1.0, 0.25, 0.125, 0.0, 1.0);
    const auto u = GridFunction::sample(g, [](const Point&, double t) { return t; });
    const double w = 0.375;
    const auto uh = steklov_average(u, w);
    for (int j = 0; j + 3 < g.time_levels(); ++j) EXPECT_NEAR(uh.at(0, j), g.time(j) + w / 2, 1e-14);
}

TEST(SteklovAverage, FirstOrderInWindow) {
    const auto g = SpaceTimeGrid::make(1, 1.0, 0.5, 1.0 / 256, 0.0, 1.0);
    const auto u = GridFunction::sample(g, [](const Point&, double t) { return std::sin(t); });
    std::vector<double> ws;
    std::vector<double> errs;
    for (double w : {1.0 / 16, 1.0 / 32, 1.0 / 64}) {
        const auto uh = steklov_average(u, w);
        double err = 0.0;
        for (int j = 0; g.time(j) <= 0.5; ++j) err = std::max(err, std::abs(uh.at(0, j) - u.at(0, j)));
        ws.push_back(w);
        errs.push_back(err);
    }
    EXPECT_NEAR(testing_support::loglog_slope(ws, errs), 1.0, 0.05);
}

TEST(SteklovAverage, CommutesWithConstants) {
    const auto g = SpaceTimeGrid::make(1, 1.0, 0.25, 0.125, 0.0, 1.0);
    const auto u = GridFunction::sample(g, [](const Point& x, double t) { return std::exp(x[0] * t); });
    const auto c = GridFunction::sample(g, [](const Point&, double) { return 4.0; });
    const auto a = steklov_average(u.plus(c), 0.25);
    const auto b = steklov_average(u, 0.25);
    for (int j = 0; j + 2 < g.time_levels(); ++j) {
        for (std::size_t s = 0; s < g.spatial_size(); ++s) EXPECT_NEAR(a.at(s, j), b.at(s, j) + 4.0, 1e-13);
    }
}

TEST(SteklovAverage, RejectsBadWindow) {
    const auto g = SpaceTimeGrid::make(1, 1.0, 0.25, 0.125, 0.0, 1.0);
    const auto u = GridFunction::zeros(g);
    EXPECT_THROW(steklov_average(u, 0.1), DomainError);
    EXPECT_THROW(steklov_average(u, 2.0), DomainError);
}

TEST(EnergyNorm, Zero) {
    const auto g = SpaceTimeGrid::make(1, 1.0, 1.0 / 16, 1.0 / 16, 0.0, 1.0);
    EXPECT_EQ(energy_norm(GridFunction::zeros(g), 3.0, Region::box({0.0, 0.0, 0.0}, {0.5, 0.0, 0.0}, 0.0, 1.0)), 0.0);
}

TEST(EnergyNorm, ConstantOnUnitMeasure) {
    const auto g = SpaceTimeGrid::make(1, 1.0, 1.0 / 16, 1.0 / 16, 0.0, 1.0);
    const auto u = GridFunction::sample(g, [](const Point&, double) { return 1.5; });
    EXPECT_NEAR(energy_norm(u, 3.0, Region::box({0.0, 0.0, 0.0}, {0.5, 0.0, 0.0}, 0.0, 1.0)), 1.5, 1e-13);
}

TEST(EnergyNorm, AffineGradientTerm) {
    const auto g = SpaceTimeGrid::make(1, 1.0, 1.0 / 64, 1.0 / 16, 0.0, 1.0);
    const double a = -2.0;
    const auto u = GridFunction::sample(g, [a](const Point& x, double) { return a * x[0]; });
    const auto region = Region::box({0.0, 0.0, 0.0}, {0.25, 0.0, 0.0}, 0.0, 0.5);
    const double measure = 0.5 * 0.5;
    // The clipped end cells put an O(h) error on the L^2 part only.
    for (double p : {1.5, 2.0, 4.0}) {
        const double l2 = std::abs(a) * std::sqrt(2.0 * std::pow(0.25, 3) / 3.0);
        const double expected = l2 + std::abs(a) * std::pow(measure, 1.0 / p);
        EXPECT_NEAR(energy_norm(u, p, region), expected, 1e-3);
    }
}

TEST(SupOscillation, ConstantBothModes) {
    const auto g = SpaceTimeGrid::make(2, 1.0, 1.0 / 8, 1.0 / 8, 0.0, 1.0);
    const auto u = GridFunction::sample(g, [](const Point&, double) { return -0.7; });
    const Node c{{8, 8, 0}, 8};
    const auto region = Region::ball({0.0, 0.0, 0.0}, 0.5, 0.5, 1.0);
    EXPECT_EQ(sup_oscillation(u, region, c), 0.0);
    EXPECT_EQ(sup_oscillation(u, region, c, AffinePart{-0.7, {0.0, 0.0, 0.0}}), 0.0);
}

TEST(SupOscillation, AffineCancelsWithOwnPart) {
    const auto g = SpaceTimeGrid::make(2, 1.0, 1.0 / 8, 1.0 / 8, 0.0, 1.0);
    const auto u = GridFunction::sample(g, [](const Point& x, double) { return 1.0 + 0.5 * x[0] - 2.0 * x[1]; });
    const Node c{{10, 6, 0}, 8};
    const auto x0 = g.position(c.i);
    const auto region = Region::ball(x0, 0.5, 0.5, 1.0);
    EXPECT_NEAR(sup_oscillation(u, region, c, AffinePart{u.at(c), {0.5, -2.0, 0.0}}), 0.0, 1e-14);
}

TEST(SupOscillation, RadialMonomial) {
    const auto g = SpaceTimeGrid::make(2, 1.0, 1.0 / 64, 1.0 / 8, 0.0, 1.0);
    const auto u = GridFunction::sample(g, [](const Point& x, double) { return std::pow(std::hypot(x[0], x[1]), 1.5); });
    const Node c{{64, 64, 0}, 8};
    for (double rho : {0.25, 0.5}) {
        EXPECT_NEAR(sup_oscillation(u, Region::ball({0.0, 0.0, 0.0}, rho, 0.5, 1.0), c), std::pow(rho, 1.5), 1e-12);
    }
}

TEST(SupOscillation, InvariantUnderConstantsAndAffineShifts) {
    const auto g = SpaceTimeGrid::make(2, 1.0, 1.0 / 16, 1.0 / 16, 0.0, 1.0);
    const auto u = GridFunction::sample(g, [](const Point& x, double t) { return std::sin(2.0 * x[0]) * std::cos(x[1] + t); });
    const auto shift = GridFunction::sample(g, [](const Point& x, double) { return 3.0 - 0.25 * x[0] + 0.75 * x[1]; });
    const Node c{{18, 14, 0}, 12};
    const auto x0 = g.position(c.i);
    const auto region = Region::ball(x0, 0.4, 0.5, 0.75);
    const auto w = u.plus(shift);
    EXPECT_NEAR(sup_oscillation(u.plus(GridFunction::sample(g, [](const Point&, double) { return 5.0; })), region, c),
                sup_oscillation(u, region, c), 1e-13);
    const auto gu = gradient(u, c);
    const AffinePart base{u.at(c), gu};
    const AffinePart moved{w.at(c), {gu[0] - 0.25, gu[1] + 0.75, 0.0}};
    EXPECT_NEAR(sup_oscillation(w, region, c, moved), sup_oscillation(u, region, c, base), 1e-13);
}

TEST(BinaryIo, RoundTripIsExact) {
    const auto g = SpaceTimeGrid::make(2, 0.5, 1.0 / 8, 1.0 / 16, 0.25, 0.5);
    const auto u = GridFunction::sample(g, [](const Point& x, double t) { return std::exp(x[0]) / (1.0 + t + x[1] * x[1]); });
    std::stringstream ss(std::ios::in | std::ios::out | std::ios::binary);
    io::write_binary(ss, u);
    EXPECT_EQ(ss.str().size(), 8 + 3 * 8 + 5 * 8 + 8 * g.size());
    const auto v = io::read_binary(ss);
    EXPECT_TRUE(v.grid() == g);
    EXPECT_EQ(v.values(), u.values());
}

TEST(BinaryIo, BadMagicThrows) {
    std::stringstream ss("NOTAGRID and some more bytes");
    EXPECT_THROW(io::read_binary(ss), Error);
}
