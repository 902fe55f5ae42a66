#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "plap/errors.hpp"

namespace plap {

using Point = std::array<double, 3>;  // unused trailing components are zero
using Index = std::array<int, 3>;

/// Uniform space-time grid on [-L, L]^n x [t_start, t_end]. The same node
/// count is used on every spatial axis.
class SpaceTimeGrid {
public:
    static SpaceTimeGrid make(int n, double half_width, double h, double dt, double t_start,
                              double t_end) {
        if (n < 1 || n > 3) throw DomainError("SpaceTimeGrid: n must be 1, 2 or 3");
        if (!(h > 0.0) || !(dt > 0.0)) throw DomainError("SpaceTimeGrid: h and dt must be positive");
        if (!(half_width > 0.0)) throw DomainError("SpaceTimeGrid: half_width must be positive");
        if (!(t_end > t_start)) throw DomainError("SpaceTimeGrid: t_end must exceed t_start");
        const double cells = 2.0 * half_width / h;
        const double steps = (t_end - t_start) / dt;
        if (std::abs(cells - std::round(cells)) > 1e-9 * std::max(1.0, cells)) {
            throw DomainError("SpaceTimeGrid: 2*half_width must be a multiple of h");
        }
        if (std::abs(steps - std::round(steps)) > 1e-9 * std::max(1.0, steps)) {
            throw DomainError("SpaceTimeGrid: t_end - t_start must be a multiple of dt");
        }
        const int per_axis = static_cast<int>(std::lround(cells)) + 1;
        if (per_axis < 3) throw DomainError("SpaceTimeGrid: need at least 3 nodes per axis");
        return SpaceTimeGrid(n, half_width, h, dt, t_start, t_end, per_axis,
                             static_cast<int>(std::lround(steps)) + 1);
    }

    /// Grid with `per_axis` nodes on [-L, L] and `levels` time levels.
    static SpaceTimeGrid with_counts(int n, double half_width, int per_axis, double t_start,
                                     double t_end, int levels) {
        if (per_axis < 3 || levels < 2) throw DomainError("SpaceTimeGrid: counts too small");
        return make(n, half_width, 2.0 * half_width / (per_axis - 1), (t_end - t_start) / (levels - 1),
                    t_start, t_end);
    }

    int n() const noexcept { return n_; }
    double half_width() const noexcept { return half_width_; }
    double h() const noexcept { return h_; }
    double dt() const noexcept { return dt_; }
    double t_start() const noexcept { return t_start_; }
    double t_end() const noexcept { return t_end_; }
    int per_axis() const noexcept { return per_axis_; }
    int time_levels() const noexcept { return levels_; }

    std::size_t spatial_size() const noexcept {
        std::size_t s = 1;
        for (int d = 0; d < n_; ++d) s *= static_cast<std::size_t>(per_axis_);
        return s;
    }
    std::size_t size() const noexcept { return spatial_size() * static_cast<std::size_t>(levels_); }

    double coord(int i) const noexcept { return -half_width_ + i * h_; }
    double time(int j) const noexcept { return j == levels_ - 1 ? t_end_ : t_start_ + j * dt_; }

    /// Row-major: the last spatial axis varies fastest.
    std::size_t flatten(const Index& i) const noexcept {
        std::size_t s = 0;
        for (int d = 0; d < n_; ++d) s = s * per_axis_ + static_cast<std::size_t>(i[d]);
        return s;
    }
    Index unflatten(std::size_t s) const noexcept {
        Index i{0, 0, 0};
        for (int d = n_ - 1; d >= 0; --d) {
            i[d] = static_cast<int>(s % per_axis_);
            s /= per_axis_;
        }
        return i;
    }
    Point position(const Index& i) const noexcept {
        Point x{0.0, 0.0, 0.0};
        for (int d = 0; d < n_; ++d) x[d] = coord(i[d]);
        return x;
    }
    Point position(std::size_t s) const noexcept { return position(unflatten(s)); }

    /// Nearest node index along an axis, clamped to the grid.
    int nearest_index(double x) const noexcept {
        const long i = std::lround((x + half_width_) / h_);
        return static_cast<int>(std::clamp<long>(i, 0, per_axis_ - 1));
    }
    int nearest_level(double t) const noexcept {
        const long j = std::lround((t - t_start_) / dt_);
        return static_cast<int>(std::clamp<long>(j, 0, levels_ - 1));
    }

    /// At least `margin` nodes away from every face of the spatial box.
    bool is_interior(const Index& i, int margin = 1) const noexcept {
        for (int d = 0; d < n_; ++d) {
            if (i[d] < margin || i[d] > per_axis_ - 1 - margin) return false;
        }
        return true;
    }

    bool contains(const Point& x, double tol = 1e-12) const noexcept {
        for (int d = 0; d < n_; ++d) {
            if (std::abs(x[d]) > half_width_ + tol) return false;
        }
        return true;
    }

    friend bool operator==(const SpaceTimeGrid& a, const SpaceTimeGrid& b) noexcept {
        return a.n_ == b.n_ && a.per_axis_ == b.per_axis_ && a.levels_ == b.levels_ &&
               a.half_width_ == b.half_width_ && a.h_ == b.h_ && a.dt_ == b.dt_ &&
               a.t_start_ == b.t_start_ && a.t_end_ == b.t_end_;
    }

private:
    SpaceTimeGrid(int n, double half_width, double h, double dt, double t_start, double t_end,
                  int per_axis, int levels)
        : n_(n), half_width_(half_width), h_(h), dt_(dt), t_start_(t_start), t_end_(t_end),
          per_axis_(per_axis), levels_(levels) {}

    int n_;
    double half_width_;
    double h_;
    double dt_;
    double t_start_;
    double t_end_;
    int per_axis_;
    int levels_;
};

/// A space-time node: spatial multi-index and time level.
struct Node {
    Index i{0, 0, 0};
    int level = 0;
};

/// Scalar field sampled at every node of a grid. Values are finite and laid
/// out time-major, row-major in space.
class GridFunction {
public:
    GridFunction(SpaceTimeGrid grid, std::vector<double> values)
        : grid_(std::move(grid)), values_(std::move(values)) {
        if (values_.size() != grid_.size()) {
            throw DomainError("GridFunction: value count does not match grid");
        }
        for (double v : values_) {
            if (!std::isfinite(v)) throw DomainError("GridFunction: non-finite value");
        }
    }

    static GridFunction zeros(const SpaceTimeGrid& grid) {
        return GridFunction(grid, std::vector<double>(grid.size(), 0.0));
    }

    /// Samples fn(x, t) at every node.
    static GridFunction sample(const SpaceTimeGrid& grid,
                               const std::function<double(const Point&, double)>& fn) {
        std::vector<double> v(grid.size());
        const std::size_t ns = grid.spatial_size();
        for (int j = 0; j < grid.time_levels(); ++j) {
            const double t = grid.time(j);
            for (std::size_t s = 0; s < ns; ++s) v[j * ns + s] = fn(grid.position(s), t);
        }
        return GridFunction(grid, std::move(v));
    }

    const SpaceTimeGrid& grid() const noexcept { return grid_; }
    const std::vector<double>& values() const noexcept { return values_; }

    double at(std::size_t spatial, int level) const noexcept {
        return values_[static_cast<std::size_t>(level) * grid_.spatial_size() + spatial];
    }
    double at(const Node& node) const noexcept { return at(grid_.flatten(node.i), node.level); }

    /// Values of one time level.
    std::vector<double> slice(int level) const {
        const std::size_t ns = grid_.spatial_size();
        const auto first = values_.begin() + static_cast<std::ptrdiff_t>(level * ns);
        return {first, first + static_cast<std::ptrdiff_t>(ns)};
    }

    double max_abs() const noexcept {
        double m = 0.0;
        for (double v : values_) m = std::max(m, std::abs(v));
        return m;
    }

    GridFunction scaled(double c) const {
        std::vector<double> v(values_);
        for (double& x : v) x *= c;
        return GridFunction(grid_, std::move(v));
    }

    GridFunction plus(const GridFunction& other) const {
        if (!(other.grid_ == grid_)) throw DomainError("GridFunction: grids differ");
        std::vector<double> v(values_);
        for (std::size_t k = 0; k < v.size(); ++k) v[k] += other.values_[k];
        return GridFunction(grid_, std::move(v));
    }

private:
    SpaceTimeGrid grid_;
    std::vector<double> values_;
};

/// Spatial ball or box intersected with a time interval [t_lo, t_hi].
struct Region {
    enum class Shape { ball, box };

    Shape shape = Shape::box;
    Point center{0.0, 0.0, 0.0};
    double radius = 0.0;            // ball
    Point half_widths{0.0, 0.0, 0.0};  // box
    double t_lo = 0.0;
    double t_hi = 0.0;

    static Region ball(const Point& center, double radius, double t_lo, double t_hi) {
        if (!(radius > 0.0)) throw DomainError("Region: radius must be positive");
        if (!(t_hi >= t_lo)) throw DomainError("Region: empty time interval");
        Region r;
        r.shape = Shape::ball;
        r.center = center;
        r.radius = radius;
        r.t_lo = t_lo;
        r.t_hi = t_hi;
        return r;
    }

    static Region box(const Point& center, const Point& half_widths, double t_lo, double t_hi) {
        if (!(t_hi >= t_lo)) throw DomainError("Region: empty time interval");
        Region r;
        r.shape = Shape::box;
        r.center = center;
        r.half_widths = half_widths;
        r.t_lo = t_lo;
        r.t_hi = t_hi;
        return r;
    }

    /// The whole grid.
    static Region whole(const SpaceTimeGrid& g) {
        const double L = g.half_width();
        return box({0.0, 0.0, 0.0}, {L, L, L}, g.t_start(), g.t_end());
    }

    /// Node membership for pointwise (sup) queries. Spatial tests carry a
    /// relative slack so nodes on the boundary count as inside; in time a node
    /// belongs when t_lo - dt/2 < t <= t_hi + dt/2.
    bool contains_space(const Point& x, int n, double h) const noexcept {
        const double tol = 1e-9 * h;
        if (shape == Shape::ball) {
            double d2 = 0.0;
            for (int d = 0; d < n; ++d) d2 += (x[d] - center[d]) * (x[d] - center[d]);
            return std::sqrt(d2) <= radius + tol;
        }
        for (int d = 0; d < n; ++d) {
            if (std::abs(x[d] - center[d]) > half_widths[d] + tol) return false;
        }
        return true;
    }
    bool contains_time(double t, double dt) const noexcept {
        return t > t_lo - 0.5 * dt && t <= t_hi + 0.5 * dt;
    }
};

namespace io {

inline constexpr char grid_magic[8] = {'P', 'L', 'A', 'P', 'G', 'F', '0', '1'};

namespace detail {

template <class T>
void put_le(std::ostream& os, T v) {
    static_assert(sizeof(T) == 8);
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    char buf[8];
    for (int b = 0; b < 8; ++b) buf[b] = static_cast<char>((bits >> (8 * b)) & 0xffu);
    os.write(buf, 8);
}

template <class T>
T get_le(std::istream& is) {
    static_assert(sizeof(T) == 8);
    unsigned char buf[8];
    if (!is.read(reinterpret_cast<char*>(buf), 8)) throw Error("GridFunction: truncated stream");
    std::uint64_t bits = 0;
    for (int b = 7; b >= 0; --b) bits = (bits << 8) | buf[b];
    T v;
    std::memcpy(&v, &bits, 8);
    return v;
}

}  // namespace detail

/// Binary layout, little-endian:
///   8 bytes magic "PLAPGF01"
///   int64  n, nodes per axis, time levels
///   float64 half_width, h, dt, t_start, t_end
///   float64 payload[levels * per_axis^n], time-major, row-major in space
inline void write_binary(std::ostream& os, const GridFunction& u) {
    const auto& g = u.grid();
    os.write(grid_magic, 8);
    detail::put_le<std::int64_t>(os, g.n());
    detail::put_le<std::int64_t>(os, g.per_axis());
    detail::put_le<std::int64_t>(os, g.time_levels());
    detail::put_le<double>(os, g.half_width());
    detail::put_le<double>(os, g.h());
    detail::put_le<double>(os, g.dt());
    detail::put_le<double>(os, g.t_start());
    detail::put_le<double>(os, g.t_end());
    for (double v : u.values()) detail::put_le<double>(os, v);
}

inline GridFunction read_binary(std::istream& is) {
    char magic[8];
    if (!is.read(magic, 8) || std::memcmp(magic, grid_magic, 8) != 0) {
        throw Error("GridFunction: bad magic");
    }
    const auto n = detail::get_le<std::int64_t>(is);
    const auto per_axis = detail::get_le<std::int64_t>(is);
    const auto levels = detail::get_le<std::int64_t>(is);
    const double L = detail::get_le<double>(is);
    const double h = detail::get_le<double>(is);
    const double dt = detail::get_le<double>(is);
    const double t0 = detail::get_le<double>(is);
    const double t1 = detail::get_le<double>(is);
    auto grid = SpaceTimeGrid::make(static_cast<int>(n), L, h, dt, t0, t1);
    if (grid.per_axis() != per_axis || grid.time_levels() != levels) {
        throw Error("GridFunction: header counts inconsistent with spacing");
    }
    std::vector<double> values(grid.size());
    for (double& v : values) v = detail::get_le<double>(is);
    return GridFunction(grid, std::move(values));
}

/// One row per node: t, x1[, x2[, x3]], value.
inline std::string to_csv(const GridFunction& u) {
    const auto& g = u.grid();
    std::ostringstream os;
    os.precision(17);
    os << "t";
    for (int d = 0; d < g.n(); ++d) os << ",x" << (d + 1);
    os << ",value\n";
    for (int j = 0; j < g.time_levels(); ++j) {
        for (std::size_t s = 0; s < g.spatial_size(); ++s) {
            const auto x = g.position(s);
            os << g.time(j);
            for (int d = 0; d < g.n(); ++d) os << ',' << x[d];
            os << ',' << u.at(s, j) << '\n';
        }
    }
    return os.str();
}

}  // namespace io

}  // namespace plap
