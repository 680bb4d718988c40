#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bridge.hpp"
#include "error.hpp"

namespace bioage {

// comoving: x = a - kappa_t, so the bridge drift vanishes on the diagonal.
// fixed:    x = a.
enum class Frame { comoving, fixed };

struct GridSpec {
    double da = 0.1;
    double dt = 0.05;
    std::optional<double> a_min;   // default kappa0 - 40
    std::optional<double> a_max;   // default kappaT + 30
    Frame frame = Frame::comoving;
    double refine_window = 2.0;    // geometric refinement over the last years before T
    double min_step = 1e-6;        // remaining time below which the next step lands on T
};

struct Axis {
    double x0 = 0.0;
    double dx = 1.0;
    std::size_t n = 0;

    double x(std::size_t i) const { return x0 + static_cast<double>(i) * dx; }
    double back() const { return x(n - 1); }

    static Axis span_of(double lo, double hi, double step)
    {
        require(hi > lo && step > 0.0, "axis needs lo < hi and a positive step");
        const auto cells = static_cast<std::size_t>(std::llround(std::max(1.0, (hi - lo) / step)));
        return {lo, (hi - lo) / static_cast<double>(cells), cells + 1};
    }
};

// Uniform steps up to T - refine_window, then h = min(dt, (T-t)/(2 max(xi,1))) so that
// xi*h/(T-t) <= 1/2, ending with one step of length <= min_step exactly onto T.
inline std::vector<double> make_time_nodes(double t_begin, double t_end, double dt, double T, double xi,
                                           double refine_window = 2.0, double min_step = 1e-6)
{
    require(dt > 0.0, "dt must be positive");
    require(t_begin >= 0.0 && t_begin < t_end && t_end <= T, "time range must satisfy 0 <= begin < end <= T");
    std::vector<double> ts{t_begin};
    const double uniform_end = std::max(t_begin, std::min(t_end, T - refine_window));
    if (uniform_end > t_begin) {
        const double len = uniform_end - t_begin;
        const auto n = std::max<long long>(1, static_cast<long long>(std::ceil(len / dt - 1e-9)));
        for (long long k = 1; k <= n; ++k)
            ts.push_back(k == n ? uniform_end : t_begin + static_cast<double>(k) * len / static_cast<double>(n));
    }
    const double shrink = 1.0 / (2.0 * std::max(xi, 1.0));
    double t = ts.back();
    while (t < t_end) {
        const double rem = T - t;
        double next = rem <= min_step ? T : t + std::min(dt, rem * shrink);
        if (next > t_end)
            next = t_end;
        ts.push_back(next);
        t = next;
    }
    return ts;
}

class Grid2D {
public:
    Grid2D(std::vector<double> times, Axis axis, Frame frame, double kappa0, double horizon)
        : times_(std::move(times)), axis_(axis), frame_(frame), kappa0_(kappa0), horizon_(horizon)
    {
        require(times_.size() >= 2, "grid needs at least two time levels");
        require(std::is_sorted(times_.begin(), times_.end()), "time nodes must increase");
        require(axis_.n >= 3, "grid needs at least three spatial nodes");
    }

    const std::vector<double>& times() const { return times_; }
    const Axis& axis() const { return axis_; }
    Frame frame() const { return frame_; }
    double kappa0() const { return kappa0_; }
    double horizon() const { return horizon_; }
    std::size_t nt() const { return times_.size(); }
    std::size_t nx() const { return axis_.n; }

    double b_age(double t, double x) const { return frame_ == Frame::comoving ? kappa0_ + t + x : x; }
    double coord(double t, double a) const { return frame_ == Frame::comoving ? a - kappa0_ - t : a; }
    double a_lo(double t) const { return b_age(t, axis_.x0); }
    double a_hi(double t) const { return b_age(t, axis_.back()); }

    // Index n with times[n] <= t <= times[n+1]; throws when t is outside the grid.
    std::size_t level_below(double t) const
    {
        const double tol = 1e-12 * std::max(1.0, std::abs(times_.back()));
        if (!(t >= times_.front() - tol && t <= times_.back() + tol))
            throw InvalidInput("time " + std::to_string(t) + " outside the grid");
        auto it = std::upper_bound(times_.begin(), times_.end(), t);
        std::size_t n = it == times_.begin() ? 0 : static_cast<std::size_t>(it - times_.begin()) - 1;
        return std::min(n, times_.size() - 2);
    }

private:
    std::vector<double> times_;
    Axis axis_;
    Frame frame_;
    double kappa0_;
    double horizon_;
};

// Default solver grid over [t_begin, t_end], covering at least the configured age range at every level.
inline Grid2D make_grid(const BridgeDynamics& dyn, const GridSpec& spec, double t_begin, double t_end)
{
    dyn.validate();
    require(spec.da > 0.0 && spec.dt > 0.0, "grid steps must be positive");
    const double a_min = spec.a_min.value_or(dyn.kappa0 - 40.0);
    const double a_max = spec.a_max.value_or(dyn.kappaT() + 30.0);
    require(a_min < dyn.kappa0 - 30.0, "a_min must lie below kappa0 - 30");
    require(a_max > dyn.kappaT() + 20.0, "a_max must lie above kappaT + 20");
    const Axis axis = spec.frame == Frame::comoving
        ? Axis::span_of(a_min - dyn.kappaT(), a_max - dyn.kappa0, spec.da)
        : Axis::span_of(a_min, a_max, spec.da);
    return Grid2D(make_time_nodes(t_begin, t_end, spec.dt, dyn.horizon, dyn.xi, spec.refine_window, spec.min_step),
                  axis, spec.frame, dyn.kappa0, dyn.horizon);
}

inline Grid2D make_grid(const BridgeDynamics& dyn, const GridSpec& spec)
{
    return make_grid(dyn, spec, 0.0, dyn.horizon);
}

enum class FieldKind { erl, policy_f, policy_h, density_g };

class Surface {
public:
    Surface(Grid2D grid, FieldKind kind)
        : grid_(std::move(grid)), kind_(kind), values_(grid_.nt() * grid_.nx(), 0.0)
    {
    }

    const Grid2D& grid() const { return grid_; }
    FieldKind kind() const { return kind_; }

    std::span<double> level(std::size_t n) { return {values_.data() + n * grid_.nx(), grid_.nx()}; }
    std::span<const double> level(std::size_t n) const { return {values_.data() + n * grid_.nx(), grid_.nx()}; }
    double value(std::size_t n, std::size_t i) const { return values_[n * grid_.nx() + i]; }

    // Bilinear in (t, x).
    double at(double t, double x) const
    {
        const Axis& ax = grid_.axis();
        const double tol = 1e-9 * ax.dx;
        if (!(x >= ax.x0 - tol && x <= ax.back() + tol))
            throw InvalidInput("age outside the grid at t=" + std::to_string(t));
        const std::size_t n = grid_.level_below(t);
        const double u = std::clamp((x - ax.x0) / ax.dx, 0.0, static_cast<double>(ax.n - 1));
        const std::size_t i = std::min(static_cast<std::size_t>(u), ax.n - 2);
        const double w = u - static_cast<double>(i);
        const auto& ts = grid_.times();
        const double s = std::clamp((t - ts[n]) / (ts[n + 1] - ts[n]), 0.0, 1.0);
        const double v0 = (1 - w) * value(n, i) + w * value(n, i + 1);
        const double v1 = (1 - w) * value(n + 1, i) + w * value(n + 1, i + 1);
        return (1 - s) * v0 + s * v1;
    }

    double at_age(double t, double a) const { return at(t, grid_.coord(t, a)); }

    // Finite everywhere plus the kind's sign constraint.
    bool valid() const
    {
        double peak = 0.0;
        for (double v : values_) {
            if (!std::isfinite(v))
                return false;
            peak = std::max(peak, std::abs(v));
        }
        for (double v : values_) {
            switch (kind_) {
            case FieldKind::erl:
            case FieldKind::policy_f:
                if (!(v > 0.0))
                    return false;
                break;
            case FieldKind::density_g:
                if (v < -1e-12 * peak)
                    return false;
                break;
            case FieldKind::policy_h:
                break;
            }
        }
        return true;
    }

private:
    Grid2D grid_;
    FieldKind kind_;
    std::vector<double> values_;
};

} // namespace bioage
