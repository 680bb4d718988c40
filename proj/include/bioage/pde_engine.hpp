#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"
#include "grid.hpp"

namespace bioage {

// Source value and its derivative in u; the derivative drives the Newton linearization.
struct SourceTerm {
    double value = 0.0;
    double slope = 0.0;
};

// u_t + drift u_x + D u_xx - kill u + source(u) = 0, Dirichlet data at both ends.
template <class E>
concept BackwardEquation = requires(const E& e, double t, double x, double u) {
    { e.diffusion() } -> std::convertible_to<double>;
    { e.drift(t, x) } -> std::convertible_to<double>;
    { e.kill(t, x) } -> std::convertible_to<double>;
    { e.source(t, x, u) } -> std::convertible_to<SourceTerm>;
    { e.lower(t) } -> std::convertible_to<double>;
    { e.upper(t) } -> std::convertible_to<double>;
};

// g_t + (drift g)_x - D g_xx + kill g = 0, zero flux through the outer faces.
template <class E>
concept ForwardEquation = requires(const E& e, double t, double x) {
    { e.diffusion() } -> std::convertible_to<double>;
    { e.drift(t, x) } -> std::convertible_to<double>;
    { e.kill(t, x) } -> std::convertible_to<double>;
};

template <class E>
constexpr bool has_linear_source = requires { requires E::linear_source; };

struct StepOptions {
    double tol = 1e-10;
    int max_iter = 50;
    double stiff_limit = 1.0;      // h*kill above this switches the node to fully implicit
    double diffusion_theta = 0.5;
};

// Thomas algorithm; lower[0] and upper[n-1] are ignored.
class Tridiagonal {
public:
    explicit Tridiagonal(std::size_t n = 0) { resize(n); }

    void resize(std::size_t n)
    {
        lower.assign(n, 0.0);
        diag.assign(n, 0.0);
        upper.assign(n, 0.0);
        scratch_.assign(n, 0.0);
    }
    std::size_t size() const { return diag.size(); }

    void solve(std::span<const double> rhs, std::span<double> x)
    {
        const std::size_t n = size();
        double beta = diag[0];
        if (beta == 0.0)
            throw SolverFailure("singular tridiagonal system");
        x[0] = rhs[0] / beta;
        for (std::size_t i = 1; i < n; ++i) {
            scratch_[i] = upper[i - 1] / beta;
            beta = diag[i] - lower[i] * scratch_[i];
            if (beta == 0.0)
                throw SolverFailure("singular tridiagonal system");
            x[i] = (rhs[i] - lower[i] * x[i - 1]) / beta;
        }
        for (std::size_t i = n - 1; i-- > 0;)
            x[i] -= scratch_[i + 1] * x[i + 1];
    }

    void multiply(std::span<const double> x, std::span<double> y) const
    {
        const std::size_t n = size();
        for (std::size_t i = 0; i < n; ++i) {
            double v = diag[i] * x[i];
            if (i > 0)
                v += lower[i] * x[i - 1];
            if (i + 1 < n)
                v += upper[i] * x[i + 1];
            y[i] = v;
        }
    }

    std::vector<double> lower, diag, upper;

private:
    std::vector<double> scratch_;
};

struct StepWorkspace {
    Tridiagonal sys;
    std::vector<double> base_diag, rhs, theta, guess, trial, work_rhs;

    void ensure(std::size_t n)
    {
        if (sys.size() == n)
            return;
        sys.resize(n);
        base_diag.assign(n, 0.0);
        rhs.assign(n, 0.0);
        theta.assign(n, 0.0);
        guess.assign(n, 0.0);
        trial.assign(n, 0.0);
        work_rhs.assign(n, 0.0);
    }
};

// One step from t1 (values `next`) back to t0 < t1. Advection implicit upwind at t0, diffusion
// theta-weighted, kill and source trapezoidal per node unless stiff. Returns iterations used.
template <BackwardEquation E>
int step_backward(const E& eq, const Axis& ax, double t0, double t1, std::span<const double> next,
                  std::span<double> out, const StepOptions& opt, StepWorkspace& ws)
{
    const std::size_t n = ax.n;
    ws.ensure(n);
    const double h = t1 - t0;
    const double dx = ax.dx;
    const double Dd = eq.diffusion() / (dx * dx);
    const double td = opt.diffusion_theta;
    auto& sys = ws.sys;

    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double x = ax.x(i);
        const double mu = eq.drift(t0, x);
        const double Lp = mu > 0.0 ? mu / dx : 0.0;
        const double Lm = mu < 0.0 ? -mu / dx : 0.0;
        const double c0 = eq.kill(t0, x);
        const double c1 = eq.kill(t1, x);
        const double th = h * std::max(c0, c1) > opt.stiff_limit ? 1.0 : 0.5;
        ws.theta[i] = th;
        sys.lower[i] = -h * (Lm + td * Dd);
        sys.upper[i] = -h * (Lp + td * Dd);
        ws.base_diag[i] = 1.0 + h * (Lm + Lp) + 2.0 * h * td * Dd + h * th * c0;
        double r = next[i] + h * (1.0 - td) * Dd * (next[i - 1] - 2.0 * next[i] + next[i + 1])
            - h * (1.0 - th) * c1 * next[i];
        if (th < 1.0)
            r += h * (1.0 - th) * SourceTerm(eq.source(t1, x, next[i])).value;
        ws.rhs[i] = r;
    }
    sys.lower[0] = sys.upper[0] = 0.0;
    sys.lower[n - 1] = sys.upper[n - 1] = 0.0;
    ws.base_diag[0] = ws.base_diag[n - 1] = 1.0;
    ws.rhs[0] = eq.lower(t0);
    ws.rhs[n - 1] = eq.upper(t0);

    std::copy(next.begin(), next.end(), ws.guess.begin());
    ws.guess[0] = ws.rhs[0];
    ws.guess[n - 1] = ws.rhs[n - 1];
    for (int it = 1; it <= opt.max_iter; ++it) {
        ws.work_rhs[0] = ws.rhs[0];
        ws.work_rhs[n - 1] = ws.rhs[n - 1];
        sys.diag[0] = sys.diag[n - 1] = 1.0;
        for (std::size_t i = 1; i + 1 < n; ++i) {
            const SourceTerm s = eq.source(t0, ax.x(i), ws.guess[i]);
            const double ht = h * ws.theta[i];
            sys.diag[i] = ws.base_diag[i] - ht * s.slope;
            ws.work_rhs[i] = ws.rhs[i] + ht * (s.value - s.slope * ws.guess[i]);
        }
        sys.solve(ws.work_rhs, ws.trial);
        if constexpr (has_linear_source<E>) {
            std::copy(ws.trial.begin(), ws.trial.end(), out.begin());
            return it;
        }
        double change = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double scale = std::max(std::abs(ws.trial[i]), 1e-300);
            change = std::max(change, std::abs(ws.trial[i] - ws.guess[i]) / scale);
        }
        std::copy(ws.trial.begin(), ws.trial.end(), ws.guess.begin());
        if (!std::isfinite(change))
            break;
        if (change < opt.tol) {
            std::copy(ws.guess.begin(), ws.guess.end(), out.begin());
            return it;
        }
    }
    throw SolverFailure("source iteration failed to converge at time level t=" + std::to_string(t0));
}

// One conservative step from t0 to t1. Face drift at t1, upwinded and implicit.
template <ForwardEquation E>
void step_forward_conservative(const E& eq, const Axis& ax, double t0, double t1, std::span<const double> cur,
                               std::span<double> out, const StepOptions& opt, StepWorkspace& ws)
{
    const std::size_t n = ax.n;
    ws.ensure(n);
    const double h = t1 - t0;
    const double dx = ax.dx;
    const double r = h / dx;
    const double Dd = eq.diffusion() / (dx * dx);
    const double td = opt.diffusion_theta;
    auto& sys = ws.sys;

    // face j sits between cells j and j+1; ws.trial holds face velocities
    for (std::size_t j = 0; j + 1 < n; ++j)
        ws.trial[j] = eq.drift(t1, ax.x(j) + 0.5 * dx);

    for (std::size_t i = 0; i < n; ++i) {
        const double x = ax.x(i);
        const double c0 = eq.kill(t0, x);
        const double c1 = eq.kill(t1, x);
        const double th = h * std::max(c0, c1) > opt.stiff_limit ? 1.0 : 0.5;
        double diag = 1.0 + h * th * c1;
        double explicit_flux = 0.0;
        sys.lower[i] = sys.upper[i] = 0.0;
        if (i + 1 < n) {
            const double v = ws.trial[i];
            diag += r * std::max(v, 0.0) + h * td * Dd;
            sys.upper[i] = r * std::min(v, 0.0) - h * td * Dd;
            explicit_flux += Dd * (cur[i + 1] - cur[i]);
        }
        if (i > 0) {
            const double v = ws.trial[i - 1];
            diag += -r * std::min(v, 0.0) + h * td * Dd;
            sys.lower[i] = -r * std::max(v, 0.0) - h * td * Dd;
            explicit_flux -= Dd * (cur[i] - cur[i - 1]);
        }
        sys.diag[i] = diag;
        ws.rhs[i] = cur[i] + h * (1.0 - td) * explicit_flux - h * (1.0 - th) * c0 * cur[i];
    }
    sys.solve(ws.rhs, out);

    double peak = 0.0, low = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(out[i]))
            throw SolverFailure("non-finite density at t=" + std::to_string(t1));
        peak = std::max(peak, out[i]);
        low = std::min(low, out[i]);
    }
    if (low < -1e-12 * peak)
        throw SolverFailure("density negativity " + std::to_string(low / peak) + " at t=" + std::to_string(t1));
}

template <BackwardEquation E>
Surface solve_backward(const Grid2D& grid, FieldKind kind, const E& eq, std::span<const double> terminal,
                       const StepOptions& opt = {})
{
    Surface s(grid, kind);
    const std::size_t last = grid.nt() - 1;
    std::copy(terminal.begin(), terminal.end(), s.level(last).begin());
    StepWorkspace ws;
    const auto& ts = grid.times();
    for (std::size_t k = last; k-- > 0;)
        step_backward(eq, grid.axis(), ts[k], ts[k + 1], s.level(k + 1), s.level(k), opt, ws);
    return s;
}

template <ForwardEquation E>
Surface solve_forward(const Grid2D& grid, FieldKind kind, const E& eq, std::span<const double> initial,
                      const StepOptions& opt = {})
{
    Surface s(grid, kind);
    std::copy(initial.begin(), initial.end(), s.level(0).begin());
    StepWorkspace ws;
    const auto& ts = grid.times();
    for (std::size_t k = 0; k + 1 < grid.nt(); ++k)
        step_forward_conservative(eq, grid.axis(), ts[k], ts[k + 1], s.level(k), s.level(k + 1), opt, ws);
    return s;
}

struct ResidualWindow {
    double t_lo = -1e300, t_hi = 1e300;
    double x_lo = -1e300, x_hi = 1e300;
};

// Max-norm of the continuous backward operator applied with centred differences at interior nodes.
template <BackwardEquation E>
double residual(const Surface& s, const E& eq, const ResidualWindow& win = {})
{
    const Grid2D& g = s.grid();
    const Axis& ax = g.axis();
    const auto& ts = g.times();
    const double D = eq.diffusion();
    double worst = 0.0;
    for (std::size_t k = 1; k + 1 < g.nt(); ++k) {
        const double t = ts[k];
        if (t < win.t_lo || t > win.t_hi)
            continue;
        const double dtc = ts[k + 1] - ts[k - 1];
        for (std::size_t i = 1; i + 1 < ax.n; ++i) {
            const double x = ax.x(i);
            if (x < win.x_lo || x > win.x_hi)
                continue;
            const double u = s.value(k, i);
            const double ut = (s.value(k + 1, i) - s.value(k - 1, i)) / dtc;
            const double ux = (s.value(k, i + 1) - s.value(k, i - 1)) / (2.0 * ax.dx);
            const double uxx = (s.value(k, i + 1) - 2.0 * u + s.value(k, i - 1)) / (ax.dx * ax.dx);
            const double r = ut + eq.drift(t, x) * ux + D * uxx - eq.kill(t, x) * u
                + SourceTerm(eq.source(t, x, u)).value;
            worst = std::max(worst, std::abs(r));
        }
    }
    return worst;
}

// Bridge drift and hazard expressed in the grid coordinate x.
struct BridgeCoefficients {
    BridgeDynamics dyn;
    HazardModel model;
    Frame frame;

    double b_age(double t, double x) const { return frame == Frame::comoving ? dyn.kappa(t) + x : x; }

    double drift(double t, double x) const
    {
        const double tau = std::max(dyn.horizon - t, 1e-12);
        if (frame == Frame::comoving)
            return -dyn.xi * x / tau;
        return 1.0 + dyn.xi * (dyn.kappa(t) - x) / tau;
    }

    double hazard(double t, double x) const { return model.hazard(b_age(t, x)); }
    double diffusion() const { return 0.5 * dyn.sigma * dyn.sigma; }
};

} // namespace bioage
