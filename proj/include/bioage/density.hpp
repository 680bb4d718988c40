#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <variant>
#include <vector>

#include <boost/math/special_functions/erf.hpp>

#include "pde_engine.hpp"
#include "policy.hpp"
#include "rng.hpp"

namespace bioage {

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }
inline double normal_quantile(double p) { return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * p); }

// Point mass at a0 at time t0.
struct DeltaStart {
    double t0 = 0.0;
    double a0 = 60.0;
};

// Gaussian B-age density of unit mass at t0; sd = 0 degenerates to a point mass.
struct GaussianStart {
    double t0 = 0.0;
    double mean = 60.0;
    double sd = 1.0;
};

// Arbitrary density over B-age at t0, renormalized to unit mass on the grid.
struct DensityStart {
    double t0 = 0.0;
    std::function<double(double)> pdf;
};

using InitialSpec = std::variant<DeltaStart, GaussianStart, DensityStart>;

inline double initial_time(const InitialSpec& spec)
{
    return std::visit([](const auto& s) { return s.t0; }, spec);
}

// g_t + (mu g)_x - D g_xx + lambda g = 0 in the grid coordinate.
struct DensityEquation {
    BridgeCoefficients co;

    double diffusion() const { return co.diffusion(); }
    double drift(double t, double x) const { return co.drift(t, x); }
    double kill(double t, double x) const { return co.hazard(t, x); }
};

struct QuantileCurve {
    double t;
    double survival;
    std::vector<double> qs;
    std::vector<double> alphas;
};

class SubDensitySurface {
public:
    SubDensitySurface(Surface g, HazardModel model, BridgeDynamics dyn, InitialSpec initial, double t_start)
        : g_(std::move(g)), model_(model), dyn_(dyn), initial_(std::move(initial)), t_start_(t_start)
    {
    }

    const Surface& g() const { return g_; }
    const HazardModel& model() const { return model_; }
    const BridgeDynamics& dyn() const { return dyn_; }
    const InitialSpec& initial() const { return initial_; }
    double t_start() const { return t_start_; }
    double t_first() const { return g_.grid().times().front(); }
    double t_end() const { return g_.grid().times().back(); }

    // Grid-level values at time t, linear between levels.
    std::vector<double> level_at(double t) const
    {
        const Grid2D& grid = g_.grid();
        const std::size_t n = grid.level_below(t);
        const auto& ts = grid.times();
        const double w = std::clamp((t - ts[n]) / (ts[n + 1] - ts[n]), 0.0, 1.0);
        std::vector<double> out(grid.nx());
        const auto lo = g_.level(n), hi = g_.level(n + 1);
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] = (1.0 - w) * lo[i] + w * hi[i];
        return out;
    }

    double survival(double t) const
    {
        check_time(t);
        if (const auto* d = analytic_window(t))
            return std::exp(-model_.hazard(d->a0) * (t - d->t0));
        const auto lv = level_at(t);
        return pairwise_total(lv) * g_.grid().axis().dx;
    }

    // int phi(a) g(t,a) da by cell midpoints.
    template <class Phi>
    double moment(double t, Phi&& phi) const
    {
        check_time(t);
        if (const auto* d = analytic_window(t)) {
            if (t == d->t0)
                return phi(d->a0);
            // Gaussian window, midpoint rule over +-8 sd
            const Moments mo = conditional_moments(dyn_, d->t0, t, d->a0 - dyn_.kappa(d->t0));
            const double sd = std::sqrt(mo.variance), mean = dyn_.kappa(t) + mo.mean;
            double s = 0.0;
            const int n = 2001;
            for (int k = 0; k < n; ++k) {
                const double z = -8.0 + 16.0 * k / (n - 1);
                s += phi(mean + sd * z) * std::exp(-0.5 * z * z);
            }
            return survival(t) * s * (16.0 / (n - 1)) / std::sqrt(2.0 * M_PI);
        }
        const auto lv = level_at(t);
        const Grid2D& grid = g_.grid();
        double s = 0.0;
        for (std::size_t i = 0; i < lv.size(); ++i)
            s += phi(grid.b_age(t, grid.axis().x(i))) * lv[i];
        return s * grid.axis().dx;
    }

    double survivor_mean(double t) const
    {
        return moment(t, [](double a) { return a; }) / survival(t);
    }

    QuantileCurve quantiles(double t, const std::vector<double>& qs) const
    {
        require(!qs.empty(), "quantile list is empty");
        for (double q : qs)
            require(q > 0.0 && q < 1.0, "quantile levels must lie in (0,1)");
        check_time(t);
        QuantileCurve qc{t, survival(t), qs, {}};
        if (const auto* d = analytic_window(t)) {
            if (t == d->t0) {
                qc.alphas.assign(qs.size(), d->a0);
                return qc;
            }
            const Moments mo = conditional_moments(dyn_, d->t0, t, d->a0 - dyn_.kappa(d->t0));
            for (double q : qs)
                qc.alphas.push_back(dyn_.kappa(t) + mo.mean + std::sqrt(mo.variance) * normal_quantile(q));
            return qc;
        }
        const Grid2D& grid = g_.grid();
        const Axis& ax = grid.axis();
        const auto lv = level_at(t);
        // cumulative mass up to the right edge of each cell
        std::vector<double> cum(lv.size());
        double run = 0.0;
        for (std::size_t i = 0; i < lv.size(); ++i) {
            run += std::max(lv[i], 0.0) * ax.dx;
            cum[i] = run;
        }
        require(run > 0.0, "no surviving mass at t");
        for (double q : qs) {
            const double target = q * run;
            const auto it = std::lower_bound(cum.begin(), cum.end(), target);
            const std::size_t i = static_cast<std::size_t>(std::min<std::ptrdiff_t>(it - cum.begin(), cum.size() - 1));
            const double below = i == 0 ? 0.0 : cum[i - 1];
            const double mass = cum[i] - below;
            const double frac = mass > 0.0 ? (target - below) / mass : 0.5;
            const double x = ax.x(i) - 0.5 * ax.dx + frac * ax.dx;
            qc.alphas.push_back(grid.b_age(t, x));
        }
        return qc;
    }

    // -d log S/dt by centred differences
    double population_hazard(double t) const
    {
        check_time(t);
        if (const auto* d = analytic_window(t))
            return model_.hazard(d->a0);
        const double delta = 0.025;
        const double lo = std::max(t - delta, t_first());
        const double hi = std::min(t + delta, t_end());
        return -(std::log(survival(hi)) - std::log(survival(lo))) / (hi - lo);
    }

private:
    static double pairwise_total(const std::vector<double>& v)
    {
        return pairwise_sum(v);
    }

    void check_time(double t) const
    {
        require(t >= t_start_ - 1e-12, "time before the initial condition");
        require(t <= t_end() + 1e-12, "time beyond the solved range");
    }

    // Non-null while t lies between a delta start and the first numerical level.
    const DeltaStart* analytic_window(double t) const
    {
        const auto* d = std::get_if<DeltaStart>(&initial_);
        if (d && t < t_first())
            return d;
        return nullptr;
    }

    Surface g_;
    HazardModel model_;
    BridgeDynamics dyn_;
    InitialSpec initial_;
    double t_start_;
};

namespace detail {

// Cell averages of a Gaussian (mean, sd) in the grid coordinate, times mass.
inline std::vector<double> gaussian_cells(const Axis& ax, double mean, double sd, double mass)
{
    std::vector<double> out(ax.n, 0.0);
    if (sd <= 0.0) {
        const double u = std::round((mean - ax.x0) / ax.dx);
        const auto i = static_cast<std::size_t>(std::clamp(u, 0.0, static_cast<double>(ax.n - 1)));
        out[i] = mass / ax.dx;
        return out;
    }
    for (std::size_t i = 0; i < ax.n; ++i) {
        const double lo = (ax.x(i) - 0.5 * ax.dx - mean) / sd;
        const double hi = (ax.x(i) + 0.5 * ax.dx - mean) / sd;
        // difference of upper tails stays accurate far in either tail
        const double p = lo > 0.0 ? normal_cdf(-lo) - normal_cdf(-hi) : normal_cdf(hi) - normal_cdf(lo);
        out[i] = mass * p / ax.dx;
    }
    return out;
}

} // namespace detail

// Forward sub-density. A delta start jumps to t0 + eps with the exact bridge Gaussian and
// survival e^{-lambda(a0) eps}; other starts are discretized at t0 directly.
inline SubDensitySurface solve_density(const HazardModel& model, const BridgeDynamics& dyn, const GridSpec& spec,
                                       const InitialSpec& initial, double t_end = -1.0, double eps = 0.25)
{
    check_consistent(model, dyn);
    if (t_end < 0.0)
        t_end = dyn.horizon;
    const double t0 = initial_time(initial);
    require(t0 >= 0.0 && t0 < t_end && t_end <= dyn.horizon, "density needs 0 <= t0 < t_end <= T");
    double t_first = t0;
    if (std::holds_alternative<DeltaStart>(initial))
        t_first = t0 + std::min(eps, 0.5 * (t_end - t0));
    const Grid2D grid = make_grid(dyn, spec, t_first, t_end);
    const Axis& ax = grid.axis();
    // grid coordinate of y = a - kappa_t at time t
    auto x_of_y = [&](double t, double y) { return grid.coord(t, dyn.kappa(t) + y); };

    std::vector<double> g0;
    if (const auto* d = std::get_if<DeltaStart>(&initial)) {
        const Moments mo = conditional_moments(dyn, t0, t_first, d->a0 - dyn.kappa(t0));
        const double mass = std::exp(-model.hazard(d->a0) * (t_first - t0));
        g0 = detail::gaussian_cells(ax, x_of_y(t_first, mo.mean), std::sqrt(mo.variance), mass);
    } else if (const auto* gs = std::get_if<GaussianStart>(&initial)) {
        require(gs->sd >= 0.0, "Gaussian start needs sd >= 0");
        g0 = detail::gaussian_cells(ax, grid.coord(t0, gs->mean), gs->sd, 1.0);
    } else {
        const auto& ds = std::get<DensityStart>(initial);
        require(static_cast<bool>(ds.pdf), "density start needs a pdf");
        g0.resize(ax.n);
        double total = 0.0;
        for (std::size_t i = 0; i < ax.n; ++i) {
            g0[i] = ds.pdf(grid.b_age(t0, ax.x(i)));
            require(g0[i] >= 0.0 && std::isfinite(g0[i]), "initial density must be finite and non-negative");
            total += g0[i] * ax.dx;
        }
        require(total > 0.0, "initial density has no mass on the grid");
        for (double& v : g0)
            v /= total;
    }
    const DensityEquation eq{{dyn, model, grid.frame()}};
    return {solve_forward(grid, FieldKind::density_g, eq, g0), model, dyn, initial, t0};
}

inline QuantileCurve quantiles(const SubDensitySurface& s, double t, const std::vector<double>& qs)
{
    return s.quantiles(t, qs);
}

inline double population_hazard(const SubDensitySurface& s, double t)
{
    return s.population_hazard(t);
}

struct SpendingBand {
    double b_lo, b_hi;
    double low, high;
};

inline SpendingBand spending_band(const PolicySurface& policy, const SubDensitySurface& dens, double t, double q_lo,
                                  double q_hi)
{
    const BridgeDynamics& a = policy.dyn;
    const BridgeDynamics& b = dens.dyn();
    require(policy.model == dens.model(), "policy and density use different hazard models");
    require(a.xi == b.xi && a.sigma == b.sigma && a.kappa0 == b.kappa0 && a.horizon == b.horizon,
            "policy and density use different bridge dynamics");
    require(q_lo < q_hi, "band needs q_lo < q_hi");
    const QuantileCurve qc = dens.quantiles(t, {q_lo, q_hi});
    const double c_age = b.kappa(t);
    return {qc.alphas[0], qc.alphas[1], spending_rate(policy, c_age, qc.alphas[0]),
            spending_rate(policy, c_age, qc.alphas[1])};
}

// Backward dual of the forward solve: E[phi(A_t) 1{zeta > t}] started from (t0, a0).
template <class Phi>
double survival_weighted_expectation(const HazardModel& model, const BridgeDynamics& dyn, const GridSpec& spec,
                                     double t, Phi&& phi, double t0, double a0)
{
    check_consistent(model, dyn);
    require(t0 < t && t <= dyn.horizon, "expectation needs t0 < t <= T");
    const Grid2D grid = make_grid(dyn, spec, t0, t);
    const Axis& ax = grid.axis();
    const BridgeCoefficients co{dyn, model, grid.frame()};

    struct Eq {
        BridgeCoefficients co;
        std::function<double(double)> phi;
        double t_end, x_lo;
        double diffusion() const { return co.diffusion(); }
        double drift(double s, double x) const { return co.drift(s, x); }
        double kill(double s, double x) const { return co.hazard(s, x); }
        SourceTerm source(double, double, double) const { return {}; }
        // far left: no mortality, mean path only
        double lower(double s) const
        {
            const double y = co.b_age(s, x_lo) - co.dyn.kappa(s);
            const double ratio = (co.dyn.horizon - t_end) / (co.dyn.horizon - s);
            return phi(co.dyn.kappa(t_end) + std::pow(ratio, co.dyn.xi) * y);
        }
        double upper(double) const { return 0.0; }
    };
    static_assert(BackwardEquation<Eq>);
    const Eq eq{co, std::function<double(double)>(phi), t, ax.x0};
    std::vector<double> terminal(ax.n);
    for (std::size_t i = 0; i < ax.n; ++i)
        terminal[i] = phi(grid.b_age(t, ax.x(i)));
    terminal.back() = 0.0;
    const Surface u = solve_backward(grid, FieldKind::policy_h, eq, terminal);
    return u.at_age(t0, a0);
}

} // namespace bioage
