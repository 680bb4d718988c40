#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "pde_engine.hpp"

namespace bioage {

struct Preferences {
    double gamma = 8.0;
    double rho = 0.025;
    double r = 0.025;

    double k() const { return (r - rho) / gamma; }
    bool is_log() const { return gamma == 1.0; }

    void validate() const
    {
        require(gamma > 0.0 && std::isfinite(gamma), "gamma must be positive");
        require(std::isfinite(rho) && std::isfinite(r), "rho and r must be finite");
    }

    bool operator==(const Preferences&) const = default;
};

// (rho + lambda - r(1-gamma))/gamma: the spending rate of the constant-hazard problem.
inline double spending_base(const Preferences& p, double lambda)
{
    return (p.rho + lambda - p.r * (1.0 - p.gamma)) / p.gamma;
}

inline double terminal_f(const Preferences& p, double lambdaT)
{
    p.validate();
    const double beta = spending_base(p, lambdaT);
    if (!(beta > 0.0))
        throw StabilityViolation("rho + lambdaT - r(1-gamma) must be positive");
    return std::pow(beta, -p.gamma);
}

// Solution of G' = beta G - 1 at time-to-go tau with G(T) = GT.
inline double linear_backward(double GT, double beta, double tau)
{
    if (beta == 0.0)
        return GT + tau;
    const double decay = std::exp(-beta * tau);
    return GT * decay - std::expm1(-beta * tau) / beta;
}

// f_t + mu f_a + D f_aa + r(1-g) f - (rho+lambda) f + g f^{1-1/g} = 0.
struct PolicyEquation {
    BridgeCoefficients co;
    Preferences prefs;
    double GT;
    double x_lo, x_hi;

    double diffusion() const { return co.diffusion(); }
    double drift(double t, double x) const { return co.drift(t, x); }
    double kill(double t, double x) const
    {
        return prefs.rho + co.hazard(t, x) - prefs.r * (1.0 - prefs.gamma);
    }
    SourceTerm source(double, double, double f) const
    {
        const double g = prefs.gamma;
        const double fp = std::max(f, 1e-300);
        const double c = std::pow(fp, -1.0 / g);
        return {g * fp * c, (g - 1.0) * c};
    }
    double boundary(double t, double lambda) const
    {
        return std::pow(linear_backward(GT, spending_base(prefs, lambda), co.dyn.horizon - t), prefs.gamma);
    }
    double lower(double t) const { return boundary(t, 0.0); }
    double upper(double t) const { return boundary(t, co.hazard(t, x_hi)); }
};

struct PolicySurface {
    Surface f;
    Preferences prefs;
    HazardModel model;
    BridgeDynamics dyn;
    double terminal_fT;
};

inline PolicySurface solve_policy(const Preferences& prefs, const HazardModel& model, const BridgeDynamics& dyn,
                                  const GridSpec& spec = {})
{
    prefs.validate();
    check_consistent(model, dyn);
    require(!prefs.is_log(), "gamma = 1 needs the logarithmic solver");
    const double fT = terminal_f(prefs, model.lambdaT());
    const Grid2D grid = make_grid(dyn, spec);
    const Axis& ax = grid.axis();
    const PolicyEquation eq{{dyn, model, grid.frame()}, prefs, std::pow(fT, 1.0 / prefs.gamma), ax.x0, ax.back()};
    const std::vector<double> terminal(ax.n, fT);
    return {solve_backward(grid, FieldKind::policy_f, eq, terminal), prefs, model, dyn, fT};
}

inline double policy_time(const PolicySurface& ps, double c_age)
{
    const double t = c_age - ps.dyn.kappa0;
    require(t >= -1e-12 && t <= ps.dyn.horizon + 1e-12, "chronological age outside [kappa0, kappaT]");
    return t;
}

inline double spending_rate(const PolicySurface& ps, double c_age, double b_age)
{
    return std::pow(ps.f.at_age(policy_time(ps, c_age), b_age), -1.0 / ps.prefs.gamma);
}

// v(t,a,w) = f w^{1-g}/(1-g) for the power-utility branch.
inline double value_function(const PolicySurface& ps, double c_age, double b_age, double wealth)
{
    require(!ps.prefs.is_log(), "use log_value_function for gamma = 1");
    const double g = ps.prefs.gamma;
    return ps.f.at_age(policy_time(ps, c_age), b_age) * std::pow(wealth, 1.0 - g) / (1.0 - g);
}

// Logarithmic utility: f_t + L f + 1 - (rho+lambda) f = 0 and
// h_t + L h - (rho+lambda) h + r f - log f - 1 = 0.
struct LogFEquation {
    static constexpr bool linear_source = true;

    BridgeCoefficients co;
    double rho;
    double fT;
    double x_lo, x_hi;

    double diffusion() const { return co.diffusion(); }
    double drift(double t, double x) const { return co.drift(t, x); }
    double kill(double t, double x) const { return rho + co.hazard(t, x); }
    SourceTerm source(double, double, double) const { return {1.0, 0.0}; }
    double lower(double t) const { return linear_backward(fT, rho, co.dyn.horizon - t); }
    double upper(double t) const { return linear_backward(fT, rho + co.hazard(t, x_hi), co.dyn.horizon - t); }
};

// h along a constant-hazard line: h(tau) = e^{-beta tau} hT + int_0^tau e^{-beta (tau-s)}(r F(s) - log F(s) - 1) ds.
inline double log_h_constant_hazard(double fT, double hT, double beta, double r, double tau)
{
    if (tau <= 0.0)
        return hT;
    auto integrand = [&](double s) {
        const double F = linear_backward(fT, beta, s);
        return std::exp(-beta * (tau - s)) * (r * F - std::log(F) - 1.0);
    };
    const double I = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(integrand, 0.0, tau, 12, 1e-13);
    return std::exp(-beta * tau) * hT + I;
}

struct LogHEquation {
    static constexpr bool linear_source = true;

    BridgeCoefficients co;
    const Surface* f;
    double rho, r;
    double fT, hT;
    double x_lo, x_hi;

    double diffusion() const { return co.diffusion(); }
    double drift(double t, double x) const { return co.drift(t, x); }
    double kill(double t, double x) const { return rho + co.hazard(t, x); }
    SourceTerm source(double t, double x, double) const
    {
        const double fv = f->at(t, x);
        return {r * fv - std::log(fv) - 1.0, 0.0};
    }
    double lower(double t) const { return log_h_constant_hazard(fT, hT, rho, r, co.dyn.horizon - t); }
    double upper(double t) const
    {
        return log_h_constant_hazard(fT, hT, rho + co.hazard(t, x_hi), r, co.dyn.horizon - t);
    }
};

struct LogPolicySurface {
    PolicySurface policy;   // gamma = 1, so spending_rate gives 1/f
    Surface h;
    double terminal_hT;
};

inline LogPolicySurface solve_log_policy(double rho, double r, const HazardModel& model, const BridgeDynamics& dyn,
                                         const GridSpec& spec = {})
{
    check_consistent(model, dyn);
    const Preferences prefs{1.0, rho, r};
    prefs.validate();
    const double beta = rho + model.lambdaT();
    if (!(beta > 0.0))
        throw StabilityViolation("rho + lambdaT must be positive");
    const double fT = 1.0 / beta;
    const double hT = (r * fT - std::log(fT) - 1.0) / beta;
    const Grid2D grid = make_grid(dyn, spec);
    const Axis& ax = grid.axis();
    const BridgeCoefficients co{dyn, model, grid.frame()};
    const LogFEquation feq{co, rho, fT, ax.x0, ax.back()};
    Surface f = solve_backward(grid, FieldKind::policy_f, feq, std::vector<double>(ax.n, fT));
    const LogHEquation heq{co, &f, rho, r, fT, hT, ax.x0, ax.back()};
    Surface h = solve_backward(grid, FieldKind::policy_h, heq, std::vector<double>(ax.n, hT));
    return {{std::move(f), prefs, model, dyn, fT}, std::move(h), hT};
}

inline double log_value_function(const LogPolicySurface& lp, double c_age, double b_age, double wealth)
{
    const double t = policy_time(lp.policy, c_age);
    return lp.policy.f.at_age(t, b_age) * std::log(wealth) + lp.h.at_age(t, b_age);
}

// Either branch, chosen by gamma; the returned surface answers spending_rate.
inline PolicySurface solve_spending_policy(const Preferences& prefs, const HazardModel& model,
                                           const BridgeDynamics& dyn, const GridSpec& spec = {})
{
    if (prefs.is_log())
        return solve_log_policy(prefs.rho, prefs.r, model, dyn, spec).policy;
    return solve_policy(prefs, model, dyn, spec);
}

} // namespace bioage
