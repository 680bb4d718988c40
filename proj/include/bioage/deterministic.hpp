#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/numeric/odeint.hpp>

#include "policy.hpp"

namespace bioage {

// Yaari plan with deterministic ageing and no pension:
// c*_s = c0 e^{ks} p(s)^{1/g}, c0 = W0 / int_0^tau e^{(k-r)s} p(s)^{1/g} ds.
class DeterministicPlan {
public:
    DeterministicPlan(const Preferences& prefs, std::function<double(double)> survival, double w0,
                      std::vector<double> breakpoints = {})
        : prefs_(prefs), survival_(std::move(survival)), w0_(w0), breaks_(std::move(breakpoints))
    {
        prefs_.validate();
        require(w0 > 0.0, "initial wealth must be positive");
        find_horizon();
        c0_ = w0_ / annuity(tau_);
    }

    const Preferences& prefs() const { return prefs_; }
    double w0() const { return w0_; }
    double c0() const { return c0_; }
    double rate0() const { return c0_ / w0_; }
    double horizon() const { return tau_; }

    double integrand(double s) const
    {
        return std::exp((prefs_.k() - prefs_.r) * s) * std::pow(survival_(s), 1.0 / prefs_.gamma);
    }

    double consumption(double s) const
    {
        return c0_ * std::exp(prefs_.k() * s) * std::pow(survival_(s), 1.0 / prefs_.gamma);
    }

    double wealth(double t) const
    {
        if (t <= 0.0)
            return w0_;
        return (w0_ - c0_ * annuity(std::min(t, tau_))) * std::exp(prefs_.r * t);
    }

    // int_0^t integrand, split at breakpoints and every 10 years
    double annuity(double t) const
    {
        std::vector<double> cuts{0.0};
        for (double b : breaks_)
            if (b > 0.0 && b < t)
                cuts.push_back(b);
        for (double s = 10.0; s < t; s += 10.0)
            cuts.push_back(s);
        cuts.push_back(t);
        std::sort(cuts.begin(), cuts.end());
        cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
        double total = 0.0;
        auto fn = [this](double s) { return integrand(s); };
        for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
            total += boost::math::quadrature::gauss_kronrod<double, 61>::integrate(fn, cuts[i], cuts[i + 1], 15,
                                                                                    1e-14);
        return total;
    }

private:
    // Stands in for the depletion time: the integrand falls below 1e-14 of its peak.
    void find_horizon()
    {
        constexpr double cap = 2000.0;
        double peak = integrand(0.0);
        const double last_break = breaks_.empty() ? 0.0 : *std::max_element(breaks_.begin(), breaks_.end());
        for (double s = 1.0; s <= cap; s += 1.0) {
            const double v = integrand(s);
            peak = std::max(peak, v);
            if (s > last_break && v < 1e-14 * peak) {
                tau_ = s;
                return;
            }
        }
        throw StabilityViolation("deterministic plan integral does not converge");
    }

    Preferences prefs_;
    std::function<double(double)> survival_;
    double w0_;
    std::vector<double> breaks_;
    double tau_ = 0.0;
    double c0_ = 0.0;
};

// Survival follows the model: Gompertz until T, hazard held at lambdaT afterwards.
inline DeterministicPlan deterministic_plan(const Preferences& prefs, const HazardModel& model, double w0)
{
    return DeterministicPlan(prefs, [model](double s) { return model.survival(s); }, w0, {model.horizon()});
}

struct CharacteristicCurve {
    std::vector<double> times;
    std::vector<double> b_ages;
    std::vector<double> spending;
};

// a(t) = kappa_t + (a0 - kappa0)((T-t)/T)^xi
inline double characteristic_age(const BridgeDynamics& dyn, double a0, double t)
{
    return dyn.kappa(t) + (a0 - dyn.kappa0) * std::pow(std::max(dyn.horizon - t, 0.0) / dyn.horizon, dyn.xi);
}

// G = f^{1/g} along a(t) solves G' = beta(t) G - 1 backward from G_T; spending is 1/G.
inline CharacteristicCurve characteristics_approx(const Preferences& prefs, const HazardModel& model,
                                                  const BridgeDynamics& dyn, double a0, std::vector<double> times = {})
{
    namespace ode = boost::numeric::odeint;
    prefs.validate();
    check_consistent(model, dyn);
    const double T = dyn.horizon;
    if (times.empty())
        for (int k = 0; k <= 200; ++k)
            times.push_back(T * k / 200.0);
    for (double t : times)
        require(t >= 0.0 && t <= T, "characteristic times must lie in [0, T]");
    const double GT = prefs.is_log() ? 1.0 / (prefs.rho + model.lambdaT())
                                     : std::pow(terminal_f(prefs, model.lambdaT()), 1.0 / prefs.gamma);

    // integrate in time-to-go s = T - t over the distinct positive values
    std::vector<double> grid_s{0.0};
    for (double t : times)
        if (T - t > 0.0)
            grid_s.push_back(T - t);
    std::sort(grid_s.begin(), grid_s.end());
    grid_s.erase(std::unique(grid_s.begin(), grid_s.end()), grid_s.end());
    std::vector<double> G_at;
    auto rhs = [&](const double& G, double& dG, double s) {
        const double beta = spending_base(prefs, model.hazard(characteristic_age(dyn, a0, T - s)));
        dG = 1.0 - beta * G;
    };
    double G = GT;
    if (grid_s.size() > 1) {
        auto stepper = ode::make_dense_output(1e-13, 1e-13, ode::runge_kutta_dopri5<double>());
        ode::integrate_times(stepper, rhs, G, grid_s.begin(), grid_s.end(), 1e-3,
                             [&](const double& g, double) { G_at.push_back(g); });
    } else {
        G_at.push_back(GT);
    }

    CharacteristicCurve out;
    out.times = times;
    for (double t : times) {
        const double s = std::max(T - t, 0.0);
        const auto k = static_cast<std::size_t>(std::lower_bound(grid_s.begin(), grid_s.end(), s) - grid_s.begin());
        out.b_ages.push_back(characteristic_age(dyn, a0, t));
        out.spending.push_back(1.0 / G_at[k]);
    }
    return out;
}

} // namespace bioage
