#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include "error.hpp"
#include "hazard.hpp"

namespace bioage {

// dY = -xi Y/(T-t) dt + sigma dB with Y = A - kappa_t, pinned at Y_T = 0.
struct BridgeDynamics {
    double xi = 1.0;
    double sigma = 0.3;
    double kappa0 = 60.0;
    double horizon = 50.0;
    double a0 = 60.0;

    double kappa(double t) const { return kappa0 + t; }
    double kappaT() const { return kappa0 + horizon; }

    void validate() const
    {
        require(xi > 0.0 && std::isfinite(xi), "xi must be positive");
        require(sigma >= 0.0 && std::isfinite(sigma), "sigma must be non-negative");
        require(horizon > 0.0 && std::isfinite(horizon), "horizon must be positive");
        require(std::isfinite(kappa0) && std::isfinite(a0), "ages must be finite");
    }

    bool operator==(const BridgeDynamics&) const = default;
};

inline BridgeDynamics dynamics_for(const HazardModel& model, double xi, double sigma)
{
    return {xi, sigma, model.kappa0(), model.horizon(), model.kappa0()};
}

inline void check_consistent(const HazardModel& model, const BridgeDynamics& dyn)
{
    dyn.validate();
    require(std::abs(model.kappa0() - dyn.kappa0) < 1e-9 && std::abs(model.horizon() - dyn.horizon) < 1e-9,
            "hazard pins and bridge dynamics disagree on kappa0 or T");
}

struct Moments {
    double mean;
    double variance;
};

// Integral of ((T-t)/(T-q))^{2 xi} over q in [s,t], divided by (T-t).
inline double bridge_variance_factor(double xi, double ratio)
{
    const double L = std::log(ratio);
    const double p = 2.0 * xi - 1.0;
    if (std::abs(p) < 1e-6)
        return -L * (1.0 + 0.5 * p * L + p * p * L * L / 6.0);
    return -std::expm1(p * L) / p;
}

inline Moments conditional_moments(const BridgeDynamics& dyn, double s, double t, double ys)
{
    require(s >= 0.0 && s < t, "conditional moments need 0 <= s < t");
    require(t < dyn.horizon, "conditional moments need t < T");
    const double ratio = (dyn.horizon - t) / (dyn.horizon - s);
    const double mean = std::pow(ratio, dyn.xi) * ys;
    const double var = dyn.sigma * dyn.sigma * (dyn.horizon - t) * bridge_variance_factor(dyn.xi, ratio);
    return {mean, var};
}

template <class Rng>
double sample_transition(const BridgeDynamics& dyn, double s, double t, double ys, Rng& rng)
{
    const Moments mo = conditional_moments(dyn, s, t, ys);
    if (mo.variance <= 0.0)
        return mo.mean;
    std::normal_distribution<double> z;
    return mo.mean + std::sqrt(mo.variance) * z(rng);
}

struct SimulatedPath {
    std::vector<double> times;
    std::vector<double> b_ages;
    std::optional<double> death_time;
};

// Transition coefficients on a fixed simulation grid, shared by all paths.
class BridgeSchedule {
public:
    BridgeSchedule(const BridgeDynamics& dyn, double t_start, double t_stop, double dt)
        : dyn_(dyn)
    {
        require(dt > 0.0, "simulation dt must be positive");
        require(t_start >= 0.0, "start time must be non-negative");
        const double T = dyn.horizon;
        const double end = std::min(t_stop, T);
        times_.push_back(t_start);
        if (end > t_start) {
            const auto n = static_cast<std::size_t>(std::ceil((end - t_start) / dt - 1e-9));
            for (std::size_t k = 1; k <= n; ++k)
                times_.push_back(k == n ? end : t_start + static_cast<double>(k) * dt);
        }
        for (std::size_t k = 0; k + 1 < times_.size(); ++k) {
            const double s = times_[k], t = times_[k + 1];
            if (t >= T) {
                factor_.push_back(0.0);
                sd_.push_back(0.0);
            } else {
                const Moments mo = conditional_moments(dyn, s, t, 1.0);
                factor_.push_back(mo.mean);
                sd_.push_back(std::sqrt(mo.variance));
            }
        }
    }

    const BridgeDynamics& dynamics() const { return dyn_; }
    const std::vector<double>& times() const { return times_; }
    std::size_t steps() const { return factor_.size(); }
    double factor(std::size_t k) const { return factor_[k]; }
    double sd(std::size_t k) const { return sd_[k]; }

private:
    BridgeDynamics dyn_;
    std::vector<double> times_, factor_, sd_;
};

struct WalkResult {
    std::optional<double> death_time;
    double b_age_at_stop;   // B-age at the schedule end (meaningful if alive there)
};

// Integrated-hazard death sampling: trapezoidal accumulation against one Exp(1) draw.
// Beyond T the hazard is lambdaT, so the residual is resolved in closed form when horizon allows.
template <class Rng>
WalkResult walk_path(const BridgeSchedule& sched, const HazardModel& model, double a_start,
                     double horizon, Rng& rng, std::vector<double>* record = nullptr)
{
    const BridgeDynamics& dyn = sched.dynamics();
    const auto& ts = sched.times();
    std::exponential_distribution<double> expo(1.0);
    std::normal_distribution<double> z;
    const double E = expo(rng);
    double t = ts.front();
    double y = a_start - dyn.kappa(t);
    double lam = model.hazard(a_start);
    double H = 0.0;
    if (record)
        record->push_back(a_start);
    for (std::size_t k = 0; k < sched.steps(); ++k) {
        const double t1 = ts[k + 1];
        double y1 = sched.factor(k) * y;
        if (sched.sd(k) > 0.0)
            y1 += sched.sd(k) * z(rng);
        const double lam1 = model.hazard(dyn.kappa(t1) + y1);
        const double H1 = H + 0.5 * (lam + lam1) * (t1 - t);
        if (H1 >= E) {
            const double zeta = t + (t1 - t) * (E - H) / (H1 - H);
            return {zeta <= horizon ? std::optional<double>(zeta) : std::nullopt, dyn.kappa(t1) + y1};
        }
        t = t1;
        y = y1;
        lam = lam1;
        H = H1;
        if (record)
            record->push_back(dyn.kappa(t) + y);
    }
    if (t >= dyn.horizon) {
        const double zeta = t + (E - H) / model.lambdaT();
        return {zeta <= horizon ? std::optional<double>(zeta) : std::nullopt, dyn.kappaT()};
    }
    return {std::nullopt, dyn.kappa(t) + y};
}

template <class Rng>
SimulatedPath simulate_path(const BridgeDynamics& dyn, const HazardModel& model, double dt,
                            double horizon, Rng& rng)
{
    dyn.validate();
    require(horizon > 0.0, "horizon must be positive");
    const BridgeSchedule sched(dyn, 0.0, std::min(horizon, dyn.horizon), dt);
    SimulatedPath path;
    const WalkResult w = walk_path(sched, model, dyn.a0, std::numeric_limits<double>::infinity(), rng,
                                   &path.b_ages);
    path.times.assign(sched.times().begin(), sched.times().begin() + path.b_ages.size());
    if (w.death_time && *w.death_time > horizon) {
        path.death_time.reset();
    } else {
        path.death_time = w.death_time;
    }
    // Past T the age is frozen at kappa_T; extend the record on the dt grid.
    const double stop = std::min(horizon, path.death_time.value_or(horizon));
    if (!path.times.empty() && path.times.back() >= dyn.horizon) {
        for (double t = path.times.back() + dt; t <= stop; t += dt) {
            path.times.push_back(t);
            path.b_ages.push_back(dyn.kappaT());
        }
    }
    return path;
}

} // namespace bioage
