#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "bridge.hpp"
#include "rng.hpp"

namespace bioage {

struct McEstimate {
    double value = 0.0;
    double std_error = 0.0;
    std::size_t n_paths = 0;
    std::uint64_t seed = 0;
};

struct McOptions {
    std::size_t n_paths = 100000;
    double dt = 1.0 / 48.0;
    std::uint64_t seed = 20240601;
    unsigned workers = default_workers();
};

namespace detail {

inline McEstimate mean_estimate(const std::vector<double>& xs, const McOptions& opt)
{
    const double n = static_cast<double>(xs.size());
    const double mean = pairwise_sum(xs) / n;
    std::vector<double> dev(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i)
        dev[i] = (xs[i] - mean) * (xs[i] - mean);
    const double var = xs.size() > 1 ? pairwise_sum(dev) / (n - 1.0) : 0.0;
    return {mean, std::sqrt(var / n), xs.size(), opt.seed};
}

inline void check_options(const McOptions& opt)
{
    require(opt.n_paths > 0, "n_paths must be positive");
    require(opt.dt > 0.0, "simulation dt must be positive");
}

} // namespace detail

// Mean remaining lifetime zeta - t for paths started at (t, a).
inline McEstimate mc_erl(const HazardModel& model, const BridgeDynamics& dyn, double t, double a, const McOptions& opt = {})
{
    check_consistent(model, dyn);
    detail::check_options(opt);
    require(t >= 0.0, "start time must be non-negative");
    const double inf = std::numeric_limits<double>::infinity();
    const BridgeSchedule sched(dyn, t, dyn.horizon, opt.dt);
    const auto life = parallel_map<double>(opt.n_paths, opt.workers, [&](std::size_t i) {
        auto rng = path_stream(opt.seed, i);
        if (t >= dyn.horizon) {
            std::exponential_distribution<double> expo(1.0);
            return expo(rng) / model.lambdaT();
        }
        return *walk_path(sched, model, a, inf, rng).death_time - t;
    });
    return detail::mean_estimate(life, opt);
}

// Fraction of paths from (0, a0) alive at t, with binomial standard error.
inline McEstimate mc_survival(const HazardModel& model, const BridgeDynamics& dyn, double t, const McOptions& opt = {})
{
    check_consistent(model, dyn);
    detail::check_options(opt);
    require(t >= 0.0, "survival time must be non-negative");
    if (t == 0.0)
        return {1.0, 0.0, opt.n_paths, opt.seed};
    const BridgeSchedule sched(dyn, 0.0, t, opt.dt);
    const auto alive = parallel_map<double>(opt.n_paths, opt.workers, [&](std::size_t i) {
        auto rng = path_stream(opt.seed, i);
        const WalkResult w = walk_path(sched, model, dyn.a0, t, rng);
        return w.death_time ? 0.0 : 1.0;
    });
    const double n = static_cast<double>(opt.n_paths);
    const double p = pairwise_sum(alive) / n;
    return {p, std::sqrt(p * (1.0 - p) / n), opt.n_paths, opt.seed};
}

struct McQuantiles {
    std::vector<double> qs;
    std::vector<double> values;
    std::vector<double> std_errors;
    std::size_t survivors = 0;
    std::size_t n_paths = 0;
    std::uint64_t seed = 0;
};

// Empirical quantiles of A_t among survivors. The SE is half the spread between the order
// statistics one binomial standard deviation either side of rank n q.
inline McQuantiles mc_survivor_quantiles(const HazardModel& model, const BridgeDynamics& dyn, double t,
                                         const std::vector<double>& qs, const McOptions& opt = {})
{
    check_consistent(model, dyn);
    detail::check_options(opt);
    require(t > 0.0 && t < dyn.horizon, "survivor quantiles need 0 < t < T");
    require(!qs.empty(), "quantile list is empty");
    for (double q : qs)
        require(q > 0.0 && q < 1.0, "quantile levels must lie in (0,1)");
    const BridgeSchedule sched(dyn, 0.0, t, opt.dt);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const auto ages = parallel_map<double>(opt.n_paths, opt.workers, [&](std::size_t i) {
        auto rng = path_stream(opt.seed, i);
        const WalkResult w = walk_path(sched, model, dyn.a0, t, rng);
        return w.death_time ? nan : w.b_age_at_stop;
    });
    std::vector<double> alive;
    for (double a : ages)
        if (!std::isnan(a))
            alive.push_back(a);
    if (alive.size() < 100)
        throw InsufficientSample("fewer than 100 survivors at t=" + std::to_string(t));
    std::sort(alive.begin(), alive.end());
    const double n = static_cast<double>(alive.size());
    auto order_stat = [&](double rank) {
        const double r = std::clamp(rank, 0.0, n - 1.0);
        const auto lo = static_cast<std::size_t>(std::floor(r));
        const auto hi = std::min(lo + 1, alive.size() - 1);
        const double w = r - static_cast<double>(lo);
        return (1.0 - w) * alive[lo] + w * alive[hi];
    };
    McQuantiles out{qs, {}, {}, alive.size(), opt.n_paths, opt.seed};
    for (double q : qs) {
        const double rank = q * (n - 1.0);
        const double spread = std::sqrt(n * q * (1.0 - q));
        out.values.push_back(order_stat(rank));
        out.std_errors.push_back(0.5 * (order_stat(rank + spread) - order_stat(rank - spread)));
    }
    return out;
}

} // namespace bioage
