#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "density.hpp"
#include "policy.hpp"
#include "rng.hpp"

namespace bioage {

struct ConsumptionCI {
    double c_age;
    double rate_lo;
    double rate_hi;
};

// Everything except sigma, which the calibration searches over.
struct CalibrationSetup {
    HazardModel model = canonical_hazard();
    BridgeDynamics dyn = dynamics_for(canonical_hazard(), 1.0, 0.3);
    Preferences prefs{};
    GridSpec grid{};
    double q_lo = 0.05;
    double q_hi = 0.95;
};

struct CalibrationFit {
    double sigma = 0.0;
    double objective = std::numeric_limits<double>::infinity();
    double b_lo = 0.0, b_hi = 0.0;         // B-age CI inverted at the first age
    double rate_lo = 0.0, rate_hi = 0.0;   // consumption CI predicted at the second age
};

struct CalibrationResult {
    CalibrationFit best;
    std::vector<CalibrationFit> evaluations;
};

// B-age at which the spending rate equals `rate`; spending increases in B-age.
inline double invert_spending(const PolicySurface& ps, double c_age, double rate)
{
    const double t = policy_time(ps, c_age);
    const Grid2D& g = ps.f.grid();
    double lo = g.a_lo(t), hi = g.a_hi(t);
    const double r_lo = spending_rate(ps, c_age, lo), r_hi = spending_rate(ps, c_age, hi);
    if (!(rate > r_lo && rate < r_hi))
        throw InvalidInput("spending rate " + std::to_string(rate) + " unreachable at age " + std::to_string(c_age));
    for (int it = 0; it < 200 && hi - lo > 1e-10; ++it) {
        const double mid = 0.5 * (lo + hi);
        (spending_rate(ps, c_age, mid) < rate ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

// Gaussian B-age start matched to the CI quantiles; zero width gives a point mass.
inline InitialSpec fitted_start(double t0, double b_lo, double b_hi, double q_lo, double q_hi)
{
    const double z_lo = normal_quantile(q_lo), z_hi = normal_quantile(q_hi);
    const double sd = std::max(b_hi - b_lo, 0.0) / (z_hi - z_lo);
    if (sd <= 1e-12)
        return DeltaStart{t0, 0.5 * (b_lo + b_hi)};
    return GaussianStart{t0, b_lo - sd * z_lo, sd};
}

// Forward from the fitted start at the first age; B-age quantiles at the second age mapped to spending.
inline std::pair<double, double> predicted_rates(const CalibrationSetup& s, const PolicySurface& ps,
                                                 const InitialSpec& start, double c_age2)
{
    const BridgeDynamics& dyn = ps.dyn;
    const double t2 = c_age2 - dyn.kappa0;
    const SubDensitySurface dens = solve_density(s.model, dyn, s.grid, start, t2);
    const QuantileCurve qc = dens.quantiles(t2, {s.q_lo, s.q_hi});
    return {spending_rate(ps, c_age2, qc.alphas[0]), spending_rate(ps, c_age2, qc.alphas[1])};
}

inline CalibrationFit evaluate_sigma(const CalibrationSetup& s, const ConsumptionCI& first, const ConsumptionCI& second,
                                     double sigma)
{
    BridgeDynamics dyn = s.dyn;
    dyn.sigma = sigma;
    const PolicySurface ps = solve_spending_policy(s.prefs, s.model, dyn, s.grid);
    CalibrationFit fit;
    fit.sigma = sigma;
    fit.b_lo = invert_spending(ps, first.c_age, first.rate_lo);
    fit.b_hi = first.rate_hi > first.rate_lo ? invert_spending(ps, first.c_age, first.rate_hi) : fit.b_lo;
    const auto start = fitted_start(first.c_age - dyn.kappa0, fit.b_lo, fit.b_hi, s.q_lo, s.q_hi);
    std::tie(fit.rate_lo, fit.rate_hi) = predicted_rates(s, ps, start, second.c_age);
    fit.objective = std::pow(fit.rate_lo - second.rate_lo, 2) + std::pow(fit.rate_hi - second.rate_hi, 2);
    return fit;
}

inline void validate_cis(const CalibrationSetup& s, const ConsumptionCI& first, const ConsumptionCI& second)
{
    for (const auto& ci : {first, second}) {
        require(ci.rate_lo > 0.0 && ci.rate_hi < 1.0 && ci.rate_lo <= ci.rate_hi,
                "consumption CI must satisfy 0 < lo <= hi < 1");
        require(ci.c_age >= s.dyn.kappa0 && ci.c_age < s.dyn.kappaT(), "CI age outside [kappa0, kappaT)");
    }
    require(first.c_age < second.c_age, "CI ages must be distinct and increasing");
    require(s.q_lo > 0.0 && s.q_lo < s.q_hi && s.q_hi < 1.0, "CI levels must satisfy 0 < q_lo < q_hi < 1");
}

// Golden-section search for sigma in [sigma_lo, sigma_hi] down to `tol`. A minimizer on an end of
// the bracket other than the physical bound sigma = 0 is reported as a bracket failure.
inline CalibrationResult calibrate_sigma(const CalibrationSetup& s, const ConsumptionCI& first,
                                         const ConsumptionCI& second, double sigma_lo, double sigma_hi,
                                         double tol = 1e-3, unsigned workers = default_workers())
{
    if (!(sigma_lo >= 0.0 && sigma_hi > sigma_lo && std::isfinite(sigma_hi)))
        throw BracketFailure("sigma bracket must satisfy 0 <= lo < hi");
    validate_cis(s, first, second);
    CalibrationResult res;
    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = sigma_lo, b = sigma_hi;
    double c = b - invphi * (b - a), d = a + invphi * (b - a);
    // ends and the first two interior points are independent solves
    const std::vector<double> first_round{a, b, c, d};
    const auto fits = parallel_map<CalibrationFit>(first_round.size(), workers,
                                                  [&](std::size_t i) { return evaluate_sigma(s, first, second, first_round[i]); });
    res.evaluations = fits;
    double fc = fits[2].objective, fd = fits[3].objective;
    while (b - a > tol) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            res.evaluations.push_back(evaluate_sigma(s, first, second, c));
            fc = res.evaluations.back().objective;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            res.evaluations.push_back(evaluate_sigma(s, first, second, d));
            fd = res.evaluations.back().objective;
        }
    }
    res.best = *std::min_element(res.evaluations.begin(), res.evaluations.end(),
                                 [](const auto& x, const auto& y) { return x.objective < y.objective; });
    if (!std::isfinite(res.best.objective))
        throw SolverFailure("calibration objective is not finite");
    const bool at_hi = res.best.sigma > sigma_hi - tol;
    const bool at_lo = sigma_lo > 0.0 && res.best.sigma < sigma_lo + tol;
    if (at_hi || at_lo)
        throw BracketFailure("objective minimized at the bracket end sigma=" + std::to_string(res.best.sigma));
    return res;
}

// Consumption CIs implied by a model with the given sigma and a Gaussian B-age population at c_age1.
inline std::pair<ConsumptionCI, ConsumptionCI> synthesize_cis(const CalibrationSetup& s, double sigma, double c_age1,
                                                              double b_mean, double b_sd, double c_age2)
{
    BridgeDynamics dyn = s.dyn;
    dyn.sigma = sigma;
    const PolicySurface ps = solve_spending_policy(s.prefs, s.model, dyn, s.grid);
    const double b_lo = b_mean + b_sd * normal_quantile(s.q_lo);
    const double b_hi = b_mean + b_sd * normal_quantile(s.q_hi);
    const ConsumptionCI first{c_age1, spending_rate(ps, c_age1, b_lo), spending_rate(ps, c_age1, b_hi)};
    const auto start = fitted_start(c_age1 - dyn.kappa0, b_lo, b_hi, s.q_lo, s.q_hi);
    const auto [lo, hi] = predicted_rates(s, ps, start, c_age2);
    return {first, {c_age2, lo, hi}};
}

} // namespace bioage
