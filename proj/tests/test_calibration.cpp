#include <bioage/calibration.hpp>

#include <cmath>

#include <gtest/gtest.h>

using namespace bioage;

namespace {

// Population at 60 centred on the diagonal with a 2-year B-age spread; CIs observed at 60 and 85.
std::pair<ConsumptionCI, ConsumptionCI> synthetic(const CalibrationSetup& s, double sigma)
{
    return synthesize_cis(s, sigma, 60.0, 60.0, 2.0, 85.0);
}

} // namespace

TEST(Calibration, FittedStartMatchesQuantiles)
{
    const auto start = std::get<GaussianStart>(fitted_start(10.0, 68.0, 72.0, 0.05, 0.95));
    EXPECT_DOUBLE_EQ(start.t0, 10.0);
    EXPECT_NEAR(start.mean, 70.0, 1e-12);
    EXPECT_NEAR(start.sd * 2.0 * normal_quantile(0.95), 4.0, 1e-12);
    EXPECT_TRUE(std::holds_alternative<DeltaStart>(fitted_start(10.0, 70.0, 70.0, 0.05, 0.95)));
}

TEST(Calibration, SpendingInversionRoundTrip)
{
    const CalibrationSetup s;
    const PolicySurface ps = solve_spending_policy(s.prefs, s.model, s.dyn, s.grid);
    for (double b : {55.0, 60.0, 66.0}) {
        const double rate = spending_rate(ps, 60.0, b);
        EXPECT_NEAR(invert_spending(ps, 60.0, rate), b, 1e-8) << b;
    }
    EXPECT_THROW(invert_spending(ps, 60.0, 1e-4), InvalidInput);
}

TEST(Calibration, RecoversSigmaFromItsOwnIntervals)
{
    const CalibrationSetup s;
    const auto [first, second] = synthetic(s, 0.3);
    EXPECT_LT(first.rate_lo, first.rate_hi);
    const CalibrationResult res = calibrate_sigma(s, first, second, 0.0, 1.0);
    EXPECT_GE(res.best.sigma, 0.28);
    EXPECT_LE(res.best.sigma, 0.32);
    EXPECT_LT(res.best.objective, 1e-10);
    EXPECT_NEAR(res.best.rate_lo, second.rate_lo, 1e-4);
    EXPECT_NEAR(res.best.rate_hi, second.rate_hi, 1e-4);
}

TEST(Calibration, DeterministicAgeingPreferredOnItsOwnData)
{
    const CalibrationSetup s;
    const auto [first, second] = synthetic(s, 0.0);
    const CalibrationResult res = calibrate_sigma(s, first, second, 0.0, 1.0);
    EXPECT_LT(res.best.sigma, 0.05);
    const double at_zero = evaluate_sigma(s, first, second, 0.0).objective;
    const double at_canonical = evaluate_sigma(s, first, second, 0.3).objective;
    EXPECT_LT(at_zero, at_canonical);
}

TEST(Calibration, ZeroWidthStartForcesVolatility)
{
    const CalibrationSetup s;
    const auto [first, second] = synthetic(s, 0.3);
    const double mid = 0.5 * (first.rate_lo + first.rate_hi);
    const ConsumptionCI point{60.0, mid, mid};
    const CalibrationResult res = calibrate_sigma(s, point, second, 0.0, 1.0);
    EXPECT_GT(res.best.sigma, 0.1);
    EXPECT_LT(res.best.objective, evaluate_sigma(s, point, second, 0.0).objective);
}

TEST(Calibration, MinimizerOutsideBracketIsReported)
{
    const CalibrationSetup s;
    const auto [first, second] = synthetic(s, 0.3);
    EXPECT_THROW(calibrate_sigma(s, first, second, 0.0, 0.1, 1e-2), BracketFailure);
    EXPECT_THROW(calibrate_sigma(s, first, second, 0.5, 0.4), BracketFailure);
    EXPECT_THROW(calibrate_sigma(s, first, second, -0.1, 0.4), BracketFailure);
}

TEST(Calibration, RejectsMalformedIntervals)
{
    const CalibrationSetup s;
    const ConsumptionCI ok1{60.0, 0.05, 0.06}, ok2{85.0, 0.08, 0.10};
    EXPECT_NO_THROW(validate_cis(s, ok1, ok2));
    EXPECT_THROW(validate_cis(s, {60.0, 0.06, 0.05}, ok2), InvalidInput);
    EXPECT_THROW(validate_cis(s, {60.0, 0.0, 0.05}, ok2), InvalidInput);
    EXPECT_THROW(validate_cis(s, ok1, {85.0, 0.08, 1.0}), InvalidInput);
    EXPECT_THROW(validate_cis(s, ok2, ok1), InvalidInput);
    EXPECT_THROW(validate_cis(s, ok1, {115.0, 0.08, 0.1}), InvalidInput);
}
