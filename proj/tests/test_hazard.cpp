#include <bioage/hazard.hpp>

#include <cmath>

#include <gtest/gtest.h>

#include "oracles.hpp"

using bioage::HazardModel;

TEST(Hazard, CanonicalPinsGiveKnownGompertzParameters)
{
    const auto h = HazardModel::from_pinned(0.005, 1.0, 60, 110);
    // published to four decimals, truncated
    EXPECT_NEAR(h.m(), 88.8174, 1e-4);
    EXPECT_NEAR(h.b(), 9.4369, 1e-4);
}

TEST(Hazard, UnitLogRatioGivesB50)
{
    const auto h = HazardModel::from_pinned(0.005, 0.005 * std::exp(1.0), 60, 110);
    EXPECT_NEAR(h.b(), 50.0, 1e-12);
}

TEST(Hazard, WidePinsMatchDirectGompertzForm)
{
    const auto h = HazardModel::from_pinned(0.0005, 0.5, 10, 110);
    EXPECT_NEAR(h.b(), 100.0 / std::log(1000.0), 1e-12);
    EXPECT_NEAR(h.b(), 14.4765, 5e-5);
    EXPECT_NEAR(oracle::gompertz(h.m(), h.b(), 10.0), 0.0005, 1e-15);
}

TEST(Hazard, PinsAndInterior)
{
    const auto h = bioage::canonical_hazard();
    EXPECT_NEAR(h.hazard(60) / 0.005 - 1.0, 0.0, 1e-12);
    EXPECT_NEAR(h.hazard(110) / 1.0 - 1.0, 0.0, 1e-12);
    EXPECT_NEAR(h.hazard(85), 0.005 * std::sqrt(200.0), 1e-12);
    EXPECT_NEAR(h.hazard(85), oracle::gompertz(h.m(), h.b(), 85), 1e-14);
}

TEST(Hazard, RoundTripThroughGompertzParameters)
{
    for (auto [l0, lT, k0, kT] : {std::tuple{0.005, 1.0, 60.0, 110.0}, std::tuple{0.01, 1.0, 60.0, 110.0},
                                  std::tuple{0.0005, 0.5, 10.0, 110.0}, std::tuple{0.002, 0.3, 65.0, 105.0}}) {
        const auto h = HazardModel::from_pinned(l0, lT, k0, kT);
        const auto back = HazardModel::from_gompertz(h.m(), h.b(), k0, kT);
        EXPECT_NEAR(back.lambda0() / l0, 1.0, 1e-12);
        EXPECT_NEAR(back.lambdaT() / lT, 1.0, 1e-12);
    }
}

TEST(Hazard, LogLinearAndIncreasing)
{
    const auto h = bioage::canonical_hazard();
    double prev = 0.0;
    for (double a = -20; a <= 200; a += 0.7) {
        EXPECT_GT(h.hazard(a), prev);
        prev = h.hazard(a);
        EXPECT_NEAR(std::log(h.hazard(a)) - std::log(h.hazard(60)), (a - 60) / h.b(), 1e-11);
    }
}

TEST(Hazard, SurvivalClosedForms)
{
    const auto h = bioage::canonical_hazard();
    EXPECT_DOUBLE_EQ(h.gompertz_survival(0.0), 1.0);
    EXPECT_NEAR(h.gompertz_survival(h.b() * std::log(2.0)), std::exp(-h.b() * h.lambda0()), 1e-14);
}

TEST(Hazard, SurvivalMatchesQuadratureOfHazard)
{
    const auto h = bioage::canonical_hazard();
    for (double s = 0.0; s <= 50.0; s += 2.5) {
        const double H = oracle::simpson([&](double u) { return h.hazard(60 + u); }, 0.0, s, 1e-14);
        EXPECT_NEAR(h.gompertz_survival(s), std::exp(-H), 1e-10) << "s=" << s;
    }
}

TEST(Hazard, ModelSurvivalStopsAgingAfterT)
{
    const auto h = bioage::canonical_hazard();
    EXPECT_DOUBLE_EQ(h.survival(20.0), h.gompertz_survival(20.0));
    EXPECT_NEAR(h.survival(53.0), h.gompertz_survival(50.0) * std::exp(-3.0 * h.lambdaT()), 1e-15);
}

TEST(Hazard, RejectsBadPins)
{
    EXPECT_THROW(HazardModel::from_pinned(0.0, 1.0, 60, 110), bioage::InvalidInput);
    EXPECT_THROW(HazardModel::from_pinned(0.01, 0.01, 60, 110), bioage::InvalidInput);
    EXPECT_THROW(HazardModel::from_pinned(0.5, 0.1, 60, 110), bioage::InvalidInput);
    EXPECT_THROW(HazardModel::from_pinned(0.005, 1.0, 110, 60), bioage::InvalidInput);
}
