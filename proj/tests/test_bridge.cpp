#include <bioage/bridge.hpp>
#include <bioage/rng.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace bioage;

namespace {

BridgeDynamics canonical(double xi = 1.0, double sigma = 0.3) { return dynamics_for(canonical_hazard(), xi, sigma); }

// sigma^2 integral_s^t ((T-t)/(T-q))^{2 xi} dq
double variance_by_quadrature(double xi, double sigma, double T, double s, double t)
{
    return sigma * sigma * oracle::simpson([&](double q) { return std::pow((T - t) / (T - q), 2.0 * xi); }, s, t, 1e-14);
}

} // namespace

TEST(BridgeMoments, ZeroStartHasZeroMean)
{
    for (double xi : {0.5, 1.0, 2.0})
        for (auto [s, t] : {std::pair{0.0, 25.0}, std::pair{10.0, 49.0}, std::pair{3.0, 4.0}})
            EXPECT_DOUBLE_EQ(conditional_moments(canonical(xi), s, t, 0.0).mean, 0.0);
}

TEST(BridgeMoments, VarianceXiOne)
{
    const Moments m = conditional_moments(canonical(1.0), 0.0, 25.0, 0.0);
    EXPECT_NEAR(m.variance, 1.125, 1e-12);
    EXPECT_NEAR(m.variance, variance_by_quadrature(1.0, 0.3, 50, 0, 25), 1e-10);
}

TEST(BridgeMoments, VarianceXiHalfUsesLogBranch)
{
    const Moments m = conditional_moments(canonical(0.5), 0.0, 25.0, 0.0);
    EXPECT_NEAR(m.variance, 0.09 * 25 * std::log(2.0), 1e-12);
    EXPECT_NEAR(m.variance, 1.5596, 5e-5);
    EXPECT_NEAR(m.variance, variance_by_quadrature(0.5, 0.3, 50, 0, 25), 1e-10);
    // both sides of the series switch
    for (double d : {1e-7, 5e-7, 2e-6, 1e-5})
        for (double xi : {0.5 + d, 0.5 - d})
            EXPECT_NEAR(conditional_moments(canonical(xi), 0.0, 25.0, 0.0).variance,
                        variance_by_quadrature(xi, 0.3, 50, 0, 25), 1e-10);
}

TEST(BridgeMoments, GeneralXiMatchesQuadrature)
{
    for (double xi : {0.3, 0.75, 2.0, 4.0})
        for (auto [s, t] : {std::pair{0.0, 25.0}, std::pair{12.0, 47.5}}) {
            const Moments m = conditional_moments(canonical(xi), s, t, 1.5);
            EXPECT_NEAR(m.variance, variance_by_quadrature(xi, 0.3, 50, s, t), 1e-10);
            EXPECT_NEAR(m.mean, 1.5 * std::pow((50 - t) / (50 - s), xi), 1e-14);
        }
}

TEST(BridgeSample, ZeroSigmaIsDeterministic)
{
    auto rng = path_stream(1, 0);
    const auto dyn = canonical(1.0, 0.0);
    EXPECT_DOUBLE_EQ(sample_transition(dyn, 0.0, 25.0, 4.0, rng), 2.0);
}

TEST(BridgeSample, SampleVarianceMatchesMoments)
{
    const auto dyn = canonical();
    auto rng = path_stream(7, 0);
    const std::size_t n = 1000000;
    std::vector<double> xs(n);
    for (auto& x : xs)
        x = sample_transition(dyn, 0.0, 25.0, 0.0, rng);
    const double mean = pairwise_sum(xs) / n;
    std::vector<double> sq(n);
    for (std::size_t i = 0; i < n; ++i)
        sq[i] = (xs[i] - mean) * (xs[i] - mean);
    const double var = pairwise_sum(sq) / (n - 1);
    const double se = 1.125 * std::sqrt(2.0 / (n - 1));
    EXPECT_LT(std::abs(var - 1.125), 3.0 * se);
}

TEST(BridgeSample, PinsNearT)
{
    const auto dyn = canonical();
    auto rng = path_stream(3, 0);
    for (int i = 0; i < 100; ++i)
        EXPECT_LT(std::abs(sample_transition(dyn, 10.0, 50.0 - 1e-9, 2.0, rng)), 1e-3);
}

TEST(BridgeSample, KolmogorovSmirnovAgainstGaussian)
{
    const auto dyn = canonical();
    const Moments m = conditional_moments(dyn, 0.0, 25.0, 0.0);
    const std::size_t n = 100000;
    std::vector<double> a(n);
    auto rng = path_stream(11, 0);
    for (std::size_t i = 0; i < n; ++i) {
        a[i] = dyn.kappa(25.0) + sample_transition(dyn, 0.0, 25.0, 0.0, rng);
    }
    std::sort(a.begin(), a.end());
    double D = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double F = 0.5 * std::erfc(-(a[i] - 85.0) / std::sqrt(2.0 * m.variance));
        D = std::max({D, F - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - F});
    }
    EXPECT_LT(D, 1.628 / std::sqrt(static_cast<double>(n)));
}

TEST(BridgePath, ZeroSigmaFollowsDiagonal)
{
    for (double xi : {0.5, 1.0, 3.0}) {
        const auto dyn = canonical(xi, 0.0);
        auto rng = path_stream(5, 0);
        const auto p = simulate_path(dyn, HazardModel::from_pinned(1e-14, 1e-13, 60, 110), 0.25, 50.0, rng);
        ASSERT_FALSE(p.death_time);
        for (std::size_t k = 0; k < p.times.size(); ++k)
            EXPECT_NEAR(p.b_ages[k], dyn.kappa(p.times[k]), 1e-12);
    }
}

TEST(BridgePath, NegligibleHazardMeansNoDeaths)
{
    const auto model = HazardModel::from_pinned(1e-12, 2e-12, 60, 110);
    const auto dyn = canonical();
    int deaths = 0;
    for (std::size_t i = 0; i < 10000; ++i) {
        auto rng = path_stream(9, i);
        deaths += simulate_path(dyn, model, 0.5, 50.0, rng).death_time.has_value();
    }
    EXPECT_EQ(deaths, 0);
}

TEST(BridgePath, PinnedAtTerminalTime)
{
    const auto model = HazardModel::from_pinned(1e-12, 2e-12, 60, 110);
    auto dyn = canonical(1.0, 0.9);
    dyn.a0 = 66.0;
    double worst = 0.0, max_mid = 0.0;
    for (std::size_t i = 0; i < 2000; ++i) {
        auto rng = path_stream(13, i);
        const auto p = simulate_path(dyn, model, 1.0 / 12, 50.0, rng);
        ASSERT_NEAR(p.times.back(), 50.0, 1e-12);
        worst = std::max(worst, std::abs(p.b_ages.back() - dyn.kappaT()));
        max_mid = std::max(max_mid, std::abs(p.b_ages[p.b_ages.size() / 2] - dyn.kappa(p.times[p.b_ages.size() / 2])));
    }
    EXPECT_LE(worst, 1e-9);
    EXPECT_GT(max_mid, 1.0);
}

TEST(BridgePath, MeanDeathAgeMatchesLifeTable)
{
    // 24.95 years remaining at B = C = 60 with 3-SE gate
    const auto model = canonical_hazard();
    const auto dyn = canonical();
    const std::size_t n = 20000;
    std::vector<double> age(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto rng = path_stream(17, i);
        const auto p = simulate_path(dyn, model, 1.0 / 48, 1e4, rng);
        age[i] = 60.0 + *p.death_time;
    }
    const double mean = pairwise_sum(age) / n;
    double ss = 0.0;
    for (double x : age)
        ss += (x - mean) * (x - mean);
    const double se = std::sqrt(ss / (n - 1) / n);
    EXPECT_LT(std::abs(mean - (60.0 + 24.95)), 3.0 * se) << mean << " se " << se;
}

TEST(BridgePath, MartingaleOfScaledBridge)
{
    // M_t = (T-t)^{-xi} Y_t has zero-mean increments
    auto dyn = canonical(1.0, 0.3);
    dyn.a0 = 62.0;
    const auto model = HazardModel::from_pinned(1e-12, 2e-12, 60, 110);
    const BridgeSchedule sched(dyn, 0.0, 25.0, 1.0 / 48);
    const std::size_t n = 20000;
    const double m0 = 2.0 / 50.0;
    std::vector<double> inc(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto rng = path_stream(19, i);
        const auto w = walk_path(sched, model, dyn.a0, 25.0, rng);
        inc[i] = (w.b_age_at_stop - 85.0) / 25.0 - m0;
    }
    const double mean = pairwise_sum(inc) / n;
    double ss = 0.0;
    for (double x : inc)
        ss += (x - mean) * (x - mean);
    EXPECT_LT(std::abs(mean), 3.0 * std::sqrt(ss / (n - 1) / n));
}

TEST(BridgePath, SurvivorsAreYoungerThanCalendar)
{
    const auto model = canonical_hazard();
    const auto dyn = canonical();
    const BridgeSchedule sched(dyn, 0.0, 25.0, 1.0 / 48);
    std::vector<double> alive;
    for (std::size_t i = 0; i < 20000; ++i) {
        auto rng = path_stream(23, i);
        const auto w = walk_path(sched, model, dyn.a0, 25.0, rng);
        if (!w.death_time)
            alive.push_back(w.b_age_at_stop);
    }
    const double mean = pairwise_sum(alive) / alive.size();
    double ss = 0.0;
    for (double x : alive)
        ss += (x - mean) * (x - mean);
    const double se = std::sqrt(ss / (alive.size() - 1) / alive.size());
    EXPECT_LT(mean + 3.0 * se, 85.0);
}

TEST(BridgePath, SameStreamSamePath)
{
    const auto dyn = canonical();
    auto r1 = path_stream(99, 42), r2 = path_stream(99, 42);
    const auto p1 = simulate_path(dyn, canonical_hazard(), 0.1, 50, r1);
    const auto p2 = simulate_path(dyn, canonical_hazard(), 0.1, 50, r2);
    EXPECT_EQ(p1.b_ages, p2.b_ages);
    EXPECT_EQ(p1.death_time, p2.death_time);
}

TEST(BridgeDynamicsTest, Validation)
{
    EXPECT_THROW((BridgeDynamics{0.0, 0.3, 60, 50, 60}.validate()), InvalidInput);
    EXPECT_THROW((BridgeDynamics{1.0, -0.1, 60, 50, 60}.validate()), InvalidInput);
    EXPECT_THROW((BridgeDynamics{1.0, 0.3, 60, 0, 60}.validate()), InvalidInput);
    EXPECT_THROW(check_consistent(canonical_hazard(), BridgeDynamics{1.0, 0.3, 60, 40, 60}), InvalidInput);
    EXPECT_THROW(conditional_moments(canonical(), 0.0, 50.0, 0.0), InvalidInput);
}
