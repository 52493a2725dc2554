#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "homtilt/estimation.hpp"
#include "homtilt/noise.hpp"

using namespace homtilt;
using namespace homtilt::noise;

namespace
{
const OpticalParams defaults{};
const double s = defaults.tilt_width();

std::vector<double> uniform_grid(std::size_t n, double dt)
{
    std::vector<double> t(n);
    for (std::size_t i = 0; i < n; ++i)
        t[i] = dt * static_cast<double>(i);
    return t;
}

std::vector<double> totals(const CountSeries& series)
{
    std::vector<double> out;
    for (const auto& row : series)
        out.push_back(static_cast<double>(row.total()));
    return out;
}
} // namespace

TEST(CounterRng, DeterministicAndKeyed)
{
    CounterRng a(1, Stream::HomCounts, 5), b(1, Stream::HomCounts, 5), c(1, Stream::HomCounts, 6), d(2, Stream::HomCounts, 5);
    const auto first = a();
    EXPECT_EQ(first, b());
    EXPECT_NE(first, c());
    EXPECT_NE(first, d());
    EXPECT_NE(a(), first);
}

TEST(OplPath, Constant)
{
    const auto path = sample_opl_path(opl::Constant{0.0}, uniform_grid(100, 1.0), 3);
    for (double z : path)
        EXPECT_EQ(z, 0.0);
}

TEST(OplPath, SinusoidQuarterPeriod)
{
    const double a = 2e-7, period = 7200.0;
    const auto path = sample_opl_path(opl::Sinusoidal{a, period, 0.0}, {0.0, period / 4}, 1);
    EXPECT_EQ(path[0], 0.0);
    EXPECT_DOUBLE_EQ(path[1], a);
}

TEST(OplPath, RandomWalkIncrementVariance)
{
    const double sigma = 1e-8;
    const auto path = sample_opl_path(opl::RandomWalk{sigma, 0.0}, uniform_grid(100001, 1.0), 77);
    std::vector<double> inc;
    for (std::size_t i = 1; i < path.size(); ++i)
        inc.push_back(path[i] - path[i - 1]);
    const double sd = estimation::sample_std(inc);
    EXPECT_NEAR(sd * sd / (sigma * sigma), 1.0, 0.05);
}

TEST(OplPath, RandomWalkReflectsAtBounds)
{
    const double bound = defaults.lambda / 2;
    const auto path = sample_opl_path(opl::RandomWalk{bound / 3, bound}, uniform_grid(20000, 1.0), 5);
    double reach = 0.0;
    for (double z : path)
    {
        EXPECT_LE(std::abs(z), bound);
        reach = std::max(reach, std::abs(z));
    }
    EXPECT_GT(reach, 0.9 * bound);
}

TEST(OplPath, PiecewiseDrift)
{
    const opl::PiecewiseDrift drift{{{10.0, 0.0}, {20.0, 1e-6}, {30.0, -1e-6}}};
    const auto path = sample_opl_path(drift, {0.0, 15.0, 20.0, 25.0, 40.0}, 0);
    EXPECT_EQ(path[0], 0.0);
    EXPECT_DOUBLE_EQ(path[1], 0.5e-6);
    EXPECT_DOUBLE_EQ(path[2], 1e-6);
    EXPECT_NEAR(path[3], 0.0, 1e-21);
    EXPECT_EQ(path[4], -1e-6);
}

TEST(OplPath, JitterStatistics)
{
    const auto path = sample_opl_path(opl::GaussianJitter{3e-8}, uniform_grid(50000, 1.0), 9);
    EXPECT_NEAR(estimation::mean(path), 0.0, 5 * 3e-8 / std::sqrt(50000.0));
    EXPECT_NEAR(estimation::sample_std(path) / 3e-8, 1.0, 0.02);
}

TEST(OplPath, Determinism)
{
    const auto grid = uniform_grid(500, 2.0);
    EXPECT_EQ(sample_opl_path(opl::RandomWalk{1e-8, 2e-7}, grid, 12), sample_opl_path(opl::RandomWalk{1e-8, 2e-7}, grid, 12));
    EXPECT_NE(sample_opl_path(opl::RandomWalk{1e-8, 2e-7}, grid, 12), sample_opl_path(opl::RandomWalk{1e-8, 2e-7}, grid, 13));
}

TEST(OplPath, InvalidInputs)
{
    EXPECT_THROW(sample_opl_path(opl::Sinusoidal{1e-7, 0.0, 0.0}, {0.0}, 1), DomainError);
    EXPECT_THROW(sample_opl_path(opl::GaussianJitter{-1.0}, {0.0}, 1), DomainError);
    EXPECT_THROW(sample_opl_path(opl::PiecewiseDrift{}, {0.0}, 1), DomainError);
    EXPECT_THROW(sample_opl_path(opl::Constant{0.0}, {1.0, 1.0}, 1), DomainError);
}

TEST(PoissonCounts, ZeroMean)
{
    CounterRng rng(1, Stream::HomCounts, 0);
    for (int i = 0; i < 100; ++i)
        EXPECT_EQ(poisson_counts(0.0, rng), 0u);
    EXPECT_THROW(poisson_counts(-1.0, rng), DomainError);
}

TEST(PoissonCounts, MomentsAtTwoHundred)
{
    std::vector<double> draws;
    for (std::size_t i = 0; i < 100000; ++i)
    {
        CounterRng rng(2024, Stream::HomCounts, i);
        draws.push_back(static_cast<double>(poisson_counts(200.0, rng)));
    }
    const double m = estimation::mean(draws);
    const double sd = estimation::sample_std(draws);
    EXPECT_NEAR(m / 200.0, 1.0, 0.01);
    EXPECT_NEAR(sd * sd / 200.0, 1.0, 0.03);
    EXPECT_NEAR(sd / m, 7.1e-2, 0.1 * 7.1e-2);
}

TEST(HomSeries, BinsAndNoiseScale)
{
    const CountingConfig counting{};
    const auto series = simulate_hom_series(s, opl::Constant{0.0}, counting, defaults, 8 * 3600.0, 1);
    ASSERT_EQ(series.size(), 3600u);
    for (std::size_t i = 1; i < series.size(); ++i)
        EXPECT_GT(series[i].t, series[i - 1].t);
    const auto tot = totals(series);
    EXPECT_NEAR(estimation::sample_std(tot) / estimation::mean(tot), 1.0 / std::sqrt(200.0), 0.1 / std::sqrt(200.0));
}

TEST(HomSeries, NoiseFreeDeltaPIsConstant)
{
    const CountingConfig counting{};
    const auto series = simulate_hom_series(s, opl::Constant{0.0}, counting, defaults, 3600.0, 4);
    const Calibration cal = Calibration::expected_from(
        simulate_hom_on_path(0.0, {4.0}, {0.0}, counting, defaults, 0, 1, Stream::Calibration));
    EXPECT_EQ(cal.total(), counting.pair_rate * counting.bin_seconds);
    EXPECT_EQ(cal.max_plus, counting.pair_rate * counting.bin_seconds);
    for (double dp : expected_normalized_difference(series, cal))
        EXPECT_NEAR(dp, std::exp(-0.5), 1e-15);
}

TEST(HomSeries, BoundedWalkLeavesExpectedSignalUnchanged)
{
    const CountingConfig counting{};
    const double bound = defaults.lambda / 2;
    const auto series = simulate_hom_series(s, opl::RandomWalk{bound / 4, bound}, counting, defaults, 8 * 3600.0, 21);
    const Calibration cal{counting.pair_rate * counting.bin_seconds, 0.0};
    const auto dp = expected_normalized_difference(series, cal);
    EXPECT_LT(estimation::sample_std(dp), 1e-6);
}

TEST(HomSeries, ExpectedCountsMatchReplicateAverage)
{
    CountingConfig counting{};
    counting.efficiency_eta = 0.7;
    const std::vector<double> dz(20000, 0.0);
    std::vector<double> t(dz.size());
    for (std::size_t i = 0; i < t.size(); ++i)
        t[i] = static_cast<double>(i);
    const auto series = simulate_hom_on_path(0.6 * s, t, dz, counting, defaults, 8);
    double sum_plus = 0.0, sum_minus = 0.0;
    for (const auto& row : series)
        sum_plus += static_cast<double>(row.plus), sum_minus += static_cast<double>(row.minus);
    const auto p = hom::bucket_probabilities(0.6 * s, hom::PathConfig{}, defaults);
    const double n = static_cast<double>(series.size());
    const double mean_plus = counting.pair_rate * counting.bin_seconds * p.plus * 0.49;
    const double mean_minus = counting.pair_rate * counting.bin_seconds * p.minus * 0.49;
    EXPECT_DOUBLE_EQ(series[0].expected_plus, mean_plus);
    EXPECT_NEAR(sum_plus / n, mean_plus, 3.0 * std::sqrt(mean_plus / n));
    EXPECT_NEAR(sum_minus / n, mean_minus, 3.0 * std::sqrt(mean_minus / n));
}

TEST(SagnacSeries, ShotNoiseScale)
{
    const CountingConfig counting{};
    const auto model = singlephoton::SagnacModel::matched_to(defaults);
    const auto series = simulate_sagnac_series(s, opl::Constant{0.0}, counting, model, 8 * 3600.0, 2);
    const auto tot = totals(series);
    const double rel = estimation::sample_std(tot) / estimation::mean(tot);
    EXPECT_NEAR(rel, 1.25e-3, 0.1 * 1.25e-3);
}

TEST(SagnacSeries, SinusoidalDriftSwingsSignal)
{
    const CountingConfig counting{};
    const auto model = singlephoton::SagnacModel::matched_to(defaults);
    const auto series =
        simulate_sagnac_series(s, opl::Sinusoidal{defaults.lambda / 4, 7200.0, 0.0}, counting, model, 8 * 3600.0, 2);
    const Calibration cal = Calibration::expected_from(simulate_sagnac_on_path(0.0, {4.0}, {0.0}, counting, model, 0));
    const auto dp = expected_normalized_difference(series, cal);
    const auto [lo, hi] = std::minmax_element(dp.begin(), dp.end());
    EXPECT_GT(*hi - *lo, 0.5);
}

TEST(Efficiency, SinglesOutnumberPairsByOneOverEta)
{
    CountingConfig counting{};
    counting.efficiency_eta = 0.4;
    counting.single_rate = counting.pair_rate; // equal photon budget
    const auto model = singlephoton::SagnacModel::matched_to(defaults);
    const auto hom_row = simulate_hom_on_path(s, {4.0}, {0.0}, counting, defaults, 1)[0];
    const auto sag_row = simulate_sagnac_on_path(s, {4.0}, {0.0}, counting, model, 1)[0];
    const double hom_events = hom_row.expected_plus + hom_row.expected_minus;
    const double sag_events = sag_row.expected_plus + sag_row.expected_minus;
    EXPECT_NEAR(sag_events / hom_events, 1.0 / counting.efficiency_eta, 1e-12);
}

TEST(Simulation, IndependentOfThreadCount)
{
    const CountingConfig counting{};
    const auto grid = bin_centers(3600.0, counting.bin_seconds);
    const auto path = sample_opl_path(opl::GaussianJitter{1e-8}, grid, 5);
    const auto one = simulate_hom_on_path(s, grid, path, counting, defaults, 99, 1);
    const auto four = simulate_hom_on_path(s, grid, path, counting, defaults, 99, 4);
    ASSERT_EQ(one.size(), four.size());
    for (std::size_t i = 0; i < one.size(); ++i)
    {
        EXPECT_EQ(one[i].plus, four[i].plus);
        EXPECT_EQ(one[i].minus, four[i].minus);
    }
}

TEST(CountingConfig, Validation)
{
    CountingConfig c{};
    c.efficiency_eta = 1.2;
    EXPECT_THROW(c.validate(), DomainError);
    c = {};
    c.pair_rate = -1.0;
    EXPECT_THROW(c.validate(), DomainError);
    c = {};
    c.bin_seconds = 0.0;
    EXPECT_THROW(c.validate(), DomainError);
}
