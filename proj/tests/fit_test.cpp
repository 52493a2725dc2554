#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "homtilt/estimation.hpp"
#include "homtilt/fit.hpp"
#include "homtilt/noise.hpp"

using namespace homtilt;
using namespace homtilt::fit;

namespace
{
const OpticalParams defaults{};
const double s = defaults.tilt_width();

std::vector<DataPoint> tilt_grid(std::size_t steps)
{
    std::vector<DataPoint> data;
    for (std::size_t i = 0; i < steps; ++i)
    {
        const double theta = -4.0 * s + 8.0 * s * static_cast<double>(i) / static_cast<double>(steps - 1);
        data.push_back({theta, 0.0, 1.0});
    }
    return data;
}

// One Poisson tilt scan at the given total rate and dwell, normalized by the expected peak total.
std::vector<DataPoint> noisy_scan(std::uint64_t seed, double rate, double dwell)
{
    auto data = tilt_grid(41);
    const double full = rate * dwell;
    for (std::size_t i = 0; i < data.size(); ++i)
    {
        const auto p = hom::bucket_probabilities_zero_dz(data[i].x, defaults);
        CounterRng rng(seed, Stream::ScanCounts, i);
        const auto plus = static_cast<double>(noise::poisson_counts(full * p.plus, rng));
        const auto minus = static_cast<double>(noise::poisson_counts(full * p.minus, rng));
        data[i].y = (plus - minus) / full;
        data[i].y_err = std::max(1.0, std::sqrt(plus + minus)) / full;
    }
    return data;
}
} // namespace

TEST(LeastSquares, RecoversLine)
{
    std::vector<DataPoint> data;
    for (int i = 0; i < 10; ++i)
        data.push_back({double(i), 3.0 - 0.5 * i, 0.1});
    const auto line = [](double x, std::span<const double> p) { return p[0] + p[1] * x; };
    const auto fit = least_squares(line, data, {0.0, 0.0}, {"a", "b"});
    ASSERT_TRUE(fit.converged) << to_string(fit.status);
    EXPECT_NEAR(fit.value("a"), 3.0, 1e-10);
    EXPECT_NEAR(fit.value("b"), -0.5, 1e-10);
    EXPECT_LT(fit.residual_norm, 1e-8);
    // exact linear model: std errors equal the analytic covariance
    double sx = 0, sxx = 0;
    for (const auto& d : data)
        sx += d.x, sxx += d.x * d.x;
    const double w = 1.0 / 0.01, det = w * w * (10 * sxx - sx * sx);
    EXPECT_NEAR(fit.error("b"), std::sqrt(w * 10 / det), 1e-8);
    EXPECT_THROW(fit.value("c"), DomainError);
}

TEST(LeastSquares, InputValidation)
{
    const auto line = [](double x, std::span<const double> p) { return p[0] + p[1] * x; };
    std::vector<DataPoint> one{{0.0, 1.0, 1.0}};
    EXPECT_THROW(least_squares(line, one, {0.0, 0.0}, {"a", "b"}), DomainError);
    std::vector<DataPoint> bad{{0.0, 1.0, 0.0}, {1.0, 1.0, 1.0}, {2.0, 1.0, 1.0}};
    EXPECT_THROW(least_squares(line, bad, {0.0, 0.0}, {"a", "b"}), DomainError);
    EXPECT_THROW(least_squares(line, bad, {0.0, 0.0}, {"a"}), DomainError);
}

TEST(GaussianFit, NoiseFreeRecovery)
{
    auto data = tilt_grid(41);
    for (auto& d : data)
        d.y = std::exp(-d.x * d.x / (2 * s * s)), d.y_err = 0.01;
    const auto fit = fit_gaussian_dip(data, guess_gaussian(data));
    ASSERT_TRUE(fit.converged) << to_string(fit.status);
    EXPECT_NEAR(fit.value("amplitude"), 1.0, 1e-8);
    EXPECT_NEAR(fit.value("sigma") / s, 1.0, 1e-8);
    EXPECT_NEAR(fit.value("center"), 0.0, 1e-8 * s);
    EXPECT_NEAR(fit.value("offset"), 0.0, 1e-8);
    for (double e : fit.std_errors)
        EXPECT_GE(e, 0.0);
}

TEST(GaussianFit, ModelCurveRecovery)
{
    auto data = tilt_grid(41);
    for (auto& d : data)
        d.y = estimation::delta_p_zero_dz(d.x, defaults), d.y_err = 0.05;
    const auto fit = fit_gaussian_dip(data, {0.8, 0.1 * s, 1.5 * s, 0.05});
    ASSERT_TRUE(fit.converged) << to_string(fit.status);
    EXPECT_NEAR(fit.value("sigma") / 1.2892e-4, 1.0, 1e-4);
    EXPECT_NEAR(fit.value("sigma") / s, 1.0, 1e-8);
}

TEST(GaussianFit, PoissonScanAtPaperRates)
{
    std::vector<double> sigmas, centers;
    for (std::uint64_t seed = 1; seed <= 100; ++seed)
    {
        const auto data = noisy_scan(seed, 25.0, 10.0);
        const auto fit = fit_gaussian_dip(data, guess_gaussian(data));
        ASSERT_TRUE(fit.converged) << "seed " << seed << ": " << to_string(fit.status) << " it " << fit.iterations << " g " << fit.gradient_measure;
        sigmas.push_back(fit.value("sigma"));
        centers.push_back(fit.value("center"));
    }
    const double m = estimation::mean(sigmas);
    const double spread = estimation::sample_std(sigmas);
    EXPECT_NEAR(m / s, 1.0, 0.05);
    EXPECT_LT(std::abs(m - s), 3.0 * spread / std::sqrt(100.0));
    EXPECT_LT(std::abs(estimation::mean(centers)), 3.0 * estimation::sample_std(centers) / std::sqrt(100.0));
}

TEST(GaussianFit, DegenerateFlatData)
{
    auto data = tilt_grid(21);
    for (auto& d : data)
        d.y = 0.3, d.y_err = 0.01;
    const auto fit = fit_gaussian_dip(data, guess_gaussian(data));
    EXPECT_FALSE(fit.converged);
    EXPECT_NE(fit.status, FitStatus::Converged);
}

TEST(GaussianFit, TooFewPoints)
{
    std::vector<DataPoint> data{{0, 1, 1}, {1, 1, 1}, {2, 1, 1}, {3, 1, 1}};
    EXPECT_THROW(fit_gaussian_dip(data, {}), DomainError);
}

TEST(DipFit, NoiseFreeRecovery)
{
    const double dl = 130 * defaults.lambda;
    std::vector<DataPoint> data;
    for (int i = -30; i <= 30; ++i)
    {
        const double delta = 2e-6 + i * dl / 60.0;
        data.push_back({delta, hom::dip_counts(delta - 2e-6, 250.0, 0.96, dl, Setting::Same), 10.0});
    }
    const auto fit = fit_hom_dip(data, {240.0, 0.8, 1.3 * dl, 0.0}, Setting::Same);
    ASSERT_TRUE(fit.converged) << to_string(fit.status);
    EXPECT_NEAR(fit.value("visibility"), 0.96, 1e-8);
    EXPECT_NEAR(fit.value("coherence_length") / dl, 1.0, 1e-8);
    EXPECT_NEAR(fit.value("center"), 2e-6, 1e-8 * dl);
    EXPECT_NEAR(fit.value("amplitude"), 250.0, 250.0 * 1e-8);
    EXPECT_LT(fit.residual_norm, 1e-10);
}

TEST(DipFit, PeakSetting)
{
    const double dl = 1.053e-4;
    std::vector<DataPoint> data;
    for (int i = -25; i <= 25; ++i)
    {
        const double delta = i * dl / 40.0;
        data.push_back({delta, hom::dip_counts(delta, 100.0, 0.5, dl, Setting::Different), 5.0});
    }
    const auto fit = fit_hom_dip(data, {90.0, 0.3, 0.8 * dl, dl / 100}, Setting::Different);
    ASSERT_TRUE(fit.converged) << to_string(fit.status);
    EXPECT_NEAR(fit.value("visibility"), 0.5, 1e-8);
    EXPECT_NEAR(fit.value("coherence_length") / dl, 1.0, 1e-8);
}

TEST(DipFit, GuessFromBaselineAndArea)
{
    const double dl = 1.053e-4;
    std::vector<DataPoint> data;
    for (int i = -40; i <= 40; ++i)
    {
        const double delta = 1e-6 + i * 5e-6;
        data.push_back({delta, hom::dip_counts(delta - 1e-6, 125.0, 0.96, dl, Setting::Same), 10.0});
    }
    const auto guess = guess_hom_dip(data, Setting::Same);
    EXPECT_NEAR(guess.amplitude, 125.0, 1e-3);
    EXPECT_NEAR(guess.visibility, 0.96, 1e-3);
    EXPECT_NEAR(guess.coherence_length / dl, 1.0, 0.01);
    EXPECT_NEAR(guess.center, 1e-6, 1e-12);
}
