#ifndef HOMTILT_ESTIMATION_HPP
#define HOMTILT_ESTIMATION_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include "errors.hpp"
#include "hom.hpp"
#include "optics.hpp"
#include "parallel.hpp"
#include "rng.hpp"

// Precision bounds, tilt estimators and time-series post-processing.
namespace homtilt::estimation
{

// Lower bound 1 / (sqrt(nu) 4 k sigma) on the tilt standard deviation from nu photons.
inline double cramer_rao_bound(double nu, double k, double sigma)
{
    detail::require_finite(nu, "nu");
    if (nu < 1.0)
        throw DomainError("the photon number nu must be at least 1");
    detail::require_positive(k, "k");
    detail::require_positive(sigma, "sigma");
    return 1.0 / (std::sqrt(nu) * 4.0 * k * sigma);
}

// sigma in the bound is the standard deviation of the probe intensity, half
// the amplitude width w_p. With it the bound equals 1/(2 k w_p) for nu = 1.
inline double beam_sigma(const OpticalParams& params)
{
    return 0.5 * params.w_p;
}

// Fisher information of a two-outcome measurement with P(plus) = p(theta),
// derivative by central differences of step h.
inline double fisher_information_binary(const std::function<double(double)>& p_of_theta, double theta, double h)
{
    detail::require_finite(theta, "theta");
    detail::require_positive(h, "finite-difference step");
    const double p = p_of_theta(theta);
    if (!(p > 0.0 && p < 1.0))
        throw NumericError("Fisher information is singular at outcome probability 0 or 1");
    const double dp = (p_of_theta(theta + h) - p_of_theta(theta - h)) / (2.0 * h);
    return dp * dp / p + dp * dp / (1.0 - p);
}

// Delta P(theta) = exp(-c theta^2) with c = 2 (k^2 w_p^2 + z_sM^2 / w_p^2), the Delta z = 0 signal.
inline double zero_dz_rate(const OpticalParams& params)
{
    const double k = params.k();
    const double w_p = params.w_p;
    return 2.0 * (k * k * w_p * w_p + params.z_sM * params.z_sM / (w_p * w_p));
}

inline double delta_p_zero_dz(double theta, const OpticalParams& params)
{
    return hom::bucket_probabilities_zero_dz(theta, params).difference();
}

// d Delta P / d theta, analytic.
inline double delta_p_slope_zero_dz(double theta, const OpticalParams& params)
{
    check_tilt(theta, params);
    const double c = zero_dz_rate(params);
    return -2.0 * c * theta * std::exp(-c * theta * theta);
}

// d P+ / d theta, analytic.
inline double p_plus_slope_zero_dz(double theta, const OpticalParams& params)
{
    return 0.5 * delta_p_slope_zero_dz(theta, params);
}

// Tilt of steepest Delta P, 1/sqrt(2c); equals 1/(2 k w_p) when z_sM = 0.
inline double max_sensitivity_tilt(const OpticalParams& params)
{
    return 1.0 / std::sqrt(2.0 * zero_dz_rate(params));
}

// Closed-form Fisher information per pair for the Delta z = 0 model.
inline double fisher_information_zero_dz(double theta, const OpticalParams& params)
{
    check_tilt(theta, params);
    const double c = zero_dz_rate(params);
    if (theta == 0.0)
        return 2.0 * c;
    const double e = std::exp(-c * theta * theta);
    return 4.0 * c * c * theta * theta * e * e / ((1.0 - e) * (1.0 + e));
}

// Linearized inversion around an operating point:
// theta = theta_ref + (dp_obs - dp_ref) / slope.
inline double slope_estimator(double delta_p_obs, double theta_ref, double delta_p_ref, double model_slope)
{
    detail::require_finite(delta_p_obs, "observed Delta P");
    detail::require_finite(model_slope, "model slope");
    if (model_slope == 0.0)
        throw DomainError("slope estimator needs a non-zero model slope");
    return theta_ref + (delta_p_obs - delta_p_ref) / model_slope;
}

struct LinearCalibration
{
    double theta_ref = 0.0;
    double delta_p_ref = 0.0;
    double slope = 0.0; // 1/rad

    static LinearCalibration ideal_at(double theta_ref, const OpticalParams& params)
    {
        return {theta_ref, delta_p_zero_dz(theta_ref, params), delta_p_slope_zero_dz(theta_ref, params)};
    }

    double estimate(double delta_p_obs) const { return slope_estimator(delta_p_obs, theta_ref, delta_p_ref, slope); }
    // |theta| per unit Delta P in mrad, the "theta ~ c * Delta P mrad" constant.
    double mrad_per_unit() const { return 1e3 / std::abs(slope); }
    double slope_per_mrad() const { return std::abs(slope) * 1e-3; }
};

// ---------------------------------------------------------------------------
// Summary statistics

// Neumaier-compensated sum.
inline double accurate_sum(std::span<const double> values)
{
    double sum = 0.0;
    double carry = 0.0;
    for (double v : values)
    {
        const double t = sum + v;
        if (std::abs(sum) >= std::abs(v))
            carry += (sum - t) + v;
        else
            carry += (v - t) + sum;
        sum = t;
    }
    return sum + carry;
}

inline double mean(std::span<const double> values)
{
    if (values.empty())
        throw DomainError("mean of an empty series");
    const auto n = static_cast<double>(values.size());
    double m = accurate_sum(values) / n;
    // one refinement pass
    std::vector<double> residual(values.size());
    for (std::size_t i = 0; i < values.size(); ++i)
        residual[i] = values[i] - m;
    return m + accurate_sum(residual) / n;
}

// Sample standard deviation (n - 1).
inline double sample_std(std::span<const double> values)
{
    if (values.size() < 2)
        throw DomainError("standard deviation needs at least two values");
    const double m = mean(values);
    std::vector<double> squares(values.size());
    for (std::size_t i = 0; i < values.size(); ++i)
        squares[i] = (values[i] - m) * (values[i] - m);
    return std::sqrt(accurate_sum(squares) / static_cast<double>(values.size() - 1));
}

struct KsResult
{
    double statistic = 0.0;
    double p_value = 1.0;
};

// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value.
inline KsResult ks_two_sample(std::vector<double> a, std::vector<double> b)
{
    if (a.empty() || b.empty())
        throw DomainError("KS test needs two non-empty samples");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const auto na = static_cast<double>(a.size());
    const auto nb = static_cast<double>(b.size());
    std::size_t i = 0;
    std::size_t j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size())
    {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x)
            ++i;
        while (j < b.size() && b[j] <= x)
            ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    const double ne = std::sqrt(na * nb / (na + nb));
    const double lambda = (ne + 0.12 + 0.11 / ne) * d;
    double p = 0.0;
    if (lambda < 1e-3)
        p = 1.0;
    else
    {
        for (int k = 1; k <= 100; ++k)
        {
            const double term = 2.0 * ((k % 2 == 1) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
            p += term;
            if (std::abs(term) < 1e-12)
                break;
        }
        p = std::clamp(p, 0.0, 1.0);
    }
    return {d, p};
}

// ---------------------------------------------------------------------------
// Time-series post-processing

struct TimePoint
{
    double t = 0.0;
    double value = 0.0;
};

struct WindowMean
{
    double t = 0.0; // window center
    double value = 0.0;
    std::size_t samples = 0;
    bool partial = false; // fewer samples than the fullest window
};

// Means over consecutive non-overlapping windows [t0 + j w, t0 + (j+1) w),
// t0 being the first timestamp. Empty windows are skipped.
inline std::vector<WindowMean> mean_filter(std::span<const TimePoint> series, double window_seconds)
{
    if (series.empty())
        throw DomainError("mean filter of an empty series");
    detail::require_positive(window_seconds, "window length");
    const double t0 = series.front().t;
    std::vector<WindowMean> out;
    std::vector<double> bucket;
    std::size_t current = 0;
    auto flush = [&]() {
        if (bucket.empty())
            return;
        out.push_back({t0 + (static_cast<double>(current) + 0.5) * window_seconds, mean(bucket), bucket.size(), false});
        bucket.clear();
    };
    for (std::size_t i = 0; i < series.size(); ++i)
    {
        if (i > 0 && !(series[i].t > series[i - 1].t))
            throw DomainError("mean filter needs strictly increasing timestamps");
        const auto index = static_cast<std::size_t>(std::floor((series[i].t - t0) / window_seconds));
        if (index != current)
        {
            flush();
            current = index;
        }
        bucket.push_back(series[i].value);
    }
    flush();

    std::size_t fullest = 0;
    for (const WindowMean& w : out)
        fullest = std::max(fullest, w.samples);
    for (WindowMean& w : out)
        w.partial = w.samples < fullest;
    return out;
}

struct StabilityMetric
{
    double std = 0.0;
    double max_excursion = 0.0;
};

// Spread of a trace around its mean over the whole record.
inline StabilityMetric stability_metric(std::span<const double> values)
{
    if (values.size() < 2)
        throw DomainError("stability metric needs at least two points");
    const double m = mean(values);
    StabilityMetric metric{sample_std(values), 0.0};
    for (double v : values)
        metric.max_excursion = std::max(metric.max_excursion, std::abs(v - m));
    return metric;
}

inline std::vector<double> deviations_from_mean(std::span<const double> values)
{
    const double m = mean(values);
    std::vector<double> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i)
        out[i] = values[i] - m;
    return out;
}

// ---------------------------------------------------------------------------
// Monte Carlo efficiency of the slope estimator

// Repeated acquisitions of `trials` binary HOM outcomes (same vs different
// polarization) at a fixed tilt, inverted with the ideal linear calibration
// at theta_ref.
struct BinaryScenario
{
    OpticalParams params;
    double theta_ref = 0.0;
    std::uint64_t trials = 10000;
    double photons_per_trial = 2.0; // a pair per HOM outcome
    double delta_z_jitter = 0.0;    // uniform dz in [-jitter, jitter] per acquisition
    bool noise_free = false;        // use expected counts
};

struct EstimatorReport
{
    double theta_hat = 0.0; // mean over replicates
    double std = 0.0;
    double crlb = 0.0;       // 1/(sqrt(nu) 4 k sigma), nu = trials * photons_per_trial
    double fisher_std = 0.0; // 1/sqrt(trials F(theta)) for the binary outcome
    double efficiency_ratio = 0.0; // crlb / std; infinite when std = 0
    std::vector<double> estimates;
};

inline EstimatorReport monte_carlo_estimator_std(double theta_true, const BinaryScenario& scenario, std::size_t replicates,
                                                 std::uint64_t seed, unsigned threads = 1)
{
    if (replicates < 10)
        throw DomainError("Monte Carlo study needs at least 10 replicates");
    if (scenario.trials == 0)
        throw DomainError("each acquisition needs at least one trial");
    const OpticalParams& params = scenario.params;
    params.validate();
    check_tilt(theta_true, params);
    const LinearCalibration calibration = LinearCalibration::ideal_at(scenario.theta_ref, params);
    const auto trials = static_cast<double>(scenario.trials);

    EstimatorReport report;
    report.estimates.resize(replicates);
    parallel_for(replicates, threads, [&](std::size_t i) {
        double dz = params.delta_z;
        if (scenario.delta_z_jitter > 0.0)
        {
            CounterRng jitter_rng(seed, Stream::OplPath, i);
            dz += std::uniform_real_distribution<double>(-scenario.delta_z_jitter, scenario.delta_z_jitter)(jitter_rng);
        }
        const double p = hom::bucket_probabilities(theta_true, hom::PathConfig::with_delta(params.z_sM, dz), params).plus;
        double successes = p * trials;
        if (!scenario.noise_free)
        {
            CounterRng rng(seed, Stream::Replicate, i);
            successes = static_cast<double>(
                std::binomial_distribution<std::int64_t>(static_cast<std::int64_t>(scenario.trials), p)(rng));
        }
        report.estimates[i] = calibration.estimate((2.0 * successes - trials) / trials);
    });

    report.theta_hat = mean(report.estimates);
    report.std = sample_std(report.estimates);
    report.crlb = cramer_rao_bound(trials * scenario.photons_per_trial, params.k(), beam_sigma(params));
    report.fisher_std = 1.0 / std::sqrt(trials * fisher_information_zero_dz(theta_true, params));
    report.efficiency_ratio = report.std > 0.0 ? report.crlb / report.std : std::numeric_limits<double>::infinity();
    return report;
}

} // namespace homtilt::estimation

#endif
