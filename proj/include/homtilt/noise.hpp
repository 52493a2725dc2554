#ifndef HOMTILT_NOISE_HPP
#define HOMTILT_NOISE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <variant>
#include <vector>

#include "errors.hpp"
#include "hom.hpp"
#include "optics.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "singlephoton.hpp"

// Path-length fluctuation processes and photon-counting statistics.
namespace homtilt::noise
{

namespace opl
{
struct Constant
{
    double value = 0.0;
};
// Independent N(0, sigma) offset per sample.
struct GaussianJitter
{
    double sigma = 0.0;
};
// Starts at 0, adds N(0, step_sigma) per sample; reflected into [-bound, bound] when bound > 0.
struct RandomWalk
{
    double step_sigma = 0.0;
    double bound = 0.0;
};
// amplitude * sin(2 pi t / period + phase)
struct Sinusoidal
{
    double amplitude = 0.0;
    double period = 1.0;
    double phase = 0.0;
};
struct Breakpoint
{
    double t = 0.0;
    double value = 0.0;
};
// Linear interpolation between breakpoints, held constant outside them.
struct PiecewiseDrift
{
    std::vector<Breakpoint> breakpoints;
};
} // namespace opl

using OplProcess = std::variant<opl::Constant, opl::GaussianJitter, opl::RandomWalk, opl::Sinusoidal, opl::PiecewiseDrift>;

inline void validate(const OplProcess& process)
{
    struct Visitor
    {
        void operator()(const opl::Constant& p) const { detail::require_finite(p.value, "constant path offset"); }
        void operator()(const opl::GaussianJitter& p) const
        {
            detail::require_finite(p.sigma, "jitter sigma");
            if (p.sigma < 0.0)
                throw DomainError("jitter sigma must be non-negative");
        }
        void operator()(const opl::RandomWalk& p) const
        {
            detail::require_finite(p.step_sigma, "random walk step");
            detail::require_finite(p.bound, "random walk bound");
            if (p.step_sigma < 0.0 || p.bound < 0.0)
                throw DomainError("random walk step and bound must be non-negative");
        }
        void operator()(const opl::Sinusoidal& p) const
        {
            detail::require_finite(p.amplitude, "sinusoid amplitude");
            detail::require_positive(p.period, "sinusoid period");
            detail::require_finite(p.phase, "sinusoid phase");
            if (p.amplitude < 0.0)
                throw DomainError("sinusoid amplitude must be non-negative");
        }
        void operator()(const opl::PiecewiseDrift& p) const
        {
            if (p.breakpoints.empty())
                throw DomainError("piecewise drift needs at least one breakpoint");
            for (std::size_t i = 0; i < p.breakpoints.size(); ++i)
            {
                detail::require_finite(p.breakpoints[i].t, "breakpoint time");
                detail::require_finite(p.breakpoints[i].value, "breakpoint value");
                if (i > 0 && !(p.breakpoints[i].t > p.breakpoints[i - 1].t))
                    throw DomainError("breakpoint times must be strictly increasing");
            }
        }
    };
    std::visit(Visitor{}, process);
}

namespace detail
{

inline double reflect_into(double z, double bound)
{
    // fold onto a period of 4 * bound, then mirror
    const double period = 4.0 * bound;
    double x = std::fmod(z + bound, period);
    if (x < 0.0)
        x += period;
    return x <= 2.0 * bound ? x - bound : 3.0 * bound - x;
}

inline double interpolate(const std::vector<opl::Breakpoint>& points, double t)
{
    if (t <= points.front().t)
        return points.front().value;
    if (t >= points.back().t)
        return points.back().value;
    const auto upper = std::upper_bound(points.begin(), points.end(), t,
                                        [](double x, const opl::Breakpoint& b) { return x < b.t; });
    const auto lower = upper - 1;
    const double f = (t - lower->t) / (upper->t - lower->t);
    return lower->value + f * (upper->value - lower->value);
}

} // namespace detail

// One realization of dz(t) on the given grid; a pure function of its inputs.
inline std::vector<double> sample_opl_path(const OplProcess& process, const std::vector<double>& t_grid, std::uint64_t seed)
{
    validate(process);
    for (std::size_t i = 0; i < t_grid.size(); ++i)
    {
        homtilt::detail::require_finite(t_grid[i], "time");
        if (i > 0 && !(t_grid[i] > t_grid[i - 1]))
            throw DomainError("time grid must be strictly increasing");
    }

    std::vector<double> path(t_grid.size(), 0.0);
    struct Visitor
    {
        const std::vector<double>& t;
        std::vector<double>& out;
        std::uint64_t seed;

        void operator()(const opl::Constant& p) const { std::fill(out.begin(), out.end(), p.value); }
        void operator()(const opl::GaussianJitter& p) const
        {
            for (std::size_t i = 0; i < t.size(); ++i)
            {
                CounterRng rng(seed, Stream::OplPath, i);
                out[i] = std::normal_distribution<double>(0.0, p.sigma)(rng);
            }
        }
        void operator()(const opl::RandomWalk& p) const
        {
            double z = 0.0;
            for (std::size_t i = 0; i < t.size(); ++i)
            {
                if (i > 0)
                {
                    CounterRng rng(seed, Stream::OplPath, i);
                    z += std::normal_distribution<double>(0.0, p.step_sigma)(rng);
                    if (p.bound > 0.0)
                        z = detail::reflect_into(z, p.bound);
                }
                out[i] = z;
            }
        }
        void operator()(const opl::Sinusoidal& p) const
        {
            for (std::size_t i = 0; i < t.size(); ++i)
                out[i] = p.amplitude * std::sin(2.0 * std::numbers::pi * t[i] / p.period + p.phase);
        }
        void operator()(const opl::PiecewiseDrift& p) const
        {
            for (std::size_t i = 0; i < t.size(); ++i)
                out[i] = detail::interpolate(p.breakpoints, t[i]);
        }
    };
    std::visit(Visitor{t_grid, path, seed}, process);
    return path;
}

// Poisson draw with the given mean; mean 0 always yields 0.
template <class Rng>
std::uint64_t poisson_counts(double expected, Rng& rng)
{
    homtilt::detail::require_finite(expected, "expected counts");
    if (expected < 0.0)
        throw DomainError("expected counts must be non-negative");
    if (expected == 0.0)
        return 0;
    return static_cast<std::uint64_t>(std::poisson_distribution<std::int64_t>(expected)(rng));
}

// Keeps each of n events independently with probability p.
template <class Rng>
std::uint64_t thin(std::uint64_t n, double p, Rng& rng)
{
    if (p >= 1.0 || n == 0)
        return n;
    if (p <= 0.0)
        return 0;
    return static_cast<std::uint64_t>(std::binomial_distribution<std::int64_t>(static_cast<std::int64_t>(n), p)(rng));
}

struct CountingConfig
{
    double pair_rate = 25.0;       // coincidences/s summed over both settings, before efficiency losses
    double single_rate = 80000.0;  // single counts/s summed over both outputs, before efficiency losses
    double bin_seconds = 8.0;
    double efficiency_eta = 1.0;   // per-photon detection efficiency

    void validate() const
    {
        homtilt::detail::require_finite(pair_rate, "pair rate");
        homtilt::detail::require_finite(single_rate, "single rate");
        if (pair_rate < 0.0 || single_rate < 0.0)
            throw DomainError("count rates must be non-negative");
        homtilt::detail::require_positive(bin_seconds, "bin length");
        if (!(efficiency_eta >= 0.0 && efficiency_eta <= 1.0))
            throw DomainError("detection efficiency must lie in [0, 1]");
    }

    // A coincidence needs both photons detected, a single count only one.
    double pair_efficiency() const noexcept { return efficiency_eta * efficiency_eta; }
    double single_efficiency() const noexcept { return efficiency_eta; }
};

// One acquisition bin. For HOM, plus/minus are the same/different
// polarization coincidences (c_same, c_diff); for Sagnac they are the single
// counts in the two polarization outputs (n_plus, n_minus).
struct CountRow
{
    double t = 0.0; // bin center (s)
    std::uint64_t plus = 0;
    std::uint64_t minus = 0;
    double delta_z = 0.0;
    double expected_plus = 0.0; // after efficiency
    double expected_minus = 0.0;

    std::uint64_t total() const noexcept { return plus + minus; }
};

using CountSeries = std::vector<CountRow>;

// Centers of the whole bins that fit into duration.
inline std::vector<double> bin_centers(double duration, double bin_seconds)
{
    homtilt::detail::require_positive(duration, "duration");
    homtilt::detail::require_positive(bin_seconds, "bin length");
    const auto bins = static_cast<std::size_t>(std::floor(duration / bin_seconds * (1.0 + 1e-12)));
    std::vector<double> t(bins);
    for (std::size_t i = 0; i < bins; ++i)
        t[i] = (static_cast<double>(i) + 0.5) * bin_seconds;
    return t;
}

namespace detail
{

template <class ProbabilityAt>
CountSeries draw_series(const std::vector<double>& t, const std::vector<double>& delta_z, double rate, double bin_seconds,
                        double efficiency, std::uint64_t seed, Stream stream, unsigned threads, ProbabilityAt&& probability_at)
{
    if (t.size() != delta_z.size())
        throw DomainError("time grid and path realization differ in length");
    CountSeries series(t.size());
    parallel_for(t.size(), threads, [&](std::size_t i) {
        const ProbabilityPair p = probability_at(delta_z[i]);
        CounterRng rng(seed, stream, i);
        const double mean_plus = rate * bin_seconds * p.plus;
        const double mean_minus = rate * bin_seconds * p.minus;
        CountRow& row = series[i];
        row.t = t[i];
        row.delta_z = delta_z[i];
        row.plus = thin(poisson_counts(mean_plus, rng), efficiency, rng);
        row.minus = thin(poisson_counts(mean_minus, rng), efficiency, rng);
        row.expected_plus = mean_plus * efficiency;
        row.expected_minus = mean_minus * efficiency;
    });
    return series;
}

} // namespace detail

// HOM coincidences at fixed tilt on a given dz(t) realization.
inline CountSeries simulate_hom_on_path(double theta_0, const std::vector<double>& t, const std::vector<double>& delta_z,
                                        const CountingConfig& counting, const OpticalParams& params, std::uint64_t seed,
                                        unsigned threads = 1, Stream stream = Stream::HomCounts)
{
    counting.validate();
    params.validate();
    check_tilt(theta_0, params);
    return detail::draw_series(t, delta_z, counting.pair_rate, counting.bin_seconds, counting.pair_efficiency(), seed, stream,
                               threads, [&](double dz) {
                                   return hom::bucket_probabilities(theta_0, hom::PathConfig::with_delta(params.z_sM, dz), params);
                               });
}

inline CountSeries simulate_hom_series(double theta_0, const OplProcess& process, const CountingConfig& counting,
                                       const OpticalParams& params, double duration, std::uint64_t seed, unsigned threads = 1)
{
    counting.validate();
    const std::vector<double> t = bin_centers(duration, counting.bin_seconds);
    return simulate_hom_on_path(theta_0, t, sample_opl_path(process, t, seed), counting, params, seed, threads);
}

// Sagnac single counts; the path difference enters as phi = k_beam dz.
inline CountSeries simulate_sagnac_on_path(double theta_0, const std::vector<double>& t, const std::vector<double>& delta_z,
                                           const CountingConfig& counting, const singlephoton::SagnacModel& model,
                                           std::uint64_t seed, unsigned threads = 1, Stream stream = Stream::SagnacCounts)
{
    counting.validate();
    model.validate();
    homtilt::detail::require_finite(theta_0, "theta_0");
    return detail::draw_series(t, delta_z, counting.single_rate, counting.bin_seconds, counting.single_efficiency(), seed,
                               stream, threads, [&](double dz) {
                                   return singlephoton::sagnac_probabilities(theta_0, singlephoton::phase_from_path(dz, model),
                                                                             model);
                               });
}

inline CountSeries simulate_sagnac_series(double theta_0, const OplProcess& process, const CountingConfig& counting,
                                          const singlephoton::SagnacModel& model, double duration, std::uint64_t seed,
                                          unsigned threads = 1)
{
    counting.validate();
    const std::vector<double> t = bin_centers(duration, counting.bin_seconds);
    return simulate_sagnac_on_path(theta_0, t, sample_opl_path(process, t, seed), counting, model, seed, threads);
}

// Mean counts per bin of a theta = 0 reference run; denominators of the
// normalized probabilities P+- = C+-(theta) / (C+max + C-max).
struct Calibration
{
    double max_plus = 0.0;
    double max_minus = 0.0;

    double total() const noexcept { return max_plus + max_minus; }

    static Calibration from(const CountSeries& reference)
    {
        if (reference.empty())
            throw DomainError("calibration run has no bins");
        double plus = 0.0;
        double minus = 0.0;
        for (const CountRow& row : reference)
        {
            plus += static_cast<double>(row.plus);
            minus += static_cast<double>(row.minus);
        }
        const auto n = static_cast<double>(reference.size());
        return {plus / n, minus / n};
    }

    static Calibration expected_from(const CountSeries& reference)
    {
        if (reference.empty())
            throw DomainError("calibration run has no bins");
        double plus = 0.0;
        double minus = 0.0;
        for (const CountRow& row : reference)
        {
            plus += row.expected_plus;
            minus += row.expected_minus;
        }
        const auto n = static_cast<double>(reference.size());
        return {plus / n, minus / n};
    }
};

inline Calibration calibrate_hom(const CountingConfig& counting, const OpticalParams& params, std::size_t bins,
                                 std::uint64_t seed, unsigned threads = 1)
{
    counting.validate();
    if (bins == 0)
        throw DomainError("calibration needs at least one bin");
    const std::vector<double> t = bin_centers(static_cast<double>(bins) * counting.bin_seconds, counting.bin_seconds);
    const std::vector<double> dz(t.size(), params.delta_z);
    return Calibration::from(simulate_hom_on_path(0.0, t, dz, counting, params, seed, threads, Stream::Calibration));
}

inline Calibration calibrate_sagnac(const CountingConfig& counting, const singlephoton::SagnacModel& model, std::size_t bins,
                                    std::uint64_t seed, unsigned threads = 1)
{
    counting.validate();
    if (bins == 0)
        throw DomainError("calibration needs at least one bin");
    const std::vector<double> t = bin_centers(static_cast<double>(bins) * counting.bin_seconds, counting.bin_seconds);
    const std::vector<double> dz(t.size(), 0.0);
    return Calibration::from(simulate_sagnac_on_path(0.0, t, dz, counting, model, seed, threads, Stream::SagnacCalibration));
}

// (C+ - C-) / (C+max + C-max) per bin.
inline std::vector<double> normalized_difference(const CountSeries& series, const Calibration& calibration)
{
    if (!(calibration.total() > 0.0))
        throw NumericError("calibration run recorded no counts");
    std::vector<double> out(series.size());
    for (std::size_t i = 0; i < series.size(); ++i)
        out[i] = (static_cast<double>(series[i].plus) - static_cast<double>(series[i].minus)) / calibration.total();
    return out;
}

// Same as normalized_difference on the noise-free expected counts.
inline std::vector<double> expected_normalized_difference(const CountSeries& series, const Calibration& calibration)
{
    if (!(calibration.total() > 0.0))
        throw NumericError("calibration run recorded no counts");
    std::vector<double> out(series.size());
    for (std::size_t i = 0; i < series.size(); ++i)
        out[i] = (series[i].expected_plus - series[i].expected_minus) / calibration.total();
    return out;
}

} // namespace homtilt::noise

#endif
