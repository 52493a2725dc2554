#ifndef HOMTILT_HARNESS_SCENARIOS_HPP
#define HOMTILT_HARNESS_SCENARIOS_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <map>
#include <vector>

#include "../estimation.hpp"
#include "../fit.hpp"
#include "../hom.hpp"
#include "../noise.hpp"
#include "../parallel.hpp"
#include "../rng.hpp"
#include "../singlephoton.hpp"
#include "config.hpp"
#include "dataset.hpp"

namespace homtilt::harness
{

namespace detail
{

inline Json fit_summary(const fit::FitResult& result)
{
    Json j;
    for (std::size_t i = 0; i < result.names.size(); ++i)
    {
        j[result.names[i]] = result.parameters[i];
        j[result.names[i] + "_err"] = result.std_errors[i];
    }
    j["converged"] = result.converged;
    j["status"] = fit::to_string(result.status);
    j["residual_norm"] = result.residual_norm;
    j["iterations"] = result.iterations;
    return j;
}

inline void warn_unconverged(Dataset& data, const fit::FitResult& result, const std::string& what)
{
    if (!result.converged)
        data.warnings.push_back(what + " fit did not converge (" + fit::to_string(result.status) + ")");
}

// Independent sub-seed for the j-th row of a study.
inline std::uint64_t row_seed(std::uint64_t seed, std::size_t j)
{
    CounterRng rng(seed, Stream::Replicate, 0x100000000ULL + j);
    return rng();
}

// Five-point derivative of f at x with step h.
template <class F>
double derivative(F&& f, double x, double h)
{
    return (8.0 * (f(x + h) - f(x - h)) - (f(x + 2.0 * h) - f(x - 2.0 * h))) / (12.0 * h);
}

inline double poisson_or_mean(double mean, bool noise_free, CounterRng& rng)
{
    return noise_free ? mean : static_cast<double>(noise::poisson_counts(mean, rng));
}

} // namespace detail

// Coincidences against the delay delta for both polarization projections, with dip fits.
inline Dataset run_hom_dip(const ScenarioConfig& config)
{
    validate(config);
    const HomDipConfig& c = config.hom_dip;
    Dataset data;
    data.provenance = make_provenance(config);
    data.columns = {"delta_m", "model_same", "model_diff", "c_same", "c_diff"};

    const double amplitude = 0.5 * config.counting.pair_rate * c.seconds_per_point * config.counting.pair_efficiency();
    const std::vector<double> deltas = c.delta.points();
    std::vector<fit::DataPoint> same;
    std::vector<fit::DataPoint> diff;
    for (std::size_t i = 0; i < deltas.size(); ++i)
    {
        const double delta = deltas[i];
        const double model_same = hom::dip_counts(delta, amplitude, c.visibility, c.coherence_length, Setting::Same);
        const double model_diff = hom::dip_counts(delta, amplitude, c.visibility, c.coherence_length, Setting::Different);
        CounterRng rng(config.seed, Stream::ScanCounts, i);
        const double c_same = detail::poisson_or_mean(model_same, c.noise_free, rng);
        const double c_diff = detail::poisson_or_mean(model_diff, c.noise_free, rng);
        data.rows.push_back({delta, model_same, model_diff, c_same, c_diff});
        same.push_back({delta, c_same, std::sqrt(std::max(c_same, 1.0))});
        diff.push_back({delta, c_diff, std::sqrt(std::max(c_diff, 1.0))});
    }

    // first pass weighted by the observed counts, second by the fitted model
    auto dip_fit = [&](std::vector<fit::DataPoint> points, Setting setting) {
        const fit::FitResult first = fit::fit_hom_dip(points, fit::guess_hom_dip(points, setting), setting);
        if (!first.converged || c.noise_free)
            return first;
        const fit::DipGuess refined{first.value("amplitude"), first.value("visibility"), first.value("coherence_length"),
                                    first.value("center")};
        for (fit::DataPoint& p : points)
        {
            const double x = 2.0 * std::numbers::pi * (p.x - refined.center);
            const double sign = setting == Setting::Same ? -1.0 : 1.0;
            const double expected = refined.amplitude * (1.0 + sign * refined.visibility *
                                                                   std::exp(-x * x / (2.0 * refined.coherence_length * refined.coherence_length)));
            p.y_err = std::sqrt(std::max(expected, 1.0));
        }
        return fit::fit_hom_dip(points, refined, setting);
    };

    data.summary["model"] = Json{{"amplitude", amplitude}, {"visibility", c.visibility}, {"coherence_length", c.coherence_length}};
    if (deltas.size() >= 5)
    {
        const fit::FitResult fs = dip_fit(same, Setting::Same);
        const fit::FitResult fd = dip_fit(diff, Setting::Different);
        data.summary["fit_same"] = detail::fit_summary(fs);
        data.summary["fit_diff"] = detail::fit_summary(fd);
        detail::warn_unconverged(data, fs, "same-polarization dip");
        detail::warn_unconverged(data, fd, "orthogonal-polarization peak");
    }
    else
        data.warnings.push_back("fewer than 5 delays; no dip fit");
    return data;
}

// Normalized coincidences against the tilt, Gaussian fit and linear estimator calibration.
inline Dataset run_tilt_scan(const ScenarioConfig& config)
{
    validate(config);
    const TiltScanConfig& c = config.tilt_scan;
    const OpticalParams& optics = config.optics;
    Dataset data;
    data.provenance = make_provenance(config);
    data.columns = {"theta_rad", "p_plus_model", "p_minus_model", "c_same", "c_diff", "delta_p_norm"};

    const std::vector<double> thetas = c.theta.points();
    const std::size_t steps = thetas.size();
    std::vector<double> times(steps);
    for (std::size_t i = 0; i < steps; ++i)
        times[i] = (static_cast<double>(i) + 0.5) * c.seconds_per_point;
    std::vector<double> path = noise::sample_opl_path(config.noise, times, config.seed);
    for (double& dz : path)
        dz += optics.delta_z;

    const double full = config.counting.pair_rate * c.seconds_per_point * config.counting.pair_efficiency();
    std::vector<ProbabilityPair> model(steps);
    std::vector<ProbabilityPair> actual(steps);
    for (std::size_t i = 0; i < steps; ++i)
    {
        model[i] = hom::bucket_probabilities(thetas[i], hom::PathConfig::with_delta(optics.z_sM, optics.delta_z), optics);
        actual[i] = hom::bucket_probabilities(thetas[i], hom::PathConfig::with_delta(optics.z_sM, path[i]), optics);
    }

    noise::Calibration calibration{};
    if (c.noise_free)
    {
        const ProbabilityPair p0 = hom::bucket_probabilities(0.0, hom::PathConfig::with_delta(optics.z_sM, optics.delta_z), optics);
        calibration = {full * p0.plus, full * p0.minus};
    }
    else
    {
        noise::CountingConfig counting = config.counting;
        counting.bin_seconds = c.seconds_per_point;
        calibration = noise::calibrate_hom(counting, optics, config.calibration_bins, config.seed, config.threads);
    }
    if (!(calibration.total() > 0.0))
        throw NumericError("tilt-scan calibration recorded no counts");

    struct Replicate
    {
        std::vector<double> same, diff, dp;
        fit::FitResult fit;
    };
    std::vector<Replicate> reps(c.replicates);
    parallel_for(c.replicates, config.threads, [&](std::size_t r) {
        Replicate& rep = reps[r];
        std::vector<fit::DataPoint> points;
        for (std::size_t i = 0; i < steps; ++i)
        {
            CounterRng rng(config.seed, Stream::ScanCounts, r * steps + i);
            const double same = detail::poisson_or_mean(full * actual[i].plus, c.noise_free, rng);
            const double diff = detail::poisson_or_mean(full * actual[i].minus, c.noise_free, rng);
            const double dp = (same - diff) / calibration.total();
            rep.same.push_back(same);
            rep.diff.push_back(diff);
            rep.dp.push_back(dp);
            points.push_back({thetas[i], dp, std::sqrt(std::max(same + diff, 1.0)) / calibration.total()});
        }
        rep.fit = fit::fit_gaussian_dip(points, fit::guess_gaussian(points));
    });

    for (std::size_t i = 0; i < steps; ++i)
        data.rows.push_back({thetas[i], model[i].plus, model[i].minus, reps[0].same[i], reps[0].diff[i], reps[0].dp[i]});

    const fit::FitResult& first = reps[0].fit;
    data.summary["fit"] = detail::fit_summary(first);
    detail::warn_unconverged(data, first, "tilt-scan Gaussian");

    // steepest point of the model Delta P and the linear calibration there
    const double theta_star = estimation::max_sensitivity_tilt(optics);
    auto model_dp = [&](double theta) {
        return hom::bucket_probabilities(theta, hom::PathConfig::with_delta(optics.z_sM, optics.delta_z), optics).difference();
    };
    const double slope = detail::derivative(model_dp, theta_star, 1e-3 * theta_star);
    data.summary["model"] = Json{{"sigma_rad", theta_star}, {"tilt_width_rad", optics.tilt_width()}};
    data.summary["max_sensitivity"] = Json{{"theta_rad", theta_star},
                                           {"delta_p", model_dp(theta_star)},
                                           {"slope_per_rad", slope},
                                           {"slope_per_mrad", std::abs(slope) * 1e-3},
                                           {"mrad_per_unit", 1e3 / std::abs(slope)}};
    if (first.converged)
    {
        const double a = first.value("amplitude");
        const double sigma = first.value("sigma");
        const double fitted_slope = std::abs(a) * std::exp(-0.5) / sigma;
        data.summary["fitted_calibration"] = Json{{"theta_rad", first.value("center") + sigma},
                                                  {"slope_per_mrad", fitted_slope * 1e-3},
                                                  {"mrad_per_unit", 1e3 / fitted_slope}};
    }
    data.summary["calibration"] = Json{{"max_plus", calibration.max_plus}, {"max_minus", calibration.max_minus}};

    if (c.replicates > 1)
    {
        std::vector<double> sigmas;
        for (const Replicate& rep : reps)
            if (rep.fit.converged)
                sigmas.push_back(rep.fit.value("sigma"));
        Json stats{{"count", c.replicates}, {"converged", sigmas.size()}};
        if (sigmas.size() >= 2)
        {
            const double sd = estimation::sample_std(sigmas);
            stats["sigma_mean"] = estimation::mean(sigmas);
            stats["sigma_std"] = sd;
            stats["sigma_sem"] = sd / std::sqrt(static_cast<double>(sigmas.size()));
        }
        if (sigmas.size() < c.replicates)
            data.warnings.push_back(std::to_string(c.replicates - sigmas.size()) + " replicate fits did not converge");
        data.summary["replicates"] = stats;
    }
    return data;
}

namespace detail
{

struct TraceSummary
{
    std::vector<double> raw;       // per-bin normalized difference
    std::vector<double> deviation; // per bin, about the full-record mean
    std::vector<double> filtered;  // window mean held over each bin
    Json summary;
};

inline TraceSummary summarize_trace(const noise::CountSeries& series, const noise::Calibration& calibration, double window)
{
    TraceSummary out;
    out.raw = noise::normalized_difference(series, calibration);
    const std::vector<double>& dp = out.raw;
    out.deviation = estimation::deviations_from_mean(dp);

    std::vector<estimation::TimePoint> points(series.size());
    for (std::size_t i = 0; i < series.size(); ++i)
        points[i] = {series[i].t, out.deviation[i]};
    const auto windows = estimation::mean_filter(points, window);
    const double t0 = series.front().t;
    std::map<long long, double> by_index;
    std::vector<double> window_values;
    std::size_t partial = 0;
    for (const auto& w : windows)
    {
        by_index[std::llround((w.t - t0) / window - 0.5)] = w.value;
        window_values.push_back(w.value);
        partial += w.partial ? 1 : 0;
    }
    out.filtered.resize(series.size());
    for (std::size_t i = 0; i < series.size(); ++i)
        out.filtered[i] = by_index.at(static_cast<long long>(std::floor((series[i].t - t0) / window)));

    std::vector<double> totals(series.size());
    for (std::size_t i = 0; i < series.size(); ++i)
        totals[i] = static_cast<double>(series[i].total());

    out.summary["mean_delta_p"] = estimation::mean(dp);
    out.summary["per_bin_std"] = estimation::sample_std(out.deviation);
    out.summary["relative_noise_per_bin"] = estimation::sample_std(totals) / estimation::mean(totals);
    if (window_values.size() >= 2)
    {
        const auto metric = estimation::stability_metric(window_values);
        out.summary["filtered_std"] = metric.std;
        out.summary["filtered_max_excursion"] = metric.max_excursion;
    }
    out.summary["windows"] = window_values.size();
    out.summary["partial_windows"] = partial;
    return out;
}

} // namespace detail

// HOM and Sagnac traces on one shared path-length realization, plus a drift-free Poisson reference.
inline Dataset run_stability(const ScenarioConfig& config)
{
    validate(config);
    const StabilityConfig& c = config.stability;
    const OpticalParams& optics = config.optics;
    Dataset data;
    data.provenance = make_provenance(config);
    data.columns = {"t_s", "delta_z_m", "dp_hom", "dp_sagnac", "dp_poisson_ref", "dp_hom_filt", "dp_sagnac_filt"};

    const std::vector<double> t = noise::bin_centers(c.duration, config.counting.bin_seconds);
    std::vector<double> path = noise::sample_opl_path(config.noise, t, config.seed);
    for (double& dz : path)
        dz += optics.delta_z;
    const std::vector<double> flat(t.size(), optics.delta_z);
    const auto model = singlephoton::SagnacModel::matched_to(optics, c.sagnac_visibility);

    const auto hom = noise::simulate_hom_on_path(c.theta_0, t, path, config.counting, optics, config.seed, config.threads);
    const auto sagnac =
        noise::simulate_sagnac_on_path(c.theta_0, t, path, config.counting, model, config.seed, config.threads);
    const auto reference = noise::simulate_hom_on_path(c.theta_0, t, flat, config.counting, optics, config.seed, config.threads,
                                                       Stream::PoissonReference);
    const auto cal_hom = noise::calibrate_hom(config.counting, optics, config.calibration_bins, config.seed, config.threads);
    const auto cal_sagnac = noise::calibrate_sagnac(config.counting, model, config.calibration_bins, config.seed, config.threads);

    const auto h = detail::summarize_trace(hom, cal_hom, c.filter_window);
    const auto s = detail::summarize_trace(sagnac, cal_sagnac, c.filter_window);
    const auto p = detail::summarize_trace(reference, cal_hom, c.filter_window);

    for (std::size_t i = 0; i < t.size(); ++i)
        data.rows.push_back({t[i], path[i], h.deviation[i], s.deviation[i], p.deviation[i], h.filtered[i], s.filtered[i]});

    data.summary["hom"] = h.summary;
    data.summary["sagnac"] = s.summary;
    data.summary["poisson_ref"] = p.summary;
    if (h.summary.contains("filtered_std") && s.summary.contains("filtered_std"))
    {
        const double hom_std = h.summary["filtered_std"].get<double>();
        data.summary["sagnac_over_hom_filtered_std"] =
            hom_std > 0.0 ? s.summary["filtered_std"].get<double>() / hom_std : std::numeric_limits<double>::infinity();
    }
    else
        data.warnings.push_back("fewer than two filter windows; no stability metric");
    const auto ks = estimation::ks_two_sample(h.raw, p.raw);
    data.summary["ks_hom_vs_poisson"] = Json{{"statistic", ks.statistic}, {"p_value", ks.p_value}};
    data.summary["calibration"] = Json{{"hom_max_plus", cal_hom.max_plus},
                                       {"hom_max_minus", cal_hom.max_minus},
                                       {"sagnac_max_plus", cal_sagnac.max_plus},
                                       {"sagnac_max_minus", cal_sagnac.max_minus}};
    return data;
}

// Bound against Monte Carlo estimator spread over a grid of photon numbers.
inline Dataset run_crlb_study(const ScenarioConfig& config)
{
    validate(config);
    const CrlbConfig& c = config.crlb;
    Dataset data;
    data.provenance = make_provenance(config);
    data.columns = {"nu", "crlb_rad", "fisher_std_rad", "mc_mean_rad", "mc_std_rad", "crlb_over_mc", "mc_over_fisher"};
    const double sigma = estimation::beam_sigma(config.optics);
    for (std::size_t j = 0; j < c.nu.size(); ++j)
    {
        const double nu = c.nu[j];
        estimation::BinaryScenario scenario{config.optics, c.theta_0};
        scenario.photons_per_trial = c.photons_per_trial;
        scenario.trials = static_cast<std::uint64_t>(std::max(1.0, std::round(nu / c.photons_per_trial)));
        scenario.delta_z_jitter = c.delta_z_jitter;
        const auto report =
            estimation::monte_carlo_estimator_std(c.theta_0, scenario, c.replicates, detail::row_seed(config.seed, j), config.threads);
        const double bound = estimation::cramer_rao_bound(nu, config.optics.k(), sigma);
        data.rows.push_back({nu, bound, report.fisher_std, report.theta_hat, report.std,
                             report.std > 0.0 ? bound / report.std : std::numeric_limits<double>::infinity(),
                             report.std / report.fisher_std});
    }
    data.summary["sigma_m"] = sigma;
    data.summary["theta_0"] = c.theta_0;
    data.summary["fisher_information_per_trial"] = estimation::fisher_information_zero_dz(c.theta_0, config.optics);
    return data;
}

// |A_w| against the phase phi of the initial polarization state.
inline Dataset run_wva_scan(const ScenarioConfig& config)
{
    validate(config);
    const WvaConfig& c = config.wva;
    Dataset data;
    data.provenance = make_provenance(config);
    data.columns = {"phi_rad", "aw_real", "aw_imag", "aw_modulus", "ratio_to_phi0", "singular"};

    double reference = std::numeric_limits<double>::quiet_NaN();
    const auto at_zero = singlephoton::wva_scan({0.0}, c.theta_ps);
    if (!at_zero[0].singular)
        reference = at_zero[0].modulus;
    else
        data.warnings.push_back("post-selection is orthogonal at phi = 0; ratio column undefined");

    std::size_t singular = 0;
    for (const auto& row : singlephoton::wva_scan(c.phi.points(), c.theta_ps))
    {
        singular += row.singular ? 1 : 0;
        data.rows.push_back({row.phi, row.factor.real(), row.factor.imag(), row.modulus, row.modulus / reference,
                             row.singular ? 1.0 : 0.0});
    }
    data.summary["theta_ps"] = c.theta_ps;
    data.summary["modulus_at_phi0"] = reference;
    data.summary["singular_rows"] = singular;
    if (singular > 0)
        data.warnings.push_back(std::to_string(singular) + " rows with orthogonal post-selection");
    return data;
}

inline Dataset run(const ScenarioConfig& config)
{
    switch (config.experiment)
    {
    case Experiment::HomDip: return run_hom_dip(config);
    case Experiment::TiltScan: return run_tilt_scan(config);
    case Experiment::Stability: return run_stability(config);
    case Experiment::CrlbStudy: return run_crlb_study(config);
    case Experiment::WvaScan: return run_wva_scan(config);
    }
    throw ConfigError("unknown experiment");
}

} // namespace homtilt::harness

#endif
