#ifndef HOMTILT_HOM_HPP
#define HOMTILT_HOM_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "errors.hpp"
#include "optics.hpp"
#include "probability.hpp"
#include "quadrature.hpp"

// Two-photon (Hong-Ou-Mandel) interferometer with a tilted mirror in the signal arm.
namespace homtilt::hom
{

// Optical path lengths of the two arms. Both idler paths share z_i_tot and
// both signal paths after the mirror share z_s.
struct PathConfig
{
    double z_sM = 0.0;    // crystal -> mirror M
    double z_s = 0.0;     // mirror M -> detector
    double z_i_tot = 0.0; // idler, crystal -> detector

    double z_s_tot() const noexcept { return z_sM + z_s; }
    double delta_z() const noexcept { return z_i_tot - z_s_tot(); }

    static PathConfig with_delta(double z_sM, double delta_z) { return {z_sM, 0.0, z_sM + delta_z}; }
    static PathConfig from(const OpticalParams& params) { return with_delta(params.z_sM, params.delta_z); }

    void validate() const
    {
        detail::require_finite(z_sM, "z_sM");
        detail::require_finite(z_s, "z_s");
        detail::require_finite(z_i_tot, "z_i_tot");
    }
};

// Point-detector coincidence density for an arbitrary pair amplitude psi(q_i, q_s)
// (real or complex valued).
template <class Amplitude>
double coincidence_density_general(double q1, double q2, double theta, const PathConfig& paths,
                                   const OpticalParams& params, Amplitude&& psi, Setting setting)
{
    check_tilt(theta, params);
    paths.validate();
    const double k = params.k();
    const double shift = 2.0 * k * theta;
    const std::complex<double> a{psi(q2, q1 - shift)};
    const std::complex<double> b{psi(-q1, -q2 - shift)};
    if (!std::isfinite(a.real()) || !std::isfinite(a.imag()) || !std::isfinite(b.real()) || !std::isfinite(b.imag()))
        throw NumericError("biphoton amplitude is not finite at the evaluation point");

    const double mod_a = std::abs(a);
    const double mod_b = std::abs(b);
    const double big_phi = std::arg(b) - std::arg(a);
    const double phase = (q1 * q1 - q2 * q2) * paths.delta_z() / (2.0 * k) + 2.0 * (q1 + q2) * paths.z_sM * theta + big_phi;
    const double density =
        0.25 * (mod_a * mod_a + mod_b * mod_b + sign_of(setting) * 2.0 * mod_a * mod_b * std::cos(phase));
    return density > 0.0 ? density : 0.0;
}

// Closed form of the density for the double-Gaussian amplitude, written in
// q_plus = q1 + q2 and q_minus = q1 - q2.
inline double coincidence_density_gaussian(double q1, double q2, double theta, const PathConfig& paths,
                                           const BiphotonAmplitude& amp, Setting setting)
{
    const OpticalParams& params = amp.params;
    check_tilt(theta, params);
    paths.validate();
    const double k = params.k();
    const double w_p = params.w_p;
    const double q_plus = q1 + q2;
    const double q_minus = q1 - q2;
    const double v = pump_spectrum(q_plus, amp);
    const double g = phase_matching(q_minus - 2.0 * k * theta, amp);
    const double envelope = 0.5 * v * v * g * g * std::exp(-2.0 * w_p * w_p * k * k * theta * theta);
    const double phase = q_plus * q_minus * paths.delta_z() / (2.0 * k) + 2.0 * q_plus * paths.z_sM * theta;
    return envelope * (std::cosh(2.0 * q_plus * w_p * w_p * k * theta) + sign_of(setting) * std::cos(phase));
}

// Bucket-detector visibility 1 - dz^2 / (8 k^2 omega_c^2 w_p^2).
inline double hom_visibility(double delta_z, const OpticalParams& params)
{
    params.validate();
    detail::require_finite(delta_z, "delta_z");
    const double k = params.k();
    const double denom = 8.0 * k * k * params.omega_c * params.omega_c * params.w_p * params.w_p;
    const double visibility = 1.0 - delta_z * delta_z / denom;
    if (visibility < 0.0)
        throw ValidityError("path difference drives the HOM visibility below zero");
    return visibility;
}

// Momentum-integrated coincidence probabilities, valid while
// |dz| / 2k <= 0.1 omega_c w_p.
inline ProbabilityPair bucket_probabilities(double theta, const PathConfig& paths, const OpticalParams& params)
{
    params.validate();
    paths.validate();
    check_tilt(theta, params);
    const double k = params.k();
    const double w_p = params.w_p;
    const double omega_c = params.omega_c;
    const double dz = paths.delta_z();
    if (std::abs(dz) / (2.0 * k) > 0.1 * omega_c * w_p)
        throw ValidityError("path difference outside the regime |dz|/2k << omega_c w_p");

    const double visibility = hom_visibility(dz, params);
    const double shrink = 1.0 - dz * dz / (4.0 * k * k * omega_c * omega_c * w_p * w_p);
    const double offset = dz / 2.0 + paths.z_sM;
    const double rate = 2.0 * (w_p * w_p * k * k + shrink * offset * offset / (w_p * w_p));
    return ProbabilityPair::from_contrast(visibility * std::exp(-rate * theta * theta));
}

inline double bucket_probability(double theta, const PathConfig& paths, const OpticalParams& params, Setting setting)
{
    return bucket_probabilities(theta, paths, params)[setting];
}

// Delta z = 0 reduction; depends on the geometry only through params.z_sM.
inline ProbabilityPair bucket_probabilities_zero_dz(double theta, const OpticalParams& params)
{
    params.validate();
    check_tilt(theta, params);
    const double k = params.k();
    const double w_p = params.w_p;
    const double z = params.z_sM;
    const double rate = 2.0 * (k * k * w_p * w_p + z * z / (w_p * w_p));
    return ProbabilityPair::from_contrast(std::exp(-rate * theta * theta));
}

inline double bucket_probability_zero_dz(double theta, const OpticalParams& params, Setting setting)
{
    return bucket_probabilities_zero_dz(theta, params)[setting];
}

// Amplitude width of a pump beam of waist w_p after propagating z.
inline double pump_width_at(double z, const OpticalParams& params)
{
    const double k = params.k();
    const double w_p = params.w_p;
    return std::sqrt(w_p * w_p + z * z / (k * k * w_p * w_p));
}

// Same quantity as bucket_probabilities_zero_dz, written through the pump
// width at the mirror: 1/2 (1 +- exp(-k_p^2 w_p(z)^2 theta^2 / 2)).
inline ProbabilityPair bucket_probabilities_beam_form(double theta, const OpticalParams& params)
{
    params.validate();
    check_tilt(theta, params);
    const double k_p = params.k_p();
    const double width = pump_width_at(params.z_sM, params);
    return ProbabilityPair::from_contrast(std::exp(-0.5 * k_p * k_p * width * width * theta * theta));
}

// Bucket probabilities by direct 2D quadrature of the Gaussian density,
// normalized by the sum over both settings. Serves as the arbiter for the
// closed form above.
inline ProbabilityPair bucket_probabilities_numeric(double theta, const PathConfig& paths, const BiphotonAmplitude& amp,
                                                    std::size_t n_points = default_quadrature_points)
{
    const OpticalParams& params = amp.params;
    check_tilt(theta, params);
    const double shift = 2.0 * params.k() * std::abs(theta);
    const double half_plus = 8.0 / params.w_p + shift;
    const double half_minus = 8.0 / params.omega_c + shift;
    auto integrate = [&](Setting setting) {
        return integrate_sum_difference(
            [&](double q1, double q2) { return coincidence_density_gaussian(q1, q2, theta, paths, amp, setting); },
            half_plus, half_minus, n_points);
    };
    const double same = integrate(Setting::Same);
    const double different = integrate(Setting::Different);
    const double total = same + different;
    if (!(total > 0.0))
        throw NumericError("integrated coincidence probability vanished");
    return ProbabilityPair::from_contrast((same - different) / total);
}

struct ClosedFormDeviation
{
    double theta = 0.0;
    double delta_z = 0.0;
    ProbabilityPair closed;
    ProbabilityPair numeric;
    // max over both settings of |numeric - closed| / max(closed.plus, closed.minus)
    double relative_error = 0.0;
};

// Compares the closed-form bucket probabilities against quadrature on a grid.
inline std::vector<ClosedFormDeviation> closed_form_deviation_report(const std::vector<double>& thetas,
                                                                     const std::vector<double>& delta_zs,
                                                                     const BiphotonAmplitude& amp,
                                                                     std::size_t n_points = default_quadrature_points)
{
    std::vector<ClosedFormDeviation> report;
    report.reserve(thetas.size() * delta_zs.size());
    for (double dz : delta_zs)
    {
        const PathConfig paths = PathConfig::with_delta(amp.params.z_sM, dz);
        for (double theta : thetas)
        {
            ClosedFormDeviation row{theta, dz, bucket_probabilities(theta, paths, amp.params),
                                    bucket_probabilities_numeric(theta, paths, amp, n_points)};
            const double scale = std::max(row.closed.plus, row.closed.minus);
            row.relative_error = std::max(std::abs(row.numeric.plus - row.closed.plus),
                                          std::abs(row.numeric.minus - row.closed.minus)) /
                                 scale;
            report.push_back(row);
        }
    }
    return report;
}

// HOM dip fit model C(delta) = A (1 +- V exp(-(2 pi delta)^2 / (2 dL^2))).
// Same-polarization projection gives the dip (minus sign), orthogonal
// projection the peak (plus sign).
inline double dip_counts(double delta, double amplitude, double visibility, double coherence_len, Setting setting)
{
    detail::require_finite(delta, "delta");
    detail::require_finite(amplitude, "amplitude");
    detail::require_positive(coherence_len, "coherence length");
    if (!(visibility >= 0.0 && visibility <= 1.0))
        throw DomainError("dip visibility must lie in [0, 1]");
    const double x = 2.0 * std::numbers::pi * delta;
    const double sign = setting == Setting::Same ? -1.0 : 1.0;
    return amplitude * (1.0 + sign * visibility * std::exp(-x * x / (2.0 * coherence_len * coherence_len)));
}

// Coherence length proportionality * lambda^2 / bandwidth.
inline double coherence_length(double lambda, double bandwidth, double proportionality = 1.0)
{
    detail::require_positive(lambda, "lambda");
    detail::require_positive(bandwidth, "bandwidth");
    detail::require_positive(proportionality, "proportionality");
    return proportionality * lambda * lambda / bandwidth;
}

} // namespace homtilt::hom

#endif
