#ifndef HOMTILT_OPTICS_HPP
#define HOMTILT_OPTICS_HPP

#include <cmath>
#include <numbers>
#include <string>

#include "errors.hpp"

namespace homtilt
{

// Largest tilt magnitude (rad) accepted by any model; every expression is first order in theta.
inline constexpr double max_tilt = 1.0e-2;

// Physical constants of the down-conversion source and interferometer geometry.
// All lengths in meters, wavenumbers in rad/m, angles in radians.
struct OpticalParams
{
    double lambda = 810e-9;  // down-converted wavelength
    double w_p = 0.5e-3;     // pump transverse amplitude width
    double omega_c = 4.0e-6; // phase-matching width
    double z_sM = 0.0;       // optical path crystal -> tilted mirror, signal arm
    double delta_z = 0.0;    // z_i_tot - z_s_tot

    double k() const noexcept { return 2.0 * std::numbers::pi / lambda; }
    double k_p() const noexcept { return 2.0 * k(); }

    // Standard deviation of the ideal Delta P(theta) Gaussian, 1/(2 k w_p).
    double tilt_width() const noexcept { return 1.0 / (2.0 * k() * w_p); }

    void validate() const
    {
        detail::require_positive(lambda, "lambda");
        detail::require_positive(w_p, "w_p");
        detail::require_positive(omega_c, "omega_c");
        detail::require_finite(z_sM, "z_sM");
        detail::require_finite(delta_z, "delta_z");
    }
};

// Throws ValidityError unless theta is inside the small-angle/paraxial regime.
inline void check_tilt(double theta, const OpticalParams& params)
{
    detail::require_finite(theta, "theta");
    if (std::abs(theta) > max_tilt)
        throw ValidityError("tilt " + std::to_string(theta) + " rad exceeds the small-angle bound of 10 mrad");
    if (std::abs(2.0 * params.k() * theta) * params.omega_c >= 1.0)
        throw ValidityError("tilt " + std::to_string(theta) + " rad violates |2 k theta| omega_c < 1");
}

// Double-Gaussian pair amplitude Psi(q_i, q_s) = v(q_i + q_s) gamma(q_i - q_s).
struct BiphotonAmplitude
{
    OpticalParams params;
    double A = 1.0;
    double B = 1.0;

    // Coefficients giving v and gamma unit L2 norm on the real line.
    static BiphotonAmplitude normalized(const OpticalParams& params)
    {
        params.validate();
        const double two_pi = 2.0 * std::numbers::pi;
        return {params,
                std::pow(params.w_p * params.w_p / two_pi, 0.25),
                std::pow(params.omega_c * params.omega_c / two_pi, 0.25)};
    }
};

// v(q) = A exp(-q^2 w_p^2 / 4)
inline double pump_spectrum(double q, const BiphotonAmplitude& amp)
{
    detail::require_finite(q, "q");
    const double w = amp.params.w_p;
    return amp.A * std::exp(-q * q * w * w / 4.0);
}

// gamma(q) = B exp(-q^2 omega_c^2 / 4)
inline double phase_matching(double q, const BiphotonAmplitude& amp)
{
    detail::require_finite(q, "q");
    const double w = amp.params.omega_c;
    return amp.B * std::exp(-q * q * w * w / 4.0);
}

inline double biphoton_value(double q_i, double q_s, const BiphotonAmplitude& amp)
{
    return pump_spectrum(q_i + q_s, amp) * phase_matching(q_i - q_s, amp);
}

// Signal wavevector after reflection from a mirror tilted by theta.
inline double tilt_shift(double q_s, double theta, const OpticalParams& params)
{
    detail::require_finite(q_s, "q_s");
    check_tilt(theta, params);
    return q_s + 2.0 * params.k() * theta;
}

} // namespace homtilt

#endif
