#ifndef HOMTILT_SINGLEPHOTON_HPP
#define HOMTILT_SINGLEPHOTON_HPP

#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <variant>
#include <vector>

#include "errors.hpp"
#include "optics.hpp"
#include "probability.hpp"

// Single-photon baselines: polarization Sagnac and weak-value amplification.
namespace homtilt::singlephoton
{

struct SagnacModel
{
    double visibility = 1.0;
    double k_beam = 0.0; // probe wavenumber (rad/m)
    double w_beam = 0.0; // beam amplitude width at the mirror (m)
    // Optional replacement for the tilt response f(theta); must satisfy f(0) = 1.
    std::function<double(double)> response_override;

    // Probe beam with the photon wavenumber and pump waist of the HOM source.
    static SagnacModel matched_to(const OpticalParams& params, double visibility = 1.0)
    {
        return {visibility, params.k(), params.w_p, {}};
    }

    void validate() const
    {
        if (!(visibility >= 0.0 && visibility <= 1.0))
            throw DomainError("Sagnac visibility must lie in [0, 1]");
        detail::require_positive(k_beam, "k_beam");
        detail::require_positive(w_beam, "w_beam");
    }

    // f(theta) = exp(-2 k^2 w^2 theta^2) unless overridden.
    double response(double theta) const
    {
        if (response_override)
            return response_override(theta);
        return std::exp(-2.0 * k_beam * k_beam * w_beam * w_beam * theta * theta);
    }
};

// P+- = (1 +- V f(theta) cos phi) / 2.
inline ProbabilityPair sagnac_probabilities(double theta, double phi, const SagnacModel& model)
{
    model.validate();
    detail::require_finite(theta, "theta");
    detail::require_finite(phi, "phi");
    return ProbabilityPair::from_contrast(model.visibility * model.response(theta) * std::cos(phi));
}

inline double sagnac_probability(double theta, double phi, const SagnacModel& model, Setting sign)
{
    return sagnac_probabilities(theta, phi, model)[sign];
}

// Interferometer phase from a path difference, phi = k dz (paraxial k_z ~ k).
inline double phase_from_path(double delta_z, const SagnacModel& model)
{
    return model.k_beam * delta_z;
}

namespace phase
{
struct PointMass
{
    double value = 0.0;
};
struct Gaussian
{
    double mean = 0.0;
    double sigma = 0.0;
};
struct Uniform
{
    double low = 0.0;
    double high = 0.0;
};
struct Empirical
{
    std::vector<double> samples;
};
} // namespace phase

using PhaseDistribution = std::variant<phase::PointMass, phase::Gaussian, phase::Uniform, phase::Empirical>;

// <cos phi> under the distribution.
inline double mean_cosine(const PhaseDistribution& dist)
{
    struct Visitor
    {
        double operator()(const phase::PointMass& d) const { return std::cos(d.value); }
        double operator()(const phase::Gaussian& d) const
        {
            if (!(d.sigma >= 0.0))
                throw DomainError("phase standard deviation must be non-negative");
            return std::cos(d.mean) * std::exp(-0.5 * d.sigma * d.sigma);
        }
        double operator()(const phase::Uniform& d) const
        {
            if (!(d.high >= d.low))
                throw DomainError("uniform phase range is inverted");
            if (d.high == d.low)
                return std::cos(d.low);
            return (std::sin(d.high) - std::sin(d.low)) / (d.high - d.low);
        }
        double operator()(const phase::Empirical& d) const
        {
            if (d.samples.empty())
                throw DomainError("empirical phase distribution has no samples");
            double sum = 0.0;
            for (double phi : d.samples)
                sum += std::cos(phi);
            return sum / static_cast<double>(d.samples.size());
        }
    };
    return std::visit(Visitor{}, dist);
}

// V_Q = V <cos phi>_Q, the fringe visibility left after fast phase fluctuation.
inline double averaged_visibility(double visibility, const PhaseDistribution& dist)
{
    if (!(visibility >= 0.0 && visibility <= 1.0))
        throw DomainError("visibility must lie in [0, 1]");
    return visibility * mean_cosine(dist);
}

// Normalized polarization state c_H |H> + c_V |V>.
class PolarizationState
{
public:
    PolarizationState(std::complex<double> c_h, std::complex<double> c_v) : c_h_(c_h), c_v_(c_v)
    {
        const double norm = std::norm(c_h) + std::norm(c_v);
        if (!std::isfinite(norm) || std::abs(norm - 1.0) > 1e-12)
            throw DomainError("polarization state is not normalized");
    }

    static PolarizationState horizontal() { return {1.0, 0.0}; }
    static PolarizationState vertical() { return {0.0, 1.0}; }
    // cos(angle) |H> + sin(angle) |V>
    static PolarizationState linear(double angle) { return {std::cos(angle), std::sin(angle)}; }
    // (|H> - e^{i phi} |V>) / sqrt(2)
    static PolarizationState antidiagonal(double phi)
    {
        const double r = 1.0 / std::sqrt(2.0);
        return {r, -r * std::polar(1.0, phi)};
    }

    std::complex<double> h() const noexcept { return c_h_; }
    std::complex<double> v() const noexcept { return c_v_; }

private:
    std::complex<double> c_h_;
    std::complex<double> c_v_;
};

inline constexpr double min_postselection_overlap = 1e-15;

// A_w = <ps| sigma_z |i> / <ps|i>, sigma_z = diag(1, -1) in {H, V}.
inline std::complex<double> weak_value_amplification(const PolarizationState& initial,
                                                     const PolarizationState& postselected)
{
    const std::complex<double> overlap = std::conj(postselected.h()) * initial.h() + std::conj(postselected.v()) * initial.v();
    if (std::abs(overlap) <= min_postselection_overlap)
        throw NumericError("post-selected state is orthogonal to the initial state");
    const std::complex<double> sz = std::conj(postselected.h()) * initial.h() - std::conj(postselected.v()) * initial.v();
    return sz / overlap;
}

struct WvaRow
{
    double phi = 0.0;
    std::complex<double> factor;
    double modulus = 0.0;
    bool singular = false;
};

// |A_w| against a phase on the initial state (|H> - e^{i phi}|V>)/sqrt 2,
// post-selecting cos(t)|H> + sin(t)|V>. Singular points are flagged, not thrown.
inline std::vector<WvaRow> wva_scan(const std::vector<double>& phi_grid, double theta_ps)
{
    std::vector<WvaRow> rows;
    rows.reserve(phi_grid.size());
    const PolarizationState post = PolarizationState::linear(theta_ps);
    for (double phi : phi_grid)
    {
        WvaRow row;
        row.phi = phi;
        try
        {
            row.factor = weak_value_amplification(PolarizationState::antidiagonal(phi), post);
            row.modulus = std::abs(row.factor);
        }
        catch (const NumericError&)
        {
            row.factor = {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
            row.modulus = std::numeric_limits<double>::infinity();
            row.singular = true;
        }
        rows.push_back(row);
    }
    return rows;
}

} // namespace homtilt::singlephoton

#endif
