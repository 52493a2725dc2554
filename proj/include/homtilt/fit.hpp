#ifndef HOMTILT_FIT_HPP
#define HOMTILT_FIT_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "probability.hpp"

namespace homtilt::fit
{

struct DataPoint
{
    double x = 0.0;
    double y = 0.0;
    double y_err = 1.0;
};

enum class FitStatus
{
    Converged,
    MaxIterations,
    Stalled,        // no further decrease but gradient above tolerance
    Unidentifiable, // normal matrix singular at the solution
    NumericFailure,
};

inline const char* to_string(FitStatus status)
{
    switch (status)
    {
    case FitStatus::Converged: return "converged";
    case FitStatus::MaxIterations: return "max_iterations";
    case FitStatus::Stalled: return "stalled";
    case FitStatus::Unidentifiable: return "unidentifiable";
    case FitStatus::NumericFailure: return "numeric_failure";
    }
    return "unknown";
}

struct FitResult
{
    std::vector<std::string> names;
    std::vector<double> parameters;
    std::vector<double> std_errors;
    double residual_norm = 0.0; // sqrt(chi^2) of the weighted residuals
    double gradient_measure = 0.0;
    bool converged = false;
    std::size_t iterations = 0;
    FitStatus status = FitStatus::NumericFailure;

    std::size_t index_of(std::string_view name) const
    {
        for (std::size_t i = 0; i < names.size(); ++i)
            if (names[i] == name)
                return i;
        throw DomainError("no fit parameter named " + std::string(name));
    }
    double value(std::string_view name) const { return parameters[index_of(name)]; }
    double error(std::string_view name) const { return std_errors[index_of(name)]; }
};

struct FitOptions
{
    double gradient_tolerance = 1e-10;
    std::size_t max_iterations = 200;
    double jacobian_step = 1e-6;     // relative central-difference step
    double check_step = 1e-3;        // relative step of the five-point Jacobian used in the convergence test
    double identifiability_floor = 1e-12; // min eigenvalue of the correlation-scaled normal matrix
    std::vector<double> scales;      // typical parameter magnitudes; default |initial| or 1
};

// Damped Gauss-Newton (Levenberg-Marquardt) on weighted residuals
// (y - model(x, p)) / y_err with a central-difference Jacobian.
//
// Convergence is declared when every Jacobian column is orthogonal to the
// residual to within gradient_tolerance, max_j |J_j . r| / (|J_j| |r|), or
// when the residual itself is at round-off level relative to |y / y_err|.
// A converged point whose normal matrix is singular is reported as
// Unidentifiable rather than success.
template <class Model>
FitResult least_squares(Model&& model, std::span<const DataPoint> data, std::vector<double> initial,
                        std::vector<std::string> names, const FitOptions& options = {})
{
    const std::size_t n = data.size();
    const std::size_t m = initial.size();
    if (names.size() != m)
        throw DomainError("parameter names and initial guess differ in length");
    if (n < m)
        throw DomainError("fewer data points than parameters");
    for (const DataPoint& d : data)
    {
        detail::require_finite(d.x, "data x");
        detail::require_finite(d.y, "data y");
        detail::require_positive(d.y_err, "data y_err");
    }

    std::vector<double> scales(m);
    for (std::size_t j = 0; j < m; ++j)
    {
        scales[j] = j < options.scales.size() ? options.scales[j] : std::abs(initial[j]);
        if (!(scales[j] > 0.0) || !std::isfinite(scales[j]))
            scales[j] = 1.0;
    }

    // residuals this small relative to |y / y_err| are round-off of an exact fit
    constexpr double exact_fit_floor = 1e-13;
    using Vec = Eigen::VectorXd;
    using Mat = Eigen::MatrixXd;

    double y_norm = 0.0;
    for (const DataPoint& d : data)
        y_norm += (d.y / d.y_err) * (d.y / d.y_err);
    y_norm = std::sqrt(y_norm);

    auto residuals = [&](const std::vector<double>& p, Vec& r) {
        r.resize(static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i)
        {
            const double value = model(data[i].x, std::span<const double>(p));
            r[static_cast<Eigen::Index>(i)] = (data[i].y - value) / data[i].y_err;
        }
        return r.allFinite();
    };
    // J = d model / dp, weighted; residual gradient is -J.
    // Central differences for the iterations; the five-point stencil with a
    // wider step keeps the convergence test clear of round-off.
    auto differentiate = [&](std::vector<double> p, Mat& jac, double rel_step, bool five_point) {
        jac.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
        auto eval = [&](std::size_t j, double base, double offset, std::size_t i) {
            p[j] = base + offset;
            const double value = model(data[i].x, std::span<const double>(p));
            p[j] = base;
            return value;
        };
        for (std::size_t j = 0; j < m; ++j)
        {
            const double base = p[j];
            const double h = rel_step * std::max(std::abs(base), scales[j]);
            for (std::size_t i = 0; i < n; ++i)
            {
                const double near = eval(j, base, h, i) - eval(j, base, -h, i);
                const double d = five_point ? (8.0 * near - (eval(j, base, 2.0 * h, i) - eval(j, base, -2.0 * h, i))) / (12.0 * h)
                                            : near / (2.0 * h);
                jac(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = d / data[i].y_err;
            }
        }
        return jac.allFinite();
    };
    auto jacobian = [&](const std::vector<double>& p, Mat& jac) { return differentiate(p, jac, options.jacobian_step, false); };
    auto gradient_measure = [&](const std::vector<double>& p, const Vec& r) {
        const double r_norm = r.norm();
        if (r_norm <= exact_fit_floor * std::max(y_norm, std::numeric_limits<double>::min()))
            return 0.0;
        Mat jac;
        if (!differentiate(p, jac, options.check_step, true))
            return std::numeric_limits<double>::infinity();
        double worst = 0.0;
        const Vec g = jac.transpose() * r;
        for (Eigen::Index j = 0; j < jac.cols(); ++j)
        {
            const double col = jac.col(j).norm();
            if (col > 0.0)
                worst = std::max(worst, std::abs(g[j]) / (col * r_norm));
        }
        return worst;
    };

    FitResult result;
    result.names = std::move(names);
    std::vector<double> p = std::move(initial);

    Vec r;
    Mat jac;
    if (!residuals(p, r) || !jacobian(p, jac))
    {
        result.parameters = p;
        result.std_errors.assign(m, std::numeric_limits<double>::quiet_NaN());
        result.residual_norm = std::numeric_limits<double>::quiet_NaN();
        result.status = FitStatus::NumericFailure;
        return result;
    }
    double chi2 = r.squaredNorm();
    Mat normal = jac.transpose() * jac;
    double mu = 1e-3;
    double growth = 2.0;
    FitStatus status = FitStatus::MaxIterations;
    std::size_t iter = 0;

    for (; iter < options.max_iterations; ++iter)
    {
        result.gradient_measure = gradient_measure(p, r);
        if (result.gradient_measure <= options.gradient_tolerance)
        {
            status = FitStatus::Converged;
            break;
        }

        const Vec g = jac.transpose() * r;
        Vec diag = normal.diagonal();
        const double diag_max = diag.maxCoeff();
        for (Eigen::Index j = 0; j < diag.size(); ++j)
            diag[j] = std::max(diag[j], 1e-15 * std::max(diag_max, 1e-300));

        bool accepted = false;
        bool stalled = false;
        while (!accepted)
        {
            Mat damped = normal;
            damped.diagonal() += mu * diag;
            const Vec step = damped.ldlt().solve(g);
            if (!step.allFinite())
            {
                mu *= growth;
                growth *= 2.0;
                if (mu > 1e20)
                {
                    stalled = true;
                    break;
                }
                continue;
            }

            double relative_step = 0.0;
            std::vector<double> trial = p;
            for (std::size_t j = 0; j < m; ++j)
            {
                trial[j] += step[static_cast<Eigen::Index>(j)];
                relative_step = std::max(relative_step, std::abs(step[static_cast<Eigen::Index>(j)]) /
                                                            std::max(std::abs(p[j]), scales[j]));
            }

            Vec r_trial;
            const bool finite = residuals(trial, r_trial);
            const double chi2_trial = finite ? r_trial.squaredNorm() : std::numeric_limits<double>::infinity();
            if (finite && chi2_trial < chi2)
            {
                // gain ratio of actual to predicted decrease (Nielsen update)
                const double predicted = step.dot(mu * diag.asDiagonal() * step + g);
                const double rho = predicted > 0.0 ? (chi2 - chi2_trial) / predicted : 0.0;
                mu *= std::max(1.0 / 3.0, 1.0 - std::pow(2.0 * rho - 1.0, 3));
                growth = 2.0;
                p = std::move(trial);
                r = std::move(r_trial);
                chi2 = chi2_trial;
                if (!jacobian(p, jac))
                {
                    status = FitStatus::NumericFailure;
                    stalled = true;
                    break;
                }
                normal = jac.transpose() * jac;
                accepted = true;
            }
            else
            {
                if (relative_step < 1e-15 || mu > 1e20)
                {
                    stalled = true;
                    break;
                }
                mu *= growth;
                growth *= 2.0;
            }
        }
        if (stalled)
        {
            if (status != FitStatus::NumericFailure)
            {
                // chi^2 no longer resolves the remaining decrease; finish with
                // undamped Gauss-Newton steps judged by the gradient itself
                result.gradient_measure = gradient_measure(p, r);
                for (int polish = 0; polish < 8 && result.gradient_measure > options.gradient_tolerance; ++polish)
                {
                    const Vec step = normal.ldlt().solve(jac.transpose() * r);
                    if (!step.allFinite())
                        break;
                    std::vector<double> trial = p;
                    for (std::size_t j = 0; j < m; ++j)
                        trial[j] += step[static_cast<Eigen::Index>(j)];
                    Vec r_trial;
                    Mat jac_trial;
                    if (!residuals(trial, r_trial) || !jacobian(trial, jac_trial))
                        break;
                    const double measure = gradient_measure(trial, r_trial);
                    if (!(measure < result.gradient_measure))
                        break;
                    p = std::move(trial);
                    r = std::move(r_trial);
                    jac = std::move(jac_trial);
                    chi2 = r.squaredNorm();
                    normal = jac.transpose() * jac;
                    result.gradient_measure = measure;
                }
                status = result.gradient_measure <= options.gradient_tolerance ? FitStatus::Converged : FitStatus::Stalled;
            }
            break;
        }
    }
    if (status == FitStatus::MaxIterations)
    {
        result.gradient_measure = gradient_measure(p, r);
        if (result.gradient_measure <= options.gradient_tolerance)
            status = FitStatus::Converged;
    }

    // Covariance from the local quadratic model, (J^T J)^-1.
    result.std_errors.assign(m, std::numeric_limits<double>::infinity());
    const Vec d = normal.diagonal();
    if ((d.array() > 0.0).all() && normal.allFinite())
    {
        const Vec inv_sqrt = d.array().sqrt().inverse();
        const Mat correlation = inv_sqrt.asDiagonal() * normal * inv_sqrt.asDiagonal();
        Eigen::SelfAdjointEigenSolver<Mat> eig(correlation);
        const double min_eig = eig.eigenvalues().minCoeff();
        if (min_eig > options.identifiability_floor)
        {
            const Mat cov = inv_sqrt.asDiagonal() * correlation.inverse() * inv_sqrt.asDiagonal();
            for (std::size_t j = 0; j < m; ++j)
                result.std_errors[j] = std::sqrt(std::max(0.0, cov(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j))));
        }
        else if (status == FitStatus::Converged || status == FitStatus::Stalled)
        {
            status = FitStatus::Unidentifiable;
        }
    }
    else if (status == FitStatus::Converged || status == FitStatus::Stalled)
    {
        status = FitStatus::Unidentifiable;
    }

    result.parameters = std::move(p);
    result.residual_norm = std::sqrt(chi2);
    result.iterations = iter;
    result.status = status;
    result.converged = status == FitStatus::Converged;
    return result;
}

// ---------------------------------------------------------------------------
// Gaussian peak/dip: a exp(-(x - x0)^2 / (2 sigma^2)) + b

struct GaussianGuess
{
    double amplitude = 1.0;
    double center = 0.0;
    double sigma = 1.0;
    double offset = 0.0;
};

inline double gaussian_model(double x, std::span<const double> p)
{
    const double u = (x - p[1]) / p[2];
    return p[0] * std::exp(-0.5 * u * u) + p[3];
}

// Moment-based starting point for a single peak (or dip) over a baseline.
inline GaussianGuess guess_gaussian(std::span<const DataPoint> data)
{
    if (data.empty())
        throw DomainError("no data to guess from");
    auto [lo, hi] = std::minmax_element(data.begin(), data.end(),
                                        [](const DataPoint& a, const DataPoint& b) { return a.y < b.y; });
    const double first = data.front().y;
    const double last = data.back().y;
    const double baseline = 0.5 * (first + last);
    const bool is_peak = std::abs(hi->y - baseline) >= std::abs(lo->y - baseline);
    const DataPoint& extreme = is_peak ? *hi : *lo;
    GaussianGuess guess{extreme.y - baseline, extreme.x, 0.0, baseline};

    double weight = 0.0;
    double second = 0.0;
    for (const DataPoint& d : data)
    {
        const double w = std::max(0.0, (d.y - baseline) / (guess.amplitude == 0.0 ? 1.0 : guess.amplitude));
        weight += w;
        second += w * (d.x - guess.center) * (d.x - guess.center);
    }
    const double span = data.back().x - data.front().x;
    guess.sigma = weight > 0.0 ? std::sqrt(second / weight) : std::abs(span) / 4.0;
    if (!(guess.sigma > 0.0))
        guess.sigma = std::abs(span) > 0.0 ? std::abs(span) / 4.0 : 1.0;
    return guess;
}

// Weighted fit of gaussian_model; parameters named amplitude, center, sigma, offset.
inline FitResult fit_gaussian_dip(std::span<const DataPoint> data, const GaussianGuess& initial, FitOptions options = {})
{
    if (data.size() < 5)
        throw DomainError("a Gaussian fit needs at least 5 points");
    if (options.scales.empty())
    {
        const double amp_scale = std::max(std::abs(initial.amplitude), std::abs(initial.offset));
        options.scales = {amp_scale, std::abs(initial.sigma), std::abs(initial.sigma), amp_scale};
    }
    FitResult fit = least_squares(gaussian_model, data, {initial.amplitude, initial.center, initial.sigma, initial.offset},
                                  {"amplitude", "center", "sigma", "offset"}, options);
    fit.parameters[2] = std::abs(fit.parameters[2]);
    return fit;
}

// ---------------------------------------------------------------------------
// HOM dip counts A (1 +- V exp(-(2 pi (delta - delta0))^2 / (2 dL^2))),
// minus for the same-polarization projection.

struct DipGuess
{
    double amplitude = 1.0;
    double visibility = 0.9;
    double coherence_length = 1e-4;
    double center = 0.0;
};

// Starting point from the baseline of the outer points and the area of the dip (or peak).
inline DipGuess guess_hom_dip(std::span<const DataPoint> data, Setting setting)
{
    if (data.size() < 5)
        throw DomainError("a dip guess needs at least 5 points");
    const std::size_t edge = std::max<std::size_t>(2, data.size() / 10);
    double baseline = 0.0;
    for (std::size_t i = 0; i < edge; ++i)
        baseline += data[i].y + data[data.size() - 1 - i].y;
    baseline /= 2.0 * static_cast<double>(edge);

    const auto by_y = [](const DataPoint& a, const DataPoint& b) { return a.y < b.y; };
    const DataPoint& extreme = setting == Setting::Same ? *std::min_element(data.begin(), data.end(), by_y)
                                                        : *std::max_element(data.begin(), data.end(), by_y);
    const double depth = std::abs(extreme.y - baseline);
    double area = 0.0;
    for (std::size_t i = 1; i < data.size(); ++i)
    {
        const double sign = setting == Setting::Same ? -1.0 : 1.0;
        const double a = sign * (data[i - 1].y - baseline);
        const double b = sign * (data[i].y - baseline);
        area += 0.5 * (a + b) * (data[i].x - data[i - 1].x);
    }
    const double span = std::abs(data.back().x - data.front().x);
    double width = depth > 0.0 && area > 0.0 ? area / (depth * std::sqrt(2.0 * std::numbers::pi)) : span / 8.0;
    width = std::clamp(width, span / 100.0, span / 2.0);

    DipGuess guess;
    guess.amplitude = baseline > 0.0 ? baseline : std::max(1.0, depth);
    guess.visibility = std::clamp(depth / guess.amplitude, 0.05, 1.0);
    guess.coherence_length = 2.0 * std::numbers::pi * width;
    guess.center = extreme.x;
    return guess;
}

inline FitResult fit_hom_dip(std::span<const DataPoint> data, const DipGuess& initial, Setting setting,
                             FitOptions options = {})
{
    if (data.size() < 5)
        throw DomainError("a dip fit needs at least 5 points");
    const double sign = setting == Setting::Same ? -1.0 : 1.0;
    auto model = [sign](double delta, std::span<const double> p) {
        const double x = 2.0 * std::numbers::pi * (delta - p[3]);
        return p[0] * (1.0 + sign * p[1] * std::exp(-x * x / (2.0 * p[2] * p[2])));
    };
    if (options.scales.empty())
        options.scales = {std::abs(initial.amplitude), 1.0, std::abs(initial.coherence_length),
                          std::abs(initial.coherence_length) / (2.0 * std::numbers::pi)};
    FitResult fit = least_squares(model, data, {initial.amplitude, initial.visibility, initial.coherence_length, initial.center},
                                  {"amplitude", "visibility", "coherence_length", "center"}, options);
    fit.parameters[2] = std::abs(fit.parameters[2]);
    return fit;
}

} // namespace homtilt::fit

#endif
