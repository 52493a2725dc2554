#ifndef HOMTILT_QUADRATURE_HPP
#define HOMTILT_QUADRATURE_HPP

#include <cmath>
#include <cstddef>
#include <numbers>
#include <sstream>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace homtilt
{

inline constexpr std::size_t min_quadrature_points = 51;
inline constexpr std::size_t default_quadrature_points = 401;

struct QuadratureRule
{
    std::vector<double> nodes;   // on [-1, 1]
    std::vector<double> weights; // sum to 2
};

// Gauss-Legendre rule by Newton iteration on the three-term recurrence.
inline QuadratureRule gauss_legendre(std::size_t n)
{
    if (n == 0)
        throw DomainError("Gauss-Legendre rule needs at least one node");
    const double nn = static_cast<double>(n);
    // P_n(x) and P_n'(x)
    auto legendre = [n, nn](double x) {
        double p0 = 1.0;
        double p1 = x;
        for (std::size_t j = 2; j <= n; ++j)
        {
            const double jj = static_cast<double>(j);
            const double p2 = ((2.0 * jj - 1.0) * x * p1 - (jj - 1.0) * p0) / jj;
            p0 = p1;
            p1 = p2;
        }
        return std::pair{p1, nn * (x * p1 - p0) / (x * x - 1.0)};
    };

    QuadratureRule rule{std::vector<double>(n), std::vector<double>(n)};
    for (std::size_t i = 0; i < (n + 1) / 2; ++i)
    {
        double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (nn + 0.5));
        for (int iter = 0; iter < 100; ++iter)
        {
            const auto [p, dp] = legendre(x);
            const double dx = p / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16)
                break;
        }
        const double dp = legendre(x).second;
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.nodes[i] = -x;
        rule.nodes[n - 1 - i] = x;
        rule.weights[i] = w;
        rule.weights[n - 1 - i] = w;
    }
    if (n % 2 == 1)
        rule.nodes[n / 2] = 0.0;
    return rule;
}

namespace detail
{

inline void check_sample(double value, double x, double y)
{
    if (!std::isfinite(value))
    {
        std::ostringstream msg;
        msg << "non-finite integrand sample " << value << " at (" << x << ", " << y << ")";
        throw NumericError(msg.str());
    }
}

} // namespace detail

// Tensor-product Gauss-Legendre estimate of the integral of f(x, y) over
// [-half_x, half_x] x [-half_y, half_y].
template <class F>
double integrate_rectangle(F&& f, double half_x, double half_y, std::size_t n_points = default_quadrature_points)
{
    detail::require_positive(half_x, "half_x");
    detail::require_positive(half_y, "half_y");
    if (n_points < min_quadrature_points)
        throw DomainError("quadrature needs at least 51 points per axis");
    const QuadratureRule rule = gauss_legendre(n_points);
    double total = 0.0;
    for (std::size_t i = 0; i < n_points; ++i)
    {
        const double x = half_x * rule.nodes[i];
        double row = 0.0;
        for (std::size_t j = 0; j < n_points; ++j)
        {
            const double y = half_y * rule.nodes[j];
            const double value = f(x, y);
            detail::check_sample(value, x, y);
            row += rule.weights[j] * value;
        }
        total += rule.weights[i] * row;
    }
    return total * half_x * half_y;
}

// Integral of f(q1, q2) over the square [-half_width, half_width]^2.
template <class F>
double gauss_quadrature_2d(F&& f, double half_width, std::size_t n_points = default_quadrature_points)
{
    return integrate_rectangle(std::forward<F>(f), half_width, half_width, n_points);
}

// Integral of f(q1, q2) over the plane, sampled on a rectangle in the rotated
// coordinates q_plus = q1 + q2, q_minus = q1 - q2 (Jacobian 1/2). Suited to
// integrands that are narrow along one diagonal, like the biphoton density.
template <class F>
double integrate_sum_difference(F&& f, double half_plus, double half_minus,
                                std::size_t n_points = default_quadrature_points)
{
    auto rotated = [&f](double q_plus, double q_minus) {
        return f(0.5 * (q_plus + q_minus), 0.5 * (q_plus - q_minus));
    };
    return 0.5 * integrate_rectangle(rotated, half_plus, half_minus, n_points);
}

} // namespace homtilt

#endif
