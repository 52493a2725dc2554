#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "homtilt/optics.hpp"
#include "homtilt/quadrature.hpp"

using namespace homtilt;

TEST(GaussLegendre, IntegratesPolynomialsExactly)
{
    const auto rule = gauss_legendre(7);
    double w = 0.0, x12 = 0.0, x13 = 0.0;
    for (std::size_t i = 0; i < 7; ++i)
    {
        w += rule.weights[i];
        x12 += rule.weights[i] * std::pow(rule.nodes[i], 12);
        x13 += rule.weights[i] * std::pow(rule.nodes[i], 13);
    }
    EXPECT_NEAR(w, 2.0, 1e-14);
    EXPECT_NEAR(x12, 2.0 / 13.0, 1e-14);
    EXPECT_NEAR(x13, 0.0, 1e-15);
}

TEST(GaussLegendre, LargeRuleWeightsSumToTwo)
{
    const auto rule = gauss_legendre(801);
    double w = 0.0;
    for (double wi : rule.weights)
        w += wi;
    EXPECT_NEAR(w, 2.0, 1e-12);
    EXPECT_EQ(rule.nodes[400], 0.0);
}

TEST(GaussQuadrature2d, IsotropicGaussian)
{
    for (double sigma : {1.0, 2000.0, 2.5e5})
    {
        auto f = [sigma](double x, double y) { return std::exp(-(x * x + y * y) / (sigma * sigma)); };
        const double got = gauss_quadrature_2d(f, 8.0 * sigma);
        const double want = std::numbers::pi * sigma * sigma;
        EXPECT_NEAR(got / want, 1.0, 1e-8);
    }
}

TEST(GaussQuadrature2d, ZeroIntegrand)
{
    EXPECT_EQ(gauss_quadrature_2d([](double, double) { return 0.0; }, 3.0), 0.0);
}

TEST(GaussQuadrature2d, ConvergedUnderDoubling)
{
    // shifted, anisotropic Gaussian times a slow cosine
    auto f = [](double x, double y) {
        return std::exp(-0.5 * (x - 1.0) * (x - 1.0) - 2.0 * y * y) * (1.0 + 0.3 * std::cos(0.7 * x * y));
    };
    const double coarse = gauss_quadrature_2d(f, 10.0, 401);
    const double fine = gauss_quadrature_2d(f, 10.0, 802);
    EXPECT_LT(std::abs(fine - coarse) / std::abs(fine), 1e-10);
}

TEST(GaussQuadrature2d, PreconditionsAndFailures)
{
    auto one = [](double, double) { return 1.0; };
    EXPECT_THROW(gauss_quadrature_2d(one, 1.0, 50), DomainError);
    EXPECT_THROW(gauss_quadrature_2d(one, 0.0), DomainError);
    try
    {
        gauss_quadrature_2d([](double x, double) { return x > 0.5 ? NAN : 1.0; }, 1.0, 51);
        FAIL() << "expected NumericError";
    }
    catch (const NumericError& e)
    {
        EXPECT_NE(std::string(e.what()).find("at ("), std::string::npos);
    }
}

TEST(SumDifferenceQuadrature, NormalizedBiphotonDensity)
{
    // |Psi|^2 over the plane is 1/2 for unit-norm v and gamma (Jacobian of q+-)
    const auto amp = BiphotonAmplitude::normalized({});
    auto density = [&](double q1, double q2) {
        const double psi = biphoton_value(q1, q2, amp);
        return 2.0 * psi * psi;
    };
    const double total = integrate_sum_difference(density, 8.0 / amp.params.w_p, 8.0 / amp.params.omega_c);
    EXPECT_NEAR(total, 1.0, 1e-6);
}
