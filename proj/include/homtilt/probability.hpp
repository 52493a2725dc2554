#ifndef HOMTILT_PROBABILITY_HPP
#define HOMTILT_PROBABILITY_HPP

namespace homtilt
{

// Polarization projection for a coincidence: both photons on the same
// diagonal state (++ or --) or on orthogonal ones (+- or -+).
enum class Setting
{
    Same,
    Different
};

constexpr double sign_of(Setting setting) noexcept
{
    return setting == Setting::Same ? 1.0 : -1.0;
}

// Probabilities of the two complementary outcomes; plus + minus == 1 exactly.
struct ProbabilityPair
{
    double plus = 0.5;
    double minus = 0.5;

    double operator[](Setting setting) const noexcept { return setting == Setting::Same ? plus : minus; }
    double difference() const noexcept { return plus - minus; }

    // {(1 + c)/2, (1 - c)/2} for a contrast c in [-1, 1]. The larger entry is
    // formed as 1 - smaller, which makes the sum round to exactly 1.
    static ProbabilityPair from_contrast(double contrast) noexcept
    {
        if (contrast >= 0.0)
        {
            const double minus = 0.5 * (1.0 - contrast);
            return {1.0 - minus, minus};
        }
        const double plus = 0.5 * (1.0 + contrast);
        return {plus, 1.0 - plus};
    }
};

} // namespace homtilt

#endif
