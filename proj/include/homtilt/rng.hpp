#ifndef HOMTILT_RNG_HPP
#define HOMTILT_RNG_HPP

#include <cstdint>
#include <limits>

namespace homtilt
{

// Independent random streams used by the simulators.
enum class Stream : std::uint64_t
{
    OplPath = 1,
    HomCounts = 2,
    SagnacCounts = 3,
    PoissonReference = 4,
    Calibration = 5,
    Replicate = 6,
    ScanCounts = 7,
    SagnacCalibration = 8,
};

namespace detail
{
constexpr std::uint64_t golden_gamma = 0x9e3779b97f4a7c15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) noexcept
{
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}
} // namespace detail

// Counter-based generator: the n-th output is a pure function of
// (seed, stream, index, n), so any bin or replicate can be drawn on any
// thread in any order with identical results. Satisfies
// UniformRandomBitGenerator.
class CounterRng
{
public:
    using result_type = std::uint64_t;

    CounterRng(std::uint64_t seed, Stream stream, std::uint64_t index) noexcept
        : CounterRng(seed, static_cast<std::uint64_t>(stream), index)
    {
    }

    CounterRng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) noexcept
    {
        std::uint64_t key = detail::mix64(seed + detail::golden_gamma);
        key = detail::mix64(key ^ detail::mix64(stream * 0xd1b54a32d192ed03ULL + 1));
        key = detail::mix64(key ^ detail::mix64(index * 0xaef17502108ef2d9ULL + 2));
        key_ = key;
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept
    {
        ++counter_;
        return detail::mix64(key_ + counter_ * detail::golden_gamma);
    }

private:
    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
};

} // namespace homtilt

#endif
