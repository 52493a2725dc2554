#ifndef HOMTILT_ERRORS_HPP
#define HOMTILT_ERRORS_HPP

#include <cmath>
#include <stdexcept>
#include <string>

namespace homtilt
{

// Base class for every error raised by the library.
class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

// A parameter lies outside its mathematical domain (negative width, zero slope, ...).
class DomainError : public Error
{
public:
    using Error::Error;
};

// Inputs are finite and well-formed but outside the regime where the
// first-order (small-angle, paraxial) expressions hold.
class ValidityError : public Error
{
public:
    using Error::Error;
};

// Non-finite intermediate values or a singular computation.
class NumericError : public Error
{
public:
    using Error::Error;
};

namespace detail
{

inline void require_finite(double value, const char* what)
{
    if (!std::isfinite(value))
        throw NumericError(std::string(what) + " is not finite");
}

inline void require_positive(double value, const char* what)
{
    require_finite(value, what);
    if (!(value > 0.0))
        throw DomainError(std::string(what) + " must be positive, got " + std::to_string(value));
}

} // namespace detail
} // namespace homtilt

#endif
