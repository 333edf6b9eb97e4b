#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace dloc {

using cplx = std::complex<double>;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;
using RVec = Eigen::VectorXd;
using Index = Eigen::Index;

inline constexpr double pi = std::numbers::pi;

/// 2-D coordinates in meters.
struct Point2
{
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point2&, const Point2&) = default;
};

inline double distance(const Point2& a, const Point2& b) { return std::hypot(a.x - b.x, a.y - b.y); }

// Error hierarchy. Everything thrown by the library derives from dloc::Error.
struct Error : std::runtime_error
{
    using std::runtime_error::runtime_error;
};

/// Geometric precondition violated (coincident points, position outside the area, ...).
struct DomainError : Error
{
    using Error::Error;
};

/// Direction outside a station's (-pi/2, pi/2) field of view.
struct OutOfFieldError : DomainError
{
    using DomainError::DomainError;
};

/// Non-finite values or divergence inside an iterative solve.
struct NumericalError : Error
{
    using Error::Error;
};

/// Invalid or inconsistent configuration.
struct ConfigError : Error
{
    using Error::Error;
};

/// Malformed input file.
struct ParseError : Error
{
    using Error::Error;
};

/// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a)
{
    a = std::remainder(a, 2.0 * pi);
    if (a <= -pi)
        a += 2.0 * pi;
    return a;
}

// splitmix64; used to derive independent per-trial seeds from one master seed.
inline std::uint64_t mix_seed(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0)
{
    return mix_seed(mix_seed(mix_seed(master) ^ a) ^ (b * 0xd1b54a32d192ed03ULL));
}

} // namespace dloc
