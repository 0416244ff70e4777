#pragma once

// Random variate primitives on top of <random>. Each helper constructs its
// distribution object per call so that a draw consumes the generator in a
// fixed, documented way and no hidden state carries over between draws.

#include <cmath>
#include <cstdint>
#include <random>

namespace robustda {

/// Generator used by the library and CLI.
using Rng = std::mt19937_64;

namespace rnd {

/// Uniform on the open interval (0, 1).
template <class URBG>
double uniform_open(URBG& rng) {
    for (;;) {
        const double u = std::generate_canonical<double, 53>(rng);
        if (u > 0.0 && u < 1.0) return u;
    }
}

template <class URBG>
double standard_normal(URBG& rng) {
    return std::normal_distribution<double>(0.0, 1.0)(rng);
}

/// Gamma with shape/rate parameterization: density ∝ w^{shape-1} e^{-rate w}.
template <class URBG>
double gamma(double shape, double rate, URBG& rng) {
    return std::gamma_distribution<double>(shape, 1.0 / rate)(rng);
}

/// Chi-square with real degrees of freedom.
template <class URBG>
double chi_square(double df, URBG& rng) {
    return gamma(0.5 * df, 0.5, rng);
}

}  // namespace rnd
}  // namespace robustda
