#pragma once

// Generalized inverse Gaussian variates, density
//   p(w) ∝ w^{q-1} exp(-(a w + b / w) / 2),  w > 0,
// using the ratio-of-uniforms and concave-region rejection methods of
// Hörmann & Leydold (2014), "Generating generalized inverse Gaussian random
// variates".

#include "robustda/core.hpp"
#include "robustda/random.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace robustda {

namespace detail::gig {

/// Mode of y^{lambda-1} exp(-omega/2 (y + 1/y)).
inline double mode(double lambda, double omega) {
    if (lambda >= 1.0) return (std::sqrt((lambda - 1.0) * (lambda - 1.0) + omega * omega) + (lambda - 1.0)) / omega;
    return omega / (std::sqrt((1.0 - lambda) * (1.0 - lambda) + omega * omega) + (1.0 - lambda));
}

/// Ratio-of-uniforms without mode shift; for lambda in [0,1] with moderate omega.
template <class URBG>
double rou_noshift(double lambda, double omega, URBG& rng) {
    const double t = 0.5 * (lambda - 1.0);
    const double s = 0.25 * omega;
    const double xm = mode(lambda, omega);
    const double nc = t * std::log(xm) - s * (xm + 1.0 / xm);
    const double ym = ((lambda + 1.0) + std::sqrt((lambda + 1.0) * (lambda + 1.0) + omega * omega)) / omega;
    const double um = std::exp(0.5 * (lambda + 1.0) * std::log(ym) - s * (ym + 1.0 / ym) - nc);
    for (;;) {
        const double u = um * rnd::uniform_open(rng);
        const double v = rnd::uniform_open(rng);
        const double x = u / v;
        if (std::log(v) <= t * std::log(x) - s * (x + 1.0 / x) - nc) return x;
    }
}

/// Ratio-of-uniforms with mode shift; for lambda > 1 or omega > 1 roughly.
template <class URBG>
double rou_shift(double lambda, double omega, URBG& rng) {
    const double t = 0.5 * (lambda - 1.0);
    const double s = 0.25 * omega;
    const double xm = mode(lambda, omega);
    const double nc = t * std::log(xm) - s * (xm + 1.0 / xm);

    // Roots of the cubic giving the bounding rectangle.
    const double a = -(2.0 * (lambda + 1.0) / omega + xm);
    const double b = 2.0 * (lambda - 1.0) * xm / omega - 1.0;
    const double c = xm;
    const double p = b - a * a / 3.0;
    const double q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
    const double fi = std::acos(-q / (2.0 * std::sqrt(-(p * p * p) / 27.0)));
    const double fak = 2.0 * std::sqrt(-p / 3.0);
    const double y1 = fak * std::cos(fi / 3.0) - a / 3.0;
    const double y2 = fak * std::cos(fi / 3.0 + 4.0 / 3.0 * std::numbers::pi) - a / 3.0;
    const double uplus = (y1 - xm) * std::exp(t * std::log(y1) - s * (y1 + 1.0 / y1) - nc);
    const double uminus = (y2 - xm) * std::exp(t * std::log(y2) - s * (y2 + 1.0 / y2) - nc);

    for (;;) {
        const double u = uminus + rnd::uniform_open(rng) * (uplus - uminus);
        const double v = rnd::uniform_open(rng);
        const double x = u / v + xm;
        if (x <= 0.0) continue;
        if (std::log(v) <= t * std::log(x) - s * (x + 1.0 / x) - nc) return x;
    }
}

/// Rejection from a three-piece envelope; for lambda < 1 and small omega
/// where the density is T-concave only near the mode.
template <class URBG>
double concave_region(double lambda, double omega, URBG& rng) {
    const double xm = mode(lambda, omega);
    const double x0 = omega / (1.0 - lambda);
    const double k0 = std::exp((lambda - 1.0) * std::log(xm) - 0.5 * omega * (xm + 1.0 / xm));
    const double area0 = k0 * x0;

    double k1, area1, k2, area2;
    if (x0 >= 2.0 / omega) {
        k1 = 0.0;
        area1 = 0.0;
        k2 = std::pow(x0, lambda - 1.0);
        area2 = k2 * 2.0 * std::exp(-omega * x0 / 2.0) / omega;
    } else {
        k1 = std::exp(-omega);
        area1 = (lambda == 0.0) ? k1 * std::log(2.0 / (omega * omega))
                                : k1 / lambda * (std::pow(2.0 / omega, lambda) - std::pow(x0, lambda));
        k2 = std::pow(2.0 / omega, lambda - 1.0);
        area2 = k2 * 2.0 * std::exp(-1.0) / omega;
    }
    const double total = area0 + area1 + area2;

    for (;;) {
        double v = total * rnd::uniform_open(rng);
        double x, hx;
        if (v <= area0) {
            x = x0 * v / area0;
            hx = k0;
        } else if ((v -= area0) <= area1) {
            if (lambda == 0.0) {
                x = omega * std::exp(std::exp(omega) * v);
                hx = k1 / x;
            } else {
                x = std::pow(std::pow(x0, lambda) + lambda / k1 * v, 1.0 / lambda);
                hx = k1 * std::pow(x, lambda - 1.0);
            }
        } else {
            v -= area1;
            const double lower = (x0 > 2.0 / omega) ? x0 : 2.0 / omega;
            x = -2.0 / omega * std::log(std::exp(-omega / 2.0 * lower) - omega / (2.0 * k2) * v);
            hx = k2 * std::exp(-omega / 2.0 * x);
        }
        const double u = rnd::uniform_open(rng) * hx;
        if (std::log(u) <= (lambda - 1.0) * std::log(x) - omega / 2.0 * (x + 1.0 / x)) return x;
    }
}

/// Standardized GIG: density ∝ y^{lambda-1} exp(-omega/2 (y + 1/y)), lambda >= 0.
template <class URBG>
double standardized(double lambda, double omega, URBG& rng) {
    if (lambda > 2.0 || omega > 3.0) return rou_shift(lambda, omega, rng);
    if (lambda >= 1.0 - 2.25 * omega * omega || omega > 0.2) return rou_noshift(lambda, omega, rng);
    return concave_region(lambda, omega, rng);
}

}  // namespace detail::gig

/// One draw from GIG(a, b, q) with density ∝ w^{q-1} exp(-(a w + b/w)/2).
/// a = 0 (with q < 0) and b = 0 (with q > 0) are the inverse-gamma and gamma
/// limits.
template <class URBG>
double sample_gig(double a, double b, double q, URBG& rng) {
    if (!(a >= 0.0) || !(b >= 0.0) || !std::isfinite(q) || (a == 0.0 && b == 0.0))
        throw MixingError("invalid GIG parameters (a=" + std::to_string(a) + ", b=" + std::to_string(b) +
                          ", q=" + std::to_string(q) + ")");
    if (b == 0.0) {
        if (!(q > 0.0)) throw MixingError("GIG with b = 0 requires q > 0");
        return rnd::gamma(q, 0.5 * a, rng);
    }
    if (a == 0.0) {
        if (!(q < 0.0)) throw MixingError("GIG with a = 0 requires q < 0");
        return 1.0 / rnd::gamma(-q, 0.5 * b, rng);
    }
    const double omega = std::sqrt(a * b);
    const double eta = std::sqrt(b / a);
    if (omega < 1e-12) {
        // Below this the standardized samplers lose precision; the limiting
        // gamma / inverse-gamma laws are exact to working accuracy.
        if (q > 0.0) return rnd::gamma(q, 0.5 * a, rng);
        if (q < 0.0) return 1.0 / rnd::gamma(-q, 0.5 * b, rng);
    }
    const double y = detail::gig::standardized(std::abs(q), omega, rng);
    return q >= 0.0 ? eta * y : eta / y;
}

}  // namespace robustda
