#pragma once

// Mixing distributions for Gaussian scale mixtures: the family registry,
// behaviour near the origin, the moment condition that keeps the latent-weight
// conditional proper, geometric-ergodicity verdicts, and sampling from the
// tilted conditional  ∝ w^{d_i/2} exp(-r w / 2) P_mix(dw).

#include "robustda/core.hpp"
#include "robustda/gig.hpp"
#include "robustda/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

namespace robustda {

namespace family {

struct PointMass {
    double w0;
};
struct FiniteDiscrete {
    std::vector<double> atoms;
    std::vector<double> probs;
};
/// Support [scale, inf), density ∝ w^{-shape-1}.
struct Pareto {
    double scale, shape;
};
/// Density ∝ w^{shape-1} e^{-rate w}.
struct Gamma {
    double shape, rate;
};
/// Density ∝ w^{q-1} exp(-(a w + b/w)/2).
struct Gig {
    double a, b, q;
};
/// Density ∝ w^{-shape-1} e^{-scale/w}.
struct InverseGamma {
    double shape, scale;
};
/// log w ~ N(mu, sigma^2).
struct LogNormal {
    double mu, sigma;
};
/// Density ∝ w^{-(1+shape)} exp(-(scale/w)^shape).
struct Frechet {
    double shape, scale;
};
struct Beta {
    double a, b;
};
/// Density ∝ w^{shape-1} exp(-(w/scale)^shape).
struct Weibull {
    double shape, scale;
};
/// Snedecor F with df1, df2 degrees of freedom.
struct F {
    double df1, df2;
};

}  // namespace family

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

/// A mixing distribution: one family with validated parameters.
class MixingSpec {
public:
    using Variant = std::variant<family::PointMass, family::FiniteDiscrete, family::Pareto, family::Gamma,
                                 family::Gig, family::InverseGamma, family::LogNormal, family::Frechet,
                                 family::Beta, family::Weibull, family::F>;

    template <class Family>
        requires std::is_constructible_v<Variant, Family>
    MixingSpec(Family f) : v_(std::move(f)) {  // NOLINT(google-explicit-constructor)
        validate();
    }

    const Variant& variant() const { return v_; }

    template <class Visitor>
    decltype(auto) visit(Visitor&& vis) const {
        return std::visit(std::forward<Visitor>(vis), v_);
    }

    template <class Family>
    bool is() const {
        return std::holds_alternative<Family>(v_);
    }

    /// CLI spelling of the family.
    std::string_view name() const {
        return visit(overloaded{
            [](const family::PointMass&) { return std::string_view("pointmass"); },
            [](const family::FiniteDiscrete&) { return std::string_view("discrete"); },
            [](const family::Pareto&) { return std::string_view("pareto"); },
            [](const family::Gamma&) { return std::string_view("gamma"); },
            [](const family::Gig&) { return std::string_view("gig"); },
            [](const family::InverseGamma&) { return std::string_view("invgamma"); },
            [](const family::LogNormal&) { return std::string_view("lognormal"); },
            [](const family::Frechet&) { return std::string_view("frechet"); },
            [](const family::Beta&) { return std::string_view("beta"); },
            [](const family::Weibull&) { return std::string_view("weibull"); },
            [](const family::F&) { return std::string_view("f"); },
        });
    }

    std::string describe() const {
        std::ostringstream os;
        os << name() << "(";
        visit(overloaded{
            [&](const family::PointMass& f) { os << f.w0; },
            [&](const family::FiniteDiscrete& f) {
                for (std::size_t k = 0; k < f.atoms.size(); ++k)
                    os << (k ? ", " : "") << f.atoms[k] << ":" << f.probs[k];
            },
            [&](const family::Pareto& f) { os << f.scale << ", " << f.shape; },
            [&](const family::Gamma& f) { os << f.shape << ", " << f.rate; },
            [&](const family::Gig& f) { os << f.a << ", " << f.b << ", " << f.q; },
            [&](const family::InverseGamma& f) { os << f.shape << ", " << f.scale; },
            [&](const family::LogNormal& f) { os << f.mu << ", " << f.sigma; },
            [&](const family::Frechet& f) { os << f.shape << ", " << f.scale; },
            [&](const family::Beta& f) { os << f.a << ", " << f.b; },
            [&](const family::Weibull& f) { os << f.shape << ", " << f.scale; },
            [&](const family::F& f) { os << f.df1 << ", " << f.df2; },
        });
        os << ")";
        return os.str();
    }

private:
    void validate() const {
        auto positive = [this](double v, const char* what) {
            if (!(v > 0.0) || !std::isfinite(v))
                throw MixingError(std::string(name()) + ": parameter " + what + " must be a finite positive number");
        };
        auto finite = [this](double v, const char* what) {
            if (!std::isfinite(v)) throw MixingError(std::string(name()) + ": parameter " + what + " must be finite");
        };
        visit(overloaded{
            [&](const family::PointMass& f) { positive(f.w0, "w0"); },
            [&](const family::FiniteDiscrete& f) {
                if (f.atoms.empty() || f.atoms.size() != f.probs.size())
                    throw MixingError("discrete: atoms and probs must be non-empty and of equal length");
                double total = 0.0;
                for (std::size_t k = 0; k < f.atoms.size(); ++k) {
                    positive(f.atoms[k], "atom");
                    positive(f.probs[k], "probability");
                    total += f.probs[k];
                }
                if (std::abs(total - 1.0) > 1e-9) throw MixingError("discrete: probabilities must sum to 1");
            },
            [&](const family::Pareto& f) { positive(f.scale, "a"), positive(f.shape, "b"); },
            [&](const family::Gamma& f) { positive(f.shape, "a"), positive(f.rate, "b"); },
            [&](const family::Gig& f) { positive(f.a, "a"), positive(f.b, "b"), finite(f.q, "q"); },
            [&](const family::InverseGamma& f) { positive(f.shape, "a"), positive(f.scale, "b"); },
            [&](const family::LogNormal& f) { finite(f.mu, "mu"), positive(f.sigma, "v"); },
            [&](const family::Frechet& f) { positive(f.shape, "alpha"), positive(f.scale, "s"); },
            [&](const family::Beta& f) { positive(f.a, "a"), positive(f.b, "b"); },
            [&](const family::Weibull& f) { positive(f.shape, "a"), positive(f.scale, "b"); },
            [&](const family::F& f) { positive(f.df1, "a"), positive(f.df2, "b"); },
        });
    }

    Variant v_;
};

// ---------------------------------------------------------------------------
// Near-origin behaviour and ergodicity conditions.

struct OriginClass {
    enum class Kind { ZeroNearOrigin, FasterThanPolynomial, PolynomialWithPower };
    Kind kind;
    /// theta for ZeroNearOrigin, power c for PolynomialWithPower, unused otherwise.
    double value = 0.0;

    std::string describe() const {
        switch (kind) {
            case Kind::ZeroNearOrigin: return "zero near the origin (theta = " + std::to_string(value) + ")";
            case Kind::FasterThanPolynomial: return "faster than polynomial near the origin";
            case Kind::PolynomialWithPower: return "polynomial near the origin with power " + std::to_string(value);
        }
        return {};
    }
};

/// Near-origin class by family membership.
inline OriginClass classify_origin(const MixingSpec& spec) {
    using K = OriginClass::Kind;
    return spec.visit(overloaded{
        [](const family::PointMass& f) { return OriginClass{K::ZeroNearOrigin, f.w0}; },
        [](const family::FiniteDiscrete& f) {
            return OriginClass{K::ZeroNearOrigin, *std::min_element(f.atoms.begin(), f.atoms.end())};
        },
        [](const family::Pareto& f) { return OriginClass{K::ZeroNearOrigin, f.scale}; },
        [](const family::Gamma& f) { return OriginClass{K::PolynomialWithPower, f.shape - 1.0}; },
        [](const family::Gig&) { return OriginClass{K::FasterThanPolynomial, 0.0}; },
        [](const family::InverseGamma&) { return OriginClass{K::FasterThanPolynomial, 0.0}; },
        [](const family::LogNormal&) { return OriginClass{K::FasterThanPolynomial, 0.0}; },
        [](const family::Frechet&) { return OriginClass{K::FasterThanPolynomial, 0.0}; },
        [](const family::Beta& f) { return OriginClass{K::PolynomialWithPower, f.a - 1.0}; },
        [](const family::Weibull& f) { return OriginClass{K::PolynomialWithPower, f.shape - 1.0}; },
        [](const family::F& f) { return OriginClass{K::PolynomialWithPower, f.df1 / 2.0 - 1.0}; },
    });
}

/// Finiteness of the d/2-th moment of the mixing distribution.
inline bool check_h2(const MixingSpec& spec, Index d) {
    const double half_d = static_cast<double>(d) / 2.0;
    return spec.visit(overloaded{
        [&](const family::Pareto& f) { return f.shape > half_d; },
        [&](const family::InverseGamma& f) { return f.shape > half_d; },
        [&](const family::Frechet& f) { return f.shape > half_d; },
        [&](const family::F& f) { return f.df2 > static_cast<double>(d); },
        [](const auto&) { return true; },
    });
}

/// Human-readable statement of the moment-condition rule for a family.
inline std::string h2_rule(const MixingSpec& spec) {
    return spec.visit(overloaded{
        [](const family::Pareto&) { return std::string("requires b > d/2"); },
        [](const family::InverseGamma&) { return std::string("requires a > d/2"); },
        [](const family::Frechet&) { return std::string("requires alpha > d/2"); },
        [](const family::F&) { return std::string("requires b > d"); },
        [](const auto&) { return std::string("always holds"); },
    });
}

struct ErgodicityVerdict {
    enum class Outcome { GeometricallyErgodic, NotEstablished };
    bool h2_ok = false;
    OriginClass origin_class{OriginClass::Kind::FasterThanPolynomial, 0.0};
    double c1 = 0.0;
    Outcome theorem1 = Outcome::NotEstablished;
    std::string reason;

    bool geometrically_ergodic() const { return theorem1 == Outcome::GeometricallyErgodic; }
};

/// c1 = (n - p + m - min d_i) / 2.
inline double ergodicity_threshold(Index n, Index p, double m, Index min_di) {
    return (static_cast<double>(n - p) + m - static_cast<double>(min_di)) / 2.0;
}

/// Sufficient condition for geometric ergodicity of the DA chain. A
/// NotEstablished outcome only means the sufficient condition does not
/// apply. Propriety of the P-step conditional is checked separately.
inline ErgodicityVerdict verdict_theorem1(const MixingSpec& spec, Index n, Index p, Index d, double m, Index min_di) {
    if (min_di < 1 || min_di > d) throw InvalidArgument("min_di must lie in [1, d]");
    ErgodicityVerdict v;
    v.h2_ok = check_h2(spec, d);
    v.origin_class = classify_origin(spec);
    v.c1 = ergodicity_threshold(n, p, m, min_di);
    using K = OriginClass::Kind;
    if (!v.h2_ok) {
        v.reason = "Condition H2 fails: " + std::string(spec.name()) + " " + h2_rule(spec);
        return v;
    }
    switch (v.origin_class.kind) {
        case K::ZeroNearOrigin:
            v.theorem1 = ErgodicityVerdict::Outcome::GeometricallyErgodic;
            v.reason = "mixing distribution is zero near the origin";
            break;
        case K::FasterThanPolynomial:
            v.theorem1 = ErgodicityVerdict::Outcome::GeometricallyErgodic;
            v.reason = "mixing distribution is faster than polynomial near the origin";
            break;
        case K::PolynomialWithPower: {
            std::ostringstream os;
            const double c = v.origin_class.value;
            if (c > v.c1) {
                v.theorem1 = ErgodicityVerdict::Outcome::GeometricallyErgodic;
                os << "polynomial power " << c << " exceeds c1 = " << v.c1;
            } else {
                os << "polynomial power " << c << " does not exceed c1 = " << v.c1;
            }
            v.reason = os.str();
            break;
        }
    }
    return v;
}

// ---------------------------------------------------------------------------
// Sampling.

/// One draw from the mixing distribution itself.
template <class URBG>
double sample_mixing(const MixingSpec& spec, URBG& rng) {
    return spec.visit(overloaded{
        [&](const family::PointMass& f) { return f.w0; },
        [&](const family::FiniteDiscrete& f) {
            const double u = rnd::uniform_open(rng);
            double acc = 0.0;
            for (std::size_t k = 0; k < f.atoms.size(); ++k) {
                acc += f.probs[k];
                if (u <= acc) return f.atoms[k];
            }
            return f.atoms.back();
        },
        [&](const family::Pareto& f) { return f.scale * std::pow(rnd::uniform_open(rng), -1.0 / f.shape); },
        [&](const family::Gamma& f) { return rnd::gamma(f.shape, f.rate, rng); },
        [&](const family::Gig& f) { return sample_gig(f.a, f.b, f.q, rng); },
        [&](const family::InverseGamma& f) { return f.scale / rnd::gamma(f.shape, 1.0, rng); },
        [&](const family::LogNormal& f) { return std::exp(f.mu + f.sigma * rnd::standard_normal(rng)); },
        [&](const family::Frechet& f) {
            return f.scale * std::pow(-std::log(rnd::uniform_open(rng)), -1.0 / f.shape);
        },
        [&](const family::Beta& f) {
            const double x = rnd::gamma(f.a, 1.0, rng);
            const double y = rnd::gamma(f.b, 1.0, rng);
            return x / (x + y);
        },
        [&](const family::Weibull& f) {
            return f.scale * std::pow(-std::log(rnd::uniform_open(rng)), 1.0 / f.shape);
        },
        [&](const family::F& f) {
            const double num = rnd::chi_square(f.df1, rng) / f.df1;
            const double den = rnd::chi_square(f.df2, rng) / f.df2;
            return num / den;
        },
    });
}

/// Families whose tilted conditional is drawn by rejection from P_mix.
inline bool uses_rejection(const MixingSpec& spec) {
    return spec.is<family::Pareto>() || spec.is<family::LogNormal>() || spec.is<family::Frechet>() ||
           spec.is<family::Beta>() || spec.is<family::Weibull>() || spec.is<family::F>();
}

inline constexpr std::size_t kRejectionBudget = 1'000'000;
/// Smallest residual used by the rejection envelope.
inline constexpr double kMinRejectionResidual = 1e-12;

/// Envelope for rejection sampling of the tilt w^{d/2} e^{-r w/2} with
/// proposals from P_mix. The envelope constant is the supremum of the tilt
/// over the family's support, which is (d/r)^{d/2} e^{-d/2} for support
/// (0, inf).
struct TiltEnvelope {
    double half_d;
    double r;
    double log_bound;

    static TiltEnvelope make(const MixingSpec& spec, Index d_i, double r) {
        TiltEnvelope env{static_cast<double>(d_i) / 2.0, std::max(r, kMinRejectionResidual), 0.0};
        double arg = static_cast<double>(d_i) / env.r;
        if (const auto* p = std::get_if<family::Pareto>(&spec.variant())) arg = std::max(arg, p->scale);
        if (spec.is<family::Beta>()) arg = std::min(arg, 1.0);
        env.log_bound = env.log_tilt(arg);
        return env;
    }

    double log_tilt(double w) const { return half_d * std::log(w) - 0.5 * r * w; }
    /// Acceptance probability of a proposal w; lies in [0, 1].
    double acceptance(double w) const { return std::exp(log_tilt(w) - log_bound); }
};

/// Tilted atom probabilities ∝ p_k a_k^{d/2} e^{-r a_k/2}, computed in log space.
inline std::vector<double> tilted_atom_probabilities(const family::FiniteDiscrete& f, Index d_i, double r) {
    const double half_d = static_cast<double>(d_i) / 2.0;
    std::vector<double> logw(f.atoms.size());
    for (std::size_t k = 0; k < f.atoms.size(); ++k)
        logw[k] = std::log(f.probs[k]) + half_d * std::log(f.atoms[k]) - 0.5 * r * f.atoms[k];
    const double top = *std::max_element(logw.begin(), logw.end());
    double total = 0.0;
    for (auto& v : logw) total += (v = std::exp(v - top));
    for (auto& v : logw) v /= total;
    return logw;
}

/// One draw from the density ∝ w^{d_i/2} exp(-r w/2) P_mix(dw).
///
/// Conjugate families are drawn exactly; the remaining families use
/// rejection from P_mix with the envelope of TiltEnvelope and at most
/// kRejectionBudget proposals.
template <class URBG>
double sample_tilted(const MixingSpec& spec, Index d_i, double r, URBG& rng) {
    if (d_i < 1) throw InvalidArgument("sample_tilted: d_i must be at least 1");
    if (!(r >= 0.0) || !std::isfinite(r)) throw InvalidArgument("sample_tilted: residual must be finite and >= 0");
    const double half_d = static_cast<double>(d_i) / 2.0;

    auto rejection = [&]() {
        if (r == 0.0 && !spec.is<family::Beta>())
            throw TiltDegenerate("tilted draw for " + spec.describe() +
                                 " at r = 0 has no finite rejection envelope (exact fit on a row)");
        const TiltEnvelope env = TiltEnvelope::make(spec, d_i, r);
        for (std::size_t k = 0; k < kRejectionBudget; ++k) {
            const double w = sample_mixing(spec, rng);
            if (rnd::uniform_open(rng) <= env.acceptance(w)) return w;
        }
        std::ostringstream os;
        os << "rejection sampler for " << spec.describe() << " exceeded " << kRejectionBudget
           << " proposals (d_i = " << d_i << ", r = " << r << ", log envelope = " << env.log_bound << ")";
        throw SamplingBudgetExceeded(os.str());
    };

    return spec.visit(overloaded{
        [&](const family::PointMass& f) { return f.w0; },
        [&](const family::FiniteDiscrete& f) {
            const auto probs = tilted_atom_probabilities(f, d_i, r);
            const double u = rnd::uniform_open(rng);
            double acc = 0.0;
            for (std::size_t k = 0; k < probs.size(); ++k) {
                acc += probs[k];
                if (u <= acc) return f.atoms[k];
            }
            return f.atoms.back();
        },
        [&](const family::Gamma& f) { return rnd::gamma(f.shape + half_d, f.rate + 0.5 * r, rng); },
        [&](const family::Gig& f) { return sample_gig(f.a + r, f.b, f.q + half_d, rng); },
        [&](const family::InverseGamma& f) {
            if (r > 0.0) return sample_gig(r, 2.0 * f.scale, half_d - f.shape, rng);
            if (!(f.shape > half_d))
                throw TiltDegenerate("inverse-gamma tilt at r = 0 is improper: shape must exceed d_i/2");
            return 1.0 / rnd::gamma(f.shape - half_d, f.scale, rng);
        },
        [&](const auto&) { return rejection(); },
    });
}

}  // namespace robustda
