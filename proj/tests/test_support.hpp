#pragma once

#include <cmath>
#include <vector>

#include "nonunif/integrands.hpp"
#include "nonunif/rng.hpp"

namespace nonunif::testing {

inline const std::vector<Family>& all_families() {
    static const std::vector<Family> f = {Family::PPower,           Family::DoublePhase,     Family::MultiPhase,
                                          Family::VariableExponent, Family::NearlyLinearLog, Family::NestedExponential,
                                          Family::GenericPQ};
    return f;
}

// A representative spec per family with x-dependent coefficients on [-1,1]^2.
inline IntegrandSpec sample_spec(Family f, Rng& rng) {
    switch (f) {
        case Family::PPower:
            return IntegrandSpec::p_power(rng.uniform(1.2, 4.0), rng.uniform(0, 1),
                                          Coefficient::affine(1.5, 0.2, -0.2));
        case Family::DoublePhase: {
            const double p = rng.uniform(1.3, 3.0);
            return IntegrandSpec::double_phase(p, p + rng.uniform(0.1, 2.0),
                                               Coefficient::power_abs_x1(rng.uniform(0.5, 2), rng.uniform(0.3, 1)),
                                               1.0, rng.uniform(0, 1));
        }
        case Family::MultiPhase: {
            const double p = rng.uniform(1.3, 2.5);
            return IntegrandSpec::multi_phase(
                p,
                {Phase{p + rng.uniform(0.1, 1), 1.0, Coefficient::power_abs_x1(1, 1)},
                 Phase{p + rng.uniform(0.5, 2), 0.5, Coefficient::quadrant_power(2, 0.5)}},
                rng.uniform(0, 1));
        }
        case Family::VariableExponent:
            return IntegrandSpec::variable_exponent(Coefficient::affine(2.0, 0.5, 0.3), 1.2, 2.8,
                                                    Modulus{Modulus::Kind::Holder, 1.0}, rng.uniform(0, 1));
        case Family::NearlyLinearLog:
            return IntegrandSpec::nearly_linear_log(Coefficient::affine(1.0, 0.2, 0.1), rng.uniform(0, 1),
                                                    1.0 + rng.uniform(0.05, 0.4), Coefficient::power_abs_x1(1, 1), 1.0);
        case Family::NestedExponential:
            return IntegrandSpec::nested_exponential(
                {ExpLevel{Coefficient::constant(1.0), Coefficient::affine(1.5, 0.2, 0.1)},
                 ExpLevel{Coefficient::affine(0.8, 0.1, 0.0), Coefficient::constant(0.7)}},
                1.0, 2.0, 2.0, rng.uniform(0, 1));
        case Family::GenericPQ: {
            const double p = rng.uniform(1.3, 3.0);
            return IntegrandSpec::generic_pq(p, p + rng.uniform(0, 2), rng.uniform(0, 1),
                                             Coefficient::affine(1.0, 0.1, 0.1));
        }
    }
    return {};
}

inline Vec2 random_point(Rng& rng, double r = 1.0) { return {rng.uniform(-r, r), rng.uniform(-r, r)}; }

inline Vec2 random_z(Rng& rng, double lo, double hi) {
    const double t = std::exp(rng.uniform(std::log(lo), std::log(hi)));
    const double a = rng.uniform(0, 2 * kPi);
    return {t * std::cos(a), t * std::sin(a)};
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)}); }

}  // namespace nonunif::testing
