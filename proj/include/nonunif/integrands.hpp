#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "coefficients.hpp"
#include "core.hpp"
#include "lattice.hpp"

namespace nonunif {

enum class Family { PPower, DoublePhase, MultiPhase, VariableExponent, NearlyLinearLog, NestedExponential, GenericPQ };

inline const char* family_name(Family f) {
    switch (f) {
        case Family::PPower: return "p_power";
        case Family::DoublePhase: return "double_phase";
        case Family::MultiPhase: return "multi_phase";
        case Family::VariableExponent: return "variable_exponent";
        case Family::NearlyLinearLog: return "nearly_linear_log";
        case Family::NestedExponential: return "nested_exponential";
        case Family::GenericPQ: return "generic_pq";
    }
    return "?";
}

inline Family parse_family(const std::string& s) {
    for (Family f : {Family::PPower, Family::DoublePhase, Family::MultiPhase, Family::VariableExponent,
                     Family::NearlyLinearLog, Family::NestedExponential, Family::GenericPQ})
        if (s == family_name(f)) return f;
    throw ParseError("unknown integrand family '" + s + "'");
}

struct Phase {
    double q = 2.0;
    double alpha = 1.0;
    Coefficient a = Coefficient::constant(0.0);
    bool operator==(const Phase&) const = default;
};

struct ExpLevel {
    Coefficient c = Coefficient::constant(1.0);
    Coefficient exponent = Coefficient::constant(1.0);
    bool operator==(const ExpLevel&) const = default;
};

// Families, with H = |z|^2 + s^2 and tau = sqrt(H):
//   PPower            c(x) H^{p/2}
//   DoublePhase       H^{p/2} + a(x) H^{q/2}
//   MultiPhase        H^{p/2} + sum_k a_k(x) H^{q_k/2}
//   VariableExponent  H^{e(x)/2}
//   NearlyLinearLog   c(x) tau log(1 + tau) + a(x) H^{q/2}
//   NestedExponential e_k with e_0 = exp(c_0 tau^{e_0}), e_{j+1} = exp(c_{j+1} e_j^{e_{j+1}})
//   GenericPQ         c(x) (H^{p/2} + H^{q/2})
struct IntegrandSpec {
    Family family = Family::PPower;
    double p = 2.0;
    double q = 2.0;
    double nu = 1.0;
    double L = 1.0;
    double s = 0.0;
    double alpha = 1.0;
    Coefficient a = Coefficient::constant(0.0);
    Coefficient c = Coefficient::constant(1.0);
    Coefficient exponent = Coefficient::constant(2.0);
    Modulus modulus{};
    std::vector<Phase> phases;
    std::vector<ExpLevel> levels;

    bool operator==(const IntegrandSpec&) const = default;

    int depth() const { return int(levels.size()) - 1; }

    bool autonomous() const {
        switch (family) {
            case Family::PPower:
            case Family::GenericPQ: return c.is_constant();
            case Family::DoublePhase: return a.is_constant();
            case Family::MultiPhase:
                return std::all_of(phases.begin(), phases.end(), [](const Phase& ph) { return ph.a.is_constant(); });
            case Family::VariableExponent: return exponent.is_constant();
            case Family::NearlyLinearLog: return c.is_constant() && a.is_constant();
            case Family::NestedExponential:
                return std::all_of(levels.begin(), levels.end(),
                                   [](const ExpLevel& l) { return l.c.is_constant() && l.exponent.is_constant(); });
        }
        return false;
    }

    void validate() const {
        const bool strict = !(family == Family::NearlyLinearLog || family == Family::NestedExponential);
        if (strict ? !(p > 1.0) : !(p >= 1.0)) throw ValidationError("p is below the admissible range");
        if (!(q >= p)) throw ValidationError("q must be at least p");
        if (!(nu > 0.0 && nu <= L)) throw ValidationError("need 0 < nu <= L");
        if (!(s >= 0.0 && s <= 1.0)) throw ValidationError("s must lie in [0,1]");
        if (!(alpha > 0.0 && alpha <= 1.0)) throw ValidationError("alpha must lie in (0,1]");
        auto check_range = [&](const Coefficient& f, double lo, double hi, const char* what) {
            double v = 0.0;
            if (f.bounded_below(v) && v < lo - 1e-12) throw ValidationError(std::string(what) + " falls below its range");
            if (f.bounded_above(v) && v > hi + 1e-12) throw ValidationError(std::string(what) + " exceeds its range");
        };
        switch (family) {
            case Family::PPower:
            case Family::GenericPQ:
                check_range(c, nu, L, "coefficient c");
                if (family == Family::PPower && q != p) throw ValidationError("p_power needs q = p");
                break;
            case Family::DoublePhase: check_range(a, 0.0, kInf, "coefficient a"); break;
            case Family::MultiPhase:
                if (phases.empty()) throw ValidationError("multi_phase needs at least one phase");
                for (const auto& ph : phases) {
                    if (!(ph.q >= p)) throw ValidationError("every phase exponent must be at least p");
                    if (!(ph.alpha > 0.0 && ph.alpha <= 1.0)) throw ValidationError("phase alpha must lie in (0,1]");
                    check_range(ph.a, 0.0, kInf, "phase coefficient");
                }
                break;
            case Family::VariableExponent: check_range(exponent, p, q, "variable exponent"); break;
            case Family::NearlyLinearLog:
                check_range(c, nu, L, "coefficient c");
                check_range(a, 0.0, kInf, "coefficient a");
                break;
            case Family::NestedExponential:
                if (levels.empty()) throw ValidationError("nested_exponential needs at least one level");
                for (std::size_t k = 0; k < levels.size(); ++k) {
                    check_range(levels[k].c, nu, L, "level coefficient");
                    check_range(levels[k].exponent, k == 0 ? p : 0.0, q, "level exponent");
                    double lo = 0.0;
                    if (levels[k].exponent.bounded_below(lo) && !(lo > 0.0))
                        throw ValidationError("level exponents must be positive");
                }
                break;
        }
    }

    static IntegrandSpec p_power(double p, double s = 0.0, Coefficient c = Coefficient::constant(1.0)) {
        IntegrandSpec sp;
        sp.family = Family::PPower;
        sp.p = sp.q = p;
        sp.s = s;
        sp.c = c;
        double lo = 1.0, hi = 1.0;
        c.bounded_below(lo);
        c.bounded_above(hi);
        sp.nu = std::min(1.0, lo);
        sp.L = std::max(1.0, hi);
        sp.validate();
        return sp;
    }
    static IntegrandSpec double_phase(double p, double q, Coefficient a, double alpha = 1.0, double s = 0.0) {
        IntegrandSpec sp;
        sp.family = Family::DoublePhase;
        sp.p = p;
        sp.q = q;
        sp.a = a;
        sp.alpha = alpha;
        sp.s = s;
        sp.validate();
        return sp;
    }
    static IntegrandSpec multi_phase(double p, std::vector<Phase> phases, double s = 0.0) {
        IntegrandSpec sp;
        sp.family = Family::MultiPhase;
        sp.p = p;
        sp.q = p;
        sp.alpha = 1.0;
        for (const auto& ph : phases) {
            sp.q = std::max(sp.q, ph.q);
            sp.alpha = std::min(sp.alpha, ph.alpha);
        }
        sp.phases = std::move(phases);
        sp.s = s;
        sp.validate();
        return sp;
    }
    static IntegrandSpec variable_exponent(Coefficient e, double p, double q, Modulus m, double s = 0.0) {
        IntegrandSpec sp;
        sp.family = Family::VariableExponent;
        sp.exponent = e;
        sp.p = p;
        sp.q = q;
        sp.modulus = m;
        sp.s = s;
        sp.validate();
        return sp;
    }
    static IntegrandSpec nearly_linear_log(Coefficient c = Coefficient::constant(1.0), double s = 0.0,
                                           double q = 1.0, Coefficient a = Coefficient::constant(0.0),
                                           double alpha = 1.0) {
        IntegrandSpec sp;
        sp.family = Family::NearlyLinearLog;
        sp.p = 1.0;
        sp.q = q;
        sp.c = c;
        sp.a = a;
        sp.alpha = alpha;
        sp.s = s;
        double lo = 1.0, hi = 1.0;
        c.bounded_below(lo);
        c.bounded_above(hi);
        sp.nu = std::min(1.0, lo);
        sp.L = std::max(1.0, hi);
        sp.validate();
        return sp;
    }
    // depth k means k+1 exponentials
    static IntegrandSpec nested_exponential(std::vector<ExpLevel> levels, double p_lo, double p_hi, double L = 1.0,
                                            double s = 0.0) {
        IntegrandSpec sp;
        sp.family = Family::NestedExponential;
        sp.levels = std::move(levels);
        sp.p = p_lo;
        sp.q = p_hi;
        sp.L = L;
        sp.nu = std::min(1.0, L);
        sp.s = s;
        sp.validate();
        return sp;
    }
    static IntegrandSpec generic_pq(double p, double q, double s = 0.0, Coefficient c = Coefficient::constant(1.0)) {
        IntegrandSpec sp;
        sp.family = Family::GenericPQ;
        sp.p = p;
        sp.q = q;
        sp.s = s;
        sp.c = c;
        double lo = 1.0, hi = 1.0;
        c.bounded_below(lo);
        c.bounded_above(hi);
        sp.nu = std::min(1.0, lo);
        sp.L = std::max(1.0, hi);
        sp.validate();
        return sp;
    }
};

namespace detail {

// phi(tau), phi'(tau)/tau and phi''(tau) of one radial profile.
struct Radial {
    double phi = 0.0;
    double d1_over_tau = 0.0;
    double d2 = 0.0;
};

inline Radial power_profile(double r, double tau) {
    if (tau == 0.0) {
        if (r < 2.0) return {0.0, kInf, kInf};
        if (r == 2.0) return {0.0, 2.0, 2.0};
        return {0.0, 0.0, 0.0};
    }
    const double base = std::pow(tau, r - 2.0);
    return {base * tau * tau, r * base, r * (r - 1.0) * base};
}

inline Radial log_profile(double tau) {
    if (tau == 0.0) return {0.0, 2.0, 2.0};
    const double l = std::log1p(tau);
    const double inv = 1.0 / (1.0 + tau);
    return {tau * l, l / tau + inv, inv + inv * inv};
}

// Second-order forward jet.
struct Jet {
    double v, d1, d2;
};
inline Jet jexp(Jet a) {
    const double e = std::exp(a.v);
    return {e, e * a.d1, e * (a.d2 + a.d1 * a.d1)};
}
inline Jet jpow(Jet a, double r) {
    const double b = std::pow(a.v, r - 2.0);
    return {b * a.v * a.v, r * b * a.v * a.d1, r * (r - 1.0) * b * a.d1 * a.d1 + r * b * a.v * a.d2};
}

inline Radial nested_profile(const std::vector<ExpLevel>& levels, Vec2 x, double tau) {
    const double c0 = levels[0].c(x), p0 = levels[0].exponent(x);
    // y0 = c0 tau^{p0} as a function of tau; the chain E(y0) is differentiated in y0.
    Jet e = jexp(Jet{c0 * std::pow(tau, p0), 1.0, 0.0});
    for (std::size_t k = 1; k < levels.size(); ++k) {
        const double ck = levels[k].c(x), pk = levels[k].exponent(x);
        Jet u = jpow(e, pk);
        e = jexp(Jet{ck * u.v, ck * u.d1, ck * u.d2});
    }
    // e = (E, E', E'') in y0
    if (tau == 0.0) {
        if (p0 < 2.0) return {e.v, kInf, kInf};
        const double lim = p0 == 2.0 ? 2.0 * c0 * e.d1 : 0.0;
        return {e.v, lim, lim};
    }
    const double y1 = c0 * p0 * std::pow(tau, p0 - 1.0);
    const double y2 = c0 * p0 * (p0 - 1.0) * std::pow(tau, p0 - 2.0);
    return {e.v, e.d1 * c0 * p0 * std::pow(tau, p0 - 2.0), e.d2 * y1 * y1 + e.d1 * y2};
}

template <class Fn>
void for_each_term(const IntegrandSpec& sp, Vec2 x, double tau, Fn&& fn) {
    switch (sp.family) {
        case Family::PPower: fn(sp.c(x), power_profile(sp.p, tau)); break;
        case Family::DoublePhase:
            fn(1.0, power_profile(sp.p, tau));
            fn(sp.a(x), power_profile(sp.q, tau));
            break;
        case Family::MultiPhase:
            fn(1.0, power_profile(sp.p, tau));
            for (const auto& ph : sp.phases) fn(ph.a(x), power_profile(ph.q, tau));
            break;
        case Family::VariableExponent: fn(1.0, power_profile(sp.exponent(x), tau)); break;
        case Family::NearlyLinearLog:
            fn(sp.c(x), log_profile(tau));
            if (!sp.a.is_zero()) fn(sp.a(x), power_profile(sp.q, tau));
            break;
        case Family::NestedExponential: fn(1.0, nested_profile(sp.levels, x, tau)); break;
        case Family::GenericPQ: {
            const double cx = sp.c(x);
            fn(cx, power_profile(sp.p, tau));
            fn(cx, power_profile(sp.q, tau));
            break;
        }
    }
}

}  // namespace detail

inline double value(const IntegrandSpec& sp, Vec2 x, Vec2 z) {
    const double tau = std::sqrt(norm2(z) + sp.s * sp.s);
    double f = 0.0;
    detail::for_each_term(sp, x, tau, [&](double w, const detail::Radial& r) {
        if (w != 0.0) f += w * r.phi;
    });
    return f;
}

inline Vec2 grad_z(const IntegrandSpec& sp, Vec2 x, Vec2 z) {
    const double tau = std::sqrt(norm2(z) + sp.s * sp.s);
    if (tau == 0.0) return {0.0, 0.0};
    double k = 0.0;
    detail::for_each_term(sp, x, tau, [&](double w, const detail::Radial& r) {
        if (w != 0.0) k += w * r.d1_over_tau;
    });
    return z * k;
}

inline Sym2 hess_z(const IntegrandSpec& sp, Vec2 x, Vec2 z) {
    const double t2 = norm2(z);
    const double tau = std::sqrt(t2 + sp.s * sp.s);
    double iso = 0.0, rad = 0.0;
    detail::for_each_term(sp, x, tau, [&](double w, const detail::Radial& r) {
        if (w == 0.0) return;
        if (!std::isfinite(r.d1_over_tau) || !std::isfinite(r.d2)) {
            if (tau == 0.0) throw SingularityError("Hessian is singular at z = 0 when s = 0 and the exponent is below 2");
        }
        iso += w * r.d1_over_tau;
        if (tau > 0.0) rad += w * (r.d2 - r.d1_over_tau) / (tau * tau);
    });
    return identity2() * iso + outer(z) * rad;
}

// Ellipticity envelope: g1 I <= hess_z <= g2 I at |z| = t.
class EllipticityEnvelope {
public:
    explicit EllipticityEnvelope(IntegrandSpec sp) : sp_(std::move(sp)) {}

    double g1(Vec2 x, double t) const { return eval(x, t).first; }
    double g2(Vec2 x, double t) const { return eval(x, t).second; }

    std::pair<double, double> eval(Vec2 x, double t) const {
        const double tau = std::sqrt(t * t + sp_.s * sp_.s);
        double lo = 0.0, hi = 0.0;
        detail::for_each_term(sp_, x, tau, [&](double w, const detail::Radial& r) {
            if (w == 0.0) return;
            lo += w * std::min(r.d1_over_tau, r.d2);
            hi += w * std::max(r.d1_over_tau, r.d2);
        });
        return {lo, hi};
    }

    const IntegrandSpec& spec() const { return sp_; }

private:
    IntegrandSpec sp_;
};

inline EllipticityEnvelope envelope(const IntegrandSpec& sp) { return EllipticityEnvelope(sp); }

inline double pointwise_ratio(const IntegrandSpec& sp, Vec2 x, Vec2 z) {
    const double t = norm(z);
    if (t == 0.0) throw SingularityError("ellipticity ratio is undefined at z = 0");
    const auto [g1, g2] = envelope(sp).eval(x, t);
    return g2 / g1;
}

inline double nonlocal_ratio(const IntegrandSpec& sp, Vec2 z, const Ball& b, const Grid& g) {
    const double t = norm(z);
    if (t == 0.0) throw SingularityError("nonlocal ratio is undefined at z = 0");
    const auto nodes = ball_nodes(g, b);
    if (nodes.empty()) throw DomainError("ball contains no grid nodes");
    const EllipticityEnvelope env(sp);
    double sup2 = 0.0, inf1 = kInf;
    for (int k : nodes) {
        const auto [g1, g2] = env.eval(g.node(k), t);
        sup2 = std::max(sup2, g2);
        inf1 = std::min(inf1, g1);
    }
    return sup2 / inf1;
}

// Upper growth envelope of the ellipticity ratio along |z| = t, up to a fitted constant.
inline double ratio_growth_bound(const IntegrandSpec& sp, double t) {
    switch (sp.family) {
        case Family::PPower: return 1.0;
        case Family::DoublePhase:
        case Family::MultiPhase:
        case Family::VariableExponent:
        case Family::GenericPQ: return std::pow(t, sp.q - sp.p) + 1.0;
        case Family::NearlyLinearLog: return std::log1p(t) + 1.0;
        case Family::NestedExponential: {
            const double tau = std::sqrt(t * t + sp.s * sp.s);
            double prod = std::pow(tau, sp.q);
            double e = std::exp(sp.L * std::max(std::pow(tau, sp.p), std::pow(tau, sp.q)));
            for (int k = 0; k < sp.depth(); ++k) {
                prod *= e;
                e = std::exp(sp.L * std::pow(e, sp.q));
            }
            return prod + 1.0;
        }
    }
    return 1.0;
}

enum class Verdict { Regular, RegularIfBounded, CounterexampleRegime, Open };

inline const char* verdict_name(Verdict v) {
    switch (v) {
        case Verdict::Regular: return "Regular";
        case Verdict::RegularIfBounded: return "RegularIfBounded";
        case Verdict::CounterexampleRegime: return "CounterexampleRegime";
        case Verdict::Open: return "Open";
    }
    return "?";
}

struct RegimeInput {
    int n = 2;
    double p = 2.0;
    double q = 2.0;
    double alpha = 1.0;
    bool bounded = false;
    Family family = Family::DoublePhase;
    std::vector<std::pair<double, double>> phases;  // (q_k, alpha_k) for multi-phase
    std::optional<Modulus> modulus;                  // variable exponent only
};

struct RegimeReport {
    bool bound1 = false, twist2 = false, biba = false;
    std::vector<bool> boundulti;
    bool condlog = false, boundma = false, boundbs = false, hirsch = false, bouc1 = false;
    bool bound333 = false, deter = false, boundlolo = false, bound333d = false, pqbb = false, ilbb = false;
    bool boundx = false, boundfinale = false, condy1 = false, condy2 = false;
    Verdict verdict = Verdict::Open;
};

inline RegimeReport classify_regime(const RegimeInput& in) {
    const double n = in.n, p = in.p, q = in.q, a = in.alpha;
    if (!(in.n >= 2) || !(p > 1.0 || in.family == Family::NearlyLinearLog || in.family == Family::NestedExponential) ||
        !(q >= p) || !(a > 0.0 && a <= 1.0))
        throw ValidationError("regime parameters outside the admissible ranges");
    const double r = q / p;
    RegimeReport R;
    R.bound1 = r <= 1.0 + a / n;
    R.twist2 = in.bounded && q <= p + a;
    R.biba = 1.0 < p && p < n && n < n + a && n + a < q;
    if (in.phases.empty()) {
        R.boundulti = {R.bound1};
    } else {
        for (const auto& [qk, ak] : in.phases) R.boundulti.push_back(qk / p <= 1.0 + ak / n);
    }
    R.condlog = in.modulus ? in.modulus->condlog() : false;
    R.boundma = r < 1.0 + 2.0 / n;
    R.boundbs = r < 1.0 + 2.0 / (n - 1.0);
    R.hirsch = 1.0 / p - 1.0 / q <= 1.0 / (n - 1.0);
    R.bouc1 = 1.0 < p && p <= q && q < p + 1.0;
    R.bound333 = r <= 1.0 + 0.2 * (a / n) * (a / n);
    R.deter = r <= 1.0 + (p - 1.0) / (10.0 * p) * (a / n) * (a / n);
    R.boundlolo = r <= 1.0 + 0.2 * (1.0 - a / p) * (a / n);
    R.bound333d = r < 1.0 + a / n;
    R.pqbb = q < p + a * std::min(1.0, p / 2.0);
    R.ilbb = q < 1.0 + a / n;
    R.boundx = r < 1.0 + 1.0 / n;
    const double second = in.n == 2 ? kInf : 4.0 * (p - 1.0) / (p * (n - 2.0));
    R.boundfinale = r < 1.0 + std::min(2.0 / n, second);
    R.condy1 = (n / 4.0) * (r - 1.0) + 0.5 < 1.0;
    R.condy2 = ((n - 2.0) / 4.0) * (r - 1.0) + 1.0 / p < 1.0;

    bool sharp = false, counter = false;
    switch (in.family) {
        case Family::PPower: sharp = q == p; break;
        case Family::DoublePhase:
            sharp = R.bound1;
            counter = R.biba;
            break;
        case Family::MultiPhase: {
            sharp = std::all_of(R.boundulti.begin(), R.boundulti.end(), [](bool b) { return b; });
            if (in.phases.empty()) {
                counter = R.biba;
            } else {
                for (const auto& [qk, ak] : in.phases) counter = counter || (1.0 < p && p < n && n + ak < qk);
            }
            break;
        }
        case Family::VariableExponent:
            sharp = R.condlog;
            counter = in.modulus.has_value() && !R.condlog;
            break;
        case Family::NearlyLinearLog: sharp = q > p ? R.ilbb : true; break;
        case Family::NestedExponential: sharp = in.n >= 3; break;
        case Family::GenericPQ: sharp = R.boundbs; break;
    }
    if (sharp)
        R.verdict = Verdict::Regular;
    else if (counter)
        R.verdict = Verdict::CounterexampleRegime;
    else if (in.bounded && (R.twist2 || R.bouc1))
        R.verdict = Verdict::RegularIfBounded;
    else
        R.verdict = Verdict::Open;
    return R;
}

inline RegimeReport classify_regime(int n, double p, double q, double alpha, bool assume_bounded,
                                    Family family = Family::DoublePhase) {
    RegimeInput in;
    in.n = n;
    in.p = p;
    in.q = q;
    in.alpha = alpha;
    in.bounded = assume_bounded;
    in.family = family;
    return classify_regime(in);
}

inline RegimeReport classify_regime(int n, const IntegrandSpec& sp, bool assume_bounded) {
    RegimeInput in;
    in.n = n;
    in.p = sp.p;
    in.q = sp.q;
    in.alpha = sp.alpha;
    in.bounded = assume_bounded;
    in.family = sp.family;
    for (const auto& ph : sp.phases) in.phases.emplace_back(ph.q, ph.alpha);
    if (sp.family == Family::VariableExponent) in.modulus = sp.modulus;
    return classify_regime(in);
}

// G(t) = ((t^2+s^2)^{p/2} - s^p)/p
inline double g_function(double p, double s, double t) {
    return (std::pow(t * t + s * s, 0.5 * p) - std::pow(s, p)) / p;
}
inline double g_function(const IntegrandSpec& sp, double t) { return g_function(sp.p, sp.s, t); }

inline ScalarField v_field(const IntegrandSpec& sp, const VectorField& du) {
    return map_gradient(du, [&](Vec2 z) { return g_function(sp, norm(z)); });
}

// v = |Du|^{2-gamma} + a(x)|Du|^q evaluated at triangle barycenters
inline ScalarField v_field_intrinsic(const IntegrandSpec& sp, const Grid& g, const VectorField& du, double gamma) {
    ScalarField out(du.size());
    for (std::size_t t = 0; t < du.size(); ++t) {
        const double m = norm(du[t]);
        out[t] = std::pow(m, 2.0 - gamma) + sp.a(g.barycenter(int(t))) * std::pow(m, sp.q);
    }
    return out;
}

}  // namespace nonunif
