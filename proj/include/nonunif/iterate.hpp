#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "core.hpp"
#include "lattice.hpp"
#include "potentials.hpp"

namespace nonunif {

namespace detail {

inline double ball_average(const GridFunction& f, const std::vector<WeightedNode>& wn,
                           const std::function<double(double)>& phi) {
    double s = 0.0, m = 0.0;
    for (const auto& e : wn) {
        s += e.weight * phi(f[e.node]);
        m += e.weight;
    }
    return m > 0.0 ? s / m : 0.0;
}

inline int snap_to_node(const Grid& g, Vec2 x) {
    const int i = int(std::lround((x.x - g.origin().x) / g.hx()));
    const int j = int(std::lround((x.y - g.origin().y) / g.hy()));
    if (i < 0 || j < 0 || i >= g.nx() || j >= g.ny() || norm(g.node(i, j) - x) > 1e-9 * g.h_max())
        throw ValidationError("the base point must be a grid node");
    return g.index(i, j);
}

inline void require_ball_inside(const Grid& g, Vec2 c, double r, const char* what) {
    const Vec2 lo = g.origin(), hi = g.origin() + g.extent();
    const double tol = 1e-12 * std::max(1.0, r);
    if (c.x - r < lo.x - tol || c.x + r > hi.x + tol || c.y - r < lo.y - tol || c.y + r > hi.y + tol)
        throw DomainError(std::string(what) + " leaves the grid");
}

inline double pos(double v) { return v > 0.0 ? v : 0.0; }

inline std::vector<WeightedNode> ball_node_weights(const Grid& g, const Ball& b) {
    std::vector<WeightedNode> out;
    for (int k : ball_nodes(g, b)) out.push_back({k, g.node_weight(k)});
    return out;
}

}  // namespace detail

// One potential term M_i^t rho^{t delta_i} (avg |mu_i|^{m_i})^{theta_i} of the reverse inequality.
struct PotentialTerm {
    GridFunction mu;
    double m = 1.0;
    double theta = 1.0;
    double delta = 1.0;
    double M = 0.0;
};

struct DeGiorgiInput {
    GridFunction v;
    Vec2 x0{0, 0};
    double r0 = 0.5;
    double chi = 2.0;
    double t = 1.0;
    double c_star = 1.0;
    double M0 = 1.0;
    double kappa0 = 0.0;
    std::vector<PotentialTerm> terms;
    std::vector<double> kappa_grid;
    std::vector<double> rho_grid;

    void validate() const {
        if (!(chi > 1.0)) throw ValidationError("chi must exceed 1");
        if (!(t >= 1.0)) throw ValidationError("t must be at least 1");
        if (!(c_star > 0.0) || !(M0 > 0.0)) throw ValidationError("c_star and M0 must be positive");
        if (!(kappa0 >= 0.0)) throw ValidationError("kappa0 must be nonnegative");
        if (!(r0 > 0.0)) throw ValidationError("r0 must be positive");
        for (const auto& term : terms) {
            if (!(term.m > 0.0) || !(term.theta > 0.0) || !(term.delta > 0.0) || !(term.M >= 0.0))
                throw ValidationError("potential term constants out of range");
            for (double x : term.mu.values())
                if (x < 0.0) throw ValidationError("potential densities must be nonnegative");
            if (!(term.mu.grid() == v.grid())) throw ValidationError("densities must live on the grid of v");
        }
        detail::snap_to_node(v.grid(), x0);
        detail::require_ball_inside(v.grid(), x0, 2.0 * r0, "the ball B_{2 r0}");
    }
};

struct RevCheck {
    bool holds = true;
    double worst_ratio = 0.0;
    double worst_kappa = 0.0;
    double worst_rho = 0.0;
};

struct RevSides {
    double lhs = 0.0;
    double rhs = 0.0;
};

inline RevSides rev_sides(const DeGiorgiInput& in, double kappa, double rho) {
    const Grid& g = in.v.grid();
    const auto half = ball_cell_weights(g, Ball(in.x0, 0.5 * rho));
    const auto full = ball_cell_weights(g, Ball(in.x0, rho));
    const double tc = in.t * in.chi;
    RevSides s;
    s.lhs = std::pow(detail::ball_average(in.v, half, [&](double x) { return std::pow(detail::pos(x - kappa), tc); }),
                     1.0 / in.chi);
    s.rhs = in.c_star * std::pow(in.M0, in.t) *
            detail::ball_average(in.v, full, [&](double x) { return std::pow(detail::pos(x - kappa), in.t); });
    const double vol = kPi * rho * rho;
    for (const auto& term : in.terms) {
        if (term.M == 0.0) continue;
        const Measure mm = Measure::from_density(term.mu).density_power(term.m);
        const double avg = mass_in_ball(mm, Ball(in.x0, rho)) / vol;
        s.rhs += in.c_star * std::pow(term.M, in.t) * std::pow(rho, in.t * term.delta) * std::pow(avg, term.theta);
    }
    return s;
}

inline void accumulate_rev(RevCheck& rc, const RevSides& s, double kappa, double rho) {
    double ratio = 0.0;
    if (s.lhs > 0.0) ratio = s.rhs > 0.0 ? s.lhs / s.rhs : kInf;
    if (ratio > rc.worst_ratio) {
        rc.worst_ratio = ratio;
        rc.worst_kappa = kappa;
        rc.worst_rho = rho;
    }
    if (s.lhs > s.rhs * (1.0 + 1e-12) + 1e-300) rc.holds = false;
}

inline RevCheck verify_rev_hypothesis(const DeGiorgiInput& in, const std::vector<double>& kappa_grid,
                                      const std::vector<double>& rho_grid) {
    in.validate();
    if (kappa_grid.empty() || rho_grid.empty()) throw ValidationError("hypothesis grids must be nonempty");
    RevCheck rc;
    for (double rho : rho_grid) {
        if (!(rho > 0.0) || rho > in.r0 * (1.0 + 1e-12)) throw DomainError("test radii must lie in (0, r0]");
        for (double kappa : kappa_grid) {
            if (kappa < in.kappa0) continue;
            accumulate_rev(rc, rev_sides(in, kappa, rho), kappa, rho);
        }
    }
    return rc;
}

struct DeGiorgiResult {
    double bound = 0.0;            // kappa0 + 2 gamma A0 + 2 C M0^{1/(chi-1)} sum M_i c_i P_i
    double iterated_level = 0.0;   // level reached by the discrete iteration
    double c_gamma = 0.0;
    double A0 = 0.0;
    double potential_sum = 0.0;    // sum M_i 2^{n theta_i / t} / ln 2 * P_i(x0, 2 r0)
    int steps = 0;
    RevCheck check;
};

// Constant of the level increments: gamma = C_gamma M0^{chi/(chi-1)}.
inline double de_giorgi_c_gamma(double chi, double t, double c_star, int n = 2) {
    const double e = chi / (chi - 1.0);
    return std::pow(2.0, e) * std::pow(2.0, n / t) * std::pow(c_star, e / t);
}

inline DeGiorgiResult de_giorgi_bound(const DeGiorgiInput& in) {
    in.validate();
    DeGiorgiResult res;
    const Grid& g = in.v.grid();
    const int n = 2;
    const double e = in.chi / (in.chi - 1.0);
    res.c_gamma = de_giorgi_c_gamma(in.chi, in.t, in.c_star, n);
    const double gamma = res.c_gamma * std::pow(in.M0, e);

    auto A = [&](double kappa, double rho) {
        const auto wn = ball_cell_weights(g, Ball(in.x0, rho));
        return std::pow(detail::ball_average(in.v, wn, [&](double x) { return std::pow(detail::pos(x - kappa), in.t); }),
                        1.0 / in.t);
    };
    auto Pi = [&](double rho) {
        double s = 0.0;
        for (const auto& term : in.terms) {
            if (term.M == 0.0) continue;
            const Measure mm = Measure::from_density(term.mu).density_power(term.m);
            const double avg = mass_in_ball(mm, Ball(in.x0, rho)) / (kPi * rho * rho);
            s += term.M * std::pow(rho, term.delta) * std::pow(avg, term.theta / in.t);
        }
        return s;
    };

    // the user grid plus every (kappa_{j+1}, rho_j) pair the iteration relies on
    res.check = verify_rev_hypothesis(in, in.kappa_grid.empty() ? std::vector<double>{in.kappa0} : in.kappa_grid,
                                      in.rho_grid.empty() ? std::vector<double>{in.r0} : in.rho_grid);
    double kappa = in.kappa0;
    const double stop = 0.25 * g.h_min();
    double rho = in.r0;
    for (int j = 0; j < 200; ++j) {
        const double a = A(kappa, rho);
        const double b = Pi(rho) / in.M0;
        const double next = kappa + gamma * (a + b);
        accumulate_rev(res.check, rev_sides(in, next, rho), next, rho);
        kappa = next;
        rho *= 0.5;
        res.steps = j + 1;
        if (rho < stop && a + b <= 1e-15 * std::max(1.0, std::abs(kappa))) break;
        if (rho < 1e-3 * stop) break;
    }
    if (!res.check.holds) {
        throw RefusalError("reverse inequality fails at kappa = " + fmt_real(res.check.worst_kappa) +
                           ", rho = " + fmt_real(res.check.worst_rho) + " (ratio " +
                           fmt_real(res.check.worst_ratio) + ")");
    }
    res.iterated_level = kappa + A(kappa, rho);

    res.A0 = A(in.kappa0, in.r0);
    for (const auto& term : in.terms) {
        if (term.M == 0.0) continue;
        const double P = p_potential(Measure::from_density(term.mu), in.x0, 2.0 * in.r0,
                                     {in.t, term.delta, term.m, term.theta});
        res.potential_sum += term.M * std::pow(2.0, n * term.theta / in.t) / std::log(2.0) * P;
    }
    res.bound = in.kappa0 + 2.0 * gamma * res.A0 +
                2.0 * res.c_gamma * std::pow(in.M0, 1.0 / (in.chi - 1.0)) * res.potential_sum;
    return res;
}

struct MoserInput {
    GridFunction v;
    Vec2 center{0, 0};
    double p = 2.0;
    double M0 = 1.0;
    double t = 2.0;
    double t_star = 2.0;
    double chi = 2.0;
    double tau1 = 0.25;
    double tau2 = 0.5;

    void validate() const {
        if (!(p > 1.0)) throw ValidationError("p must exceed 1");
        if (!(chi > 1.0)) throw ValidationError("chi must exceed 1");
        if (!(M0 > 0.0) || !(t > 0.0) || !(t_star > 0.0)) throw ValidationError("Moser constants must be positive");
        if (!(tau1 > 0.0 && tau1 < tau2)) throw ValidationError("radii must satisfy 0 < tau1 < tau2");
        for (double x : v.values())
            if (x < 0.0) throw ValidationError("v must be nonnegative");
        detail::require_ball_inside(v.grid(), center, tau2, "the ball B_{tau2}");
    }
};

struct MoserResult {
    double bound = 0.0;
    double exponent = 0.0;     // (2/p) chi/(chi-1)
    double chain_factor = 0.0; // prod K_j^{1/q_j}
    double lp_norm = 0.0;      // ||v||_{L^{p/2}(B_{tau2})}
    int depth = 0;
    std::vector<double> gammas;
    double worst_ratio = 0.0;
};

namespace detail {

// log of sum_k w_k u_k^q over the weighted cells
inline double log_power_integral(const GridFunction& v, const std::vector<WeightedNode>& wn, double q, double scale) {
    double mx = -kInf;
    std::vector<double> terms;
    terms.reserve(wn.size());
    for (const auto& e : wn) {
        const double x = v[e.node] / scale;
        if (x <= 0.0) continue;
        const double l = std::log(e.weight) + q * std::log(x);
        terms.push_back(l);
        mx = std::max(mx, l);
    }
    if (terms.empty()) return -kInf;
    double s = 0.0;
    for (double l : terms) s += std::exp(l - mx);
    return mx + std::log(s);
}

struct MoserChain {
    std::vector<double> radii, q, gamma, logK, ratio;
};

inline MoserChain moser_chain(const MoserInput& in) {
    MoserChain c;
    double q = 0.5 * in.p;
    for (int j = 0;; ++j) {
        c.radii.push_back(in.tau1 + (in.tau2 - in.tau1) * std::pow(2.0, -j));
        c.q.push_back(q);
        if (q > 1e6 || j == 40) break;
        c.gamma.push_back(q - 0.5 * in.p);
        q *= in.chi;
    }
    return c;
}

}  // namespace detail

// Smallest M0 for which the reverse Holder chain holds at every step used by moser_bound.
inline double moser_minimal_M0(const MoserInput& in) {
    const Grid& g = in.v.grid();
    const auto ch = detail::moser_chain(in);
    double scale = 0.0;
    for (const auto& e : detail::ball_node_weights(g, Ball(in.center, in.tau2))) scale = std::max(scale, in.v[e.node]);
    if (scale <= 0.0) return 0.0;
    double worst = 0.0;
    for (std::size_t j = 0; j < ch.gamma.size(); ++j) {
        const auto outer = detail::ball_node_weights(g, Ball(in.center, ch.radii[j]));
        const auto inner = detail::ball_node_weights(g, Ball(in.center, ch.radii[j + 1]));
        const double lhs = detail::log_power_integral(in.v, inner, ch.q[j + 1], scale) / in.chi;
        const double rhs = detail::log_power_integral(in.v, outer, ch.q[j], scale) + in.t * std::log1p(ch.gamma[j]) -
                           in.t_star * std::log(ch.radii[j] - ch.radii[j + 1]);
        if (std::isfinite(lhs)) worst = std::max(worst, std::exp(lhs - rhs));
    }
    return worst;
}

inline MoserResult moser_bound(const MoserInput& in) {
    in.validate();
    const Grid& g = in.v.grid();
    const auto ch = detail::moser_chain(in);
    MoserResult res;
    res.exponent = (2.0 / in.p) * in.chi / (in.chi - 1.0);
    res.gammas = ch.gamma;
    res.depth = int(ch.gamma.size());

    const auto ball2 = detail::ball_node_weights(g, Ball(in.center, in.tau2));
    double scale = 0.0;
    for (const auto& e : ball2) scale = std::max(scale, in.v[e.node]);
    double lp = 0.0;
    for (const auto& e : ball2) lp += e.weight * std::pow(in.v[e.node], 0.5 * in.p);
    res.lp_norm = std::pow(lp, 2.0 / in.p);
    if (scale <= 0.0) return res;

    double log_factor = 0.0;
    for (std::size_t j = 0; j < ch.gamma.size(); ++j) {
        const double gap = ch.radii[j] - ch.radii[j + 1];
        const double logK = std::log(in.M0) + in.t * std::log1p(ch.gamma[j]) - in.t_star * std::log(gap);
        const auto outer = detail::ball_node_weights(g, Ball(in.center, ch.radii[j]));
        const auto inner = detail::ball_node_weights(g, Ball(in.center, ch.radii[j + 1]));
        const double lhs = detail::log_power_integral(in.v, inner, ch.q[j + 1], scale) / in.chi;
        const double rhs = logK + detail::log_power_integral(in.v, outer, ch.q[j], scale);
        if (std::isfinite(lhs)) {
            res.worst_ratio = std::max(res.worst_ratio, std::exp(lhs - rhs));
            if (lhs > rhs + 1e-12 * std::max(1.0, std::abs(rhs)))
                throw RefusalError("reverse Holder chain fails at gamma = " + fmt_real(ch.gamma[j]));
        }
        log_factor += logK / ch.q[j];
    }
    res.chain_factor = std::exp(log_factor);
    double wmin = kInf;
    for (const auto& e : detail::ball_node_weights(g, Ball(in.center, in.tau1))) wmin = std::min(wmin, e.weight);
    if (!std::isfinite(wmin)) wmin = g.hx() * g.hy();
    res.bound = res.chain_factor * res.lp_norm * std::pow(wmin, -1.0 / ch.q.back());
    return res;
}

// Exponent 1/((n b + 1) p - n b q) of the a priori Lipschitz bound. b = 1 when n > 2; for n = 2 it is the
// midpoint of (1, p / (2(q - p))), and 2 when q = p.
inline double lipschitz_exponent(int n, double p, double q) {
    if (n < 2 || !(p > 1.0) || !(q >= p)) throw ValidationError("Lipschitz exponent needs n >= 2 and q >= p > 1");
    if (!(q / p < 1.0 + 1.0 / n)) throw PreconditionError("the Lipschitz bound needs q/p < 1 + 1/n");
    double b = 1.0;
    if (n == 2) b = q == p ? 2.0 : 0.5 * (1.0 + p / (2.0 * (q - p)));
    return 1.0 / ((n * b + 1.0) * p - n * b * q);
}

struct HoleFillingResult {
    double certified = 0.0;
    double c_gamma = 0.0;
    double lambda = 0.0;
    double h_half = 0.0;
    bool dominates = false;
};

inline double hole_filling_constant(double gamma) {
    if (gamma == 0.0) return 2.0;
    const double lambda = std::pow(0.75, 1.0 / gamma);
    return std::max(3.0 * std::pow(2.0 / (1.0 - lambda), gamma), 2.0);
}

inline HoleFillingResult hole_filling(const std::function<double(double)>& h, double a, double b, double gamma,
                                      double r, const std::vector<std::pair<double, double>>& grid) {
    if (!(a >= 0.0) || !(b >= 0.0) || !(gamma >= 0.0) || !(r > 0.0))
        throw ValidationError("hole filling needs a, b, gamma >= 0 and r > 0");
    auto holds = [&](double t1, double t2) {
        const double rhs = 0.5 * h(t2) + (gamma == 0.0 ? a : a / std::pow(t2 - t1, gamma)) + b;
        return h(t1) <= rhs * (1.0 + 1e-12) + 1e-300;
    };
    auto check = [&](double t1, double t2) {
        const double tol = 1e-12 * r;
        if (!(r / 2 - tol <= t1 && t1 < t2 && t2 <= r + tol)) throw DomainError("hypothesis pairs must satisfy r/2 <= t1 < t2 <= r");
        if (h(t1) < 0.0 || h(t2) < 0.0) throw ValidationError("h must be nonnegative");
        if (!holds(t1, t2))
            throw RefusalError("hole-filling hypothesis fails at (" + fmt_real(t1) + ", " + fmt_real(t2) + ")");
    };
    for (const auto& [t1, t2] : grid) check(t1, t2);
    HoleFillingResult res;
    res.lambda = gamma == 0.0 ? 0.5 : std::pow(0.75, 1.0 / gamma);
    double prev = r / 2;
    for (int i = 1; i < 200; ++i) {
        const double next = r / 2 + (r / 2) * (1.0 - std::pow(res.lambda, i));
        if (next <= prev || next >= r) break;
        check(prev, next);
        prev = next;
    }
    res.c_gamma = hole_filling_constant(gamma);
    res.certified = res.c_gamma * a / std::pow(r, gamma) + res.c_gamma * b;
    res.h_half = h(r / 2);
    res.dominates = res.h_half <= res.certified * (1.0 + 1e-12);
    return res;
}

// Squared Gagliardo double integral over nodes of B (node-cell weights, diagonal excluded).
inline double gagliardo_double_integral(const GridFunction& w, const Ball& b, double beta, int n = 2) {
    if (!(beta > 0.0 && beta < 1.0)) throw ValidationError("beta must lie in (0,1)");
    const Grid& g = w.grid();
    const auto idx = ball_nodes(g, b);
    const double e = 0.5 * (n + 2.0 * beta);
    const double cut2 = 0.25 * g.h_min() * g.h_min();
    std::vector<double> rows(idx.size(), 0.0);
    parallel_for(int(idx.size()), [&](int i) {
        const Vec2 xi = g.node(idx[i]);
        const double vi = w[idx[i]];
        double row = 0.0;
        for (std::size_t j = std::size_t(i) + 1; j < idx.size(); ++j) {
            const double d2 = norm2(g.node(idx[j]) - xi);
            if (d2 < cut2) continue;
            const double diff = vi - w[idx[j]];
            if (diff == 0.0) continue;
            row += g.node_weight(idx[j]) * diff * diff / std::pow(d2, e);
        }
        rows[std::size_t(i)] = 2.0 * g.node_weight(idx[i]) * row;
    });
    double s = 0.0;
    for (double r : rows) s += r;
    return s;
}

inline double gagliardo_seminorm(const GridFunction& w, const Ball& b, double beta, int n = 2) {
    return std::sqrt(gagliardo_double_integral(w, b, beta, n));
}

inline double l2_norm_on_nodes(const GridFunction& w, const Ball& b) {
    double s = 0.0;
    for (int k : ball_nodes(w.grid(), b)) s += w.grid().node_weight(k) * w[k] * w[k];
    return std::sqrt(s);
}

inline double lq_norm_on_nodes(const GridFunction& w, const Ball& b, double q) {
    double s = 0.0;
    for (int k : ball_nodes(w.grid(), b)) s += w.grid().node_weight(k) * std::pow(std::abs(w[k]), q);
    return std::pow(s, 1.0 / q);
}

inline double shift_l2_norm(const GridFunction& w, const Ball& b, Vec2 h) {
    const auto d = finite_difference(w, ShiftVector(h));
    const Grid& g = w.grid();
    double s = 0.0;
    for (int k : ball_nodes(g, b)) {
        if (!d.inside[std::size_t(k)]) throw DomainError("shifted ball leaves the grid");
        s += g.node_weight(k) * d.values[k] * d.values[k];
    }
    return std::sqrt(s);
}

inline double nikolski_ratio(const GridFunction& w, const Ball& b, const std::vector<Vec2>& h_set, double beta) {
    if (h_set.empty()) throw ValidationError("shift set must be nonempty");
    double r = 0.0;
    for (const Vec2& h : h_set) r = std::max(r, shift_l2_norm(w, b, h) / std::pow(norm(h), beta));
    return r;
}

struct EmbeddingResult {
    double certified = 0.0;
    double computed = 0.0;  // L^2 norm plus Gagliardo seminorm of order alpha0 on B_rho
    double constant = 0.0;
    double d = 0.0;
    bool dominates = false;
};

inline double l4_constant(int n) {
    const double w = unit_ball_volume(n);
    return std::max(std::sqrt(n * w / 2.0), 2.0 * std::sqrt(w) + 1.0);
}

inline EmbeddingResult nikolski_to_gagliardo(const GridFunction& w, Vec2 center, double rho, double r, double H,
                                             double beta, double alpha0, double K, const std::vector<Vec2>& h_set,
                                             int n = 2) {
    if (!(0.0 < rho && rho < r && r <= 1.0)) throw ValidationError("radii must satisfy 0 < rho < r <= 1");
    if (!(beta > 0.0 && beta <= 1.0) || !(alpha0 > 0.0 && alpha0 < beta))
        throw ValidationError("need 0 < alpha0 < beta <= 1");
    if (!(H >= 1.0) || !(K >= 1.0)) throw ValidationError("need H >= 1 and K >= 1");
    const Ball B(center, rho);
    EmbeddingResult res;
    res.d = (r - rho) / K;
    int used = 0;
    for (const Vec2& h : h_set) {
        const double len = norm(h);
        if (!(len > 0.0) || len > res.d) continue;
        ++used;
        const double lhs = shift_l2_norm(w, B, h);
        if (lhs > H * std::pow(len, beta) * (1.0 + 1e-12))
            throw RefusalError("Nikolski hypothesis fails at |h| = " + fmt_real(len));
    }
    if (used == 0) throw RefusalError("no admissible shift inside the declared range");
    res.constant = l4_constant(n);
    const double l2 = l2_norm_on_nodes(w, B);
    res.certified = res.constant * (std::pow(beta - alpha0, -0.5) * std::pow(res.d, beta - alpha0) * H +
                                    std::pow(res.d, -0.5 * n - alpha0) * l2);
    res.computed = l2 + gagliardo_seminorm(w, B, alpha0, n);
    res.dominates = res.computed <= res.certified;
    return res;
}

struct FractionalResult {
    double s = 1.0;           // exponent of the first scheme
    double beta = 0.0;
    double b = 0.0;
    double gap_condition = 1.0;  // right-hand side bound on q/p at the chosen beta
    bool admissible = false;
    double s_new = 1.0;       // exponent of the improved scheme
    double beta_new = 0.0;
    double b_new = 0.0;
    double gap_condition_new = 1.0;
    bool admissible_new = false;
};

constexpr double kFractionalMargin = 1e-6;

inline double fractional_exponent(int n, double p, double q) {
    if (n >= 3) return 2.0 * q / ((n + 2.0) * p - n * q);
    return q == p ? 1.0 : q / (2.0 * p - q) + kFractionalMargin;
}

inline double fractional_exponent_new(int n, double p, double q) {
    if (n == 3) return q == p ? 1.0 : q / (2.0 * p - q) + kFractionalMargin;
    return 2.0 * q / ((n + 1.0) * p - (n - 1.0) * q);
}

inline double fractional_b(int n, double p, double alpha, double s, double beta) {
    return 2.0 * p * (s * alpha + 2.0 * beta * (s - 1.0)) / (s * n + 4.0 * beta);
}

inline double fractional_gap_rhs(int n, double alpha, double s, double beta) {
    return 1.0 + (2.0 * beta / n) * ((2.0 * alpha - n * (s - 1.0)) / (s * n + 4.0 * beta));
}

inline FractionalResult fractional_parameter_solver(int n, double p, double q, double alpha) {
    if (n < 2 || !(p > 1.0) || !(q >= p) || !(alpha > 0.0 && alpha <= 1.0))
        throw ValidationError("fractional parameters outside the admissible ranges");
    if (!(q / p < 1.0 + 2.0 / n)) throw PreconditionError("the fractional scheme needs q/p < 1 + 2/n");
    FractionalResult res;
    const double top = alpha / (1.0 + alpha);
    auto solve = [&](double s, double& beta, double& b, double& rhs, bool& ok) {
        rhs = -kInf;
        for (int k = 1; k < 1000; ++k) {
            const double bt = top * k / 1000.0;
            const double val = fractional_gap_rhs(n, alpha, s, bt);
            if (val > rhs) {
                rhs = val;
                beta = bt;
            }
        }
        b = fractional_b(n, p, alpha, s, beta);
        ok = q / p < rhs && b > 0.0 && b <= p;
    };
    res.s = fractional_exponent(n, p, q);
    solve(res.s, res.beta, res.b, res.gap_condition, res.admissible);
    res.s_new = fractional_exponent_new(n, p, q);
    if (res.s_new > 0.0 && std::isfinite(res.s_new))
        solve(res.s_new, res.beta_new, res.b_new, res.gap_condition_new, res.admissible_new);
    return res;
}

struct LemmaRow {
    std::string lemma;
    std::string case_id;
    double lhs = 0.0;
    double rhs = 0.0;
    double ratio = 0.0;
    bool pass = false;
};

inline void write_lemma_csv(std::ostream& os, const std::vector<LemmaRow>& rows) {
    os << "lemma,case_id,lhs,rhs,ratio,pass\n";
    for (const auto& r : rows)
        os << r.lemma << ',' << r.case_id << ',' << fmt_real(r.lhs) << ',' << fmt_real(r.rhs) << ','
           << fmt_real(r.ratio) << ',' << (r.pass ? "true" : "false") << '\n';
}

}  // namespace nonunif
