#pragma once

#include <algorithm>
#include <cmath>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "core.hpp"
#include "lattice.hpp"
#include "quadrature.hpp"

namespace nonunif {

struct Atom {
    Vec2 x;
    double weight = 0.0;
    bool operator==(const Atom&) const = default;
};

// Nonnegative measure: weighted point masses plus a density that is constant on each node cell.
class Measure {
public:
    explicit Measure(int n = 2) : n_(n) {
        if (n < 2) throw ValidationError("measure dimension must be at least 2");
    }

    static Measure from_atoms(std::vector<Atom> atoms, int n = 2) {
        Measure m(n);
        for (const auto& a : atoms) m.add_atom(a.x, a.weight);
        return m;
    }
    static Measure from_density(GridFunction f, int n = 2) {
        Measure m(n);
        m.set_density(std::move(f));
        return m;
    }

    void add_atom(Vec2 x, double w) {
        if (!(w > 0.0) || !finite(w)) throw ValidationError("atom weight must be positive and finite");
        if (!finite(x.x) || !finite(x.y)) throw ValidationError("atom position must be finite");
        atoms_.push_back({x, w});
    }
    void set_density(GridFunction f) {
        for (double v : f.values())
            if (v < 0.0) throw ValidationError("density must be nonnegative");
        density_ = std::move(f);
    }

    int dim() const { return n_; }
    const std::vector<Atom>& atoms() const { return atoms_; }
    const std::optional<GridFunction>& density() const { return density_; }
    bool empty() const { return atoms_.empty() && !density_; }

    double total_mass() const {
        double s = 0.0;
        for (const auto& a : atoms_) s += a.weight;
        if (density_) {
            const Grid& g = density_->grid();
            for (int k = 0; k < g.nodes(); ++k) s += (*density_)[k] * g.node_weight(k);
        }
        return s;
    }

    Measure scaled(double c) const {
        if (!(c > 0.0)) throw ValidationError("scale factor must be positive");
        Measure m(n_);
        for (const auto& a : atoms_) m.add_atom(a.x, c * a.weight);
        if (density_) m.set_density(density_->map([c](double v) { return c * v; }));
        return m;
    }

    // |mu|^m; only defined for pure densities unless m = 1.
    Measure density_power(double m) const {
        if (m == 1.0) return *this;
        if (!atoms_.empty()) throw UnsupportedInput("point masses admit no power other than m = 1");
        Measure out(n_);
        if (density_) out.set_density(density_->map([m](double v) { return v > 0.0 ? std::pow(v, m) : 0.0; }));
        return out;
    }

    bool operator==(const Measure& o) const {
        if (n_ != o.n_ || atoms_ != o.atoms_ || bool(density_) != bool(o.density_)) return false;
        return !density_ || (density_->grid() == o.density_->grid() && density_->values() == o.density_->values());
    }

private:
    int n_ = 2;
    std::vector<Atom> atoms_;
    std::optional<GridFunction> density_;
};

namespace detail {

inline std::string strip_cr(std::string s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
    return s;
}

inline bool atom_inside(Vec2 a, Vec2 c, double R) { return norm(a - c) <= R * (1.0 + 1e-12) + 1e-300; }

// Mass of the cell-constant density inside the disk.
inline double density_mass(const GridFunction& f, Vec2 c, double R) {
    if (R <= 0.0) return 0.0;
    const Grid& g = f.grid();
    const double hx = g.hx(), hy = g.hy();
    const int i0 = std::max(0, int(std::floor((c.x - R - g.origin().x) / hx - 0.5)));
    const int i1 = std::min(g.nx() - 1, int(std::ceil((c.x + R - g.origin().x) / hx + 0.5)));
    const int j0 = std::max(0, int(std::floor((c.y - R - g.origin().y) / hy - 0.5)));
    const int j1 = std::min(g.ny() - 1, int(std::ceil((c.y + R - g.origin().y) / hy + 0.5)));
    const double R2 = R * R;
    double s = 0.0;
    for (int j = j0; j <= j1; ++j)
        for (int i = i0; i <= i1; ++i) {
            const int k = g.index(i, j);
            const double v = f[k];
            if (v == 0.0) continue;
            const auto [x0, x1, y0, y1] = node_cell(g, k);
            const double fx = std::max(std::abs(x0 - c.x), std::abs(x1 - c.x));
            const double fy = std::max(std::abs(y0 - c.y), std::abs(y1 - c.y));
            if (fx * fx + fy * fy <= R2) {
                s += v * (x1 - x0) * (y1 - y0);
                continue;
            }
            const double nx = std::max({0.0, x0 - c.x, c.x - x1});
            const double ny = std::max({0.0, y0 - c.y, c.y - y1});
            if (nx * nx + ny * ny >= R2) continue;
            s += v * disk_rect_area(c, R, x0, x1, y0, y1);
        }
    return s;
}

// Largest radius below which the density mass in B_rho(c) is exactly C rho^2.
inline double density_clearance(const Grid& g, Vec2 c) {
    const double lox = g.origin().x, hix = lox + g.extent().x;
    const double loy = g.origin().y, hiy = loy + g.extent().y;
    const double dx = std::max({0.0, lox - c.x, c.x - hix}), dy = std::max({0.0, loy - c.y, c.y - hiy});
    if (dx > 0.0 || dy > 0.0) return std::hypot(dx, dy);
    double best = kInf;
    const double tol = 1e-12 * std::max(1.0, g.h_max());
    auto scan = [&](double coord, double lo, double hi, double h, int nodes) {
        // lines at lo, hi and the half-spacing cell edges in between
        const double u = (coord - lo) / h;
        const int k = int(std::floor(u - 0.5));
        for (int m = k - 1; m <= k + 2; ++m) {
            if (m < 0 || m > nodes - 2) continue;
            const double line = lo + (m + 0.5) * h;
            const double d = std::abs(coord - line);
            if (d > tol) best = std::min(best, d);
        }
        for (double line : {lo, hi}) {
            const double d = std::abs(coord - line);
            if (d > tol) best = std::min(best, d);
        }
    };
    scan(c.x, lox, hix, g.hx(), g.nx());
    scan(c.y, loy, hiy, g.hy(), g.ny());
    return best;
}

// Integral over (0, r) of rho^a (kappa |mu|(B_rho(x0)))^e drho/rho.
inline double radial_integral(const Measure& mu, Vec2 x0, double r, double a, double e, double kappa) {
    const int order = 8;
    const double ratio = 1.1;
    std::vector<std::pair<double, double>> breaks;  // (distance, weight)
    double A0 = 0.0;
    for (const auto& at : mu.atoms()) {
        const double d = norm(at.x - x0);
        if (d <= 1e-14 * std::max(1.0, r))
            A0 += at.weight;
        else if (d < r)
            breaks.emplace_back(d, at.weight);
    }
    std::sort(breaks.begin(), breaks.end());
    if (A0 > 0.0 && a <= 0.0) return kInf;

    const GridFunction* dens = mu.density() ? &*mu.density() : nullptr;
    if (dens && dens->max() <= 0.0) dens = nullptr;
    auto mass = [&](double rho, double atoms) { return atoms + (dens ? density_mass(*dens, x0, rho) : 0.0); };
    auto integrand_log = [&](double logrho, double atoms) {
        const double rho = std::exp(logrho);
        const double m = mass(rho, atoms);
        return m > 0.0 ? std::pow(rho, a) * std::pow(kappa * m, e) : 0.0;
    };
    auto pure_power = [&](double lo, double hi, double atoms) {
        if (atoms <= 0.0) return 0.0;
        const double c = std::pow(kappa * atoms, e);
        if (a == 0.0) return c * std::log(hi / lo);
        return c * (std::pow(hi, a) - std::pow(lo, a)) / a;
    };
    auto numeric = [&](double lo, double hi, double atoms) {
        if (!dens) return pure_power(lo, hi, atoms);
        const double L0 = std::log(lo), L1 = std::log(hi);
        const int panels = std::max(1, int(std::ceil((L1 - L0) / std::log(ratio))));
        double s = 0.0;
        for (int k = 0; k < panels; ++k) {
            const double u0 = L0 + (L1 - L0) * k / panels, u1 = L0 + (L1 - L0) * (k + 1) / panels;
            s += gauss_integrate([&](double u) { return integrand_log(u, atoms); }, u0, u1, order);
        }
        return s;
    };

    double total = 0.0;
    double T = r;
    if (!breaks.empty()) T = std::min(T, breaks.front().first);
    if (dens) {
        const double clearance = density_clearance(dens->grid(), x0);
        T = std::min(T, clearance);
        const double probe = 0.5 * T;
        const double C = density_mass(*dens, x0, probe) / (probe * probe);
        if (A0 > 0.0) {
            // a > 0 here: integrate in u = rho^a where the integrand stays bounded
            total += gauss_integrate(
                         [&](double u) {
                             const double rho = std::pow(u, 1.0 / a);
                             return std::pow(kappa * (A0 + C * rho * rho), e);
                         },
                         0.0, std::pow(T, a), order) /
                     a;
        } else if (C > 0.0) {
            const double k = a + 2.0 * e;
            if (k <= 0.0) return kInf;
            total += std::pow(kappa * C, e) * std::pow(T, k) / k;
        }
    } else {
        total += A0 > 0.0 ? std::pow(kappa * A0, e) * std::pow(T, a) / a : 0.0;
    }

    double lo = T, atoms = A0;
    std::size_t next = 0;
    while (lo < r) {
        while (next < breaks.size() && breaks[next].first <= lo) atoms += breaks[next++].second;
        const double hi = next < breaks.size() ? std::min(r, breaks[next].first) : r;
        if (hi > lo) total += numeric(lo, hi, atoms);
        lo = hi;
    }
    return total;
}

inline void check_radius(double r) {
    if (!(r > 0.0) || !finite(r)) throw ValidationError("truncation radius must be positive and finite");
}

}  // namespace detail

inline double mass_in_ball(const Measure& mu, const Ball& b) {
    double s = 0.0;
    for (const auto& a : mu.atoms())
        if (detail::atom_inside(a.x, b.center, b.radius)) s += a.weight;
    if (mu.density()) s += detail::density_mass(*mu.density(), b.center, b.radius);
    return s;
}

// I_beta(x0, r) = int_0^r |mu|(B_rho)/rho^{n-beta} drho/rho
inline double riesz(const Measure& mu, Vec2 x0, double r, double beta) {
    detail::check_radius(r);
    if (!(beta > 0.0)) throw ValidationError("beta must be positive");
    return detail::radial_integral(mu, x0, r, beta - mu.dim(), 1.0, 1.0);
}

// W_{beta,p}(x0, r) = int_0^r (|mu|(B_rho)/rho^{n-beta p})^{1/(p-1)} drho/rho
inline double wolff(const Measure& mu, Vec2 x0, double r, double beta, double p) {
    detail::check_radius(r);
    if (!(beta > 0.0)) throw ValidationError("beta must be positive");
    if (!(p > 1.0)) throw ValidationError("p must exceed 1");
    return detail::radial_integral(mu, x0, r, (beta * p - mu.dim()) / (p - 1.0), 1.0 / (p - 1.0), 1.0);
}

struct PParams {
    double t = 1.0;
    double delta = 1.0;
    double m = 1.0;
    double theta = 1.0;
    void validate() const {
        if (!(t > 0.0) || !(delta > 0.0)) throw ValidationError("t and delta must be positive");
        if (!(m >= 0.0) || !(theta >= 0.0)) throw ValidationError("m and theta must be nonnegative");
    }
};

// P^{m,theta}_{t,delta}(x0, r) = int_0^r rho^delta (avg_{B_rho} |mu|^m)^{theta/t} drho/rho
inline double p_potential(const Measure& mu, Vec2 x0, double r, const PParams& pp) {
    detail::check_radius(r);
    pp.validate();
    const Measure mm = mu.density_power(pp.m);
    const int n = mu.dim();
    const double e = pp.theta / pp.t;
    return detail::radial_integral(mm, x0, r, pp.delta - n * e, e, 1.0 / unit_ball_volume(n));
}

struct LorentzIndex {
    double t = 2.0;
    double gamma = 2.0;  // kInf selects the weak-type norm
    void validate() const {
        if (!(t > 0.0) || !finite(t)) throw ValidationError("Lorentz index t must be positive and finite");
        if (!(gamma > 0.0)) throw ValidationError("Lorentz index gamma must be positive");
    }
};

// Exact norm of a function constant on pieces of the given measures.
inline double lorentz_norm(std::vector<double> values, const std::vector<double>& weights, const LorentzIndex& idx) {
    idx.validate();
    if (values.size() != weights.size()) throw ValidationError("values and weights differ in length");
    std::vector<std::size_t> order(values.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        order[i] = i;
        values[i] = std::abs(values[i]);
    }
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
    double D = 0.0;
    if (!std::isfinite(idx.gamma)) {
        double best = 0.0;
        for (std::size_t i = 0; i < order.size(); ++i) {
            D += weights[order[i]];
            if (values[order[i]] <= 0.0) break;
            best = std::max(best, values[order[i]] * std::pow(D, 1.0 / idx.t));
        }
        return best;
    }
    const double g = idx.gamma;
    double s = 0.0;
    for (std::size_t i = 0; i < order.size(); ++i) {
        const double v = values[order[i]];
        if (v <= 0.0) break;
        D += weights[order[i]];
        const double next = i + 1 < order.size() ? values[order[i + 1]] : 0.0;
        if (D > 0.0) s += std::pow(D, g / idx.t) * (std::pow(v, g) - std::pow(next, g));
    }
    return std::pow(idx.t / g * s, 1.0 / g);
}

inline double lorentz_norm(const GridFunction& f, const LorentzIndex& idx) {
    const Grid& g = f.grid();
    std::vector<double> w(std::size_t(g.nodes()));
    for (int k = 0; k < g.nodes(); ++k) w[std::size_t(k)] = g.node_weight(k);
    return lorentz_norm(f.values(), w, idx);
}

inline double weak_lorentz_norm(const GridFunction& f, double t) { return lorentz_norm(f, {t, kInf}); }

struct WeightedNode {
    int node;
    double weight;
};

// Node cells meeting the ball, weighted by the exact overlap area.
inline std::vector<WeightedNode> ball_cell_weights(const Grid& g, const Ball& b) {
    const Vec2 c = b.center;
    const double R = b.radius;
    const int i0 = std::max(0, int(std::floor((c.x - R - g.origin().x) / g.hx() - 0.5)));
    const int i1 = std::min(g.nx() - 1, int(std::ceil((c.x + R - g.origin().x) / g.hx() + 0.5)));
    const int j0 = std::max(0, int(std::floor((c.y - R - g.origin().y) / g.hy() - 0.5)));
    const int j1 = std::min(g.ny() - 1, int(std::ceil((c.y + R - g.origin().y) / g.hy() + 0.5)));
    std::vector<WeightedNode> out;
    for (int j = j0; j <= j1; ++j)
        for (int i = i0; i <= i1; ++i) {
            const int k = g.index(i, j);
            const auto [x0, x1, y0, y1] = node_cell(g, k);
            const double w = disk_rect_area(c, R, x0, x1, y0, y1);
            if (w > 0.0) out.push_back({k, w});
        }
    return out;
}

inline std::vector<double> cell_weights_in_ball(const Grid& g, const Ball& b) {
    std::vector<double> w(std::size_t(g.nodes()), 0.0);
    for (const auto& e : ball_cell_weights(g, b)) w[std::size_t(e.node)] = e.weight;
    return w;
}

inline double lorentz_norm_in_ball(const GridFunction& f, const Ball& b, const LorentzIndex& idx) {
    return lorentz_norm(f.values(), cell_weights_in_ball(f.grid(), b), idx);
}

inline double lebesgue_norm_in_ball(const GridFunction& f, const Ball& b, double s) {
    if (!(s > 0.0)) throw ValidationError("Lebesgue exponent must be positive");
    const auto w = cell_weights_in_ball(f.grid(), b);
    double acc = 0.0;
    for (int k = 0; k < f.grid().nodes(); ++k) acc += w[std::size_t(k)] * std::pow(std::abs(f[k]), s);
    return std::pow(acc, 1.0 / s);
}

struct CritReport {
    double lhs = 0.0;
    double rhs_lorentz = 0.0;
    double rhs_lebesgue = 0.0;
    double empirical_ratio = 0.0;
    Vec2 argmax{0, 0};
};

// sup over nodes of B_{tau1} of P(mu; ., r0) against the Lorentz and Lebesgue norms on B_{tau1 + r0}.
inline CritReport crit_bound_check(const GridFunction& density, Vec2 center, double tau1, double r0, const PParams& pp,
                                   int n = 2, double eps = 0.1) {
    pp.validate();
    if (!(n * pp.theta / (pp.t * pp.delta) > 1.0))
        throw PreconditionError("the potential bound needs n theta / (t delta) > 1");
    if (!(tau1 > 0.0) || !(r0 > 0.0)) throw ValidationError("radii must be positive");
    const Measure mu = Measure::from_density(density, n);
    CritReport rep;
    const Grid& g = density.grid();
    for (int k : ball_nodes(g, Ball(center, tau1))) {
        const double v = p_potential(mu, g.node(k), r0, pp);
        if (v > rep.lhs) {
            rep.lhs = v;
            rep.argmax = g.node(k);
        }
    }
    const Ball outer(center, tau1 + r0);
    const double power = pp.m * pp.theta / pp.t;
    const double lt = pp.m * n * pp.theta / (pp.t * pp.delta);
    rep.rhs_lorentz = std::pow(lorentz_norm_in_ball(density, outer, {lt, power}), power);
    rep.rhs_lebesgue = std::pow(lebesgue_norm_in_ball(density, outer, (1.0 + eps) * lt), power);
    rep.empirical_ratio = rep.rhs_lorentz > 0.0 ? rep.lhs / rep.rhs_lorentz : (rep.lhs > 0.0 ? kInf : 0.0);
    return rep;
}

// Measure files: header `kind,x,y,weight`, one `atom` row per point mass.
inline void write_measure_csv(std::ostream& os, const Measure& mu) {
    os << "kind,x,y,weight\n";
    for (const auto& a : mu.atoms())
        os << "atom," << fmt_real(a.x.x) << ',' << fmt_real(a.x.y) << ',' << fmt_real(a.weight) << '\n';
}

inline Measure read_measure_csv(std::istream& is, int n = 2) {
    std::string line;
    if (!std::getline(is, line) || detail::strip_cr(line) != "kind,x,y,weight")
        throw ParseError("measure file must start with the header kind,x,y,weight");
    Measure mu(n);
    int lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        line = detail::strip_cr(line);
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string kind, xs, ys, ws;
        if (!std::getline(ss, kind, ',') || !std::getline(ss, xs, ',') || !std::getline(ss, ys, ',') ||
            !std::getline(ss, ws))
            throw ParseError("measure file line " + std::to_string(lineno) + ": expected four fields");
        if (kind != "atom") throw ParseError("measure file line " + std::to_string(lineno) + ": unknown kind");
        try {
            mu.add_atom({std::stod(xs), std::stod(ys)}, std::stod(ws));
        } catch (const std::invalid_argument&) {
            throw ParseError("measure file line " + std::to_string(lineno) + ": malformed number");
        }
    }
    return mu;
}

inline void write_potential_csv(std::ostream& os, const std::vector<Vec2>& xs, const std::vector<double>& vals) {
    os << "x,y,potential\n";
    for (std::size_t i = 0; i < xs.size(); ++i)
        os << fmt_real(xs[i].x) << ',' << fmt_real(xs[i].y) << ',' << fmt_real(vals[i]) << '\n';
}

}  // namespace nonunif
