#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "integrands.hpp"
#include "iterate.hpp"
#include "lattice.hpp"
#include "potentials.hpp"

namespace nonunif {

using SparseMat = Eigen::SparseMatrix<double>;
using Vec = Eigen::VectorXd;

// h(x, y) = L * weight(x) * |y - target(x)|^alpha, lumped at the nodes.
struct HTerm {
    double alpha = 1.0;
    double L = 1.0;
    Coefficient weight = Coefficient::constant(1.0);
    Coefficient target = Coefficient::constant(0.0);

    double operator()(Vec2 x, double y) const { return L * weight(x) * std::pow(std::abs(y - target(x)), alpha); }
    void validate() const {
        if (!(alpha > 0.0 && alpha <= 1.0)) throw ValidationError("h-term exponent must lie in (0,1]");
        if (!(L >= 0.0)) throw ValidationError("h-term constant must be nonnegative");
        double lo = 0.0;
        if (weight.bounded_below(lo) && lo < 0.0) throw ValidationError("h-term weight must be nonnegative");
    }
};

struct Problem {
    std::string id = "problem";
    IntegrandSpec spec;
    Grid grid;
    GridFunction boundary_data;
    std::optional<Measure> source;
    double load = 1.0;  // the linear term is -load * int u dmu
    std::optional<HTerm> h_term;

    Problem() = default;
    Problem(IntegrandSpec sp, Grid g, GridFunction bd) : spec(std::move(sp)), grid(g), boundary_data(std::move(bd)) {}

    void validate() const {
        spec.validate();
        if (!(boundary_data.grid() == grid)) throw ValidationError("boundary data must live on the problem grid");
        for (int k = 0; k < grid.nodes(); ++k)
            if (grid.on_boundary(k) && !finite(boundary_data[k])) throw ValidationError("boundary data must be finite");
        if (source && source->dim() != 2) throw UnsupportedInput("only planar sources are supported");
        if (!finite(load)) throw ValidationError("load factor must be finite");
        if (h_term) h_term->validate();
    }
};

enum class SpaceKind { P1, CR };

// P1 (nodal) or Crouzeix-Raviart (edge midpoint) elements on the grid triangulation.
class FeSpace {
public:
    FeSpace(const Grid& g, SpaceKind kind) : grid_(g), kind_(kind) {
        const int nx = g.nx(), ny = g.ny();
        const int T = g.triangles();
        dofs_.resize(std::size_t(T));
        coef_.resize(std::size_t(T));
        if (kind == SpaceKind::P1) {
            ndof_ = g.nodes();
            boundary_.assign(std::size_t(ndof_), 0);
            pos_.resize(std::size_t(ndof_));
            for (int k = 0; k < ndof_; ++k) {
                boundary_[std::size_t(k)] = g.on_boundary(k);
                pos_[std::size_t(k)] = g.node(k);
                ends_.push_back({k, k});
            }
            for (int t = 0; t < T; ++t) {
                dofs_[std::size_t(t)] = g.triangle_nodes(t);
                coef_[std::size_t(t)] = g.hat_gradients(t);
            }
            return;
        }
        const int NH = (nx - 1) * ny, NV = nx * (ny - 1), ND = (nx - 1) * (ny - 1);
        ndof_ = NH + NV + ND;
        auto H = [&](int i, int j) { return i + (nx - 1) * j; };
        auto V = [&](int i, int j) { return NH + i + nx * j; };
        auto D = [&](int i, int j) { return NH + NV + i + (nx - 1) * j; };
        boundary_.assign(std::size_t(ndof_), 0);
        pos_.resize(std::size_t(ndof_));
        ends_.resize(std::size_t(ndof_));
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i + 1 < nx; ++i) {
                const int e = H(i, j);
                ends_[std::size_t(e)] = {g.index(i, j), g.index(i + 1, j)};
                boundary_[std::size_t(e)] = (j == 0 || j == ny - 1);
            }
        for (int j = 0; j + 1 < ny; ++j)
            for (int i = 0; i < nx; ++i) {
                const int e = V(i, j);
                ends_[std::size_t(e)] = {g.index(i, j), g.index(i, j + 1)};
                boundary_[std::size_t(e)] = (i == 0 || i == nx - 1);
            }
        for (int j = 0; j + 1 < ny; ++j)
            for (int i = 0; i + 1 < nx; ++i) ends_[std::size_t(D(i, j))] = {g.index(i, j), g.index(i + 1, j + 1)};
        for (int e = 0; e < ndof_; ++e)
            pos_[std::size_t(e)] = 0.5 * (g.node(ends_[std::size_t(e)][0]) + g.node(ends_[std::size_t(e)][1]));
        for (int t = 0; t < T; ++t) {
            const int c = t / 2, i = c % (nx - 1), j = c / (nx - 1);
            const auto G = g.hat_gradients(t);
            // local edges (01, 12, 20) of the vertex order used by triangle_nodes
            if (t % 2 == 0)
                dofs_[std::size_t(t)] = {H(i, j), V(i + 1, j), D(i, j)};
            else
                dofs_[std::size_t(t)] = {D(i, j), H(i, j + 1), V(i, j)};
            coef_[std::size_t(t)] = {G[0] + G[1] - G[2], G[1] + G[2] - G[0], G[0] + G[2] - G[1]};
        }
    }

    const Grid& grid() const { return grid_; }
    SpaceKind kind() const { return kind_; }
    int ndof() const { return ndof_; }
    bool boundary(int d) const { return boundary_[std::size_t(d)] != 0; }
    Vec2 position(int d) const { return pos_[std::size_t(d)]; }
    const std::array<int, 3>& dofs(int t) const { return dofs_[std::size_t(t)]; }
    const std::array<Vec2, 3>& grad_coef(int t) const { return coef_[std::size_t(t)]; }

    Vec2 grad(int t, const Vec& u) const {
        const auto& d = dofs_[std::size_t(t)];
        const auto& c = coef_[std::size_t(t)];
        return c[0] * u[d[0]] + c[1] * u[d[1]] + c[2] * u[d[2]];
    }

    // Coefficients of the three local dofs in the value at a point with P1 weights w.
    std::array<double, 3> point_coef(const std::array<double, 3>& w) const {
        if (kind_ == SpaceKind::P1) return w;
        return {w[0] + w[1] - w[2], w[1] + w[2] - w[0], w[0] + w[2] - w[1]};
    }

    // Dof values interpolating a nodal function (midpoint averages for CR).
    Vec interpolate(const GridFunction& f) const {
        Vec u(ndof_);
        for (int d = 0; d < ndof_; ++d) {
            const auto& e = ends_[std::size_t(d)];
            u[d] = 0.5 * (f[e[0]] + f[e[1]]);
        }
        return u;
    }

    GridFunction to_nodes(const Vec& u) const {
        if (kind_ == SpaceKind::P1) return GridFunction(grid_, std::vector<double>(u.data(), u.data() + u.size()));
        std::vector<double> s(std::size_t(grid_.nodes()), 0.0), c(std::size_t(grid_.nodes()), 0.0);
        for (int d = 0; d < ndof_; ++d)
            for (int k : ends_[std::size_t(d)]) {
                s[std::size_t(k)] += u[d];
                c[std::size_t(k)] += 1.0;
            }
        for (std::size_t k = 0; k < s.size(); ++k) s[k] /= c[k];
        return GridFunction(grid_, std::move(s));
    }

private:
    Grid grid_;
    SpaceKind kind_;
    int ndof_ = 0;
    std::vector<std::array<int, 3>> dofs_;
    std::vector<std::array<Vec2, 3>> coef_;
    std::vector<unsigned char> boundary_;
    std::vector<Vec2> pos_;
    std::vector<std::array<int, 2>> ends_;
};

// Energy, derivatives and residual of a problem on one space.
class Discretization {
public:
    Discretization(const Problem& prob, SpaceKind kind) : prob_(prob), space_(prob.grid, kind) {
        prob.validate();
        if (prob.h_term && kind != SpaceKind::P1) throw UnsupportedInput("the h-term is only available on P1");
        const Grid& g = prob.grid;
        area_ = g.triangle_area();
        bary_.resize(std::size_t(g.triangles()));
        for (int t = 0; t < g.triangles(); ++t) bary_[std::size_t(t)] = g.barycenter(t);
        load_ = Vec::Zero(space_.ndof());
        if (prob.source) {
            for (const auto& a : prob.source->atoms()) {
                const auto [t, w] = g.locate(a.x);
                const auto c = space_.point_coef(w);
                const auto& d = space_.dofs(t);
                for (int k = 0; k < 3; ++k) load_[d[k]] += a.weight * c[std::size_t(k)];
            }
            if (const auto& f = prob.source->density()) {
                for (int t = 0; t < g.triangles(); ++t) {
                    const double ft = f->interpolate(bary_[std::size_t(t)]);
                    for (int d : space_.dofs(t)) load_[d] += area_ * ft / 3.0;
                }
            }
            load_ *= prob.load;
        }
        fixed_ = space_.interpolate(prob.boundary_data);
        const double pp = prob.spec.p;
        const double pd = pp > 1.0 ? pp / (pp - 1.0) : kInf;
        phi_norm_.assign(std::size_t(space_.ndof()), 0.0);
        for (int t = 0; t < g.triangles(); ++t) {
            const auto& d = space_.dofs(t);
            const auto& c = space_.grad_coef(t);
            for (int k = 0; k < 3; ++k) {
                const double m = norm(c[std::size_t(k)]);
                double& acc = phi_norm_[std::size_t(d[std::size_t(k)])];
                if (std::isfinite(pd))
                    acc += area_ * std::pow(m, pd);
                else
                    acc = std::max(acc, m);
            }
        }
        if (std::isfinite(pd))
            for (double& v : phi_norm_) v = std::pow(v, 1.0 / pd);
    }

    const FeSpace& space() const { return space_; }
    const Problem& problem() const { return prob_; }
    const Vec& load_vector() const { return load_; }
    const Vec& boundary_values() const { return fixed_; }

    double smooth_energy(const Vec& u) const {
        double e = 0.0;
        const int T = prob_.grid.triangles();
        for (int t = 0; t < T; ++t) {
            const double f = value(prob_.spec, bary_[std::size_t(t)], space_.grad(t, u));
            if (!std::isfinite(f)) throw OverflowError("energy overflows on triangle " + std::to_string(t));
            e += f;
        }
        e = e * area_ - load_.dot(u);
        if (!std::isfinite(e)) throw OverflowError("energy is not finite");
        return e;
    }

    double h_energy(const Vec& u) const {
        if (!prob_.h_term) return 0.0;
        double e = 0.0;
        const Grid& g = prob_.grid;
        for (int k = 0; k < g.nodes(); ++k) e += g.node_weight(k) * (*prob_.h_term)(g.node(k), u[k]);
        return e;
    }

    double energy(const Vec& u) const { return smooth_energy(u) + h_energy(u); }

    Vec gradient(const Vec& u) const {
        Vec gr = -load_;
        const int T = prob_.grid.triangles();
        for (int t = 0; t < T; ++t) {
            const Vec2 dz = grad_z(prob_.spec, bary_[std::size_t(t)], space_.grad(t, u)) * area_;
            const auto& d = space_.dofs(t);
            const auto& c = space_.grad_coef(t);
            for (int k = 0; k < 3; ++k) gr[d[std::size_t(k)]] += dot(dz, c[std::size_t(k)]);
        }
        return gr;
    }

    SparseMat hessian(const Vec& u) const {
        std::vector<Eigen::Triplet<double>> trip;
        const int T = prob_.grid.triangles();
        trip.reserve(std::size_t(T) * 9);
        for (int t = 0; t < T; ++t) {
            const Vec2 z = space_.grad(t, u);
            const Sym2 H = regular_hessian(bary_[std::size_t(t)], z) * area_;
            const auto& d = space_.dofs(t);
            const auto& c = space_.grad_coef(t);
            for (int a = 0; a < 3; ++a) {
                const Vec2 Ha = H.apply(c[std::size_t(a)]);
                for (int b = 0; b < 3; ++b) trip.emplace_back(d[std::size_t(a)], d[std::size_t(b)], dot(Ha, c[std::size_t(b)]));
            }
        }
        SparseMat M(space_.ndof(), space_.ndof());
        M.setFromTriplets(trip.begin(), trip.end());
        return M;
    }

    // Stiffness matrix of the Dirichlet energy int |Dw|^2 / 2.
    SparseMat stiffness() const {
        std::vector<Eigen::Triplet<double>> trip;
        for (int t = 0; t < prob_.grid.triangles(); ++t) {
            const auto& d = space_.dofs(t);
            const auto& c = space_.grad_coef(t);
            for (int a = 0; a < 3; ++a)
                for (int b = 0; b < 3; ++b)
                    trip.emplace_back(d[std::size_t(a)], d[std::size_t(b)], area_ * dot(c[std::size_t(a)], c[std::size_t(b)]));
        }
        SparseMat M(space_.ndof(), space_.ndof());
        M.setFromTriplets(trip.begin(), trip.end());
        return M;
    }

    // max over free dofs of |dE/du_i| / ||D phi_i||_{L^{p'}} for the smooth part of the energy.
    double residual(const Vec& u) const {
        const Vec gr = gradient(u);
        double r = 0.0;
        for (int d = 0; d < space_.ndof(); ++d)
            if (!space_.boundary(d)) r = std::max(r, std::abs(gr[d]) / phi_norm_[std::size_t(d)]);
        return r;
    }

    double grad_sup(const Vec& u) const {
        double m = 0.0;
        for (int t = 0; t < prob_.grid.triangles(); ++t) m = std::max(m, norm(space_.grad(t, u)));
        return m;
    }

private:
    Sym2 regular_hessian(Vec2 x, Vec2 z) const {
        const double floor_z = 1e-8;
        Vec2 zz = z;
        if (norm(z) < floor_z && prob_.spec.s < floor_z) zz = norm(z) > 0.0 ? z * (floor_z / norm(z)) : Vec2{floor_z, 0.0};
        Sym2 H;
        try {
            H = hess_z(prob_.spec, x, zz);
        } catch (const SingularityError&) {
            H = hess_z(prob_.spec, x, Vec2{floor_z, 0.0});
        }
        if (!std::isfinite(H.xx) || !std::isfinite(H.xy) || !std::isfinite(H.yy))
            throw OverflowError("Hessian overflows at x = (" + fmt_real(x.x) + ", " + fmt_real(x.y) + ")");
        return H;
    }

    const Problem& prob_;
    FeSpace space_;
    double area_ = 0.0;
    std::vector<Vec2> bary_;
    Vec load_;
    Vec fixed_;
    std::vector<double> phi_norm_;
};

enum class Method { DampedNewton, PreconditionedGradient };

struct MinimizeOptions {
    double tolerance = 1e-9;
    int max_iter = 200;
    Method method = Method::DampedNewton;
    std::optional<GridFunction> initial;  // nodal initial guess; boundary values are overwritten
    int stagnation_window = 20;           // h-term runs stop when the energy changes less than tolerance over it
};

struct MinimizeResult {
    GridFunction u;
    double energy = 0.0;
    double residual_norm = 0.0;
    int iterations = 0;
    bool converged = false;
    double grad_sup = 0.0;
    std::vector<double> energy_history;
    Vec dofs;
};

namespace detail {

// Affine parametrization u = A x + b of the admissible dof vectors.
struct Param {
    SparseMat A;
    Vec b;
};

inline Param free_dof_param(const Discretization& D) {
    const FeSpace& S = D.space();
    std::vector<Eigen::Triplet<double>> trip;
    int m = 0;
    Vec b = Vec::Zero(S.ndof());
    for (int d = 0; d < S.ndof(); ++d) {
        if (S.boundary(d))
            b[d] = D.boundary_values()[d];
        else
            trip.emplace_back(d, m++, 1.0);
    }
    SparseMat A(S.ndof(), m);
    A.setFromTriplets(trip.begin(), trip.end());
    return {A, b};
}

struct EngineResult {
    Vec x;
    Vec u;
    double energy = 0.0;
    int iterations = 0;
    bool converged = false;
    std::vector<double> history;
};

using StopRule = std::function<bool(const Vec& u, const Vec& gx, double e_prev, double e)>;

inline EngineResult newton_engine(const Discretization& D, const Param& P, Vec x, const MinimizeOptions& opt,
                                  const StopRule& stop) {
    EngineResult R;
    Vec u = P.A * x + P.b;
    double E = D.energy(u);
    R.history.push_back(E);
    double lambda = 0.0;
    double e_prev = kInf;
    std::optional<Eigen::SimplicialLDLT<SparseMat>> precond;
    double step0 = 1.0;
    for (int it = 0; it < opt.max_iter; ++it) {
        const Vec gx = P.A.transpose() * D.gradient(u);
        if (stop(u, gx, e_prev, E)) {
            R.converged = true;
            break;
        }
        R.iterations = it + 1;
        Vec dir;
        if (opt.method == Method::DampedNewton) {
            const SparseMat Hx = SparseMat(P.A.transpose() * D.hessian(u) * P.A);
            double mean_diag = 0.0;
            for (int i = 0; i < Hx.rows(); ++i) mean_diag += std::abs(Hx.coeff(i, i));
            mean_diag = std::max(mean_diag / std::max<Eigen::Index>(1, Hx.rows()), 1e-300);
            bool ok = false;
            for (int attempt = 0; attempt < 30 && !ok; ++attempt) {
                SparseMat K = Hx;
                const double shift = std::max(lambda, 1e-14) * mean_diag;
                for (int i = 0; i < K.rows(); ++i) K.coeffRef(i, i) += shift;
                Eigen::SimplicialLDLT<SparseMat> ldlt(K);
                if (ldlt.info() == Eigen::Success) {
                    dir = ldlt.solve(-gx);
                    if (ldlt.info() == Eigen::Success && dir.allFinite() && dir.dot(gx) < 0.0) ok = true;
                }
                if (!ok) lambda = lambda == 0.0 ? 1e-8 : lambda * 10.0;
            }
            if (!ok) dir = -gx;
        } else {
            if (!precond) {
                SparseMat K = SparseMat(P.A.transpose() * D.stiffness() * P.A);
                for (int i = 0; i < K.rows(); ++i) K.coeffRef(i, i) += 1e-12;
                precond.emplace(K);
            }
            dir = precond->solve(-gx);
        }
        const double slope = gx.dot(dir);
        double s = opt.method == Method::DampedNewton ? 1.0 : step0;
        bool accepted = false;
        double E_new = E;
        Vec x_new;
        const double resolution = 1e-13 * std::max(1.0, std::abs(E));
        if (opt.method == Method::DampedNewton && -slope <= resolution) {
            // the predicted decrease is below the energy resolution: accept a full step that reduces the gradient
            x_new = x + dir;
            const Vec u_new = P.A * x_new + P.b;
            E_new = D.energy(u_new);
            const Vec g_new = P.A.transpose() * D.gradient(u_new);
            accepted = E_new <= E + resolution && g_new.norm() < gx.norm();
        }
        for (int ls = 0; ls < 60 && !accepted; ++ls) {
            x_new = x + s * dir;
            const Vec u_new = P.A * x_new + P.b;
            try {
                E_new = D.energy(u_new);
            } catch (const OverflowError&) {
                E_new = kInf;
            }
            if (E_new <= E + 1e-4 * s * slope) {
                accepted = true;
                break;
            }
            s *= 0.5;
        }
        if (!accepted) {
            if (opt.method == Method::DampedNewton && lambda < 1e12) {
                lambda = lambda == 0.0 ? 1e-6 : lambda * 100.0;
                continue;
            }
            break;
        }
        if (E_new > E + 1e-13 * std::max(1.0, std::abs(E))) throw Error("energy increased during line search");
        x = x_new;
        u = P.A * x + P.b;
        e_prev = E;
        E = E_new;
        R.history.push_back(E);
        if (opt.method == Method::DampedNewton) {
            if (s == 1.0) lambda *= 0.1;
            if (lambda < 1e-12) lambda = 0.0;
        } else {
            step0 = std::min(1e6, s * 2.0);
        }
    }
    if (!R.converged) {
        const Vec gx = P.A.transpose() * D.gradient(u);
        R.converged = stop(u, gx, e_prev, E);
    }
    R.x = x;
    R.u = u;
    R.energy = E;
    return R;
}

// argmin_y  c |y - g|^alpha + (y - z)^2 / 2
inline double prox_power(double z, double g, double c, double alpha) {
    if (c <= 0.0) return z;
    const double d = z - g;
    const double ad = std::abs(d), sg = d >= 0.0 ? 1.0 : -1.0;
    if (alpha == 1.0) return g + sg * std::max(0.0, ad - c);
    auto f = [&](double t) { return c * std::pow(t, alpha) + 0.5 * (t - ad) * (t - ad); };
    const double infl = std::pow(c * alpha * (1.0 - alpha), 1.0 / (2.0 - alpha));
    double best_t = 0.0, best = f(0.0);
    if (infl < ad) {
        double lo = infl, hi = ad;
        const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
        for (int i = 0; i < 200 && hi - lo > 1e-15 * std::max(1.0, ad); ++i) {
            const double m1 = hi - gr * (hi - lo), m2 = lo + gr * (hi - lo);
            if (f(m1) < f(m2))
                hi = m2;
            else
                lo = m1;
        }
        const double t = 0.5 * (lo + hi);
        if (f(t) < best) best_t = t;
    }
    return g + sg * best_t;
}

// Accelerated proximal gradient with a diagonal metric for energies with a lumped h-term.
inline EngineResult proximal_engine(const Discretization& D, const MinimizeOptions& opt, Vec u) {
    const Problem& P = D.problem();
    const Grid& g = P.grid;
    const FeSpace& S = D.space();
    const HTerm& h = *P.h_term;
    const SparseMat K = D.stiffness();
    Vec metric(S.ndof());
    for (int d = 0; d < S.ndof(); ++d) metric[d] = std::max(K.coeff(d, d), 1e-300);
    auto prox = [&](const Vec& y, double tau) {
        Vec out = y;
        for (int k = 0; k < S.ndof(); ++k) {
            if (S.boundary(k)) continue;
            const Vec2 x = g.node(k);
            const double c = tau * g.node_weight(k) * h.L * h.weight(x) / metric[k];
            out[k] = prox_power(y[k], h.target(x), c, h.alpha);
        }
        return out;
    };
    EngineResult R;
    double E = D.energy(u);
    R.history.push_back(E);
    Vec y = u, u_prev = u;
    double tk = 1.0, tau = 1.0;
    bool restarted = false;
    for (int it = 0; it < opt.max_iter; ++it) {
        R.iterations = it + 1;
        const double Ey = D.smooth_energy(y);
        Vec gy = D.gradient(y);
        for (int k = 0; k < S.ndof(); ++k)
            if (S.boundary(k)) gy[k] = 0.0;
        Vec u_new;
        for (int ls = 0; ls < 60; ++ls) {
            Vec step = y;
            for (int k = 0; k < S.ndof(); ++k) step[k] -= tau * gy[k] / metric[k];
            u_new = prox(step, tau);
            const Vec diff = u_new - y;
            double quad = 0.0;
            for (int k = 0; k < S.ndof(); ++k) quad += metric[k] * diff[k] * diff[k];
            if (D.smooth_energy(u_new) <= Ey + gy.dot(diff) + 0.5 / tau * quad + 1e-15 * std::abs(Ey)) break;
            tau *= 0.5;
        }
        const double E_new = D.energy(u_new);
        if (E_new > E) {
            if (restarted) {
                R.converged = true;
                break;
            }
            // restart the momentum and take a plain proximal step from u
            y = u;
            tk = 1.0;
            restarted = true;
            continue;
        }
        restarted = false;
        const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * tk * tk));
        y = u_new + ((tk - 1.0) / tn) * (u_new - u);
        tk = tn;
        u_prev = u;
        u = u_new;
        E = E_new;
        R.history.push_back(E);
        tau *= 1.5;
        const int w = opt.stagnation_window;
        if (int(R.history.size()) > w) {
            const double old = R.history[R.history.size() - 1 - std::size_t(w)];
            if (std::abs(old - E) <= opt.tolerance * std::max(1.0, std::abs(E))) {
                R.converged = true;
                break;
            }
        }
    }
    R.u = u;
    R.x = u;
    R.energy = E;
    return R;
}

inline Vec initial_dofs(const Discretization& D, const MinimizeOptions& opt) {
    const FeSpace& S = D.space();
    Vec u = opt.initial ? S.interpolate(*opt.initial) : D.boundary_values();
    for (int d = 0; d < S.ndof(); ++d)
        if (S.boundary(d)) u[d] = D.boundary_values()[d];
    return u;
}

inline MinimizeResult finish(const Discretization& D, const EngineResult& R) {
    MinimizeResult out;
    out.dofs = R.u;
    out.u = D.space().to_nodes(R.u);
    out.energy = R.energy;
    out.residual_norm = D.residual(R.u);
    out.iterations = R.iterations;
    out.converged = R.converged;
    out.grad_sup = D.grad_sup(R.u);
    out.energy_history = R.history;
    return out;
}

}  // namespace detail

inline MinimizeResult minimize_in(const Problem& prob, SpaceKind kind, const MinimizeOptions& opt = {}) {
    const Discretization D(prob, kind);
    Vec u0 = detail::initial_dofs(D, opt);
    if (prob.h_term) return detail::finish(D, detail::proximal_engine(D, opt, u0));
    const detail::Param P = detail::free_dof_param(D);
    Vec x0(P.A.cols());
    for (int d = 0, m = 0; d < D.space().ndof(); ++d)
        if (!D.space().boundary(d)) x0[m++] = u0[d];
    const double tol = opt.tolerance;
    auto stop = [&](const Vec& u, const Vec&, double, double) { return D.residual(u) <= tol; };
    return detail::finish(D, detail::newton_engine(D, P, x0, opt, stop));
}

inline MinimizeResult minimize(const Problem& prob, const MinimizeOptions& opt = {}) {
    return minimize_in(prob, SpaceKind::P1, opt);
}

inline double assemble_energy(const Problem& prob, const GridFunction& w) {
    if (!(w.grid() == prob.grid)) throw ValidationError("w must live on the problem grid");
    const Discretization D(prob, SpaceKind::P1);
    return D.energy(Eigen::Map<const Vec>(w.values().data(), w.size()));
}

inline double euler_lagrange_residual(const Problem& prob, const GridFunction& w) {
    if (!(w.grid() == prob.grid)) throw ValidationError("w must live on the problem grid");
    const Discretization D(prob, SpaceKind::P1);
    return D.residual(Eigen::Map<const Vec>(w.values().data(), w.size()));
}

// The boundary data itself, used as the extension competitor.
inline GridFunction boundary_extension(const Problem& prob) { return prob.boundary_data; }

inline void write_run_summary(std::ostream& os, const std::string& id, const MinimizeResult& r, bool header = true) {
    if (header) os << "problem_id,energy,residual,iterations,grad_sup,converged\n";
    os << id << ',' << fmt_real(r.energy) << ',' << fmt_real(r.residual_norm) << ',' << r.iterations << ','
       << fmt_real(r.grad_sup) << ',' << (r.converged ? "true" : "false") << '\n';
}

// ---------------------------------------------------------------------------------------------
// Lavrentiev gap

enum class GapFlag { False, True, Indeterminate };

inline const char* gap_flag_name(GapFlag f) {
    switch (f) {
        case GapFlag::False: return "false";
        case GapFlag::True: return "true";
        case GapFlag::Indeterminate: return "indeterminate";
    }
    return "indeterminate";
}

struct LavrentievOptions {
    std::vector<double> radii;  // decreasing, ending at the grid spacing; empty means {4h, 2h, h}
    double gap_tolerance = 1e-3;
    double stabilization = 1e-3;
    bool extrapolate = true;  // combine the CR energies on the grid and on every other node
    MinimizeOptions inner = [] {
        MinimizeOptions o;
        o.tolerance = 1e-8;
        o.max_iter = 300;
        return o;
    }();
};

struct LavrentievReport {
    double inf_broad = 0.0;
    double inf_smooth = 0.0;
    double gap = 0.0;
    GapFlag gap_positive = GapFlag::Indeterminate;
    bool stabilized = false;
    std::vector<double> radii;
    std::vector<double> values;
    bool broad_converged = false;
    double broad_fine = 0.0;
    std::optional<double> broad_coarse;
};

inline SparseMat mollifier_matrix(const Grid& g, double radius) {
    const auto st = tent_stencil(g, radius);
    std::vector<Eigen::Triplet<double>> trip;
    for (int j = 0; j < g.ny(); ++j)
        for (int i = 0; i < g.nx(); ++i)
            for (const auto& e : st) {
                const int ii = std::clamp(i + e.di, 0, g.nx() - 1);
                const int jj = std::clamp(j + e.dj, 0, g.ny() - 1);
                trip.emplace_back(g.index(i, j), g.index(ii, jj), e.weight);
            }
    SparseMat M(g.nodes(), g.nodes());
    M.setFromTriplets(trip.begin(), trip.end());
    return M;
}

// P1 prolongation from the subgrid of every k-th node to the full grid.
inline SparseMat prolongation_matrix(const Grid& g, int k) {
    const int cx = (g.nx() - 1) / k + 1, cy = (g.ny() - 1) / k + 1;
    const Grid coarse(g.origin(), g.extent(), cx, cy);
    std::vector<Eigen::Triplet<double>> trip;
    for (int n = 0; n < g.nodes(); ++n) {
        const auto [t, w] = coarse.locate(g.node(n));
        const auto idx = coarse.triangle_nodes(t);
        for (int a = 0; a < 3; ++a)
            if (w[std::size_t(a)] > 1e-14) trip.emplace_back(n, idx[std::size_t(a)], w[std::size_t(a)]);
    }
    SparseMat P(g.nodes(), coarse.nodes());
    P.setFromTriplets(trip.begin(), trip.end());
    return P;
}

// Minimum of the energy over u = boundary correction of mollify(w, radius), where w is piecewise
// linear on the subgrid of spacing radius (the full grid when the radius does not divide it).
inline double mollified_infimum(const Problem& prob, double radius, const GridFunction& start,
                                const MinimizeOptions& opt) {
    const Discretization D(prob, SpaceKind::P1);
    const Grid& g = prob.grid;
    int k = std::max(1, int(std::lround(radius / g.h_max())));
    if ((g.nx() - 1) % k != 0 || (g.ny() - 1) % k != 0) k = 1;
    const SparseMat M = mollifier_matrix(g, radius);
    const SparseMat Pr = prolongation_matrix(g, k);
    std::vector<Eigen::Triplet<double>> sel;
    Vec b = Vec::Zero(g.nodes());
    for (int n = 0; n < g.nodes(); ++n) {
        if (g.on_boundary(n))
            b[n] = D.boundary_values()[n];
        else
            sel.emplace_back(n, n, 1.0);
    }
    SparseMat Pint(g.nodes(), g.nodes());
    Pint.setFromTriplets(sel.begin(), sel.end());
    detail::Param P{SparseMat(Pint * M * Pr), b};
    const int cx = (g.nx() - 1) / k + 1;
    Vec x0(Pr.cols());
    for (int c = 0; c < Pr.cols(); ++c) x0[c] = start.at((c % cx) * k, (c / cx) * k);
    const double tol = opt.tolerance;
    auto stop = [&](const Vec&, const Vec& gx, double e_prev, double e) {
        return gx.lpNorm<Eigen::Infinity>() <= tol * g.hx() * g.hy() ||
               (std::isfinite(e_prev) && std::abs(e_prev - e) <= 1e-13 * std::max(1.0, std::abs(e)));
    };
    return detail::newton_engine(D, P, x0, opt, stop).energy;
}

inline LavrentievReport lavrentiev_gap(const Problem& prob, const LavrentievOptions& opt = {}) {
    LavrentievReport rep;
    const Grid& g = prob.grid;
    const double h = g.h_max();
    rep.radii = opt.radii.empty() ? std::vector<double>{4 * h, 2 * h, h} : opt.radii;
    for (std::size_t i = 1; i < rep.radii.size(); ++i)
        if (!(rep.radii[i] < rep.radii[i - 1])) throw ValidationError("mollification radii must decrease");
    if (rep.radii.back() > h * (1 + 1e-9)) rep.radii.push_back(h);

    const auto broad = minimize_in(prob, SpaceKind::CR, opt.inner);
    rep.broad_fine = rep.inf_broad = broad.energy;
    rep.broad_converged = broad.converged;
    if (opt.extrapolate && g.nx() % 2 == 1 && g.ny() % 2 == 1 && g.nx() >= 5 && g.ny() >= 5) {
        Problem coarse = prob;
        coarse.grid = Grid(g.origin(), g.extent(), (g.nx() + 1) / 2, (g.ny() + 1) / 2);
        coarse.boundary_data =
            GridFunction::sample(coarse.grid, [&](Vec2 x) { return prob.boundary_data.interpolate(x); });
        const auto c = minimize_in(coarse, SpaceKind::CR, opt.inner);
        rep.broad_coarse = c.energy;
        rep.broad_converged = rep.broad_converged && c.converged;
        rep.inf_broad = broad.energy + (broad.energy - c.energy) / 3.0;
    }
    const auto fine = minimize_in(prob, SpaceKind::P1, opt.inner);
    rep.values.assign(rep.radii.size(), 0.0);
    for (std::size_t i = 0; i < rep.radii.size(); ++i) {
        if (rep.radii[i] <= h * (1 + 1e-9))
            rep.values[i] = fine.energy;
        else
            rep.values[i] = mollified_infimum(prob, rep.radii[i], fine.u, opt.inner);
    }
    // smallest radius whose value agrees with the next larger radius
    std::optional<std::size_t> at;
    for (std::size_t i = rep.radii.size(); i-- > 1;) {
        const double a = rep.values[i], b = rep.values[i - 1];
        if (std::abs(a - b) < opt.stabilization * std::max(std::abs(a), 1e-300)) {
            at = i;
            break;
        }
    }
    rep.stabilized = at.has_value();
    rep.inf_smooth = rep.values[at.value_or(rep.values.size() - 1)];
    rep.gap = rep.inf_smooth - rep.inf_broad;
    const double tol = opt.gap_tolerance * std::max(std::abs(rep.inf_broad), 1e-12);
    const double lower = rep.values.back() - rep.inf_broad;
    if (lower > tol)
        rep.gap_positive = GapFlag::True;
    else if (rep.stabilized)
        rep.gap_positive = rep.gap > tol ? GapFlag::True : GapFlag::False;
    else
        rep.gap_positive = GapFlag::Indeterminate;
    return rep;
}

// ---------------------------------------------------------------------------------------------
// Measure data

// Tent bump of the given width carrying the atom's mass under the barycentric quadrature.
inline GridFunction tent_bump(const Grid& g, Vec2 x0, double width, double mass) {
    GridFunction f = GridFunction::sample(g, [&](Vec2 x) { return std::max(0.0, 1.0 - norm(x - x0) / width); });
    double m = 0.0;
    for (int t = 0; t < g.triangles(); ++t) m += g.triangle_area() * f.interpolate(g.barycenter(t));
    if (!(m > 0.0)) throw RefusalError("bump carries no mass on the grid");
    return f.map([&](double v) { return v * mass / m; });
}

inline Measure regularize_measure(const Measure& mu, const Grid& g, double width) {
    if (width < 2.0 * g.h_max() * (1 - 1e-12)) throw RefusalError("bump width must cover at least two grid cells");
    std::vector<double> acc(std::size_t(g.nodes()), 0.0);
    for (const auto& a : mu.atoms()) {
        const auto b = tent_bump(g, a.x, width, a.weight);
        for (int k = 0; k < g.nodes(); ++k) acc[std::size_t(k)] += b[k];
    }
    if (const auto& d = mu.density()) {
        for (int k = 0; k < g.nodes(); ++k) acc[std::size_t(k)] += d->interpolate(g.node(k));
    }
    return Measure::from_density(GridFunction(g, std::move(acc)));
}

// Solves -div(dF/dz / p) = mu with zero boundary values.
inline MinimizeResult solve_measure_data(const IntegrandSpec& spec, const Measure& mu, const Grid& g, double width,
                                         const MinimizeOptions& opt = {}) {
    if (spec.family != Family::PPower) throw UnsupportedInput("measure data problems use the p_power family");
    if (spec.p < 2.0) throw PreconditionError("measure data problems need p >= 2");
    Problem prob(spec, g, GridFunction(g, 0.0));
    prob.id = "measure_data";
    if (!mu.empty()) prob.source = regularize_measure(mu, g, width);
    prob.load = spec.p;
    return minimize(prob, opt);
}

// ---------------------------------------------------------------------------------------------
// Caccioppoli checks

enum class CaccioppoliVariant { Classical, PGrowth, Renormalized, Fractional };

inline const char* caccioppoli_name(CaccioppoliVariant v) {
    switch (v) {
        case CaccioppoliVariant::Classical: return "classical";
        case CaccioppoliVariant::PGrowth: return "p_growth";
        case CaccioppoliVariant::Renormalized: return "renormalized";
        case CaccioppoliVariant::Fractional: return "fractional";
    }
    return "classical";
}

inline CaccioppoliVariant parse_caccioppoli(const std::string& s) {
    for (auto v : {CaccioppoliVariant::Classical, CaccioppoliVariant::PGrowth, CaccioppoliVariant::Renormalized,
                   CaccioppoliVariant::Fractional})
        if (s == caccioppoli_name(v)) return v;
    throw ParseError("unknown Caccioppoli variant '" + s + "'");
}

struct CaccioppoliRow {
    double kappa = 0.0;
    Ball ball{{0, 0}, 1.0};
    double lhs = 0.0;
    double rhs = 0.0;
    double ratio = 0.0;
};

struct CaccioppoliReport {
    CaccioppoliVariant variant = CaccioppoliVariant::Classical;
    std::vector<CaccioppoliRow> rows;
    double max_ratio = 0.0;
    double constant = kInf;
    bool pass = true;
    FractionalResult params;
    double beta = 0.0;
    double M = 0.0;
};

namespace detail {

// Nodal average of a per-triangle field over the incident triangles.
inline GridFunction triangles_to_nodes(const Grid& g, const ScalarField& f) {
    std::vector<double> s(std::size_t(g.nodes()), 0.0), c(std::size_t(g.nodes()), 0.0);
    for (int t = 0; t < g.triangles(); ++t)
        for (int k : g.triangle_nodes(t)) {
            s[std::size_t(k)] += f[std::size_t(t)];
            c[std::size_t(k)] += 1.0;
        }
    for (std::size_t k = 0; k < s.size(); ++k) s[k] /= c[k];
    return GridFunction(g, std::move(s));
}

inline double triangle_integral(const Grid& g, const Ball& b, const std::function<double(int)>& f) {
    double s = 0.0;
    for (int t : ball_triangles(g, b)) s += f(t);
    return s * g.triangle_area();
}

inline double node_integral(const Grid& g, const Ball& b, const std::function<double(int)>& f) {
    double s = 0.0;
    for (int k : ball_nodes(g, b)) s += g.node_weight(k) * f(k);
    return s;
}

}  // namespace detail

struct CaccioppoliInput {
    const Problem* problem = nullptr;
    const MinimizeResult* result = nullptr;
    std::vector<double> kappas;
    std::vector<Ball> balls;
    CaccioppoliVariant variant = CaccioppoliVariant::Classical;
    double constant = kInf;
    double beta_fraction = 0.9;  // beta = beta_fraction * alpha / (1 + alpha)
};

inline CaccioppoliReport caccioppoli_check(const CaccioppoliInput& in) {
    if (!in.problem || !in.result) throw ValidationError("Caccioppoli check needs a problem and its minimizer");
    const Problem& P = *in.problem;
    const MinimizeResult& R = *in.result;
    const Grid& g = P.grid;
    if (!R.converged) throw PreconditionError("Caccioppoli checks need a converged minimizer");
    if (in.kappas.empty() || in.balls.empty()) throw ValidationError("level and ball grids must be nonempty");
    for (const auto& b : in.balls) detail::require_ball_inside(g, b.center, b.radius, "a test ball");

    CaccioppoliReport rep;
    rep.variant = in.variant;
    rep.constant = in.constant;
    const IntegrandSpec& sp = P.spec;
    const double p = sp.p, q = sp.q;
    const VectorField du = gradient(R.u);
    rep.M = R.grad_sup + 1.0;

    std::optional<GridFunction> mu;
    if (P.source) {
        if (!P.source->atoms().empty()) throw UnsupportedInput("Caccioppoli checks need a density source");
        if (P.source->density()) mu = GridFunction::sample(g, [&](Vec2 x) { return P.source->density()->interpolate(x); });
    }
    auto mu_at = [&](int k) { return mu ? (*mu)[k] * P.load : 0.0; };

    GridFunction v = R.u;
    if (in.variant == CaccioppoliVariant::Renormalized || in.variant == CaccioppoliVariant::Fractional)
        v = detail::triangles_to_nodes(g, v_field(sp, du));

    if (in.variant == CaccioppoliVariant::Fractional) {
        const double alpha = sp.alpha;
        rep.params = fractional_parameter_solver(2, p, q, alpha);
        if (rep.params.b > p) throw RefusalError("fractional parameters violate b <= p");
        if (!(q / p < rep.params.gap_condition))
            throw RefusalError("fractional parameters violate q/p < 1 + (2 beta/n)(2 alpha - n(s-1))/(s n + 4 beta)");
        rep.beta = in.beta_fraction * alpha / (1.0 + alpha);
    }

    for (double kappa : in.kappas) {
        const GridFunction w = v.map([&](double x) { return std::max(x - kappa, 0.0); });
        const VectorField dw = gradient(w);
        for (const Ball& B : in.balls) {
            const double rho = B.radius;
            const Ball half(B.center, 0.5 * rho);
            CaccioppoliRow row{kappa, B, 0.0, 0.0, 0.0};
            switch (in.variant) {
                case CaccioppoliVariant::Classical:
                    row.lhs = detail::triangle_integral(g, half, [&](int t) { return norm2(dw[std::size_t(t)]); });
                    row.rhs = detail::node_integral(g, B, [&](int k) { return w[k] * w[k]; }) / (rho * rho) +
                              rho * rho * detail::node_integral(g, B, [&](int k) { return mu_at(k) * mu_at(k); });
                    break;
                case CaccioppoliVariant::PGrowth: {
                    const double pd = p / (p - 1.0);
                    row.lhs = detail::triangle_integral(g, half, [&](int t) { return std::pow(norm(dw[std::size_t(t)]), p); });
                    row.rhs = detail::node_integral(g, B, [&](int k) { return std::pow(w[k], p); }) / std::pow(rho, p) +
                              std::pow(rho, pd) * detail::node_integral(g, B, [&](int k) { return std::pow(std::abs(mu_at(k)), pd); });
                    break;
                }
                case CaccioppoliVariant::Renormalized:
                    row.lhs = detail::triangle_integral(g, half, [&](int t) { return norm2(dw[std::size_t(t)]); });
                    row.rhs = std::pow(rep.M, q - p) / (rho * rho) * detail::node_integral(g, B, [&](int k) { return w[k] * w[k]; }) +
                              rep.M * rep.M * detail::node_integral(g, B, [&](int k) { return mu_at(k) * mu_at(k); });
                    break;
                case CaccioppoliVariant::Fractional: {
                    const double beta = rep.beta;
                    const double s = rep.params.s;
                    const double b = fractional_b(2, p, sp.alpha, s, beta);
                    const double vol_half = detail::node_integral(g, half, [](int) { return 1.0; });
                    const double vol = detail::node_integral(g, B, [](int) { return 1.0; });
                    const double tri_vol = detail::triangle_integral(g, B, [](int) { return 1.0; });
                    row.lhs = gagliardo_double_integral(w, half, beta) / vol_half;
                    row.rhs = std::pow(rep.M, s * (q - p)) * std::pow(rho, -2 * beta) *
                                  detail::node_integral(g, B, [&](int k) { return w[k] * w[k]; }) / vol +
                              std::pow(rep.M, s * q + p - b) * std::pow(rho, 2 * sp.alpha - 2 * beta) *
                                  detail::triangle_integral(g, B, [&](int t) {
                                      return std::pow(norm(du[std::size_t(t)]) + 1.0, 2 * q - 2 * p + b);
                                  }) / tri_vol;
                    break;
                }
            }
            if (row.lhs > 0.0) row.ratio = row.rhs > 0.0 ? row.lhs / row.rhs : kInf;
            rep.max_ratio = std::max(rep.max_ratio, row.ratio);
            rep.rows.push_back(row);
        }
    }
    rep.pass = rep.max_ratio <= rep.constant;
    return rep;
}

inline void write_caccioppoli_csv(std::ostream& os, const CaccioppoliReport& r) {
    os << "variant,kappa,cx,cy,radius,lhs,rhs,ratio,constant\n";
    for (const auto& row : r.rows)
        os << caccioppoli_name(r.variant) << ',' << fmt_real(row.kappa) << ',' << fmt_real(row.ball.center.x) << ','
           << fmt_real(row.ball.center.y) << ',' << fmt_real(row.ball.radius) << ',' << fmt_real(row.lhs) << ','
           << fmt_real(row.rhs) << ',' << fmt_real(row.ratio) << ',' << fmt_real(r.constant) << '\n';
}

// ---------------------------------------------------------------------------------------------
// Gradient potential estimate

struct PotentialSample {
    Vec2 x;
    double grad = 0.0;      // |Du(x)|
    double riesz = 0.0;     // I_1(x, r)
    double average = 0.0;   // (avg_{B_r} |Du|)^{p-1}
    double ratio = 0.0;     // |Du|^{p-1} / (I_1 + average)
    double wolff_ratio = 0.0;  // |u| / (W_{1,p} + (avg |u|^{p-1})^{1/(p-1)})
};

struct PotentialReport {
    std::vector<PotentialSample> samples;
    double max_ratio = 0.0;
    double max_wolff_ratio = 0.0;
};

inline PotentialReport potential_estimate_check(const MinimizeResult& res, const IntegrandSpec& spec,
                                                const Measure& mu, const std::vector<Vec2>& points, double r) {
    const Grid& g = res.u.grid();
    const VectorField du = gradient(res.u);
    const double p = spec.p;
    PotentialReport rep;
    for (const Vec2& x : points) {
        detail::require_ball_inside(g, x, r, "the sample ball");
        PotentialSample s;
        s.x = x;
        const auto [t, w] = g.locate(x);
        (void)w;
        s.grad = norm(du[std::size_t(t)]);
        s.riesz = riesz(mu, x, r, 1.0);
        const Ball B(x, r);
        const double vol = detail::triangle_integral(g, B, [](int) { return 1.0; });
        s.average = std::pow(detail::triangle_integral(g, B, [&](int k) { return norm(du[std::size_t(k)]); }) / vol, p - 1.0);
        const double lhs = std::pow(s.grad, p - 1.0);
        const double rhs = s.riesz + s.average;
        s.ratio = lhs > 0.0 ? (rhs > 0.0 ? lhs / rhs : kInf) : 0.0;
        if (p >= 2.0) {
            const double W = wolff(mu, x, r, 1.0, p);
            const double nvol = detail::node_integral(g, B, [](int) { return 1.0; });
            const double avg = std::pow(
                detail::node_integral(g, B, [&](int k) { return std::pow(std::abs(res.u[k]), p - 1.0); }) / nvol,
                1.0 / (p - 1.0));
            const double ux = std::abs(res.u.interpolate(x));
            s.wolff_ratio = ux > 0.0 ? (W + avg > 0.0 ? ux / (W + avg) : kInf) : 0.0;
        }
        rep.max_ratio = std::max(rep.max_ratio, s.ratio);
        rep.max_wolff_ratio = std::max(rep.max_wolff_ratio, s.wolff_ratio);
        rep.samples.push_back(s);
    }
    return rep;
}

}  // namespace nonunif
