#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "core.hpp"

namespace nonunif {

inline std::string fmt_real(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// Uniform node lattice on a rectangle; every cell carries two triangles,
// (i,j)-(i+1,j)-(i+1,j+1) and (i,j)-(i+1,j+1)-(i,j+1).
class Grid {
public:
    Grid() = default;
    Grid(Vec2 origin, Vec2 extent, int nx, int ny) : origin_(origin), extent_(extent), nx_(nx), ny_(ny) {
        if (!(extent.x > 0.0) || !(extent.y > 0.0) || !finite(extent.x) || !finite(extent.y))
            throw ValidationError("grid extent must be positive and finite");
        if (nx < 3 || ny < 3) throw ValidationError("grid needs at least 3 nodes per side");
        if (!finite(origin.x) || !finite(origin.y)) throw ValidationError("grid origin must be finite");
    }

    static Grid square(double lo, double hi, int n) { return Grid({lo, lo}, {hi - lo, hi - lo}, n, n); }

    Vec2 origin() const { return origin_; }
    Vec2 extent() const { return extent_; }
    int nx() const { return nx_; }
    int ny() const { return ny_; }
    double hx() const { return extent_.x / (nx_ - 1); }
    double hy() const { return extent_.y / (ny_ - 1); }
    double h_min() const { return std::min(hx(), hy()); }
    double h_max() const { return std::max(hx(), hy()); }
    int nodes() const { return nx_ * ny_; }
    int cells() const { return (nx_ - 1) * (ny_ - 1); }
    int triangles() const { return 2 * cells(); }
    double triangle_area() const { return 0.5 * hx() * hy(); }
    double area() const { return extent_.x * extent_.y; }

    int index(int i, int j) const { return i + nx_ * j; }
    int col(int k) const { return k % nx_; }
    int row(int k) const { return k / nx_; }
    Vec2 node(int i, int j) const { return {origin_.x + i * hx(), origin_.y + j * hy()}; }
    Vec2 node(int k) const { return node(col(k), row(k)); }

    bool on_boundary(int k) const {
        const int i = col(k), j = row(k);
        return i == 0 || j == 0 || i == nx_ - 1 || j == ny_ - 1;
    }

    // Cell area attached to a node: full interior, halved on edges, quartered at corners.
    double node_weight(int k) const {
        const int i = col(k), j = row(k);
        double w = hx() * hy();
        if (i == 0 || i == nx_ - 1) w *= 0.5;
        if (j == 0 || j == ny_ - 1) w *= 0.5;
        return w;
    }

    std::array<int, 3> triangle_nodes(int t) const {
        const int c = t / 2;
        const int i = c % (nx_ - 1), j = c / (nx_ - 1);
        if (t % 2 == 0) return {index(i, j), index(i + 1, j), index(i + 1, j + 1)};
        return {index(i, j), index(i + 1, j + 1), index(i, j + 1)};
    }

    // Gradients of the three local hat functions, in triangle_nodes order.
    std::array<Vec2, 3> hat_gradients(int t) const {
        const double ix = 1.0 / hx(), iy = 1.0 / hy();
        if (t % 2 == 0) return {Vec2{-ix, 0.0}, Vec2{ix, -iy}, Vec2{0.0, iy}};
        return {Vec2{0.0, -iy}, Vec2{ix, 0.0}, Vec2{-ix, iy}};
    }

    Vec2 barycenter(int t) const {
        const auto n = triangle_nodes(t);
        return (node(n[0]) + node(n[1]) + node(n[2])) / 3.0;
    }

    bool contains(Vec2 p, double tol = 1e-12) const {
        const double tx = tol * extent_.x, ty = tol * extent_.y;
        return p.x >= origin_.x - tx && p.x <= origin_.x + extent_.x + tx && p.y >= origin_.y - ty &&
               p.y <= origin_.y + extent_.y + ty;
    }

    // Triangle containing p (p clamped into the rectangle) and the P1 weights of its nodes.
    std::pair<int, std::array<double, 3>> locate(Vec2 p) const {
        double fx = (p.x - origin_.x) / hx();
        double fy = (p.y - origin_.y) / hy();
        fx = std::clamp(fx, 0.0, double(nx_ - 1));
        fy = std::clamp(fy, 0.0, double(ny_ - 1));
        int i = std::min(int(std::floor(fx)), nx_ - 2);
        int j = std::min(int(std::floor(fy)), ny_ - 2);
        const double sx = fx - i, sy = fy - j;
        const int c = i + (nx_ - 1) * j;
        if (sx >= sy) return {2 * c, {1.0 - sx, sx - sy, sy}};
        return {2 * c + 1, {1.0 - sy, sx, sy - sx}};
    }

    bool operator==(const Grid& o) const {
        return origin_ == o.origin_ && extent_ == o.extent_ && nx_ == o.nx_ && ny_ == o.ny_;
    }

private:
    Vec2 origin_{0.0, 0.0};
    Vec2 extent_{1.0, 1.0};
    int nx_ = 3;
    int ny_ = 3;
};

class GridFunction {
public:
    GridFunction() = default;
    explicit GridFunction(Grid g, double fill = 0.0) : grid_(g), values_(std::size_t(g.nodes()), fill) {
        if (!finite(fill)) throw ValidationError("grid function values must be finite");
    }
    GridFunction(Grid g, std::vector<double> values) : grid_(g), values_(std::move(values)) {
        if (values_.size() != std::size_t(grid_.nodes()))
            throw ValidationError("grid function has " + std::to_string(values_.size()) + " values for " +
                                  std::to_string(grid_.nodes()) + " nodes");
        for (double v : values_)
            if (!finite(v)) throw ValidationError("grid function values must be finite");
    }

    template <class F>
    static GridFunction sample(const Grid& g, F&& f) {
        std::vector<double> v(std::size_t(g.nodes()));
        for (int k = 0; k < g.nodes(); ++k) v[std::size_t(k)] = f(g.node(k));
        return GridFunction(g, std::move(v));
    }

    const Grid& grid() const { return grid_; }
    const std::vector<double>& values() const { return values_; }
    double operator[](int k) const { return values_[std::size_t(k)]; }
    double at(int i, int j) const { return values_[std::size_t(grid_.index(i, j))]; }
    int size() const { return int(values_.size()); }

    double interpolate(Vec2 p) const {
        if (!grid_.contains(p, 1e-9)) throw DomainError("interpolation point outside the grid");
        const auto [t, w] = grid_.locate(p);
        const auto n = grid_.triangle_nodes(t);
        return w[0] * values_[std::size_t(n[0])] + w[1] * values_[std::size_t(n[1])] +
               w[2] * values_[std::size_t(n[2])];
    }

    double max() const { return *std::max_element(values_.begin(), values_.end()); }
    double min() const { return *std::min_element(values_.begin(), values_.end()); }

    template <class F>
    GridFunction map(F&& f) const {
        std::vector<double> v(values_.size());
        for (std::size_t k = 0; k < v.size(); ++k) v[k] = f(values_[k]);
        return GridFunction(grid_, std::move(v));
    }

private:
    Grid grid_;
    std::vector<double> values_;
};

struct Ball {
    Vec2 center;
    double radius = 1.0;

    Ball() = default;
    Ball(Vec2 c, double r) : center(c), radius(r) {
        if (!(r > 0.0) || !finite(r)) throw ValidationError("ball radius must be positive");
    }
    bool contains(Vec2 p) const { return norm(p - center) <= radius * (1.0 + 1e-12); }
};

struct ShiftVector {
    Vec2 h;
    explicit ShiftVector(Vec2 v) : h(v) {
        if (!(norm(v) > 0.0)) throw ValidationError("shift vector must be nonzero");
    }
};

using ScalarField = std::vector<double>;  // one value per triangle
using VectorField = std::vector<Vec2>;    // one 2-vector per triangle

inline VectorField gradient(const GridFunction& w) {
    const Grid& g = w.grid();
    VectorField out(std::size_t(g.triangles()));
    for (int t = 0; t < g.triangles(); ++t) {
        const auto n = g.triangle_nodes(t);
        const auto d = g.hat_gradients(t);
        out[std::size_t(t)] = d[0] * w[n[0]] + d[1] * w[n[1]] + d[2] * w[n[2]];
    }
    return out;
}

inline double integrate(const Grid& g, const ScalarField& f) {
    if (f.size() != std::size_t(g.triangles())) throw ValidationError("field size does not match triangles");
    double s = 0.0;
    for (double v : f) s += v;
    return s * g.triangle_area();
}

inline double average(const Grid& g, const ScalarField& f) { return integrate(g, f) / g.area(); }

template <class F>
ScalarField map_gradient(const VectorField& du, F&& f) {
    ScalarField out(du.size());
    for (std::size_t t = 0; t < du.size(); ++t) out[t] = f(du[t]);
    return out;
}

inline std::vector<int> ball_nodes(const Grid& g, const Ball& b) {
    std::vector<int> out;
    const double r = b.radius * (1.0 + 1e-12);
    const int i0 = std::max(0, int(std::floor((b.center.x - r - g.origin().x) / g.hx())));
    const int i1 = std::min(g.nx() - 1, int(std::ceil((b.center.x + r - g.origin().x) / g.hx())));
    const int j0 = std::max(0, int(std::floor((b.center.y - r - g.origin().y) / g.hy())));
    const int j1 = std::min(g.ny() - 1, int(std::ceil((b.center.y + r - g.origin().y) / g.hy())));
    for (int j = j0; j <= j1; ++j)
        for (int i = i0; i <= i1; ++i)
            if (b.contains(g.node(i, j))) out.push_back(g.index(i, j));
    return out;
}

inline std::vector<int> ball_triangles(const Grid& g, const Ball& b) {
    std::vector<int> out;
    for (int t = 0; t < g.triangles(); ++t)
        if (b.contains(g.barycenter(t))) out.push_back(t);
    return out;
}

// Node-quadrature of f over a node set.
template <class F>
double node_sum(const Grid& g, const std::vector<int>& idx, F&& f) {
    double s = 0.0;
    for (int k : idx) s += g.node_weight(k) * f(k);
    return s;
}

inline double node_measure(const Grid& g, const std::vector<int>& idx) {
    return node_sum(g, idx, [](int) { return 1.0; });
}

struct MaskedFunction {
    GridFunction values;
    std::vector<unsigned char> inside;
};

inline MaskedFunction finite_difference(const GridFunction& w, const ShiftVector& s) {
    const Grid& g = w.grid();
    if (std::abs(s.h.x) >= 0.5 * g.extent().x || std::abs(s.h.y) >= 0.5 * g.extent().y)
        throw DomainError("shift exhausts the domain: |h| must stay below half the extent");
    std::vector<double> v(std::size_t(g.nodes()), 0.0);
    std::vector<unsigned char> in(std::size_t(g.nodes()), 0);
    for (int k = 0; k < g.nodes(); ++k) {
        const Vec2 p = g.node(k) + s.h;
        if (!g.contains(p)) continue;
        in[std::size_t(k)] = 1;
        v[std::size_t(k)] = w.interpolate(p) - w[k];
    }
    return {GridFunction(g, std::move(v)), std::move(in)};
}

struct StencilEntry {
    int di;
    int dj;
    double weight;
};

// Normalized tent kernel max(0, 1 - |o|/radius) on lattice offsets.
inline std::vector<StencilEntry> tent_stencil(const Grid& g, double radius) {
    if (radius < g.h_min() * (1.0 - 1e-12))
        throw PreconditionError("mollification radius must be at least the grid spacing");
    const int ri = int(std::floor(radius / g.hx())), rj = int(std::floor(radius / g.hy()));
    std::vector<StencilEntry> st;
    double total = 0.0;
    for (int dj = -rj; dj <= rj; ++dj)
        for (int di = -ri; di <= ri; ++di) {
            const double d = std::hypot(di * g.hx(), dj * g.hy());
            const double k = 1.0 - d / radius;
            if (k <= 1e-14) continue;
            st.push_back({di, dj, k});
            total += k;
        }
    for (auto& e : st) e.weight /= total;
    return st;
}

inline GridFunction mollify(const GridFunction& w, double radius) {
    const Grid& g = w.grid();
    const auto st = tent_stencil(g, radius);
    std::vector<double> out(std::size_t(g.nodes()), 0.0);
    for (int j = 0; j < g.ny(); ++j)
        for (int i = 0; i < g.nx(); ++i) {
            double s = 0.0;
            for (const auto& e : st) {
                const int ii = std::clamp(i + e.di, 0, g.nx() - 1);
                const int jj = std::clamp(j + e.dj, 0, g.ny() - 1);
                s += e.weight * w.at(ii, jj);
            }
            out[std::size_t(g.index(i, j))] = s;
        }
    return GridFunction(g, std::move(out));
}

// Area of the disk |x - c| <= R intersected with [x0,x1] x [y0,y1].
namespace detail {
inline double quadrant_area(double x, double y, double R) {
    // area of {X in [0,x], Y in [0,y], X^2+Y^2 <= R^2} for x, y >= 0
    x = std::min(x, R);
    y = std::min(y, R);
    if (x <= 0.0 || y <= 0.0) return 0.0;
    if (x * x + y * y <= R * R) return x * y;
    const double xc = std::sqrt(std::max(0.0, R * R - y * y));
    auto S = [R](double X) {
        const double s = std::clamp(X / R, -1.0, 1.0);
        return 0.5 * (X * std::sqrt(std::max(0.0, R * R - X * X)) + R * R * std::asin(s));
    };
    return y * xc + S(x) - S(xc);
}
inline double signed_area(double x, double y, double R) {
    const double sx = x < 0 ? -1.0 : 1.0, sy = y < 0 ? -1.0 : 1.0;
    return sx * sy * quadrant_area(std::abs(x), std::abs(y), R);
}
}  // namespace detail

inline double disk_rect_area(Vec2 c, double R, double x0, double x1, double y0, double y1) {
    if (R <= 0.0 || x1 <= x0 || y1 <= y0) return 0.0;
    const double a = x0 - c.x, b = x1 - c.x, lo = y0 - c.y, hi = y1 - c.y;
    const double v = detail::signed_area(b, hi, R) - detail::signed_area(a, hi, R) - detail::signed_area(b, lo, R) +
                     detail::signed_area(a, lo, R);
    return std::max(0.0, v);
}

// Node cell of k: the rectangle of half-spacing around the node, clipped to the domain.
inline std::array<double, 4> node_cell(const Grid& g, int k) {
    const Vec2 p = g.node(k);
    const double x0 = std::max(g.origin().x, p.x - 0.5 * g.hx());
    const double x1 = std::min(g.origin().x + g.extent().x, p.x + 0.5 * g.hx());
    const double y0 = std::max(g.origin().y, p.y - 0.5 * g.hy());
    const double y1 = std::min(g.origin().y + g.extent().y, p.y + 0.5 * g.hy());
    return {x0, x1, y0, y1};
}

inline void write_csv(std::ostream& os, const GridFunction& w) {
    os << "x,y,value\n";
    const Grid& g = w.grid();
    for (int k = 0; k < g.nodes(); ++k) {
        const Vec2 p = g.node(k);
        os << fmt_real(p.x) << ',' << fmt_real(p.y) << ',' << fmt_real(w[k]) << '\n';
    }
}

inline GridFunction read_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw ParseError("grid function CSV is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "x,y,value") throw ParseError("grid function CSV must start with header x,y,value");
    std::vector<Vec2> pts;
    std::vector<double> vals;
    int lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string a, b, c;
        if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') || !std::getline(ss, c))
            throw ParseError("grid function CSV line " + std::to_string(lineno) + " needs three columns");
        try {
            pts.push_back({std::stod(a), std::stod(b)});
            vals.push_back(std::stod(c));
        } catch (const std::exception&) {
            throw ParseError("grid function CSV line " + std::to_string(lineno) + " is not numeric");
        }
    }
    if (pts.size() < 9) throw ParseError("grid function CSV has fewer than 9 nodes");
    int nx = 1;
    while (nx < int(pts.size()) && pts[std::size_t(nx)].y == pts[0].y) ++nx;
    if (pts.size() % std::size_t(nx) != 0) throw ParseError("grid function CSV is not row-major rectangular");
    const int ny = int(pts.size()) / nx;
    const Vec2 o = pts.front(), e = pts.back() - pts.front();
    Grid g(o, e, nx, ny);
    for (int k = 0; k < g.nodes(); ++k) {
        const Vec2 d = g.node(k) - pts[std::size_t(k)];
        if (std::abs(d.x) > 1e-9 * (1.0 + std::abs(e.x)) || std::abs(d.y) > 1e-9 * (1.0 + std::abs(e.y)))
            throw ParseError("grid function CSV nodes are not on a uniform lattice");
    }
    return GridFunction(g, std::move(vals));
}

}  // namespace nonunif
