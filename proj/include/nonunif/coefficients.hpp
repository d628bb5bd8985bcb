#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <string>

#include "descriptor.hpp"
#include "lattice.hpp"

namespace nonunif {

// Closed-form or grid-backed scalar field x -> value.
class Coefficient {
public:
    enum class Kind { Constant, Affine, PowerAbsX1, PowerPosX1, QuadrantPower, Checkerboard, Grid };

    Coefficient() = default;

    static Coefficient constant(double v) { return Coefficient(Kind::Constant, v, 0, 0); }
    static Coefficient affine(double c0, double c1, double c2) { return Coefficient(Kind::Affine, c0, c1, c2); }
    // scale * |x1|^alpha
    static Coefficient power_abs_x1(double scale, double alpha) { return Coefficient(Kind::PowerAbsX1, scale, alpha, 0); }
    // scale * max(x1, 0)^alpha
    static Coefficient power_pos_x1(double scale, double alpha) { return Coefficient(Kind::PowerPosX1, scale, alpha, 0); }
    // scale * min(|x1|,|x2|)^alpha on {x1 x2 > 0}, zero on the other two quadrants
    static Coefficient quadrant_power(double scale, double alpha) {
        return Coefficient(Kind::QuadrantPower, scale, alpha, 0);
    }
    // `same` on {x1 x2 > 0}, `opposite` elsewhere
    static Coefficient checkerboard(double same, double opposite) {
        return Coefficient(Kind::Checkerboard, same, opposite, 0);
    }
    static Coefficient from_grid(GridFunction g, std::string path = "") {
        Coefficient c(Kind::Grid, 0, 0, 0);
        c.grid_ = std::make_shared<const GridFunction>(std::move(g));
        c.path_ = std::move(path);
        return c;
    }

    Kind kind() const { return kind_; }
    double param(int i) const { return i == 0 ? a_ : (i == 1 ? b_ : c_); }
    bool is_constant() const { return kind_ == Kind::Constant; }
    bool is_zero() const { return kind_ == Kind::Constant && a_ == 0.0; }

    double operator()(Vec2 x) const {
        switch (kind_) {
            case Kind::Constant: return a_;
            case Kind::Affine: return a_ + b_ * x.x + c_ * x.y;
            case Kind::PowerAbsX1: return a_ * std::pow(std::abs(x.x), b_);
            case Kind::PowerPosX1: return x.x > 0.0 ? a_ * std::pow(x.x, b_) : 0.0;
            case Kind::QuadrantPower:
                return x.x * x.y > 0.0 ? a_ * std::pow(std::min(std::abs(x.x), std::abs(x.y)), b_) : 0.0;
            case Kind::Checkerboard: return x.x * x.y > 0.0 ? a_ : b_;
            case Kind::Grid: return grid_->interpolate(x);
        }
        return 0.0;
    }

    // Global bounds where they are known in closed form.
    bool bounded_below(double& lo) const {
        switch (kind_) {
            case Kind::Constant: lo = a_; return true;
            case Kind::Checkerboard: lo = std::min(a_, b_); return true;
            case Kind::PowerAbsX1:
            case Kind::PowerPosX1:
            case Kind::QuadrantPower: lo = std::min(0.0, a_); return true;
            case Kind::Grid: lo = grid_->min(); return true;
            default: return false;
        }
    }
    bool bounded_above(double& hi) const {
        switch (kind_) {
            case Kind::Constant: hi = a_; return true;
            case Kind::Checkerboard: hi = std::max(a_, b_); return true;
            case Kind::Grid: hi = grid_->max(); return true;
            default: return false;
        }
    }

    Descriptor describe() const {
        switch (kind_) {
            case Kind::Constant: return make_descriptor("constant", {{"value", a_}});
            case Kind::Affine: return make_descriptor("affine", {{"c0", a_}, {"c1", b_}, {"c2", c_}});
            case Kind::PowerAbsX1: return make_descriptor("power_abs_x1", {{"scale", a_}, {"alpha", b_}});
            case Kind::PowerPosX1: return make_descriptor("power_pos_x1", {{"scale", a_}, {"alpha", b_}});
            case Kind::QuadrantPower: return make_descriptor("quadrant_power", {{"scale", a_}, {"alpha", b_}});
            case Kind::Checkerboard: return make_descriptor("checkerboard", {{"same", a_}, {"opposite", b_}});
            case Kind::Grid: return Descriptor{"grid", {{"file", path_}}};
        }
        return {};
    }
    std::string str() const { return describe().str(); }

    static Coefficient parse(const std::string& text) {
        const Descriptor d = Descriptor::parse(text);
        if (d.name == "constant") {
            d.expect_keys({"value"});
            return constant(d.number("value"));
        }
        if (d.name == "affine") {
            d.expect_keys({"c0", "c1", "c2"});
            return affine(d.number("c0"), d.number_or("c1", 0.0), d.number_or("c2", 0.0));
        }
        if (d.name == "power_abs_x1") {
            d.expect_keys({"scale", "alpha"});
            return power_abs_x1(d.number_or("scale", 1.0), d.number("alpha"));
        }
        if (d.name == "power_pos_x1") {
            d.expect_keys({"scale", "alpha"});
            return power_pos_x1(d.number_or("scale", 1.0), d.number("alpha"));
        }
        if (d.name == "quadrant_power") {
            d.expect_keys({"scale", "alpha"});
            return quadrant_power(d.number_or("scale", 1.0), d.number("alpha"));
        }
        if (d.name == "checkerboard") {
            d.expect_keys({"same", "opposite"});
            return checkerboard(d.number("same"), d.number("opposite"));
        }
        if (d.name == "grid") {
            d.expect_keys({"file"});
            const std::string path = d.text("file");
            std::ifstream in(path);
            if (!in) throw ParseError("cannot open coefficient grid file '" + path + "'");
            return from_grid(read_csv(in), path);
        }
        throw ParseError("unknown coefficient kind '" + d.name + "'");
    }

    bool operator==(const Coefficient& o) const {
        if (kind_ != o.kind_) return false;
        if (kind_ == Kind::Grid) return path_ == o.path_ && grid_->values() == o.grid_->values();
        return a_ == o.a_ && b_ == o.b_ && c_ == o.c_;
    }

private:
    Coefficient(Kind k, double a, double b, double c) : kind_(k), a_(a), b_(b), c_(c) {
        if (!finite(a) || !finite(b) || !finite(c)) throw ValidationError("coefficient parameters must be finite");
        if ((k == Kind::PowerAbsX1 || k == Kind::PowerPosX1 || k == Kind::QuadrantPower) && !(b > 0.0))
            throw ValidationError("power coefficient needs a positive exponent");
    }

    Kind kind_ = Kind::Constant;
    double a_ = 0.0, b_ = 0.0, c_ = 0.0;
    std::shared_ptr<const GridFunction> grid_;
    std::string path_;
};

// Modulus of continuity of a variable exponent, kept symbolic.
struct Modulus {
    enum class Kind { Holder, LogLipschitz, Discontinuous, Table };
    Kind kind = Kind::Holder;
    double value = 1.0;  // Hölder exponent, log-Lipschitz constant, or declared limsup for a table

    // limsup_{rho -> 0} omega(rho) log(1/rho) < infinity
    bool condlog() const {
        switch (kind) {
            case Kind::Holder:
            case Kind::LogLipschitz: return true;
            case Kind::Discontinuous: return false;
            case Kind::Table: return std::isfinite(value);
        }
        return false;
    }

    Descriptor describe() const {
        switch (kind) {
            case Kind::Holder: return make_descriptor("holder", {{"beta", value}});
            case Kind::LogLipschitz: return make_descriptor("log_lipschitz", {{"c", value}});
            case Kind::Discontinuous: return Descriptor{"discontinuous", {}};
            case Kind::Table: return make_descriptor("table", {{"limsup", value}});
        }
        return {};
    }
    std::string str() const { return describe().str(); }

    static Modulus parse(const std::string& text) {
        const Descriptor d = Descriptor::parse(text);
        if (d.name == "holder") {
            d.expect_keys({"beta"});
            const double b = d.number("beta");
            if (!(b > 0.0 && b <= 1.0)) throw ValidationError("Hölder modulus exponent must lie in (0,1]");
            return {Kind::Holder, b};
        }
        if (d.name == "log_lipschitz") {
            d.expect_keys({"c"});
            return {Kind::LogLipschitz, d.number("c")};
        }
        if (d.name == "discontinuous") {
            d.expect_keys({});
            return {Kind::Discontinuous, 0.0};
        }
        if (d.name == "table") {
            d.expect_keys({"limsup"});
            return {Kind::Table, d.number("limsup")};
        }
        throw ParseError("unknown modulus kind '" + d.name + "'");
    }

    bool operator==(const Modulus&) const = default;
};

}  // namespace nonunif
