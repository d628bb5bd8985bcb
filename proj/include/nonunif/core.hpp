#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace nonunif {

// Error taxonomy. Every refusal in the library is one of these.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ValidationError : Error {
    using Error::Error;
};
struct DomainError : Error {
    using Error::Error;
};
struct SingularityError : Error {
    using Error::Error;
};
struct PreconditionError : Error {
    using Error::Error;
};
struct UnsupportedInput : Error {
    using Error::Error;
};
struct RefusalError : Error {
    using Error::Error;
};
struct OverflowError : Error {
    using Error::Error;
};
struct ParseError : Error {
    using Error::Error;
};

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kPi = std::numbers::pi;

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    constexpr Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
    constexpr Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
    constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
    constexpr Vec2 operator/(double s) const { return {x / s, y / s}; }
    constexpr Vec2& operator+=(Vec2 o) {
        x += o.x;
        y += o.y;
        return *this;
    }
    constexpr bool operator==(const Vec2&) const = default;
};

inline constexpr Vec2 operator*(double s, Vec2 v) { return v * s; }
inline constexpr double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
inline constexpr double norm2(Vec2 a) { return a.x * a.x + a.y * a.y; }

// Symmetric 2x2 matrix [[xx, xy], [xy, yy]].
struct Sym2 {
    double xx = 0.0;
    double xy = 0.0;
    double yy = 0.0;

    constexpr Sym2 operator+(Sym2 o) const { return {xx + o.xx, xy + o.xy, yy + o.yy}; }
    constexpr Sym2 operator*(double s) const { return {xx * s, xy * s, yy * s}; }
    constexpr Vec2 apply(Vec2 v) const { return {xx * v.x + xy * v.y, xy * v.x + yy * v.y}; }
    constexpr double quad(Vec2 v) const { return v.x * (xx * v.x + xy * v.y) + v.y * (xy * v.x + yy * v.y); }

    std::array<double, 2> eigenvalues() const {
        const double m = 0.5 * (xx + yy);
        const double d = std::hypot(0.5 * (xx - yy), xy);
        return {m - d, m + d};
    }
};

inline constexpr Sym2 identity2() { return {1.0, 0.0, 1.0}; }
inline constexpr Sym2 outer(Vec2 a) { return {a.x * a.x, a.x * a.y, a.y * a.y}; }

// Volume of the unit ball in R^n.
inline double unit_ball_volume(int n) {
    return std::pow(kPi, 0.5 * n) / std::tgamma(0.5 * n + 1.0);
}

inline bool finite(double v) { return std::isfinite(v); }

// Worker count from NONUNIF_WORKERS, else the hardware concurrency.
inline int worker_count() {
    if (const char* env = std::getenv("NONUNIF_WORKERS")) {
        const int w = std::atoi(env);
        if (w > 0) return w;
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : int(hc);
}

// Runs body(i) for i in [0, count) on interleaved strides; results must go to per-index slots.
// A nonpositive worker count falls back to worker_count().
template <class F>
void parallel_for(int count, F&& body, int workers = 0) {
    const int w = std::min(workers > 0 ? workers : worker_count(), count);
    if (w <= 1) {
        for (int i = 0; i < count; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(w));
    for (int k = 0; k < w; ++k) {
        pool.emplace_back([&, k] {
            try {
                for (int i = k; i < count; i += w) body(i);
            } catch (...) {
                errors[std::size_t(k)] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace nonunif
