#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "nonunif/potentials.hpp"
#include "nonunif/rng.hpp"

using namespace nonunif;

namespace {

GridFunction random_density(const Grid& g, Rng& rng, double lo = 0.0, double hi = 1.0) {
    std::vector<double> v(std::size_t(g.nodes()));
    for (auto& x : v) x = rng.uniform(lo, hi);
    return GridFunction(g, std::move(v));
}

Measure random_atoms(Rng& rng, int count, int n = 2) {
    Measure m(n);
    for (int i = 0; i < count; ++i) m.add_atom({rng.uniform(-1, 1), rng.uniform(-1, 1)}, rng.uniform(0.1, 2));
    return m;
}

Measure random_mixed(Rng& rng) {
    const Grid g = Grid::square(-1, 1, 17);
    Measure m = Measure::from_density(random_density(g, rng));
    for (int i = 0; i < 3; ++i) m.add_atom({rng.uniform(-1, 1), rng.uniform(-1, 1)}, rng.uniform(0.1, 1));
    return m;
}

}  // namespace

TEST(MassInBall, Atoms) {
    const auto mu = Measure::from_atoms({{{0, 0}, 1.0}});
    for (double r : {1e-6, 0.3, 10.0}) EXPECT_EQ(mass_in_ball(mu, Ball({0, 0}, r)), 1.0);
    EXPECT_EQ(mass_in_ball(mu, Ball({1, 0}, 0.5)), 0.0);
    EXPECT_EQ(mass_in_ball(mu, Ball({1, 0}, 1.0)), 1.0);  // on the sphere counts inside
    EXPECT_THROW(Measure::from_atoms({{{0, 0}, -1.0}}), ValidationError);
}

TEST(MassInBall, UniformDensityIsDiskArea) {
    const GridFunction one(Grid::square(-2, 2, 33), 1.0);
    const auto mu = Measure::from_density(one);
    for (double r : {0.05, 0.3, 1.1}) EXPECT_NEAR(mass_in_ball(mu, Ball({0.1, -0.2}, r)), kPi * r * r, 1e-12);
}

TEST(MassInBall, MonotoneInRadius) {
    Rng rng(1);
    const auto mu = random_mixed(rng);
    double prev = 0.0;
    for (double r = 0.01; r < 2; r += 0.01) {
        const double m = mass_in_ball(mu, Ball({0.1, 0.05}, r));
        EXPECT_GE(m, prev - 1e-14);
        prev = m;
    }
    EXPECT_NEAR(mass_in_ball(mu, Ball({0, 0}, 10)), mu.total_mass(), 1e-12);
}

TEST(Riesz, PointMassClosedForm) {
    const auto mu = Measure::from_atoms({{{0, 0}, 1.0}});
    EXPECT_NEAR(riesz(mu, {0.25, 0}, 1.0, 1.0), 3.0, 1e-13);
    EXPECT_EQ(riesz(mu, {0, 0}, 1.0, 1.0), kInf);
    EXPECT_EQ(riesz(mu, {3, 0}, 1.0, 1.0), 0.0);
    EXPECT_NEAR(riesz(mu, {0, 0}, 1.0, 2.5), 2.0, 1e-13);  // beta > n
}

TEST(Riesz, UniformDensityIsPi) {
    const GridFunction one(Grid::square(-3, 3, 25), 1.0);
    const auto mu = Measure::from_density(one);
    EXPECT_NEAR(riesz(mu, {0, 0}, 1.0, 1.0), kPi, 1e-10);
    EXPECT_NEAR(riesz(mu, {0.13, -0.4}, 1.0, 1.0), kPi, 1e-10);
}

TEST(Riesz, CellConstantDensityMatchesBruteForce) {
    Rng rng(2);
    const Grid g = Grid::square(-1, 1, 9);
    const auto mu = Measure::from_density(random_density(g, rng));
    const Vec2 x0{0.11, -0.23};
    double brute = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double rho = std::exp(std::log(1e-6) + (std::log(1.0) - std::log(1e-6)) * (i + 0.5) / n);
        brute += mass_in_ball(mu, Ball(x0, rho)) / rho * (std::log(1.0) - std::log(1e-6)) / n;
    }
    const double tail = mass_in_ball(mu, Ball(x0, 1e-6)) / 1e-6;
    EXPECT_NEAR(riesz(mu, x0, 1.0, 1.0), brute + tail, 1e-6 * brute);
}

TEST(Wolff, PointMassClosedForm) {
    const auto mu = Measure::from_atoms({{{0, 0}, 1.0}}, 3);
    EXPECT_NEAR(wolff(mu, {0.2, 0}, 0.8, 1.0, 2.0), 1 / 0.2 - 1 / 0.8, 1e-12);
    EXPECT_EQ(wolff(Measure(2), {0, 0}, 1.0, 1.0, 3.0), 0.0);
}

TEST(Wolff, ReducesToRiesz) {
    Rng rng(3);
    for (int trial = 0; trial < 10; ++trial) {
        const auto mu = trial % 2 ? random_mixed(rng) : random_atoms(rng, 5);
        const Vec2 x0{rng.uniform(-1, 1), rng.uniform(-1, 1)};
        const double r = rng.uniform(0.2, 1.5);
        EXPECT_NEAR(wolff(mu, x0, r, 1.0, 2.0), riesz(mu, x0, r, 2.0), 1e-8 * riesz(mu, x0, r, 2.0));
        EXPECT_NEAR(wolff(mu, x0, r, 0.5, 2.0), riesz(mu, x0, r, 1.0), 1e-8 * riesz(mu, x0, r, 1.0));
    }
}

TEST(PPotential, ConstantDensity) {
    const GridFunction one(Grid::square(-3, 3, 25), 1.0);
    const auto mu = Measure::from_density(one);
    for (double m : {0.5, 1.0, 2.0})
        EXPECT_NEAR(p_potential(mu, {0.1, 0}, 0.9, {2.0, 0.7, m, 1.3}), std::pow(0.9, 0.7) / 0.7, 1e-10);
}

TEST(PPotential, AtomsNeedUnitPower) {
    const auto mu = Measure::from_atoms({{{0, 0}, 1.0}});
    EXPECT_THROW(p_potential(mu, {0.5, 0}, 1.0, {1, 1, 2, 1}), UnsupportedInput);
}

TEST(PPotential, WolffEquivalenceWithExplicitFactor) {
    Rng rng(4);
    for (int trial = 0; trial < 10; ++trial) {
        const auto mu = random_mixed(rng);
        const double p = rng.uniform(1.3, 3.5), beta = rng.uniform(0.3, 1.2);
        const Vec2 x0{rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)};
        const double w = wolff(mu, x0, 0.7, beta, p);
        const double P = p_potential(mu, x0, 0.7, {p - 1, p * beta / (p - 1), 1, 1});
        EXPECT_NEAR(P / w, std::pow(kPi, -1.0 / (p - 1)), 1e-10);
    }
}

TEST(PPotential, ReductionIdentity) {
    Rng rng(5);
    const Grid g = Grid::square(-1, 1, 13);
    const auto f = random_density(g, rng);
    for (double m : {0.5, 2.0, 3.0}) {
        const PParams pm{1.5, 0.8, m, 1.2}, p1{1.5, 0.8, 1.0, 1.2};
        const auto fm = f.map([m](double v) { return std::pow(v, m); });
        EXPECT_DOUBLE_EQ(p_potential(Measure::from_density(f), {0.1, 0.2}, 0.6, pm),
                         p_potential(Measure::from_density(fm), {0.1, 0.2}, 0.6, p1));
    }
}

TEST(Potentials, MonotoneInRadiusAndMeasure) {
    Rng rng(6);
    for (int trial = 0; trial < 5; ++trial) {
        const auto mu = random_mixed(rng);
        const auto big = [&] {
            Measure m = mu.scaled(1.0);
            m.add_atom({0.3, 0.3}, 0.5);
            return m;
        }();
        const Vec2 x0{0.05, -0.1};
        double pr = 0, pw = 0, pp = 0;
        for (double r = 0.1; r <= 1.5; r += 0.1) {
            const double a = riesz(mu, x0, r, 1.2), b = wolff(mu, x0, r, 0.8, 2.5),
                         c = p_potential(mu, x0, r, {1, 1, 1, 1});
            EXPECT_GE(a, pr);
            EXPECT_GE(b, pw);
            EXPECT_GE(c, pp);
            pr = a;
            pw = b;
            pp = c;
            EXPECT_LE(a, riesz(big, x0, r, 1.2));
            EXPECT_LE(b, wolff(big, x0, r, 0.8, 2.5));
        }
    }
}

TEST(Potentials, Scaling) {
    Rng rng(7);
    const auto mu = random_mixed(rng);
    const Vec2 x0{0.2, 0.1};
    for (double c : {0.3, 4.0}) {
        const auto cm = mu.scaled(c);
        EXPECT_NEAR(riesz(cm, x0, 1, 1), c * riesz(mu, x0, 1, 1), 1e-10 * c * riesz(mu, x0, 1, 1));
        const double p = 2.7;
        const double ref = std::pow(c, 1 / (p - 1)) * wolff(mu, x0, 1, 0.6, p);
        EXPECT_NEAR(wolff(cm, x0, 1, 0.6, p), ref, 1e-10 * ref);
    }
}

TEST(Potentials, TruncatedBelowGlobalKernel) {
    Rng rng(8);
    for (int trial = 0; trial < 20; ++trial) {
        const auto mu = random_atoms(rng, 6);
        const Vec2 x0{rng.uniform(-1, 1), rng.uniform(-1, 1)};
        const double beta = rng.uniform(0.2, 1.8);
        double global = 0.0;
        for (const auto& a : mu.atoms()) global += a.weight / std::pow(norm(a.x - x0), 2 - beta);
        EXPECT_LE(riesz(mu, x0, rng.uniform(0.1, 3), beta), global / (2 - beta) + 1e-12);
    }
}

TEST(Lorentz, IndicatorClosedForms) {
    const Grid g({0, 0}, {8, 4}, 33, 17);
    std::vector<double> v(std::size_t(g.nodes()), 0.0);
    // indicator with node-cell measure 16: the 4x4 block of interior cells
    for (int k = 0; k < g.nodes(); ++k) {
        const Vec2 x = g.node(k);
        if (x.x > 1.9 && x.x < 5.9 && x.y > 0.1 && x.y < 4.1 && g.col(k) > 0 && g.row(k) > 0) v[k] = 1.0;
    }
    const GridFunction f(g, v);
    double m = 0;
    for (int k = 0; k < g.nodes(); ++k) m += v[k] * g.node_weight(k);
    const double meas = m;
    EXPECT_NEAR(lorentz_norm(f, {2, 2}), std::sqrt(meas), 1e-12);
    EXPECT_NEAR(lorentz_norm(f, {2, 1}), 2 * std::sqrt(meas), 1e-12);
    EXPECT_NEAR(weak_lorentz_norm(f, 2), std::sqrt(meas), 1e-12);
    const GridFunction z(g, 0.0);
    EXPECT_EQ(lorentz_norm(z, {2, 1}), 0.0);
}

TEST(Lorentz, SixteenUnitIndicator) {
    std::vector<double> vals(64, 0.0), w(64, 0.5);
    for (int i = 0; i < 32; ++i) vals[i] = 1.0;
    EXPECT_NEAR(lorentz_norm(vals, w, {2, 2}), 4.0, 1e-14);
    EXPECT_NEAR(lorentz_norm(vals, w, {2, 1}), 8.0, 1e-14);
}

TEST(Lorentz, EqualsLebesgueWhenIndicesMatch) {
    Rng rng(9);
    const Grid g = Grid::square(0, 1, 21);
    for (int trial = 0; trial < 10; ++trial) {
        const auto f = random_density(g, rng, -2, 3);
        const double t = rng.uniform(0.5, 4);
        double lp = 0;
        for (int k = 0; k < g.nodes(); ++k) lp += g.node_weight(k) * std::pow(std::abs(f[k]), t);
        EXPECT_NEAR(lorentz_norm(f, {t, t}), std::pow(lp, 1 / t), 1e-10 * std::pow(lp, 1 / t));
    }
}

TEST(Lorentz, EmbeddingsOnTestSet) {
    Rng rng(10);
    const Grid g = Grid::square(0, 1, 17);
    double worst_gamma = 0.0, worst_t = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        GridFunction f = random_density(g, rng);
        const double spike = std::pow(10.0, rng.uniform(0, 3));
        f = f.map([&](double v) { return v > 0.9 ? spike * v : v; });
        // same t, gamma1 <= gamma2
        worst_gamma = std::max(worst_gamma, lorentz_norm(f, {2, 3}) / lorentz_norm(f, {2, 1}));
        worst_gamma = std::max(worst_gamma, weak_lorentz_norm(f, 2) / lorentz_norm(f, {2, 2}));
        // t2 < t1 on a set of unit measure
        worst_t = std::max(worst_t, lorentz_norm(f, {1.5, 2}) / lorentz_norm(f, {3, 2}));
    }
    EXPECT_LE(worst_gamma, 1.0 + 1e-12);
    EXPECT_LT(worst_t, 3.0);
}

TEST(Lorentz, BoundedRieszFromCriticalLorentz) {
    Rng rng(11);
    const Grid g = Grid::square(-1, 1, 17);
    double worst = 0.0;
    for (int trial = 0; trial < 8; ++trial) {
        const auto f = random_density(g, rng, 0, std::pow(10.0, rng.uniform(0, 2)));
        const auto mu = Measure::from_density(f);
        double sup = 0.0;
        for (int k = 0; k < g.nodes(); k += 3) sup = std::max(sup, riesz(mu, g.node(k), 0.5, 1.0));
        worst = std::max(worst, sup / lorentz_norm(f, {2, 1}));
    }
    EXPECT_LT(worst, 1.0);
}

TEST(Crit, Examples) {
    const Grid g = Grid::square(-2, 2, 33);
    const auto zero = crit_bound_check(GridFunction(g, 0.0), {0, 0}, 0.5, 0.5, {1, 1, 1, 1});
    EXPECT_EQ(zero.lhs, 0.0);
    EXPECT_EQ(zero.empirical_ratio, 0.0);
    const auto one = crit_bound_check(GridFunction(g, 1.0), {0, 0}, 0.5, 0.5, {1, 1, 1, 1});
    EXPECT_NEAR(one.lhs, 0.5, 1e-10);
    EXPECT_TRUE(std::isfinite(one.empirical_ratio));
    EXPECT_THROW(crit_bound_check(GridFunction(g, 1.0), {0, 0}, 0.5, 0.5, {1, 2, 1, 1}), PreconditionError);
}

TEST(MeasureIo, RoundTrip) {
    Rng rng(12);
    const auto mu = random_atoms(rng, 4);
    std::stringstream ss;
    write_measure_csv(ss, mu);
    EXPECT_TRUE(read_measure_csv(ss) == mu);
    std::stringstream bad("kind,x,y,weight\nblob,0,0,1\n");
    EXPECT_THROW(read_measure_csv(bad), ParseError);
    std::stringstream neg("kind,x,y,weight\natom,0,0,-1\n");
    EXPECT_THROW(read_measure_csv(neg), ValidationError);
}
