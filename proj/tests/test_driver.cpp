#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "spectral/driver.hpp"
#include "spectral/errors.hpp"

using namespace spectral;

namespace {

const BGParams kSpy{0.0075, 1.5592, 0.0181, 0.6308};
const ExpFamilyParams kDesk{100.0, 1.0, 0.01, 0.25};
const auto kPair = MeasureDistortionPair::exponential(kDesk);

// Riemann sum over 1e5 slabs of [0, top] of Gamma_+-(mass{z > w}), midpoint rule.
double riemann_driver(const std::vector<double>& masses, const std::vector<double>& z,
                      const MeasureDistortionPair& pair, double top) {
    const int n = 100000;
    double dw = top / n, acc = 0.0;
    for (int i = 0; i < n; ++i) {
        double w = (i + 0.5) * dw, mp = 0.0, mn = 0.0;
        for (std::size_t k = 0; k < z.size(); ++k) {
            if (z[k] > w) mp += masses[k];
            if (-z[k] > w) mn += masses[k];
        }
        acc += dw * (pair.gamma_plus(mp) + pair.gamma_minus(mn));
    }
    return acc;
}

// Step function with values on a lattice of mesh h so that slab edges hit every level.
std::vector<double> lattice_step(std::mt19937_64& rng, std::size_t n, double h, int levels) {
    std::uniform_int_distribution<int> lv(-levels, levels);
    std::uniform_int_distribution<std::size_t> cut(1, n - 1);
    std::vector<std::size_t> cuts{0, cut(rng), cut(rng), cut(rng), n};
    std::sort(cuts.begin(), cuts.end());
    std::vector<double> z(n);
    for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
        double v = h * lv(rng);
        for (std::size_t k = cuts[s]; k < cuts[s + 1]; ++k) z[k] = v;
    }
    return z;
}

double quad(const std::function<double(double)>& f, double a, double b) {
    boost::math::quadrature::tanh_sinh<double> q;
    return q.integrate(f, a, b, 1e-13);
}

// piecewise-linear interpolant of node values per side, end segments extended
double interpolant(const JumpGrid& g, const std::vector<double>& z, double y) {
    std::size_t first = y > 0 ? g.n_neg : 0, last = y > 0 ? g.size() : g.n_neg;
    auto b = g.nodes.begin() + first, e = g.nodes.begin() + last;
    auto it = std::upper_bound(b, e, y);
    if (it == b) ++it;
    if (it == e) --it;
    std::size_t k = it - g.nodes.begin();
    double t = (y - g.nodes[k - 1]) / (g.nodes[k] - g.nodes[k - 1]);
    return (1 - t) * z[k - 1] + t * z[k];
}

}  // namespace

// ===========================================================================
// Choquet driver
// ===========================================================================

TEST(ChoquetDriver, ZeroFunction) {
    JumpGrid g = make_jump_grid(kSpy, {.nodes_per_side = 50});
    std::vector<double> z(g.size(), 0.0);
    EXPECT_EQ(choquet_driver(g, z, kPair), 0.0);
}

TEST(ChoquetDriver, IndicatorGivesDistortedMass) {
    JumpGrid g = make_jump_grid(kSpy, {.nodes_per_side = 200});
    double y0 = 0.01;
    std::vector<double> z(g.size());
    double mass = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) {
        z[k] = g.nodes[k] >= y0 ? 1.0 : 0.0;
        mass += z[k] * g.weights[k];
    }
    EXPECT_NEAR(choquet_driver(g, z, kPair), kPair.gamma_plus(mass), 1e-14);
}

TEST(ChoquetDriver, MatchesRiemannSum) {
    JumpGrid g = make_jump_grid(kSpy, {.nodes_per_side = 50});
    std::mt19937_64 rng(1);
    for (int rep = 0; rep < 5; ++rep) {
        auto z = lattice_step(rng, g.size(), 0.002, 4);
        double ref = riemann_driver(g.weights, z, kPair, 0.008);
        double got = choquet_driver(g, z, kPair);
        EXPECT_NEAR(got, ref, 1e-6 * std::max(1e-300, std::abs(ref))) << rep;
    }
}

TEST(ChoquetDriver, HomogeneousAndSubadditive) {
    JumpGrid g = make_jump_grid(kSpy, {.nodes_per_side = 50});
    std::mt19937_64 rng(2);
    std::normal_distribution<double> nd(0.0, 0.01);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<double> z1(g.size()), z2(g.size()), s(g.size());
        for (std::size_t k = 0; k < g.size(); ++k) {
            z1[k] = nd(rng);
            z2[k] = nd(rng);
            s[k] = z1[k] + z2[k];
        }
        double g1 = choquet_driver(g, z1, kPair);
        EXPECT_GE(g1, 0.0);
        for (double lam : {0.5, 2.0, 10.0}) {
            std::vector<double> zl(z1);
            for (double& v : zl) v *= lam;
            EXPECT_NEAR(choquet_driver(g, zl, kPair), lam * g1, 1e-9 * lam * g1);
        }
        EXPECT_LE(choquet_driver(g, s, kPair), g1 + choquet_driver(g, z2, kPair) + 1e-8);
    }
}

// ===========================================================================
// Comonotone additivity
// ===========================================================================

TEST(Comonotone, ScalingIsComonotone) {
    JumpGrid g = make_jump_grid(kSpy, {.nodes_per_side = 50});
    std::vector<double> z1(g.size()), z2(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) {
        z1[k] = std::sin(40.0 * g.nodes[k]);
        z2[k] = 2.0 * z1[k];
    }
    auto rep = check_comonotone_additivity(g.weights, z1, z2, kPair);
    EXPECT_TRUE(rep.comonotone);
    EXPECT_TRUE(rep.additive);
}

TEST(Comonotone, OppositeMonotonicityIsNot) {
    JumpGrid g = make_jump_grid(kSpy, {.nodes_per_side = 50});
    std::vector<double> z1(g.size()), z2(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) {
        z1[k] = g.nodes[k];
        z2[k] = -g.nodes[k];
    }
    auto rep = check_comonotone_additivity(g.weights, z1, z2, kPair);
    EXPECT_FALSE(rep.comonotone);
    EXPECT_TRUE(rep.additive);  // nothing asserted
    EXPECT_GT(rep.residual, rep.tolerance);
}

TEST(Comonotone, RandomNondecreasingPairsAreAdditive) {
    JumpGrid g = make_jump_grid(kSpy, {.nodes_per_side = 50});
    std::mt19937_64 rng(3);
    std::exponential_distribution<double> inc(100.0);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<double> z1(g.size()), z2(g.size());
        // nondecreasing with z(0) = 0: nonpositive on losses, nonnegative on gains
        double a = -0.05, b = -0.03;
        for (std::size_t k = 0; k < g.size(); ++k) {
            if (k == g.n_neg) a = b = 0.0;
            a = std::min(a + inc(rng) * (rng() % 3 == 0), k < g.n_neg ? 0.0 : 1.0);
            b = std::min(b + inc(rng) * (rng() % 2 == 0), k < g.n_neg ? 0.0 : 1.0);
            z1[k] = a;
            z2[k] = b;
        }
        auto r = check_comonotone_additivity(g.weights, z1, z2, kPair);
        EXPECT_TRUE(r.comonotone);
        EXPECT_TRUE(r.sign_aligned);
        EXPECT_TRUE(r.additive) << r.residual << " vs " << r.tolerance;
    }
}

// ===========================================================================
// Monotone-claim densities
// ===========================================================================

TEST(PsiMonotone, ExponentialFamilyFormula) {
    for (double y : {0.001, 0.01, 0.05}) {
        double nu = bg_tail_mass(kSpy, y);
        const auto& p = kDesk;
        double ref = p.a * p.c / (1 + p.gamma) * std::pow(-std::expm1(-p.c * nu), -p.gamma / (1 + p.gamma)) *
                     std::exp(-p.c * nu);
        EXPECT_NEAR(psi_monotone(kSpy, kPair, y, Direction::upper), ref, 1e-10 * ref);
        double numinus = bg_tail_mass(kSpy, -y);
        EXPECT_NEAR(psi_monotone(kSpy, kPair, -y, Direction::upper), -p.b * std::exp(-p.c * numinus), 1e-14);
        EXPECT_NEAR(psi_monotone(kSpy, kPair, y, Direction::lower), -p.b * std::exp(-p.c * nu), 1e-14);
    }
    EXPECT_THROW(psi_monotone(kSpy, kPair, 0.0, Direction::upper), DomainError);
}

TEST(PsiMonotone, IdentityDistortionIsZero) {
    auto id = MeasureDistortionPair::identity();
    for (double y : {-0.1, -1e-4, 1e-4, 0.1})
        for (auto d : {Direction::upper, Direction::lower}) EXPECT_EQ(psi_monotone(kSpy, id, y, d), 0.0);
}

TEST(PsiMonotone, IntegralMatchesLayerCake) {
    // z(y) = e^y - 1 is nondecreasing with z(0) = 0
    auto f = [](double y) {
        return psi_monotone(kSpy, kPair, y, Direction::upper) * std::expm1(y) * bg_levy_density(kSpy, y);
    };
    double lhs = quad(f, 0.0, 1.0) + quad(f, -3.0, 0.0);
    // layer cake: nu(z > w) = tail(log(1+w)) on gains, tail(log(1-w)) on losses
    double gains = quad([](double w) { return kPair.gamma_plus(bg_tail_mass(kSpy, std::log1p(w))); }, 0.0,
                        std::expm1(1.0));
    double losses = quad([](double w) { return kPair.gamma_minus(bg_tail_mass(kSpy, std::log1p(-w))); }, 0.0,
                         -std::expm1(-3.0));
    double rhs = gains + losses;
    EXPECT_NEAR(lhs, rhs, 1e-5 * std::abs(rhs));

    JumpGrid g = make_jump_grid(kSpy);
    std::vector<double> z(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) z[k] = std::expm1(g.nodes[k]);
    EXPECT_NEAR(choquet_driver(g, z, kPair), rhs, 1e-4 * std::abs(rhs));
}

TEST(DistortedIntervalMass, IdentityGivesLevyMass) {
    auto id = MeasureDistortionPair::identity();
    double m = distorted_levy_interval_mass(kSpy, id, {{0.01, 0.02}}, Direction::upper);
    EXPECT_NEAR(m, bg_tail_mass(kSpy, 0.01) - bg_tail_mass(kSpy, 0.02), 1e-14);
}

TEST(DistortedIntervalMass, MatchesQuadratureOfDistortedDensity) {
    double inf = std::numeric_limits<double>::infinity();
    double m = distorted_levy_interval_mass(kSpy, kPair, {{0.02, inf}}, Direction::upper);
    auto f = [](double y) { return bg_levy_density(kSpy, y) * (1 + psi_monotone(kSpy, kPair, y, Direction::upper)); };
    double q = quad(f, 0.02, 1.0);
    EXPECT_NEAR(m, q, 1e-6);
    double mn = distorted_levy_interval_mass(kSpy, kPair, {{-inf, -0.05}}, Direction::upper);
    double qn = quad([&](double y) { return f(y); }, -2.0, -0.05);
    EXPECT_NEAR(mn, qn, 1e-6);
}

TEST(DistortedIntervalMass, SignsOfDistortion) {
    double nu = bg_tail_mass(kSpy, 0.01) - bg_tail_mass(kSpy, 0.03);
    EXPECT_GE(distorted_levy_interval_mass(kSpy, kPair, {{0.01, 0.03}}, Direction::upper), nu);
    double nun = bg_tail_mass(kSpy, -0.01) - bg_tail_mass(kSpy, -0.03);
    EXPECT_LE(distorted_levy_interval_mass(kSpy, kPair, {{-0.03, -0.01}}, Direction::upper), nun);
    EXPECT_THROW(distorted_levy_interval_mass(kSpy, kPair, {{-0.01, 0.01}}, Direction::upper), DomainError);
    EXPECT_THROW(distorted_levy_interval_mass(kSpy, kPair, {{0.0, 0.01}}, Direction::upper), DomainError);
}

TEST(DistortedDensity, BG2BGClosure) {
    BG2BGParams p{{0.0038, 614.5676, 0.0979, 3.7175}, 0.0039, 0.0972};
    auto pair = MeasureDistortionPair::bg2bg(p);
    BGParams up{p.b_p_upper, p.base.c_p, p.b_n_upper, p.base.c_n};
    JumpGrid g = make_jump_grid(p.base, {.nodes_per_side = 500});
    for (std::size_t k = 0; k < g.size(); ++k) {
        double y = g.nodes[k];
        double lhs = bg_levy_density(p.base, y) * (1 + psi_monotone(p.base, pair, y, Direction::upper));
        EXPECT_NEAR(lhs / bg_levy_density(up, y), 1.0, 1e-9) << y;
    }
}

TEST(DistortedDensity, ReweightingStaysNonnegative) {
    JumpGrid g = make_jump_grid(kSpy, {.nodes_per_side = 300});
    for (auto d : {Direction::upper, Direction::lower}) {
        auto dd = distorted_levy_density(g, kSpy, kPair, d);
        for (double w : dd.measure().masses) EXPECT_GE(w, 0.0);
    }
    EXPECT_THROW(make_distorted_density(g.measure(), std::vector<double>(g.size(), -1.5), Direction::upper),
                 InvariantError);
}

// ===========================================================================
// General claims on the grid
// ===========================================================================

TEST(PsiGridGeneral, MonotoneClaimMatchesClosedForm) {
    JumpGrid g = make_jump_grid(kSpy, {.nodes_per_side = 400});
    std::vector<double> z(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) z[k] = std::expm1(g.nodes[k]);
    for (auto d : {Direction::upper, Direction::lower}) {
        auto psi = psi_grid_general(g, z, kPair, d);
        // the grid stops at y_max, so the closed form is taken on truncated tails
        double cut_p = bg_tail_mass(kSpy, g.y_max), cut_n = bg_tail_mass(kSpy, -g.y_max);
        for (std::size_t k = 0; k < g.size(); ++k) {
            double y = g.nodes[k];
            double tail = bg_tail_mass(kSpy, y) - (y > 0 ? cut_p : cut_n);
            bool up = d == Direction::upper;
            double ref = y > 0 ? (up ? kPair.d_plus(tail) : -kPair.d_minus(tail))
                               : (up ? -kPair.d_minus(tail) : kPair.d_plus(tail));
            EXPECT_NEAR(psi[k], ref, 1e-8 * std::max(1.0, std::abs(ref))) << g.nodes[k];
        }
    }
}

TEST(PsiGridGeneral, HumpLevelSetsMatchDenseScan) {
    JumpGrid g = make_jump_grid(kSpy, {.nodes_per_side = 100});
    std::vector<double> z(g.size(), 0.0);
    for (std::size_t k = g.n_neg; k < g.size(); ++k) {
        double t = (g.nodes[k] - 0.05) / 0.01;
        z[k] = std::exp(-t * t);
    }
    LevelSetMasses ls(g);
    std::vector<double> masses(g.size());
    ls.level_masses(z, masses);

    const int n = 1000000;
    double h = (g.y_max - g.eps) / n;
    std::vector<double> mid(n), cell(n);
    for (int i = 0; i < n; ++i) {
        double a = g.eps + i * h;
        mid[i] = interpolant(g, z, a + 0.5 * h);
        cell[i] = g.mass_between(a, a + h);
    }
    int checked = 0;
    for (std::size_t k = g.n_neg; k < g.size(); ++k) {
        if (z[k] < 1e-3) continue;
        double ref = 0.0;
        for (int i = 0; i < n; ++i)
            if (mid[i] >= z[k]) ref += cell[i];
        EXPECT_NEAR(masses[k], ref, 1e-6) << g.nodes[k];
        ++checked;
    }
    EXPECT_GT(checked, 3);
}

TEST(PsiGridGeneral, ConstantUsesTotalMass) {
    JumpGrid g = make_jump_grid(kSpy, {.nodes_per_side = 100});
    for (double c : {0.3, -0.2}) {
        std::vector<double> z(g.size(), c);
        auto psi = psi_grid_general(g, z, kPair, Direction::upper);
        double total = g.total_mass();
        double ref = c > 0 ? kPair.d_plus(total) : -kPair.d_minus(total);
        for (double v : psi) EXPECT_NEAR(v, ref, 1e-10 * std::abs(ref));
    }
}

TEST(PsiGridGeneral, ZeroWhereClaimIsFlatAtZero) {
    JumpGrid g = make_jump_grid(kSpy, {.nodes_per_side = 100});
    std::vector<double> z(g.size(), 0.0);
    z[g.n_neg + 10] = 1.0;
    auto psi = psi_grid_general(g, z, kPair, Direction::upper);
    for (std::size_t k = 0; k < g.size(); ++k)
        if (k != g.n_neg + 10) EXPECT_EQ(psi[k], 0.0);
    EXPECT_GT(psi[g.n_neg + 10], 0.0);
    z[3] = std::nan("");
    EXPECT_THROW(psi_grid_general(g, z, kPair, Direction::upper), DomainError);
}
