#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/bessel.hpp>
#include <boost/math/special_functions/expint.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>

#include "spectral/errors.hpp"
#include "spectral/levy_models.hpp"

using namespace spectral;
using mp50 = boost::multiprecision::cpp_bin_float_50;

namespace {

const BGParams kSpy{0.0075, 1.5592, 0.0181, 0.6308};

double e1_mp(double x) {
    return static_cast<double>(boost::math::expint(1, mp50(x)));
}

// integral of f over [a, inf)
template <class F>
double tail_integral(F f, double a) {
    boost::math::quadrature::exp_sinh<double> q;
    return q.integrate([&](double t) { return f(t); }, a, std::numeric_limits<double>::infinity(),
                       1e-14);
}

}  // namespace

// ===========================================================================
// Exponential integral
// ===========================================================================

TEST(ExpIntegral, ValueAtOneMatchesQuadrature) {
    double q = tail_integral([](double t) { return std::exp(-t) / t; }, 1.0);
    EXPECT_NEAR(exp_integral_e1(1.0), q, 1e-13);
    EXPECT_NEAR(exp_integral_e1(1.0), 0.21938393439552, 1e-13);
}

TEST(ExpIntegral, MatchesFiftyDigitReference) {
    for (double x : {1e-10, 1e-6, 0.01, 0.3, 0.5, 0.999, 1.0, 1.001, 2.0, 5.0, 17.0, 60.0, 300.0}) {
        double ref = e1_mp(x);
        EXPECT_LE(std::abs(exp_integral_e1(x) - ref) / ref, 1e-12) << "x=" << x;
    }
}

TEST(ExpIntegral, VanishesAtInfinity) {
    EXPECT_LT(exp_integral_e1(700.0), 1e-300);
    EXPECT_EQ(exp_integral_e1(1e4), 0.0);
}

TEST(ExpIntegral, RejectsNonPositive) {
    EXPECT_THROW(exp_integral_e1(0.0), DomainError);
    EXPECT_THROW(exp_integral_e1(-1.0), DomainError);
}

TEST(ExpIntegralInverse, Roundtrips) {
    EXPECT_NEAR(exp_integral_e1_inverse(exp_integral_e1(1.0)), 1.0, 1e-10);
    EXPECT_NEAR(exp_integral_e1_inverse(exp_integral_e1(0.01)), 0.01, 1e-8);
    for (double v : {1e-200, 1e-30, 1e-5, 0.2, 1.0, 3.0, 10.0, 40.0, 300.0}) {
        double x = exp_integral_e1_inverse(v);
        EXPECT_LE(std::abs(exp_integral_e1(x) - v) / v, 1e-10) << "v=" << v;
    }
}

TEST(ExpIntegralInverse, AgreesWithBisection) {
    double lo = 1e-6, hi = 5.0;
    for (int i = 0; i < 200; ++i) {
        double mid = 0.5 * (lo + hi);
        if (e1_mp(mid) > 3.0) lo = mid; else hi = mid;
    }
    EXPECT_NEAR(exp_integral_e1_inverse(3.0), 0.5 * (lo + hi), 1e-12);
}

// ===========================================================================
// BG density, tails, mean rate
// ===========================================================================

TEST(BGDensity, SubstitutionAtScale) {
    BGParams p{0.02, 2.0, 0.03, 1.0};
    EXPECT_NEAR(bg_levy_density(p, p.b_p), p.c_p / p.b_p * std::exp(-1.0), 1e-12);
    EXPECT_NEAR(bg_levy_density(p, -p.b_n), p.c_n / p.b_n * std::exp(-1.0), 1e-12);
}

TEST(BGDensity, HighPrecisionReference) {
    mp50 y("0.01");
    mp50 ref = mp50("1.5592") / y * exp(-y / mp50("0.0075"));
    EXPECT_NEAR(bg_levy_density(kSpy, 0.01) / static_cast<double>(ref), 1.0, 1e-14);
    mp50 refn = mp50("0.6308") / y * exp(-y / mp50("0.0181"));
    EXPECT_NEAR(bg_levy_density(kSpy, -0.01) / static_cast<double>(refn), 1.0, 1e-14);
}

TEST(BGDensity, DivergesLikeOneOverY) {
    for (double y : {1e-5, 1e-6, 1e-8}) EXPECT_NEAR(bg_levy_density(kSpy, y) * y, kSpy.c_p, 1e-2 * kSpy.c_p);
    EXPECT_THROW(bg_levy_density(kSpy, 0.0), DomainError);
}

TEST(BGTailMass, Limits) {
    EXPECT_LT(bg_tail_mass(kSpy, 10.0), 1e-300);
    BGParams p{0.05, 1.0, 0.05, 1.0};
    EXPECT_NEAR(bg_tail_mass(p, p.b_p), exp_integral_e1(1.0), 1e-15);
    EXPECT_THROW(bg_tail_mass(kSpy, 0.0), DomainError);
}

TEST(BGTailMass, MatchesQuadratureOfDensity) {
    for (double y : {1e-3, 0.005, 0.02, 0.1, 0.5}) {
        double q = tail_integral([](double t) { return bg_levy_density(kSpy, t); }, y);
        EXPECT_NEAR(bg_tail_mass(kSpy, y), q, 1e-8) << "y=" << y;
        double qn = tail_integral([](double t) { return bg_levy_density(kSpy, -t); }, y);
        EXPECT_NEAR(bg_tail_mass(kSpy, -y), qn, 1e-8) << "y=" << -y;
    }
}

TEST(BGTailMass, MonotoneOnEachSide) {
    double prev_p = bg_tail_mass(kSpy, 1e-6), prev_n = bg_tail_mass(kSpy, -0.5);
    for (int i = 1; i <= 200; ++i) {
        double y = 1e-6 * std::pow(5e5, i / 200.0);
        double tp = bg_tail_mass(kSpy, y);
        EXPECT_LE(tp, prev_p);
        prev_p = tp;
        double yn = -0.5 + 0.5 * i / 200.0 - 1e-9;
        double tn = bg_tail_mass(kSpy, yn);
        EXPECT_GE(tn, prev_n);
        prev_n = tn;
    }
}

TEST(BGMeanRate, ClosedFormMatchesQuadrature) {
    auto f = [](double y) {
        return std::expm1(y) * kSpy.c_p / y * std::exp(-y / kSpy.b_p);
    };
    auto g = [](double y) {
        return std::expm1(-y) * kSpy.c_n / y * std::exp(-y / kSpy.b_n);
    };
    double q = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, 0.0, 2.0, 15, 1e-14) +
               boost::math::quadrature::gauss_kronrod<double, 61>::integrate(g, 0.0, 5.0, 15, 1e-14);
    EXPECT_NEAR(bg_mean_rate(kSpy), q, 1e-8);
}

TEST(BGMeanRate, DegenerateCases) {
    BGParams one{0.01, 0.0, 0.02, 0.7};
    EXPECT_NEAR(bg_mean_rate(one), -0.7 * std::log(1.02), 1e-15);
    BGParams sym{1e-9, 1.0, 1e-9, 1.0};
    EXPECT_NEAR(bg_mean_rate(sym), 0.0, 1e-15);
    EXPECT_THROW(bg_mean_rate(BGParams{1.0, 1.0, 0.1, 1.0}), DomainError);
    EXPECT_THROW(make_bg(1.2, 1.0, 0.1, 1.0), DomainError);
}

// ===========================================================================
// Jump grid and characteristic exponent
// ===========================================================================

TEST(JumpGrid, StructuralInvariants) {
    JumpGrid g = make_jump_grid(kSpy);
    ASSERT_EQ(g.size(), 8000u);
    for (std::size_t k = 0; k < g.size(); ++k) {
        EXPECT_GE(std::abs(g.nodes[k]), g.eps);
        EXPECT_GE(g.weights[k], 0.0);
        if (k > 0) EXPECT_LT(g.nodes[k - 1], g.nodes[k]);
    }
    double exact = bg_tail_mass(kSpy, g.eps) - bg_tail_mass(kSpy, g.y_max) +
                   bg_tail_mass(kSpy, -g.eps) - bg_tail_mass(kSpy, -g.y_max);
    EXPECT_NEAR(g.total_mass(), exact, 1e-10 * exact);
}

TEST(JumpGrid, MassBetweenMatchesTailMasses) {
    JumpGrid g = make_jump_grid(kSpy);
    EXPECT_NEAR(g.mass_between(0.01, 0.02), bg_tail_mass(kSpy, 0.01) - bg_tail_mass(kSpy, 0.02), 1e-14);
    EXPECT_NEAR(g.mass_between(-0.02, -0.01), bg_tail_mass(kSpy, -0.01) - bg_tail_mass(kSpy, -0.02),
                1e-14);
    EXPECT_THROW(g.mass_between(-0.01, 0.01), DomainError);
}

TEST(CharacteristicExponent, VanishesAtZero) {
    JumpGrid g = make_jump_grid(kSpy);
    EXPECT_EQ(characteristic_exponent(g.measure(), 0.0), std::complex<double>(0.0, 0.0));
}

TEST(CharacteristicExponent, MatchesClosedForm) {
    JumpGrid g = make_jump_grid(kSpy);
    for (double th : {0.5, 5.0, 30.0, 100.0, 400.0}) {
        auto num = characteristic_exponent(g.measure(), th);
        // jumps below eps are cut from the grid; to first order they add i*th*eps*(c_p - c_n)
        auto ref = bg_characteristic_exponent(kSpy, th) -
                   std::complex<double>(0.0, th * g.eps * (kSpy.c_p - kSpy.c_n));
        EXPECT_LT(std::abs(num - ref), 1e-4) << "theta=" << th;
    }
}

TEST(CharacteristicExponent, ConjugateSymmetry) {
    JumpGrid g = make_jump_grid(kSpy);
    for (double th : {1.0, 17.0, 250.0}) {
        auto a = characteristic_exponent(g.measure(), th);
        auto b = characteristic_exponent(g.measure(), -th);
        EXPECT_NEAR(a.real(), b.real(), 1e-12);
        EXPECT_NEAR(a.imag(), -b.imag(), 1e-12);
    }
}

TEST(CharacteristicExponent, GridEvaluationMatchesPointwise) {
    JumpGrid g = make_jump_grid(kSpy, {.nodes_per_side = 500});
    auto v = characteristic_exponent_grid(g.measure(), -300.0, 0.73, 900);
    for (std::size_t j : {0u, 1u, 127u, 128u, 450u, 899u}) {
        auto ref = characteristic_exponent(g.measure(), -300.0 + 0.73 * j);
        EXPECT_LT(std::abs(v[j] - ref), 1e-11);
    }
    EXPECT_THROW(characteristic_exponent(LevyWeights{}, 1.0), DomainError);
}

// ===========================================================================
// Multivariate model
// ===========================================================================

namespace {

MBGParams two_asset(double bp1, double bn1, double bp2, double bn2, double rho) {
    MBGParams m;
    m.tilde = {{bp1, 1.8, bn1, 1.6}, {bp2, 2.0, bn2, 1.4}};
    m.corr = Eigen::MatrixXd::Identity(2, 2);
    m.corr(0, 1) = m.corr(1, 0) = rho;
    m.zeta = 2.0;
    return m;
}

}  // namespace

TEST(VGDensity, SymmetricWhenScalesMatch) {
    MBGParams m = two_asset(0.01, 0.01, 0.02, 0.02, 0.4);
    Eigen::Vector2d y(0.013, -0.007);
    EXPECT_NEAR(vg_levy_density(m, y) / vg_levy_density(m, -y), 1.0, 1e-12);
}

TEST(VGDensity, OneDimensionalReduction) {
    MBGParams m;
    m.tilde = {{0.012, 1.5, 0.02, 1.5}};
    m.corr = Eigen::MatrixXd::Identity(1, 1);
    m.zeta = 1.25;
    double th = (0.012 - 0.02) / m.zeta;
    double s2 = 2.0 * 0.012 * 0.02 / m.zeta;
    for (double y : {-0.05, -0.003, 0.001, 0.04}) {
        Eigen::VectorXd v(1);
        v(0) = y;
        double ref = std::exp(th * y / s2 - std::sqrt(th * th / s2 + 2.0 / m.zeta) * std::abs(y) /
                                                 std::sqrt(s2)) /
                     (m.zeta * std::abs(y));
        EXPECT_NEAR(vg_levy_density(m, v) / ref, 1.0, 1e-12) << "y=" << y;
        // the VG marginal is the BG law with shapes 1/zeta
        EXPECT_NEAR(vg_levy_density(m, v) / bg_levy_density(mbg_vg_marginal(m, 0), y), 1.0, 1e-12);
    }
}

TEST(VGDensity, HighPrecisionReference) {
    MBGParams m = two_asset(0.01, 0.015, 0.02, 0.012, 0.3);
    Eigen::Vector2d y(0.01, 0.01);
    Eigen::Vector2d th = mbg_vg_theta(m);
    Eigen::Matrix2d sg = mbg_vg_sigma(m);
    // explicit 2x2 algebra in 50 digits
    mp50 s11 = sg(0, 0), s12 = sg(0, 1), s22 = sg(1, 1);
    mp50 det = s11 * s22 - s12 * s12;
    mp50 i11 = s22 / det, i12 = -s12 / det, i22 = s11 / det;
    mp50 y1 = y(0), y2 = y(1), t1 = th(0), t2 = th(1);
    mp50 q = y1 * (i11 * y1 + i12 * y2) + y2 * (i12 * y1 + i22 * y2);
    mp50 a = t1 * (i11 * t1 + i12 * t2) + t2 * (i12 * t1 + i22 * t2) + mp50(2) / mp50(m.zeta);
    mp50 tsy = t1 * (i11 * y1 + i12 * y2) + t2 * (i12 * y1 + i22 * y2);
    mp50 z = sqrt(a * q);
    mp50 pi = boost::math::constants::pi<mp50>();
    mp50 ref = 2 * exp(tsy) * sqrt(a / q) * boost::math::cyl_bessel_k(mp50(1), z) /
               (mp50(m.zeta) * 2 * pi * sqrt(det));
    EXPECT_NEAR(vg_levy_density(m, y) / static_cast<double>(ref), 1.0, 1e-12);
}

TEST(VGDensity, SingularCovarianceRejected) {
    MBGParams m = two_asset(0.01, 0.01, 0.02, 0.02, 1.0);
    EXPECT_THROW(vg_levy_density(m, Eigen::Vector2d(0.01, 0.01)), DomainError);
}

TEST(MBGMarginal, Arithmetic) {
    MBGParams m = two_asset(0.01, 0.01, 0.02, 0.02, 0.2);
    m.tilde[0].c_p = 1.0 / m.zeta + 0.5;
    BGParams b = mbg_marginal_bg(m, 0);
    EXPECT_NEAR(b.c_p, 0.5, 1e-15);
    EXPECT_EQ(b.b_p, m.tilde[0].b_p);
    EXPECT_THROW(mbg_marginal_bg(m, 2), DomainError);
    m.zeta = 1e12;
    BGParams lim = mbg_marginal_bg(m, 1);
    EXPECT_NEAR(lim.c_p, m.tilde[1].c_p, 1e-11);
    EXPECT_NEAR(lim.c_n, m.tilde[1].c_n, 1e-11);
}

TEST(MBGMarginal, SimulatedMarginalIsBGWithTildeShapes) {
    MBGParams m = two_asset(0.012, 0.018, 0.009, 0.02, 0.5);
    const std::size_t n = 200000;
    Eigen::MatrixXd x = simulate_mbg_increments(m, 1.0, n, 11);
    for (std::size_t i = 0; i < 2; ++i) {
        BGParams idio = mbg_marginal_bg(m, i);
        BGParams vg = mbg_vg_marginal(m, i);
        for (double th : {10.0, 40.0, 90.0}) {
            std::complex<double> emp(0.0, 0.0);
            for (std::size_t r = 0; r < n; ++r) emp += std::exp(std::complex<double>(0.0, th * x(r, i)));
            emp /= static_cast<double>(n);
            auto model = std::exp(bg_characteristic_exponent(idio, th) + bg_characteristic_exponent(vg, th));
            auto full = std::exp(bg_characteristic_exponent(m.tilde[i], th));
            EXPECT_LT(std::abs(model - full), 1e-12);
            EXPECT_LT(std::abs(emp - model), 5.0 / std::sqrt(static_cast<double>(n)))
                << "asset " << i << " theta " << th;
        }
    }
}

// ===========================================================================
// Simulation
// ===========================================================================

TEST(Simulation, MeanWithinThreeStandardErrors) {
    const std::size_t n = 1000000;
    double dt = 0.5;
    auto x = simulate_bg_increments(kSpy, dt, n, 7);
    double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= (n - 1);
    double target = dt * (kSpy.c_p * kSpy.b_p - kSpy.c_n * kSpy.b_n);
    EXPECT_LT(std::abs(mean - target), 3.0 * std::sqrt(var / n));
}

TEST(Simulation, OneSidedAndDeterministic) {
    BGParams up{0.01, 1.0, 0.02, 0.0};
    auto x = simulate_bg_increments(up, 1.0, 10000, 3);
    EXPECT_TRUE(std::all_of(x.begin(), x.end(), [](double v) { return v >= 0.0; }));
    EXPECT_EQ(simulate_bg_increments(kSpy, 1.0, 1000, 42), simulate_bg_increments(kSpy, 1.0, 1000, 42));
    EXPECT_NE(simulate_bg_increments(kSpy, 1.0, 1000, 42), simulate_bg_increments(kSpy, 1.0, 1000, 43));
}

TEST(Simulation, CompoundPoissonMatchesGridMoments) {
    JumpGrid g = make_jump_grid(kSpy, {.eps = 1e-4, .nodes_per_side = 400});
    auto m = g.measure();
    const std::size_t n = 200000;
    double t = 2.0;
    auto x = simulate_compound_poisson(m, t, n, 5);
    double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double m1 = 0.0, m2 = 0.0;
    for (std::size_t k = 0; k < m.nodes.size(); ++k) {
        m1 += m.masses[k] * m.nodes[k];
        m2 += m.masses[k] * m.nodes[k] * m.nodes[k];
    }
    EXPECT_LT(std::abs(mean - t * m1), 3.0 * std::sqrt(t * m2 / n));
}
