#include "spectral/levy_models.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include <boost/math/special_functions/bessel.hpp>
#include <gsl/gsl_errno.h>
#include <gsl/gsl_sf_expint.h>

#include "spectral/errors.hpp"

namespace spectral {

namespace {

constexpr double kEulerGamma = 0.57721566490153286061;

void require(bool ok, const std::string& msg) {
    if (!ok) throw DomainError(msg);
}

// Edges eps = e_0 < ... < e_n = y_max: geometric up to a switch point, uniform after.
// The switch point makes the last geometric width match the uniform width.
std::vector<double> side_edges(double eps, double y_max, int n, double share) {
    int n_g = std::clamp(static_cast<int>(std::lround(share * n)), 1, n - 1);
    int n_u = n - n_g;
    auto mismatch = [&](double ys) {
        double last = ys * (1.0 - std::pow(eps / ys, 1.0 / n_g));
        return last - (y_max - ys) / n_u;
    };
    double lo = std::log(eps) + 1e-12, hi = std::log(y_max) - 1e-12;
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        if (mismatch(std::exp(mid)) > 0) hi = mid; else lo = mid;
    }
    double ys = std::exp(0.5 * (lo + hi));
    std::vector<double> e(n + 1);
    double r = std::log(ys / eps) / n_g;
    for (int k = 0; k <= n_g; ++k) e[k] = eps * std::exp(r * k);
    double h = (y_max - ys) / n_u;
    for (int k = 1; k <= n_u; ++k) e[n_g + k] = ys + h * k;
    e[n] = y_max;
    return e;
}

JumpGrid layout(double eps, double y_max, const JumpGridOptions& opt) {
    require(eps > 0 && y_max > eps, "jump grid needs 0 < eps < y_max");
    require(opt.nodes_per_side >= 4, "jump grid needs at least 4 nodes per side");
    auto e = side_edges(eps, y_max, opt.nodes_per_side, opt.geometric_share);
    std::size_t n = e.size() - 1;
    JumpGrid g;
    g.eps = eps;
    g.y_max = y_max;
    g.n_neg = n;
    g.lo.resize(2 * n);
    g.hi.resize(2 * n);
    for (std::size_t k = 0; k < n; ++k) {
        // negative side stored in increasing order: cell k mirrors cell n-1-k
        g.lo[k] = -e[n - k];
        g.hi[k] = -e[n - 1 - k];
        g.lo[n + k] = e[k];
        g.hi[n + k] = e[k + 1];
    }
    g.nodes.resize(2 * n);
    g.weights.resize(2 * n);
    return g;
}

double log_bessel_k(double nu, double z) {
    if (z < 600.0) return std::log(boost::math::cyl_bessel_k(nu, z));
    double mu = 4.0 * nu * nu;
    double t = 1.0, s = 1.0;
    for (int k = 1; k <= 6; ++k) {
        t *= (mu - (2.0 * k - 1) * (2.0 * k - 1)) / (k * 8.0 * z);
        s += t;
    }
    return 0.5 * std::log(std::numbers::pi / (2.0 * z)) - z + std::log(s);
}

}  // namespace

void validate(const BGParams& p) {
    require(std::isfinite(p.b_p) && std::isfinite(p.b_n) && std::isfinite(p.c_p) &&
                std::isfinite(p.c_n),
            "BG parameters must be finite");
    require(p.b_p > 0 && p.b_n > 0, "BG scales must be positive");
    require(p.c_p >= 0 && p.c_n >= 0, "BG shapes must be nonnegative");
    require(p.b_p < 1, "BG requires b_p < 1 for a finite exponential moment");
}

BGParams make_bg(double b_p, double c_p, double b_n, double c_n) {
    BGParams p{b_p, c_p, b_n, c_n};
    validate(p);
    return p;
}

BGParams rescale_time(const BGParams& p, double periods) {
    require(periods > 0, "time rescaling factor must be positive");
    return {p.b_p, p.c_p * periods, p.b_n, p.c_n * periods};
}

void validate(const MBGParams& m) {
    std::size_t d = m.dim();
    require(d >= 1, "MBG needs at least one asset");
    require(m.zeta > 0, "MBG zeta must be positive");
    require(static_cast<std::size_t>(m.corr.rows()) == d &&
                static_cast<std::size_t>(m.corr.cols()) == d,
            "MBG correlation matrix has the wrong size");
    for (std::size_t i = 0; i < d; ++i) {
        validate(m.tilde[i]);
        require(m.tilde[i].c_p * m.zeta > 1 && m.tilde[i].c_n * m.zeta > 1,
                "MBG requires c~ * zeta > 1 for every asset");
        require(std::abs(m.corr(i, i) - 1.0) < 1e-12, "correlation diagonal must be one");
        for (std::size_t j = 0; j < d; ++j)
            require(std::abs(m.corr(i, j) - m.corr(j, i)) < 1e-12, "correlation must be symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m.corr);
    require(es.eigenvalues().minCoeff() > -1e-12, "correlation must be positive semidefinite");
}

double JumpGrid::total_mass() const {
    double s = 0.0;
    for (double w : weights) s += w;
    return s;
}

double JumpGrid::mass_between(double u, double v) const {
    if (u > v) std::swap(u, v);
    if (u < 0 && v > 0) throw DomainError("mass_between: interval straddles zero");
    bool neg = v < 0;
    double a = neg ? -v : u;
    double b = neg ? -u : v;
    a = std::max(a, eps);
    b = std::min(b, y_max);
    if (a >= b) return 0.0;
    if (bg) {
        double c = neg ? bg->c_n : bg->c_p;
        double s = neg ? bg->b_n : bg->b_p;
        if (c == 0.0) return 0.0;
        return c * (exp_integral_e1(a / s) - exp_integral_e1(b / s));
    }
    // piecewise-uniform spreading of the cell masses
    std::size_t first = neg ? 0 : n_neg;
    std::size_t last = neg ? n_neg : size();
    double lo_s = neg ? -b : a;
    double hi_s = neg ? -a : b;
    auto it = std::upper_bound(hi.begin() + first, hi.begin() + last, lo_s);
    double m = 0.0;
    for (std::size_t k = it - hi.begin(); k < last && lo[k] < hi_s; ++k) {
        double l = std::max(lo[k], lo_s), h = std::min(hi[k], hi_s);
        if (h > l) m += weights[k] * (h - l) / (hi[k] - lo[k]);
    }
    return m;
}

JumpGrid make_jump_grid(const BGParams& p, const JumpGridOptions& opt) {
    validate(p);
    JumpGrid g = layout(opt.eps, opt.trunc_factor * std::max(p.b_p, p.b_n), opt);
    g.bg = p;
    for (std::size_t k = 0; k < g.size(); ++k) {
        bool neg = k < g.n_neg;
        double a = neg ? -g.hi[k] : g.lo[k];
        double b = neg ? -g.lo[k] : g.hi[k];
        double c = neg ? p.c_n : p.c_p;
        double s = neg ? p.b_n : p.b_p;
        double mass = c > 0 ? c * (exp_integral_e1(a / s) - exp_integral_e1(b / s)) : 0.0;
        // node at the nu-conditional mean of the cell, exact for linear integrands
        double first = c * s * (std::exp(-a / s) - std::exp(-b / s));
        double y = mass > 0 ? first / mass : 0.5 * (a + b);
        if (!(y > a && y < b)) y = 0.5 * (a + b);
        g.nodes[k] = neg ? -y : y;
        g.weights[k] = mass;
    }
    return g;
}

JumpGrid make_jump_grid(const std::function<double(double)>& density, double y_max,
                        const JumpGridOptions& opt) {
    JumpGrid g = layout(opt.eps, y_max, opt);
    for (std::size_t k = 0; k < g.size(); ++k) {
        double y = 0.5 * (g.lo[k] + g.hi[k]);
        double w = density(y) * (g.hi[k] - g.lo[k]);
        require(std::isfinite(w) && w >= 0, "density must be finite and nonnegative on the grid");
        g.nodes[k] = y;
        g.weights[k] = w;
    }
    return g;
}

double bg_levy_density(const BGParams& p, double y) {
    require(y != 0.0, "bg_levy_density: y must be nonzero");
    if (y > 0) return p.c_p / y * std::exp(-y / p.b_p);
    return p.c_n / -y * std::exp(y / p.b_n);
}

double exp_integral_e1(double x) {
    require(x > 0, "exp_integral_e1: x must be positive");
    static const bool handler_off = (gsl_set_error_handler_off(), true);
    (void)handler_off;
    gsl_sf_result r;
    int status = gsl_sf_expint_E1_e(x, &r);
    if (status == GSL_EUNDRFLW) return 0.0;
    if (status != GSL_SUCCESS) throw NumericalError("exp_integral_e1: GSL status " + std::to_string(status));
    return r.val;
}

double exp_integral_e1_inverse(double v) {
    require(v > 0 && std::isfinite(v), "exp_integral_e1_inverse: v must be positive");
    if (v > 700.0 || v < 1e-300) throw NumericalError("exp_integral_e1_inverse: v out of range");
    // Newton on h(u) = log E1(e^u) - log v, h'(u) = -e^{-x}/E1(x), with bisection safeguard
    double u;
    if (v > 1.0) {
        u = -v - kEulerGamma;
    } else {
        double l = -std::log(v);
        u = std::log(std::max(l - std::log(std::max(l, 1.0)), 1e-3));
    }
    double lo = -745.0, hi = std::log(745.0);
    double target = std::log(v);
    for (int it = 0; it < 200; ++it) {
        double x = std::exp(u);
        double e1 = exp_integral_e1(x);
        double h = (e1 > 0 ? std::log(e1) : -1e300) - target;
        if (std::abs(h) <= 1e-13) return x;
        if (h > 0) lo = u; else hi = u;
        double step = e1 > 0 ? h / (-std::exp(-x) / e1) : 0.0;
        double un = u - step;
        if (!(un > lo && un < hi) || e1 == 0.0) un = 0.5 * (lo + hi);
        if (std::abs(un - u) < 1e-15 * std::max(1.0, std::abs(u))) return std::exp(un);
        u = un;
    }
    throw NumericalError("exp_integral_e1_inverse: no convergence");
}

double bg_tail_mass(const BGParams& p, double y) {
    require(y != 0.0, "bg_tail_mass: y must be nonzero (total mass is infinite)");
    if (y > 0) return p.c_p > 0 ? p.c_p * exp_integral_e1(y / p.b_p) : 0.0;
    return p.c_n > 0 ? p.c_n * exp_integral_e1(-y / p.b_n) : 0.0;
}

double bg_mean_rate(const BGParams& p) {
    require(p.b_p < 1, "bg_mean_rate requires b_p < 1");
    return -p.c_p * std::log1p(-p.b_p) - p.c_n * std::log1p(p.b_n);
}

std::complex<double> bg_characteristic_exponent(const BGParams& p, double theta) {
    using C = std::complex<double>;
    return -p.c_p * std::log(C(1.0, -theta * p.b_p)) - p.c_n * std::log(C(1.0, theta * p.b_n));
}

std::complex<double> characteristic_exponent(const LevyWeights& m, double theta) {
    require(!m.nodes.empty(), "characteristic_exponent: empty grid");
    double re = 0.0, im = 0.0;
    for (std::size_t k = 0; k < m.nodes.size(); ++k) {
        double a = theta * m.nodes[k];
        re += m.masses[k] * (std::cos(a) - 1.0);
        im += m.masses[k] * std::sin(a);
    }
    return {re, im};
}

std::vector<std::complex<double>> characteristic_exponent_grid(const LevyWeights& m, double theta0,
                                                               double dtheta, std::size_t n) {
    require(!m.nodes.empty(), "characteristic_exponent: empty grid");
    std::vector<double> re(n, 0.0), im(n, 0.0);
    constexpr std::size_t reseed = 128;
    for (std::size_t k = 0; k < m.nodes.size(); ++k) {
        double y = m.nodes[k], w = m.masses[k];
        if (w == 0.0) continue;
        double sr = std::cos(dtheta * y), si = std::sin(dtheta * y);
        double zr = 0.0, zi = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j % reseed == 0) {
                double a = (theta0 + dtheta * j) * y;
                zr = std::cos(a);
                zi = std::sin(a);
            }
            re[j] += w * (zr - 1.0);
            im[j] += w * zi;
            double tr = zr * sr - zi * si;
            zi = zr * si + zi * sr;
            zr = tr;
        }
    }
    std::vector<std::complex<double>> out(n);
    for (std::size_t j = 0; j < n; ++j) out[j] = {re[j], im[j]};
    return out;
}

Eigen::VectorXd mbg_vg_theta(const MBGParams& m) {
    Eigen::VectorXd t(m.dim());
    for (std::size_t i = 0; i < m.dim(); ++i) t(i) = (m.tilde[i].b_p - m.tilde[i].b_n) / m.zeta;
    return t;
}

Eigen::MatrixXd mbg_vg_sigma(const MBGParams& m) {
    Eigen::VectorXd s(m.dim());
    for (std::size_t i = 0; i < m.dim(); ++i)
        s(i) = std::sqrt(2.0 * m.tilde[i].b_p * m.tilde[i].b_n / m.zeta);
    return s.asDiagonal() * m.corr * s.asDiagonal();
}

double vg_levy_density(const MBGParams& m, const Eigen::VectorXd& y) {
    std::size_t d = m.dim();
    require(static_cast<std::size_t>(y.size()) == d, "vg_levy_density: dimension mismatch");
    require(y.norm() > 0, "vg_levy_density: y must be nonzero");
    Eigen::MatrixXd sigma = mbg_vg_sigma(m);
    Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success) throw DomainError("vg_levy_density: singular covariance");
    double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    if (!std::isfinite(logdet)) throw DomainError("vg_levy_density: singular covariance");
    Eigen::VectorXd th = mbg_vg_theta(m);
    Eigen::VectorXd si_y = llt.solve(y);
    Eigen::VectorXd si_th = llt.solve(th);
    double q = y.dot(si_y);
    double a = th.dot(si_th) + 2.0 / m.zeta;
    double z = std::sqrt(a * q);
    double nu = 0.5 * static_cast<double>(d);
    double lk = std::log(2.0) - std::log(m.zeta) - nu * std::log(2.0 * std::numbers::pi) -
                0.5 * logdet + th.dot(si_y) + 0.5 * nu * (std::log(a) - std::log(q)) +
                log_bessel_k(nu, z);
    return std::exp(lk);
}

BGParams mbg_marginal_bg(const MBGParams& m, std::size_t i) {
    require(i < m.dim(), "mbg_marginal_bg: asset index out of range");
    const BGParams& t = m.tilde[i];
    require(t.c_p * m.zeta > 1 && t.c_n * m.zeta > 1, "mbg_marginal_bg requires c~ * zeta > 1");
    return {t.b_p, t.c_p - 1.0 / m.zeta, t.b_n, t.c_n - 1.0 / m.zeta};
}

BGParams mbg_vg_marginal(const MBGParams& m, std::size_t i) {
    require(i < m.dim(), "mbg_vg_marginal: asset index out of range");
    return {m.tilde[i].b_p, 1.0 / m.zeta, m.tilde[i].b_n, 1.0 / m.zeta};
}

std::vector<double> simulate_bg_increments(const BGParams& p, double dt, std::size_t n,
                                           std::uint64_t seed) {
    require(dt > 0 && n >= 1, "simulate_bg_increments: need dt > 0 and n >= 1");
    validate(p);
    std::mt19937_64 rng(seed);
    std::gamma_distribution<double> gp(p.c_p > 0 ? p.c_p * dt : 1.0, p.b_p);
    std::gamma_distribution<double> gn(p.c_n > 0 ? p.c_n * dt : 1.0, p.b_n);
    std::vector<double> out(n);
    for (auto& x : out) {
        double up = p.c_p > 0 ? gp(rng) : 0.0;
        double dn = p.c_n > 0 ? gn(rng) : 0.0;
        x = up - dn;
    }
    return out;
}

Eigen::MatrixXd simulate_mbg_increments(const MBGParams& m, double dt, std::size_t n,
                                        std::uint64_t seed) {
    validate(m);
    require(dt > 0 && n >= 1, "simulate_mbg_increments: need dt > 0 and n >= 1");
    std::size_t d = m.dim();
    Eigen::MatrixXd sigma = mbg_vg_sigma(m);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma);
    Eigen::MatrixXd root = es.eigenvectors() *
                           es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
    Eigen::VectorXd th = mbg_vg_theta(m);
    std::mt19937_64 rng(seed);
    std::gamma_distribution<double> clock(dt / m.zeta, m.zeta);
    std::normal_distribution<double> normal;
    std::vector<std::gamma_distribution<double>> gp, gn;
    for (std::size_t i = 0; i < d; ++i) {
        BGParams idio = mbg_marginal_bg(m, i);
        gp.emplace_back(idio.c_p * dt, idio.b_p);
        gn.emplace_back(idio.c_n * dt, idio.b_n);
    }
    Eigen::MatrixXd out(n, d);
    Eigen::VectorXd z(d);
    for (std::size_t r = 0; r < n; ++r) {
        double g = clock(rng);
        for (std::size_t i = 0; i < d; ++i) z(i) = normal(rng);
        Eigen::VectorXd x = th * g + std::sqrt(g) * (root * z);
        for (std::size_t i = 0; i < d; ++i) out(r, i) = x(i) + gp[i](rng) - gn[i](rng);
    }
    return out;
}

std::vector<double> simulate_compound_poisson(const LevyWeights& m, double t, std::size_t n,
                                              std::uint64_t seed) {
    require(t > 0 && n >= 1, "simulate_compound_poisson: need t > 0 and n >= 1");
    double lambda = 0.0;
    for (double w : m.masses) {
        require(w >= 0 && std::isfinite(w), "simulate_compound_poisson: masses must be nonnegative");
        lambda += w;
    }
    std::mt19937_64 rng(seed);
    std::vector<double> out(n, 0.0);
    if (lambda == 0.0) return out;
    std::poisson_distribution<long> count(lambda * t);
    std::discrete_distribution<std::size_t> pick(m.masses.begin(), m.masses.end());
    for (auto& x : out) {
        long k = count(rng);
        double s = 0.0;
        for (long j = 0; j < k; ++j) s += m.nodes[pick(rng)];
        x = s;
    }
    return out;
}

}  // namespace spectral
