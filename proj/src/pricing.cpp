#include "spectral/pricing.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>

#include <fftw3.h>

#include "spectral/errors.hpp"

namespace spectral {

namespace {

void require(bool ok, const std::string& msg) {
    if (!ok) throw DomainError(msg);
}

// Cubic B-spline on [-1, 1], 1 at the origin. Its inverse transform is a sinc^4,
// so the taper acts as a nonnegative smoothing kernel.
double bspline_taper(double s) {
    s = std::abs(2.0 * s);
    double m;
    if (s >= 2.0) return 0.0;
    if (s <= 1.0) m = 2.0 / 3.0 - s * s + 0.5 * s * s * s;
    else m = (2.0 - s) * (2.0 - s) * (2.0 - s) / 6.0;
    return m * 1.5;
}

struct FftwBuffer {
    fftw_complex* in;
    fftw_complex* out;
    fftw_plan plan;
    explicit FftwBuffer(std::size_t n) {
        in = fftw_alloc_complex(n);
        out = fftw_alloc_complex(n);
        plan = fftw_plan_dft_1d(static_cast<int>(n), in, out, FFTW_FORWARD, FFTW_ESTIMATE);
    }
    ~FftwBuffer() {
        fftw_destroy_plan(plan);
        fftw_free(in);
        fftw_free(out);
    }
    FftwBuffer(const FftwBuffer&) = delete;
    FftwBuffer& operator=(const FftwBuffer&) = delete;
};

double bg_stdev_rate(const BGParams& p) { return std::sqrt(p.c_p * p.b_p * p.b_p + p.c_n * p.b_n * p.b_n); }

}  // namespace

double Density::integral() const {
    double s = 0.0;
    for (double f : pdf) s += f;
    return s * dx;
}

double Density::moment(int k) const {
    double s = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) s += std::pow(x[j], k) * pdf[j];
    return s * dx;
}

Density density_from_levy(const LevyWeights& m, double t, const FourierSpec& spec) {
    require(t > 0.0 && std::isfinite(t), "density_from_levy: t must be positive");
    const std::size_t n = spec.n_points;
    require(n >= 1024 && (n & (n - 1)) == 0, "density_from_levy: n_points must be a power of two >= 1024");
    require(spec.n_std > 0.0, "density_from_levy: n_std must be positive");
    require(m.nodes.size() == m.masses.size() && !m.nodes.empty(), "density_from_levy: empty measure");

    double m1 = 0.0, m2 = 0.0;
    for (std::size_t k = 0; k < m.nodes.size(); ++k) {
        m1 += m.masses[k] * m.nodes[k];
        m2 += m.masses[k] * m.nodes[k] * m.nodes[k];
    }
    Density d;
    d.mean = t * m1;
    d.stdev = std::sqrt(t * m2);
    require(d.stdev > 0.0, "density_from_levy: degenerate measure");

    // at small t the jump tail reaches well past n_std deviations; cover it too
    std::vector<std::size_t> order(m.nodes.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return std::abs(m.nodes[a]) > std::abs(m.nodes[b]); });
    double tail = 0.0, reach = 0.0;
    for (std::size_t k : order) {
        tail += t * m.masses[k];
        if (tail > 1e-2 * spec.leakage_tol) {
            reach = std::abs(m.nodes[k]);
            break;
        }
    }
    const double half = std::max(spec.n_std * d.stdev, reach + std::abs(d.mean));
    const double x0 = d.mean - half;
    d.dx = 2.0 * half / static_cast<double>(n);
    const double du = 2.0 * std::numbers::pi / (static_cast<double>(n) * d.dx);
    const double u0 = -0.5 * static_cast<double>(n) * du;
    const double umax = -u0;

    auto ce = characteristic_exponent_grid(m, u0, du, n);
    FftwBuffer buf(n);
    for (std::size_t j = 0; j < n; ++j) {
        double u = u0 + static_cast<double>(j) * du;
        std::complex<double> v = std::exp(t * ce[j] - std::complex<double>(0.0, u * x0)) * bspline_taper(u / umax);
        buf.in[j][0] = v.real();
        buf.in[j][1] = v.imag();
    }
    fftw_execute(buf.plan);

    d.x.resize(n);
    d.pdf.resize(n);
    const double scale = du / (2.0 * std::numbers::pi);
    for (std::size_t j = 0; j < n; ++j) {
        d.x[j] = x0 + static_cast<double>(j) * d.dx;
        double f = scale * buf.out[j][0] * ((j % 2 == 0) ? 1.0 : -1.0);
        if (!std::isfinite(f)) throw NumericalError("density_from_levy: non-finite density value");
        d.pdf[j] = f < 1e-12 ? 0.0 : f;
    }
    double total = d.integral();
    if (!(total > 0.0)) throw NumericalError("density_from_levy: density vanished after clipping");
    for (double& f : d.pdf) f /= total;

    const std::size_t edge = n / 24;
    double left = 0.0, right = 0.0;
    for (std::size_t j = 0; j < edge; ++j) {
        left += d.pdf[j] * d.dx;
        right += d.pdf[n - 1 - j] * d.dx;
    }
    if (left > spec.leakage_tol || right > spec.leakage_tol) {
        std::ostringstream os;
        os << "density_from_levy: edge mass " << std::max(left, right) << " exceeds " << spec.leakage_tol
           << " (domain +-" << spec.n_std << " sd, t=" << t << "); widen the domain";
        throw NumericalError(os.str());
    }
    return d;
}

MonotoneGrid::MonotoneGrid(const BGParams& p, const JumpGridOptions& opt) : p_(p) {
    validate(p);
    grid_ = make_jump_grid(p, opt);
    tails_.resize(grid_.size());
    for (std::size_t k = 0; k < grid_.size(); ++k) tails_[k] = bg_tail_mass(p, grid_.nodes[k]);
    tail_pos_half_eps_ = bg_tail_mass(p, 0.5 * grid_.eps);
    tail_neg_half_eps_ = bg_tail_mass(p, -0.5 * grid_.eps);
}

double MonotoneGrid::psi_at(const MeasureDistortionPair& pair, double y, double tail, Direction dir) const {
    if (dir == Direction::upper) return y > 0 ? pair.d_plus(tail) : -pair.d_minus(tail);
    return y > 0 ? -pair.d_minus(tail) : pair.d_plus(tail);
}

std::vector<double> MonotoneGrid::psi(const MeasureDistortionPair& pair, Direction dir) const {
    std::vector<double> out(grid_.size());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = psi_at(pair, grid_.nodes[k], tails_[k], dir);
    return out;
}

LevyWeights MonotoneGrid::distorted_measure(const MeasureDistortionPair& pair, Direction dir) const {
    LevyWeights m = grid_.measure();
    for (std::size_t k = 0; k < m.masses.size(); ++k)
        m.masses[k] *= std::max(1.0 + psi_at(pair, m.nodes[k], tails_[k], dir), 0.0);
    return m;
}

double MonotoneGrid::small_jump_drift(const MeasureDistortionPair& pair, Direction dir) const {
    const double eps = grid_.eps;
    double pos = p_.c_p > 0 ? p_.c_p * p_.b_p * -std::expm1(-eps / p_.b_p) : 0.0;
    double neg = p_.c_n > 0 ? p_.c_n * p_.b_n * -std::expm1(-eps / p_.b_n) : 0.0;
    return pos * (1.0 + psi_at(pair, 0.5 * eps, tail_pos_half_eps_, dir)) -
           neg * (1.0 + psi_at(pair, -0.5 * eps, tail_neg_half_eps_, dir));
}

DriftTriple MonotoneGrid::drift_triple(const MeasureDistortionPair& pair) const {
    DriftTriple d;
    d.mu_base = bg_mean_rate(p_);
    // jumps below the cutoff: (e^y - 1) psi kappa ~ y psi kappa near 0
    const auto id = MeasureDistortionPair::identity();
    double rc_u = small_jump_drift(pair, Direction::upper) - small_jump_drift(id, Direction::upper);
    double rc_l = small_jump_drift(id, Direction::lower) - small_jump_drift(pair, Direction::lower);
    for (std::size_t k = 0; k < grid_.size(); ++k) {
        double y = grid_.nodes[k], w = grid_.weights[k] * std::expm1(y);
        rc_u += w * psi_at(pair, y, tails_[k], Direction::upper);
        rc_l -= w * psi_at(pair, y, tails_[k], Direction::lower);
    }
    if (!std::isfinite(rc_u) || !std::isfinite(rc_l)) throw NumericalError("drift_triple: non-finite risk charge");
    d.rc_upper = rc_u;
    d.rc_lower = rc_l;
    d.mu_upper = d.mu_base - rc_u;
    d.mu_lower = d.mu_base + rc_l;
    const double tol = 1e-14 * (1.0 + std::abs(d.mu_base));
    if (d.mu_upper > d.mu_base + tol || d.mu_base > d.mu_lower + tol) {
        std::ostringstream os;
        os.precision(17);
        os << "drift ordering violated: mu_U=" << d.mu_upper << " mu=" << d.mu_base << " mu_L=" << d.mu_lower;
        throw InvariantError(os.str());
    }
    return d;
}

DriftTriple drift_triple(const BGParams& p, const MeasureDistortionPair& pair, const JumpGridOptions& opt) {
    return MonotoneGrid(p, opt).drift_triple(pair);
}

// ---------------------------------------------------------------------------
// Fourier pricing

DistortedPricer::DistortedPricer(const BGParams& p, const MeasureDistortionPair& pair, double T, double r,
                                 double spot, const PricingOptions& opt)
    : DistortedPricer(MonotoneGrid(p, opt.grid), pair, T, r, spot, opt.fourier) {}

DistortedPricer::DistortedPricer(const MonotoneGrid& grid, const MeasureDistortionPair& pair, double T, double r,
                                 double spot, const FourierSpec& fourier) {
    require(spot > 0.0 && std::isfinite(spot), "pricer: spot must be positive");
    require(T > 0.0 && std::isfinite(T), "pricer: maturity must be positive");
    require(std::isfinite(r), "pricer: rate must be finite");
    up_ = density_from_levy(grid.distorted_measure(pair, Direction::upper), T, fourier);
    lo_ = density_from_levy(grid.distorted_measure(pair, Direction::lower), T, fourier);
    const double base = std::log(spot) + (r - bg_mean_rate(grid.params())) * T;
    shift_up_ = base + T * grid.small_jump_drift(pair, Direction::upper);
    shift_lo_ = base + T * grid.small_jump_drift(pair, Direction::lower);
    disc_ = std::exp(-r * T);
}

double DistortedPricer::expectation(const std::function<double(double)>& payoff_of_spot, Direction dir) const {
    const Density& d = density(dir);
    const double shift = log_shift(dir);
    double s = 0.0;
    for (std::size_t j = 0; j < d.x.size(); ++j)
        if (d.pdf[j] > 0.0) s += payoff_of_spot(std::exp(shift + d.x[j])) * d.pdf[j];
    return disc_ * s * d.dx;
}

double DistortedPricer::price(double strike, OptionSide side) const {
    require(strike > 0.0 && std::isfinite(strike), "pricer: strike must be positive");
    // nondecreasing payoffs take the upper density for the ask; puts swap directions
    switch (side) {
        case OptionSide::call_upper:
            return expectation([&](double s) { return std::max(s - strike, 0.0); }, Direction::upper);
        case OptionSide::call_lower:
            return expectation([&](double s) { return std::max(s - strike, 0.0); }, Direction::lower);
        case OptionSide::put_upper:
            return expectation([&](double s) { return std::max(strike - s, 0.0); }, Direction::lower);
        case OptionSide::put_lower:
            return expectation([&](double s) { return std::max(strike - s, 0.0); }, Direction::upper);
    }
    return 0.0;
}

double option_price_distorted(const BGParams& p, const MeasureDistortionPair& pair, double strike, double T,
                              double r, OptionSide side, double spot, const PricingOptions& opt) {
    return DistortedPricer(p, pair, T, r, spot, opt).price(strike, side);
}

// ---------------------------------------------------------------------------
// explicit PIDE

PIDEGrid pide_grid_around(const BGParams& p, double x0, double T, int N, int M, double n_std, double r) {
    validate(p);
    require(T > 0.0 && n_std > 0.0, "pide grid: T and n_std must be positive");
    double half = n_std * bg_stdev_rate(p) * std::sqrt(T);
    return {x0 - half, x0 + half, N, M, T, r};
}

double ValuationSurface::value_at(double x0, int row) const {
    require(row >= 0 && row < u.rows(), "value_at: row out of range");
    require(x0 >= x.front() && x0 <= x.back(), "value_at: point outside the grid");
    double dx = x[1] - x[0];
    double s = (x0 - x.front()) / dx;
    auto i = std::min<std::size_t>(static_cast<std::size_t>(s), x.size() - 2);
    double th = s - static_cast<double>(i);
    return (1.0 - th) * u(row, i) + th * u(row, i + 1);
}

namespace {

struct PideSetup {
    JumpGrid jumps;
    std::vector<long> shift;     // floor(y_k / dx)
    std::vector<double> frac;    // fractional part
    std::vector<double> reach;   // min(1, |y_k| / dx)
    std::vector<double> x;
    double dx, dt, drift;
};

PideSetup make_setup(const BGParams& p, const PIDEGrid& g, const JumpGridOptions& jopt) {
    validate(p);
    if (!(g.x_min < g.x_max) || g.N < 2 || g.M < 1 || !(g.T > 0.0) || !std::isfinite(g.r))
        throw ConfigError("PIDE grid needs x_min < x_max, N >= 2, M >= 1 and T > 0");
    PideSetup s{make_jump_grid(p, jopt), {}, {}, {}, {}, 0, 0, 0};
    s.dx = (g.x_max - g.x_min) / g.N;
    s.dt = g.T / g.M;
    // jumps below the cutoff enter as their undistorted drift
    const double eps = s.jumps.eps;
    double small = (p.c_p > 0 ? p.c_p * p.b_p * -std::expm1(-eps / p.b_p) : 0.0) -
                   (p.c_n > 0 ? p.c_n * p.b_n * -std::expm1(-eps / p.b_n) : 0.0);
    s.drift = g.r - bg_mean_rate(p) + small;
    s.x.resize(g.N + 1);
    for (int i = 0; i <= g.N; ++i) s.x[i] = g.x_min + i * s.dx;
    for (double y : s.jumps.nodes) {
        double q = y / s.dx, f = std::floor(q);
        s.shift.push_back(static_cast<long>(f));
        s.frac.push_back(q - f);
        s.reach.push_back(std::min(1.0, std::abs(q)));
    }
    return s;
}

// Spatial operator on one row: out = drift * upwind u_x + sum w (1 + psi) z - r u, with the
// risk charge per node. Returns the largest dt * coefficient sum.
struct RowWork {
    std::vector<double> ext, z, psi;
    long pad = 0;
};

double pide_operator(const PideSetup& s, const LevelSetMasses& ls, const Payoff& payoff, const PIDEGrid& g,
                     const MeasureDistortionPair& pair, Direction dir, const Eigen::VectorXd& cur,
                     const std::vector<double>& fx, RowWork& w, Eigen::VectorXd* out, std::vector<double>& charge) {
    const long N = g.N;
    const std::size_t K = s.jumps.size();
    // row values extended beyond the grid by payoff increments
    const long pad = w.pad;
    w.ext.resize(N + 1 + 2 * pad);
    for (long m = -pad; m <= N + pad; ++m) {
        double v;
        if (m < 0) v = cur[0] + payoff(g.x_min + m * s.dx) - fx[0];
        else if (m > N) v = cur[N] + payoff(g.x_min + m * s.dx) - fx[N];
        else v = cur[m];
        if (!std::isfinite(v)) {
            std::ostringstream os;
            os << "PIDE: non-finite value at x=" << g.x_min + m * s.dx;
            throw NumericalError(os.str());
        }
        w.ext[m + pad] = v;
    }
    const double* U = w.ext.data() + pad;
    w.z.resize(K);
    w.psi.resize(K);
    double worst = 0.0;
    for (long i = 0; i <= N; ++i) {
        const double ui = cur[i];
        for (std::size_t k = 0; k < K; ++k) {
            long m = i + s.shift[k];
            double th = s.frac[k];
            w.z[k] = (1.0 - th) * U[m] + th * U[m + 1] - ui;
        }
        ls.psi(w.z, pair, dir, w.psi);
        double jump = 0.0, rc = 0.0, coef = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            double wk = s.jumps.weights[k];
            double wf = wk * (1.0 + w.psi[k]);
            jump += wf * w.z[k];
            rc += wk * w.psi[k] * w.z[k];
            coef += wf * s.reach[k];
        }
        charge[i] = rc;
        double adv = s.drift >= 0.0 ? (U[i + 1] - ui) / s.dx : (ui - U[i - 1]) / s.dx;
        worst = std::max(worst, s.dt * (std::abs(s.drift) / s.dx + coef + g.r));
        if (out) {
            double v = s.drift * adv + jump - g.r * ui;
            if (!std::isfinite(v)) {
                std::ostringstream os;
                os << "PIDE: non-finite value at x=" << s.x[i];
                throw NumericalError(os.str());
            }
            (*out)[i] = v;
        }
    }
    return worst;
}

void stability_guard(double number, const PIDEGrid& g) {
    if (number > 1.0 + 1e-12) {
        std::ostringstream os;
        os << "PIDE stability violated: dt*(|drift|/dx + sum w(1+psi)min(1,|y|/dx) + r) = " << number
           << " > 1";
        if (number < 1e6) os << "; use M >= " << static_cast<long>(std::ceil(g.M * number));
        throw ConfigError(os.str());
    }
}

RowWork make_work(const PideSetup& s) {
    RowWork w;
    long reach = 0;
    for (long sh : s.shift) reach = std::max(reach, std::abs(sh));
    w.pad = reach + 2;
    return w;
}

}  // namespace

double pide_stability_number(const Payoff& payoff, const BGParams& p, const MeasureDistortionPair& pair,
                             const PIDEGrid& grid, Direction dir, const JumpGridOptions& jumps) {
    PideSetup s = make_setup(p, grid, jumps);
    LevelSetMasses ls(s.jumps);
    RowWork w = make_work(s);
    std::vector<double> fx(s.x.size());
    Eigen::VectorXd cur(s.x.size());
    for (std::size_t i = 0; i < s.x.size(); ++i) cur[i] = fx[i] = payoff(s.x[i]);
    std::vector<double> charge(s.x.size());
    return pide_operator(s, ls, payoff, grid, pair, dir, cur, fx, w, nullptr, charge);
}

ValuationSurface pide_solve_explicit(const Payoff& payoff, const BGParams& p, const MeasureDistortionPair& pair,
                                     const PIDEGrid& grid, Direction dir, const JumpGridOptions& jumps) {
    PideSetup s = make_setup(p, grid, jumps);
    LevelSetMasses ls(s.jumps);
    RowWork w = make_work(s);
    const int N = grid.N, M = grid.M;
    ValuationSurface out;
    out.x = s.x;
    out.t.resize(M + 1);
    for (int j = 0; j <= M; ++j) out.t[j] = j * s.dt;
    out.u.resize(M + 1, N + 1);
    out.risk_charge.resize(M + 1, N + 1);

    std::vector<double> fx(N + 1);
    for (int i = 0; i <= N; ++i) {
        fx[i] = payoff(s.x[i]);
        if (!std::isfinite(fx[i])) throw DomainError("PIDE: payoff not finite on the grid");
    }
    Eigen::VectorXd cur = Eigen::Map<Eigen::VectorXd>(fx.data(), N + 1), L(N + 1), stage(N + 1);
    std::vector<double> charge(N + 1), scratch(N + 1);
    auto store_charge = [&](int j) {
        for (int i = 0; i <= N; ++i) out.risk_charge(j, i) = charge[i];
    };
    out.u.row(M) = cur.transpose();
    for (int j = M; j > 0; --j) {
        double num = pide_operator(s, ls, payoff, grid, pair, dir, cur, fx, w, &L, charge);
        stability_guard(num, grid);
        out.max_stability = std::max(out.max_stability, num);
        store_charge(j);
        stage = cur + s.dt * L;
        if (grid.stepping == TimeStepping::ssp_rk2) {
            // second Euler stage from the predictor, averaged with the row
            num = pide_operator(s, ls, payoff, grid, pair, dir, stage, fx, w, &L, scratch);
            stability_guard(num, grid);
            out.max_stability = std::max(out.max_stability, num);
            stage = 0.5 * (cur + stage + s.dt * L);
        }
        cur.swap(stage);
        out.u.row(j - 1) = cur.transpose();
    }
    pide_operator(s, ls, payoff, grid, pair, dir, cur, fx, w, nullptr, charge);
    store_charge(0);
    return out;
}

void write_surface_csv(const ValuationSurface& s, std::ostream& os) {
    os.precision(12);
    os << "t,x,u,risk_charge\n";
    for (Eigen::Index j = 0; j < s.u.rows(); ++j)
        for (Eigen::Index i = 0; i < s.u.cols(); ++i)
            os << s.t[j] << ',' << s.x[i] << ',' << s.u(j, i) << ',' << s.risk_charge(j, i) << '\n';
}

}  // namespace spectral
