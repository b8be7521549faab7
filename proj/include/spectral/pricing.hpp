#pragma once

#include <functional>
#include <iosfwd>
#include <vector>

#include <Eigen/Dense>

#include "spectral/distortions.hpp"
#include "spectral/driver.hpp"
#include "spectral/levy_models.hpp"

namespace spectral {

struct FourierSpec {
    std::size_t n_points = 1u << 14;  // power of two, at least 2^10
    double n_std = 12.0;              // half-width of the domain in standard deviations
    double leakage_tol = 1e-4;        // mass allowed in the outer 1/24 of the domain per side
};

// Density of X_t on x_j = x0 + j dx.
struct Density {
    std::vector<double> x;
    std::vector<double> pdf;
    double dx = 0.0;
    double mean = 0.0;   // of the jump measure, t * sum w y
    double stdev = 0.0;  // of the jump measure, sqrt(t * sum w y^2)

    double integral() const;
    double moment(int k) const;
};

// Pure-jump process with the given discretised Lévy measure, by FFT of exp(t psi)
// with a cubic B-spline frequency taper (a nonnegative smoothing kernel in x).
Density density_from_levy(const LevyWeights& m, double t, const FourierSpec& spec = {});

struct DriftTriple {
    double mu_upper = 0.0;
    double mu_base = 0.0;
    double mu_lower = 0.0;
    double rc_upper = 0.0;  // mu_base - mu_upper
    double rc_lower = 0.0;  // mu_lower - mu_base
};

DriftTriple drift_triple(const BGParams& p, const MeasureDistortionPair& pair,
                         const JumpGridOptions& grid = {});

// Jump grid with the exact BG tail mass at every node, so that monotone-claim densities
// for many distortions cost no special-function calls.
class MonotoneGrid {
public:
    explicit MonotoneGrid(const BGParams& p, const JumpGridOptions& opt = {});

    const BGParams& params() const { return p_; }
    const JumpGrid& grid() const { return grid_; }
    std::vector<double> psi(const MeasureDistortionPair& pair, Direction dir) const;
    LevyWeights distorted_measure(const MeasureDistortionPair& pair, Direction dir) const;
    // int_{0<|y|<eps} y kappa (1 + psi) dy with psi frozen at +-eps/2
    double small_jump_drift(const MeasureDistortionPair& pair, Direction dir) const;
    DriftTriple drift_triple(const MeasureDistortionPair& pair) const;

private:
    BGParams p_;
    JumpGrid grid_;
    std::vector<double> tails_;
    double tail_pos_half_eps_ = 0.0, tail_neg_half_eps_ = 0.0;
    double psi_at(const MeasureDistortionPair& pair, double y, double tail, Direction dir) const;
};

enum class OptionSide { call_upper, call_lower, put_upper, put_lower };

struct PricingOptions {
    JumpGridOptions grid{};
    FourierSpec fourier{};
};

// Upper and lower densities for monotone claims, shared by all strikes of one maturity.
// log S_T = log S_0 + (r - mu) T + X_T with X distorted; jumps below the grid cutoff
// enter as a drift.
class DistortedPricer {
public:
    DistortedPricer(const BGParams& p, const MeasureDistortionPair& pair, double T, double r, double spot,
                    const PricingOptions& opt = {});
    DistortedPricer(const MonotoneGrid& grid, const MeasureDistortionPair& pair, double T, double r,
                    double spot, const FourierSpec& fourier = {});

    double price(double strike, OptionSide side) const;
    // Expected payoff of a general function of S_T under the density of `dir`, discounted.
    double expectation(const std::function<double(double)>& payoff_of_spot, Direction dir) const;
    const Density& density(Direction dir) const { return dir == Direction::upper ? up_ : lo_; }
    // log S_T = log_shift(dir) + x on the density grid
    double log_shift(Direction dir) const { return dir == Direction::upper ? shift_up_ : shift_lo_; }

private:
    Density up_, lo_;
    double shift_up_ = 0.0, shift_lo_ = 0.0;
    double disc_ = 1.0;
};

double option_price_distorted(const BGParams& p, const MeasureDistortionPair& pair, double strike, double T,
                              double r, OptionSide side, double spot, const PricingOptions& opt = {});

// ---------------------------------------------------------------------------
// explicit PIDE

// euler is the plain explicit step; ssp_rk2 averages the row with two chained Euler
// steps, which keeps the same stability bound and positivity.
enum class TimeStepping { euler, ssp_rk2 };

struct PIDEGrid {
    double x_min = 0.0;
    double x_max = 0.0;
    int N = 400;  // spatial intervals
    int M = 50;   // time intervals
    double T = 1.0;
    double r = 0.0;
    TimeStepping stepping = TimeStepping::ssp_rk2;
};

// Log-price grid centred on x0 spanning n_std standard deviations of X_T each way.
PIDEGrid pide_grid_around(const BGParams& p, double x0, double T, int N, int M, double n_std = 12.0,
                          double r = 0.0);

struct ValuationSurface {
    std::vector<double> t;  // t_j = j dt; row M is maturity
    std::vector<double> x;
    Eigen::MatrixXd u;            // (M+1) x (N+1)
    Eigen::MatrixXd risk_charge;  // sum_k w_k psi_k z_k per node
    double max_stability = 0.0;   // largest dt * (coefficient sum) seen

    double value_at(double x0, int row = 0) const;
};

using Payoff = std::function<double(double)>;  // of log price

// Jump grid used by the PIDE unless one is passed in.
inline JumpGridOptions pide_jump_options() { return {.eps = 1e-6, .nodes_per_side = 600}; }

ValuationSurface pide_solve_explicit(const Payoff& payoff, const BGParams& p, const MeasureDistortionPair& pair,
                                     const PIDEGrid& grid, Direction dir,
                                     const JumpGridOptions& jumps = pide_jump_options());

// Coefficient sum of the explicit step for the given grid at the payoff row; the scheme
// needs dt times this to stay at or below 1.
double pide_stability_number(const Payoff& payoff, const BGParams& p, const MeasureDistortionPair& pair,
                             const PIDEGrid& grid, Direction dir,
                             const JumpGridOptions& jumps = pide_jump_options());

void write_surface_csv(const ValuationSurface& s, std::ostream& os);

}  // namespace spectral
