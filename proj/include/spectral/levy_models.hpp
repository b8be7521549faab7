#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace spectral {

// Bilateral gamma parameters. Shapes are rates per unit of time; the time unit
// is whatever the parameters were estimated on (daily for the bundled fixtures).
struct BGParams {
    double b_p = 0.0;
    double c_p = 0.0;
    double b_n = 0.0;
    double c_n = 0.0;
};

// Scales must be positive, shapes nonnegative (a zero shape switches a side off)
// and b_p < 1 so that the exponential moment exists.
void validate(const BGParams& p);
BGParams make_bg(double b_p, double c_p, double b_n, double c_n);

// Shapes multiplied by `periods`, e.g. daily parameters to yearly ones.
BGParams rescale_time(const BGParams& p, double periods);

struct MBGParams {
    std::vector<BGParams> tilde;  // (b~_p, c~_p, b~_n, c~_n) per asset
    Eigen::MatrixXd corr;         // correlation of the Brownian part
    double zeta = 1.0;            // variance rate of the common gamma clock

    std::size_t dim() const { return tilde.size(); }
};

void validate(const MBGParams& m);

// Discretised Lévy measure: nodes and the mass carried by each node.
struct LevyWeights {
    std::vector<double> nodes;
    std::vector<double> masses;
};

struct JumpGridOptions {
    double eps = 1e-6;          // small-jump cutoff
    double trunc_factor = 20.0; // truncation at trunc_factor * max(b_p, b_n)
    int nodes_per_side = 4000;
    double geometric_share = 0.75;  // fraction of cells spaced geometrically
};

// Cells [lo_k, hi_k] cover [-y_max, -eps] and [eps, y_max]. Nodes are sorted
// increasingly; the first n_neg of them are negative.
struct JumpGrid {
    std::vector<double> nodes;
    std::vector<double> weights;
    std::vector<double> lo;
    std::vector<double> hi;
    double eps = 0.0;
    double y_max = 0.0;
    std::size_t n_neg = 0;
    std::optional<BGParams> bg;  // exact tail masses available when set

    std::size_t size() const { return nodes.size(); }
    LevyWeights measure() const { return {nodes, weights}; }
    double total_mass() const;
    // Mass of [u, v] (0 < u <= v or u <= v < 0) clipped to the grid domain.
    double mass_between(double u, double v) const;
};

JumpGrid make_jump_grid(const BGParams& p, const JumpGridOptions& opt = {});
// Same cell layout, masses taken as density(node) * cell width.
JumpGrid make_jump_grid(const std::function<double(double)>& density, double y_max,
                        const JumpGridOptions& opt = {});

double bg_levy_density(const BGParams& p, double y);
double exp_integral_e1(double x);
double exp_integral_e1_inverse(double v);
double bg_tail_mass(const BGParams& p, double y);
double bg_mean_rate(const BGParams& p);
// Closed-form exponent c_p log(1/(1 - i th b_p)) + c_n log(1/(1 + i th b_n)).
std::complex<double> bg_characteristic_exponent(const BGParams& p, double theta);

std::complex<double> characteristic_exponent(const LevyWeights& m, double theta);
// Exponent on the uniform frequency grid theta_j = theta0 + j*dtheta.
std::vector<std::complex<double>> characteristic_exponent_grid(const LevyWeights& m, double theta0,
                                                               double dtheta, std::size_t n);

double vg_levy_density(const MBGParams& m, const Eigen::VectorXd& y);
// Idiosyncratic BG part of asset i: (b~_p, c~_p - 1/zeta, b~_n, c~_n - 1/zeta).
BGParams mbg_marginal_bg(const MBGParams& m, std::size_t i);
// The common VG factor seen by asset i alone is BG(b~_p, 1/zeta, b~_n, 1/zeta).
BGParams mbg_vg_marginal(const MBGParams& m, std::size_t i);
// VG drift vector: (b~_p - b~_n)/zeta and covariance diag(s) C diag(s), s^2 = 2 b~_p b~_n / zeta.
Eigen::VectorXd mbg_vg_theta(const MBGParams& m);
Eigen::MatrixXd mbg_vg_sigma(const MBGParams& m);

std::vector<double> simulate_bg_increments(const BGParams& p, double dt, std::size_t n,
                                           std::uint64_t seed);
// Rows are draws, columns assets: common VG factor plus independent BG parts.
Eigen::MatrixXd simulate_mbg_increments(const MBGParams& m, double dt, std::size_t n,
                                        std::uint64_t seed);
// Compound Poisson sums of the discretised measure over horizon t.
std::vector<double> simulate_compound_poisson(const LevyWeights& m, double t, std::size_t n,
                                              std::uint64_t seed);

}  // namespace spectral
