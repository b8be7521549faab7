#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "spectral/distortions.hpp"
#include "spectral/levy_models.hpp"
#include "spectral/optimize.hpp"
#include "spectral/pricing.hpp"

namespace spectral {

// ---------------------------------------------------------------------------
// portfolio description

// B = { theta : theta_i >= -lower_i, sum theta <= 1 + leverage }. Empty lower means
// all zero (no short selling).
struct PortfolioBounds {
    std::vector<double> lower;
    double leverage = 0.0;

    bool no_short_selling() const;
};

struct PortfolioSpec {
    std::vector<BGParams> assets;  // independent BG case
    std::optional<MBGParams> mbg;  // when set, the assets are its components
    PortfolioBounds bounds;
    double horizon = 1.0;          // in the parameters' time unit (one day for daily fits)
    double r = 0.0;                // per time unit, earned by the cash weight 1 - sum theta
    std::vector<double> alpha;     // extra deterministic drift per asset, default 0

    std::size_t dim() const;
};

void validate(const PortfolioBounds& b, std::size_t dim);
void validate(const PortfolioSpec& s);

bool in_box(std::span<const double> theta, const PortfolioBounds& b, double tol = 1e-12);
// Euclidean projection onto B.
std::vector<double> project_onto_box(std::span<const double> theta, const PortfolioBounds& b);

// Undistorted drift theta^T a: BG mean rates, plus the common VG term for MBG.
double portfolio_drift(std::span<const double> theta, const PortfolioSpec& s);

// ---------------------------------------------------------------------------
// risk charges

// Jump atoms of z = theta^T (e^y - 1) on the asset axes with the exact level-set mass
// nu{z >= z_k} (z_k > 0) or nu{z <= z_k} (z_k < 0) of every atom. zw is the
// integral of z over the atom; jumps below the grid cutoff form one atom per side.
struct ChargeAtoms {
    std::vector<double> z;
    std::vector<double> zw;
    std::vector<double> level;

    // sum over atoms of zw Gamma_-'(level) for zw > 0 and |zw| Gamma_+'(level) for zw < 0
    double charge(const MeasureDistortionPair& pair) const;
};

class IbgChargeModel {
public:
    IbgChargeModel(std::vector<BGParams> assets, const JumpGridOptions& grid);

    std::size_t dim() const { return assets_.size(); }
    const std::vector<BGParams>& assets() const { return assets_; }
    ChargeAtoms atoms(std::span<const double> theta) const;
    // nu{theta^T(e^y - 1) >= v} for v > 0, nu{... <= v} for v < 0
    double level_mass(std::span<const double> theta, double v) const;

private:
    std::vector<BGParams> assets_;
    std::vector<JumpGrid> grids_;
};

inline JumpGridOptions portfolio_grid_options() { return {.eps = 1e-5, .nodes_per_side = 200}; }

// int theta^T (e^y - 1) psi^L(theta, y) nu(dy) for independent BG assets, psi^L with
// Gamma_-' on gains and Gamma_+' on losses of the portfolio. Throws DomainError for
// theta outside B.
double distorted_variation_ibg(std::span<const double> theta, const std::vector<BGParams>& assets,
                               const MeasureDistortionPair& pair, const PortfolioBounds& bounds = {},
                               const JumpGridOptions& grid = portfolio_grid_options());

// theta^T a - charge with only the independent BG parts of the MBG distorted.
double mbg_objective(std::span<const double> theta, const MBGParams& m, const MeasureDistortionPair& pair,
                     const PortfolioBounds& bounds = {}, const JumpGridOptions& grid = portfolio_grid_options());

// int theta^T (e^y - 1) nu_VG(dy); each asset sees the VG marginal BG(b~_p, 1/zeta, b~_n, 1/zeta).
double mbg_vg_variation(std::span<const double> theta, const MBGParams& m);

// ---------------------------------------------------------------------------
// allocation results

struct AllocationResult {
    std::vector<double> theta_star;
    double value = 0.0;
    std::optional<double> c_star;
    std::optional<double> varpi_star;
    double value_coefficient = 1.0;  // C(0) = exp(T * value) for the small-investor problem
    int iterations = 0;
    bool converged = true;
    bool unbounded = false;
    std::vector<std::string> flags;
};

void to_json(nlohmann::json& j, const AllocationResult& r);

struct PortfolioOptions {
    JumpGridOptions grid = portfolio_grid_options();
    NelderMeadOptions nm{.max_iter = 400, .initial_step = 0.2, .size_tol = 1e-9};
    int starts = 8;
    std::uint64_t seed = 1;
};

// argmax over B of theta^T a + (1 - sum theta) r - charge(theta). Constant controls are
// only optimal under no short selling; otherwise the result carries a "heuristic" flag.
AllocationResult optimal_theta_small_investor(const PortfolioSpec& s, const MeasureDistortionPair& pair,
                                              const PortfolioOptions& opt = {});

// ---------------------------------------------------------------------------
// rebates

struct RebateSpec {
    double c_lower = 0.0;
    double c_upper = 0.0;
    double chi = 1.0;
    double chi2 = 1.0;
};

void validate(const RebateSpec& s);
void to_json(nlohmann::json& j, const RebateSpec& s);
void from_json(const nlohmann::json& j, RebateSpec& s);

// 0 for c >= c_upper, chi exp((c - c_lower)^-chi2 - (c_upper - c)^-chi2) inside, +inf
// at or below c_lower.
double rebate_eval(const RebateSpec& s, double c);

struct RebatedValue {
    double value = 0.0;
    double c_star = 0.0;
};

// sup over c in (c_lower, c_upper] of h(c): 64-point log-spaced scan, then Brent on
// log c between the neighbours of the best scan point.
RebatedValue maximize_over_c(const std::function<double(double)>& h, const RebateSpec& s);

// sup_c [ g^c(z) - b(c) ] with g^c the driver of the family a = 1/c, b = 1 at fixed
// gamma, g^c(z) = int psi^{L,c} z dnu for a step function on atoms of the given masses.
RebatedValue rebated_driver(std::span<const double> masses, std::span<const double> z, const RebateSpec& s,
                            double gamma);
// g^c(z) alone.
double level_driver(std::span<const double> masses, std::span<const double> z, double c, double gamma);
// Largest L2(nu) norm of an extreme density over c in [c_lower, c_upper] on these atoms.
double rebated_lipschitz_constant(std::span<const double> masses, const RebateSpec& s, double gamma);

// Atoms of z = e^y - 1 for one BG asset (monotone claim, exact tails).
ChargeAtoms bg_charge_atoms(const BGParams& p, const JumpGridOptions& grid = portfolio_grid_options());

// varpi a - sup_c [ varpi charge_c - b(c) ] for one BG asset and the family at gamma.
RebatedValue rebated_variation(double varpi, const BGParams& p, double gamma, const RebateSpec& s,
                               const JumpGridOptions& grid = portfolio_grid_options());
// Same on precomputed atoms with drift a.
RebatedValue rebated_variation(double varpi, double a, const ChargeAtoms& atoms, double gamma,
                               const RebateSpec& s);

// ---------------------------------------------------------------------------
// myopic one-asset allocation over theta in [0, 1]

enum class MyopicObjective {
    expected_net_return,  // linear, no distortion
    rebated_net_return,   // MINVAR probability distortion, rebate in c = 1/gamma
    exp_utility_ce,       // certainty equivalent of log return, exponential utility
    crra_ce,              // certainty equivalent of return, CRRA utility
    rebated_variation,    // measure distorted variation with rebate
};

MyopicObjective myopic_objective_from_string(const std::string& s);
std::string to_string(MyopicObjective o);

struct MyopicParams {
    RebateSpec pd_rebate{.c_lower = 0.01, .c_upper = 1.0, .chi = 1.0, .chi2 = 1.0};
    RebateSpec md_rebate{.c_lower = 2.0, .c_upper = 100.0, .chi = 1.0, .chi2 = 1.0};
    double md_gamma = 0.01;
    double epsilon = 5.0;  // absolute risk aversion of the exponential utility
    double eta = 5.0;      // relative risk aversion
    JumpGridOptions grid{.eps = 1e-5, .nodes_per_side = 300};
    FourierSpec fourier{.n_points = 1u << 12};
};

// Distribution of the BG log return X_T on a uniform grid.
struct ReturnLaw {
    std::vector<double> x;
    std::vector<double> prob;  // sums to 1
};
ReturnLaw bg_return_law(const BGParams& p, double T, const JumpGridOptions& grid, const FourierSpec& fourier);

// Objective value at theta. The law is only read by the three distribution-based objectives.
double myopic_value(MyopicObjective o, double theta, const BGParams& p, double r, double T, double varpi,
                    const MyopicParams& prm, const ReturnLaw& law, const ChargeAtoms& atoms);

// Maximises by Brent on [0, 1], then compares with both ends; ties within
// 1e-10 (1 + |value|) go to theta = 0.
AllocationResult myopic_allocate(MyopicObjective o, const BGParams& p, double r, double T, double varpi,
                                 const MyopicParams& prm = {});

// ---------------------------------------------------------------------------
// optimal amount

struct AmountOptions {
    PortfolioOptions portfolio{};
    double gamma = 0.01;   // family parameter of the rebated distortions
    int rounds = 6;        // alternations between varpi and theta
    double varpi_max = 1e15;
};

// varpi T theta^T a - sup_c [ varpi T charge(theta, c) - b(c) ]
RebatedValue rebated_portfolio_variation(std::span<const double> theta, double varpi, const PortfolioSpec& s,
                                         const RebateSpec& rb, double gamma,
                                         const JumpGridOptions& grid = portfolio_grid_options());

// Alternates a scalar search in varpi with Nelder-Mead in theta, starting from
// (theta0, varpi0). Returns varpi* = 0 when the variation is not positive for small
// amounts; flags `unbounded` when the slope at c -> c_lower stays positive.
AllocationResult optimal_amount_and_weights(const PortfolioSpec& s, const RebateSpec& rb,
                                            std::span<const double> theta0, double varpi0,
                                            const AmountOptions& opt = {});

}  // namespace spectral
