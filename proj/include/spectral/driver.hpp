#pragma once

#include <span>
#include <utility>
#include <vector>

#include "spectral/distortions.hpp"
#include "spectral/levy_models.hpp"

namespace spectral {

enum class Direction { upper, lower };

// Choquet driver g(z) = int Gamma_+(nu(z+ > w)) dw + int Gamma_-(nu(z- > w)) dw for a
// function taking value z[k] on an atom of mass masses[k]. Exact for such step functions.
double choquet_driver(std::span<const double> masses, std::span<const double> z,
                      const MeasureDistortionPair& pair);
double choquet_driver(const JumpGrid& grid, std::span<const double> z, const MeasureDistortionPair& pair);

// Extreme density for a nondecreasing claim (upper) or its lower counterpart.
// For nonincreasing claims the roles of the two directions swap.
double psi_monotone(const BGParams& p, const MeasureDistortionPair& pair, double y, Direction dir);

// Lévy mass of a finite union of disjoint intervals under kappa (1 + psi) for a
// nondecreasing claim. Intervals may be unbounded but must stay away from 0.
double distorted_levy_interval_mass(const BGParams& p, const MeasureDistortionPair& pair,
                                    const std::vector<std::pair<double, double>>& intervals, Direction dir);

// Level-set masses of the piecewise-linear interpolant of node values over one jump
// grid. Between the outermost nodes and the grid edges the end segments are extended
// linearly; the two half-lines are never joined across 0. Segment masses are
// computed once.
class LevelSetMasses {
public:
    explicit LevelSetMasses(const JumpGrid& grid);

    const JumpGrid& grid() const { return *grid_; }

    // out[k] = nu{zhat >= z[k]} if z[k] > 0, nu{zhat <= z[k]} if z[k] < 0, 0 otherwise.
    void level_masses(std::span<const double> z, std::span<double> out) const;

    // psi per node for a general claim whose jump sensitivity is z. psi is 0 where z is 0.
    void psi(std::span<const double> z, const MeasureDistortionPair& pair, Direction dir,
             std::span<double> out) const;

private:
    // value at an end: z[a] + t (z[b] - z[a])
    struct End {
        double q;
        int a, b;
        double t;
        double value(std::span<const double> z) const { return z[a] + t * (z[b] - z[a]); }
    };
    struct Segment {
        End e0, e1;
        double mass;
    };
    const JumpGrid* grid_;
    std::vector<Segment> segs_;

    void upper_sets(std::span<const double> z, double sign, std::span<double> out) const;
};

std::vector<double> psi_grid_general(const JumpGrid& grid, std::span<const double> z,
                                     const MeasureDistortionPair& pair, Direction dir);

// Additivity is asserted for comonotone pairs that never take strictly opposite
// signs at a node; Gamma_+ and Gamma_- are different capacities, so sign-mixing
// comonotone pairs are not additive in general.
struct ComonotoneReport {
    bool comonotone = false;
    bool sign_aligned = false;
    double residual = 0.0;   // |g(z1+z2) - g(z1) - g(z2)|
    double tolerance = 0.0;  // 1e-8 (1 + |g(z1)| + |g(z2)|)
    bool additive = true;    // only asserted when comonotone and sign aligned
};

bool comonotone(std::span<const double> z1, std::span<const double> z2);
ComonotoneReport check_comonotone_additivity(std::span<const double> masses, std::span<const double> z1,
                                             std::span<const double> z2, const MeasureDistortionPair& pair);

// kappa (1 + psi) on the nodes of a jump grid.
struct DistortedLevyDensity {
    LevyWeights base;
    std::vector<double> psi;
    Direction direction = Direction::upper;

    LevyWeights measure() const;
};

// Density for monotone claims, psi from psi_monotone at each node.
DistortedLevyDensity distorted_levy_density(const JumpGrid& grid, const BGParams& p,
                                            const MeasureDistortionPair& pair, Direction dir);
DistortedLevyDensity make_distorted_density(LevyWeights base, std::vector<double> psi, Direction dir);

}  // namespace spectral
