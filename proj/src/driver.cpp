#include "spectral/driver.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "spectral/errors.hpp"

namespace spectral {

namespace {

void require(bool ok, const std::string& msg) {
    if (!ok) throw DomainError(msg);
}

void require_finite(std::span<const double> z) {
    for (double v : z) require(std::isfinite(v), "grid function must be finite");
}

// sum_j (s_(j) - s_(j+1)) G(M_j) over the values s sorted descending, M_j the mass
// of the j largest values
template <class G>
double layer_cake(std::vector<std::pair<double, double>>& vm, G&& gamma) {
    std::sort(vm.begin(), vm.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    double acc = 0.0, mass = 0.0;
    for (std::size_t j = 0; j < vm.size(); ++j) {
        mass += vm[j].second;
        double next = j + 1 < vm.size() ? vm[j + 1].first : 0.0;
        double gap = vm[j].first - next;
        if (gap > 0.0) acc += gap * gamma(mass);
    }
    return acc;
}

}  // namespace

double choquet_driver(std::span<const double> masses, std::span<const double> z,
                      const MeasureDistortionPair& pair) {
    require(masses.size() == z.size(), "choquet_driver: masses and values differ in length");
    require_finite(z);
    std::vector<std::pair<double, double>> pos, neg;
    for (std::size_t k = 0; k < z.size(); ++k) {
        if (z[k] > 0.0) pos.emplace_back(z[k], masses[k]);
        else if (z[k] < 0.0) neg.emplace_back(-z[k], masses[k]);
    }
    double up = layer_cake(pos, [&](double m) { return pair.gamma_plus(m); });
    double down = layer_cake(neg, [&](double m) { return pair.gamma_minus(m); });
    return up + down;
}

double choquet_driver(const JumpGrid& grid, std::span<const double> z, const MeasureDistortionPair& pair) {
    return choquet_driver(grid.weights, z, pair);
}

double psi_monotone(const BGParams& p, const MeasureDistortionPair& pair, double y, Direction dir) {
    require(y != 0.0, "psi_monotone: y must be nonzero");
    double tail = bg_tail_mass(p, y);
    if (dir == Direction::upper) return y > 0 ? pair.d_plus(tail) : -pair.d_minus(tail);
    return y > 0 ? -pair.d_minus(tail) : pair.d_plus(tail);
}

double distorted_levy_interval_mass(const BGParams& p, const MeasureDistortionPair& pair,
                                    const std::vector<std::pair<double, double>>& intervals, Direction dir) {
    validate(p);
    auto sorted = intervals;
    std::sort(sorted.begin(), sorted.end());
    double pos = 0.0, neg = 0.0;
    for (std::size_t k = 0; k < sorted.size(); ++k) {
        auto [a, b] = sorted[k];
        require(a < b, "interval needs lo < hi");
        require(!(a <= 0.0 && b >= 0.0), "interval touches 0");
        if (k > 0) require(a >= sorted[k - 1].second, "intervals overlap");
        if (a > 0) {
            pos += bg_tail_mass(p, a) - (std::isinf(b) ? 0.0 : bg_tail_mass(p, b));
        } else {
            neg += bg_tail_mass(p, b) - (std::isinf(a) ? 0.0 : bg_tail_mass(p, a));
        }
    }
    if (dir == Direction::upper) return pos + neg + pair.gamma_plus(pos) - pair.gamma_minus(neg);
    return pos + neg - pair.gamma_minus(pos) + pair.gamma_plus(neg);
}

// ---------------------------------------------------------------------------
// level sets

LevelSetMasses::LevelSetMasses(const JumpGrid& grid) : grid_(&grid) {
    require(grid.size() >= 2, "level sets need a grid with nodes on both sides");
    const auto& y = grid.nodes;
    auto side = [&](int first, int last, bool negative) {
        if (first >= last) return;
        double lo_edge = negative ? -grid.y_max : grid.eps;
        double hi_edge = negative ? -grid.eps : grid.y_max;
        auto at = [&](double q, int a, int b) {
            double t = a == b ? 0.0 : (q - y[a]) / (y[b] - y[a]);
            return End{q, a, b, t};
        };
        auto add = [&](End e0, End e1) {
            if (e1.q > e0.q) segs_.push_back({e0, e1, grid.mass_between(e0.q, e1.q)});
        };
        int l1 = std::min(first + 1, last - 1), h1 = std::max(last - 2, first);
        add(at(lo_edge, first, l1), at(y[first], first, first));
        for (int k = first; k + 1 < last; ++k) add(at(y[k], k, k), at(y[k + 1], k + 1, k + 1));
        add(at(y[last - 1], last - 1, last - 1), at(hi_edge, last - 1, h1));
    };
    side(0, static_cast<int>(grid.n_neg), true);
    side(static_cast<int>(grid.n_neg), static_cast<int>(grid.size()), false);
}

// For every node with sign*z > 0: mass of {sign*zhat >= sign*z[k]}.
void LevelSetMasses::upper_sets(std::span<const double> z, double sign, std::span<double> out) const {
    const std::size_t ns = segs_.size();
    std::vector<double> lo(ns), hi(ns);
    for (std::size_t j = 0; j < ns; ++j) {
        double a = sign * segs_[j].e0.value(z), b = sign * segs_[j].e1.value(z);
        lo[j] = std::min(a, b);
        hi[j] = std::max(a, b);
    }
    // segments sorted by their minimum, with suffix sums of masses
    std::vector<std::size_t> by_lo(ns);
    std::iota(by_lo.begin(), by_lo.end(), 0);
    std::sort(by_lo.begin(), by_lo.end(), [&](std::size_t a, std::size_t b) { return lo[a] < lo[b]; });
    std::vector<double> sorted_lo(ns), suffix(ns + 1, 0.0);
    for (std::size_t j = 0; j < ns; ++j) sorted_lo[j] = lo[by_lo[j]];
    for (std::size_t j = ns; j-- > 0;) suffix[j] = suffix[j + 1] + segs_[by_lo[j]].mass;

    std::vector<std::size_t> queries;
    for (std::size_t k = 0; k < z.size(); ++k)
        if (sign * z[k] > 0.0) queries.push_back(k);
    std::sort(queries.begin(), queries.end(),
              [&](std::size_t a, std::size_t b) { return sign * z[a] < sign * z[b]; });

    std::vector<std::size_t> active;  // segments with lo < s, pruned when hi <= s
    std::size_t next = 0;
    for (std::size_t qi = 0; qi < queries.size(); ++qi) {
        const std::size_t k = queries[qi];
        const double s = sign * z[k];
        if (qi > 0 && sign * z[queries[qi - 1]] == s) {
            out[k] = out[queries[qi - 1]];
            continue;
        }
        while (next < ns && sorted_lo[next] < s) active.push_back(by_lo[next++]);
        double mass = suffix[next];
        std::size_t keep = 0;
        for (std::size_t a = 0; a < active.size(); ++a) {
            std::size_t j = active[a];
            if (hi[j] <= s) continue;
            active[keep++] = j;
            const Segment& sg = segs_[j];
            double v0 = sign * sg.e0.value(z), v1 = sign * sg.e1.value(z);
            double y = sg.e0.q + (s - v0) / (v1 - v0) * (sg.e1.q - sg.e0.q);
            y = std::clamp(y, sg.e0.q, sg.e1.q);
            mass += v1 > v0 ? grid_->mass_between(y, sg.e1.q) : grid_->mass_between(sg.e0.q, y);
        }
        active.resize(keep);
        out[k] = mass;
    }
}

void LevelSetMasses::level_masses(std::span<const double> z, std::span<double> out) const {
    require(z.size() == grid_->size() && out.size() == z.size(), "level_masses: size mismatch");
    require_finite(z);
    std::fill(out.begin(), out.end(), 0.0);
    upper_sets(z, 1.0, out);
    upper_sets(z, -1.0, out);
}

void LevelSetMasses::psi(std::span<const double> z, const MeasureDistortionPair& pair, Direction dir,
                         std::span<double> out) const {
    level_masses(z, out);
    // Gamma_+' is capped at Gamma_+(w)/w: a node of mass w cannot gain more distorted
    // mass than Gamma_+(w). Only binds at extrema whose level set is lighter than w.
    auto plus = [&](double m, std::size_t k) {
        double w = grid_->weights[k];
        double d = pair.d_plus(m);
        return w > 0.0 ? std::min(d, pair.gamma_plus(w) / w) : d;
    };
    for (std::size_t k = 0; k < z.size(); ++k) {
        double m = out[k];
        if (z[k] > 0.0) out[k] = dir == Direction::upper ? plus(m, k) : -pair.d_minus(m);
        else if (z[k] < 0.0) out[k] = dir == Direction::upper ? -pair.d_minus(m) : plus(m, k);
        else out[k] = 0.0;
    }
}

std::vector<double> psi_grid_general(const JumpGrid& grid, std::span<const double> z,
                                     const MeasureDistortionPair& pair, Direction dir) {
    LevelSetMasses ls(grid);
    std::vector<double> out(z.size());
    ls.psi(z, pair, dir, out);
    return out;
}

// ---------------------------------------------------------------------------
// comonotonicity

bool comonotone(std::span<const double> z1, std::span<const double> z2) {
    require(z1.size() == z2.size(), "comonotone: size mismatch");
    std::vector<std::size_t> idx(z1.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return z1[a] < z1[b] || (z1[a] == z1[b] && z2[a] < z2[b]);
    });
    // every z1-tie group must sit above the largest z2 of the groups before it
    double prev_max = -std::numeric_limits<double>::infinity();
    std::size_t i = 0;
    while (i < idx.size()) {
        std::size_t j = i;
        double gmax = z2[idx[i]];
        while (j < idx.size() && z1[idx[j]] == z1[idx[i]]) gmax = std::max(gmax, z2[idx[j++]]);
        if (z2[idx[i]] < prev_max) return false;
        prev_max = std::max(prev_max, gmax);
        i = j;
    }
    return true;
}

ComonotoneReport check_comonotone_additivity(std::span<const double> masses, std::span<const double> z1,
                                             std::span<const double> z2, const MeasureDistortionPair& pair) {
    require(z1.size() == z2.size() && z1.size() == masses.size(), "comonotone check: size mismatch");
    ComonotoneReport rep;
    rep.comonotone = comonotone(z1, z2);
    rep.sign_aligned = true;
    for (std::size_t k = 0; k < z1.size(); ++k)
        if (z1[k] * z2[k] < 0.0) rep.sign_aligned = false;
    std::vector<double> sum(z1.size());
    for (std::size_t k = 0; k < sum.size(); ++k) sum[k] = z1[k] + z2[k];
    double g1 = choquet_driver(masses, z1, pair), g2 = choquet_driver(masses, z2, pair);
    rep.residual = std::abs(choquet_driver(masses, sum, pair) - g1 - g2);
    rep.tolerance = 1e-8 * (1.0 + std::abs(g1) + std::abs(g2));
    rep.additive = !(rep.comonotone && rep.sign_aligned) || rep.residual <= rep.tolerance;
    return rep;
}

// ---------------------------------------------------------------------------
// distorted densities

LevyWeights DistortedLevyDensity::measure() const {
    LevyWeights m{base.nodes, base.masses};
    for (std::size_t k = 0; k < m.masses.size(); ++k) m.masses[k] *= 1.0 + psi[k];
    return m;
}

DistortedLevyDensity make_distorted_density(LevyWeights base, std::vector<double> psi, Direction dir) {
    require(base.nodes.size() == psi.size() && base.masses.size() == psi.size(),
            "distorted density: size mismatch");
    for (std::size_t k = 0; k < psi.size(); ++k)
        if (!(1.0 + psi[k] >= -1e-12))
            throw InvariantError("distorted density: 1 + psi < 0 at y=" + std::to_string(base.nodes[k]));
    return {std::move(base), std::move(psi), dir};
}

DistortedLevyDensity distorted_levy_density(const JumpGrid& grid, const BGParams& p,
                                            const MeasureDistortionPair& pair, Direction dir) {
    std::vector<double> psi(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) psi[k] = psi_monotone(p, pair, grid.nodes[k], dir);
    return make_distorted_density(grid.measure(), std::move(psi), dir);
}

}  // namespace spectral
