#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace spectral {

// Coordinate bounds; infinite ends are allowed. Nelder-Mead works on log(x - lo),
// log(hi - x) or logit((x - lo) / (hi - lo)) depending on which ends are finite.
struct Box {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
};

struct NelderMeadOptions {
    int max_iter = 150;
    double initial_step = 0.5;  // in the transformed coordinates
    double size_tol = 1e-8;     // simplex size for convergence
};

struct OptimResult {
    std::vector<double> x;
    double value = 0.0;
    int iterations = 0;
    bool converged = false;
    std::vector<double> history;  // best value after each iteration
};

using Objective = std::function<double(std::span<const double>)>;

// GSL nmsimplex2 in transformed coordinates. Non-finite objective values and
// exceptions thrown by the objective count as +inf-like rejections.
OptimResult nelder_mead(const Objective& f, std::vector<double> x0, const std::vector<Box>& box,
                        const NelderMeadOptions& opt = {});

struct ScalarMin {
    double x = 0.0;
    double value = 0.0;
    int iterations = 0;
};

// Brent's method on [lo, hi].
ScalarMin brent_minimize(const std::function<double(double)>& f, double lo, double hi, int bits = 40,
                         int max_iter = 200);

struct KMeansResult {
    Eigen::MatrixXd centers;  // k x d
    std::vector<int> labels;
    std::vector<std::size_t> sizes;
    double inertia = 0.0;
};

// Lloyd iterations from k-means++ seeds, best of n_init restarts. Rows are points.
KMeansResult kmeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed, int n_init = 10,
                    int max_iter = 300);

}  // namespace spectral
