#include "spectral/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include <boost/math/tools/minima.hpp>
#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include "spectral/errors.hpp"

namespace spectral {

namespace {

constexpr double kRejected = 1e300;

double to_free(double x, const Box& b) {
    bool lo = std::isfinite(b.lo), hi = std::isfinite(b.hi);
    if (lo && hi) {
        double s = (x - b.lo) / (b.hi - b.lo);
        return std::log(s / (1.0 - s));
    }
    if (lo) return std::log(x - b.lo);
    if (hi) return std::log(b.hi - x);
    return x;
}

double from_free(double u, const Box& b) {
    bool lo = std::isfinite(b.lo), hi = std::isfinite(b.hi);
    if (lo && hi) {
        double s = u >= 0 ? 1.0 / (1.0 + std::exp(-u)) : std::exp(u) / (1.0 + std::exp(u));
        return b.lo + (b.hi - b.lo) * s;
    }
    if (lo) return b.lo + std::exp(u);
    if (hi) return b.hi - std::exp(u);
    return u;
}

struct Context {
    const Objective* f;
    const std::vector<Box>* box;
    std::vector<double> x;
};

double trampoline(const gsl_vector* u, void* params) {
    auto* ctx = static_cast<Context*>(params);
    for (std::size_t i = 0; i < ctx->x.size(); ++i) ctx->x[i] = from_free(gsl_vector_get(u, i), (*ctx->box)[i]);
    double v;
    try {
        v = (*ctx->f)(ctx->x);
    } catch (const std::exception&) {
        return kRejected;
    }
    return std::isfinite(v) ? v : kRejected;
}

}  // namespace

OptimResult nelder_mead(const Objective& f, std::vector<double> x0, const std::vector<Box>& box,
                        const NelderMeadOptions& opt) {
    const std::size_t n = x0.size();
    if (n == 0 || box.size() != n) throw DomainError("nelder_mead: start and box sizes differ");
    for (std::size_t i = 0; i < n; ++i)
        if (!(box[i].lo < box[i].hi) || !(x0[i] > box[i].lo && x0[i] < box[i].hi))
            throw DomainError("nelder_mead: start point " + std::to_string(i) + " is not inside its box");

    gsl_set_error_handler_off();
    Context ctx{&f, &box, std::vector<double>(n)};
    gsl_multimin_function fn{&trampoline, n, &ctx};
    gsl_vector* u = gsl_vector_alloc(n);
    gsl_vector* step = gsl_vector_alloc(n);
    for (std::size_t i = 0; i < n; ++i) {
        gsl_vector_set(u, i, to_free(x0[i], box[i]));
        gsl_vector_set(step, i, opt.initial_step);
    }
    gsl_multimin_fminimizer* s = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, n);
    gsl_multimin_fminimizer_set(s, &fn, u, step);

    OptimResult res;
    int it = 0;
    for (; it < opt.max_iter; ++it) {
        if (gsl_multimin_fminimizer_iterate(s) != GSL_SUCCESS) break;
        res.history.push_back(gsl_multimin_fminimizer_minimum(s));
        if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(s), opt.size_tol) == GSL_SUCCESS) {
            res.converged = true;
            ++it;
            break;
        }
    }
    const gsl_vector* best = gsl_multimin_fminimizer_x(s);
    res.x.resize(n);
    for (std::size_t i = 0; i < n; ++i) res.x[i] = from_free(gsl_vector_get(best, i), box[i]);
    res.value = gsl_multimin_fminimizer_minimum(s);
    res.iterations = it;
    gsl_multimin_fminimizer_free(s);
    gsl_vector_free(u);
    gsl_vector_free(step);
    return res;
}

ScalarMin brent_minimize(const std::function<double(double)>& f, double lo, double hi, int bits, int max_iter) {
    if (!(lo < hi)) throw DomainError("brent_minimize: need lo < hi");
    std::uintmax_t iters = static_cast<std::uintmax_t>(max_iter);
    auto [x, v] = boost::math::tools::brent_find_minima(f, lo, hi, bits, iters);
    return {x, v, static_cast<int>(iters)};
}

// ---------------------------------------------------------------------------

KMeansResult kmeans(const Eigen::MatrixXd& pts, int k, std::uint64_t seed, int n_init, int max_iter) {
    const Eigen::Index n = pts.rows();
    if (n == 0) throw DomainError("kmeans: no points");
    if (k < 1 || k > n) throw DomainError("kmeans: need 1 <= k <= number of points");
    if (!pts.allFinite()) throw DomainError("kmeans: points must be finite");
    std::mt19937_64 rng(seed);
    KMeansResult best;
    best.inertia = std::numeric_limits<double>::infinity();

    for (int run = 0; run < std::max(1, n_init); ++run) {
        Eigen::MatrixXd C(k, pts.cols());
        std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
        C.row(0) = pts.row(first(rng));
        Eigen::VectorXd d2(n);
        for (Eigen::Index i = 0; i < n; ++i) d2[i] = (pts.row(i) - C.row(0)).squaredNorm();
        for (int c = 1; c < k; ++c) {
            double total = d2.sum();
            Eigen::Index pick = 0;
            if (total > 0.0) {
                std::uniform_real_distribution<double> U(0.0, total);
                double r = U(rng), acc = 0.0;
                for (pick = 0; pick < n - 1; ++pick) {
                    acc += d2[pick];
                    if (acc >= r && d2[pick] > 0.0) break;
                }
            }
            C.row(c) = pts.row(pick);
            for (Eigen::Index i = 0; i < n; ++i) d2[i] = std::min(d2[i], (pts.row(i) - C.row(c)).squaredNorm());
        }

        std::vector<int> labels(n, -1);
        for (int it = 0; it < max_iter; ++it) {
            bool changed = false;
            for (Eigen::Index i = 0; i < n; ++i) {
                int arg = 0;
                double bd = std::numeric_limits<double>::infinity();
                for (int c = 0; c < k; ++c) {
                    double d = (pts.row(i) - C.row(c)).squaredNorm();
                    if (d < bd) {
                        bd = d;
                        arg = c;
                    }
                }
                if (labels[i] != arg) {
                    labels[i] = arg;
                    changed = true;
                }
            }
            Eigen::MatrixXd S = Eigen::MatrixXd::Zero(k, pts.cols());
            std::vector<std::size_t> cnt(k, 0);
            for (Eigen::Index i = 0; i < n; ++i) {
                S.row(labels[i]) += pts.row(i);
                ++cnt[labels[i]];
            }
            for (int c = 0; c < k; ++c)
                if (cnt[c] > 0) C.row(c) = S.row(c) / static_cast<double>(cnt[c]);
            if (!changed) break;
        }
        double inertia = 0.0;
        std::vector<std::size_t> sizes(k, 0);
        for (Eigen::Index i = 0; i < n; ++i) {
            inertia += (pts.row(i) - C.row(labels[i])).squaredNorm();
            ++sizes[labels[i]];
        }
        if (inertia < best.inertia) best = {C, labels, sizes, inertia};
    }
    return best;
}

}  // namespace spectral
