#include "spectral/distortions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "spectral/errors.hpp"

namespace spectral {

namespace {

void require(bool ok, const std::string& msg) {
    if (!ok) throw DomainError(msg);
}

constexpr double kEulerGamma = 0.57721566490153286061;

// Ein(z) = sum_{k>=1} (-1)^{k+1} z^k / (k k!), so that E1(z) = -gamma - log z + Ein(z).
double ein(double z) {
    double term = z, sum = z;
    for (int k = 2; k < 60; ++k) {
        term *= -z / k;
        double add = term / k;
        sum += add;
        if (std::abs(add) < 1e-17 * std::abs(sum)) break;
    }
    return sum;
}

// E1(u r) - E1(u) without cancellation when u is small.
double e1_gap(double u, double r) {
    if (u == 0.0) return -std::log(r);
    if (std::max(u, u * r) <= 2.0) return -std::log(r) + ein(u * r) - ein(u);
    return exp_integral_e1(u * r) - exp_integral_e1(u);
}

// E1^{-1}(v) extended past the range of the Newton inverse. Returns 0 on underflow
// and +inf when v is below the smallest representable tail.
double e1_inverse_ext(double v) {
    if (v > 700.0) return std::exp(-v - kEulerGamma);
    if (v < 1e-300) return std::numeric_limits<double>::infinity();
    return exp_integral_e1_inverse(v);
}

void check_x(double x) {
    require(x >= 0.0 && !std::isnan(x), "distortion argument must be nonnegative");
}

void check_exp(const ExpFamilyParams& p) {
    require(p.a > 0 && p.b > 0 && p.c > 0 && p.gamma > 0,
            "exponential distortion needs a, b, c, gamma > 0");
}

void check_bg2bg(const BG2BGParams& p) {
    require(p.base.b_p > 0 && p.base.b_n > 0 && p.base.c_p > 0 && p.base.c_n > 0,
            "BG2BG distortion needs positive base scales and shapes");
    require(p.b_p_upper > 0 && p.b_n_upper > 0, "BG2BG distortion needs positive distorted scales");
}

Slope saturate(double v) {
    if (!(v < kSaturatedSlope)) return {kSaturatedSlope, true};
    return {v, false};
}

}  // namespace

void validate(const ExpFamilyParams& p) {
    check_exp(p);
    require(p.b <= 1.0, "exponential distortion needs b <= 1");
    require(p.gamma < 1.0, "exponential distortion needs gamma < 1");
}

void validate(const BG2BGParams& p) {
    check_bg2bg(p);
    require(p.b_p_upper >= p.base.b_p && p.base.b_p > 0.5 * p.b_p_upper,
            "BG2BG distortion needs b_p_upper >= b_p > b_p_upper / 2");
    require(p.b_n_upper <= p.base.b_n, "BG2BG distortion needs b_n_upper <= b_n");
}

// ---------------------------------------------------------------------------
// exponential family

double exp_gamma_plus(const ExpFamilyParams& p, double x) {
    check_exp(p);
    check_x(x);
    return p.a * std::pow(-std::expm1(-p.c * x), 1.0 / (1.0 + p.gamma));
}

double exp_gamma_minus(const ExpFamilyParams& p, double x) {
    check_exp(p);
    check_x(x);
    return p.b / p.c * -std::expm1(-p.c * x);
}

Slope exp_gamma_plus_slope(const ExpFamilyParams& p, double x) {
    check_exp(p);
    check_x(x);
    if (x == 0.0) return {kSaturatedSlope, true};
    double e = std::exp(-p.c * x);
    double base = -std::expm1(-p.c * x);
    return saturate(p.a * p.c / (1.0 + p.gamma) * std::pow(base, -p.gamma / (1.0 + p.gamma)) * e);
}

Slope exp_gamma_minus_slope(const ExpFamilyParams& p, double x) {
    check_exp(p);
    check_x(x);
    return {p.b * std::exp(-p.c * x), false};
}

// ---------------------------------------------------------------------------
// BG2BG

double bg2bg_upsilon_plus(const BG2BGParams& p, double x) {
    check_bg2bg(p);
    check_x(x);
    if (x == 0.0) return 0.0;
    double u = e1_inverse_ext(x / p.base.c_p);
    if (std::isinf(u)) return 0.0;
    return p.base.c_p * e1_gap(u, p.base.b_p / p.b_p_upper);
}

double bg2bg_upsilon_minus(const BG2BGParams& p, double x) {
    check_bg2bg(p);
    check_x(x);
    if (x == 0.0) return 0.0;
    double u = e1_inverse_ext(x / p.base.c_n);
    if (std::isinf(u)) return x;
    return -p.base.c_n * e1_gap(u, p.base.b_n / p.b_n_upper);
}

Slope bg2bg_upsilon_plus_slope(const BG2BGParams& p, double x) {
    check_bg2bg(p);
    check_x(x);
    double r = p.base.b_p / p.b_p_upper;
    double u = x == 0.0 ? std::numeric_limits<double>::infinity() : e1_inverse_ext(x / p.base.c_p);
    if (std::isinf(u)) return r < 1.0 ? Slope{kSaturatedSlope, true} : Slope{r > 1.0 ? -1.0 : 0.0, false};
    return saturate(std::expm1(u * (1.0 - r)));
}

Slope bg2bg_upsilon_minus_slope(const BG2BGParams& p, double x) {
    check_bg2bg(p);
    check_x(x);
    double r = p.base.b_n / p.b_n_upper;
    double u = x == 0.0 ? std::numeric_limits<double>::infinity() : e1_inverse_ext(x / p.base.c_n);
    if (std::isinf(u)) return {r > 1.0 ? 1.0 : (r == 1.0 ? 0.0 : -kSaturatedSlope), r < 1.0};
    double v = -std::expm1(-u * (r - 1.0));
    if (v < -kSaturatedSlope) return {-kSaturatedSlope, true};
    return {v, false};
}

// ---------------------------------------------------------------------------
// pair

MeasureDistortionPair MeasureDistortionPair::identity() { return {}; }

MeasureDistortionPair MeasureDistortionPair::exponential(const ExpFamilyParams& p) {
    check_exp(p);
    MeasureDistortionPair d;
    d.p_ = p;
    return d;
}

MeasureDistortionPair MeasureDistortionPair::bg2bg(const BG2BGParams& p) {
    check_bg2bg(p);
    MeasureDistortionPair d;
    d.p_ = p;
    return d;
}

DistortionFamily MeasureDistortionPair::family() const {
    switch (p_.index()) {
        case 1: return DistortionFamily::exponential;
        case 2: return DistortionFamily::bg2bg;
        default: return DistortionFamily::identity;
    }
}

const ExpFamilyParams& MeasureDistortionPair::exp_params() const {
    if (const auto* p = std::get_if<ExpFamilyParams>(&p_)) return *p;
    throw DomainError("distortion is not of the exponential family");
}

const BG2BGParams& MeasureDistortionPair::bg2bg_params() const {
    if (const auto* p = std::get_if<BG2BGParams>(&p_)) return *p;
    throw DomainError("distortion is not of the BG2BG family");
}

double MeasureDistortionPair::gamma_plus(double x) const {
    switch (p_.index()) {
        case 1: return exp_gamma_plus(std::get<1>(p_), x);
        case 2: return bg2bg_upsilon_plus(std::get<2>(p_), x);
        default: check_x(x); return 0.0;
    }
}

double MeasureDistortionPair::gamma_minus(double x) const {
    switch (p_.index()) {
        case 1: return exp_gamma_minus(std::get<1>(p_), x);
        case 2: return bg2bg_upsilon_minus(std::get<2>(p_), x);
        default: check_x(x); return 0.0;
    }
}

Slope MeasureDistortionPair::slope_plus(double x) const {
    switch (p_.index()) {
        case 1: return exp_gamma_plus_slope(std::get<1>(p_), x);
        case 2: return bg2bg_upsilon_plus_slope(std::get<2>(p_), x);
        default: check_x(x); return {};
    }
}

Slope MeasureDistortionPair::slope_minus(double x) const {
    switch (p_.index()) {
        case 1: return exp_gamma_minus_slope(std::get<1>(p_), x);
        case 2: return bg2bg_upsilon_minus_slope(std::get<2>(p_), x);
        default: check_x(x); return {};
    }
}

MeasureDistortionPair rebate_family_distortion(double c, double gamma) {
    require(c > 0, "rebate family needs c > 0");
    return MeasureDistortionPair::exponential({1.0 / c, 1.0, c, gamma});
}

// ---------------------------------------------------------------------------
// validation

std::vector<double> log_grid(double lo, double hi, std::size_t n) {
    require(lo > 0 && hi > lo && n >= 2, "log grid needs 0 < lo < hi and n >= 2");
    std::vector<double> g(n);
    double s = std::log(hi / lo) / static_cast<double>(n - 1);
    for (std::size_t k = 0; k < n; ++k) g[k] = lo * std::exp(s * static_cast<double>(k));
    g.back() = hi;
    return g;
}

std::vector<double> default_distortion_grid() { return log_grid(1e-8, 1e8, 801); }

DistortionReport validate_distortion(const MeasureDistortionPair& pair, const std::vector<double>& grid) {
    DistortionReport rep;
    if (grid.size() < 3) {
        rep.failures.push_back("grid needs at least 3 points");
        return rep;
    }
    auto fail = [&](bool& flag, const std::string& msg) {
        if (flag) rep.failures.push_back(msg);
        flag = false;
    };

    for (int side = 0; side < 2; ++side) {
        auto G = [&](double x) { return side == 0 ? pair.gamma_plus(x) : pair.gamma_minus(x); };
        const std::string name = side == 0 ? "Gamma_+" : "Gamma_-";
        if (G(0.0) != 0.0) fail(rep.monotone, name + "(0) != 0");

        std::vector<double> v(grid.size());
        for (std::size_t k = 0; k < grid.size(); ++k) v[k] = G(grid[k]);
        for (std::size_t k = 0; k < grid.size(); ++k) {
            if (!std::isfinite(v[k])) fail(rep.bounded, name + " not finite at x=" + std::to_string(grid[k]));
            if (v[k] < 0.0) fail(rep.monotone, name + " negative at x=" + std::to_string(grid[k]));
            if (k > 0 && v[k] < v[k - 1] - 1e-12 * (1.0 + std::abs(v[k])))
                fail(rep.monotone, name + " decreases near x=" + std::to_string(grid[k]));
        }
        // slope differences scaled by the local spacing, in units of Gamma
        for (std::size_t k = 0; k + 2 < grid.size(); ++k) {
            double s0 = (v[k + 1] - v[k]) / (grid[k + 1] - grid[k]);
            double s1 = (v[k + 2] - v[k + 1]) / (grid[k + 2] - grid[k + 1]);
            double d2 = (s1 - s0) * 0.5 * (grid[k + 2] - grid[k]);
            if (d2 > 1e-8 * (1.0 + std::abs(v[k + 1])))
                fail(rep.concave, name + " not concave near x=" + std::to_string(grid[k + 1]));
        }
        double top = v.back(), prev = G(grid.back() / 10.0);
        if (top - prev > 1e-6 * (1.0 + std::abs(top)))
            fail(rep.bounded, name + " still growing at the top of the grid");

        // Integral of Gamma(y)/(2 y^{3/2}) on a log grid, y dy-weighted trapezoid.
        auto yg = log_grid(1e-10, 1e6, 2001);
        double sum = 0.0, prev_f = 0.0;
        double h = std::log(yg[1] / yg[0]);
        for (std::size_t k = 0; k < yg.size(); ++k) {
            double f = G(yg[k]) / (2.0 * std::sqrt(yg[k]));
            if (k > 0) sum += 0.5 * h * (f + prev_f);
            prev_f = f;
            if (sum > 1e8 || !std::isfinite(sum)) {
                fail(rep.integral_finite, name + " integral condition diverges");
                break;
            }
        }
        rep.integral_value += sum;
        // A power law Gamma(y) ~ y^alpha at 0 makes the integral diverge iff alpha <= 1/2.
        // The exponent is probed far below the grid so that logarithmic factors have died out.
        double g_lo = G(1e-200), g_hi = G(1e-190);
        if (g_lo > 0.0 && g_hi > 0.0) {
            double alpha = std::log(g_hi / g_lo) / std::log(1e10);
            rep.small_x_exponent = side == 0 ? alpha : std::min(rep.small_x_exponent, alpha);
            if (alpha <= 0.51) fail(rep.integral_finite, name + " integral condition diverges at 0");
        } else if (side == 0) {
            rep.small_x_exponent = std::numeric_limits<double>::infinity();
        }
    }

    for (double x : grid)
        if (pair.gamma_minus(x) > x * (1.0 + 1e-12)) {
            fail(rep.minus_below_identity, "Gamma_-(x) > x at x=" + std::to_string(x));
            break;
        }
    return rep;
}

// ---------------------------------------------------------------------------
// JSON

void to_json(nlohmann::json& j, const BGParams& p) {
    j = {{"b_p", p.b_p}, {"c_p", p.c_p}, {"b_n", p.b_n}, {"c_n", p.c_n}};
}

void from_json(const nlohmann::json& j, BGParams& p) {
    p = BGParams{j.at("b_p").get<double>(), j.at("c_p").get<double>(), j.at("b_n").get<double>(),
                 j.at("c_n").get<double>()};
    validate(p);
}

void to_json(nlohmann::json& j, const MeasureDistortionPair& d) {
    switch (d.family()) {
        case DistortionFamily::identity:
            j = {{"family", "identity"}};
            break;
        case DistortionFamily::exponential: {
            const auto& p = d.exp_params();
            j = {{"family", "exponential"}, {"a", p.a}, {"b", p.b}, {"c", p.c}, {"gamma", p.gamma}};
            break;
        }
        case DistortionFamily::bg2bg: {
            const auto& p = d.bg2bg_params();
            j = {{"family", "bg2bg"}, {"base", p.base}, {"b_p_upper", p.b_p_upper}, {"b_n_upper", p.b_n_upper}};
            break;
        }
    }
}

void from_json(const nlohmann::json& j, MeasureDistortionPair& d) {
    std::string fam = j.at("family").get<std::string>();
    if (fam == "identity") {
        d = MeasureDistortionPair::identity();
    } else if (fam == "exponential") {
        d = MeasureDistortionPair::exponential({j.at("a").get<double>(), j.at("b").get<double>(),
                                                j.at("c").get<double>(), j.at("gamma").get<double>()});
    } else if (fam == "bg2bg") {
        d = MeasureDistortionPair::bg2bg(
            {j.at("base").get<BGParams>(), j.at("b_p_upper").get<double>(), j.at("b_n_upper").get<double>()});
    } else {
        throw DomainError("unknown distortion family '" + fam + "'");
    }
}

}  // namespace spectral
