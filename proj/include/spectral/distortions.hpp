#pragma once

#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "spectral/levy_models.hpp"

namespace spectral {

// Gamma_+(x) = a (1 - e^{-cx})^{1/(1+gamma)},  Gamma_-(x) = (b/c)(1 - e^{-cx}).
struct ExpFamilyParams {
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;
    double gamma = 0.0;
};

// Distortion carrying BG(b_p, c_p, b_n, c_n) to BG(b_p_upper, c_p, b_n_upper, c_n).
struct BG2BGParams {
    BGParams base;
    double b_p_upper = 0.0;
    double b_n_upper = 0.0;
};

// Admissible boxes: a, c > 0, 0 < b <= 1, 0 < gamma < 1; b_p_upper >= b_p > b_p_upper/2,
// 0 < b_n_upper <= b_n. Throws DomainError.
void validate(const ExpFamilyParams& p);
void validate(const BG2BGParams& p);

enum class DistortionFamily { identity, exponential, bg2bg };

// Derivative values at points where the true slope is infinite are capped here.
inline constexpr double kSaturatedSlope = 1e30;

struct Slope {
    double value = 0.0;
    bool saturated = false;
};

// Pair (Gamma_+, Gamma_-) on [0, inf). Construction only requires the
// parameters to make the formulas well defined; the structural properties are
// checked by validate_distortion.
class MeasureDistortionPair {
public:
    MeasureDistortionPair() = default;
    static MeasureDistortionPair identity();
    static MeasureDistortionPair exponential(const ExpFamilyParams& p);
    static MeasureDistortionPair bg2bg(const BG2BGParams& p);

    DistortionFamily family() const;
    const ExpFamilyParams& exp_params() const;
    const BG2BGParams& bg2bg_params() const;

    double gamma_plus(double x) const;
    double gamma_minus(double x) const;
    Slope slope_plus(double x) const;
    Slope slope_minus(double x) const;
    double d_plus(double x) const { return slope_plus(x).value; }
    double d_minus(double x) const { return slope_minus(x).value; }

private:
    std::variant<std::monostate, ExpFamilyParams, BG2BGParams> p_;
};

double exp_gamma_plus(const ExpFamilyParams& p, double x);
double exp_gamma_minus(const ExpFamilyParams& p, double x);
Slope exp_gamma_plus_slope(const ExpFamilyParams& p, double x);
Slope exp_gamma_minus_slope(const ExpFamilyParams& p, double x);

double bg2bg_upsilon_plus(const BG2BGParams& p, double x);
double bg2bg_upsilon_minus(const BG2BGParams& p, double x);
Slope bg2bg_upsilon_plus_slope(const BG2BGParams& p, double x);
Slope bg2bg_upsilon_minus_slope(const BG2BGParams& p, double x);

// Exponential pair with a = 1/c, b = 1 at distortion level c.
MeasureDistortionPair rebate_family_distortion(double c, double gamma);

struct DistortionReport {
    bool monotone = true;
    bool concave = true;
    bool bounded = true;
    bool minus_below_identity = true;
    bool integral_finite = true;
    double integral_value = 0.0;       // sum of both sides over the probe range
    double small_x_exponent = 0.0;     // smaller local power of Gamma_+-, Gamma_- near 0
    std::vector<std::string> failures;

    bool ok() const { return failures.empty(); }
};

// Log-spaced grid on [lo, hi].
std::vector<double> log_grid(double lo, double hi, std::size_t n);
std::vector<double> default_distortion_grid();

DistortionReport validate_distortion(const MeasureDistortionPair& pair,
                                     const std::vector<double>& grid = default_distortion_grid());

void to_json(nlohmann::json& j, const BGParams& p);
void from_json(const nlohmann::json& j, BGParams& p);
void to_json(nlohmann::json& j, const MeasureDistortionPair& d);
void from_json(const nlohmann::json& j, MeasureDistortionPair& d);

}  // namespace spectral
