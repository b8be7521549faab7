#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "spectral/distortions.hpp"
#include "spectral/levy_models.hpp"
#include "spectral/optimize.hpp"
#include "spectral/pricing.hpp"

namespace spectral {

// ---------------------------------------------------------------------------
// data

struct ReturnSeries {
    std::vector<std::string> dates;
    std::vector<double> close;

    std::size_t size() const { return close.size(); }
    std::vector<double> log_returns() const;
    // close_t maximum / minimum over the last `span` closes, defined from index span-1 on
    std::vector<double> upper(int span = 5) const;
    std::vector<double> lower(int span = 5) const;
    // rows [first, first + n)
    ReturnSeries slice(std::size_t first, std::size_t n) const;
};

// Throws on non-positive prices, duplicated or decreasing dates. Rows with a missing
// price are dropped and reported in `warnings` when given.
void validate(const ReturnSeries& s);
ReturnSeries read_series_csv(std::istream& is, std::vector<std::string>* warnings = nullptr);
ReturnSeries read_series_csv(const std::string& path, std::vector<std::string>* warnings = nullptr);
void write_series_csv(const ReturnSeries& s, std::ostream& os);

struct OptionQuote {
    double maturity = 0.0;  // in the time unit of the BG parameters
    double strike = 0.0;
    bool is_call = true;
    double bid = 0.0;
    double ask = 0.0;
};

struct OptionChain {
    std::string date;
    double spot = 0.0;
    double rate = 0.0;  // per time unit
    std::vector<OptionQuote> quotes;
};

void validate(const OptionChain& c);
// CSV date,spot,expiry,strike,flag,bid,ask. expiry is a maturity in the parameters'
// time unit or an ISO date, which is turned into a count of weekdays after `date`.
OptionChain read_chain_csv(std::istream& is, double rate = 0.0);
OptionChain read_chain_csv(const std::string& path, double rate = 0.0);
void write_chain_csv(const OptionChain& c, std::ostream& os);

// ---------------------------------------------------------------------------
// results

struct EstimationResult {
    std::string method;  // gmm, dm, calibration, bg_digital
    std::optional<ExpFamilyParams> distortion;
    std::optional<BG2BGParams> bg2bg;
    std::optional<BGParams> bg;
    double objective = 0.0;
    int iterations = 0;
    bool converged = false;
    double rc_upper = 0.0;  // implied risk charges per time unit
    double rc_lower = 0.0;
    std::vector<double> history;  // best objective per optimizer iteration

    MeasureDistortionPair pair() const;
    // (c, gamma, a, b), (b_p_upper, b_n_upper) or (b_p, c_p, b_n, c_n)
    std::vector<double> point() const;
};

void to_json(nlohmann::json& j, const EstimationResult& r);

struct EstimationOptions {
    JumpGridOptions grid{.eps = 1e-5, .nodes_per_side = 300};
    FourierSpec fourier{.n_points = 1u << 11};
    NelderMeadOptions nm{};
    ExpFamilyParams start{.a = 1e-3, .b = 0.9, .c = 10.0, .gamma = 0.4};
};

// ---------------------------------------------------------------------------
// estimators on upper / lower price proxies

// Moment conditions (1/N) sum (R_i - mu^U) (U_i / mean U)^h and the lower analogue,
// R_i = U_{i+1}/U_i - 1, mu^U = mu - RC^U, mu^L = mu + RC^L; identity weighting.
EstimationResult gmm_estimate_ul(const std::vector<double>& upper, const std::vector<double>& lower,
                                 const BGParams& p, const std::vector<int>& orders = {1, 2},
                                 const EstimationOptions& opt = {});
// Last `window` days of the 5-day max / min proxies.
EstimationResult gmm_estimate(const ReturnSeries& s, int window, const BGParams& p,
                              const std::vector<int>& orders = {1, 2}, const EstimationOptions& opt = {});

// Daily log returns of U are modelled as X^U_1 - 2 RC^U with X^U the jump process under
// kappa (1 + psi^U): the shape of Q^U with mean growth e^{mu^U}, the drift matched by GMM.
// L likewise with X^L_1 + 2 RC^L. Anderson-Darling weighted squared error at the
// empirical tail quantiles.
std::vector<double> default_tail_points();  // 0.1, 0.2, 0.3, 0.7, 0.8, 0.9
EstimationResult dm_estimate_ul(const std::vector<double>& upper, const std::vector<double>& lower,
                                const BGParams& p, const std::vector<double>& tail_points = default_tail_points(),
                                const EstimationOptions& opt = {});
EstimationResult dm_estimate(const ReturnSeries& s, int window, const BGParams& p,
                             const std::vector<double>& tail_points = default_tail_points(),
                             const EstimationOptions& opt = {});

// Model CDF of the daily U (dir=upper) or L log return at the given points.
std::vector<double> dm_model_cdf(const MonotoneGrid& g, const MeasureDistortionPair& pair, Direction dir,
                                 const std::vector<double>& x, const FourierSpec& fourier);

enum class EstimationMethod { gmm, dm };

// One estimation per day from day `window` on (every `step` days), each on the
// trailing window. Items are independent.
struct DatedEstimate {
    std::string date;
    EstimationResult result;
};
std::vector<DatedEstimate> rolling_estimate(const ReturnSeries& s, int window, int step, EstimationMethod method,
                                            const BGParams& p, const EstimationOptions& opt = {});
void write_estimates_csv(const std::vector<DatedEstimate>& e, std::ostream& os);

// ---------------------------------------------------------------------------
// option calibration

enum class CalibrationFamily { exponential, bg2bg };

struct CalibrationOptions {
    CalibrationFamily family = CalibrationFamily::exponential;
    bool calibrate_bg = false;  // also free the four BG parameters
    JumpGridOptions grid{.eps = 1e-5, .nodes_per_side = 400};
    FourierSpec fourier{.n_points = 1u << 12};
    NelderMeadOptions nm{.max_iter = 400};
};

struct ModelQuote {
    double bid = 0.0;
    double ask = 0.0;
};

// Model ask = upper price, model bid = lower price, Y_0 = chain spot.
std::vector<ModelQuote> model_quotes(const OptionChain& chain, const BGParams& p,
                                     const MeasureDistortionPair& pair, const JumpGridOptions& grid = {},
                                     const FourierSpec& fourier = {});

EstimationResult calibrate_spreads(const OptionChain& chain, const BGParams& p0, const MeasureDistortionPair& pair0,
                                   const CalibrationOptions& opt = {});

// ---------------------------------------------------------------------------
// BG parameters from tail probabilities

std::vector<double> default_bg_quantiles();
EstimationResult estimate_bg_digital_returns(const std::vector<double>& log_returns,
                                             const EstimationOptions& opt = {});
BGParams estimate_bg_digital(const ReturnSeries& s, int window, const EstimationOptions& opt = {});

// ---------------------------------------------------------------------------
// quantization

struct QuantizedPoint {
    std::vector<double> center;
    double weight = 0.0;  // share of results in the cluster
};

// k-means on z-scored result points; centers in original units sorted by weight.
std::vector<QuantizedPoint> quantize_estimates(const std::vector<EstimationResult>& results, int k,
                                               std::uint64_t seed = 1);

}  // namespace spectral
