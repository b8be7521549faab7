#include "spectral/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "spectral/distortions.hpp"
#include "spectral/driver.hpp"
#include "spectral/errors.hpp"
#include "spectral/estimation.hpp"
#include "spectral/levy_models.hpp"
#include "spectral/portfolio.hpp"
#include "spectral/pricing.hpp"

namespace spectral::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void require(bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
}

std::string num(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

// Writes through a temporary file and renames it into place.
fs::path write_file(const RunConfig& c, const std::string& name, const std::string& content) {
    std::error_code ec;
    fs::create_directories(c.out_dir, ec);
    if (ec) throw IoError("cannot create output directory " + c.out_dir.string() + ": " + ec.message());
    fs::path target = c.out_dir / name;
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw IoError("cannot write " + tmp.string());
        os << content;
        if (!os) throw IoError("write failed for " + tmp.string());
    }
    fs::rename(tmp, target, ec);
    if (ec) throw IoError("cannot move " + tmp.string() + " to " + target.string() + ": " + ec.message());
    return target;
}

fs::path write_json(const RunConfig& c, const std::string& name, const json& j) {
    return write_file(c, name, j.dump(2) + "\n");
}

const json& need(const json& b, const std::string& key) {
    if (!b.contains(key)) throw ConfigError("missing field '" + key + "'");
    return b.at(key);
}

double positive(const json& b, const std::string& key, double fallback) {
    double v = b.value(key, fallback);
    require(v > 0.0 && std::isfinite(v), "'" + key + "' must be positive");
    return v;
}

int positive_int(const json& b, const std::string& key, int fallback) {
    int v = b.value(key, fallback);
    require(v > 0, "'" + key + "' must be a positive integer");
    return v;
}

BGParams read_bg(const json& b) { return need(b, "bg").get<BGParams>(); }

// Parses the distortion and runs the structural checks before any computation.
MeasureDistortionPair read_distortion(const json& j) {
    MeasureDistortionPair d = j.get<MeasureDistortionPair>();
    if (d.family() == DistortionFamily::exponential) validate(d.exp_params());
    if (d.family() == DistortionFamily::bg2bg) validate(d.bg2bg_params());
    DistortionReport rep = validate_distortion(d);
    if (!rep.ok()) {
        std::string msg = "distortion fails validation:";
        for (const auto& f : rep.failures) msg += " " + f + ";";
        throw DomainError(msg);
    }
    return d;
}

MeasureDistortionPair read_distortion_block(const json& b) { return read_distortion(need(b, "distortion")); }

JumpGridOptions read_grid(const json& b, JumpGridOptions g) {
    if (!b.contains("grid")) return g;
    const json& j = b.at("grid");
    g.eps = j.value("eps", g.eps);
    g.nodes_per_side = j.value("nodes_per_side", g.nodes_per_side);
    g.trunc_factor = j.value("trunc_factor", g.trunc_factor);
    require(g.eps > 0.0 && g.nodes_per_side >= 10 && g.trunc_factor > 1.0,
            "grid needs eps > 0, nodes_per_side >= 10 and trunc_factor > 1");
    return g;
}

FourierSpec read_fourier(const json& b, FourierSpec f) {
    if (!b.contains("fourier")) return f;
    const json& j = b.at("fourier");
    f.n_points = j.value("n_points", f.n_points);
    f.n_std = j.value("n_std", f.n_std);
    require(f.n_points >= 1024 && (f.n_points & (f.n_points - 1)) == 0,
            "fourier.n_points must be a power of two >= 1024");
    require(f.n_std > 0.0, "fourier.n_std must be positive");
    return f;
}

NelderMeadOptions read_nm(const json& b, NelderMeadOptions nm) {
    nm.max_iter = b.value("max_iter", nm.max_iter);
    require(nm.max_iter > 0, "'max_iter' must be positive");
    return nm;
}

MBGParams read_mbg(const json& j) {
    MBGParams m;
    m.tilde = need(j, "tilde").get<std::vector<BGParams>>();
    m.zeta = need(j, "zeta").get<double>();
    const std::size_t d = m.tilde.size();
    if (j.contains("corr")) {
        auto rows = j.at("corr").get<std::vector<std::vector<double>>>();
        require(rows.size() == d, "mbg.corr must be d x d");
        m.corr.resize(d, d);
        for (std::size_t i = 0; i < d; ++i) {
            require(rows[i].size() == d, "mbg.corr must be d x d");
            for (std::size_t k = 0; k < d; ++k) m.corr(i, k) = rows[i][k];
        }
    } else {
        double rho = j.value("rho", 0.0);
        m.corr = Eigen::MatrixXd::Constant(d, d, rho);
        m.corr.diagonal().setOnes();
    }
    validate(m);
    return m;
}

json read_json_file(const fs::path& p) {
    std::ifstream is(p);
    if (!is) throw IoError("cannot read " + p.string());
    try {
        return json::parse(is);
    } catch (const json::parse_error& e) {
        throw ConfigError(p.string() + " is not valid JSON: " + e.what());
    }
}

// "mbg" is an inline object or the path of a JSON file holding one.
PortfolioSpec read_portfolio_spec(const RunConfig& c, const json& b) {
    PortfolioSpec s;
    if (b.contains("mbg"))
        s.mbg = read_mbg(b.at("mbg").is_string() ? read_json_file(c.input(b.at("mbg").get<std::string>()))
                                                 : b.at("mbg"));
    else s.assets = need(b, "assets").get<std::vector<BGParams>>();
    if (b.contains("bounds")) {
        const json& j = b.at("bounds");
        s.bounds.lower = j.value("lower", std::vector<double>{});
        s.bounds.leverage = j.value("leverage", 0.0);
    }
    s.horizon = b.value("horizon", 1.0);
    s.r = b.value("r", 0.0);
    s.alpha = b.value("alpha", std::vector<double>{});
    validate(s);
    return s;
}

RebateSpec read_rebate(const json& b, const std::string& key) {
    RebateSpec r = need(b, key).get<RebateSpec>();
    validate(r);
    return r;
}

std::vector<double> read_theta(const json& b, const PortfolioSpec& s, const std::string& key) {
    const std::size_t d = s.dim();
    std::vector<double> th = b.contains(key) ? b.at(key).get<std::vector<double>>()
                                             : std::vector<double>(d, 1.0 / static_cast<double>(d));
    require(th.size() == d, "'" + key + "' needs one weight per asset");
    require(in_box(th, s.bounds), "'" + key + "' lies outside the portfolio bounds");
    return th;
}

// ---------------------------------------------------------------------------
// payoffs in log price

struct PayoffSpec {
    std::string type;
    double strike = 0.0;
    std::vector<std::pair<double, double>> points;  // (spot, value), increasing spots
};

PayoffSpec read_payoff(const json& j) {
    PayoffSpec p;
    p.type = need(j, "type").get<std::string>();
    if (p.type == "call" || p.type == "put" || p.type == "straddle") {
        p.strike = need(j, "strike").get<double>();
        require(p.strike > 0.0 && std::isfinite(p.strike), "payoff.strike must be positive");
    } else if (p.type == "custom") {
        for (const auto& row : need(j, "breakpoints")) {
            auto v = row.get<std::vector<double>>();
            require(v.size() == 2 && v[0] > 0.0 && std::isfinite(v[1]), "breakpoints are [spot > 0, value] pairs");
            p.points.emplace_back(v[0], v[1]);
        }
        require(p.points.size() >= 2, "custom payoff needs at least two breakpoints");
        for (std::size_t k = 1; k < p.points.size(); ++k)
            require(p.points[k].first > p.points[k - 1].first, "breakpoint spots must increase");
    } else {
        throw ConfigError("payoff.type must be call, put, straddle or custom");
    }
    return p;
}

// Piecewise linear in the spot through the breakpoints, extended linearly by the end segments.
double custom_value(const PayoffSpec& p, double s) {
    const auto& v = p.points;
    std::size_t k = 1;
    while (k + 1 < v.size() && s > v[k].first) ++k;
    double w = (s - v[k - 1].first) / (v[k].first - v[k - 1].first);
    return v[k - 1].second + w * (v[k].second - v[k - 1].second);
}

Payoff make_payoff(const PayoffSpec& p) {
    if (p.type == "call") return [k = p.strike](double x) { return std::max(std::exp(x) - k, 0.0); };
    if (p.type == "put") return [k = p.strike](double x) { return std::max(k - std::exp(x), 0.0); };
    if (p.type == "straddle") return [k = p.strike](double x) { return std::abs(std::exp(x) - k); };
    return [p](double x) { return custom_value(p, std::exp(x)); };
}

std::vector<Direction> read_directions(const json& b) {
    std::string d = b.value("direction", std::string("both"));
    if (d == "upper") return {Direction::upper};
    if (d == "lower") return {Direction::lower};
    if (d == "both") return {Direction::upper, Direction::lower};
    throw ConfigError("direction must be upper, lower or both");
}

const char* name_of(Direction d) { return d == Direction::upper ? "upper" : "lower"; }

// Linear interpolation of a density onto a point, zero outside its grid.
double interp(const Density& d, double shift, double x) {
    double q = (x - shift - d.x.front()) / d.dx;
    if (q < 0.0 || q > static_cast<double>(d.x.size() - 1)) return 0.0;
    std::size_t j = std::min(static_cast<std::size_t>(q), d.x.size() - 2);
    double w = q - static_cast<double>(j);
    return (1.0 - w) * d.pdf[j] + w * d.pdf[j + 1];
}

double median(std::vector<double> v) {
    if (v.empty()) return std::nan("");
    std::sort(v.begin(), v.end());
    std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

// ---------------------------------------------------------------------------
// config

json RunConfig::block() const {
    json b = doc.contains(command) ? doc.at(command) : json::object();
    require(b.is_object(), "block '" + command + "' must be an object");
    for (const char* shared : {"bg", "distortion"})
        if (!b.contains(shared) && doc.contains(shared)) b[shared] = doc.at(shared);
    return b;
}

fs::path RunConfig::input(const std::string& rel) const {
    fs::path p(rel);
    if (p.is_relative()) p = config_dir / p;
    if (!fs::exists(p)) throw IoError("input file not found: " + p.string());
    return p;
}

const std::vector<std::string>& commands() {
    static const std::vector<std::string> c{"density",   "pide",      "price",      "estimate",
                                            "calibrate", "portfolio", "rebate_scan"};
    return c;
}

RunConfig load_config(const std::string& command, const fs::path& config, std::uint64_t seed, bool seed_given,
                      const fs::path& out_dir) {
    if (std::find(commands().begin(), commands().end(), command) == commands().end())
        throw ConfigError("unknown command '" + command + "'");
    std::ifstream is(config);
    if (!is) throw IoError("cannot read config " + config.string());
    RunConfig c;
    c.command = command;
    try {
        c.doc = json::parse(is);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    require(c.doc.is_object(), "config must be a JSON object");
    c.config_dir = fs::absolute(config).parent_path();
    c.out_dir = out_dir;
    c.seed = seed;
    c.seed_given = seed_given;
    return c;
}

// ---------------------------------------------------------------------------
// density

std::vector<fs::path> cmd_density(const RunConfig& c) {
    const json b = c.block();
    const BGParams p = read_bg(b);
    const auto pair = read_distortion_block(b);
    const double t = positive(b, "t", 1.0);
    const auto grid = read_grid(b, {.eps = 1e-5, .nodes_per_side = 400});
    const auto fourier = read_fourier(b, {.n_points = 1u << 13});
    const int levy_points = positive_int(b, "levy_points", 200);

    MonotoneGrid g(p, grid);
    const auto identity = MeasureDistortionPair::identity();
    Density d[3] = {density_from_levy(g.distorted_measure(identity, Direction::upper), t, fourier),
                    density_from_levy(g.distorted_measure(pair, Direction::upper), t, fourier),
                    density_from_levy(g.distorted_measure(pair, Direction::lower), t, fourier)};
    // X_t includes the drift of the jumps below the grid cutoff
    double shift[3] = {t * g.small_jump_drift(identity, Direction::upper),
                       t * g.small_jump_drift(pair, Direction::upper),
                       t * g.small_jump_drift(pair, Direction::lower)};

    double lo = 1e300, hi = -1e300, dx = 1e300;
    for (int k = 0; k < 3; ++k) {
        lo = std::min(lo, d[k].x.front() + shift[k]);
        hi = std::max(hi, d[k].x.back() + shift[k]);
        dx = std::min(dx, d[k].dx);
    }
    const std::size_t n = static_cast<std::size_t>(std::ceil((hi - lo) / dx)) + 1;
    std::vector<double> xs(n);
    std::vector<std::vector<double>> cols(3, std::vector<double>(n));
    for (std::size_t j = 0; j < n; ++j) {
        xs[j] = lo + static_cast<double>(j) * dx;
        for (int k = 0; k < 3; ++k) cols[k][j] = interp(d[k], shift[k], xs[j]);
    }
    double mean[3];
    for (int k = 0; k < 3; ++k) {
        double area = 0.0, m1 = 0.0;
        for (std::size_t j = 0; j + 1 < n; ++j) {
            area += 0.5 * dx * (cols[k][j] + cols[k][j + 1]);
            m1 += 0.5 * dx * (xs[j] * cols[k][j] + xs[j + 1] * cols[k][j + 1]);
        }
        if (!(area > 0.0)) throw NumericalError("density: column vanished on the common grid");
        for (double& v : cols[k]) v /= area;
        mean[k] = m1 / area;
    }
    std::ostringstream pdf;
    pdf << "x,pdf_P,pdf_upper,pdf_lower\n";
    for (std::size_t j = 0; j < n; ++j)
        pdf << num(xs[j]) << ',' << num(cols[0][j]) << ',' << num(cols[1][j]) << ',' << num(cols[2][j]) << '\n';

    // log Lévy densities on log-spaced jump sizes of both signs
    const double ymax = 10.0 * std::max(p.b_p, p.b_n);
    auto sizes = log_grid(std::max(grid.eps, 1e-4), ymax, static_cast<std::size_t>(levy_points));
    std::vector<double> ys;
    for (auto it = sizes.rbegin(); it != sizes.rend(); ++it) ys.push_back(-*it);
    ys.insert(ys.end(), sizes.begin(), sizes.end());
    std::ostringstream levy;
    levy << "y,log_kappa,log_kappa_upper,log_kappa_lower\n";
    for (double y : ys) {
        double k = bg_levy_density(p, y);
        double up = k * (1.0 + psi_monotone(p, pair, y, Direction::upper));
        double dn = k * (1.0 + psi_monotone(p, pair, y, Direction::lower));
        auto lg = [](double v) { return v > 0.0 ? std::log(v) : -std::numeric_limits<double>::infinity(); };
        levy << num(y) << ',' << num(lg(k)) << ',' << num(lg(up)) << ',' << num(lg(dn)) << '\n';
    }

    json summary{{"t", t},
                 {"points", n},
                 {"dx", dx},
                 {"mean", {{"P", mean[0]}, {"upper", mean[1]}, {"lower", mean[2]}}},
                 {"bg", p},
                 {"distortion", pair}};
    return {write_file(c, "density.csv", pdf.str()), write_file(c, "levy_density.csv", levy.str()),
            write_json(c, "density.json", summary)};
}

// ---------------------------------------------------------------------------
// PIDE

std::vector<fs::path> cmd_pide(const RunConfig& c) {
    const json b = c.block();
    const BGParams p = read_bg(b);
    const auto pair = read_distortion_block(b);
    const PayoffSpec ps = read_payoff(need(b, "payoff"));
    const double spot = positive(b, "spot", 1.0);
    const double T = positive(b, "T", 1.0);
    const double r = b.value("r", 0.0);
    const int N = positive_int(b, "N", 400);
    const int M = positive_int(b, "M", 50);
    const double n_std = positive(b, "n_std", 12.0);
    const auto dirs = read_directions(b);
    const auto jumps = read_grid(b, pide_jump_options());
    std::string stepping = b.value("stepping", std::string("ssp_rk2"));
    require(stepping == "euler" || stepping == "ssp_rk2", "stepping must be euler or ssp_rk2");
    require(std::isfinite(r), "'r' must be finite");

    PIDEGrid g = pide_grid_around(p, std::log(spot), T, N, M, n_std, r);
    g.stepping = stepping == "euler" ? TimeStepping::euler : TimeStepping::ssp_rk2;
    const Payoff payoff = make_payoff(ps);
    // the stability bound is checked on the payoff row before any time step
    for (Direction d : dirs) {
        double number = pide_stability_number(payoff, p, pair, g, d, jumps);
        if (number > 1.0 + 1e-12) {
            std::ostringstream os;
            os << "PIDE stability violated for " << name_of(d) << ": dt*(coefficient sum) = " << num(number)
               << " > 1; use M >= " << static_cast<long>(std::ceil(M * number));
            throw ConfigError(os.str());
        }
    }

    std::vector<fs::path> files;
    json summary{{"spot", spot}, {"T", T}, {"N", N}, {"M", M}, {"x_min", g.x_min}, {"x_max", g.x_max}};
    for (Direction d : dirs) {
        ValuationSurface s = pide_solve_explicit(payoff, p, pair, g, d, jumps);
        std::ostringstream os;
        write_surface_csv(s, os);
        files.push_back(write_file(c, std::string("surface_") + name_of(d) + ".csv", os.str()));
        summary[name_of(d)] = {{"value_at_spot", s.value_at(std::log(spot), 0)},
                               {"risk_charge_at_spot_t0", s.risk_charge(0, N / 2)},
                               {"max_stability", s.max_stability},
                               {"rows", s.u.size()}};
    }
    files.push_back(write_json(c, "pide.json", summary));
    return files;
}

// ---------------------------------------------------------------------------
// price

std::vector<fs::path> cmd_price(const RunConfig& c) {
    const json b = c.block();
    const BGParams p = read_bg(b);
    const auto pair = read_distortion_block(b);
    const double spot = positive(b, "spot", 1.0);
    const double T = positive(b, "T", 1.0);
    const double r = b.value("r", 0.0);
    const auto strikes = need(b, "strikes").get<std::vector<double>>();
    require(!strikes.empty(), "'strikes' is empty");
    for (double k : strikes) require(k > 0.0 && std::isfinite(k), "strikes must be positive");
    const std::string option = b.value("option", std::string("call"));
    require(option == "call" || option == "put", "option must be call or put");
    PricingOptions opt{.grid = read_grid(b, {.eps = 1e-5, .nodes_per_side = 400}),
                       .fourier = read_fourier(b, {.n_points = 1u << 13})};

    DistortedPricer pricer(p, pair, T, r, spot, opt);
    const bool call = option == "call";
    std::ostringstream os;
    os << "strike,bid_model,ask_model\n";
    json rows = json::array();
    for (double k : strikes) {
        double bid = pricer.price(k, call ? OptionSide::call_lower : OptionSide::put_lower);
        double ask = pricer.price(k, call ? OptionSide::call_upper : OptionSide::put_upper);
        os << num(k) << ',' << num(bid) << ',' << num(ask) << '\n';
        rows.push_back({{"strike", k}, {"bid_model", bid}, {"ask_model", ask}});
    }
    json summary{{"option", option}, {"spot", spot}, {"T", T}, {"r", r}, {"quotes", rows}};
    return {write_file(c, "prices.csv", os.str()), write_json(c, "prices.json", summary)};
}

// ---------------------------------------------------------------------------
// estimate

std::vector<fs::path> cmd_estimate(const RunConfig& c) {
    const json b = c.block();
    const fs::path series_path = c.input(need(b, "series").get<std::string>());
    const std::string method = b.value("method", std::string("gmm"));
    require(method == "gmm" || method == "dm", "method must be gmm or dm");
    const int window = positive_int(b, "window", 252);
    const int step = positive_int(b, "step", 21);
    const int k = b.value("quantize_k", 0);
    require(k >= 0, "'quantize_k' must be nonnegative");
    EstimationOptions opt;
    opt.grid = read_grid(b, opt.grid);
    opt.fourier = read_fourier(b, opt.fourier);
    opt.nm = read_nm(b, opt.nm);
    if (b.contains("start")) {
        const json& s = b.at("start");
        opt.start = {.a = need(s, "a").get<double>(),
                     .b = need(s, "b").get<double>(),
                     .c = need(s, "c").get<double>(),
                     .gamma = need(s, "gamma").get<double>()};
        validate(opt.start);
    }
    std::optional<BGParams> given;
    if (b.contains("bg")) given = read_bg(b);

    std::vector<std::string> warnings;
    ReturnSeries s = read_series_csv(series_path.string(), &warnings);
    require(s.size() >= static_cast<std::size_t>(window) + 1, "series shorter than the window");
    const BGParams p = given ? *given : estimate_bg_digital(s, window, opt);

    auto est = rolling_estimate(s, window, step, method == "gmm" ? EstimationMethod::gmm : EstimationMethod::dm,
                                p, opt);
    std::ostringstream os;
    write_estimates_csv(est, os);
    std::vector<double> up, lo;
    std::vector<EstimationResult> results;
    for (const auto& e : est) {
        up.push_back(e.result.rc_upper);
        lo.push_back(e.result.rc_lower);
        results.push_back(e.result);
    }
    json summary{{"method", method},
                 {"window", window},
                 {"step", step},
                 {"estimates", est.size()},
                 {"bg", p},
                 {"bg_estimated", !given.has_value()},
                 {"median_rc_upper", median(up)},
                 {"median_rc_lower", median(lo)},
                 {"warnings", warnings}};
    if (!est.empty()) summary["last"] = est.back().result;
    if (k > 0 && static_cast<std::size_t>(k) <= results.size()) {
        json q = json::array();
        for (const auto& pt : quantize_estimates(results, k, c.seed))
            q.push_back({{"center", pt.center}, {"weight", pt.weight}});
        summary["quantized"] = q;
    }
    return {write_file(c, "estimates.csv", os.str()), write_json(c, "estimate.json", summary)};
}

// ---------------------------------------------------------------------------
// calibrate

std::vector<fs::path> cmd_calibrate(const RunConfig& c) {
    const json b = c.block();
    const fs::path chain_path = c.input(need(b, "chain").get<std::string>());
    const BGParams p = read_bg(b);
    const auto pair0 = read_distortion_block(b);
    CalibrationOptions opt;
    const std::string fam = b.value("family", std::string("exponential"));
    require(fam == "exponential" || fam == "bg2bg", "family must be exponential or bg2bg");
    opt.family = fam == "exponential" ? CalibrationFamily::exponential : CalibrationFamily::bg2bg;
    require((opt.family == CalibrationFamily::exponential) == (pair0.family() == DistortionFamily::exponential),
            "the start distortion must belong to the calibrated family");
    opt.calibrate_bg = b.value("calibrate_bg", false);
    opt.grid = read_grid(b, opt.grid);
    opt.fourier = read_fourier(b, opt.fourier);
    opt.nm = read_nm(b, opt.nm);
    const double rate = b.value("rate", 0.0);
    require(std::isfinite(rate), "'rate' must be finite");

    OptionChain chain = read_chain_csv(chain_path.string(), rate);
    validate(chain);
    EstimationResult r = calibrate_spreads(chain, p, pair0, opt);
    const BGParams pf = r.bg ? *r.bg : p;
    auto quotes = model_quotes(chain, pf, r.pair(), opt.grid, opt.fourier);
    std::ostringstream os;
    os << "maturity,strike,flag,bid,ask,bid_model,ask_model\n";
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < quotes.size(); ++k) {
        const auto& q = chain.quotes[k];
        os << num(q.maturity) << ',' << num(q.strike) << ',' << (q.is_call ? 'C' : 'P') << ',' << num(q.bid) << ','
           << num(q.ask) << ',' << num(quotes[k].bid) << ',' << num(quotes[k].ask) << '\n';
        worst = std::max(worst, quotes[k].bid - quotes[k].ask);
    }
    json report = r;
    report["bg_used"] = pf;
    report["quotes"] = quotes.size();
    report["max_bid_minus_ask"] = worst;
    return {write_file(c, "calibration_quotes.csv", os.str()), write_json(c, "calibration.json", report)};
}

// ---------------------------------------------------------------------------
// portfolio

std::vector<fs::path> cmd_portfolio(const RunConfig& c) {
    const json b = c.block();
    const PortfolioSpec s = read_portfolio_spec(c, b);
    const std::string mode = b.value("mode", std::string("small_investor"));
    PortfolioOptions po;
    po.grid = read_grid(b, po.grid);
    po.starts = positive_int(b, "starts", po.starts);
    po.nm = read_nm(b, po.nm);
    po.seed = c.seed;

    AllocationResult r;
    json extra;
    if (mode == "small_investor") {
        const auto pair = read_distortion_block(b);
        r = optimal_theta_small_investor(s, pair, po);
        extra["distortion"] = pair;
    } else if (mode == "amount") {
        const RebateSpec rb = read_rebate(b, "rebate");
        AmountOptions ao;
        ao.portfolio = po;
        ao.gamma = b.value("gamma", ao.gamma);
        require(ao.gamma > 0.0 && ao.gamma < 1.0, "'gamma' must lie in (0, 1)");
        ao.rounds = positive_int(b, "rounds", ao.rounds);
        const auto theta0 = read_theta(b, s, "theta0");
        const double varpi0 = positive(b, "varpi0", 1e3);
        r = optimal_amount_and_weights(s, rb, theta0, varpi0, ao);
        extra["rebate"] = rb;
        extra["gamma"] = ao.gamma;
    } else if (mode == "myopic") {
        require(s.dim() == 1 && !s.mbg, "myopic mode takes exactly one BG asset");
        const MyopicObjective o = myopic_objective_from_string(need(b, "objective").get<std::string>());
        MyopicParams prm;
        if (b.contains("pd_rebate")) prm.pd_rebate = read_rebate(b, "pd_rebate");
        if (b.contains("md_rebate")) prm.md_rebate = read_rebate(b, "md_rebate");
        prm.md_gamma = b.value("md_gamma", prm.md_gamma);
        prm.epsilon = positive(b, "epsilon", prm.epsilon);
        prm.eta = positive(b, "eta", prm.eta);
        require(prm.md_gamma > 0.0 && prm.md_gamma < 1.0, "'md_gamma' must lie in (0, 1)");
        prm.grid = read_grid(b, prm.grid);
        prm.fourier = read_fourier(b, prm.fourier);
        const double varpi = positive(b, "varpi", 1e3);
        r = myopic_allocate(o, s.assets.front(), s.r, s.horizon, varpi, prm);
        extra["objective"] = to_string(o);
        extra["varpi"] = varpi;
    } else {
        throw ConfigError("mode must be small_investor, amount or myopic");
    }
    json j = r;
    j["mode"] = mode;
    j["drift"] = portfolio_drift(r.theta_star, s);
    for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
    return {write_json(c, "allocation.json", j)};
}

// ---------------------------------------------------------------------------
// rebate scan

std::vector<fs::path> cmd_rebate_scan(const RunConfig& c) {
    const json b = c.block();
    const PortfolioSpec s = read_portfolio_spec(c, b);
    const RebateSpec rb = read_rebate(b, "rebate");
    const double gamma = b.value("gamma", 0.01);
    require(gamma > 0.0 && gamma < 1.0, "'gamma' must lie in (0, 1)");
    const auto theta = read_theta(b, s, "theta");
    const double vmin = b.value("varpi_min", 0.0);
    const double vmax = positive(b, "varpi_max", 1e7);
    const int points = positive_int(b, "points", 200);
    const std::string scale = b.value("scale", std::string("linear"));
    require(scale == "linear" || scale == "log", "scale must be linear or log");
    require(vmin >= 0.0 && vmin < vmax, "need 0 <= varpi_min < varpi_max");
    require(scale == "linear" || vmin > 0.0, "a log scan needs varpi_min > 0");
    require(points >= 3, "'points' must be at least 3");
    const auto grid = read_grid(b, portfolio_grid_options());

    std::vector<double> w(points), v(points), cs(points);
    for (int i = 0; i < points; ++i) {
        double u = static_cast<double>(i) / (points - 1);
        w[i] = scale == "linear" ? vmin + u * (vmax - vmin) : vmin * std::pow(vmax / vmin, u);
        auto r = rebated_portfolio_variation(theta, w[i], s, rb, gamma, grid);
        v[i] = r.value;
        cs[i] = r.c_star;
    }
    std::size_t arg = static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
    double scale_v = 0.0;
    for (double x : v) scale_v = std::max(scale_v, std::abs(x));
    // slopes must not increase on a concave scan
    double worst = -std::numeric_limits<double>::infinity();
    for (int i = 1; i + 1 < points; ++i) {
        double s1 = (v[i] - v[i - 1]) / (w[i] - w[i - 1]);
        double s2 = (v[i + 1] - v[i]) / (w[i + 1] - w[i]);
        worst = std::max(worst, (s2 - s1) * 0.5 * (w[i + 1] - w[i - 1]));
    }
    const bool interior = arg > 0 && arg + 1 < static_cast<std::size_t>(points) && v[arg] > 0.0;
    std::ostringstream os;
    os << "varpi,rebated_variation,c_star\n";
    for (int i = 0; i < points; ++i) os << num(w[i]) << ',' << num(v[i]) << ',' << num(cs[i]) << '\n';
    json summary{{"theta", theta},
                 {"rebate", rb},
                 {"gamma", gamma},
                 {"argmax_varpi", w[arg]},
                 {"max_value", v[arg]},
                 {"c_star_at_max", cs[arg]},
                 {"interior_max", interior},
                 {"max_second_difference", worst},
                 {"concave", worst <= 1e-9 * std::max(scale_v, 1e-300)},
                 {"drift", portfolio_drift(theta, s)}};
    return {write_file(c, "rebate_scan.csv", os.str()), write_json(c, "rebate_scan.json", summary)};
}

std::vector<fs::path> dispatch(const RunConfig& c) {
    static const std::map<std::string, std::vector<fs::path> (*)(const RunConfig&)> table{
        {"density", cmd_density},     {"pide", cmd_pide},           {"price", cmd_price},
        {"estimate", cmd_estimate},   {"calibrate", cmd_calibrate}, {"portfolio", cmd_portfolio},
        {"rebate_scan", cmd_rebate_scan}};
    auto it = table.find(c.command);
    if (it == table.end()) throw ConfigError("unknown command '" + c.command + "'");
    return it->second(c);
}

// ---------------------------------------------------------------------------
// exit policy

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const fs::filesystem_error*>(&e)) return kExitIo;
    if (dynamic_cast<const DomainError*>(&e) || dynamic_cast<const ConfigError*>(&e) ||
        dynamic_cast<const json::exception*>(&e))
        return kExitValidation;
    return kExitNumerical;
}

json error_json(const std::exception& e) {
    int code = exit_code_for(e);
    const char* kind = code == kExitIo ? "io" : code == kExitValidation ? "validation" : "numerical";
    return {{"error", {{"exit_code", code}, {"kind", kind}, {"message", e.what()}}}};
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Spectral valuation, estimation and allocation runs", "specval"};
    std::string command, config, out_dir = ".";
    std::uint64_t seed = 1;
    app.add_option("command", command, "one of density, pide, price, estimate, calibrate, portfolio, rebate_scan")
        ->required();
    app.add_option("--config", config, "JSON run configuration")->required();
    auto* seed_opt = app.add_option("--seed", seed, "seed for randomised starts and clustering");
    app.add_option("--out", out_dir, "output directory");
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << json{{"error", {{"exit_code", kExitValidation}, {"kind", "validation"}, {"message", e.what()}}}}.dump()
            << '\n';
        return kExitValidation;
    }
    try {
        RunConfig c = load_config(command, config, seed, seed_opt->count() > 0, out_dir);
        auto files = dispatch(c);
        json done{{"command", command}, {"files", json::array()}};
        for (const auto& f : files) done["files"].push_back(f.string());
        out << done.dump() << '\n';
        return kExitOk;
    } catch (const std::exception& e) {
        err << error_json(e).dump() << '\n';
        return exit_code_for(e);
    }
}

}  // namespace spectral::cli
