#include "spectral/estimation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>

#include "spectral/errors.hpp"

namespace spectral {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        auto b = cell.find_first_not_of(" \t\r");
        auto e = cell.find_last_not_of(" \t\r");
        out.push_back(b == std::string::npos ? std::string{} : cell.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

bool parse_double(const std::string& s, double& v) {
    if (s.empty()) return false;
    char* end = nullptr;
    v = std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size() && std::isfinite(v);
}

std::optional<std::chrono::sys_days> parse_iso(const std::string& s) {
    int y, m, d;
    char c1, c2;
    std::istringstream ss(s);
    if (!(ss >> y >> c1 >> m >> c2 >> d) || c1 != '-' || c2 != '-' || !ss.eof()) return std::nullopt;
    std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
                                    std::chrono::day{static_cast<unsigned>(d)}};
    if (!ymd.ok()) return std::nullopt;
    return std::chrono::sys_days{ymd};
}

int weekdays_between(std::chrono::sys_days from, std::chrono::sys_days to) {
    int n = 0;
    for (auto d = from + std::chrono::days{1}; d <= to; d += std::chrono::days{1}) {
        auto wd = std::chrono::weekday{d};
        if (wd != std::chrono::Saturday && wd != std::chrono::Sunday) ++n;
    }
    return n;
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

double variance(const std::vector<double>& v) {
    double m = mean(v), s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / (v.size() - 1);
}

double empirical_quantile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    double h = (v.size() - 1) * q;
    std::size_t i = static_cast<std::size_t>(std::floor(h));
    if (i + 1 >= v.size()) return v.back();
    return v[i] + (h - i) * (v[i + 1] - v[i]);
}

double empirical_cdf(const std::vector<double>& sorted, double x) {
    return static_cast<double>(std::upper_bound(sorted.begin(), sorted.end(), x) - sorted.begin()) / sorted.size();
}

// CDF of a density on its grid, linear between nodes.
std::vector<double> density_cdf(const Density& d, const std::vector<double>& x) {
    std::vector<double> cum(d.pdf.size());
    double acc = 0.0;
    for (std::size_t j = 0; j < d.pdf.size(); ++j) {
        acc += 0.5 * d.pdf[j] * d.dx;
        cum[j] = acc;
        acc += 0.5 * d.pdf[j] * d.dx;
    }
    std::vector<double> out(x.size());
    const double x0 = d.x.front();
    for (std::size_t i = 0; i < x.size(); ++i) {
        double h = (x[i] - x0) / d.dx;
        if (h <= 0) {
            out[i] = 0.0;
        } else if (h >= static_cast<double>(cum.size() - 1)) {
            out[i] = 1.0;
        } else {
            std::size_t j = static_cast<std::size_t>(h);
            double f = h - j;
            out[i] = std::clamp(cum[j] + f * (cum[j + 1] - cum[j]), 0.0, 1.0);
        }
    }
    return out;
}

// Gamma_+ ~ x^{1/(1+gamma)} at 0, so the integral condition needs gamma < 1; the
// validator's power-law probe keeps a margin, hence the cap below 1.
constexpr double kGammaMax = 0.95;

// Below this c the saturation of Gamma_- lies beyond any practical range of tail masses.
constexpr double kCMin = 1e-5;

const std::vector<Box>& exp_boxes() {
    static const std::vector<Box> b{{kCMin, kInf}, {0.0, kGammaMax}, {0.0, kInf}, {0.0, 1.0}};  // c, gamma, a, b
    return b;
}

std::vector<double> exp_point(const ExpFamilyParams& p) { return {p.c, p.gamma, p.a, p.b}; }

ExpFamilyParams exp_from(std::span<const double> x) { return {.a = x[2], .b = x[3], .c = x[0], .gamma = x[1]}; }

std::vector<double> clamp_into(std::vector<double> x, const std::vector<Box>& box) {
    for (std::size_t i = 0; i < x.size(); ++i) {
        double lo = box[i].lo, hi = box[i].hi;
        double w = std::isfinite(lo) && std::isfinite(hi) ? hi - lo : 1.0;
        if (std::isfinite(lo)) x[i] = std::max(x[i], lo + 1e-6 * w);
        if (std::isfinite(hi)) x[i] = std::min(x[i], hi - 1e-6 * w);
    }
    return x;
}

// Nelder-Mead from each start, restarted from its best point until it stops improving;
// history keeps the running best over all runs.
OptimResult minimize_multistart(const Objective& f, const std::vector<std::vector<double>>& starts,
                                const std::vector<Box>& box, const NelderMeadOptions& nm, int restarts) {
    OptimResult best;
    best.value = kInf;
    std::vector<double> history;
    int iters = 0;
    for (const auto& x0 : starts) {
        auto o = nelder_mead(f, clamp_into(x0, box), box, nm);
        iters += o.iterations;
        auto record = [&](const OptimResult& r) {
            for (double v : r.history) history.push_back(history.empty() ? v : std::min(history.back(), v));
        };
        record(o);
        for (int k = 0; k < restarts; ++k) {
            auto o2 = nelder_mead(f, clamp_into(o.x, box), box, nm);
            iters += o2.iterations;
            record(o2);
            bool stalled = !(o2.value < o.value - 1e-10 * (1.0 + std::abs(o.value)));
            if (o2.value <= o.value) o = o2;
            if (stalled) break;
        }
        if (o.value < best.value) best = o;
    }
    best.iterations = iters;
    best.history = std::move(history);
    return best;
}

void finish(EstimationResult& r, const OptimResult& o) {
    r.objective = o.value;
    r.iterations = o.iterations;
    r.converged = o.converged;
    r.history = o.history;
}

void check_returned_pair(const MeasureDistortionPair& pair) {
    auto rep = validate_distortion(pair);
    if (!rep.ok()) throw InvariantError("estimator returned an inadmissible distortion: " + rep.failures.front());
}

std::vector<double> simple_returns(const std::vector<double>& v) {
    std::vector<double> r(v.size() - 1);
    for (std::size_t i = 0; i + 1 < v.size(); ++i) r[i] = v[i + 1] / v[i] - 1.0;
    return r;
}

std::vector<double> log_returns_of(const std::vector<double>& v) {
    std::vector<double> r(v.size() - 1);
    for (std::size_t i = 0; i + 1 < v.size(); ++i) r[i] = std::log(v[i + 1] / v[i]);
    return r;
}

void check_proxies(const std::vector<double>& upper, const std::vector<double>& lower, std::size_t min_len) {
    if (upper.size() < min_len || lower.size() != upper.size())
        throw DomainError("estimation: upper and lower series need equal length of at least " +
                          std::to_string(min_len));
    for (std::size_t i = 0; i < upper.size(); ++i)
        if (!(upper[i] > 0) || !(lower[i] > 0) || !std::isfinite(upper[i]) || !std::isfinite(lower[i]))
            throw DomainError("estimation: proxies must be positive");
}

}  // namespace

// ---------------------------------------------------------------------------
// data

std::vector<double> ReturnSeries::log_returns() const { return log_returns_of(close); }

std::vector<double> ReturnSeries::upper(int span) const {
    if (span < 1) throw DomainError("upper: span must be positive");
    std::vector<double> out;
    for (std::size_t i = span - 1; i < close.size(); ++i)
        out.push_back(*std::max_element(close.begin() + (i + 1 - span), close.begin() + i + 1));
    return out;
}

std::vector<double> ReturnSeries::lower(int span) const {
    if (span < 1) throw DomainError("lower: span must be positive");
    std::vector<double> out;
    for (std::size_t i = span - 1; i < close.size(); ++i)
        out.push_back(*std::min_element(close.begin() + (i + 1 - span), close.begin() + i + 1));
    return out;
}

ReturnSeries ReturnSeries::slice(std::size_t first, std::size_t n) const {
    if (first + n > size()) throw DomainError("slice: out of range");
    ReturnSeries s;
    s.dates.assign(dates.begin() + first, dates.begin() + first + n);
    s.close.assign(close.begin() + first, close.begin() + first + n);
    return s;
}

void validate(const ReturnSeries& s) {
    if (s.dates.size() != s.close.size()) throw DomainError("series: dates and prices differ in length");
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (!(s.close[i] > 0) || !std::isfinite(s.close[i]))
            throw DomainError("series: non-positive price on " + s.dates[i]);
        if (i > 0 && s.dates[i] == s.dates[i - 1]) throw DomainError("series: duplicated date " + s.dates[i]);
        if (i > 0 && s.dates[i] < s.dates[i - 1]) throw DomainError("series: dates not increasing at " + s.dates[i]);
    }
}

ReturnSeries read_series_csv(std::istream& is, std::vector<std::string>* warnings) {
    ReturnSeries s;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto f = split(line);
        if (lineno == 1 && f.size() >= 2 && f[1] == "close") continue;
        if (f.size() < 2 && !(f.size() == 1 && line.back() == ','))
            throw IoError("series csv: line " + std::to_string(lineno) + " needs date,close");
        double v;
        if (f.size() < 2 || !parse_double(f[1], v)) {
            if (warnings) warnings->push_back("dropped row " + std::to_string(lineno) + " (" + f[0] + "): missing price");
            continue;
        }
        s.dates.push_back(f[0]);
        s.close.push_back(v);
    }
    validate(s);
    return s;
}

ReturnSeries read_series_csv(const std::string& path, std::vector<std::string>* warnings) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open " + path);
    return read_series_csv(f, warnings);
}

void write_series_csv(const ReturnSeries& s, std::ostream& os) {
    os << "date,close\n" << std::setprecision(12);
    for (std::size_t i = 0; i < s.size(); ++i) os << s.dates[i] << ',' << s.close[i] << '\n';
}

void validate(const OptionChain& c) {
    if (!(c.spot > 0) || !std::isfinite(c.spot)) throw DomainError("chain: spot must be positive");
    if (!std::isfinite(c.rate)) throw DomainError("chain: rate must be finite");
    for (const auto& q : c.quotes) {
        if (!(q.strike > 0) || !std::isfinite(q.strike)) throw DomainError("chain: strikes must be positive");
        if (!(q.maturity > 0) || !std::isfinite(q.maturity)) throw DomainError("chain: maturities must be positive");
        if (!(q.bid >= 0) || !(q.ask >= q.bid) || !std::isfinite(q.ask))
            throw DomainError("chain: need 0 <= bid <= ask");
    }
}

OptionChain read_chain_csv(std::istream& is, double rate) {
    OptionChain c;
    c.rate = rate;
    std::string line;
    int lineno = 0;
    bool have_spot = false;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto f = split(line);
        if (lineno == 1 && f.size() >= 2 && f[1] == "spot") continue;
        const std::string where = "chain csv line " + std::to_string(lineno);
        if (f.size() != 7) throw IoError(where + ": expected date,spot,expiry,strike,flag,bid,ask");
        double spot, strike, bid, ask, mat;
        if (!parse_double(f[1], spot) || !parse_double(f[3], strike) || !parse_double(f[5], bid) ||
            !parse_double(f[6], ask))
            throw IoError(where + ": bad number");
        if (!parse_double(f[2], mat)) {
            auto d0 = parse_iso(f[0]);
            auto d1 = parse_iso(f[2]);
            if (!d0 || !d1) throw IoError(where + ": expiry is neither a number nor an ISO date");
            mat = weekdays_between(*d0, *d1);
        }
        std::string flag = f[4];
        std::transform(flag.begin(), flag.end(), flag.begin(), ::tolower);
        bool call;
        if (flag == "c" || flag == "call")
            call = true;
        else if (flag == "p" || flag == "put")
            call = false;
        else
            throw IoError(where + ": flag must be C or P");
        if (!have_spot) {
            c.date = f[0];
            c.spot = spot;
            have_spot = true;
        } else if (f[0] != c.date || spot != c.spot) {
            throw IoError(where + ": one quote date and spot per chain file");
        }
        c.quotes.push_back({mat, strike, call, bid, ask});
    }
    validate(c);
    return c;
}

OptionChain read_chain_csv(const std::string& path, double rate) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open " + path);
    return read_chain_csv(f, rate);
}

void write_chain_csv(const OptionChain& c, std::ostream& os) {
    os << "date,spot,expiry,strike,flag,bid,ask\n" << std::setprecision(12);
    for (const auto& q : c.quotes)
        os << c.date << ',' << c.spot << ',' << q.maturity << ',' << q.strike << ',' << (q.is_call ? 'C' : 'P') << ','
           << q.bid << ',' << q.ask << '\n';
}

// ---------------------------------------------------------------------------
// results

MeasureDistortionPair EstimationResult::pair() const {
    if (distortion) return MeasureDistortionPair::exponential(*distortion);
    if (bg2bg) return MeasureDistortionPair::bg2bg(*bg2bg);
    return MeasureDistortionPair::identity();
}

std::vector<double> EstimationResult::point() const {
    if (distortion) return exp_point(*distortion);
    if (bg2bg) return {bg2bg->b_p_upper, bg2bg->b_n_upper};
    if (bg) return {bg->b_p, bg->c_p, bg->b_n, bg->c_n};
    return {};
}

void to_json(nlohmann::json& j, const EstimationResult& r) {
    j = nlohmann::json{{"method", r.method},          {"objective", r.objective},
                       {"iterations", r.iterations},  {"converged", r.converged},
                       {"rc_upper", r.rc_upper},      {"rc_lower", r.rc_lower}};
    if (r.distortion)
        j["distortion"] = {{"family", "exponential"},
                           {"c", r.distortion->c},
                           {"gamma", r.distortion->gamma},
                           {"a", r.distortion->a},
                           {"b", r.distortion->b}};
    if (r.bg2bg) j["distortion"] = r.pair();
    if (r.bg) j["bg"] = *r.bg;
}

// ---------------------------------------------------------------------------
// GMM

EstimationResult gmm_estimate_ul(const std::vector<double>& upper, const std::vector<double>& lower,
                                 const BGParams& p, const std::vector<int>& orders, const EstimationOptions& opt) {
    validate(p);
    check_proxies(upper, lower, 3);
    if (orders.empty()) throw DomainError("gmm: need at least one moment order");
    for (int h : orders)
        if (h < 1) throw DomainError("gmm: moment orders must be >= 1");

    const MonotoneGrid grid(p, opt.grid);
    auto ru = simple_returns(upper), rl = simple_returns(lower);
    const std::size_t n = ru.size();
    double mu_bar = mean(upper), ml_bar = mean(lower);
    // sample averages of (U_i/mean U)^h and R_i (U_i/mean U)^h; conditions are linear in the model drift
    std::vector<double> su, sru, sl, srl;
    for (int h : orders) {
        double a = 0, b = 0, c = 0, d = 0;
        for (std::size_t i = 0; i < n; ++i) {
            double wu = std::pow(upper[i] / mu_bar, h), wl = std::pow(lower[i] / ml_bar, h);
            a += wu;
            b += ru[i] * wu;
            c += wl;
            d += rl[i] * wl;
        }
        su.push_back(a / n);
        sru.push_back(b / n);
        sl.push_back(c / n);
        srl.push_back(d / n);
    }
    // scaled so that one standard error of a mean return counts as 1
    const double scale = n / (0.5 * (variance(ru) + variance(rl)));

    auto moments = [&](const DriftTriple& d) {
        double eu = std::expm1(d.mu_upper), el = std::expm1(d.mu_lower);
        double s = 0.0;
        for (std::size_t k = 0; k < orders.size(); ++k) {
            double gu = sru[k] - eu * su[k], gl = srl[k] - el * sl[k];
            s += gu * gu + gl * gl;
        }
        return scale * s;
    };
    auto f = [&](std::span<const double> x) {
        return moments(grid.drift_triple(MeasureDistortionPair::exponential(exp_from(x))));
    };
    // GMM evaluations are cheap: the configured start plus a strong-ask and a balanced start
    std::vector<std::vector<double>> starts{exp_point(opt.start), {0.01, 0.25, 100.0, 1.0}, {50.0, 0.45, 0.02, 0.9}};
    auto o = minimize_multistart(f, starts, exp_boxes(), opt.nm, 10);

    EstimationResult r;
    r.method = "gmm";
    r.distortion = exp_from(o.x);
    finish(r, o);
    auto d = grid.drift_triple(r.pair());
    r.rc_upper = d.rc_upper;
    r.rc_lower = d.rc_lower;
    check_returned_pair(r.pair());
    return r;
}

namespace {

void proxies_for_window(const ReturnSeries& s, int window, std::vector<double>& u, std::vector<double>& l) {
    validate(s);
    if (window < 2 || static_cast<std::size_t>(window) + 5 > s.size())
        throw DomainError("estimation: window must be at least 2 and at most the series length minus 5");
    auto U = s.upper(5), L = s.lower(5);
    u.assign(U.end() - (window + 1), U.end());
    l.assign(L.end() - (window + 1), L.end());
}

}  // namespace

EstimationResult gmm_estimate(const ReturnSeries& s, int window, const BGParams& p, const std::vector<int>& orders,
                              const EstimationOptions& opt) {
    std::vector<double> u, l;
    proxies_for_window(s, window, u, l);
    return gmm_estimate_ul(u, l, p, orders, opt);
}

// ---------------------------------------------------------------------------
// digital moments

std::vector<double> default_tail_points() { return {0.1, 0.2, 0.3, 0.7, 0.8, 0.9}; }

std::vector<double> dm_model_cdf(const MonotoneGrid& g, const MeasureDistortionPair& pair, Direction dir,
                                 const std::vector<double>& x, const FourierSpec& fourier) {
    Density d = density_from_levy(g.distorted_measure(pair, dir), 1.0, fourier);
    auto tri = g.drift_triple(pair);
    // E e^{X^U_1} = e^{mu + RC^U}; recentre to the growth rate mu^U = mu - RC^U (L alike)
    double shift = g.small_jump_drift(pair, dir) + (dir == Direction::upper ? -2.0 * tri.rc_upper : 2.0 * tri.rc_lower);
    std::vector<double> xs(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) xs[i] = x[i] - shift;
    return density_cdf(d, xs);
}

EstimationResult dm_estimate_ul(const std::vector<double>& upper, const std::vector<double>& lower,
                                const BGParams& p, const std::vector<double>& tail_points,
                                const EstimationOptions& opt) {
    validate(p);
    check_proxies(upper, lower, 11);
    if (tail_points.empty()) throw DomainError("dm: need tail points");
    for (double q : tail_points)
        if (!(q > 0 && q < 1)) throw DomainError("dm: tail points must lie in (0, 1)");

    const MonotoneGrid grid(p, opt.grid);
    struct Side {
        std::vector<double> x, target;
        Direction dir;
    };
    std::vector<Side> sides;
    const double n = static_cast<double>(upper.size() - 1);
    for (auto [series, dir] : {std::pair{&upper, Direction::upper}, std::pair{&lower, Direction::lower}}) {
        auto r = log_returns_of(*series);
        auto sorted = r;
        std::sort(sorted.begin(), sorted.end());
        Side s{{}, {}, dir};
        for (double q : tail_points) {
            double xq = empirical_quantile(r, q);
            double fe = empirical_cdf(sorted, xq);
            if (fe <= 0.0 || fe >= 1.0) continue;
            s.x.push_back(xq);
            s.target.push_back(fe);
        }
        sides.push_back(std::move(s));
    }

    auto f = [&](std::span<const double> x) {
        auto pair = MeasureDistortionPair::exponential(exp_from(x));
        double obj = 0.0;
        for (const auto& s : sides) {
            auto F = dm_model_cdf(grid, pair, s.dir, s.x, opt.fourier);
            for (std::size_t i = 0; i < F.size(); ++i) {
                double q = s.target[i];
                obj += n * (F[i] - q) * (F[i] - q) / (q * (1.0 - q));
            }
        }
        return obj;
    };
    auto o = nelder_mead(f, clamp_into(exp_point(opt.start), exp_boxes()), exp_boxes(), opt.nm);

    EstimationResult r;
    r.method = "dm";
    r.distortion = exp_from(o.x);
    finish(r, o);
    auto d = grid.drift_triple(r.pair());
    r.rc_upper = d.rc_upper;
    r.rc_lower = d.rc_lower;
    check_returned_pair(r.pair());
    return r;
}

EstimationResult dm_estimate(const ReturnSeries& s, int window, const BGParams& p,
                             const std::vector<double>& tail_points, const EstimationOptions& opt) {
    std::vector<double> u, l;
    proxies_for_window(s, window, u, l);
    return dm_estimate_ul(u, l, p, tail_points, opt);
}

std::vector<DatedEstimate> rolling_estimate(const ReturnSeries& s, int window, int step, EstimationMethod method,
                                            const BGParams& p, const EstimationOptions& opt) {
    validate(s);
    if (step < 1) throw DomainError("rolling_estimate: step must be positive");
    const std::size_t need = static_cast<std::size_t>(window) + 5;
    if (window < 2 || need > s.size()) throw DomainError("rolling_estimate: series shorter than window + 5");
    std::vector<DatedEstimate> out;
    for (std::size_t end = need; end <= s.size(); end += step) {
        auto part = s.slice(end - need, need);
        auto r = method == EstimationMethod::gmm ? gmm_estimate(part, window, p, {1, 2}, opt)
                                                 : dm_estimate(part, window, p, default_tail_points(), opt);
        out.push_back({s.dates[end - 1], std::move(r)});
    }
    return out;
}

void write_estimates_csv(const std::vector<DatedEstimate>& e, std::ostream& os) {
    os << "date,method,c,gamma,a,b,rc_upper,rc_lower,objective,iterations,converged\n" << std::setprecision(10);
    for (const auto& d : e) {
        const auto& r = d.result;
        ExpFamilyParams q = r.distortion.value_or(ExpFamilyParams{});
        os << d.date << ',' << r.method << ',' << q.c << ',' << q.gamma << ',' << q.a << ',' << q.b << ','
           << r.rc_upper << ',' << r.rc_lower << ',' << r.objective << ',' << r.iterations << ','
           << (r.converged ? 1 : 0) << '\n';
    }
}

// ---------------------------------------------------------------------------
// calibration

namespace {

std::vector<ModelQuote> quotes_on_grid(const OptionChain& chain, const MonotoneGrid& g,
                                       const MeasureDistortionPair& pair, const FourierSpec& fourier) {
    std::vector<ModelQuote> out(chain.quotes.size());
    std::map<double, std::vector<std::size_t>> by_t;
    for (std::size_t i = 0; i < chain.quotes.size(); ++i) by_t[chain.quotes[i].maturity].push_back(i);
    for (const auto& [T, idx] : by_t) {
        DistortedPricer pr(g, pair, T, chain.rate, chain.spot, fourier);
        for (std::size_t i : idx) {
            const auto& q = chain.quotes[i];
            out[i].ask = pr.price(q.strike, q.is_call ? OptionSide::call_upper : OptionSide::put_upper);
            out[i].bid = pr.price(q.strike, q.is_call ? OptionSide::call_lower : OptionSide::put_lower);
        }
    }
    return out;
}

}  // namespace

std::vector<ModelQuote> model_quotes(const OptionChain& chain, const BGParams& p, const MeasureDistortionPair& pair,
                                     const JumpGridOptions& grid, const FourierSpec& fourier) {
    validate(chain);
    return quotes_on_grid(chain, MonotoneGrid(p, grid), pair, fourier);
}

EstimationResult calibrate_spreads(const OptionChain& chain, const BGParams& p0, const MeasureDistortionPair& pair0,
                                   const CalibrationOptions& opt) {
    validate(chain);
    validate(p0);
    std::size_t below = 0, above = 0;
    for (const auto& q : chain.quotes) (q.strike < chain.spot ? below : above) += 1;
    if (chain.quotes.size() < 8 || below == 0 || above == 0)
        throw ConfigError("calibrate_spreads: need at least 8 quotes with strikes on both sides of the spot");

    const bool exp_family = opt.family == CalibrationFamily::exponential;
    std::vector<double> x0;
    std::vector<Box> box;
    if (exp_family) {
        ExpFamilyParams s = pair0.family() == DistortionFamily::exponential
                                ? pair0.exp_params()
                                : ExpFamilyParams{.a = 1e-3, .b = 1e-2, .c = 1e-2, .gamma = 0.25};
        x0 = exp_point(s);
        box = exp_boxes();
    } else {
        BG2BGParams s = pair0.family() == DistortionFamily::bg2bg
                            ? pair0.bg2bg_params()
                            : BG2BGParams{p0, 1.05 * p0.b_p, 0.95 * p0.b_n};
        x0 = {s.b_p_upper, s.b_n_upper};
        // boxes follow the base scales; with free BG parameters they are checked in the objective
        box = {{p0.b_p, 2.0 * p0.b_p}, {0.0, p0.b_n}};
    }
    const std::size_t nd = x0.size();
    if (opt.calibrate_bg) {
        x0.insert(x0.end(), {p0.b_p, p0.c_p, p0.b_n, p0.c_n});
        box.insert(box.end(), {{0.0, 1.0}, {0.0, kInf}, {0.0, kInf}, {0.0, kInf}});
    }

    std::optional<MonotoneGrid> fixed;
    if (!opt.calibrate_bg) fixed.emplace(p0, opt.grid);

    auto decode = [&](std::span<const double> x, BGParams& p) {
        p = opt.calibrate_bg ? BGParams{x[nd], x[nd + 1], x[nd + 2], x[nd + 3]} : p0;
        if (exp_family) return MeasureDistortionPair::exponential(exp_from(x));
        BG2BGParams q{p, x[0], x[1]};
        validate(q);
        return MeasureDistortionPair::bg2bg(q);
    };
    auto f = [&](std::span<const double> x) {
        BGParams p;
        auto pair = decode(x, p);
        std::optional<MonotoneGrid> local;
        if (!fixed) local.emplace(p, opt.grid);
        auto m = quotes_on_grid(chain, fixed ? *fixed : *local, pair, opt.fourier);
        double s = 0.0;
        for (std::size_t i = 0; i < m.size(); ++i) {
            double da = m[i].ask - chain.quotes[i].ask, db = m[i].bid - chain.quotes[i].bid;
            s += da * da + db * db;
        }
        return s;
    };
    auto o = nelder_mead(f, clamp_into(x0, box), box, opt.nm);

    EstimationResult r;
    r.method = "calibration";
    BGParams p;
    auto pair = decode(o.x, p);
    if (exp_family)
        r.distortion = pair.exp_params();
    else
        r.bg2bg = pair.bg2bg_params();
    if (opt.calibrate_bg) r.bg = p;
    finish(r, o);
    auto d = MonotoneGrid(p, opt.grid).drift_triple(pair);
    r.rc_upper = d.rc_upper;
    r.rc_lower = d.rc_lower;
    check_returned_pair(pair);
    return r;
}

// ---------------------------------------------------------------------------
// BG from tail probabilities

std::vector<double> default_bg_quantiles() {
    return {0.01, 0.025, 0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 0.8, 0.9, 0.95, 0.975, 0.99};
}

EstimationResult estimate_bg_digital_returns(const std::vector<double>& r, const EstimationOptions& opt) {
    if (r.size() < 60) throw DomainError("estimate_bg_digital: need at least 60 returns");
    for (double x : r)
        if (!std::isfinite(x)) throw DomainError("estimate_bg_digital: returns must be finite");
    auto sorted = r;
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> xs, target;
    for (double q : default_bg_quantiles()) {
        double xq = empirical_quantile(r, q);
        double fe = empirical_cdf(sorted, xq);
        if (fe <= 0.0 || fe >= 1.0) continue;
        xs.push_back(xq);
        target.push_back(fe);
    }
    const double n = static_cast<double>(r.size());
    const double m = mean(r), v = variance(r);
    if (!(v > 0)) throw DomainError("estimate_bg_digital: returns have no dispersion");

    // start: unit shapes with scales from the semi-variances
    double sp = 0, sn = 0;
    for (double x : r) (x > 0 ? sp : sn) += x * x;
    sp = std::sqrt(sp / n);
    sn = std::sqrt(sn / n);
    std::vector<double> x0{std::max(sp, 1e-6), 1.0, std::max(sn, 1e-6), 1.0};
    std::vector<Box> box{{0.0, 1.0}, {0.0, kInf}, {0.0, kInf}, {0.0, kInf}};

    auto f = [&](std::span<const double> x) {
        BGParams p{x[0], x[1], x[2], x[3]};
        JumpGrid g = make_jump_grid(p, opt.grid);
        Density d = density_from_levy(g.measure(), 1.0, opt.fourier);
        // jumps below the cutoff enter as a shift carrying their mean
        double model_mean = p.c_p * p.b_p - p.c_n * p.b_n;
        double small = model_mean - d.mean;
        std::vector<double> xsh(xs.size());
        for (std::size_t i = 0; i < xs.size(); ++i) xsh[i] = xs[i] - small;
        auto F = density_cdf(d, xsh);
        double obj = n * (model_mean - m) * (model_mean - m) / v;
        for (std::size_t i = 0; i < F.size(); ++i)
            obj += n * (F[i] - target[i]) * (F[i] - target[i]) / (target[i] * (1.0 - target[i]));
        return obj;
    };
    NelderMeadOptions nm = opt.nm;
    nm.max_iter = std::max(nm.max_iter, 800);
    auto o = nelder_mead(f, clamp_into(x0, box), box, nm);
    // one restart from the optimum shakes off early simplex collapse
    o = nelder_mead(f, clamp_into(o.x, box), box, nm);

    EstimationResult res;
    res.method = "bg_digital";
    res.bg = BGParams{o.x[0], o.x[1], o.x[2], o.x[3]};
    validate(*res.bg);
    finish(res, o);
    return res;
}

BGParams estimate_bg_digital(const ReturnSeries& s, int window, const EstimationOptions& opt) {
    validate(s);
    if (window < 60 || static_cast<std::size_t>(window) + 1 > s.size())
        throw DomainError("estimate_bg_digital: need 60 <= window < series length");
    auto r = s.log_returns();
    std::vector<double> last(r.end() - window, r.end());
    return *estimate_bg_digital_returns(last, opt).bg;
}

// ---------------------------------------------------------------------------
// quantization

std::vector<QuantizedPoint> quantize_estimates(const std::vector<EstimationResult>& results, int k,
                                               std::uint64_t seed) {
    if (results.empty()) throw DomainError("quantize_estimates: no results");
    const auto first = results.front().point();
    const std::size_t d = first.size();
    if (d == 0) throw DomainError("quantize_estimates: results carry no parameters");
    const Eigen::Index n = static_cast<Eigen::Index>(results.size());
    if (k < 1 || k > n) throw DomainError("quantize_estimates: need 1 <= k <= number of results");
    Eigen::MatrixXd X(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        auto p = results[i].point();
        if (p.size() != d) throw DomainError("quantize_estimates: results of different kinds");
        for (std::size_t j = 0; j < d; ++j) X(i, j) = p[j];
    }
    Eigen::RowVectorXd mu = X.colwise().mean();
    Eigen::RowVectorXd sd(d);
    for (std::size_t j = 0; j < d; ++j) {
        double s = n > 1 ? std::sqrt((X.col(j).array() - mu[j]).square().sum() / (n - 1)) : 0.0;
        sd[j] = s > 0 ? s : 1.0;
    }
    Eigen::MatrixXd Z = (X.rowwise() - mu).array().rowwise() / sd.array();
    auto km = kmeans(Z, k, seed);

    std::vector<QuantizedPoint> out(k);
    for (int c = 0; c < k; ++c) {
        out[c].center.resize(d);
        // centers as means of the original points keep exact values for singletons
        Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(d);
        for (Eigen::Index i = 0; i < n; ++i)
            if (km.labels[i] == c) acc += X.row(i);
        if (km.sizes[c] > 0) acc /= static_cast<double>(km.sizes[c]);
        else acc = km.centers.row(c).array() * sd.array() + mu.array();
        for (std::size_t j = 0; j < d; ++j) out[c].center[j] = acc[j];
        out[c].weight = static_cast<double>(km.sizes[c]) / n;
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const QuantizedPoint& a, const QuantizedPoint& b) { return a.weight > b.weight; });
    return out;
}

}  // namespace spectral
