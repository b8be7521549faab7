#include "spectral/portfolio.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "spectral/driver.hpp"
#include "spectral/errors.hpp"

namespace spectral {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require(bool ok, const std::string& msg) {
    if (!ok) throw DomainError(msg);
}

double lower_of(const PortfolioBounds& b, std::size_t i) { return b.lower.empty() ? 0.0 : b.lower[i]; }

std::vector<double> asset_drifts(const PortfolioSpec& s) {
    std::vector<double> a(s.dim());
    for (std::size_t j = 0; j < a.size(); ++j) {
        if (s.mbg) {
            a[j] = bg_mean_rate(mbg_marginal_bg(*s.mbg, j)) + bg_mean_rate(mbg_vg_marginal(*s.mbg, j));
        } else {
            a[j] = bg_mean_rate(s.assets[j]);
        }
        if (!s.alpha.empty()) a[j] += s.alpha[j];
    }
    return a;
}

// BG parts carrying the risk charge
std::vector<BGParams> charged_assets(const PortfolioSpec& s) {
    if (!s.mbg) return s.assets;
    std::vector<BGParams> out;
    for (std::size_t j = 0; j < s.mbg->dim(); ++j) out.push_back(mbg_marginal_bg(*s.mbg, j));
    return out;
}

double dot(std::span<const double> x, const std::vector<double>& y) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
    return s;
}

double dist2(std::span<const double> x, const std::vector<double>& y) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
    return std::sqrt(s);
}

std::vector<std::vector<double>> random_starts(const PortfolioBounds& b, std::size_t d, int n,
                                               std::uint64_t seed) {
    double total = 1.0 + b.leverage;
    for (std::size_t i = 0; i < d; ++i) total += lower_of(b, i);
    std::vector<std::vector<double>> out;
    out.emplace_back(d, 1.0 / static_cast<double>(d));
    std::mt19937_64 rng(seed);
    std::exponential_distribution<double> ex(1.0);
    std::uniform_real_distribution<double> un(0.0, 1.0);
    while (static_cast<int>(out.size()) < n) {
        std::vector<double> t(d);
        double s = 0.0;
        for (auto& v : t) s += (v = ex(rng));
        double scale = total * std::pow(un(rng), 1.0 / static_cast<double>(d));
        for (std::size_t i = 0; i < d; ++i) t[i] = t[i] / s * scale - lower_of(b, i);
        out.push_back(project_onto_box(t, b));
    }
    return out;
}

struct BoxSearch {
    std::vector<double> theta;
    double value = -kInf;
    int iterations = 0;
    bool converged = true;
};

// Maximise f over B: Nelder-Mead on x with theta = P(x) and a pull back towards B.
BoxSearch maximize_on_box(const std::function<double(std::span<const double>)>& f, const PortfolioBounds& b,
                          std::vector<std::vector<double>> starts, const NelderMeadOptions& nm, double pull) {
    const std::size_t d = starts.front().size();
    Objective obj = [&](std::span<const double> x) {
        auto t = project_onto_box(x, b);
        return -f(t) + pull * dist2(x, t);
    };
    std::vector<Box> box(d);
    BoxSearch best;
    auto consider = [&](const std::vector<double>& t, double v) {
        if (v > best.value) {
            best.value = v;
            best.theta = t;
        }
    };
    for (const auto& s : starts) {
        OptimResult r = nelder_mead(obj, s, box, nm);
        best.iterations += r.iterations;
        // one restart from the end point
        OptimResult r2 = nelder_mead(obj, r.x, box, nm);
        best.iterations += r2.iterations;
        const OptimResult& w = r2.value <= r.value ? r2 : r;
        auto t = project_onto_box(w.x, b);
        double v = f(t);
        if (v > best.value) best.converged = w.converged;
        consider(t, v);
    }
    return best;
}

// Layer-cake form of g(z) = int Gamma_-(nu(z+ > w)) dw + int Gamma_+(nu(z- > w)) dw
struct Layers {
    std::vector<double> pos_step, pos_mass, neg_step, neg_mass;

    Layers(std::span<const double> masses, std::span<const double> z) {
        std::vector<std::pair<double, double>> pos, neg;
        for (std::size_t k = 0; k < z.size(); ++k) {
            if (z[k] > 0) pos.emplace_back(z[k], masses[k]);
            else if (z[k] < 0) neg.emplace_back(-z[k], masses[k]);
        }
        build(pos, pos_step, pos_mass);
        build(neg, neg_step, neg_mass);
    }

    static void build(std::vector<std::pair<double, double>>& v, std::vector<double>& step,
                      std::vector<double>& mass) {
        std::sort(v.begin(), v.end(), [](auto& x, auto& y) { return x.first > y.first; });
        double m = 0.0;
        for (std::size_t k = 0; k < v.size(); ++k) {
            m += v[k].second;
            double next = k + 1 < v.size() ? v[k + 1].first : 0.0;
            step.push_back(v[k].first - next);
            mass.push_back(m);
        }
    }

    double eval(const MeasureDistortionPair& pair) const {
        double s = 0.0;
        for (std::size_t k = 0; k < pos_step.size(); ++k) s += pos_step[k] * pair.gamma_minus(pos_mass[k]);
        for (std::size_t k = 0; k < neg_step.size(); ++k) s += neg_step[k] * pair.gamma_plus(neg_mass[k]);
        return s;
    }
};

// Density-based pieces of the myopic objectives
double growth(double theta, double r, double T, double x) {
    return (1.0 - theta) * std::exp(r * T) + theta * std::exp(x);
}

// E[(e^X - 1)] under the MINVAR distortion 1 - (1 - F)^{1+gamma} of the law
double minvar_expectation(const ReturnLaw& law, const std::vector<double>& upper_tail, double gamma) {
    double s = 0.0;
    const std::size_t n = law.x.size();
    for (std::size_t j = 0; j < n; ++j) {
        double a = std::pow(upper_tail[j], 1.0 + gamma);
        double b = j + 1 < n ? std::pow(upper_tail[j + 1], 1.0 + gamma) : 0.0;
        s += std::expm1(law.x[j]) * (a - b);
    }
    return s;
}

std::vector<double> upper_tails(const ReturnLaw& law) {
    std::vector<double> t(law.prob.size() + 1, 0.0);
    for (std::size_t j = law.prob.size(); j-- > 0;) t[j] = t[j + 1] + law.prob[j];
    t.pop_back();
    for (auto& v : t) v = std::min(v, 1.0);
    return t;
}

struct MyopicEval {
    double value = 0.0;
    std::optional<double> c;
};

MyopicEval myopic_eval(MyopicObjective o, double theta, const BGParams& p, double r, double T, double varpi,
                       const MyopicParams& prm, const ReturnLaw& law, const std::vector<double>& tails,
                       const ChargeAtoms& atoms) {
    switch (o) {
        case MyopicObjective::expected_net_return:
            return {varpi * (1.0 - theta) * std::expm1(r * T) + varpi * theta * std::expm1(bg_mean_rate(p) * T), {}};
        case MyopicObjective::rebated_net_return: {
            double base = varpi * (1.0 - theta) * std::expm1(r * T);
            if (theta == 0.0) return {base, prm.pd_rebate.c_upper};
            // min over gamma = 1/c of b(c) + varpi theta E_gamma
            auto rv = maximize_over_c(
                [&](double c) {
                    return -(rebate_eval(prm.pd_rebate, c) + varpi * theta * minvar_expectation(law, tails, 1.0 / c));
                },
                prm.pd_rebate);
            return {base - rv.value, rv.c_star};
        }
        case MyopicObjective::exp_utility_ce: {
            // log varpi - (1/eps) log E[G^-eps], summed in log space
            double m = -kInf;
            std::vector<double> l(law.x.size());
            for (std::size_t j = 0; j < l.size(); ++j) {
                l[j] = -prm.epsilon * std::log(growth(theta, r, T, law.x[j]));
                if (law.prob[j] > 0) m = std::max(m, l[j]);
            }
            double s = 0.0;
            for (std::size_t j = 0; j < l.size(); ++j)
                if (law.prob[j] > 0) s += law.prob[j] * std::exp(l[j] - m);
            return {std::log(varpi) - (m + std::log(s)) / prm.epsilon, {}};
        }
        case MyopicObjective::crra_ce: {
            if (prm.eta == 1.0) {
                double s = 0.0;
                for (std::size_t j = 0; j < law.x.size(); ++j)
                    s += law.prob[j] * std::log(growth(theta, r, T, law.x[j]));
                return {varpi * std::exp(s), {}};
            }
            double s = 0.0;
            for (std::size_t j = 0; j < law.x.size(); ++j)
                s += law.prob[j] * std::pow(growth(theta, r, T, law.x[j]), 1.0 - prm.eta);
            return {varpi * std::pow(s, 1.0 / (1.0 - prm.eta)), {}};
        }
        case MyopicObjective::rebated_variation: {
            auto rv = rebated_variation(theta * varpi * T, bg_mean_rate(p), atoms, prm.md_gamma, prm.md_rebate);
            return {(1.0 - theta) * varpi * r * T + rv.value, rv.c_star};
        }
    }
    throw DomainError("unknown myopic objective");
}

}  // namespace

// ---------------------------------------------------------------------------
// portfolio description

bool PortfolioBounds::no_short_selling() const {
    return leverage == 0.0 && std::all_of(lower.begin(), lower.end(), [](double l) { return l == 0.0; });
}

std::size_t PortfolioSpec::dim() const { return mbg ? mbg->dim() : assets.size(); }

void validate(const PortfolioBounds& b, std::size_t dim) {
    require(b.lower.empty() || b.lower.size() == dim, "portfolio bounds: one lower bound per asset");
    for (double l : b.lower) require(l >= 0.0 && std::isfinite(l), "portfolio bounds: L_i must be >= 0");
    require(b.leverage >= 0.0 && std::isfinite(b.leverage), "portfolio bounds: L_0 must be >= 0");
}

void validate(const PortfolioSpec& s) {
    require(s.dim() >= 1, "portfolio needs at least one asset");
    if (s.mbg) {
        validate(*s.mbg);
    } else {
        for (const auto& p : s.assets) {
            validate(p);
            require(p.b_p < 1.0, "portfolio assets need b_p < 1 for a finite mean");
        }
    }
    validate(s.bounds, s.dim());
    require(s.horizon > 0.0 && std::isfinite(s.horizon), "portfolio horizon must be positive");
    require(std::isfinite(s.r), "portfolio rate must be finite");
    require(s.alpha.empty() || s.alpha.size() == s.dim(), "portfolio alpha: one value per asset");
}

bool in_box(std::span<const double> theta, const PortfolioBounds& b, double tol) {
    double sum = 0.0;
    for (std::size_t i = 0; i < theta.size(); ++i) {
        if (!std::isfinite(theta[i]) || theta[i] < -lower_of(b, i) - tol) return false;
        sum += theta[i];
    }
    return sum <= 1.0 + b.leverage + tol;
}

std::vector<double> project_onto_box(std::span<const double> theta, const PortfolioBounds& b) {
    if (in_box(theta, b, 0.0)) return {theta.begin(), theta.end()};
    const std::size_t d = theta.size();
    std::vector<double> u(d);
    double cap = 1.0 + b.leverage;
    for (std::size_t i = 0; i < d; ++i) {
        u[i] = theta[i] + lower_of(b, i);
        cap += lower_of(b, i);
    }
    std::vector<double> v(d);
    double sum = 0.0;
    for (std::size_t i = 0; i < d; ++i) sum += (v[i] = std::max(u[i], 0.0));
    if (sum > cap) {
        // projection onto { u >= 0, sum u = cap }
        std::vector<double> s = u;
        std::sort(s.begin(), s.end(), std::greater<>());
        double acc = 0.0, tau = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
            acc += s[k];
            double t = (acc - cap) / static_cast<double>(k + 1);
            if (k + 1 == d || s[k + 1] <= t) {
                tau = t;
                break;
            }
        }
        for (std::size_t i = 0; i < d; ++i) v[i] = std::max(u[i] - tau, 0.0);
    }
    for (std::size_t i = 0; i < d; ++i) v[i] -= lower_of(b, i);
    return v;
}

double portfolio_drift(std::span<const double> theta, const PortfolioSpec& s) {
    require(theta.size() == s.dim(), "portfolio_drift: dimension mismatch");
    return dot(theta, asset_drifts(s));
}

// ---------------------------------------------------------------------------
// risk charges

double ChargeAtoms::charge(const MeasureDistortionPair& pair) const {
    double s = 0.0;
    for (std::size_t k = 0; k < zw.size(); ++k) {
        if (zw[k] > 0) s += zw[k] * pair.d_minus(level[k]);
        else if (zw[k] < 0) s -= zw[k] * pair.d_plus(level[k]);
    }
    if (!std::isfinite(s)) throw NumericalError("risk charge is not finite");
    return s;
}

IbgChargeModel::IbgChargeModel(std::vector<BGParams> assets, const JumpGridOptions& grid)
    : assets_(std::move(assets)) {
    require(!assets_.empty(), "charge model needs at least one asset");
    for (const auto& p : assets_) {
        validate(p);
        grids_.push_back(make_jump_grid(p, grid));
    }
}

double IbgChargeModel::level_mass(std::span<const double> theta, double v) const {
    require(theta.size() == assets_.size(), "level_mass: dimension mismatch");
    double m = 0.0;
    if (v == 0.0) return kInf;
    for (std::size_t k = 0; k < assets_.size(); ++k) {
        if (theta[k] == 0.0) continue;
        double u = v / theta[k];
        if (u <= -1.0) continue;
        double y = std::log1p(u);
        if (y != 0.0) m += bg_tail_mass(assets_[k], y);
    }
    return m;
}

ChargeAtoms IbgChargeModel::atoms(std::span<const double> theta) const {
    require(theta.size() == assets_.size(), "charge atoms: dimension mismatch");
    ChargeAtoms out;
    for (std::size_t j = 0; j < assets_.size(); ++j) {
        const double th = theta[j];
        if (th == 0.0) continue;
        const JumpGrid& g = grids_[j];
        for (std::size_t k = 0; k < g.size(); ++k) {
            double z = th * std::expm1(g.nodes[k]);
            out.z.push_back(z);
            out.zw.push_back(g.weights[k] * z);
            out.level.push_back(level_mass(theta, z));
        }
        // jumps below the cutoff, level frozen at +-eps/2
        const BGParams& p = assets_[j];
        const double eps = g.eps;
        double pos = p.c_p > 0 ? p.c_p * p.b_p * -std::expm1(-eps / p.b_p) : 0.0;
        double neg = p.c_n > 0 ? p.c_n * p.b_n * -std::expm1(-eps / p.b_n) : 0.0;
        if (pos > 0) {
            out.z.push_back(th * std::expm1(0.5 * eps));
            out.zw.push_back(th * pos);
            out.level.push_back(level_mass(theta, out.z.back()));
        }
        if (neg > 0) {
            out.z.push_back(th * std::expm1(-0.5 * eps));
            out.zw.push_back(-th * neg);
            out.level.push_back(level_mass(theta, out.z.back()));
        }
    }
    return out;
}

double distorted_variation_ibg(std::span<const double> theta, const std::vector<BGParams>& assets,
                               const MeasureDistortionPair& pair, const PortfolioBounds& bounds,
                               const JumpGridOptions& grid) {
    require(theta.size() == assets.size(), "distorted_variation_ibg: one weight per asset");
    validate(bounds, assets.size());
    if (!in_box(theta, bounds)) throw DomainError("distorted_variation_ibg: theta outside B");
    return IbgChargeModel(assets, grid).atoms(theta).charge(pair);
}

double mbg_vg_variation(std::span<const double> theta, const MBGParams& m) {
    require(theta.size() == m.dim(), "mbg_vg_variation: one weight per asset");
    double s = 0.0;
    for (std::size_t j = 0; j < m.dim(); ++j) s += theta[j] * bg_mean_rate(mbg_vg_marginal(m, j));
    return s;
}

double mbg_objective(std::span<const double> theta, const MBGParams& m, const MeasureDistortionPair& pair,
                     const PortfolioBounds& bounds, const JumpGridOptions& grid) {
    validate(m);
    PortfolioSpec s;
    s.mbg = m;
    s.bounds = bounds;
    auto idio = charged_assets(s);
    return portfolio_drift(theta, s) - distorted_variation_ibg(theta, idio, pair, bounds, grid);
}

// ---------------------------------------------------------------------------
// allocation results

void to_json(nlohmann::json& j, const AllocationResult& r) {
    j = nlohmann::json{{"theta_star", r.theta_star},
                       {"value", r.value},
                       {"value_coefficient", r.value_coefficient},
                       {"iterations", r.iterations},
                       {"converged", r.converged},
                       {"unbounded", r.unbounded},
                       {"flags", r.flags}};
    j["c_star"] = r.c_star ? nlohmann::json(*r.c_star) : nlohmann::json(nullptr);
    j["varpi_star"] = r.varpi_star ? nlohmann::json(*r.varpi_star) : nlohmann::json(nullptr);
}

AllocationResult optimal_theta_small_investor(const PortfolioSpec& s, const MeasureDistortionPair& pair,
                                              const PortfolioOptions& opt) {
    validate(s);
    const std::size_t d = s.dim();
    const auto a = asset_drifts(s);
    IbgChargeModel model(charged_assets(s), opt.grid);
    auto f = [&](std::span<const double> t) {
        double sum = std::accumulate(t.begin(), t.end(), 0.0);
        return dot(t, a) + (1.0 - sum) * s.r - model.atoms(t).charge(pair);
    };
    double pull = s.r == 0.0 ? 0.0 : std::abs(s.r);
    for (double v : a) pull = std::max(pull, std::abs(v));
    pull = std::max(pull, 1e-12);

    auto starts = random_starts(s.bounds, d, opt.starts, opt.seed);
    BoxSearch best = maximize_on_box(f, s.bounds, starts, opt.nm, pull);

    // vertices of B and the all-cash point, the latter winning ties
    std::vector<std::vector<double>> corners;
    for (std::size_t i = 0; i < d; ++i) {
        std::vector<double> t(d, 0.0);
        t[i] = 1.0 + s.bounds.leverage;
        corners.push_back(project_onto_box(t, s.bounds));
    }
    for (const auto& t : corners) {
        double v = f(t);
        if (v >= best.value) {
            best.value = v;
            best.theta = t;
            best.converged = true;
        }
    }
    std::vector<double> zero = project_onto_box(std::vector<double>(d, 0.0), s.bounds);
    double v0 = f(zero);
    if (v0 >= best.value - 1e-10 * (1.0 + std::abs(best.value))) {
        best.value = v0;
        best.theta = zero;
        best.converged = true;
    }

    AllocationResult r;
    r.theta_star = best.theta;
    r.value = best.value;
    r.value_coefficient = std::exp(s.horizon * best.value);
    r.iterations = best.iterations;
    r.converged = best.converged;
    if (!best.converged) r.flags.push_back("optimizer did not converge; best iterate returned");
    if (!s.bounds.no_short_selling())
        r.flags.push_back("heuristic: constant optimal control is not established with short selling or leverage");
    return r;
}

// ---------------------------------------------------------------------------
// rebates

void validate(const RebateSpec& s) {
    require(std::isfinite(s.c_lower) && std::isfinite(s.c_upper) && s.c_lower > 0 && s.c_lower < s.c_upper,
            "rebate needs 0 < c_lower < c_upper");
    require(s.chi > 0 && std::isfinite(s.chi), "rebate chi must be positive");
    require(s.chi2 > 0 && std::isfinite(s.chi2), "rebate chi2 must be positive");
}

void to_json(nlohmann::json& j, const RebateSpec& s) {
    j = nlohmann::json{{"c_lower", s.c_lower}, {"c_upper", s.c_upper}, {"chi", s.chi}, {"chi2", s.chi2}};
}

void from_json(const nlohmann::json& j, RebateSpec& s) {
    s.c_lower = j.at("c_lower").get<double>();
    s.c_upper = j.at("c_upper").get<double>();
    s.chi = j.value("chi", 1.0);
    s.chi2 = j.value("chi2", 1.0);
}

double rebate_eval(const RebateSpec& s, double c) {
    if (std::isnan(c)) throw DomainError("rebate_eval: c is NaN");
    if (c >= s.c_upper) return 0.0;
    if (c <= s.c_lower) return kInf;
    double e = std::pow(1.0 / (c - s.c_lower), s.chi2) - std::pow(1.0 / (s.c_upper - c), s.chi2);
    return s.chi * std::exp(e);
}

RebatedValue maximize_over_c(const std::function<double(double)>& h, const RebateSpec& s) {
    validate(s);
    constexpr int n = 64;
    const double l0 = std::log(s.c_lower), l1 = std::log(s.c_upper);
    std::vector<double> lc(n + 1), hv(n + 1, -kInf);
    int best = n;
    for (int i = 1; i <= n; ++i) {
        lc[i] = i == n ? l1 : l0 + (l1 - l0) * i / n;
        double c = i == n ? s.c_upper : std::exp(lc[i]);
        double v = h(c);
        hv[i] = std::isnan(v) ? -kInf : v;
    }
    for (int i = 1; i <= n; ++i)
        if (hv[i] > hv[best]) best = i;
    lc[0] = l0;
    double lo = best == 1 ? l0 + 1e-12 * (l1 - l0) : lc[best - 1];
    double hi = best == n ? l1 : lc[best + 1];
    auto m = brent_minimize(
        [&](double u) {
            double v = h(std::exp(u));
            return std::isfinite(v) ? -v : 1e300;
        },
        lo, hi, 52, 300);
    RebatedValue out{hv[best], best == n ? s.c_upper : std::exp(lc[best])};
    if (-m.value > out.value) out = {-m.value, std::exp(m.x)};
    return out;
}

double level_driver(std::span<const double> masses, std::span<const double> z, double c, double gamma) {
    require(masses.size() == z.size(), "level_driver: masses and values differ in length");
    for (double v : z) require(std::isfinite(v), "level_driver: z must be finite");
    return Layers(masses, z).eval(rebate_family_distortion(c, gamma));
}

RebatedValue rebated_driver(std::span<const double> masses, std::span<const double> z, const RebateSpec& s,
                            double gamma) {
    require(masses.size() == z.size(), "rebated_driver: masses and values differ in length");
    for (double v : z) require(std::isfinite(v), "rebated_driver: z must be finite");
    Layers layers(masses, z);
    return maximize_over_c(
        [&](double c) { return layers.eval(rebate_family_distortion(c, gamma)) - rebate_eval(s, c); }, s);
}

double rebated_lipschitz_constant(std::span<const double> masses, const RebateSpec& s, double gamma) {
    validate(s);
    double best = 0.0;
    for (double c : log_grid(s.c_lower, s.c_upper, 256)) {
        auto pair = rebate_family_distortion(c, gamma);
        double n2 = 0.0;
        for (double m : masses) {
            if (m <= 0) continue;
            double g = std::max(pair.gamma_plus(m), pair.gamma_minus(m)) / m;
            n2 += m * g * g;
        }
        best = std::max(best, std::sqrt(n2));
    }
    return best;
}

ChargeAtoms bg_charge_atoms(const BGParams& p, const JumpGridOptions& grid) {
    const double one = 1.0;
    return IbgChargeModel({p}, grid).atoms(std::span<const double>(&one, 1));
}

RebatedValue rebated_variation(double varpi, double a, const ChargeAtoms& atoms, double gamma,
                               const RebateSpec& s) {
    require(varpi >= 0.0 && std::isfinite(varpi), "rebated_variation: varpi must be >= 0");
    auto rv = maximize_over_c(
        [&](double c) { return varpi * atoms.charge(rebate_family_distortion(c, gamma)) - rebate_eval(s, c); }, s);
    return {varpi * a - rv.value, rv.c_star};
}

RebatedValue rebated_variation(double varpi, const BGParams& p, double gamma, const RebateSpec& s,
                               const JumpGridOptions& grid) {
    return rebated_variation(varpi, bg_mean_rate(p), bg_charge_atoms(p, grid), gamma, s);
}

// ---------------------------------------------------------------------------
// myopic allocation

MyopicObjective myopic_objective_from_string(const std::string& s) {
    if (s == "expected_net_return") return MyopicObjective::expected_net_return;
    if (s == "rebated_net_return") return MyopicObjective::rebated_net_return;
    if (s == "exp_utility_ce") return MyopicObjective::exp_utility_ce;
    if (s == "crra_ce") return MyopicObjective::crra_ce;
    if (s == "rebated_variation") return MyopicObjective::rebated_variation;
    throw DomainError("unknown myopic objective '" + s + "'");
}

std::string to_string(MyopicObjective o) {
    switch (o) {
        case MyopicObjective::expected_net_return: return "expected_net_return";
        case MyopicObjective::rebated_net_return: return "rebated_net_return";
        case MyopicObjective::exp_utility_ce: return "exp_utility_ce";
        case MyopicObjective::crra_ce: return "crra_ce";
        case MyopicObjective::rebated_variation: return "rebated_variation";
    }
    return "unknown";
}

ReturnLaw bg_return_law(const BGParams& p, double T, const JumpGridOptions& grid, const FourierSpec& fourier) {
    require(T > 0 && std::isfinite(T), "bg_return_law: T must be positive");
    MonotoneGrid mg(p, grid);
    Density d = density_from_levy(mg.grid().measure(), T, fourier);
    const double shift = T * mg.small_jump_drift(MeasureDistortionPair::identity(), Direction::upper);
    ReturnLaw law;
    law.x.resize(d.x.size());
    law.prob.resize(d.x.size());
    double total = 0.0;
    for (std::size_t j = 0; j < d.x.size(); ++j) {
        law.x[j] = d.x[j] + shift;
        total += (law.prob[j] = std::max(d.pdf[j], 0.0) * d.dx);
    }
    if (!(total > 0)) throw NumericalError("bg_return_law: empty density");
    for (auto& q : law.prob) q /= total;
    return law;
}

double myopic_value(MyopicObjective o, double theta, const BGParams& p, double r, double T, double varpi,
                    const MyopicParams& prm, const ReturnLaw& law, const ChargeAtoms& atoms) {
    return myopic_eval(o, theta, p, r, T, varpi, prm, law, upper_tails(law), atoms).value;
}

AllocationResult myopic_allocate(MyopicObjective o, const BGParams& p, double r, double T, double varpi,
                                 const MyopicParams& prm) {
    validate(p);
    require(p.b_p < 1.0, "myopic_allocate needs b_p < 1");
    require(T > 0 && std::isfinite(T), "myopic_allocate: T must be positive");
    require(varpi > 0 && std::isfinite(varpi), "myopic_allocate: varpi must be positive");
    require(std::isfinite(r), "myopic_allocate: r must be finite");
    if (o == MyopicObjective::rebated_net_return) validate(prm.pd_rebate);
    if (o == MyopicObjective::rebated_variation) validate(prm.md_rebate);
    if (o == MyopicObjective::exp_utility_ce) require(prm.epsilon > 0, "epsilon must be positive");
    if (o == MyopicObjective::crra_ce) require(prm.eta > 0, "eta must be positive");

    ReturnLaw law;
    std::vector<double> tails;
    ChargeAtoms atoms;
    if (o == MyopicObjective::rebated_net_return || o == MyopicObjective::exp_utility_ce ||
        o == MyopicObjective::crra_ce) {
        law = bg_return_law(p, T, prm.grid, prm.fourier);
        tails = upper_tails(law);
    }
    if (o == MyopicObjective::rebated_variation) atoms = bg_charge_atoms(p, prm.grid);
    auto eval = [&](double th) { return myopic_eval(o, th, p, r, T, varpi, prm, law, tails, atoms); };

    auto m = brent_minimize([&](double th) { return -eval(th).value; }, 0.0, 1.0, 40, 200);
    double theta = m.x, value = -m.value;
    for (double end : {1.0, 0.0}) {
        double v = eval(end).value;
        double tol = end == 0.0 ? 1e-10 * (1.0 + std::abs(value)) : 0.0;
        if (v >= value - tol) {
            theta = end;
            value = v;
        }
    }
    AllocationResult res;
    res.theta_star = {theta};
    auto at = eval(theta);
    res.value = at.value;
    res.c_star = at.c;
    res.iterations = m.iterations;
    return res;
}

// ---------------------------------------------------------------------------
// optimal amount

RebatedValue rebated_portfolio_variation(std::span<const double> theta, double varpi, const PortfolioSpec& s,
                                         const RebateSpec& rb, double gamma, const JumpGridOptions& grid) {
    validate(s);
    require(in_box(theta, s.bounds), "rebated_portfolio_variation: theta outside B");
    IbgChargeModel model(charged_assets(s), grid);
    return rebated_variation(varpi * s.horizon, portfolio_drift(theta, s), model.atoms(theta), gamma, rb);
}

AllocationResult optimal_amount_and_weights(const PortfolioSpec& s, const RebateSpec& rb,
                                            std::span<const double> theta0, double varpi0,
                                            const AmountOptions& opt) {
    validate(s);
    validate(rb);
    require(theta0.size() == s.dim(), "optimal_amount: one initial weight per asset");
    require(in_box(theta0, s.bounds), "optimal_amount: initial theta outside B");
    require(varpi0 > 0 && std::isfinite(varpi0), "optimal_amount: initial amount must be positive");
    const auto a = asset_drifts(s);
    const double T = s.horizon;
    IbgChargeModel model(charged_assets(s), opt.portfolio.grid);
    auto pair_at = [&](double c) { return rebate_family_distortion(c, opt.gamma); };

    AllocationResult res;
    std::vector<double> theta(theta0.begin(), theta0.end());
    double varpi = varpi0;

    // best amount for fixed weights; false when unbounded
    auto amount_step = [&](const std::vector<double>& t, double& w, double& value, double& cstar) {
        ChargeAtoms at = model.atoms(t);
        const double drift = dot(t, a);
        const double slope0 = drift - at.charge(pair_at(rb.c_upper));
        const double slope_inf = drift - at.charge(pair_at(rb.c_lower));
        if (slope_inf >= 0.0) {
            std::ostringstream os;
            os.precision(6);
            os << "unbounded: theta^T a - charge at c_lower = " << slope_inf << " >= 0";
            res.flags.push_back(os.str());
            return false;
        }
        if (slope0 <= 0.0) {
            w = 0.0;
            value = 0.0;
            cstar = rb.c_upper;
            return true;
        }
        auto L = [&](double x) { return rebated_variation(x * T, drift, at, opt.gamma, rb); };
        // bracket the maximum of the concave L by doubling
        double hi = std::max(w, 1.0);
        double lhi = L(hi).value;
        while (hi < opt.varpi_max) {
            double l2 = L(2.0 * hi).value;
            if (l2 < lhi) break;
            hi *= 2.0;
            lhi = l2;
        }
        hi *= 2.0;
        auto m = brent_minimize([&](double u) { return -L(std::exp(u)).value; }, std::log(hi) - 60.0, std::log(hi),
                                52, 300);
        w = std::exp(m.x);
        auto best = L(w);
        value = best.value;
        cstar = best.c_star;
        if (value <= 0.0) {
            w = 0.0;
            value = 0.0;
            cstar = rb.c_upper;
        }
        return true;
    };

    double value = 0.0, cstar = rb.c_upper;
    for (int round = 0; round < opt.rounds; ++round) {
        double prev = value;
        if (!amount_step(theta, varpi, value, cstar)) {
            res.unbounded = true;
            break;
        }
        if (varpi == 0.0) break;
        // weights for the current amount
        const double w = varpi;
        auto f = [&](std::span<const double> t) {
            return rebated_variation(w * T, dot(t, a), model.atoms(t), opt.gamma, rb).value;
        };
        NelderMeadOptions nm = opt.portfolio.nm;
        double scale = std::max(std::abs(value), 1e-12);
        auto bs = maximize_on_box(f, s.bounds, {theta}, nm, scale);
        res.iterations += bs.iterations;
        if (bs.value > value) theta = bs.theta;
        if (round > 0 && std::abs(value - prev) <= 1e-10 * (1.0 + std::abs(value))) break;
    }
    if (!res.unbounded) amount_step(theta, varpi, value, cstar);

    res.theta_star = theta;
    res.value = value;
    res.c_star = cstar;
    if (res.unbounded) res.varpi_star.reset();
    else res.varpi_star = varpi;
    if (!s.bounds.no_short_selling())
        res.flags.push_back("heuristic: constant optimal control is not established with short selling or leverage");
    return res;
}

}  // namespace spectral
