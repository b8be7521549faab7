// Writes the bundled synthetic fixtures: a SPY-like close series, a planted option
// chain, a 10-asset MBG description and a 250-day BG parameter panel. Every file is
// a deterministic function of the fixed seeds below.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include "json.hpp"
#include "spectral/distortions.hpp"
#include "spectral/estimation.hpp"
#include "spectral/levy_models.hpp"

using namespace spectral;
namespace fs = std::filesystem;

namespace {

const BGParams kSpy{0.0075, 1.5592, 0.0181, 0.6308};

std::string iso(std::chrono::sys_days d) {
    std::chrono::year_month_day ymd{d};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
}

// n consecutive weekdays from `first` on
std::vector<std::string> weekdays(std::chrono::sys_days first, std::size_t n) {
    std::vector<std::string> out;
    for (auto d = first; out.size() < n; d += std::chrono::days{1}) {
        std::chrono::weekday w{d};
        if (w != std::chrono::Saturday && w != std::chrono::Sunday) out.push_back(iso(d));
    }
    return out;
}

void write(const fs::path& p, const std::string& s) {
    std::ofstream os(p, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + p.string());
    os << s;
    std::cout << p.string() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    const fs::path dir = argc > 1 ? fs::path(argv[1]) : fs::path("data");
    fs::create_directories(dir);
    using namespace std::chrono;
    const sys_days start = sys_days{year{2014} / January / 2};

    // SPY-like closes: 1500 daily BG log returns from 100
    {
        auto x = simulate_bg_increments(kSpy, 1.0, 1500, 20200102);
        ReturnSeries s;
        s.dates = weekdays(start, x.size() + 1);
        s.close.push_back(100.0);
        for (double r : x) s.close.push_back(s.close.back() * std::exp(r));
        std::ostringstream os;
        write_series_csv(s, os);
        write(dir / "spy_like.csv", os.str());
    }

    // 20-quote chain priced at the planted exponential distortion (c, gamma, a, b)
    // = (0.0021, 0.1996, 0.0011, 0.0067) with the calibration's default numerics
    {
        CalibrationOptions opt;
        auto pair = MeasureDistortionPair::exponential({.a = 0.0011, .b = 0.0067, .c = 0.0021, .gamma = 0.1996});
        OptionChain ch;
        ch.date = "2020-12-31";
        ch.spot = 100.0;
        for (double T : {21.0, 42.0})
            for (int i = 0; i < 10; ++i) {
                double K = 90.0 + i * 20.0 / 9.0;
                ch.quotes.push_back({T, K, K >= 100.0, 0.0, 0.0});
            }
        auto m = model_quotes(ch, kSpy, pair, opt.grid, opt.fourier);
        for (std::size_t i = 0; i < m.size(); ++i) {
            ch.quotes[i].bid = m[i].bid;
            ch.quotes[i].ask = m[i].ask;
        }
        std::ostringstream os;
        write_chain_csv(ch, os);
        write(dir / "chain_planted.csv", os.str());
    }

    // 10 ETF-like MBG components around the SPY parameters
    {
        nlohmann::json tilde = nlohmann::json::array();
        for (int i = 0; i < 10; ++i) {
            double f = 1.0 + 0.05 * i;
            tilde.push_back(BGParams{0.0075 * f, 1.5592 + 0.03 * i, 0.0181 * f, 0.6308 + 0.01 * i});
        }
        nlohmann::json j{{"tilde", tilde}, {"zeta", 2.0}, {"rho", 0.6}};
        write(dir / "etf_mbg.json", j.dump(2) + "\n");
    }

    // 250 days of BG parameters: the SPY scales times a log-AR(1) volatility factor
    // (persistence 0.95, stationary deviation 0.15), shapes held fixed
    {
        std::mt19937_64 rng(250);
        std::normal_distribution<double> nd;
        const double phi = 0.95, sd = 0.15;
        double v = sd * nd(rng);
        auto dates = weekdays(sys_days{year{2020} / January / 2}, 250);
        std::ostringstream os;
        os.precision(12);
        os << "date,b_p,c_p,b_n,c_n\n";
        for (const auto& d : dates) {
            double s = std::exp(v);
            os << d << ',' << kSpy.b_p * s << ',' << kSpy.c_p << ',' << kSpy.b_n * s << ',' << kSpy.c_n << '\n';
            v = phi * v + std::sqrt(1.0 - phi * phi) * sd * nd(rng);
        }
        write(dir / "bg_panel.csv", os.str());
    }
    return 0;
}
