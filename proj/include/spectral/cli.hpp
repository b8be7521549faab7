#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

namespace spectral::cli {

// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr int kExitIo = 4;

// One run: the command, its JSON document and where relative paths resolve.
struct RunConfig {
    std::string command;
    nlohmann::json doc;
    std::filesystem::path config_dir;  // input paths in the document are relative to this
    std::filesystem::path out_dir;
    std::uint64_t seed = 1;
    bool seed_given = false;

    // The command's block with the shared "bg" and "distortion" blocks filled in when absent.
    nlohmann::json block() const;
    std::filesystem::path input(const std::string& rel) const;
};

// Reads and parses the config file. Throws IoError when unreadable, ConfigError when
// the JSON is malformed or the command unknown.
RunConfig load_config(const std::string& command, const std::filesystem::path& config, std::uint64_t seed,
                      bool seed_given, const std::filesystem::path& out_dir);

const std::vector<std::string>& commands();

// Each command validates its whole block before computing and returns the written files.
std::vector<std::filesystem::path> cmd_density(const RunConfig& c);
std::vector<std::filesystem::path> cmd_pide(const RunConfig& c);
std::vector<std::filesystem::path> cmd_price(const RunConfig& c);
std::vector<std::filesystem::path> cmd_estimate(const RunConfig& c);
std::vector<std::filesystem::path> cmd_calibrate(const RunConfig& c);
std::vector<std::filesystem::path> cmd_portfolio(const RunConfig& c);
std::vector<std::filesystem::path> cmd_rebate_scan(const RunConfig& c);

std::vector<std::filesystem::path> dispatch(const RunConfig& c);

// Maps the exception in flight to an exit code and its error JSON.
int exit_code_for(const std::exception& e);
nlohmann::json error_json(const std::exception& e);

// Whole command line: `<tool> <command> --config <path> [--seed N] [--out DIR]`.
// Prints the written files as JSON on `out` and errors as JSON on `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace spectral::cli
