#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace sdlab::cli {

enum ExitCode : int { kOk = 0, kInvalidConfig = 1, kBudgetExceeded = 2, kPropertyFailure = 3 };

struct RunOptions {
  std::filesystem::path out = "out";
  std::optional<std::uint64_t> seed;
  int threads = 1;
};

/// Names of the experiment subcommands.
const std::vector<std::string>& subcommands();

/// Config keys a subcommand accepts (each can also be overridden by a
/// `--key value` flag).
std::vector<std::string> config_keys(const std::string& subcommand);

/// Runs one experiment. The config file is a JSON object; `overrides` is an
/// object whose entries replace those of the file. Writes result.json, CSV
/// tables and plotdata/*.dat into options.out and returns an ExitCode.
/// Diagnostics go to `log`.
int run(const std::string& subcommand, const std::optional<std::filesystem::path>& config,
        const nlohmann::json& overrides, const RunOptions& options, std::ostream& log);

/// Command-line front end.
int main(int argc, char** argv);

}  // namespace sdlab::cli
