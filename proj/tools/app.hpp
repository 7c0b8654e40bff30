#pragma once

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace wml::app {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitInvariant = 2;

/// Bad flags, config values or missing inputs.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<double> p;
  std::optional<int> d;
  std::optional<int> depth;
  std::optional<double> cgamma;
  std::optional<std::string> out;
  std::optional<int> parallel;
  bool acceptance = false;
};

/// Config file contents plus command-line overrides; flags win over the file,
/// the file wins over WML_SEED, which wins over the built-in default.
struct RunConfig {
  std::string command;
  nlohmann::json file = nlohmann::json::object();
  Overrides flags;
  std::vector<std::string> inputs;

  std::uint64_t seed() const;
  std::filesystem::path out_dir() const;
  int parallel() const;
  /// Section for the current command, empty when absent.
  nlohmann::json section() const;
};

RunConfig load_config(const std::string& command, const std::optional<std::string>& path, Overrides flags,
                      std::vector<std::string> inputs);

int cmd_gen(const RunConfig& cfg);
int cmd_check(const RunConfig& cfg);
int cmd_sweep(const RunConfig& cfg);
int cmd_fit(const RunConfig& cfg);
int cmd_report(const RunConfig& cfg);

/// Dispatches on cfg.command and maps exceptions onto exit codes.
int run(const RunConfig& cfg);

}  // namespace wml::app
