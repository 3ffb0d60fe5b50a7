#ifndef PENTRL_COMMANDS_HPP_
#define PENTRL_COMMANDS_HPP_

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pentrl/common.hpp"
#include "pentrl/topology.hpp"

namespace pentrl::cli {

std::vector<std::string> command_names();

// request: {"config": <optional path to a JSON config file>, "flags": {...}}.
// Values resolve as flag > config file > environment variable > built-in default.
// Returns a result object; throws pentrl::Error.
nlohmann::json run_command(const std::string& name, const nlohmann::json& request);

// Built-in defaults for a command, after environment-variable overrides.
nlohmann::json command_defaults(const std::string& name);

// 0 success, 2 configuration error, 3 runtime failure.
int exit_code_for(ErrorCode code);

// Environment files (env_*.json) in a directory, sorted by name.
std::vector<topology::WebsiteGroundTruth> load_environment_dir(const std::string& dir);

inline constexpr const char* kManifestName = "manifest.json";

}  // namespace pentrl::cli

#endif  // PENTRL_COMMANDS_HPP_
