#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

namespace cfm {

// Default output root when --out is not given.
inline constexpr const char* kOutputRootEnv = "CFM_OUTPUT_ROOT";

struct RunManifest {
  std::string subcommand;
  nlohmann::ordered_json config;
  std::uint64_t seed = 0;
  std::vector<std::string> artifacts;

  // SHA-1 over "blob <size>\0<canonical config JSON>", as git hashes a file.
  std::string config_hash() const;
  nlohmann::ordered_json to_json() const;
  void write(const std::filesystem::path& path) const;
};

std::string git_blob_hash(const std::string& content);

// Exit codes: 0 success, 1 validation or usage error, 2 runtime failure.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cfm
