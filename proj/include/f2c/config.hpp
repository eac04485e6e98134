#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "f2c/refine.hpp"

namespace f2c {

/// Pipeline settings. The file format is one `key = value` per line with
/// `#` comments; every key can be overridden by the environment variable
/// F2C_<KEY> (upper case) and by command-line flags.
struct PipelineConfig {
  std::size_t max_seed_tokens = 600;
  bool require_program_entry = false;
  int max_rounds = 5;
  int compile_timeout_s = 60;
  int exec_timeout_s = 60;
  double temperature = 0.2;
  int max_output_tokens = 1024;
  int workers = 1;
  std::string backend = "scripted";  // http | scripted | replay
  std::string model;
  std::string endpoint;
  std::string api_path = "/v1/chat/completions";
  std::string api_key_env = "LLM_API_KEY";
  std::string script;      // scripted backend responses
  std::string replay_log;  // replay backend log
  std::string record_log;  // when set, every exchange is appended here
  RetryEntry retry_entry_phase = RetryEntry::UnitTests;
  std::string translate_template = "q_ask_s_translation";
  std::string seeds;
  std::string out_dir = "out";
  std::string prompt_dir;  // empty: built-in prompts
  std::string scratch_dir;  // empty: system temp directory
  std::string audit_dir;
  std::string fortran_compiler = "gfortran";
  std::string cpp_compiler = "g++";
  int max_concurrent_compiles = 0;  // 0: hardware concurrency

  friend bool operator==(const PipelineConfig&, const PipelineConfig&) = default;
};

// Keys in serialization order.
const std::vector<std::string>& config_keys();

/// Sets one key from its textual value. Throws Error{Config} for unknown
/// keys, unparsable values and secret-looking keys.
void apply_setting(PipelineConfig& config, std::string_view key, std::string_view value);

PipelineConfig parse_config(std::string_view text, std::string_view origin = "<config>");
std::string serialize(const PipelineConfig& config);

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
EnvLookup process_env();

// F2C_<KEY> for every known key.
void apply_env(PipelineConfig& config, const EnvLookup& env);

// Throws Error{Config} naming the offending key.
void validate(const PipelineConfig& config);

/// defaults < file < environment < flags, then validated.
PipelineConfig load_config(const std::optional<std::filesystem::path>& file, const EnvLookup& env,
                           const std::vector<std::pair<std::string, std::string>>& flags);

// Everything except paths that only matter locally; never contains secrets.
nlohmann::ordered_json to_json(const PipelineConfig& config);

SessionConfig session_config(const PipelineConfig& config);
ToolchainOptions toolchain_options(const PipelineConfig& config);

}  // namespace f2c
