#include "f2c/config.hpp"

#include <charconv>
#include <cstdlib>

#include "f2c/error.hpp"
#include "text_util.hpp"

namespace f2c {

namespace {

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view expected) {
  throw Error(ErrorCode::Config,
              "key '" + std::string(key) + "': expected " + std::string(expected) + ", got '" + std::string(value) + "'");
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc{} || ptr != value.data() + value.size()) bad_value(key, value, "a number");
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  const auto v = detail::to_lower(value);
  if (v == "true" || v == "yes" || v == "1" || v == "on") return true;
  if (v == "false" || v == "no" || v == "0" || v == "off") return false;
  bad_value(key, value, "true or false");
}

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

struct Field {
  std::string name;
  std::function<std::string(const PipelineConfig&)> get;
  std::function<void(PipelineConfig&, std::string_view)> set;
};

template <typename T>
Field number(std::string name, T PipelineConfig::*member) {
  return {name, [member](const PipelineConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return format_double(c.*member);
            else return std::to_string(c.*member);
          },
          [member, name](PipelineConfig& c, std::string_view v) { c.*member = parse_number<T>(name, v); }};
}

Field text(std::string name, std::string PipelineConfig::*member) {
  return {name, [member](const PipelineConfig& c) { return c.*member; },
          [member](PipelineConfig& c, std::string_view v) { c.*member = std::string(v); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      number("max_seed_tokens", &PipelineConfig::max_seed_tokens),
      {"require_program_entry", [](const PipelineConfig& c) { return std::string(c.require_program_entry ? "true" : "false"); },
       [](PipelineConfig& c, std::string_view v) { c.require_program_entry = parse_bool("require_program_entry", v); }},
      number("max_rounds", &PipelineConfig::max_rounds),
      number("compile_timeout_s", &PipelineConfig::compile_timeout_s),
      number("exec_timeout_s", &PipelineConfig::exec_timeout_s),
      number("temperature", &PipelineConfig::temperature),
      number("max_output_tokens", &PipelineConfig::max_output_tokens),
      number("workers", &PipelineConfig::workers),
      text("backend", &PipelineConfig::backend),
      text("model", &PipelineConfig::model),
      text("endpoint", &PipelineConfig::endpoint),
      text("api_path", &PipelineConfig::api_path),
      text("api_key_env", &PipelineConfig::api_key_env),
      text("script", &PipelineConfig::script),
      text("replay_log", &PipelineConfig::replay_log),
      text("record_log", &PipelineConfig::record_log),
      {"retry_entry_phase", [](const PipelineConfig& c) { return std::string(to_string(c.retry_entry_phase)); },
       [](PipelineConfig& c, std::string_view v) {
         try {
           c.retry_entry_phase = retry_entry_from_string(v);
         } catch (const Error&) {
           bad_value("retry_entry_phase", v, "unit_tests or translation");
         }
       }},
      text("translate_template", &PipelineConfig::translate_template),
      text("seeds", &PipelineConfig::seeds),
      text("out_dir", &PipelineConfig::out_dir),
      text("prompt_dir", &PipelineConfig::prompt_dir),
      text("scratch_dir", &PipelineConfig::scratch_dir),
      text("audit_dir", &PipelineConfig::audit_dir),
      text("fortran_compiler", &PipelineConfig::fortran_compiler),
      text("cpp_compiler", &PipelineConfig::cpp_compiler),
      number("max_concurrent_compiles", &PipelineConfig::max_concurrent_compiles),
  };
  return table;
}

bool looks_secret(std::string_view key) {
  const auto k = detail::to_lower(key);
  for (std::string_view word : {"api_key", "apikey", "token", "secret", "password"}) {
    if (k.find(word) != std::string::npos) return true;
  }
  return false;
}

std::string unquote(std::string_view value) {
  if (value.size() >= 2 && value.front() == '"' && value.back() == '"') return std::string(value.substr(1, value.size() - 2));
  // Unquoted values end at an inline comment.
  for (std::size_t i = 1; i < value.size(); ++i) {
    if (value[i] == '#' && detail::is_blank(value[i - 1])) return std::string(detail::trim(value.substr(0, i)));
  }
  return std::string(value);
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const auto keys = [] {
    std::vector<std::string> out;
    for (const auto& f : fields()) out.push_back(f.name);
    return out;
  }();
  return keys;
}

void apply_setting(PipelineConfig& config, std::string_view key, std::string_view value) {
  for (const auto& f : fields()) {
    if (f.name == key) {
      f.set(config, value);
      return;
    }
  }
  // Known keys such as max_seed_tokens are fine; the check only catches strays.
  if (looks_secret(key)) {
    throw Error(ErrorCode::Config, "key '" + std::string(key) +
                                       "' looks like a secret; secrets are read only from the environment variable "
                                       "named by api_key_env");
  }
  throw Error(ErrorCode::Config, "unknown key '" + std::string(key) + "'");
}

PipelineConfig parse_config(std::string_view text, std::string_view origin) {
  PipelineConfig config;
  std::size_t line_no = 0;
  for (auto raw : detail::split_lines(text)) {
    ++line_no;
    auto line = detail::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::Config, std::string(origin) + ":" + std::to_string(line_no) + ": expected key = value");
    }
    try {
      apply_setting(config, detail::trim(line.substr(0, eq)), unquote(detail::trim(line.substr(eq + 1))));
    } catch (const Error& e) {
      throw Error(ErrorCode::Config, std::string(origin) + ":" + std::to_string(line_no) + ": " + e.detail());
    }
  }
  return config;
}

std::string serialize(const PipelineConfig& config) {
  std::string out;
  for (const auto& f : fields()) {
    auto value = f.get(config);
    const bool quote = value != detail::trim(value) || value.find('#') != std::string::npos ||
                       (value.size() >= 2 && value.front() == '"' && value.back() == '"');
    out += f.name + " = " + (quote ? "\"" + value + "\"" : value) + "\n";
  }
  return out;
}

EnvLookup process_env() {
  return [](const std::string& name) -> std::optional<std::string> {
    if (const char* v = std::getenv(name.c_str())) return std::string(v);
    return std::nullopt;
  };
}

void apply_env(PipelineConfig& config, const EnvLookup& env) {
  for (const auto& f : fields()) {
    std::string name = "F2C_";
    for (char c : f.name) name += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (auto v = env(name)) {
      try {
        f.set(config, *v);
      } catch (const Error& e) {
        throw Error(ErrorCode::Config, name + ": " + e.detail());
      }
    }
  }
}

void validate(const PipelineConfig& c) {
  auto positive = [](std::string_view key, long long v) {
    if (v <= 0) throw Error(ErrorCode::Config, "key '" + std::string(key) + "' must be positive");
  };
  positive("max_seed_tokens", static_cast<long long>(c.max_seed_tokens));
  positive("max_rounds", c.max_rounds);
  positive("compile_timeout_s", c.compile_timeout_s);
  positive("exec_timeout_s", c.exec_timeout_s);
  positive("max_output_tokens", c.max_output_tokens);
  positive("workers", c.workers);
  if (c.max_concurrent_compiles < 0) throw Error(ErrorCode::Config, "key 'max_concurrent_compiles' must be >= 0");
  if (!(c.temperature >= 0.0 && c.temperature <= 2.0)) {
    throw Error(ErrorCode::Config, "key 'temperature' must be within [0, 2]");
  }
  if (c.backend != "http" && c.backend != "scripted" && c.backend != "replay") {
    throw Error(ErrorCode::Config, "key 'backend' must be http, scripted or replay");
  }
  if (c.translate_template != "q_ask_s_translation" && c.translate_template != "prompts_fortran_to_cpp") {
    throw Error(ErrorCode::Config, "key 'translate_template' must be q_ask_s_translation or prompts_fortran_to_cpp");
  }
}

PipelineConfig load_config(const std::optional<std::filesystem::path>& file, const EnvLookup& env,
                           const std::vector<std::pair<std::string, std::string>>& flags) {
  PipelineConfig config;
  if (file) {
    std::string text;
    try {
      text = detail::read_file(*file);
    } catch (const Error& e) {
      throw Error(ErrorCode::Config, e.detail());
    }
    config = parse_config(text, file->string());
  }
  apply_env(config, env);
  for (const auto& [key, value] : flags) apply_setting(config, key, value);
  validate(config);
  return config;
}

nlohmann::ordered_json to_json(const PipelineConfig& config) {
  nlohmann::ordered_json j;
  for (const auto& f : fields()) {
    if (f.name == "seeds" || f.name == "out_dir" || f.name == "scratch_dir" || f.name == "audit_dir") continue;
    j[f.name] = f.get(config);
  }
  return j;
}

SessionConfig session_config(const PipelineConfig& config) {
  SessionConfig s;
  s.max_rounds = config.max_rounds;
  s.exec_timeout_s = config.exec_timeout_s;
  s.retry_entry = config.retry_entry_phase;
  s.questioner.translate_template = config.translate_template;
  s.solver.model = config.model;
  s.solver.temperature = config.temperature;
  s.solver.max_output_tokens = config.max_output_tokens;
  s.solver.retry_action =
      config.retry_entry_phase == RetryEntry::UnitTests ? ActionKind::GenerateTestCases : ActionKind::Translate;
  if (!config.scratch_dir.empty()) s.scratch_root = config.scratch_dir;
  if (!config.audit_dir.empty()) s.audit_dir = std::filesystem::path(config.audit_dir);
  return s;
}

ToolchainOptions toolchain_options(const PipelineConfig& config) {
  ToolchainOptions t;
  t.fortran_compiler = config.fortran_compiler;
  t.cpp_compiler = config.cpp_compiler;
  t.compile_timeout_s = config.compile_timeout_s;
  t.max_concurrent_compiles = config.max_concurrent_compiles;
  return t;
}

}  // namespace f2c
