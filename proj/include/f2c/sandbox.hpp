#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <vector>

#include <json.hpp>

#include "f2c/preprocess.hpp"

namespace f2c {

enum class ToolKind { CompileFortran, CompileCpp, Execute };
std::string_view to_string(ToolKind kind);

struct ToolOutcome {
  ToolKind kind = ToolKind::Execute;
  std::optional<int> exit_code;  // absent when timed out
  std::string stdout_text;
  std::string stderr_text;
  bool timed_out = false;
  std::int64_t wall_time_ms = 0;
  // Relative to the workspace root, runnable with `sh -c` from there.
  std::string command_line;

  bool ok() const { return !timed_out && exit_code && *exit_code == 0; }
  friend bool operator==(const ToolOutcome&, const ToolOutcome&) = default;
};

nlohmann::ordered_json to_json(const ToolOutcome& outcome, bool include_timing = true);
ToolOutcome tool_outcome_from_json(const nlohmann::json& j);

/// A unique scratch directory, removed on destruction or release().
class Workspace {
 public:
  static Workspace create(const std::filesystem::path& scratch_root);

  Workspace(Workspace&& other) noexcept;
  Workspace& operator=(Workspace&& other) noexcept;
  Workspace(const Workspace&) = delete;
  Workspace& operator=(const Workspace&) = delete;
  ~Workspace();

  const std::filesystem::path& root() const { return root_; }
  bool live() const { return !root_.empty(); }

  void register_artifact(std::string name, std::filesystem::path path);
  std::optional<std::filesystem::path> artifact(std::string_view name) const;
  const std::map<std::string, std::filesystem::path, std::less<>>& artifacts() const { return artifacts_; }

  // Writes `content` to root/name and registers it under `name`.
  std::filesystem::path write(const std::string& name, std::string_view content);

  void release();

 private:
  explicit Workspace(std::filesystem::path root) : root_(std::move(root)) {}
  std::filesystem::path root_;
  std::map<std::string, std::filesystem::path, std::less<>> artifacts_;
};

inline constexpr std::string_view kWorkspacePrefix = "f2c-ws-";

struct ToolchainOptions {
  std::string fortran_compiler = "gfortran";
  std::string cpp_compiler = "g++";
  std::vector<std::string> fortran_flags = {"-fopenmp"};
  std::vector<std::string> cpp_flags = {"-fopenmp"};
  int compile_timeout_s = 60;
  std::size_t output_limit_bytes = 64 * 1024;
  // Optional limits for executed binaries; 0 disables.
  std::size_t memory_limit_mb = 0;
  int cpu_limit_s = 0;
  // Concurrent compiler processes; 0 means hardware concurrency.
  int max_concurrent_compiles = 0;
};

struct ToolchainReport {
  std::string fortran_compiler;  // resolved absolute path
  std::string fortran_version;
  std::string cpp_compiler;
  std::string cpp_version;

  friend bool operator==(const ToolchainReport&, const ToolchainReport&) = default;
};

nlohmann::ordered_json to_json(const ToolchainReport& report);
ToolchainReport toolchain_report_from_json(const nlohmann::json& j);

/// Resolves both compilers on PATH and records their version lines. Default
/// names (`gfortran`, `g++`) fall back to versioned names such as
/// `gfortran-11`. Throws Error{ToolchainMissing} naming the missing tool.
ToolchainReport probe_toolchain(const ToolchainOptions& options);

// Searches PATH; absolute or relative paths containing '/' are checked as is.
std::optional<std::filesystem::path> find_executable(std::string_view name);

enum class CompileMode { Link, ObjectOnly };

/// Compiles and runs sources inside workspaces. Safe to share between
/// session workers; compiler processes are capped by a semaphore.
class Sandbox {
 public:
  explicit Sandbox(ToolchainOptions options);  // probes; may throw ToolchainMissing

  const ToolchainReport& toolchain() const { return report_; }
  const ToolchainOptions& options() const { return options_; }

  // Writes test.f90 (test.f for fixed form) and builds test_f.
  ToolOutcome compile_fortran(std::string_view source, Workspace& ws, SourceForm form = SourceForm::Free) const;
  // Writes test.cpp and builds test_cpp (or test_cpp.o).
  ToolOutcome compile_cpp(std::string_view source, Workspace& ws, CompileMode mode = CompileMode::Link) const;
  // Runs a registered binary with no stdin; kills its process group at the
  // timeout. Throws Error{BinaryMissing}.
  ToolOutcome execute(std::string_view binary, const Workspace& ws, int timeout_s) const;

 private:
  ToolOutcome compile(ToolKind kind, const std::filesystem::path& compiler, const std::vector<std::string>& flags,
                      const std::string& source_name, const std::string& output_name, std::string_view source,
                      Workspace& ws, bool object_only) const;

  ToolchainOptions options_;
  ToolchainReport report_;
  std::unique_ptr<std::counting_semaphore<>> compile_slots_;
};

struct ProcessLimits {
  std::size_t output_limit_bytes = 64 * 1024;
  std::size_t memory_limit_mb = 0;
  int cpu_limit_s = 0;
};

struct ProcessResult {
  std::optional<int> exit_code;
  std::string stdout_text;
  std::string stderr_text;
  bool timed_out = false;
  std::int64_t wall_time_ms = 0;
};

/// Runs argv[0] (an absolute path) in its own process group with stdin from
/// /dev/null. Output beyond the limit is dropped and a marker appended.
ProcessResult run_process(const std::vector<std::string>& argv, const std::filesystem::path& cwd, int timeout_s,
                          const ProcessLimits& limits);

std::string shell_join(const std::vector<std::string>& argv);

}  // namespace f2c
