#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "f2c/codebleu.hpp"
#include "f2c/sandbox.hpp"

namespace f2c {

struct BenchmarkCase {
  std::string id;
  std::string fortran;
  std::string cpp;  // reference translation
  // Test-bearing programs, or bare test entries spliced into the sources.
  std::optional<std::string> fortran_test;
  std::optional<std::string> cpp_test;
};

/// Line-delimited JSON `{"id", "fortran", "cpp"}` with optional
/// `"fortran_test"` / `"cpp_test"`. Throws Error{Schema} naming the line.
std::vector<BenchmarkCase> load_benchmark(const std::filesystem::path& path);

/// Candidates as line-delimited JSON `{"id", "cpp"}`. Throws Error{Schema}.
std::map<std::string, std::string> load_translations(const std::filesystem::path& path);

struct Rate {
  std::size_t numerator = 0;
  std::size_t denominator = 0;

  std::optional<double> value() const;
  // "0.70 (207 / 296)"; "n/a (0 / 0)" for an empty set.
  std::string render() const;
  friend bool operator==(const Rate&, const Rate&) = default;
};

nlohmann::ordered_json to_json(const Rate& rate);

/// Compiles each candidate to an object file in its own workspace.
Rate compilation_check(std::span<const std::string> candidates, const Sandbox& sandbox,
                       const std::filesystem::path& scratch_root);

struct ExecutionResult {
  bool passed = false;
  std::optional<ToolOutcome> fortran;
  std::optional<ToolOutcome> cpp;
  std::string note;
};

/// Builds the test-bearing candidate (and the Fortran side when tests for it
/// exist) and runs both. Passes when the C++ test exits 0 and reaches the
/// same verdict as the Fortran test. Throws Error{MissingTests} without a
/// C++ test.
ExecutionResult execution_test(const BenchmarkCase& benchmark, std::string_view candidate, const Sandbox& sandbox,
                               const std::filesystem::path& scratch_root, int timeout_s);

struct EvalOptions {
  CodeBleuWeights weights;
  std::filesystem::path scratch_root = std::filesystem::temp_directory_path();
  int exec_timeout_s = 60;
  bool run_tools = true;  // false scores CodeBLEU only
};

struct CaseRow {
  std::string id;
  bool translated = false;
  std::optional<CodeBleuScore> codebleu;
  bool compiled = false;
  bool executed = false;
  std::string note;
};

struct EvalReport {
  double codebleu_mean = 0;
  Rate compile;
  Rate exec;
  std::vector<CaseRow> rows;
  // Candidates whose id is not in the benchmark.
  std::vector<std::string> unknown_ids;
  CodeBleuWeights weights;
};

/// Scores every benchmark case; a missing translation fails every metric
/// and contributes 0 to the CodeBLEU mean.
EvalReport evaluate_corpus(std::span<const BenchmarkCase> bench, const std::map<std::string, std::string>& translations,
                           const Sandbox* sandbox, const EvalOptions& options);

nlohmann::ordered_json to_json(const EvalReport& report);
// Aligned text in the layout "CodeBLEU | Compilation | Execution".
std::string render_table(const EvalReport& report);

}  // namespace f2c
