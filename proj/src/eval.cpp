#include "f2c/eval.hpp"

#include <cstdio>
#include <set>

#include "f2c/agent.hpp"
#include "f2c/error.hpp"
#include "f2c/source_edit.hpp"
#include "text_util.hpp"

namespace f2c {

namespace fs = std::filesystem;

namespace {

template <typename F>
void for_each_row(const fs::path& path, F&& on_row) {
  const auto text = detail::read_file(path);
  std::size_t line_no = 0;
  for (auto line : detail::split_lines(text)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    try {
      on_row(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::Schema, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(ErrorCode::Schema, path.string() + ":" + std::to_string(line_no) + ": " + e.detail());
    }
  }
}

std::optional<std::string> optional_string(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<std::string>();
}

}  // namespace

std::vector<BenchmarkCase> load_benchmark(const fs::path& path) {
  std::vector<BenchmarkCase> cases;
  std::set<std::string> seen;
  for_each_row(path, [&](const nlohmann::json& j) {
    BenchmarkCase c{j.at("id").get<std::string>(), j.at("fortran").get<std::string>(), j.at("cpp").get<std::string>(),
                    optional_string(j, "fortran_test"), optional_string(j, "cpp_test")};
    if (c.fortran.empty() || c.cpp.empty()) throw Error(ErrorCode::Schema, "fortran and cpp must be non-empty");
    if (!seen.insert(c.id).second) throw Error(ErrorCode::Schema, "duplicate id '" + c.id + "'");
    cases.push_back(std::move(c));
  });
  return cases;
}

std::map<std::string, std::string> load_translations(const fs::path& path) {
  std::map<std::string, std::string> out;
  for_each_row(path, [&](const nlohmann::json& j) {
    out[j.at("id").get<std::string>()] = j.at("cpp").get<std::string>();
  });
  return out;
}

std::optional<double> Rate::value() const {
  if (denominator == 0) return std::nullopt;
  return static_cast<double>(numerator) / static_cast<double>(denominator);
}

std::string Rate::render() const {
  char buf[64];
  if (auto v = value()) {
    std::snprintf(buf, sizeof buf, "%.2f (%zu / %zu)", *v, numerator, denominator);
  } else {
    std::snprintf(buf, sizeof buf, "n/a (%zu / %zu)", numerator, denominator);
  }
  return buf;
}

nlohmann::ordered_json to_json(const Rate& rate) {
  nlohmann::ordered_json j;
  auto v = rate.value();
  j["rate"] = v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json();
  j["numerator"] = rate.numerator;
  j["denominator"] = rate.denominator;
  j["display"] = rate.render();
  return j;
}

Rate compilation_check(std::span<const std::string> candidates, const Sandbox& sandbox, const fs::path& scratch_root) {
  Rate rate;
  for (const auto& source : candidates) {
    auto ws = Workspace::create(scratch_root);
    ++rate.denominator;
    if (sandbox.compile_cpp(source, ws, CompileMode::ObjectOnly).ok()) ++rate.numerator;
  }
  return rate;
}

ExecutionResult execution_test(const BenchmarkCase& benchmark, std::string_view candidate, const Sandbox& sandbox,
                               const fs::path& scratch_root, int timeout_s) {
  if (!benchmark.cpp_test) throw Error(ErrorCode::MissingTests, "case " + benchmark.id + " has no C++ test");
  ExecutionResult result;
  auto ws = Workspace::create(scratch_root);

  auto fortran_verdict = OutcomeClass::Ok;
  if (benchmark.fortran_test) {
    const auto program = install_entry(benchmark.fortran, *benchmark.fortran_test, Language::Fortran);
    auto compiled = sandbox.compile_fortran(program, ws);
    if (compiled.ok()) {
      result.fortran = sandbox.execute("test_f", ws, timeout_s);
      fortran_verdict = classify(*result.fortran);
    } else {
      result.fortran = std::move(compiled);
      result.note = "Fortran test does not compile";
      return result;
    }
  }

  const auto program = install_entry(candidate, *benchmark.cpp_test, Language::Cpp);
  auto compiled = sandbox.compile_cpp(program, ws);
  if (!compiled.ok()) {
    result.cpp = std::move(compiled);
    result.note = "C++ test does not compile";
    return result;
  }
  result.cpp = sandbox.execute("test_cpp", ws, timeout_s);
  const auto& run = *result.cpp;
  if (run.timed_out) {
    result.note = "C++ test timed out";
  } else if (!run.ok()) {
    result.note = "C++ test exited with " + std::to_string(run.exit_code.value_or(-1));
  } else if (classify(run) != fortran_verdict) {
    result.note = "C++ and Fortran test verdicts differ";
  } else {
    result.passed = true;
  }
  return result;
}

EvalReport evaluate_corpus(std::span<const BenchmarkCase> bench, const std::map<std::string, std::string>& translations,
                           const Sandbox* sandbox, const EvalOptions& options) {
  validate(options.weights);
  EvalReport report;
  report.weights = options.weights;
  const bool tools = options.run_tools && sandbox;
  std::set<std::string, std::less<>> ids;
  double codebleu_sum = 0;
  for (const auto& c : bench) {
    ids.insert(c.id);
    CaseRow row;
    row.id = c.id;
    if (tools) {
      ++report.compile.denominator;
      ++report.exec.denominator;
    }
    auto it = translations.find(c.id);
    if (it == translations.end()) {
      row.note = "no translation";
      report.rows.push_back(std::move(row));
      continue;
    }
    row.translated = true;
    row.codebleu = codebleu(c.cpp, it->second, options.weights);
    codebleu_sum += row.codebleu->total;
    if (tools) {
      try {
        auto ws = Workspace::create(options.scratch_root);
        row.compiled = sandbox->compile_cpp(it->second, ws, CompileMode::ObjectOnly).ok();
        if (!row.compiled) {
          row.note = "does not compile";
        } else {
          auto exec = execution_test(c, it->second, *sandbox, options.scratch_root, options.exec_timeout_s);
          row.executed = exec.passed;
          row.note = exec.note;
        }
      } catch (const Error& e) {
        row.note = e.what();
      }
      report.compile.numerator += row.compiled ? 1 : 0;
      report.exec.numerator += row.executed ? 1 : 0;
    }
    report.rows.push_back(std::move(row));
  }
  report.codebleu_mean = bench.empty() ? 0.0 : codebleu_sum / static_cast<double>(bench.size());
  for (const auto& [id, source] : translations) {
    if (!ids.contains(id)) report.unknown_ids.push_back(id);
  }
  return report;
}

nlohmann::ordered_json to_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["codebleu_mean"] = report.codebleu_mean;
  j["codebleu_weights"] = {{"ngram", report.weights.ngram},
                           {"weighted_ngram", report.weights.weighted_ngram},
                           {"syntax", report.weights.syntax},
                           {"dataflow", report.weights.dataflow}};
  j["codebleu_smoothing"] = "add-one on every n-gram order";
  j["compile_rate"] = to_json(report.compile);
  j["exec_rate"] = to_json(report.exec);
  j["unknown_ids"] = report.unknown_ids;
  auto& rows = j["per_case"] = nlohmann::ordered_json::array();
  for (const auto& r : report.rows) {
    nlohmann::ordered_json row;
    row["id"] = r.id;
    row["translated"] = r.translated;
    row["codebleu"] = r.codebleu ? to_json(*r.codebleu) : nlohmann::ordered_json();
    row["compiled"] = r.compiled;
    row["executed"] = r.executed;
    if (!r.note.empty()) row["note"] = r.note;
    rows.push_back(std::move(row));
  }
  return j;
}

std::string render_table(const EvalReport& report) {
  char buf[256];
  std::string out;
  std::snprintf(buf, sizeof buf, "%-10s %-20s %-20s\n", "CodeBLEU", "Compilation", "Execution");
  out += buf;
  std::snprintf(buf, sizeof buf, "%-10.2f %-20s %-20s\n", report.codebleu_mean, report.compile.render().c_str(),
                report.exec.render().c_str());
  out += buf;
  if (report.rows.empty()) return out;

  std::size_t id_width = 2;
  for (const auto& r : report.rows) id_width = std::max(id_width, r.id.size());
  out += '\n';
  std::snprintf(buf, sizeof buf, "%-*s  %-8s  %-7s  %-4s  %s\n", static_cast<int>(id_width), "id", "codebleu", "compile",
                "exec", "note");
  out += buf;
  for (const auto& r : report.rows) {
    const std::string score = r.codebleu ? std::to_string(r.codebleu->total).substr(0, 6) : "-";
    std::snprintf(buf, sizeof buf, "%-*s  %-8s  %-7s  %-4s  ", static_cast<int>(id_width), r.id.c_str(), score.c_str(),
                  r.compiled ? "yes" : "no", r.executed ? "yes" : "no");
    out += buf;
    out += r.note;
    out += '\n';
  }
  for (const auto& id : report.unknown_ids) out += "warning: translation for unknown id '" + id + "'\n";
  return out;
}

}  // namespace f2c
