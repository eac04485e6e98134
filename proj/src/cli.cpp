#include "f2c/cli.hpp"

#include <iostream>
#include <memory>
#include <optional>

#include <CLI11.hpp>

#include "f2c/config.hpp"
#include "f2c/dataset.hpp"
#include "f2c/error.hpp"
#include "f2c/eval.hpp"
#include "f2c/llm_backend.hpp"
#include "f2c/preprocess.hpp"
#include "f2c/refine.hpp"
#include "text_util.hpp"

namespace f2c {

namespace fs = std::filesystem;

namespace {

int exit_code_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::Config:
    case ErrorCode::Schema:
    case ErrorCode::WeightError:
    case ErrorCode::MissingTemplate:
    case ErrorCode::UnboundPlaceholder:
    case ErrorCode::ScriptExhausted:
    case ErrorCode::ReplayMismatch:
      return kExitConfig;
    case ErrorCode::ToolchainMissing:
      return kExitToolchain;
    case ErrorCode::AuthFailure:
      return kExitAuth;
    default:
      return kExitMalformedRows;
  }
}

struct GenerateArgs {
  std::string config;
  std::string seeds;
  std::string out;
  std::string backend;
  std::string model;
  std::string script;
  std::string replay_log;
  std::string record_log;
  std::string audit_dir;
  int workers = 0;
  int max_rounds = 0;
  int timeout = 0;
  bool dry_run = false;
};

std::vector<std::pair<std::string, std::string>> flag_overrides(const CLI::App& cmd, const GenerateArgs& a) {
  std::vector<std::pair<std::string, std::string>> flags;
  auto given = [&cmd](const char* name) { return cmd.count(name) > 0; };
  if (given("--seeds")) flags.emplace_back("seeds", a.seeds);
  if (given("--out")) flags.emplace_back("out_dir", a.out);
  if (given("--backend")) flags.emplace_back("backend", a.backend);
  if (given("--model")) flags.emplace_back("model", a.model);
  if (given("--script")) flags.emplace_back("script", a.script);
  if (given("--replay-log")) flags.emplace_back("replay_log", a.replay_log);
  if (given("--record-log")) flags.emplace_back("record_log", a.record_log);
  if (given("--audit-dir")) flags.emplace_back("audit_dir", a.audit_dir);
  if (given("--workers")) flags.emplace_back("workers", std::to_string(a.workers));
  if (given("--max-rounds")) flags.emplace_back("max_rounds", std::to_string(a.max_rounds));
  if (given("--timeout")) {
    flags.emplace_back("exec_timeout_s", std::to_string(a.timeout));
    flags.emplace_back("compile_timeout_s", std::to_string(a.timeout));
  }
  return flags;
}

std::optional<fs::path> config_path(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return fs::path(s);
}

std::unique_ptr<LlmBackend> make_backend(const PipelineConfig& config) {
  if (config.backend == "scripted") {
    if (config.script.empty()) throw Error(ErrorCode::Config, "the scripted backend needs 'script' (--script)");
    return ScriptedBackend::from_file(config.script);
  }
  if (config.backend == "replay") {
    if (config.replay_log.empty()) throw Error(ErrorCode::Config, "the replay backend needs 'replay_log'");
    return std::make_unique<ReplayBackend>(config.replay_log);
  }
  if (config.endpoint.empty() || config.model.empty()) {
    throw Error(ErrorCode::Config, "the http backend needs 'endpoint' and 'model'");
  }
  HttpBackendOptions options;
  options.endpoint = config.endpoint;
  options.path = config.api_path;
  options.model = config.model;
  options.api_key_env = config.api_key_env;
  return std::make_unique<HttpBackend>(std::move(options));
}

PromptLibrary load_prompts(const PipelineConfig& config) {
  return config.prompt_dir.empty() ? PromptLibrary::builtin() : PromptLibrary::from_directory(config.prompt_dir);
}

int cmd_generate(const CLI::App& cmd, const GenerateArgs& args, std::ostream& out) {
  const auto config = load_config(config_path(args.config), process_env(), flag_overrides(cmd, args));
  if (config.seeds.empty()) throw Error(ErrorCode::Config, "no seeds given (--seeds or 'seeds')");
  const auto seeds = load_seeds(config.seeds);
  const fs::path out_dir = config.out_dir;
  FilterOptions filter{config.max_seed_tokens, config.require_program_entry};

  if (args.dry_run) {
    JsonlSink report(out_dir / "filter_report.jsonl");
    std::size_t accepted = 0;
    for (auto seed : seeds) {
      if (seed.annotations().token_count == 0 && !seed.text().empty()) annotate(seed);
      const auto decision = filter_seed(seed, filter);
      nlohmann::ordered_json row;
      row["id"] = seed.id();
      row["accepted"] = decision.accepted();
      row["reasons"] = nlohmann::ordered_json::array();
      for (auto r : decision.reasons) row["reasons"].push_back(to_string(r));
      row["token_count"] = seed.annotations().token_count;
      row["external_refs"] = seed.annotations().external_refs;
      report.append(row);
      accepted += decision.accepted() ? 1 : 0;
    }
    out << "dry run: " << seeds.size() << " seeds, " << accepted << " pass the filters; report in "
        << (out_dir / "filter_report.jsonl").string() << "\n";
    return kExitOk;
  }

  const Sandbox sandbox(toolchain_options(config));
  const auto prompts = load_prompts(config);
  auto backend = make_backend(config);
  std::unique_ptr<RecordingBackend> recorder;
  LlmBackend* active = backend.get();
  if (!config.record_log.empty()) {
    recorder = std::make_unique<RecordingBackend>(*backend, config.record_log);
    active = recorder.get();
  }

  CorpusOptions options{session_config(config), filter, config.workers};
  const auto result = run_corpus(seeds, options, prompts, sandbox, *active);

  std::vector<PairRecord> pairs;
  std::vector<Dialogue> accepted_dialogues;
  std::vector<Dialogue> rejected_dialogues;
  JsonlSink rejects(out_dir / "rejects.jsonl");
  for (const auto& s : result.sessions) {
    if (s.pair) {
      pairs.push_back(*s.pair);
      accepted_dialogues.push_back(s.dialogue);
      continue;
    }
    nlohmann::ordered_json row;
    row["id"] = s.id;
    row["reason"] = s.reject_reason ? std::string(to_string(*s.reject_reason)) : "";
    row["reasons"] = nlohmann::ordered_json::array();
    for (auto r : s.filter_reasons) row["reasons"].push_back(to_string(r));
    row["rounds_used"] = s.rounds_used;
    row["detail"] = s.detail;
    rejects.append(row);
    if (s.reject_reason != RejectReason::FilteredOut && !s.dialogue.messages.empty()) {
      rejected_dialogues.push_back(s.dialogue);
    }
  }
  const auto pair_count = emit_pairs(pairs, out_dir / "pairs.jsonl");
  const auto dialogues = emit_dialogues(accepted_dialogues, out_dir / "dialogues.jsonl");
  const auto rejected = emit_dialogues(rejected_dialogues, out_dir / "dialogues_rejected.jsonl");

  nlohmann::ordered_json extra;
  extra["config"] = to_json(config);
  extra["toolchain"] = to_json(sandbox.toolchain());
  extra["outputs"] = {{"pairs", pair_count},
                      {"dialogue_records", dialogues.records},
                      {"rejected_dialogue_records", rejected.records},
                      {"malformed_dialogues", dialogues.rejects + rejected.rejects}};
  detail::write_file(out_dir / "run_report.json", run_report_json(result, extra).dump(2) + "\n");

  const auto& rep = result.report;
  out << "seeds " << rep.seeds << ", filtered " << rep.filtered_out << ", sessions " << rep.sessions << ", accepted "
      << rep.accepted << " (budget exhausted " << rep.budget_exhausted << ", verdict no " << rep.verdict_no
      << ", backend failure " << rep.backend_failure << ")\n";
  out << "wrote " << pair_count << " pairs and " << dialogues.records << " dialogue records to " << out_dir.string()
      << "\n";
  return kExitOk;
}

int cmd_split(const std::string& input, const std::string& output, std::ostream& out, std::ostream& err) {
  const auto file = read_dialogues(input);
  bool malformed = !file.errors.empty();
  for (const auto& e : file.errors) err << input << ":" << e.line << ": " << e.message << "\n";
  std::vector<Dialogue> good;
  for (std::size_t i = 0; i < file.dialogues.size(); ++i) {
    std::string why;
    if (is_well_formed(file.dialogues[i], &why)) {
      good.push_back(file.dialogues[i]);
    } else {
      malformed = true;
      err << input << ":" << file.lines[i] << ": " << why << "\n";
    }
  }
  const auto written = emit_dialogues(good, output);
  out << "dialogues in: " << file.dialogues.size() + file.errors.size() << ", records out: " << written.records
      << "\n";
  return malformed ? kExitMalformedRows : kExitOk;
}

struct EvalArgs {
  std::string config;
  std::string bench;
  std::string translations;
  std::string weights;
  std::string out;
  bool no_exec = false;
  bool json = false;
};

int cmd_eval(const EvalArgs& args, std::ostream& out, std::ostream& err) {
  const auto config = load_config(config_path(args.config), process_env(), {});
  EvalOptions options;
  if (!args.weights.empty()) options.weights = parse_weights(args.weights);
  options.exec_timeout_s = config.exec_timeout_s;
  if (!config.scratch_dir.empty()) options.scratch_root = config.scratch_dir;
  options.run_tools = !args.no_exec;

  const auto bench = load_benchmark(args.bench);
  const auto translations = load_translations(args.translations);
  std::optional<Sandbox> sandbox;
  if (options.run_tools) sandbox.emplace(toolchain_options(config));
  const auto report = evaluate_corpus(bench, translations, sandbox ? &*sandbox : nullptr, options);
  for (const auto& id : report.unknown_ids) err << "warning: translation for unknown id '" << id << "'\n";

  const auto json = to_json(report).dump(2) + "\n";
  if (!args.out.empty()) detail::write_file(args.out, json);
  out << (args.json ? json : render_table(report));
  return kExitOk;
}

int cmd_stats(const std::string& pairs_path, const std::string& json_out, std::size_t top, std::ostream& out) {
  const auto pairs = read_pairs(pairs_path);
  nlohmann::ordered_json j;
  j["pairs"] = pairs.size();
  for (auto language : {Language::Fortran, Language::Cpp}) {
    const std::string name = language == Language::Fortran ? "fortran" : "cpp";
    const auto histogram = keyword_histogram(pairs, language);
    const auto best = top_k(histogram, top);
    const auto lines = line_count_distribution(pairs, language);
    nlohmann::ordered_json counts = nlohmann::ordered_json::object();
    for (const auto& [k, v] : histogram) counts[k] = v;
    nlohmann::ordered_json top_rows = nlohmann::ordered_json::array();
    for (const auto& [k, v] : best) top_rows.push_back({k, v});
    nlohmann::ordered_json bins = nlohmann::ordered_json::object();
    std::vector<std::pair<std::string, std::size_t>> bin_rows;
    for (const auto& [lo, n] : lines) {
      const auto label = std::to_string(lo) + "-" + std::to_string(lo + 9);
      bins[label] = n;
      bin_rows.emplace_back(label, n);
    }
    j[name + "_keywords"] = counts;
    j[name + "_top"] = top_rows;
    j[name + "_line_counts"] = bins;

    out << (language == Language::Fortran ? "Fortran" : "C++") << " keywords (top " << top << ")\n"
        << render_bar_chart(best) << "\n"
        << (language == Language::Fortran ? "Fortran" : "C++") << " source line counts\n"
        << render_bar_chart(bin_rows) << "\n";
  }
  if (!json_out.empty()) detail::write_file(json_out, j.dump(2) + "\n");
  return kExitOk;
}

int cmd_probe(const std::string& config_file, std::ostream& out) {
  const auto config = load_config(config_path(config_file), process_env(), {});
  out << to_json(probe_toolchain(toolchain_options(config))).dump(2) << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Fortran to C++ translation dataset pipeline", "f2c"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "Translate seeds and write verified pairs and dialogues");
  generate->add_option("--config", gen.config, "key = value configuration file");
  generate->add_option("--seeds", gen.seeds, "seed directory or JSONL file");
  generate->add_option("--out", gen.out, "output directory");
  generate->add_option("--backend", gen.backend, "http, scripted or replay");
  generate->add_option("--model", gen.model, "model name sent to the backend");
  generate->add_option("--script", gen.script, "scripted backend responses (JSON)");
  generate->add_option("--replay-log", gen.replay_log, "recorded exchanges to replay");
  generate->add_option("--record-log", gen.record_log, "append every exchange to this file");
  generate->add_option("--workers", gen.workers, "concurrent sessions");
  generate->add_option("--max-rounds", gen.max_rounds, "refinement rounds per session");
  generate->add_option("--timeout", gen.timeout, "compile and run timeout in seconds");
  generate->add_option("--audit-dir", gen.audit_dir, "keep every intermediate source and outcome here");
  generate->add_flag("--dry-run", gen.dry_run, "only run the seed filters");

  std::string split_in;
  std::string split_out;
  auto* split = app.add_subcommand("split", "Split dialogues into cumulative-prefix records");
  split->add_option("input", split_in, "dialogue JSONL (or JSON array)")->required();
  split->add_option("output", split_out, "record JSONL")->required();

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "Score candidate translations against a benchmark");
  eval->add_option("--config", ev.config, "configuration file (toolchain, timeouts)");
  eval->add_option("--bench", ev.bench, "benchmark JSONL")->required();
  eval->add_option("--translations", ev.translations, "candidate JSONL {id, cpp}")->required();
  eval->add_option("--weights", ev.weights, "CodeBLEU weights a,b,c,d");
  eval->add_option("--out", ev.out, "write the JSON report here");
  eval->add_flag("--no-exec", ev.no_exec, "CodeBLEU only, no compiler runs");
  eval->add_flag("--json", ev.json, "print JSON instead of the table");

  std::string stats_in;
  std::string stats_out;
  std::size_t stats_top = 20;
  auto* stats = app.add_subcommand("stats", "Keyword histograms and line-count distributions of a pair file");
  stats->add_option("pairs", stats_in, "pairs JSONL")->required();
  stats->add_option("--out", stats_out, "write JSON here");
  stats->add_option("--top", stats_top, "keywords to show");

  std::string probe_config;
  auto* probe = app.add_subcommand("probe", "Report the resolved compilers");
  probe->add_option("--config", probe_config, "configuration file");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (generate->parsed()) return cmd_generate(*generate, gen, out);
    if (split->parsed()) return cmd_split(split_in, split_out, out, err);
    if (eval->parsed()) return cmd_eval(ev, out, err);
    if (stats->parsed()) return cmd_stats(stats_in, stats_out, stats_top, out);
    if (probe->parsed()) return cmd_probe(probe_config, out);
  } catch (const Error& e) {
    err << "f2c: " << e.what() << "\n";
    if (e.code() == ErrorCode::ToolchainMissing) {
      err << "f2c: install it or set fortran_compiler / cpp_compiler in the configuration\n";
    }
    return exit_code_for(e);
  } catch (const std::exception& e) {
    err << "f2c: " << e.what() << "\n";
    return kExitMalformedRows;
  }
  return kExitOk;
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace f2c
