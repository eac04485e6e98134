#include <doctest.h>

#include "f2c/dataset.hpp"
#include "f2c/refine.hpp"
#include "f2c/source_edit.hpp"
#include "support.hpp"

using namespace f2c;
using namespace f2c::testing;

namespace {

const Sandbox& sandbox() {
  static const Sandbox s(quick_toolchain());
  return s;
}

const PromptLibrary& prompts() {
  static const PromptLibrary p = PromptLibrary::builtin();
  return p;
}

SourceUnit add_seed(const std::string& id = "add") {
  SourceUnit u(id, Language::Fortran, kAddSeed, "test", SourceForm::Free);
  annotate(u);
  return u;
}

SessionConfig config_in(const ScratchDir& scratch) {
  SessionConfig c;
  c.scratch_root = scratch.path();
  c.exec_timeout_s = 10;
  return c;
}

// The broken translation's definitions repaired, with the test entry.
const char* kAddCppFixedWithTests = R"(#include <cassert>
#include <cstdio>

int add(int a, int b) { return a + b; }

int main() {
  assert(add(2, 3) == 5);
  assert(add(-4, 4) == 0);
  std::printf("cpp checks ok\n");
  return 0;
})";

// Compiles, but subtracts.
const char* kAddCppWrong = R"(#include <cstdio>

int add(int a, int b) { return a - b; }

int main() {
  std::printf("%d\n", add(2, 3));
  return 0;
})";

bool has_user_message_containing(const Dialogue& d, const std::string& needle) {
  return std::any_of(d.messages.begin(), d.messages.end(), [&](const Message& m) {
    return m.role == Role::User && m.content.find(needle) != std::string::npos;
  });
}

void check_terminal_laws(const SessionResult& r, int max_rounds) {
  CHECK(r.rounds_used <= max_rounds);
  CHECK(r.status != SessionStatus::Running);
  if (r.status == SessionStatus::Rejected) CHECK(r.reject_reason.has_value());
  if (r.reject_reason == RejectReason::BudgetExhausted) CHECK(r.rounds_used == max_rounds);
  if (!r.dialogue.messages.empty()) CHECK(is_well_formed(r.dialogue));
  if (r.pair) {
    REQUIRE(r.pair->evidence.size() == 4);
    for (const auto& e : r.pair->evidence) CHECK(e.ok());
  }
}

}  // namespace

TEST_CASE("budget law") {
  RefinementBudget b{2, 0};
  b.consume();
  b.consume();
  CHECK(b.exhausted());
  CHECK_THROWS_AS(b.consume(), Error);
  CHECK(b.rounds_used == 2);
}

TEST_CASE("correct first try: three exchanges, no rounds") {
  ScratchDir scratch;
  const auto config = config_in(scratch);
  ScriptedBackend backend({translation_reply(), tests_reply(), "Yes"});
  const auto r = translate_seed(add_seed(), config, prompts(), sandbox(), backend);
  CHECK(r.status == SessionStatus::Accepted);
  CHECK(r.rounds_used == 0);
  CHECK(r.dialogue.messages.size() == 6);
  REQUIRE(r.pair.has_value());
  CHECK(r.pair->fortran == kAddSeed);
  CHECK(r.pair->cpp == kAddCpp);
  CHECK(r.pair->cpp_with_tests.find("assert(add(2, 3) == 5)") != std::string::npos);
  CHECK(r.pair->fortran_with_tests.find("program add_test") != std::string::npos);
  check_terminal_laws(r, config.max_rounds);
  CHECK(entries(scratch.path()).empty());

  // Soundness: the stored commands reproduce on the stored sources.
  ScratchDir replay_root;
  const auto replayed = replay_pair(*r.pair, replay_root.path(), 10);
  REQUIRE(replayed.size() == 4);
  for (const auto& o : replayed) CHECK(o.exit_code == 0);
  CHECK(replayed[2].stdout_text == "fortran checks ok\n");
  CHECK(replayed[3].stdout_text == "cpp checks ok\n");
}

TEST_CASE("a syntax error is repaired in one round") {
  ScratchDir scratch;
  const auto config = config_in(scratch);
  ScriptedBackend backend(
      {translation_reply(kAddCppBroken), tests_reply(), "Fixed:\n" + fenced("cpp", kAddCppFixedWithTests), "Yes"});
  const auto r = translate_seed(add_seed(), config, prompts(), sandbox(), backend);
  CHECK(r.status == SessionStatus::Accepted);
  CHECK(r.rounds_used == 1);
  CHECK(has_user_message_containing(r.dialogue, "The compiler is throwing errors"));
  CHECK(has_user_message_containing(r.dialogue, "error"));
  CHECK(has_user_message_containing(r.dialogue, "expected ';'"));
  REQUIRE(r.pair.has_value());
  // The plain translation got the fix but kept its own main.
  CHECK(r.pair->cpp.find("return a + b; }") != std::string::npos);
  CHECK(r.pair->cpp.find("std::printf(\"%d\\n\", add(2, 3))") != std::string::npos);
  check_terminal_laws(r, config.max_rounds);
}

TEST_CASE("always broken code exhausts the budget and leaves no residue") {
  ScratchDir scratch;
  const auto config = config_in(scratch);
  ScriptedBackend backend({translation_reply(kAddCppBroken), tests_reply()});
  for (int i = 0; i < 5; ++i) backend.push(fenced("cpp", kAddCppBroken));
  const auto r = translate_seed(add_seed(), config, prompts(), sandbox(), backend);
  CHECK(r.status == SessionStatus::Rejected);
  CHECK(r.reject_reason == RejectReason::BudgetExhausted);
  CHECK(r.rounds_used == 5);
  CHECK(backend.calls() == 7);
  CHECK_FALSE(r.pair.has_value());
  check_terminal_laws(r, config.max_rounds);
  CHECK(entries(scratch.path()).empty());
}

TEST_CASE("a runtime failure asks for an execution fix with both outputs") {
  ScratchDir scratch;
  const auto config = config_in(scratch);
  ScriptedBackend backend;
  Session session(add_seed(), config, prompts(), sandbox(), backend);
  auto& facts = session.state().memory.facts;
  facts.fortran_with_tests = kAddFortranTest;
  facts.cpp_with_tests = install_entry(kAddCppWrong, kAddCppTestEntry, Language::Cpp);
  session.verify();
  CHECK(session.state().environment.phase == Phase::ExecChecked);
  CHECK(facts.last_fortran_outcome->ok());
  CHECK_FALSE(facts.last_cpp_outcome->ok());
  const auto [action, q] = questioner_step(session.state().memory, session.state().environment, prompts());
  CHECK(action.kind == ActionKind::ExecutionFixing);
  CHECK(q.text.find("fortran checks ok") != std::string::npos);
  CHECK(q.text.find("Assertion") != std::string::npos);
  CHECK_THROWS_AS(session.final_verification(), Error);
}

TEST_CASE("final verification") {
  ScratchDir scratch;
  auto config = config_in(scratch);

  SUBCASE("needs clean runs") {
    ScriptedBackend backend;
    Session session(add_seed(), config, prompts(), sandbox(), backend);
    try {
      session.final_verification();
      FAIL("expected PreconditionViolation");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::PreconditionViolation);
    }
    CHECK(backend.calls() == 0);
  }
  SUBCASE("an unclear reply is asked once more, then counts as No") {
    ScriptedBackend backend({"It seems fine", "Probably"});
    Session session(add_seed(), config, prompts(), sandbox(), backend);
    auto& facts = session.state().memory.facts;
    facts.fortran_with_tests = kAddFortranTest;
    facts.cpp_with_tests = install_entry(kAddCpp, kAddCppTestEntry, Language::Cpp);
    session.verify();
    CHECK(session.final_verification() == Verdict::Retry);
    CHECK(backend.calls() == 2);
    const auto& log = session.state().memory.messages();
    REQUIRE(log.size() == 4);
    CHECK(log[2].content.find("single word") != std::string::npos);
  }
  SUBCASE("No goes back to unit tests and spends a round") {
    ScriptedBackend backend({translation_reply(), tests_reply(), "No", tests_reply(), "Yes"});
    const auto r = translate_seed(add_seed(), config, prompts(), sandbox(), backend);
    CHECK(r.status == SessionStatus::Accepted);
    CHECK(r.rounds_used == 1);
    CHECK(r.dialogue.messages.size() == 10);
    CHECK(r.dialogue.messages[6].content.find("executable unit tests") != std::string::npos);
  }
  SUBCASE("No with the translation retry entry re-translates") {
    config.retry_entry = RetryEntry::Translation;
    ScriptedBackend backend({translation_reply(), tests_reply(), "No", translation_reply(), tests_reply(), "Yes"});
    const auto r = translate_seed(add_seed(), config, prompts(), sandbox(), backend);
    CHECK(r.status == SessionStatus::Accepted);
    CHECK(r.rounds_used == 1);
    CHECK(r.dialogue.messages[6].content.find("Here is my Fortran code") != std::string::npos);
  }
  SUBCASE("No every time ends as VerdictNo") {
    config.max_rounds = 2;
    ScriptedBackend backend({translation_reply(), tests_reply(), "No", tests_reply(), "No", tests_reply(), "No"});
    const auto r = translate_seed(add_seed(), config, prompts(), sandbox(), backend);
    CHECK(r.status == SessionStatus::Rejected);
    CHECK(r.reject_reason == RejectReason::VerdictNo);
    CHECK(r.rounds_used == 2);
    check_terminal_laws(r, config.max_rounds);
  }
}

TEST_CASE("prose instead of code is re-asked and costs a round") {
  ScratchDir scratch;
  const auto config = config_in(scratch);
  ScriptedBackend backend({"I would use a function.", translation_reply(), tests_reply(), "Yes"});
  const auto r = translate_seed(add_seed(), config, prompts(), sandbox(), backend);
  CHECK(r.status == SessionStatus::Accepted);
  CHECK(r.rounds_used == 1);
  CHECK(has_user_message_containing(r.dialogue, "```cpp code block"));
}

TEST_CASE("backend failures reject, script exhaustion propagates") {
  ScratchDir scratch;
  const auto config = config_in(scratch);
  ScriptedBackend empty({""});
  const auto r = translate_seed(add_seed(), config, prompts(), sandbox(), empty);
  CHECK(r.reject_reason == RejectReason::BackendFailure);
  check_terminal_laws(r, config.max_rounds);

  ScriptedBackend short_script({translation_reply()});
  CHECK_THROWS_AS(translate_seed(add_seed(), config, prompts(), sandbox(), short_script), Error);
  CHECK(entries(scratch.path()).empty());
}

TEST_CASE("audit directory keeps intermediate sources") {
  ScratchDir scratch;
  ScratchDir audit;
  auto config = config_in(scratch);
  config.audit_dir = audit.path();
  ScriptedBackend backend({translation_reply(), tests_reply(), "Yes"});
  translate_seed(add_seed("dir/add.f90"), config, prompts(), sandbox(), backend);
  const auto files = entries(audit / "dir_add.f90");
  CHECK(std::find(files.begin(), files.end(), "001-translation.cpp") != files.end());
  CHECK(std::find(files.begin(), files.end(), "002-fortran_with_tests.f90") != files.end());
  CHECK(files.size() == 7);
}

namespace {

// Five seeds: three accepted, two rejected by empty replies.
std::unique_ptr<ScriptedBackend> five_seed_script() {
  auto b = std::make_unique<ScriptedBackend>();
  for (const char* id : {"s1", "s3", "s5"}) {
    b->push_for_session(id, translation_reply());
    b->push_for_session(id, tests_reply());
    b->push_for_session(id, "Yes");
  }
  b->push_for_session("s2", "");
  b->push_for_session("s4", "");
  return b;
}

std::vector<SourceUnit> five_seeds() {
  std::vector<SourceUnit> seeds;
  for (int i = 1; i <= 5; ++i) seeds.push_back(add_seed("s" + std::to_string(i)));
  return seeds;
}

}  // namespace

TEST_CASE("run_corpus counts and rates") {
  ScratchDir scratch;
  CorpusOptions options;
  options.session = config_in(scratch);
  options.workers = 3;
  auto backend = five_seed_script();
  const auto result = run_corpus(five_seeds(), options, prompts(), sandbox(), *backend);
  CHECK(result.report.seeds == 5);
  CHECK(result.report.sessions == 5);
  CHECK(result.report.accepted == 3);
  CHECK(result.report.backend_failure == 2);
  CHECK(result.report.acceptance_rate() == doctest::Approx(0.6));
  const auto json = run_report_json(result);
  CHECK(json["rows"].size() == 5);
  CHECK(json["acceptance_rate"].get<double>() == doctest::Approx(0.6));
  for (std::size_t i = 0; i < 5; ++i) CHECK(result.sessions[i].id == "s" + std::to_string(i + 1));
  for (const auto& s : result.sessions) check_terminal_laws(s, 5);
  CHECK(entries(scratch.path()).empty());
}

TEST_CASE("run_corpus with filtered and zero seeds") {
  ScratchDir scratch;
  CorpusOptions options;
  options.session = config_in(scratch);
  ScriptedBackend backend;
  const auto none = run_corpus({}, options, prompts(), sandbox(), backend);
  CHECK_FALSE(none.report.acceptance_rate().has_value());
  const auto json = run_report_json(none);
  CHECK(json["acceptance_rate"].is_null());
  CHECK(json["counts"]["attempted"] == 0);

  SourceUnit mpi("mpi", Language::Fortran, "program p\nuse mpi\nend program p\n", "test", SourceForm::Free);
  const auto filtered = run_corpus({mpi}, options, prompts(), sandbox(), backend);
  CHECK(filtered.report.filtered_out == 1);
  CHECK(filtered.sessions[0].reject_reason == RejectReason::FilteredOut);
  CHECK(filtered.sessions[0].filter_reasons == std::vector<FilterReason>{FilterReason::UndefinedExternal});
  CHECK(backend.calls() == 0);
}

TEST_CASE("run_corpus is deterministic apart from timestamps") {
  auto run = [] {
    ScratchDir scratch;
    CorpusOptions options;
    options.session = config_in(scratch);
    options.workers = 4;
    auto backend = five_seed_script();
    const auto result = run_corpus(five_seeds(), options, prompts(), sandbox(), *backend);
    std::string out = run_report_json(result, {}, false).dump();
    for (const auto& s : result.sessions) {
      out += to_json(s.dialogue).dump();
      if (s.pair) out += to_json(*s.pair).dump();
    }
    return out;
  };
  CHECK(run() == run());
}
