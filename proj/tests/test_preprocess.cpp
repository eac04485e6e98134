#include <doctest.h>

#include <fstream>
#include <random>
#include <regex>

#include "f2c/preprocess.hpp"
#include "f2c/sandbox.hpp"
#include "support.hpp"

using namespace f2c;
using f2c::testing::ScratchDir;

namespace {

// Independent token counter: one regex pass.
std::size_t oracle_tokens(const std::string& text) {
  static const std::regex token(R"([A-Za-z0-9_]+|[^\sA-Za-z0-9_])");
  return static_cast<std::size_t>(std::distance(std::sregex_iterator(text.begin(), text.end(), token),
                                                std::sregex_iterator()));
}

std::string read(const std::filesystem::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

SourceUnit seed(const std::string& text, SourceForm form = SourceForm::Free) {
  SourceUnit u("s", Language::Fortran, text, "test", form);
  annotate(u);
  return u;
}

// 7 tokens of header and footer plus 3 per assignment line.
std::string program_with_tokens(std::size_t assignments) {
  std::string text = "program p\ninteger x\n";
  for (std::size_t i = 0; i < assignments; ++i) text += "x = 1\n";
  return text + "end program p";
}

}  // namespace

TEST_CASE("strip_comments keeps comment-free text") { CHECK(strip_comments("x = 1") == "x = 1"); }

TEST_CASE("strip_comments drops trailing and whole-line comments") {
  CHECK(strip_comments("x = 1 ! set x\n! note\ny = 2") == "x = 1\ny = 2");
}

TEST_CASE("strip_comments keeps bangs inside character literals") {
  CHECK(strip_comments("print *, 'a!b' ! trailing") == "print *, 'a!b'");
  CHECK(strip_comments("s = \"it's ! kept\" ! gone") == "s = \"it's ! kept\"");
  CHECK(strip_comments("s = 'don''t ! stop' ! gone") == "s = 'don''t ! stop'");
}

TEST_CASE("strip_comments carries a literal across an ampersand continuation") {
  const std::string src = "print *, 'first &\n  &second ! still text'\n";
  CHECK(strip_comments(src) == src);
}

TEST_CASE("strip_comments keeps OpenMP sentinels") {
  const std::string src = "!$omp parallel do\ndo i = 1, 3\nend do\n!$omp end parallel do\n";
  CHECK(strip_comments(src) == src);
}

TEST_CASE("fixed form comment markers in column one") {
  const std::string src = "C comment\nc comment\n* comment\n! comment\n      X = 1\n";
  CHECK(strip_comments(src, SourceForm::Fixed) == "      X = 1\n");
}

TEST_CASE("fixed form keeps continuation lines and drops inline comments") {
  const std::string src = "      X = 1.0 +\n     &    2.0  ! two\n      END\n";
  CHECK(strip_comments(src, SourceForm::Fixed) == "      X = 1.0 +\n     &    2.0\n      END\n");
}

TEST_CASE("strip_comments is idempotent over the fixture suite") {
  for (const auto& entry : std::filesystem::directory_iterator(f2c::testing::fixture_dir() / "fortran")) {
    const auto form = form_from_path(entry.path().string());
    const auto once = strip_comments(read(entry.path()), form);
    CAPTURE(entry.path().filename().string());
    CHECK(strip_comments(once, form) == once);
  }
}

TEST_CASE("estimate_tokens") {
  CHECK(estimate_tokens("") == 0);
  CHECK(estimate_tokens("x = 1") == 3);
  CHECK(estimate_tokens(program_with_tokens(198)) == 601);
}

TEST_CASE("estimate_tokens agrees with the regex oracle and is monotone") {
  std::mt19937 rng(7);
  const std::string alphabet = "abcXYZ019_ \n\t=+-*/(),.'\"!&:;%<>";
  for (int round = 0; round < 500; ++round) {
    std::string a;
    std::string b;
    for (int i = 0; i < 40; ++i) a += alphabet[rng() % alphabet.size()];
    for (int i = 0; i < 40; ++i) b += alphabet[rng() % alphabet.size()];
    CHECK(estimate_tokens(a) == oracle_tokens(a));
    CHECK(estimate_tokens(a + b) >= estimate_tokens(a));
    CHECK(estimate_tokens(a + a) >= estimate_tokens(a));
  }
}

TEST_CASE("detect_external_deps") {
  CHECK(detect_external_deps("program p\nprint *, sqrt(2.0)\nend program p\n").empty());
  CHECK(detect_external_deps("program p\nuse mpi\nend program p\n") == std::vector<std::string>{"mpi"});
  CHECK(detect_external_deps("module m\ncontains\nsubroutine s\nend subroutine s\nend module m\n"
                             "program p\nuse m\ncall s\nend program p\n")
            .empty());
  CHECK(detect_external_deps("program p\nuse iso_fortran_env\nuse, intrinsic :: iso_c_binding\nend program p\n").empty());
  CHECK(detect_external_deps("program p\nexternal dgemm\ncall dgemm()\nend program p\n") ==
        std::vector<std::string>{"dgemm"});
  CHECK(detect_external_deps("program p\ninclude 'mpif.h'\nend program p\n") == std::vector<std::string>{"mpif.h"});
}

TEST_CASE("filter_seed") {
  FilterOptions options;
  SUBCASE("small self-contained program is accepted") {
    auto d = filter_seed(seed(program_with_tokens(10)), options);
    CHECK(d.accepted());
  }
  SUBCASE("601 tokens at threshold 600") {
    auto d = filter_seed(seed(program_with_tokens(198)), options);
    CHECK(d.reasons == std::vector<FilterReason>{FilterReason::TooManyTokens});
  }
  SUBCASE("threshold is count < max") {
    options.max_seed_tokens = 601;
    CHECK_FALSE(filter_seed(seed(program_with_tokens(198)), options).accepted());
    options.max_seed_tokens = 602;
    CHECK(filter_seed(seed(program_with_tokens(198)), options).accepted());
  }
  SUBCASE("601-token fixture") {
    const auto text = read(f2c::testing::fixture_dir() / "filter" / "tokens_601.f90");
    REQUIRE(oracle_tokens(text) == 601);
    auto d = filter_seed(seed(text), options);
    CHECK(d.reasons == std::vector<FilterReason>{FilterReason::TooManyTokens});
  }
  SUBCASE("use mpi fixture") {
    auto d = filter_seed(seed(read(f2c::testing::fixture_dir() / "filter" / "use_mpi.f90")), options);
    CHECK(d.reasons == std::vector<FilterReason>{FilterReason::UndefinedExternal});
  }
  SUBCASE("no entry and no procedure") {
    auto d = filter_seed(seed("integer :: x\nx = 1\n"), options);
    CHECK(d.reasons == std::vector<FilterReason>{FilterReason::NotExecutable});
  }
  SUBCASE("a lone subroutine counts unless a program is required") {
    const auto s = seed("subroutine s(x)\ninteger x\nx = 1\nend subroutine s\n");
    CHECK(filter_seed(s, options).accepted());
    options.require_program_entry = true;
    CHECK(filter_seed(s, options).reasons == std::vector<FilterReason>{FilterReason::NotExecutable});
  }
  SUBCASE("comments only") {
    auto d = filter_seed(seed("! nothing here\n! at all\n"), options);
    CHECK(std::find(d.reasons.begin(), d.reasons.end(), FilterReason::EmptyAfterStrip) != d.reasons.end());
  }
  SUBCASE("pure") {
    const auto s = seed(program_with_tokens(198));
    CHECK(filter_seed(s, options) == filter_seed(s, options));
  }
}

TEST_CASE("accepted iff reasons empty for random decisions") {
  std::mt19937 rng(11);
  for (int i = 0; i < 200; ++i) {
    FilterDecision d;
    for (int r = 0; r < 4; ++r) {
      if (rng() % 2) d.reasons.push_back(static_cast<FilterReason>(r));
    }
    CHECK(d.accepted() == d.reasons.empty());
  }
}

TEST_CASE("annotate fills token_count for non-empty text") {
  auto u = seed("program p\nend program p\n");
  CHECK(u.annotations().token_count >= 1);
  CHECK(u.annotations().has_program_entry);
  CHECK(u.language() == Language::Fortran);
}

TEST_CASE("load_seeds from a directory and from JSONL") {
  ScratchDir dir;
  std::filesystem::create_directories(dir / "sub");
  std::ofstream(dir / "b.f90") << "program b\nend program b\n";
  std::ofstream(dir / "sub" / "a.f") << "      PROGRAM A\n      END\n";
  std::ofstream(dir / "notes.txt") << "ignored";
  auto seeds = load_seeds(dir.path());
  REQUIRE(seeds.size() == 2);
  CHECK(seeds[0].id() == "b.f90");
  CHECK(seeds[1].id() == "sub/a.f");
  CHECK(seeds[1].form() == SourceForm::Fixed);

  const auto jsonl = dir / "seeds.jsonl";
  std::ofstream(jsonl) << R"({"id": "one", "content": "program one\nend program one\n"})" << "\n"
                       << R"({"id": "two", "content": "      END\n", "form": "fixed"})" << "\n";
  seeds = load_seeds(jsonl);
  REQUIRE(seeds.size() == 2);
  CHECK(seeds[1].form() == SourceForm::Fixed);

  std::ofstream(jsonl) << R"({"id": "one"})" << "\n";
  try {
    load_seeds(jsonl);
    FAIL("expected a schema error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Schema);
    CHECK(std::string(e.what()).find(":1") != std::string::npos);
  }
}

TEST_CASE("stripping preserves compile success and stdout on the fixture suite") {
  Sandbox sandbox(f2c::testing::quick_toolchain());
  ScratchDir scratch;
  int checked = 0;
  for (const auto& entry : std::filesystem::directory_iterator(f2c::testing::fixture_dir() / "fortran")) {
    CAPTURE(entry.path().filename().string());
    const auto form = form_from_path(entry.path().string());
    const auto original = read(entry.path());
    auto ws_a = Workspace::create(scratch.path());
    auto ws_b = Workspace::create(scratch.path());
    REQUIRE(sandbox.compile_fortran(original, ws_a, form).ok());
    REQUIRE(sandbox.compile_fortran(strip_comments(original, form), ws_b, form).ok());
    const auto run_a = sandbox.execute("test_f", ws_a, 10);
    const auto run_b = sandbox.execute("test_f", ws_b, 10);
    CHECK(run_a.ok());
    CHECK(run_a.stdout_text == run_b.stdout_text);
    ++checked;
  }
  CHECK(checked == 25);
}
