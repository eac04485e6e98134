// Shared helpers for the test binaries.
#pragma once

#include <stdlib.h>

#include <filesystem>
#include <string>
#include <vector>

#include "f2c/error.hpp"
#include "f2c/sandbox.hpp"

namespace f2c::testing {

inline std::filesystem::path fixture_dir() { return F2C_FIXTURE_DIR; }

// A temporary directory removed when the object goes out of scope.
class ScratchDir {
 public:
  ScratchDir() {
    auto pattern = (std::filesystem::temp_directory_path() / "f2c-test-XXXXXX").string();
    if (!mkdtemp(pattern.data())) throw Error(ErrorCode::Io, "mkdtemp failed");
    path_ = pattern;
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// Entries under `dir`, as names.
inline std::vector<std::string> entries(const std::filesystem::path& dir) {
  std::vector<std::string> out;
  if (!std::filesystem::exists(dir)) return out;
  for (const auto& e : std::filesystem::directory_iterator(dir)) out.push_back(e.path().filename().string());
  return out;
}

inline std::string fenced(const std::string& tag, const std::string& body) {
  return "```" + tag + "\n" + body + "\n```";
}

// A seed whose translation is easy to get right by hand.
inline const char* kAddSeed = R"(program add_demo
  implicit none
  print '(i0)', add(2, 3)
contains
  integer function add(a, b)
    integer, intent(in) :: a, b
    add = a + b
  end function add
end program add_demo
)";

inline const char* kAddCpp = R"(#include <cstdio>

int add(int a, int b) { return a + b; }

int main() {
  std::printf("%d\n", add(2, 3));
  return 0;
})";

inline const char* kAddCppBroken = R"(#include <cstdio>

int add(int a, int b) { return a + b }

int main() {
  std::printf("%d\n", add(2, 3));
  return 0;
})";

inline const char* kAddFortranTest = R"(program add_test
  implicit none
  if (add(2, 3) /= 5) stop 1
  if (add(-4, 4) /= 0) stop 1
  print '(a)', 'fortran checks ok'
contains
  integer function add(a, b)
    integer, intent(in) :: a, b
    add = a + b
  end function add
end program add_test)";

inline const char* kAddCppTestEntry = R"(#include <cassert>
#include <cstdio>

int main() {
  assert(add(2, 3) == 5);
  assert(add(-4, 4) == 0);
  std::printf("cpp checks ok\n");
  return 0;
})";

inline std::string translation_reply(const std::string& cpp = kAddCpp) {
  return "Here is the C++ version.\n\n" + fenced("cpp", cpp) + "\n";
}

inline std::string tests_reply(const std::string& cpp_entry = kAddCppTestEntry,
                               const std::string& fortran = kAddFortranTest) {
  return "Fortran with tests:\n" + fenced("fortran", fortran) + "\n\nC++ with tests:\n" + fenced("cpp", cpp_entry) +
         "\n";
}

inline ToolchainOptions quick_toolchain() {
  ToolchainOptions t;
  t.compile_timeout_s = 60;
  return t;
}

}  // namespace f2c::testing
