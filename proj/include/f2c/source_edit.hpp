#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "f2c/preprocess.hpp"

namespace f2c {

// A program split into its entry point (C++ `main`, Fortran `program` unit)
// and everything else.
struct EntrySplit {
  std::string definitions;
  std::string entry;  // empty when the source has no entry point
};

EntrySplit split_entry(std::string_view source, Language language);

bool has_entry_point(std::string_view source, Language language);

// True when `source` is only an entry point, optionally with #include /
// `using` lines (C++) around it.
bool is_entry_only(std::string_view source, Language language);

/// Installs a test-bearing entry point. A complete program replaces `base`;
/// an entry-only snippet replaces the entry point of `base` (C++ includes the
/// snippet needs are hoisted to the top). Never leaves two entry points.
std::string install_entry(std::string_view base, std::string_view test_source, Language language);

/// Carries the definitions of a repaired test program back into the plain
/// translation while keeping the translation's own entry point.
std::string carry_definitions(std::string_view translation, std::string_view repaired, Language language);

}  // namespace f2c
