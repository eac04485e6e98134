#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace f2c {

enum class Language { Fortran, Cpp };
std::string_view to_string(Language language);

enum class SourceForm { Free, Fixed };

// Fixed form for `.f` / `.for` (any case), free form otherwise.
SourceForm form_from_path(std::string_view path);

struct SourceAnnotations {
  std::size_t token_count = 0;
  std::vector<std::string> external_refs;
  bool has_program_entry = false;
  bool has_procedure = false;
};

// One language-tagged source text. `language` is fixed at construction.
class SourceUnit {
 public:
  SourceUnit(std::string id, Language language, std::string text, std::string origin,
             SourceForm form = SourceForm::Free)
      : id_(std::move(id)), language_(language), text_(std::move(text)), origin_(std::move(origin)), form_(form) {}

  const std::string& id() const { return id_; }
  Language language() const { return language_; }
  const std::string& text() const { return text_; }
  const std::string& origin() const { return origin_; }
  SourceForm form() const { return form_; }
  const SourceAnnotations& annotations() const { return annotations_; }

  void set_text(std::string text) { text_ = std::move(text); }
  void set_annotations(SourceAnnotations a) { annotations_ = std::move(a); }

 private:
  std::string id_;
  Language language_;
  std::string text_;
  std::string origin_;
  SourceForm form_;
  SourceAnnotations annotations_;
};

enum class FilterReason { TooManyTokens, UndefinedExternal, NotExecutable, EmptyAfterStrip };
std::string_view to_string(FilterReason reason);

struct FilterDecision {
  std::vector<FilterReason> reasons;
  bool accepted() const { return reasons.empty(); }

  friend bool operator==(const FilterDecision&, const FilterDecision&) = default;
};

struct FilterOptions {
  std::size_t max_seed_tokens = 600;
  // When set, a `program` unit is required; otherwise a callable procedure
  // definition is enough.
  bool require_program_entry = false;
};

/// Removes Fortran comments.
///
/// Free form: `!` to end of line outside character literals. Fixed form:
/// lines with `C`, `c`, `*` or `!` in column 1, plus inline `!` comments.
/// OpenMP / conditional-compilation sentinels (`!$`, `c$`, `*$`) are kept.
/// Lines emptied by comment removal are dropped; other lines keep their bytes
/// except for whitespace that preceded a removed trailing comment.
/// Idempotent.
std::string strip_comments(std::string_view source, SourceForm form = SourceForm::Free);

/// Modules `use`d but not defined, `external` procedures without a local
/// definition, and `include` targets, in order of first appearance,
/// lower-cased. Intrinsic modules are not reported.
std::vector<std::string> detect_external_deps(std::string_view stripped_source);

/// Word runs ([A-Za-z0-9_]+) and single punctuation characters.
std::size_t estimate_tokens(std::string_view text);

bool has_program_entry(std::string_view stripped_source);
bool has_procedure_definition(std::string_view stripped_source);

// Strips comments in place and fills in the annotations.
void annotate(SourceUnit& unit);

// Pure in (source, options). Expects an annotated Fortran unit; annotates a
// copy if token_count is still zero and the text is non-empty.
FilterDecision filter_seed(const SourceUnit& source, const FilterOptions& options);

/// Seed ingestion. A directory is walked recursively for Fortran extensions
/// (sorted by relative path, which becomes the id). A regular file is read
/// as line-delimited JSON `{"id", "content"}`; an optional `"form"` of
/// "fixed"/"free" overrides the default form.
std::vector<SourceUnit> load_seeds(const std::filesystem::path& location);

}  // namespace f2c
