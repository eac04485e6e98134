#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "f2c/message.hpp"
#include "f2c/preprocess.hpp"
#include "f2c/sandbox.hpp"

namespace f2c {

inline constexpr int kPairSchemaVersion = 1;

/// A verified Fortran/C++ pair. `*_with_tests` are the programs the evidence
/// was produced from; `evidence` holds their compile and run outcomes in the
/// order compile Fortran, compile C++, run Fortran, run C++.
struct PairRecord {
  std::string id;
  std::string fortran;
  std::string cpp;
  std::string fortran_with_tests;
  std::string cpp_with_tests;
  std::vector<ToolOutcome> evidence;
  int rounds_used = 0;

  friend bool operator==(const PairRecord&, const PairRecord&) = default;
};

// Timing is left out so that records are reproducible.
nlohmann::ordered_json to_json(const PairRecord& record);
PairRecord pair_record_from_json(const nlohmann::json& j);

// Throws Error{Schema} naming the violated field rule.
void validate(const PairRecord& record);

using DialogueRecord = Dialogue;

/// Cumulative-prefix split: record k holds the first k turns. Leading system
/// messages are repeated at the head of every record and not counted as
/// turns. Throws Error{MalformedDialogue}.
std::vector<DialogueRecord> split_dialogue(const Dialogue& dialogue);

// Checks user/assistant alternation, first user, last assistant, even length
// after leading system messages.
bool is_well_formed(const Dialogue& dialogue, std::string* why = nullptr);

/// Line-delimited JSON sink; concurrent append() calls are serialized.
class JsonlSink {
 public:
  explicit JsonlSink(const std::filesystem::path& path);
  void append(const nlohmann::ordered_json& row);
  std::size_t lines() const;

 private:
  mutable std::mutex mutex_;
  std::ofstream out_;
  std::size_t lines_ = 0;
};

std::size_t emit_pairs(std::span<const PairRecord> records, const std::filesystem::path& sink);

struct EmitDialoguesResult {
  std::size_t records = 0;
  std::size_t rejects = 0;
};

EmitDialoguesResult emit_dialogues(std::span<const Dialogue> dialogues, const std::filesystem::path& sink);

std::vector<PairRecord> read_pairs(const std::filesystem::path& path);

struct JsonlRowError {
  std::size_t line = 0;
  std::string message;
};

struct DialogueFile {
  std::vector<Dialogue> dialogues;
  std::vector<std::size_t> lines;  // source line (or array index) per dialogue
  std::vector<JsonlRowError> errors;
};

// Accepts line-delimited JSON, or a single JSON array of dialogues.
DialogueFile read_dialogues(const std::filesystem::path& path);

using Histogram = std::map<std::string, std::size_t, std::less<>>;

// Shipped reserved-word lists.
const std::vector<std::string>& keyword_list(Language language);

/// Whole-word keyword counts outside string literals and comments;
/// case-insensitive for Fortran, case-sensitive for C++.
Histogram keyword_histogram(std::span<const PairRecord> records, Language language);
Histogram keyword_histogram(std::string_view source, Language language);

// Largest counts first; ties by keyword.
std::vector<std::pair<std::string, std::size_t>> top_k(const Histogram& histogram, std::size_t k);

/// Line counts bucketed into `bin_width`-wide bins keyed by the bin's lower
/// bound.
std::map<std::size_t, std::size_t> line_count_distribution(std::span<const PairRecord> records, Language language,
                                                           std::size_t bin_width = 10);

std::string render_bar_chart(const std::vector<std::pair<std::string, std::size_t>>& rows, std::size_t width = 40);

/// Rewrites the test-bearing sources into a fresh workspace and reruns the
/// stored evidence commands with `sh -c`, in order.
std::vector<ToolOutcome> replay_pair(const PairRecord& record, const std::filesystem::path& scratch_root,
                                     int timeout_s = 60);

}  // namespace f2c
