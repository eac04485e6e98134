#pragma once

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace f2c {

struct CodeBleuWeights {
  double ngram = 0.25;
  double weighted_ngram = 0.25;
  double syntax = 0.25;
  double dataflow = 0.25;

  friend bool operator==(const CodeBleuWeights&, const CodeBleuWeights&) = default;
};

// Throws Error{WeightError} unless all four are finite, non-negative and sum
// to 1 (within 1e-6).
void validate(const CodeBleuWeights& weights);
// "a,b,c,d"; validated.
CodeBleuWeights parse_weights(std::string_view text);
std::string to_string(const CodeBleuWeights& weights);

/// Identifiers, numbers, operators (longest match) and punctuation; string
/// and character literals are single tokens; comments are dropped.
std::vector<std::string> tokenize_code(std::string_view source);

/// BLEU up to `max_n`-grams. Every precision uses add-one smoothing,
/// p_n = (matches + 1) / (candidate n-grams + 1), combined by geometric
/// mean and the usual brevity penalty. Both empty scores 1; an empty
/// candidate against a non-empty reference scores 0.
double bleu(const std::vector<std::string>& reference, const std::vector<std::string>& candidate, int max_n = 4);

/// As bleu(), but unigram matches and counts weigh 5 for keywords and 1 for
/// other tokens.
double weighted_bleu(const std::vector<std::string>& reference, const std::vector<std::string>& candidate,
                     const std::set<std::string, std::less<>>& keywords, int max_n = 4);

struct DataflowEdge {
  std::string variable;
  std::string relation;  // "computedFrom" or "comesFrom"
  std::vector<std::string> sources;

  friend auto operator<=>(const DataflowEdge&, const DataflowEdge&) = default;
};

/// Source analysis behind the syntax and dataflow components. Returning
/// nullopt marks the input as unsupported, which drops that component.
class GrammarAnalyzer {
 public:
  virtual ~GrammarAnalyzer() = default;
  // Depth-bounded subtrees as canonical strings.
  virtual std::optional<std::vector<std::string>> subtrees(std::string_view source, int depth) const = 0;
  virtual std::optional<std::vector<DataflowEdge>> dataflow(std::string_view source) const = 0;
};

/// Lenient C++ analyzer: a tree of braces, parentheses, brackets and
/// `;`-terminated statements over the token stream, and assignment/use
/// edges with variables renamed per function.
class LightCppGrammar final : public GrammarAnalyzer {
 public:
  std::optional<std::vector<std::string>> subtrees(std::string_view source, int depth) const override;
  std::optional<std::vector<DataflowEdge>> dataflow(std::string_view source) const override;
};

const std::set<std::string, std::less<>>& cpp_keywords();

struct CodeBleuScore {
  double total = 0;
  double ngram = 0;
  double weighted_ngram = 0;
  double syntax = 0;
  double dataflow = 0;
  // False when the reference had nothing to match for that component; its
  // weight was then spread over the others.
  bool syntax_used = true;
  bool dataflow_used = true;

  bool degraded() const { return !syntax_used || !dataflow_used; }
};

nlohmann::ordered_json to_json(const CodeBleuScore& score);

inline constexpr int kSyntaxDepth = 3;

/// Weighted sum of the four components, clamped to [0, 1]. Uses
/// LightCppGrammar when `grammar` is null.
CodeBleuScore codebleu(std::string_view reference, std::string_view candidate, const CodeBleuWeights& weights = {},
                       const GrammarAnalyzer* grammar = nullptr);

}  // namespace f2c
