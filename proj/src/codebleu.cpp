#include "f2c/codebleu.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>

#include "f2c/dataset.hpp"
#include "f2c/error.hpp"
#include "text_util.hpp"

namespace f2c {

void validate(const CodeBleuWeights& w) {
  const std::array<double, 4> parts{w.ngram, w.weighted_ngram, w.syntax, w.dataflow};
  double sum = 0;
  for (double p : parts) {
    if (!std::isfinite(p) || p < 0) throw Error(ErrorCode::WeightError, "weights must be finite and non-negative");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-6) {
    throw Error(ErrorCode::WeightError, "weights must sum to 1, got " + std::to_string(sum));
  }
}

CodeBleuWeights parse_weights(std::string_view text) {
  std::vector<double> values;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto comma = text.find(',', start);
    auto part = detail::trim(text.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    try {
      std::size_t used = 0;
      values.push_back(std::stod(std::string(part), &used));
      if (used != part.size()) throw std::invalid_argument("trailing text");
    } catch (const std::exception&) {
      throw Error(ErrorCode::WeightError, "cannot parse weight '" + std::string(part) + "'");
    }
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  if (values.size() != 4) throw Error(ErrorCode::WeightError, "expected 4 comma-separated weights");
  CodeBleuWeights w{values[0], values[1], values[2], values[3]};
  validate(w);
  return w;
}

std::string to_string(const CodeBleuWeights& w) {
  auto fmt = [](double v) {
    auto s = std::to_string(v);
    while (s.size() > 1 && s.back() == '0') s.pop_back();
    if (s.back() == '.') s.pop_back();
    return s;
  };
  return fmt(w.ngram) + "," + fmt(w.weighted_ngram) + "," + fmt(w.syntax) + "," + fmt(w.dataflow);
}

// ---------------------------------------------------------------------------
// Tokens

namespace {

constexpr std::array<std::string_view, 29> kOperators = {
    "<<=", ">>=", "<=>", "->*", "...", "::", "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=",
    "&&",  "||",  "+=",  "-=",  "*=",  "/=", "%=", "&=", "|=", "^=", ".*", "##", "<:", ":>"};

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }

}  // namespace

std::vector<std::string> tokenize_code(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  const auto n = s.size();
  while (i < n) {
    const char c = s[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
    } else if (s.compare(i, 2, "//") == 0) {
      while (i < n && s[i] != '\n') ++i;
    } else if (s.compare(i, 2, "/*") == 0) {
      auto end = s.find("*/", i + 2);
      i = end == std::string_view::npos ? n : end + 2;
    } else if (s.compare(i, 2, "R\"") == 0) {
      const auto open = s.find('(', i + 2);
      const auto delim = open == std::string_view::npos ? std::string_view{} : s.substr(i + 2, open - i - 2);
      const auto close = open == std::string_view::npos
                             ? std::string_view::npos
                             : s.find(")" + std::string(delim) + "\"", open + 1);
      const auto end = close == std::string_view::npos ? n : close + delim.size() + 2;
      out.emplace_back(s.substr(i, end - i));
      i = end;
    } else if (c == '"' || c == '\'') {
      const auto start = i++;
      while (i < n && s[i] != c && s[i] != '\n') {
        if (s[i] == '\\') ++i;
        ++i;
      }
      i = std::min(n, i + 1);
      out.emplace_back(s.substr(start, i - start));
    } else if (ident_start(c)) {
      const auto start = i;
      while (i < n && detail::is_word_char(s[i])) ++i;
      out.emplace_back(s.substr(start, i - start));
    } else if (std::isdigit(static_cast<unsigned char>(c)) ||
               (c == '.' && i + 1 < n && std::isdigit(static_cast<unsigned char>(s[i + 1])))) {
      const auto start = i;
      while (i < n) {
        const char d = s[i];
        if (detail::is_word_char(d) || d == '.' || d == '\'') {
          ++i;
        } else if ((d == '+' || d == '-') && (s[i - 1] == 'e' || s[i - 1] == 'E' || s[i - 1] == 'p' || s[i - 1] == 'P')) {
          ++i;
        } else {
          break;
        }
      }
      out.emplace_back(s.substr(start, i - start));
    } else {
      std::size_t len = 1;
      for (auto op : kOperators) {
        if (s.compare(i, op.size(), op) == 0) {
          len = op.size();
          break;
        }
      }
      out.emplace_back(s.substr(i, len));
      i += len;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// n-gram components

namespace {

using Gram = std::vector<std::string>;

std::map<Gram, std::size_t> grams(const std::vector<std::string>& tokens, std::size_t n) {
  std::map<Gram, std::size_t> counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    ++counts[Gram(tokens.begin() + static_cast<std::ptrdiff_t>(i), tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return counts;
}

double brevity_penalty(std::size_t ref_len, std::size_t cand_len) {
  if (cand_len > ref_len) return 1.0;
  return std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(cand_len));
}

template <typename UnigramWeight>
double bleu_impl(const std::vector<std::string>& reference, const std::vector<std::string>& candidate, int max_n,
                 UnigramWeight weight) {
  if (reference.empty() && candidate.empty()) return 1.0;
  if (candidate.empty()) return 0.0;
  double log_sum = 0;
  for (int n = 1; n <= max_n; ++n) {
    const auto ref = grams(reference, static_cast<std::size_t>(n));
    const auto cand = grams(candidate, static_cast<std::size_t>(n));
    double matches = 0;
    double total = 0;
    for (const auto& [g, count] : cand) {
      const double w = n == 1 ? weight(g.front()) : 1.0;
      auto it = ref.find(g);
      matches += w * static_cast<double>(std::min(count, it == ref.end() ? 0 : it->second));
      total += w * static_cast<double>(count);
    }
    log_sum += std::log((matches + 1.0) / (total + 1.0));
  }
  return brevity_penalty(reference.size(), candidate.size()) * std::exp(log_sum / max_n);
}

}  // namespace

double bleu(const std::vector<std::string>& reference, const std::vector<std::string>& candidate, int max_n) {
  return bleu_impl(reference, candidate, max_n, [](const std::string&) { return 1.0; });
}

double weighted_bleu(const std::vector<std::string>& reference, const std::vector<std::string>& candidate,
                     const std::set<std::string, std::less<>>& keywords, int max_n) {
  return bleu_impl(reference, candidate, max_n,
                   [&keywords](const std::string& t) { return keywords.contains(t) ? 5.0 : 1.0; });
}

const std::set<std::string, std::less<>>& cpp_keywords() {
  static const auto set = [] {
    const auto& list = keyword_list(Language::Cpp);
    return std::set<std::string, std::less<>>(list.begin(), list.end());
  }();
  return set;
}

// ---------------------------------------------------------------------------
// Syntax

namespace {

constexpr int kMaxNesting = 256;

struct Node {
  std::string label;
  std::vector<Node> children;
};

std::string leaf_label(const std::string& tok) {
  if (ident_start(tok.front())) {
    if (tok.size() >= 2 && tok[0] == 'R' && tok[1] == '"') return "str";
    return cpp_keywords().contains(tok) ? tok : "id";
  }
  if (std::isdigit(static_cast<unsigned char>(tok.front())) || (tok.front() == '.' && tok.size() > 1)) return "num";
  if (tok.front() == '"' || tok.front() == '\'') return "str";
  return tok;
}

bool is_closer(const std::string& t) { return t == "}" || t == ")" || t == "]"; }

Node parse(const std::vector<std::string>& t, std::size_t& i, std::string label, std::string_view closer,
           bool statements, int nesting) {
  Node node{std::move(label), {}};
  Node stmt{"stmt", {}};
  auto flush = [&] {
    if (!stmt.children.empty()) {
      node.children.push_back(std::move(stmt));
      stmt = Node{"stmt", {}};
    }
  };
  auto target = [&]() -> Node& { return statements ? stmt : node; };
  while (i < t.size()) {
    const auto& tok = t[i];
    if (tok == closer) {
      ++i;
      break;
    }
    if (is_closer(tok)) {
      if (!closer.empty()) break;  // belongs to an enclosing container
      ++i;
      continue;
    }
    const bool opener = tok == "{" || tok == "(" || tok == "[";
    if (opener && nesting < kMaxNesting) {
      ++i;
      if (tok == "{") {
        target().children.push_back(parse(t, i, "block", "}", true, nesting + 1));
        if (statements) flush();
      } else {
        target().children.push_back(
            parse(t, i, tok == "(" ? "paren" : "bracket", tok == "(" ? ")" : "]", false, nesting + 1));
      }
      continue;
    }
    target().children.push_back(Node{leaf_label(tok), {}});
    ++i;
    if (statements && tok == ";") flush();
  }
  flush();
  return node;
}

std::string render(const Node& node, int depth) {
  if (node.children.empty() || depth <= 1) return node.label;
  std::string out = "(" + node.label;
  for (const auto& c : node.children) out += " " + render(c, depth - 1);
  return out + ")";
}

void collect(const Node& node, int depth, std::vector<std::string>& out) {
  if (node.children.empty()) return;
  out.push_back(render(node, depth));
  for (const auto& c : node.children) collect(c, depth, out);
}

template <typename T>
double multiset_recall(std::vector<T> reference, std::vector<T> candidate) {
  std::sort(reference.begin(), reference.end());
  std::sort(candidate.begin(), candidate.end());
  std::vector<T> common;
  std::set_intersection(reference.begin(), reference.end(), candidate.begin(), candidate.end(),
                        std::back_inserter(common));
  return static_cast<double>(common.size()) / static_cast<double>(reference.size());
}

// ---------------------------------------------------------------------------
// Dataflow

bool is_assign_op(const std::string& t) {
  static const std::set<std::string, std::less<>> ops = {"=",  "+=", "-=", "*=", "/=",  "%=",
                                                         "&=", "|=", "^=", "<<=", ">>="};
  return ops.contains(t);
}

struct Segment {
  std::size_t begin;
  std::size_t end;
};

// Top-level units: a run of tokens ending at a depth-0 ';' or at the '}'
// closing a depth-0 block.
std::vector<Segment> segments(const std::vector<std::string>& t) {
  std::vector<Segment> out;
  int depth = 0;
  std::size_t begin = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] == "{") ++depth;
    if (t[i] == "}") depth = std::max(0, depth - 1);
    if (depth == 0 && (t[i] == ";" || t[i] == "}")) {
      out.push_back({begin, i + 1});
      begin = i + 1;
    }
  }
  if (begin < t.size()) out.push_back({begin, t.size()});
  return out;
}

class SegmentFlow {
 public:
  SegmentFlow(const std::vector<std::string>& t, Segment seg) : t_(t), seg_(seg) {}

  void run(std::vector<DataflowEdge>& edges) {
    for (std::size_t k = seg_.begin; k < seg_.end; ++k) {
      const auto& tok = t_[k];
      if (is_var(k)) {
        const auto& name = norm(tok);
        if (!is_lhs(k) && defined_.contains(name)) edges.push_back({name, "comesFrom", {name}});
      } else if (is_assign_op(tok)) {
        assignment(k, edges);
      } else if (tok == "++" || tok == "--") {
        std::optional<std::size_t> v;
        if (k > seg_.begin && is_var(k - 1)) v = k - 1;
        else if (k + 1 < seg_.end && is_var(k + 1)) v = k + 1;
        if (v) {
          const auto& name = norm(t_[*v]);
          edges.push_back({name, "computedFrom", {name}});
          defined_.insert(name);
        }
      }
    }
  }

 private:
  bool is_var(std::size_t k) const {
    const auto& tok = t_[k];
    if (!ident_start(tok.front()) || cpp_keywords().contains(tok)) return false;
    if (tok.size() >= 2 && tok[0] == 'R' && tok[1] == '"') return false;
    if (k + 1 < seg_.end && (t_[k + 1] == "(" || t_[k + 1] == "::")) return false;
    if (k > seg_.begin) {
      const auto& prev = t_[k - 1];
      if (prev == "." || prev == "->" || prev == "::" || prev == "#") return false;
    }
    return true;
  }

  // Index of the matching '[' ... ']' run end after k, or k itself.
  std::size_t skip_index(std::size_t k) const {
    std::size_t j = k + 1;
    while (j < seg_.end && t_[j] == "[") {
      int depth = 0;
      for (; j < seg_.end; ++j) {
        if (t_[j] == "[") ++depth;
        if (t_[j] == "]" && --depth == 0) break;
      }
      ++j;
    }
    return j;
  }

  bool is_lhs(std::size_t k) const {
    const auto j = skip_index(k);
    return j < seg_.end && is_assign_op(t_[j]);
  }

  void assignment(std::size_t k, std::vector<DataflowEdge>& edges) {
    // Walk back over index brackets to the assigned variable.
    std::size_t j = k;
    while (j > seg_.begin && t_[j - 1] == "]") {
      int depth = 0;
      std::size_t m = j - 1;
      for (;; --m) {
        if (t_[m] == "]") ++depth;
        if (t_[m] == "[" && --depth == 0) break;
        if (m == seg_.begin) return;
      }
      j = m;
    }
    if (j == seg_.begin || !is_var(j - 1)) return;
    const auto lhs = norm(t_[j - 1]);
    std::vector<std::string> sources;
    int depth = 0;
    for (std::size_t m = k + 1; m < seg_.end; ++m) {
      const auto& tok = t_[m];
      if (tok == "(" || tok == "[" || tok == "{") ++depth;
      if (tok == ")" || tok == "]" || tok == "}") {
        if (--depth < 0) break;
      }
      if (depth == 0 && (tok == ";" || tok == ",")) break;
      if (is_var(m)) sources.push_back(norm(tok));
    }
    std::sort(sources.begin(), sources.end());
    sources.erase(std::unique(sources.begin(), sources.end()), sources.end());
    edges.push_back({lhs, "computedFrom", std::move(sources)});
    defined_.insert(lhs);
  }

  const std::string& norm(const std::string& name) {
    auto [it, inserted] = names_.try_emplace(name, "");
    if (inserted) it->second = "v" + std::to_string(names_.size() - 1);
    return it->second;
  }

  const std::vector<std::string>& t_;
  Segment seg_;
  std::map<std::string, std::string, std::less<>> names_;
  std::set<std::string, std::less<>> defined_;
};

}  // namespace

std::optional<std::vector<std::string>> LightCppGrammar::subtrees(std::string_view source, int depth) const {
  const auto tokens = tokenize_code(source);
  std::size_t i = 0;
  Node root{"unit", {}};
  while (i < tokens.size()) {
    auto part = parse(tokens, i, "unit", "", true, 0);
    for (auto& c : part.children) root.children.push_back(std::move(c));
  }
  std::vector<std::string> out;
  collect(root, depth, out);
  return out;
}

std::optional<std::vector<DataflowEdge>> LightCppGrammar::dataflow(std::string_view source) const {
  const auto tokens = tokenize_code(source);
  std::vector<DataflowEdge> edges;
  for (const auto& seg : segments(tokens)) SegmentFlow(tokens, seg).run(edges);
  return edges;
}

nlohmann::ordered_json to_json(const CodeBleuScore& s) {
  nlohmann::ordered_json j;
  j["total"] = s.total;
  j["ngram"] = s.ngram;
  j["weighted_ngram"] = s.weighted_ngram;
  j["syntax"] = s.syntax_used ? nlohmann::ordered_json(s.syntax) : nlohmann::ordered_json();
  j["dataflow"] = s.dataflow_used ? nlohmann::ordered_json(s.dataflow) : nlohmann::ordered_json();
  j["degraded"] = s.degraded();
  return j;
}

CodeBleuScore codebleu(std::string_view reference, std::string_view candidate, const CodeBleuWeights& weights,
                       const GrammarAnalyzer* grammar) {
  validate(weights);
  static const LightCppGrammar light;
  if (!grammar) grammar = &light;

  const auto ref_tokens = tokenize_code(reference);
  const auto cand_tokens = tokenize_code(candidate);
  CodeBleuScore s;
  s.ngram = bleu(ref_tokens, cand_tokens);
  s.weighted_ngram = weighted_bleu(ref_tokens, cand_tokens, cpp_keywords());

  auto ref_trees = grammar->subtrees(reference, kSyntaxDepth);
  auto cand_trees = grammar->subtrees(candidate, kSyntaxDepth);
  s.syntax_used = ref_trees && cand_trees && !ref_trees->empty();
  if (s.syntax_used) s.syntax = multiset_recall(*ref_trees, *cand_trees);

  auto ref_flow = grammar->dataflow(reference);
  auto cand_flow = grammar->dataflow(candidate);
  s.dataflow_used = ref_flow && cand_flow && !ref_flow->empty();
  if (s.dataflow_used) s.dataflow = multiset_recall(*ref_flow, *cand_flow);

  double weight_sum = weights.ngram + weights.weighted_ngram;
  double sum = weights.ngram * s.ngram + weights.weighted_ngram * s.weighted_ngram;
  if (s.syntax_used) {
    weight_sum += weights.syntax;
    sum += weights.syntax * s.syntax;
  }
  if (s.dataflow_used) {
    weight_sum += weights.dataflow;
    sum += weights.dataflow * s.dataflow;
  }
  // All weight sat on dropped components: fall back to the n-gram pair.
  s.total = weight_sum > 0 ? sum / weight_sum : (s.ngram + s.weighted_ngram) / 2;
  s.total = std::clamp(s.total, 0.0, 1.0);
  return s;
}

}  // namespace f2c
