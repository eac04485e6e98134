// Independent reference computations used by the unit and acceptance tests.
#pragma once

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

namespace f2c::testing {

using Tokens = std::vector<std::string>;

inline bool same_gram(const Tokens& a, std::size_t i, const Tokens& b, std::size_t j, std::size_t n) {
  for (std::size_t k = 0; k < n; ++k) {
    if (a[i + k] != b[j + k]) return false;
  }
  return true;
}

inline std::size_t occurrences(const Tokens& hay, const Tokens& gram_src, std::size_t at, std::size_t n) {
  std::size_t c = 0;
  for (std::size_t j = 0; j + n <= hay.size(); ++j) c += same_gram(hay, j, gram_src, at, n) ? 1 : 0;
  return c;
}

// Smoothed BLEU by enumeration: every distinct candidate n-gram is counted
// by scanning both sequences. `keyword_weight` applies to unigrams only.
inline double brute_force_bleu(const Tokens& ref, const Tokens& cand, const std::set<std::string, std::less<>>& keywords = {},
                               double keyword_weight = 1.0) {
  if (ref.empty() && cand.empty()) return 1.0;
  if (cand.empty()) return 0.0;
  double product = 1.0;
  for (std::size_t n = 1; n <= 4; ++n) {
    double matched = 0;
    double total = 0;
    for (std::size_t i = 0; i + n <= cand.size(); ++i) {
      bool seen = false;
      for (std::size_t p = 0; p < i && !seen; ++p) seen = same_gram(cand, p, cand, i, n);
      if (seen) continue;
      const double w = (n == 1 && keywords.contains(cand[i])) ? keyword_weight : 1.0;
      const auto in_cand = occurrences(cand, cand, i, n);
      const auto in_ref = occurrences(ref, cand, i, n);
      matched += w * static_cast<double>(std::min(in_cand, in_ref));
      total += w * static_cast<double>(in_cand);
    }
    product *= (matched + 1.0) / (total + 1.0);
  }
  const double r = static_cast<double>(ref.size());
  const double c = static_cast<double>(cand.size());
  const double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
  return bp * std::pow(product, 0.25);
}

// Twenty short C++ snippets, each at most 50 tokens.
inline const std::vector<std::string>& snippet_suite() {
  static const std::vector<std::string> suite = {
      "int a = 1;",
      "int add(int a, int b) { return a + b; }",
      "for (int i = 0; i < n; ++i) { sum += x[i]; }",
      "double mean(const double* v, int n) { double s = 0; for (int i = 0; i < n; i++) s += v[i]; return s / n; }",
      "if (x > 0) { y = x; } else { y = -x; }",
      "while (k != 1) { k = (k % 2 == 0) ? k / 2 : 3 * k + 1; ++steps; }",
      "std::vector<int> v(10, 0);",
      "#include <cstdio>\nint main() { std::printf(\"hi\\n\"); return 0; }",
      "auto f = [&](int z) { return z * z; };",
      "struct Point { double x; double y; };",
      "const char* s = \"a // not a comment\"; // trailing",
      "x <<= 2; y >>= 1; z = x && y || !w;",
      "int fact(int n) { return n <= 1 ? 1 : n * fact(n - 1); }",
      "a[i][j] = b[j][i] * 2.5e-3;",
      "switch (c) { case 'a': ++na; break; default: break; }",
      "#pragma omp parallel for\nfor (int i = 0; i < n; ++i) y[i] = a * x[i] + y[i];",
      "std::string t = R\"(raw ( text)\";",
      "do { --n; } while (n > 0);",
      "template <typename T> T maxv(T a, T b) { return a > b ? a : b; }",
      "/* block */ return std::sqrt(dx * dx + dy * dy);",
  };
  return suite;
}

}  // namespace f2c::testing
