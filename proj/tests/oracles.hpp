#pragma once

// Reference implementations used only by tests. Each one is written from the
// definitions directly, in the slowest obvious way, and shares no code with
// the library beyond plain data types.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <string>
#include <tuple>
#include <vector>

namespace oracle {

// ---- matcher ------------------------------------------------------------
// ASCII only: word characters are letters and digits, plus ' and - between
// two of them. A position is a boundary unless both neighbours are word
// characters.

struct Pattern {
  std::string text;
  std::string type;
};

struct Match {
  std::size_t start, end;
  std::string type;
  std::vector<std::string> candidates;  // distinct types at this extent, priority order

  bool operator==(const Match&) const = default;
};

inline std::vector<bool> word_chars(const std::string& s) {
  std::vector<bool> w(s.size(), false);
  auto alnum = [&](std::size_t i) { return std::isalnum(static_cast<unsigned char>(s[i])) != 0; };
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (alnum(i)) w[i] = true;
    else if ((s[i] == '\'' || s[i] == '-') && i > 0 && i + 1 < s.size() && alnum(i - 1) && alnum(i + 1)) w[i] = true;
  }
  return w;
}

inline bool boundary(const std::vector<bool>& w, std::size_t p) {
  if (p == 0 || p == w.size()) return true;
  return !(w[p - 1] && w[p]);
}

inline std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

inline std::vector<Match> leftmost_longest(const std::string& text, const std::vector<Pattern>& patterns,
                                           const std::vector<std::string>& priority) {
  auto rank = [&](const std::string& t) {
    return std::find(priority.begin(), priority.end(), t) - priority.begin();
  };
  const auto w = word_chars(text);
  const std::string folded = lower(text);
  // Every (start, end) extent that some pattern matches, with its types.
  std::map<std::pair<std::size_t, std::size_t>, std::set<std::string>> found;
  for (std::size_t p = 0; p < text.size(); ++p) {
    for (const auto& pat : patterns) {
      const std::string needle = lower(pat.text);
      if (needle.empty() || p + needle.size() > text.size()) continue;
      if (folded.compare(p, needle.size(), needle) != 0) continue;
      if (!boundary(w, p) || !boundary(w, p + needle.size())) continue;
      found[{p, p + needle.size()}].insert(pat.type);
    }
  }
  std::vector<Match> out;
  std::size_t resume = 0;
  for (std::size_t p = 0; p < text.size(); ++p) {
    if (p < resume) continue;
    std::size_t best_end = 0;
    for (const auto& [extent, types] : found)
      if (extent.first == p) best_end = std::max(best_end, extent.second);
    if (best_end == 0) continue;
    std::vector<std::string> types(found[{p, best_end}].begin(), found[{p, best_end}].end());
    std::sort(types.begin(), types.end(), [&](const auto& a, const auto& b) { return rank(a) < rank(b); });
    out.push_back({p, best_end, types.front(), types.size() > 1 ? types : std::vector<std::string>{}});
    resume = best_end;
  }
  return out;
}

// Random dictionaries and sentences over a vocabulary with shared prefixes,
// suffixes and joiner characters, so boundary and overlap cases are common.
struct MatcherCase {
  std::vector<Pattern> patterns;
  std::vector<std::string> sentences;
};

inline MatcherCase random_matcher_case(std::mt19937_64& rng, const std::vector<std::string>& types,
                                       std::size_t entries = 50, std::size_t sentences = 50) {
  static const std::vector<std::string> vocab = {
      "tea", "teas", "Tea", "green", "chai", "masala", "mate", "checkmate", "soy", "soy-milk", "milk",
      "o'clock", "Barton", "premium", "blend", "kue", "ku", "ku2", "latte", "caffe", "x", "a", "tea-time", "9"};
  static const std::vector<std::string> filler = {"the", "and", "I", "love", "with", "is", "drink", "ate"};
  static const std::vector<std::string> glue = {" ", " ", " ", ", ", ". ", " (", ") ", " - ", "'", "-", " '"};
  auto pick = [&](const auto& v) -> const auto& {
    return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
  };
  MatcherCase c;
  std::size_t n = std::uniform_int_distribution<std::size_t>(1, entries)(rng);
  for (std::size_t i = 0; i < n; ++i) {
    int words = std::uniform_int_distribution<int>(1, 3)(rng);
    std::string p;
    for (int k = 0; k < words; ++k) p += (k ? " " : "") + pick(vocab);
    c.patterns.push_back({p, pick(types)});
  }
  for (std::size_t i = 0; i < sentences; ++i) {
    std::string s;
    int parts = std::uniform_int_distribution<int>(1, 12)(rng);
    for (int k = 0; k < parts; ++k) {
      if (k) s += pick(glue);
      int kind = std::uniform_int_distribution<int>(0, 2)(rng);
      if (kind == 0) s += pick(c.patterns).text;
      else if (kind == 1) s += pick(vocab);
      else s += pick(filler);
    }
    c.sentences.push_back(s);
  }
  return c;
}

// ---- agreement -------------------------------------------------------------

inline double cohen(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::set<std::string> cats(a.begin(), a.end());
  cats.insert(b.begin(), b.end());
  double n = static_cast<double>(a.size()), po = 0, pe = 0;
  for (std::size_t i = 0; i < a.size(); ++i) po += a[i] == b[i];
  po /= n;
  for (const auto& c : cats) {
    double pa = static_cast<double>(std::count(a.begin(), a.end(), c)) / n;
    double pb = static_cast<double>(std::count(b.begin(), b.end(), c)) / n;
    pe += pa * pb;
  }
  if (pe == 1.0) return po == 1.0 ? 1.0 : 0.0;
  return (po - pe) / (1 - pe);
}

// Fleiss via pairwise agreement counting: P_i is the fraction of ordered
// rater pairs on item i that agree.
inline double fleiss(const std::vector<std::vector<std::string>>& raters) {
  const std::size_t items = raters.front().size(), r = raters.size();
  std::map<std::string, double> share;
  double p_bar = 0;
  for (std::size_t i = 0; i < items; ++i) {
    double agree = 0;
    for (std::size_t x = 0; x < r; ++x) {
      share[raters[x][i]] += 1;
      for (std::size_t y = 0; y < r; ++y)
        if (x != y && raters[x][i] == raters[y][i]) agree += 1;
    }
    p_bar += agree / static_cast<double>(r * (r - 1));
  }
  p_bar /= static_cast<double>(items);
  double pe = 0;
  for (auto& [c, v] : share) pe += std::pow(v / static_cast<double>(items * r), 2);
  if (pe == 1.0) return p_bar == 1.0 ? 1.0 : 0.0;
  return (p_bar - pe) / (1 - pe);
}

}  // namespace oracle
