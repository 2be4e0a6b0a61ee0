#pragma once

// Inter-annotator agreement (Cohen's and Fleiss' kappa) and exact-match
// span precision/recall/F1.

#include <algorithm>
#include <array>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "rapidner/annotation.hpp"
#include "rapidner/dataset.hpp"
#include "rapidner/error.hpp"

namespace rapidner::quality {

struct LabelSequence {
  std::string annotator_id;
  std::vector<std::string> labels;
};

// kappa = (p_o - p_e) / (1 - p_e). When the expected agreement is already
// 1 (both raters used one and the same category) the result is 1 for
// perfect observed agreement and 0 otherwise.
inline double kappa_from(double observed, double expected) {
  if (expected >= 1.0) return observed >= 1.0 ? 1.0 : 0.0;
  return (observed - expected) / (1.0 - expected);
}

inline double cohen_kappa(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  if (a.size() != b.size()) throw LengthMismatch(a.size(), b.size());
  if (a.empty()) throw EmptyInput("label sequence");
  const double n = static_cast<double>(a.size());
  std::map<std::string, std::pair<std::size_t, std::size_t>> marginals;
  std::size_t agree = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    agree += a[i] == b[i];
    ++marginals[a[i]].first;
    ++marginals[b[i]].second;
  }
  double expected = 0;
  for (const auto& [label, counts] : marginals)
    expected += (static_cast<double>(counts.first) / n) * (static_cast<double>(counts.second) / n);
  return kappa_from(static_cast<double>(agree) / n, expected);
}

inline double cohen_kappa(const LabelSequence& a, const LabelSequence& b) {
  return cohen_kappa(a.labels, b.labels);
}

// `counts[i][j]` = number of raters who put item i in category j.
inline double fleiss_kappa(const std::vector<std::vector<long>>& counts, long raters) {
  if (raters < 2) throw TooFewRaters(raters);
  if (counts.empty()) throw EmptyInput("rating matrix");
  const std::size_t categories = counts.front().size();
  std::vector<double> column(categories, 0.0);
  double p_bar = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i].size() != categories) throw InvalidArgument("ragged rating matrix at row " + std::to_string(i));
    long sum = 0;
    double agree = 0;
    for (std::size_t j = 0; j < categories; ++j) {
      if (counts[i][j] < 0) throw InvalidArgument("negative count at row " + std::to_string(i));
      sum += counts[i][j];
      agree += static_cast<double>(counts[i][j]) * static_cast<double>(counts[i][j] - 1);
      column[j] += static_cast<double>(counts[i][j]);
    }
    if (sum != raters) throw RowSumMismatch(i, sum, raters);
    p_bar += agree / (static_cast<double>(raters) * static_cast<double>(raters - 1));
  }
  const double items = static_cast<double>(counts.size());
  p_bar /= items;
  double p_e = 0;
  for (double c : column) {
    double p = c / (items * static_cast<double>(raters));
    p_e += p * p;
  }
  return kappa_from(p_bar, p_e);
}

// Builds the item x category matrix from aligned label sequences.
inline std::vector<std::vector<long>> rating_matrix(const std::vector<LabelSequence>& sequences) {
  if (sequences.empty()) throw EmptyInput("annotator set");
  const std::size_t n = sequences.front().labels.size();
  std::set<std::string> categories;
  for (const auto& s : sequences) {
    if (s.labels.size() != n) throw LengthMismatch(n, s.labels.size());
    categories.insert(s.labels.begin(), s.labels.end());
  }
  std::map<std::string, std::size_t> column;
  for (const auto& c : categories) column.emplace(c, column.size());
  std::vector<std::vector<long>> m(n, std::vector<long>(categories.size(), 0));
  for (const auto& s : sequences)
    for (std::size_t i = 0; i < n; ++i) ++m[i][column[s.labels[i]]];
  return m;
}

struct AgreementReport {
  std::map<std::pair<std::string, std::string>, double> pairwise;  // both orders present
  double fleiss = 0;
  std::size_t items = 0;
};

inline AgreementReport agreement(const std::vector<LabelSequence>& sequences) {
  if (sequences.size() < 2) throw TooFewRaters(static_cast<long>(sequences.size()));
  AgreementReport r;
  r.items = sequences.front().labels.size();
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    for (std::size_t j = i; j < sequences.size(); ++j) {
      double k = cohen_kappa(sequences[i], sequences[j]);
      r.pairwise[{sequences[i].annotator_id, sequences[j].annotator_id}] = k;
      r.pairwise[{sequences[j].annotator_id, sequences[i].annotator_id}] = k;
    }
  }
  r.fleiss = fleiss_kappa(rating_matrix(sequences), static_cast<long>(sequences.size()));
  return r;
}

inline nlohmann::json to_json(const AgreementReport& r) {
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& [key, k] : r.pairwise)
    if (key.first < key.second) pairs.push_back({{"a", key.first}, {"b", key.second}, {"cohen_kappa", k}});
  return {{"items", r.items}, {"pairwise", pairs}, {"fleiss_kappa", r.fleiss}};
}

enum class Unit { kToken, kSpan };

namespace detail {

inline std::map<std::string, const AnnotatedSentence*> by_id(const std::vector<AnnotatedSentence>& v,
                                                             const std::string& who) {
  std::map<std::string, const AnnotatedSentence*> m;
  for (const auto& a : v)
    if (!m.emplace(a.sentence.sent_id, &a).second)
      throw SentenceSetMismatch(who + " lists sentence " + a.sentence.sent_id + " twice");
  return m;
}

inline void require_same_ids(const std::map<std::string, const AnnotatedSentence*>& a,
                             const std::map<std::string, const AnnotatedSentence*>& b, const std::string& who) {
  if (a.size() != b.size()) throw SentenceSetMismatch(who + " covers a different set of sentences");
  for (auto ia = a.begin(), ib = b.begin(); ia != a.end(); ++ia, ++ib)
    if (ia->first != ib->first) throw SentenceSetMismatch(who + " covers a different set of sentences");
}

}  // namespace detail

// Converts each annotator's annotated sentences to aligned label sequences.
// Token unit: the BIO tag of every token, sentences in sent_id order. Span
// unit: one item per distinct (sentence, start, end) proposed by anyone;
// each annotator's label is the type they gave that extent, or "NONE".
inline std::vector<LabelSequence> label_sequences(
    const std::vector<std::pair<std::string, std::vector<AnnotatedSentence>>>& annotators, Unit unit) {
  if (annotators.empty()) throw EmptyInput("annotator set");
  std::vector<std::map<std::string, const AnnotatedSentence*>> maps;
  for (const auto& [who, sentences] : annotators) maps.push_back(detail::by_id(sentences, who));
  for (std::size_t i = 1; i < maps.size(); ++i) detail::require_same_ids(maps[0], maps[i], annotators[i].first);

  std::vector<LabelSequence> out;
  for (const auto& [who, sentences] : annotators) out.push_back({who, {}});

  for (const auto& [sent_id, first] : maps[0]) {
    if (unit == Unit::kToken) {
      for (std::size_t a = 0; a < maps.size(); ++a) {
        auto tagged = dataset::spans_to_bio(*maps[a].at(sent_id));
        for (const auto& t : tagged.tags) out[a].labels.push_back(t.str());
      }
    } else {
      std::set<std::pair<std::size_t, std::size_t>> extents;
      for (const auto& m : maps)
        for (const auto& s : m.at(sent_id)->spans) extents.insert({s.start, s.end});
      for (const auto& [start, end] : extents) {
        for (std::size_t a = 0; a < maps.size(); ++a) {
          std::string label = "NONE";
          for (const auto& s : maps[a].at(sent_id)->spans)
            if (s.start == start && s.end == end) label = s.type;
          out[a].labels.push_back(label);
        }
      }
    }
  }
  return out;
}

struct Prf {
  std::size_t tp = 0, fp = 0, fn = 0;
  double precision = 0, recall = 0, f1 = 0;
};

// 0/0 convention: a type with no gold and no predicted spans scores 1/1/1;
// any other zero denominator gives 0.
inline Prf finish(std::size_t tp, std::size_t fp, std::size_t fn) {
  Prf p{tp, fp, fn};
  if (tp + fp == 0 && tp + fn == 0) {
    p.precision = p.recall = p.f1 = 1.0;
    return p;
  }
  p.precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
  p.recall = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
  p.f1 = p.precision + p.recall == 0 ? 0.0 : 2 * p.precision * p.recall / (p.precision + p.recall);
  return p;
}

struct PrfReport {
  std::map<std::string, Prf> per_type;
  Prf micro;
};

// A predicted span is a true positive iff a gold span has the same
// (start, end, type).
inline PrfReport span_prf(const std::vector<AnnotatedSentence>& gold, const std::vector<AnnotatedSentence>& pred) {
  auto g = detail::by_id(gold, "gold");
  auto p = detail::by_id(pred, "prediction");
  detail::require_same_ids(g, p, "prediction");
  std::map<std::string, std::array<std::size_t, 3>> counts;  // tp, fp, fn
  for (const auto& [id, gs] : g) {
    using Key = std::tuple<std::size_t, std::size_t, std::string>;
    std::set<Key> gold_set, pred_set;
    for (const auto& s : gs->spans) gold_set.insert({s.start, s.end, s.type});
    for (const auto& s : p.at(id)->spans) pred_set.insert({s.start, s.end, s.type});
    for (const auto& k : pred_set) {
      auto& c = counts[std::get<2>(k)];
      if (gold_set.contains(k)) ++c[0];
      else ++c[1];
    }
    for (const auto& k : gold_set)
      if (!pred_set.contains(k)) ++counts[std::get<2>(k)][2];
  }
  PrfReport r;
  std::size_t tp = 0, fp = 0, fn = 0;
  for (const auto& [type, c] : counts) {
    r.per_type[type] = finish(c[0], c[1], c[2]);
    tp += c[0];
    fp += c[1];
    fn += c[2];
  }
  r.micro = finish(tp, fp, fn);
  return r;
}

inline nlohmann::json to_json(const PrfReport& r) {
  auto one = [](const Prf& p) {
    return nlohmann::json{{"precision", p.precision}, {"recall", p.recall}, {"f1", p.f1},
                          {"tp", p.tp}, {"fp", p.fp}, {"fn", p.fn}};
  };
  nlohmann::json types = nlohmann::json::object();
  for (const auto& [t, p] : r.per_type) types[t] = one(p);
  return {{"per_type", types}, {"micro", one(r.micro)}};
}

}  // namespace rapidner::quality
