#include <gtest/gtest.h>

#include <numeric>
#include <random>

#include "oracles.hpp"
#include "rapidner/quality.hpp"

using namespace rapidner;
using namespace rapidner::quality;

namespace {

std::vector<std::string> chars(const std::string& s) {
  std::vector<std::string> out;
  for (char c : s) out.emplace_back(1, c);
  return out;
}

AnnotatedSentence with_spans(std::string id, std::string text,
                             std::vector<std::tuple<std::size_t, std::size_t, std::string>> spans) {
  AnnotatedSentence a;
  a.sentence.sent_id = std::move(id);
  a.sentence.text = std::move(text);
  auto u = unicode::decode(a.sentence.text);
  for (auto& [s, e, t] : spans) {
    Span sp;
    sp.start = s;
    sp.end = e;
    sp.type = t;
    sp.surface = slice(u, s, e);
    a.spans.push_back(sp);
  }
  return a;
}

std::vector<std::string> random_labels(std::mt19937_64& rng, std::size_t n, int categories) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back("L" + std::to_string(rng() % categories));
  return out;
}

}  // namespace

TEST(Cohen, Examples) {
  EXPECT_DOUBLE_EQ(cohen_kappa(chars("xxoox"), chars("xxoox")), 1.0);
  // 8 of 10 agree, both marginals 0.5/0.5.
  EXPECT_NEAR(cohen_kappa(chars("xxxxxooooo"), chars("xxxxooooox")), 0.6, 1e-12);
}

TEST(Cohen, DegenerateAndErrors) {
  EXPECT_DOUBLE_EQ(cohen_kappa(chars("ooo"), chars("ooo")), 1.0);
  EXPECT_THROW(cohen_kappa(chars("xo"), chars("x")), LengthMismatch);
  EXPECT_THROW(cohen_kappa(std::vector<std::string>{}, std::vector<std::string>{}), EmptyInput);
}

TEST(Cohen, MatchesOracleAndProperties) {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 500; ++i) {
    std::size_t n = 1 + rng() % 40;
    int k = 1 + static_cast<int>(rng() % 4);
    auto a = random_labels(rng, n, k), b = random_labels(rng, n, k);
    double kappa = cohen_kappa(a, b);
    EXPECT_NEAR(kappa, oracle::cohen(a, b), 1e-12);
    EXPECT_DOUBLE_EQ(kappa, cohen_kappa(b, a));
    EXPECT_GE(kappa, -1.0 - 1e-12);
    EXPECT_LE(kappa, 1.0 + 1e-12);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<std::string> pa, pb;
    for (auto p : perm) {
      pa.push_back(a[p]);
      pb.push_back(b[p]);
    }
    EXPECT_NEAR(cohen_kappa(pa, pb), kappa, 1e-12);
  }
}

TEST(Fleiss, Examples) {
  EXPECT_DOUBLE_EQ(fleiss_kappa({{2, 0}, {0, 2}}, 2), 1.0);
  EXPECT_DOUBLE_EQ(fleiss_kappa({{1, 1}, {1, 1}}, 2), -1.0);
  EXPECT_DOUBLE_EQ(fleiss_kappa({{3, 0}, {3, 0}}, 3), 1.0);
}

TEST(Fleiss, Errors) {
  EXPECT_THROW(fleiss_kappa({{2, 1}}, 2), RowSumMismatch);
  EXPECT_THROW(fleiss_kappa({{1}}, 1), TooFewRaters);
  EXPECT_THROW(fleiss_kappa({}, 2), EmptyInput);
}

TEST(Fleiss, MatchesOracle) {
  std::mt19937_64 rng(6);
  for (int i = 0; i < 300; ++i) {
    std::size_t raters = 2 + rng() % 4, n = 1 + rng() % 30;
    int k = 1 + static_cast<int>(rng() % 4);
    std::vector<LabelSequence> seqs;
    std::vector<std::vector<std::string>> raw;
    for (std::size_t r = 0; r < raters; ++r) {
      raw.push_back(random_labels(rng, n, k));
      seqs.push_back({"a" + std::to_string(r), raw.back()});
    }
    double kappa = fleiss_kappa(rating_matrix(seqs), static_cast<long>(raters));
    EXPECT_NEAR(kappa, oracle::fleiss(raw), 1e-9);
    EXPECT_GE(kappa, -1.0 - 1e-12);
    EXPECT_LE(kappa, 1.0 + 1e-12);
  }
}

TEST(Agreement, ReportIsSymmetricWithUnitDiagonal) {
  std::vector<LabelSequence> seqs = {{"ann1", chars("xxxxxooooo")}, {"ann2", chars("xxxxoooooo")},
                                     {"ann3", chars("xxxooooooo")}};
  auto r = agreement(seqs);
  EXPECT_EQ(r.items, 10u);
  for (const auto& s : seqs) EXPECT_DOUBLE_EQ(r.pairwise.at({s.annotator_id, s.annotator_id}), 1.0);
  EXPECT_DOUBLE_EQ(r.pairwise.at({"ann1", "ann3"}), r.pairwise.at({"ann3", "ann1"}));
  auto j = to_json(r);
  EXPECT_EQ(j.at("pairwise").size(), 3u);
  EXPECT_THROW(agreement({seqs[0]}), TooFewRaters);
}

TEST(LabelSequences, TokenAndSpanUnits) {
  std::vector<std::pair<std::string, std::vector<AnnotatedSentence>>> anns = {
      {"a", {with_spans("s#1", "green tea now", {{0, 9, "DRINK"}}), with_spans("s#0", "kue", {})}},
      {"b", {with_spans("s#0", "kue", {{0, 3, "FOOD"}}), with_spans("s#1", "green tea now", {{6, 9, "DRINK"}})}},
  };
  auto tok = label_sequences(anns, Unit::kToken);
  EXPECT_EQ(tok[0].labels, (std::vector<std::string>{"O", "B-DRINK", "I-DRINK", "O"}));
  EXPECT_EQ(tok[1].labels, (std::vector<std::string>{"B-FOOD", "O", "B-DRINK", "O"}));
  auto span = label_sequences(anns, Unit::kSpan);
  EXPECT_EQ(span[0].labels, (std::vector<std::string>{"NONE", "DRINK", "NONE"}));
  EXPECT_EQ(span[1].labels, (std::vector<std::string>{"FOOD", "NONE", "DRINK"}));

  anns[1].second.pop_back();
  EXPECT_THROW(label_sequences(anns, Unit::kToken), SentenceSetMismatch);
}

TEST(SpanPrf, Examples) {
  auto gold = with_spans("s#0", "tea and mate", {{0, 3, "DRINK"}, {8, 12, "DRINK"}});
  auto r = span_prf({gold}, {gold});
  EXPECT_DOUBLE_EQ(r.micro.f1, 1.0);
  EXPECT_DOUBLE_EQ(r.per_type.at("DRINK").precision, 1.0);

  auto half = with_spans("s#0", "tea and mate", {{0, 3, "DRINK"}, {4, 7, "DRINK"}});
  r = span_prf({gold}, {half});
  EXPECT_DOUBLE_EQ(r.micro.precision, 0.5);
  EXPECT_DOUBLE_EQ(r.micro.recall, 0.5);
  EXPECT_DOUBLE_EQ(r.micro.f1, 0.5);

  r = span_prf({gold}, {with_spans("s#0", "tea and mate", {})});
  EXPECT_DOUBLE_EQ(r.micro.precision, 0.0);
  EXPECT_DOUBLE_EQ(r.micro.recall, 0.0);
  EXPECT_DOUBLE_EQ(r.micro.f1, 0.0);

  auto empty = with_spans("s#0", "tea and mate", {});
  EXPECT_DOUBLE_EQ(span_prf({empty}, {empty}).micro.f1, 1.0);
  EXPECT_THROW(span_prf({gold}, {with_spans("s#9", "x", {})}), SentenceSetMismatch);
}

TEST(SpanPrf, WrongTypeIsBothFalsePositiveAndFalseNegative) {
  auto gold = with_spans("s#0", "mate", {{0, 4, "DRINK"}});
  auto pred = with_spans("s#0", "mate", {{0, 4, "SPORT"}});
  auto r = span_prf({gold}, {pred});
  EXPECT_EQ(r.per_type.at("DRINK").fn, 1u);
  EXPECT_EQ(r.per_type.at("SPORT").fp, 1u);
  EXPECT_DOUBLE_EQ(r.micro.f1, 0.0);
}

// Brute-force counter over random small cases.
TEST(SpanPrf, MicroMatchesBruteForce) {
  std::mt19937_64 rng(10);
  const std::string text = "a b c d e f g h";
  const char* types[] = {"DRINK", "FOOD"};
  for (int round = 0; round < 300; ++round) {
    std::vector<AnnotatedSentence> gold, pred;
    std::size_t tp = 0, fp = 0, fn = 0;
    for (int s = 0; s < 3; ++s) {
      std::vector<std::tuple<std::size_t, std::size_t, std::string>> g, p;
      for (std::size_t tok = 0; tok < 8; ++tok) {
        std::size_t start = tok * 2;
        if (rng() % 3 == 0) g.emplace_back(start, start + 1, types[rng() % 2]);
        if (rng() % 3 == 0) p.emplace_back(start, start + 1, types[rng() % 2]);
      }
      for (const auto& x : p) (std::find(g.begin(), g.end(), x) != g.end() ? tp : fp) += 1;
      for (const auto& x : g) fn += std::find(p.begin(), p.end(), x) == p.end();
      gold.push_back(with_spans("s#" + std::to_string(s), text, g));
      pred.push_back(with_spans("s#" + std::to_string(s), text, p));
    }
    auto r = span_prf(gold, pred);
    EXPECT_EQ(r.micro.tp, tp);
    EXPECT_EQ(r.micro.fp, fp);
    EXPECT_EQ(r.micro.fn, fn);
    double p = tp + fp ? double(tp) / double(tp + fp) : (tp + fn ? 0.0 : 1.0);
    double rc = tp + fn ? double(tp) / double(tp + fn) : (tp + fp ? 0.0 : 1.0);
    double f = p + rc > 0 ? 2 * p * rc / (p + rc) : 0.0;
    EXPECT_NEAR(r.micro.f1, f, 1e-12);
  }
}
