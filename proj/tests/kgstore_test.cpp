#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "rapidner/kgstore.hpp"
#include "support.hpp"

using namespace rapidner;
using testing_support::TempDir;
using testing_support::write;

TEST(LoadStatements, KeepsOnlyRequestedRelations) {
  TempDir dir;
  auto p = write(dir / "s.csv", "263424,31,154007\n263424,279,40050\n7,5,9\n");
  auto store = kg::load_statements(p.string(), kg::RelationFilter::of({31, 279}));
  EXPECT_EQ(store.size(), 2u);
  EXPECT_EQ(store.report.rows, 3u);
  EXPECT_EQ(store.report.kept, 2u);
}

TEST(LoadStatements, EmptyFile) {
  TempDir dir;
  auto p = write(dir / "s.csv", "");
  EXPECT_TRUE(kg::load_statements(p.string(), kg::RelationFilter::of({31})).empty());
}

TEST(LoadStatements, DetectsHeaderAndCrlf) {
  TempDir dir;
  auto p = write(dir / "s.csv", "source_item_id,edge_property_id,target_item_id\r\n1,31,2\r\n3,31,2\r\n");
  auto store = kg::load_statements(p.string(), kg::RelationFilter::all());
  EXPECT_TRUE(store.report.had_header);
  EXPECT_EQ(store.size(), 2u);
}

TEST(LoadStatements, StrictModeReportsLineNumber) {
  TempDir dir;
  auto p = write(dir / "s.csv", "1,31,2\n1,x,2\n");
  try {
    kg::load_statements(p.string(), kg::RelationFilter::all());
    FAIL() << "expected MalformedRow";
  } catch (const MalformedRow& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(LoadStatements, LenientModeCountsAndSkips) {
  TempDir dir;
  auto p = write(dir / "s.csv", "1,31,2\n1,x,2\n4,31\n-1,31,2\n5,279,2\n");
  auto store = kg::load_statements(p.string(), kg::RelationFilter::all(), kg::ParseMode::kLenient);
  EXPECT_EQ(store.size(), 2u);
  EXPECT_EQ(store.report.malformed, 3u);
}

TEST(LoadStatements, MissingFile) {
  EXPECT_THROW(kg::load_statements("/nonexistent/s.csv", kg::RelationFilter::all()), FileNotReadable);
}

TEST(ParseProperty, AcceptsBothForms) {
  EXPECT_EQ(kg::parse_property("P31"), 31);
  EXPECT_EQ(kg::parse_property("279"), 279);
  EXPECT_EQ(kg::parse_property_list("P31, 279"), (std::vector<kg::PropertyId>{31, 279}));
  EXPECT_THROW(kg::parse_property("Q5"), InvalidArgument);
}

TEST(LoadItems, LookupByIdAndLabel) {
  TempDir dir;
  auto p = write(dir / "i.csv", "1,Universe,totality of space and all contents\n");
  auto items = kg::load_items(p.string());
  ASSERT_NE(items.find(1), nullptr);
  EXPECT_EQ(items.find(1)->label, "Universe");
  EXPECT_EQ(kg::resolve_topic(items, "Universe"), 1);
  EXPECT_THROW(kg::resolve_topic(items, "NoSuchTopic"), TopicNotFound);
  EXPECT_THROW(kg::resolve_topic(items, "universe"), TopicNotFound);
}

TEST(LoadItems, EmptyFileMisses) {
  TempDir dir;
  auto items = kg::load_items(write(dir / "i.csv", "").string());
  EXPECT_EQ(items.size(), 0u);
  EXPECT_EQ(items.find(1), nullptr);
}

TEST(LoadItems, DuplicateIdFirstWins) {
  TempDir dir;
  auto items = kg::load_items(write(dir / "i.csv", "5,first,a\n5,second,b\n").string());
  EXPECT_EQ(items.find(5)->label, "first");
  EXPECT_EQ(items.report.duplicates, 1u);
}

TEST(LoadItems, QuotedFieldsWithCommasAndNewlines) {
  TempDir dir;
  auto items = kg::load_items(write(dir / "i.csv", "7,\"Black & White, whisky\",\"line one\nline two\"\n8,x y,\n").string());
  EXPECT_EQ(items.find(7)->label, "Black & White, whisky");
  EXPECT_EQ(items.find(7)->description, "line one\nline two");
  EXPECT_EQ(items.find(8)->label, "x y");
}

TEST(ResolveTopic, AmbiguousListsIds) {
  TempDir dir;
  auto items = kg::load_items(write(dir / "i.csv", "9,Mercury,planet\n3,Mercury,element\n").string());
  try {
    kg::resolve_topic(items, "Mercury");
    FAIL();
  } catch (const AmbiguousTopic& e) {
    EXPECT_EQ(e.ids(), (std::vector<kg::ItemId>{3, 9}));
  }
}

TEST(LoadPages, ByItemAndMisses) {
  TempDir dir;
  auto pages = kg::load_pages(write(dir / "p.csv", "12,6199,Anarchism,31335\n").string());
  ASSERT_NE(pages.by_item(6199), nullptr);
  EXPECT_EQ(pages.by_item(6199)->page_id, 12);
  EXPECT_EQ(pages.by_item(1), nullptr);
}

TEST(LoadPages, SharedItemFirstWins) {
  TempDir dir;
  auto pages = kg::load_pages(write(dir / "p.csv", "1,10,A,5\n2,11,B,6\n3,10,C,7\n").string());
  EXPECT_EQ(pages.size(), 2u);
  EXPECT_EQ(pages.by_item(10)->title, "A");
  EXPECT_EQ(pages.report.duplicates, 1u);
  EXPECT_EQ(pages.report.warnings.size(), 1u);
}

TEST(ExtractSubgraph, HandEnumeratedFixture) {
  kg::TripleStore store;
  for (auto t : std::vector<kg::Triple>{{10, 31, 99}, {11, 31, 99}, {10, 31, 99}, {12, 279, 99}, {13, 31, 98}})
    store.add(t);
  auto g = kg::extract_subgraph(store, 99, {31, 279});
  EXPECT_EQ(g.heads_by_relation.at(31), (std::set<kg::ItemId>{10, 11}));
  EXPECT_EQ(g.heads_by_relation.at(279), (std::set<kg::ItemId>{12}));
}

TEST(ExtractSubgraph, NoTriplesTargetTopic) {
  kg::TripleStore store;
  store.add({1, 31, 2});
  auto g = kg::extract_subgraph(store, 77, {31, 279});
  EXPECT_TRUE(g.heads_by_relation.at(31).empty());
  EXPECT_TRUE(g.heads_by_relation.at(279).empty());
}

TEST(ExtractSubgraph, JsonRoundTrip) {
  kg::SubGraph g;
  g.topic_item = 2095;
  g.heads_by_relation[31] = {1, 2};
  g.heads_by_relation[279] = {};
  nlohmann::json j = g;
  EXPECT_EQ(j.dump(), R"({"heads":{"279":[],"31":[1,2]},"topic_item":2095})");
  EXPECT_EQ(j.get<kg::SubGraph>(), g);
}

namespace {

std::vector<kg::Triple> random_triples(std::mt19937_64& rng, std::size_t n) {
  std::vector<kg::Triple> out;
  const kg::PropertyId rels[] = {31, 279, 17, 5};
  for (std::size_t i = 0; i < n; ++i)
    out.push_back({static_cast<kg::ItemId>(testing_support::uniform(rng, 1, 300)), rels[testing_support::uniform(rng, 0, 3)],
                   static_cast<kg::ItemId>(testing_support::uniform(rng, 1, 20))});
  return out;
}

}  // namespace

// Linear scan over the raw triples is the oracle for the index.
TEST(TripleStoreProperties, IndexMatchesLinearScan) {
  std::mt19937_64 rng(7);
  for (int round = 0; round < 20; ++round) {
    auto triples = random_triples(rng, 500);
    kg::TripleStore store;
    for (const auto& t : triples) store.add(t);
    EXPECT_EQ(store.index_entries(), triples.size());
    for (kg::ItemId topic = 1; topic <= 20; ++topic) {
      auto g = kg::extract_subgraph(store, topic, {31, 279, 17, 5});
      for (kg::PropertyId r : {31, 279, 17, 5}) {
        std::set<kg::ItemId> expected;
        for (const auto& t : triples)
          if (t.tail == topic && t.relation == r) expected.insert(t.head);
        EXPECT_EQ(g.heads_by_relation.at(r), expected);
      }
    }
  }
}

TEST(TripleStoreProperties, FilterMonotonicity) {
  std::mt19937_64 rng(11);
  kg::TripleStore store;
  for (const auto& t : random_triples(rng, 2000)) store.add(t);
  for (kg::ItemId topic = 1; topic <= 20; ++topic) {
    auto small = kg::extract_subgraph(store, topic, {31});
    auto large = kg::extract_subgraph(store, topic, {31, 279});
    EXPECT_EQ(small.heads_by_relation.size(), 1u);
    EXPECT_EQ(small.heads_by_relation.at(31), large.heads_by_relation.at(31));
  }
}

TEST(TripleStoreProperties, StreamedFilterEqualsPostFilter) {
  std::mt19937_64 rng(13);
  TempDir dir;
  for (std::size_t n : {0u, 1u, 100u, 10000u}) {
    auto triples = random_triples(rng, n);
    std::string csv;
    for (const auto& t : triples)
      csv += std::to_string(t.head) + "," + std::to_string(t.relation) + "," + std::to_string(t.tail) + "\n";
    auto p = write(dir / "s.csv", csv);
    auto all = kg::load_statements(p.string(), kg::RelationFilter::all());
    auto filtered = kg::load_statements(p.string(), kg::RelationFilter::of({31, 279}));
    std::vector<kg::Triple> expected;
    for (const auto& t : all.triples())
      if (t.relation == 31 || t.relation == 279) expected.push_back(t);
    ASSERT_EQ(filtered.size(), expected.size());
    EXPECT_TRUE(std::equal(expected.begin(), expected.end(), filtered.triples().begin()));
  }
}
