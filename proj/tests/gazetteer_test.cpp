#include <gtest/gtest.h>

#include <random>
#include <set>

#include "rapidner/gazetteer.hpp"
#include "support.hpp"

using namespace rapidner;
using namespace rapidner::gazetteer;
using testing_support::TempDir;
using testing_support::write;

namespace {

Dictionary manual(const std::string& type, std::initializer_list<const char*> surfaces) {
  Dictionary d(make_entity_type(type));
  for (const char* s : surfaces) d.add(s, Provenance::kManual);
  return d;
}

std::set<std::string> keys(const Dictionary& d) {
  std::set<std::string> out;
  for (const auto& e : d.entries()) out.insert(e.norm_key);
  return out;
}

void expect_unique_keys(const Dictionary& d) {
  EXPECT_EQ(keys(d).size(), d.size());
}

}  // namespace

TEST(EntityTypeName, Pattern) {
  EXPECT_TRUE(valid_type_name("DRINK"));
  EXPECT_TRUE(valid_type_name("JOB_2"));
  EXPECT_FALSE(valid_type_name("drink"));
  EXPECT_FALSE(valid_type_name("2X"));
  EXPECT_FALSE(valid_type_name(""));
  EXPECT_THROW(make_entity_type("bad"), InvalidArgument);
  EXPECT_EQ(make_entity_type("DRINK").display, "Drink");
}

TEST(NormalizeEntry, Examples) {
  EXPECT_EQ(normalize_entry("Caffè  Latte "), "caffè latte");
  EXPECT_EQ(normalize_entry("latte"), "latte");
  EXPECT_EQ(normalize_entry("Barton Premium Blend"), "barton premium blend");
  EXPECT_EQ(normalize_entry(" \t "), "");
}

TEST(NormalizeEntry, ComposesDecomposedInput) {
  EXPECT_EQ(normalize_entry("Café"), "café");
}

TEST(NormalizeEntry, Idempotent) {
  for (const char* s : {"  A  b\tC ", "Straße", "ÉCLAIR", "x", "Ǆ"}) {
    auto once = normalize_entry(s);
    EXPECT_EQ(normalize_entry(once), once) << s;
  }
}

TEST(BuildDictionary, FixtureMapping) {
  kg::SubGraph g;
  g.topic_item = 1;
  g.heads_by_relation[31] = {10, 11};
  g.heads_by_relation[279] = {12};
  kg::ItemIndex items;
  items.insert({10, "Fruitopia", ""});
  items.insert({11, "Clamato", ""});
  items.insert({12, "sahti", ""});
  BuildReport report;
  auto d = build_dictionary(g, items, make_entity_type("DRINK"), &report);
  EXPECT_EQ(d.size(), 3u);
  EXPECT_EQ(d.find("sahti")->provenance, Provenance::kKgP279);
  EXPECT_EQ(d.find("Clamato")->item_id, 11);
  EXPECT_EQ(report.unresolved, 0u);
}

TEST(BuildDictionary, UnresolvedHeadsCounted) {
  kg::SubGraph g;
  g.heads_by_relation[31] = {10, 999};
  kg::ItemIndex items;
  items.insert({10, "latte", ""});
  BuildReport report;
  auto d = build_dictionary(g, items, make_entity_type("DRINK"), &report);
  EXPECT_EQ(d.size(), 1u);
  EXPECT_EQ(report.unresolved, 1u);
}

TEST(BuildDictionary, CrossRelationDuplicateKeepsP31) {
  kg::SubGraph g;
  g.heads_by_relation[31] = {20};
  g.heads_by_relation[279] = {10};
  kg::ItemIndex items;
  items.insert({10, "Latte", ""});
  items.insert({20, "latte", ""});
  auto d = build_dictionary(g, items, make_entity_type("DRINK"));
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d.entries()[0].provenance, Provenance::kKgP31);
  EXPECT_EQ(d.entries()[0].surface, "latte");
}

TEST(BuildDictionary, RejectsNoiseEntries) {
  kg::SubGraph g;
  g.heads_by_relation[31] = {1, 2, 3};
  kg::ItemIndex items;
  items.insert({1, "X", ""});
  items.insert({2, "a b c d e f g h i j k", ""});
  items.insert({3, "ok", ""});
  BuildReport report;
  auto d = build_dictionary(g, items, make_entity_type("DRINK"), &report);
  EXPECT_EQ(keys(d), (std::set<std::string>{"ok"}));
  EXPECT_EQ(report.rejected_short, 1u);
  EXPECT_EQ(report.rejected_long, 1u);
  EXPECT_EQ(report.warnings.size(), 2u);
}

// Brute-force oracle: distinct normalized labels of resolvable heads.
TEST(BuildDictionary, EntryCountMatchesDistinctResolvableKeys) {
  std::mt19937_64 rng(5);
  const std::vector<std::string> labels = {"Tea", "tea", "Green  tea", "green tea", "Coffee", "mate", "Mate ", "kvass"};
  for (int round = 0; round < 50; ++round) {
    kg::ItemIndex items;
    kg::SubGraph g;
    std::set<std::string> expected;
    for (kg::ItemId id = 1; id <= 12; ++id) {
      bool present = testing_support::uniform(rng, 0, 3) != 0;
      const auto& label = labels[testing_support::uniform(rng, 0, labels.size() - 1)];
      if (present) items.insert({id, label, ""});
      if (testing_support::uniform(rng, 0, 1)) {
        g.heads_by_relation[testing_support::uniform(rng, 0, 1) ? 31 : 279].insert(id);
        if (present) expected.insert(normalize_entry(label));
      }
    }
    auto d = build_dictionary(g, items, make_entity_type("DRINK"));
    EXPECT_EQ(keys(d), expected);
    expect_unique_keys(d);
  }
}

TEST(Dictionary, ItemIdPresentExactlyForKgProvenance) {
  Dictionary d(make_entity_type("DRINK"));
  EXPECT_THROW(d.add("tea", Provenance::kKgP31), InvalidArgument);
  EXPECT_THROW(d.add("tea", Provenance::kManual, 5), InvalidArgument);
}

TEST(Union, Examples) {
  auto a = manual("JOB", {"mangaka", "diplomat"});
  auto b = manual("JOB", {"diplomat", "sniper"});
  EXPECT_EQ(unite(a, b, make_entity_type("JOB")).size(), 3u);
  auto empty = Dictionary(make_entity_type("JOB"));
  EXPECT_EQ(keys(unite(a, empty, make_entity_type("JOB"))), keys(a));
}

TEST(Union, FirstOperandWinsOnCollision) {
  Dictionary a(make_entity_type("JOB"));
  a.add("Diplomat", Provenance::kManual);
  Dictionary b(make_entity_type("PROFESSION"));
  b.add("diplomat", Provenance::kKgP31, 7);
  auto u = unite(a, b, make_entity_type("JOB"));
  ASSERT_EQ(u.size(), 1u);
  EXPECT_EQ(u.entries()[0].surface, "Diplomat");
  EXPECT_EQ(u.entries()[0].provenance, Provenance::kManual);
  EXPECT_EQ(u.entity_type().name, "JOB");
}

TEST(Subtract, Examples) {
  auto a = manual("HOBBY", {"chess", "bowling", "judo"});
  auto b = manual("SPORT", {"judo", "golf"});
  EXPECT_EQ(keys(subtract(a, b)), (std::set<std::string>{"chess", "bowling"}));
  EXPECT_EQ(keys(subtract(a, Dictionary())), keys(a));
  EXPECT_TRUE(subtract(a, a).empty());
}

TEST(SetAlgebra, Properties) {
  std::mt19937_64 rng(3);
  const char* pool[] = {"chess", "judo", "golf", "bonsai", "yoga", "Chess", "knitting", "polo"};
  auto random_dict = [&] {
    Dictionary d(make_entity_type("HOBBY"));
    for (int i = 0; i < 5; ++i) d.add(pool[testing_support::uniform(rng, 0, 7)], Provenance::kManual);
    return d;
  };
  const auto t = make_entity_type("HOBBY");
  for (int round = 0; round < 100; ++round) {
    auto a = random_dict(), b = random_dict(), c = random_dict();
    EXPECT_EQ(keys(unite(a, a, t)), keys(a));
    EXPECT_EQ(keys(unite(unite(a, b, t), c, t)), keys(unite(a, unite(b, c, t), t)));
    auto restored = keys(unite(subtract(a, b), b, t));
    for (const auto& k : keys(a)) EXPECT_TRUE(restored.contains(k));
    expect_unique_keys(unite(a, b, t));
    expect_unique_keys(subtract(a, b));
  }
}

TEST(Augment, LineByLine) {
  TempDir dir;
  auto path = write(dir / "list.txt", "bonsai\nchess\n# note\n\n");
  auto d = augment_from_list(manual("HOBBY", {"chess"}), path.string());
  EXPECT_EQ(keys(d), (std::set<std::string>{"chess", "bonsai"}));
  EXPECT_EQ(d.find("bonsai")->provenance, Provenance::kAugmentList);
  EXPECT_EQ(d.find("chess")->provenance, Provenance::kManual);
}

TEST(Augment, EmptyFileAndMissingFile) {
  TempDir dir;
  auto d = manual("HOBBY", {"chess"});
  EXPECT_EQ(keys(augment_from_list(d, write(dir / "e.txt", "").string())), keys(d));
  EXPECT_THROW(augment_from_list(d, (dir / "missing.txt").string()), FileNotReadable);
}

TEST(DictionaryJson, RoundTripAndSchema) {
  Dictionary d(make_entity_type("DRINK", "Drinks"));
  d.add("Kidneys (meat)", Provenance::kKgP279, 4);
  d.add("mate", Provenance::kAugmentList);
  auto j = to_json(d);
  EXPECT_EQ(j.at("schema"), 1);
  EXPECT_EQ(j.at("entity_type"), "DRINK");
  EXPECT_TRUE(j.at("entries")[1].at("item_id").is_null());
  EXPECT_EQ(j.at("entries")[0].at("provenance"), "KG_P279");
  auto back = dictionary_from_json(j);
  EXPECT_EQ(back.entity_type().display, "Drinks");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back.entries()[0].surface, "Kidneys (meat)");
  EXPECT_EQ(back.entries()[0].item_id, 4);
  EXPECT_THROW(dictionary_from_json(nlohmann::json{{"schema", 2}}), SchemaError);
}
