#pragma once

// Knowledge-graph ingestion: statements (head, property, tail) triples, item
// labels and Wikipedia page records in the KDWD CSV layouts, plus depth-1
// sub-graph extraction around a topic item.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "rapidner/csv.hpp"
#include "rapidner/error.hpp"

namespace rapidner::kg {

using ItemId = std::int64_t;
using PropertyId = std::int64_t;
using PageId = std::int64_t;

inline constexpr PropertyId kInstanceOf = 31;
inline constexpr PropertyId kSubclassOf = 279;

enum class ParseMode { kStrict, kLenient };

struct Triple {
  ItemId head = 0;
  PropertyId relation = 0;
  ItemId tail = 0;

  friend bool operator==(const Triple&, const Triple&) = default;
};

// Accepts "31" or "P31" (any case).
inline PropertyId parse_property(std::string_view text) {
  std::string_view s = text;
  if (!s.empty() && (s.front() == 'P' || s.front() == 'p')) s.remove_prefix(1);
  auto value = csv::parse_int(s);
  if (!value || *value <= 0)
    throw InvalidArgument("not a property identifier: " + std::string(text));
  return *value;
}

inline std::vector<PropertyId> parse_property_list(std::string_view text) {
  std::vector<PropertyId> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t comma = text.find(',', pos);
    if (comma == std::string_view::npos) comma = text.size();
    auto piece = text.substr(pos, comma - pos);
    if (!piece.empty()) out.push_back(parse_property(piece));
    pos = comma + 1;
  }
  return out;
}

// Set of relations to keep while streaming; `all()` keeps everything.
class RelationFilter {
 public:
  static RelationFilter all() { return RelationFilter(); }
  static RelationFilter of(std::initializer_list<PropertyId> ids) {
    return of(std::vector<PropertyId>(ids));
  }
  template <typename Range>
  static RelationFilter of(const Range& ids) {
    RelationFilter f;
    f.ids_.emplace(std::begin(ids), std::end(ids));
    return f;
  }

  bool contains(PropertyId r) const { return !ids_ || ids_->contains(r); }
  bool universal() const { return !ids_.has_value(); }

 private:
  std::optional<std::unordered_set<PropertyId>> ids_;
};

// Outcome counters shared by the CSV loaders.
struct LoadReport {
  std::size_t rows = 0;        // data rows seen (header excluded)
  std::size_t kept = 0;
  std::size_t malformed = 0;   // skipped in lenient mode
  std::size_t duplicates = 0;  // first occurrence wins
  std::size_t empty_labels = 0;
  bool had_header = false;
  std::vector<std::string> warnings;

  void warn(std::string message) {
    if (warnings.size() < 100) warnings.push_back(std::move(message));
  }
};

class TripleStore {
 public:
  void add(const Triple& t) {
    index_[key(t.tail, t.relation)].push_back(t.head);
    triples_.push_back(t);
  }

  std::span<const Triple> triples() const { return triples_; }
  std::size_t size() const { return triples_.size(); }
  bool empty() const { return triples_.empty(); }

  // Heads of every (head, relation, tail) triple, in insertion order.
  std::span<const ItemId> heads(ItemId tail, PropertyId relation) const {
    auto it = index_.find(key(tail, relation));
    if (it == index_.end()) return {};
    return it->second;
  }

  std::size_t index_entries() const {
    std::size_t n = 0;
    for (const auto& [k, v] : index_) n += v.size();
    return n;
  }

  LoadReport report;

 private:
  struct Key {
    ItemId tail;
    PropertyId relation;
    bool operator==(const Key&) const = default;
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const noexcept {
      auto h = static_cast<std::uint64_t>(k.tail) * 0x9E3779B97F4A7C15ULL;
      return static_cast<std::size_t>(h ^ (static_cast<std::uint64_t>(k.relation) + (h >> 29)));
    }
  };
  static Key key(ItemId tail, PropertyId relation) { return {tail, relation}; }

  std::vector<Triple> triples_;
  std::unordered_map<Key, std::vector<ItemId>, KeyHash> index_;
};

namespace detail {

inline std::ifstream open(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileNotReadable(path);
  return in;
}

inline bool blank(const csv::Record& r) {
  return r.fields.size() == 1 && r.fields[0].empty();
}

// Either throws (strict) or counts and returns (lenient).
inline void malformed(ParseMode mode, LoadReport& report, const std::string& path,
                      std::size_t line, const std::string& why) {
  if (mode == ParseMode::kStrict) throw MalformedRow(path, line, why);
  ++report.malformed;
  report.warn(path + ":" + std::to_string(line) + ": " + why);
}

inline std::string trim(std::string_view s) {
  auto is_blank = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
  while (!s.empty() && is_blank(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_blank(s.back())) s.remove_suffix(1);
  return std::string(s);
}

}  // namespace detail

// Streams a statements file, keeping only rows whose relation passes `filter`.
inline TripleStore load_statements(const std::string& path, const RelationFilter& filter,
                                   ParseMode mode = ParseMode::kStrict) {
  auto in = detail::open(path);
  csv::Reader reader(in);
  csv::Record rec;
  TripleStore store;
  LoadReport& report = store.report;
  bool first = true;
  while (reader.next(rec)) {
    if (first) {
      first = false;
      if (csv::looks_like_header(rec)) {
        report.had_header = true;
        continue;
      }
    }
    if (detail::blank(rec)) continue;
    ++report.rows;
    if (rec.fields.size() != 3) {
      detail::malformed(mode, report, path, rec.line,
                        "expected 3 columns, got " + std::to_string(rec.fields.size()));
      continue;
    }
    auto h = csv::parse_int(rec.fields[0]);
    auto r = csv::parse_int(rec.fields[1]);
    auto t = csv::parse_int(rec.fields[2]);
    if (!h || !r || !t || *h <= 0 || *r <= 0 || *t <= 0) {
      detail::malformed(mode, report, path, rec.line, "identifiers must be positive integers");
      continue;
    }
    if (!filter.contains(*r)) continue;
    store.add({*h, *r, *t});
    ++report.kept;
  }
  return store;
}

struct ItemRecord {
  ItemId item_id = 0;
  std::string label;
  std::string description;
};

class ItemIndex {
 public:
  // Returns false (and counts a duplicate) if the id is already present.
  bool insert(ItemRecord record) {
    if (items_.contains(record.item_id)) {
      ++report.duplicates;
      report.warn("duplicate item id " + std::to_string(record.item_id));
      return false;
    }
    by_label_[record.label].push_back(record.item_id);
    ItemId id = record.item_id;
    items_.emplace(id, std::move(record));
    return true;
  }

  const ItemRecord* find(ItemId id) const {
    auto it = items_.find(id);
    return it == items_.end() ? nullptr : &it->second;
  }

  // Exact (case-sensitive) label lookup.
  std::span<const ItemId> with_label(const std::string& label) const {
    auto it = by_label_.find(label);
    if (it == by_label_.end()) return {};
    return it->second;
  }

  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }

  LoadReport report;

 private:
  std::unordered_map<ItemId, ItemRecord> items_;
  std::unordered_map<std::string, std::vector<ItemId>> by_label_;
};

inline ItemIndex load_items(const std::string& path, ParseMode mode = ParseMode::kStrict) {
  auto in = detail::open(path);
  csv::Reader reader(in);
  csv::Record rec;
  ItemIndex index;
  LoadReport& report = index.report;
  bool first = true;
  while (reader.next(rec)) {
    if (first) {
      first = false;
      if (csv::looks_like_header(rec)) {
        report.had_header = true;
        continue;
      }
    }
    if (detail::blank(rec)) continue;
    ++report.rows;
    if (reader.unterminated()) {
      detail::malformed(mode, report, path, rec.line, "unterminated quoted field");
      continue;
    }
    if (rec.fields.size() < 2 || rec.fields.size() > 3) {
      detail::malformed(mode, report, path, rec.line,
                        "expected 3 columns, got " + std::to_string(rec.fields.size()));
      continue;
    }
    auto id = csv::parse_int(rec.fields[0]);
    if (!id || *id <= 0) {
      detail::malformed(mode, report, path, rec.line, "item id must be a positive integer");
      continue;
    }
    std::string label = detail::trim(rec.fields[1]);
    if (label.empty()) {
      ++report.empty_labels;
      continue;
    }
    std::string description = rec.fields.size() == 3 ? rec.fields[2] : std::string();
    if (index.insert({*id, std::move(label), std::move(description)})) ++report.kept;
  }
  return index;
}

struct PageRecord {
  PageId page_id = 0;
  ItemId item_id = 0;
  std::string title;
  std::int64_t views = 0;
};

class PageIndex {
 public:
  bool insert(PageRecord record) {
    if (pages_.contains(record.page_id)) {
      ++report.duplicates;
      report.warn("duplicate page id " + std::to_string(record.page_id));
      return false;
    }
    if (by_item_.contains(record.item_id)) {
      ++report.duplicates;
      report.warn("item " + std::to_string(record.item_id) + " already has a page");
      return false;
    }
    by_item_.emplace(record.item_id, record.page_id);
    PageId id = record.page_id;
    pages_.emplace(id, std::move(record));
    return true;
  }

  const PageRecord* find(PageId id) const {
    auto it = pages_.find(id);
    return it == pages_.end() ? nullptr : &it->second;
  }

  // Page of an item, or nullptr when the item has no page.
  const PageRecord* by_item(ItemId item) const {
    auto it = by_item_.find(item);
    return it == by_item_.end() ? nullptr : find(it->second);
  }

  std::size_t size() const { return pages_.size(); }

  LoadReport report;

 private:
  std::unordered_map<PageId, PageRecord> pages_;
  std::unordered_map<ItemId, PageId> by_item_;
};

inline PageIndex load_pages(const std::string& path, ParseMode mode = ParseMode::kStrict) {
  auto in = detail::open(path);
  csv::Reader reader(in);
  csv::Record rec;
  PageIndex index;
  LoadReport& report = index.report;
  bool first = true;
  while (reader.next(rec)) {
    if (first) {
      first = false;
      if (csv::looks_like_header(rec)) {
        report.had_header = true;
        continue;
      }
    }
    if (detail::blank(rec)) continue;
    ++report.rows;
    if (reader.unterminated() || rec.fields.size() != 4) {
      detail::malformed(mode, report, path, rec.line, "expected 4 columns");
      continue;
    }
    auto page = csv::parse_int(rec.fields[0]);
    auto item = csv::parse_int(rec.fields[1]);
    auto views = csv::parse_int(rec.fields[3]);
    if (!page || !item || *page <= 0 || *item <= 0 || !views || *views < 0) {
      detail::malformed(mode, report, path, rec.line, "bad numeric column");
      continue;
    }
    if (index.insert({*page, *item, rec.fields[2], *views})) ++report.kept;
  }
  return index;
}

inline ItemId resolve_topic(const ItemIndex& index, const std::string& label) {
  if (detail::trim(label).empty()) throw InvalidArgument("topic label is empty");
  auto ids = index.with_label(label);
  if (ids.empty()) throw TopicNotFound(label);
  if (ids.size() > 1) {
    std::vector<ItemId> sorted(ids.begin(), ids.end());
    std::sort(sorted.begin(), sorted.end());
    throw AmbiguousTopic(label, std::move(sorted));
  }
  return ids.front();
}

struct SubGraph {
  ItemId topic_item = 0;
  std::map<PropertyId, std::set<ItemId>> heads_by_relation;

  std::size_t total_heads() const {
    std::size_t n = 0;
    for (const auto& [r, heads] : heads_by_relation) n += heads.size();
    return n;
  }
  friend bool operator==(const SubGraph&, const SubGraph&) = default;
};

// Depth-1 neighbourhood: heads h with (h, r, topic) for each requested r.
// Every requested relation gets a key, possibly with an empty set.
template <typename Range>
SubGraph extract_subgraph(const TripleStore& store, ItemId topic, const Range& relations) {
  SubGraph g;
  g.topic_item = topic;
  for (PropertyId r : relations) {
    auto& heads = g.heads_by_relation[r];
    for (ItemId h : store.heads(topic, r)) heads.insert(h);
  }
  return g;
}

inline SubGraph extract_subgraph(const TripleStore& store, ItemId topic,
                                 std::initializer_list<PropertyId> relations) {
  return extract_subgraph(store, topic, std::vector<PropertyId>(relations));
}

inline void to_json(nlohmann::json& j, const SubGraph& g) {
  nlohmann::json heads = nlohmann::json::object();
  for (const auto& [r, ids] : g.heads_by_relation)
    heads[std::to_string(r)] = std::vector<ItemId>(ids.begin(), ids.end());
  j = {{"topic_item", g.topic_item}, {"heads", heads}};
}

inline void from_json(const nlohmann::json& j, SubGraph& g) {
  g.topic_item = j.at("topic_item").get<ItemId>();
  g.heads_by_relation.clear();
  for (const auto& [key, ids] : j.at("heads").items()) {
    auto& set = g.heads_by_relation[parse_property(key)];
    for (const auto& id : ids) set.insert(id.get<ItemId>());
  }
}

}  // namespace rapidner::kg
