#pragma once

// Per-entity-type dictionaries of surface forms harvested from the knowledge
// graph, with the set algebra used to curate them (union, subtraction,
// augmentation from hand-maintained lists).

#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "rapidner/error.hpp"
#include "rapidner/kgstore.hpp"
#include "rapidner/unicode.hpp"

namespace rapidner {

struct EntityType {
  std::string name;     // e.g. DRINK
  std::string display;  // e.g. "Drink"

  friend bool operator==(const EntityType&, const EntityType&) = default;
};

inline bool valid_type_name(std::string_view name) {
  if (name.empty() || name.front() < 'A' || name.front() > 'Z') return false;
  for (char c : name)
    if (!((c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_')) return false;
  return true;
}

inline EntityType make_entity_type(std::string name, std::string display = {}) {
  if (!valid_type_name(name))
    throw InvalidArgument("entity type name must match [A-Z][A-Z0-9_]*: " + name);
  if (display.empty()) {
    display = name;
    for (std::size_t i = 1; i < display.size(); ++i)
      if (display[i] >= 'A' && display[i] <= 'Z') display[i] = static_cast<char>(display[i] + 32);
  }
  return {std::move(name), std::move(display)};
}

}  // namespace rapidner

namespace rapidner::gazetteer {

enum class Provenance { kKgP31, kKgP279, kAugmentList, kManual };

inline std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::kKgP31: return "KG_P31";
    case Provenance::kKgP279: return "KG_P279";
    case Provenance::kAugmentList: return "AUGMENT_LIST";
    case Provenance::kManual: return "MANUAL";
  }
  return "MANUAL";
}

inline Provenance parse_provenance(std::string_view s) {
  if (s == "KG_P31") return Provenance::kKgP31;
  if (s == "KG_P279") return Provenance::kKgP279;
  if (s == "AUGMENT_LIST") return Provenance::kAugmentList;
  if (s == "MANUAL") return Provenance::kManual;
  throw SchemaError("unknown provenance " + std::string(s));
}

inline bool from_kg(Provenance p) {
  return p == Provenance::kKgP31 || p == Provenance::kKgP279;
}

// Equality key for dictionary entries: NFC, simple case fold, whitespace runs
// collapsed to one space, ends trimmed.
inline std::string normalize_entry(std::string_view surface) {
  std::u32string text = unicode::nfc(unicode::decode(surface));
  std::u32string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char32_t c : text) {
    if (unicode::is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(U' ');
    pending_space = false;
    out.push_back(unicode::fold(c));
  }
  return unicode::encode(unicode::nfc(out));
}

struct DictEntry {
  std::string surface;
  std::string norm_key;
  std::optional<kg::ItemId> item_id;
  Provenance provenance = Provenance::kManual;
};

// Entries outside these limits are rejected as knowledge-graph noise.
struct EntryLimits {
  std::size_t min_chars = 2;
  std::size_t max_tokens = 10;
};

struct BuildReport {
  std::size_t added = 0;
  std::size_t duplicates = 0;
  std::size_t unresolved = 0;
  std::size_t rejected_empty = 0;
  std::size_t rejected_short = 0;
  std::size_t rejected_long = 0;
  std::vector<std::string> warnings;

  void warn(std::string message) {
    if (warnings.size() < 100) warnings.push_back(std::move(message));
  }
};

enum class AddResult { kAdded, kDuplicate, kEmpty, kTooShort, kTooLong };

class Dictionary {
 public:
  Dictionary() = default;
  explicit Dictionary(EntityType type) : type_(std::move(type)) {}

  const EntityType& entity_type() const { return type_; }
  const std::vector<DictEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  bool contains_key(const std::string& norm_key) const { return by_key_.contains(norm_key); }
  const DictEntry* find(std::string_view surface) const {
    auto it = by_key_.find(normalize_entry(surface));
    return it == by_key_.end() ? nullptr : &entries_[it->second];
  }

  AddResult add(std::string_view surface, Provenance provenance,
                std::optional<kg::ItemId> item_id = std::nullopt,
                const EntryLimits& limits = {}) {
    if (from_kg(provenance) != item_id.has_value())
      throw InvalidArgument("item_id must be present exactly for KG provenance");
    std::string key = normalize_entry(surface);
    if (key.empty()) return AddResult::kEmpty;
    auto scalars = unicode::decode(key);
    if (scalars.size() < limits.min_chars) return AddResult::kTooShort;
    std::size_t tokens = 1;
    for (char32_t c : scalars) tokens += (c == U' ');
    if (tokens > limits.max_tokens) return AddResult::kTooLong;
    if (by_key_.contains(key)) return AddResult::kDuplicate;
    by_key_.emplace(key, entries_.size());
    entries_.push_back({std::string(surface), std::move(key), item_id, provenance});
    return AddResult::kAdded;
  }

  // Inserts an entry that already passed validation elsewhere.
  bool insert(const DictEntry& e) {
    if (by_key_.contains(e.norm_key)) return false;
    by_key_.emplace(e.norm_key, entries_.size());
    entries_.push_back(e);
    return true;
  }

  void set_entity_type(EntityType type) { type_ = std::move(type); }

 private:
  EntityType type_;
  std::vector<DictEntry> entries_;
  std::unordered_map<std::string, std::size_t> by_key_;
};

inline void record(BuildReport& report, AddResult result, std::string_view surface) {
  switch (result) {
    case AddResult::kAdded: ++report.added; break;
    case AddResult::kDuplicate: ++report.duplicates; break;
    case AddResult::kEmpty: ++report.rejected_empty; break;
    case AddResult::kTooShort:
      ++report.rejected_short;
      report.warn("rejected single-character entry \"" + std::string(surface) + "\"");
      break;
    case AddResult::kTooLong:
      ++report.rejected_long;
      report.warn("rejected overlong entry \"" + std::string(surface) + "\"");
      break;
  }
}

// One entry per resolvable head. Relations are visited P31 first, then P279,
// so a label reachable through both keeps KG_P31 provenance.
inline Dictionary build_dictionary(const kg::SubGraph& subgraph, const kg::ItemIndex& items,
                                   const EntityType& type, BuildReport* report = nullptr,
                                   const EntryLimits& limits = {}) {
  BuildReport local;
  BuildReport& rep = report ? *report : local;
  for (const auto& [relation, heads] : subgraph.heads_by_relation)
    if (relation != kg::kInstanceOf && relation != kg::kSubclassOf)
      throw InvalidArgument("dictionaries are built from P31/P279 heads only, got P" +
                            std::to_string(relation));
  Dictionary dict(type);
  for (kg::PropertyId relation : {kg::kInstanceOf, kg::kSubclassOf}) {
    auto it = subgraph.heads_by_relation.find(relation);
    if (it == subgraph.heads_by_relation.end()) continue;
    Provenance prov = relation == kg::kInstanceOf ? Provenance::kKgP31 : Provenance::kKgP279;
    for (kg::ItemId head : it->second) {
      const kg::ItemRecord* item = items.find(head);
      if (!item) {
        ++rep.unresolved;
        continue;
      }
      record(rep, dict.add(item->label, prov, head, limits), item->label);
    }
  }
  return dict;
}

// Union on normalization keys; on collision the entry from `a` wins.
inline Dictionary unite(const Dictionary& a, const Dictionary& b, const EntityType& type) {
  Dictionary out(type);
  for (const auto& e : a.entries()) out.insert(e);
  for (const auto& e : b.entries()) out.insert(e);
  return out;
}

inline Dictionary subtract(const Dictionary& a, const Dictionary& b) {
  Dictionary out(a.entity_type());
  for (const auto& e : a.entries())
    if (!b.contains_key(e.norm_key)) out.insert(e);
  return out;
}

// Adds one AUGMENT_LIST entry per non-empty, non-comment line of `path`.
inline Dictionary augment_from_list(const Dictionary& d, const std::string& path,
                                    BuildReport* report = nullptr,
                                    const EntryLimits& limits = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileNotReadable(path);
  BuildReport local;
  BuildReport& rep = report ? *report : local;
  Dictionary out = d;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string_view view = line;
    while (!view.empty() && (view.front() == ' ' || view.front() == '\t')) view.remove_prefix(1);
    if (view.empty() || view.front() == '#') continue;
    record(rep, out.add(view, Provenance::kAugmentList, std::nullopt, limits), view);
  }
  return out;
}

inline nlohmann::json to_json(const Dictionary& d) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : d.entries()) {
    entries.push_back({{"surface", e.surface},
                       {"item_id", e.item_id ? nlohmann::json(*e.item_id) : nlohmann::json()},
                       {"provenance", to_string(e.provenance)}});
  }
  return {{"schema", 1},
          {"entity_type", d.entity_type().name},
          {"display", d.entity_type().display},
          {"entries", entries}};
}

inline Dictionary dictionary_from_json(const nlohmann::json& j, BuildReport* report = nullptr) {
  if (!j.is_object() || j.value("schema", 0) != 1)
    throw SchemaError("dictionary document must have \"schema\": 1");
  BuildReport local;
  BuildReport& rep = report ? *report : local;
  Dictionary d(make_entity_type(j.at("entity_type").get<std::string>(),
                                j.value("display", std::string())));
  for (const auto& e : j.at("entries")) {
    std::optional<kg::ItemId> id;
    if (e.contains("item_id") && !e.at("item_id").is_null()) id = e.at("item_id").get<kg::ItemId>();
    auto surface = e.at("surface").get<std::string>();
    // No length limits on load: the file was already curated when written.
    EntryLimits none{0, static_cast<std::size_t>(-1)};
    record(rep, d.add(surface, parse_provenance(e.at("provenance").get<std::string>()), id, none),
           surface);
  }
  return d;
}

inline Dictionary load_dictionary(const std::string& path, BuildReport* report = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileNotReadable(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(path + ": " + e.what());
  }
  return dictionary_from_json(j, report);
}

}  // namespace rapidner::gazetteer
