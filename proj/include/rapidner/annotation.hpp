#pragma once

// Entity-mention spans over sentences. Offsets are Unicode scalar indices
// into Sentence::text: `start` inclusive, `end` exclusive.

#include <algorithm>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rapidner/corpus.hpp"
#include "rapidner/error.hpp"
#include "rapidner/kgstore.hpp"
#include "rapidner/unicode.hpp"

namespace rapidner {

enum class Origin { kAuto, kHuman };

inline std::string_view to_string(Origin o) { return o == Origin::kAuto ? "AUTO" : "HUMAN"; }

inline Origin parse_origin(std::string_view s) {
  if (s == "AUTO") return Origin::kAuto;
  if (s == "HUMAN") return Origin::kHuman;
  throw SchemaError("unknown span origin " + std::string(s));
}

struct Span {
  std::size_t start = 0;
  std::size_t end = 0;
  std::string type;
  std::string surface;
  std::optional<kg::ItemId> item_id;
  Origin origin = Origin::kAuto;

  friend bool operator==(const Span&, const Span&) = default;
};

// Identity used by evaluation and review: offsets and type only.
inline bool same_mention(const Span& a, const Span& b) {
  return a.start == b.start && a.end == b.end && a.type == b.type;
}

struct ConflictNote {
  std::size_t start = 0;
  std::size_t end = 0;
  std::vector<std::string> candidate_types;
  std::string chosen;

  friend bool operator==(const ConflictNote&, const ConflictNote&) = default;
};

struct AnnotatedSentence {
  Sentence sentence;
  std::vector<Span> spans;
  std::vector<ConflictNote> conflicts;

  friend bool operator==(const AnnotatedSentence&, const AnnotatedSentence&) = default;
};

inline std::string slice(std::u32string_view text, std::size_t start, std::size_t end) {
  return unicode::encode(text.substr(start, end - start));
}

// Checks range, surface and pairwise non-overlap; sorts by start. Returns an
// empty string when valid, otherwise a description of the first problem.
inline std::string check_spans(std::u32string_view text, std::vector<Span>& spans) {
  std::sort(spans.begin(), spans.end(),
            [](const Span& a, const Span& b) { return a.start < b.start || (a.start == b.start && a.end < b.end); });
  for (std::size_t i = 0; i < spans.size(); ++i) {
    const Span& s = spans[i];
    if (s.start >= s.end || s.end > text.size())
      return "span [" + std::to_string(s.start) + "," + std::to_string(s.end) + ") is out of range";
    if (slice(text, s.start, s.end) != s.surface)
      return "span surface \"" + s.surface + "\" does not match the sentence text";
    if (i > 0 && spans[i - 1].end > s.start)
      return "spans [" + std::to_string(spans[i - 1].start) + "," + std::to_string(spans[i - 1].end) +
             ") and [" + std::to_string(s.start) + "," + std::to_string(s.end) + ") overlap";
  }
  return {};
}

inline void to_json(nlohmann::json& j, const Span& s) {
  j = {{"start", s.start}, {"end", s.end}, {"type", s.type}, {"surface", s.surface},
       {"origin", to_string(s.origin)}};
  if (s.item_id) j["item_id"] = *s.item_id;
}

inline void from_json(const nlohmann::json& j, Span& s) {
  s.start = j.at("start").get<std::size_t>();
  s.end = j.at("end").get<std::size_t>();
  s.type = j.at("type").get<std::string>();
  s.surface = j.value("surface", std::string());
  s.origin = parse_origin(j.value("origin", std::string("AUTO")));
  s.item_id.reset();
  if (j.contains("item_id") && !j.at("item_id").is_null()) s.item_id = j.at("item_id").get<kg::ItemId>();
}

inline void to_json(nlohmann::json& j, const ConflictNote& c) {
  j = {{"start", c.start}, {"end", c.end}, {"candidate_types", c.candidate_types}, {"chosen", c.chosen}};
}

inline void from_json(const nlohmann::json& j, ConflictNote& c) {
  c.start = j.at("start").get<std::size_t>();
  c.end = j.at("end").get<std::size_t>();
  c.candidate_types = j.at("candidate_types").get<std::vector<std::string>>();
  c.chosen = j.at("chosen").get<std::string>();
}

inline void to_json(nlohmann::json& j, const AnnotatedSentence& a) {
  to_json(j, a.sentence);
  j["spans"] = a.spans;
  j["conflicts"] = a.conflicts;
}

// Reads an annotated record; a missing surface is filled from the text, and
// the spans are validated.
inline void from_json(const nlohmann::json& j, AnnotatedSentence& a) {
  from_json(j, a.sentence);
  a.spans = j.value("spans", std::vector<Span>{});
  a.conflicts = j.value("conflicts", std::vector<ConflictNote>{});
  auto text = unicode::decode(a.sentence.text);
  for (auto& s : a.spans)
    if (s.surface.empty() && s.start < s.end && s.end <= text.size()) s.surface = slice(text, s.start, s.end);
  if (auto problem = check_spans(text, a.spans); !problem.empty())
    throw SchemaError(a.sentence.sent_id + ": " + problem);
}

// JSON-lines helpers shared by the CLI and the pipeline.
template <typename T>
std::vector<T> read_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileNotReadable(path);
  std::vector<T> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      out.push_back(nlohmann::json::parse(line).get<T>());
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError(path + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw SchemaError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

template <typename T>
void write_jsonl(std::ostream& out, const std::vector<T>& items) {
  for (const auto& item : items) out << nlohmann::json(item).dump() << '\n';
}

}  // namespace rapidner
