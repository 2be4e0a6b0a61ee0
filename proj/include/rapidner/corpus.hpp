#pragma once

// Corpus ingestion: text cleaning, Wikipedia lead-section selection,
// rule-based sentence splitting and per-page / per-(type, source) caps.

#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "rapidner/error.hpp"
#include "rapidner/kgstore.hpp"
#include "rapidner/parallel.hpp"
#include "rapidner/unicode.hpp"

namespace rapidner {

enum class SourceKind { kWikipedia, kReddit, kStackExchange, kOther };

inline std::string_view to_string(SourceKind s) {
  switch (s) {
    case SourceKind::kWikipedia: return "wikipedia";
    case SourceKind::kReddit: return "reddit";
    case SourceKind::kStackExchange: return "stackexchange";
    case SourceKind::kOther: return "other";
  }
  return "other";
}

inline SourceKind parse_source(std::string_view s) {
  std::string lower(s);
  for (char& c : lower)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c + 32);
  if (lower == "wikipedia") return SourceKind::kWikipedia;
  if (lower == "reddit") return SourceKind::kReddit;
  if (lower == "stackexchange") return SourceKind::kStackExchange;
  if (lower == "other") return SourceKind::kOther;
  throw InvalidArgument("unknown source kind: " + std::string(s));
}

struct Section {
  std::optional<std::string> heading;
  std::string body;
};

struct RawDocument {
  std::string doc_id;
  SourceKind source = SourceKind::kOther;
  std::optional<std::string> entity_type_hint;
  std::optional<kg::PageId> page_id;
  std::vector<Section> sections;
};

struct Sentence {
  std::string sent_id;  // "<doc_id>#<ordinal>"
  std::string text;
  SourceKind source = SourceKind::kOther;
  std::optional<std::string> entity_type_hint;
  std::string doc_id;

  friend bool operator==(const Sentence&, const Sentence&) = default;
};

inline void to_json(nlohmann::json& j, const Sentence& s) {
  j = {{"sent_id", s.sent_id},
       {"text", s.text},
       {"source", to_string(s.source)},
       {"entity_type_hint", s.entity_type_hint ? nlohmann::json(*s.entity_type_hint) : nlohmann::json()},
       {"doc_id", s.doc_id}};
}

inline void from_json(const nlohmann::json& j, Sentence& s) {
  s.sent_id = j.at("sent_id").get<std::string>();
  s.text = j.at("text").get<std::string>();
  s.source = parse_source(j.value("source", std::string("other")));
  s.entity_type_hint.reset();
  if (j.contains("entity_type_hint") && !j.at("entity_type_hint").is_null())
    s.entity_type_hint = j.at("entity_type_hint").get<std::string>();
  s.doc_id = j.value("doc_id", std::string());
}

inline void from_json(const nlohmann::json& j, RawDocument& d) {
  d.doc_id = j.at("doc_id").get<std::string>();
  // A corpus entry in the project file may supply the source instead.
  d.source = j.contains("source") && !j.at("source").is_null() ? parse_source(j.at("source").get<std::string>())
                                                               : SourceKind::kOther;
  d.entity_type_hint.reset();
  if (j.contains("entity_type_hint") && !j.at("entity_type_hint").is_null())
    d.entity_type_hint = j.at("entity_type_hint").get<std::string>();
  d.page_id.reset();
  if (j.contains("page_id") && !j.at("page_id").is_null()) d.page_id = j.at("page_id").get<kg::PageId>();
  d.sections.clear();
  for (const auto& s : j.at("sections")) {
    Section sec;
    if (s.contains("heading") && !s.at("heading").is_null()) sec.heading = s.at("heading").get<std::string>();
    sec.body = s.at("body").get<std::string>();
    d.sections.push_back(std::move(sec));
  }
  if (d.sections.empty()) throw SchemaError("document " + d.doc_id + " has no sections");
}

namespace corpus {

namespace detail {

inline bool ascii_letter(char32_t c) { return (c >= U'a' && c <= U'z') || (c >= U'A' && c <= U'Z'); }

inline bool starts_with_ci(std::u32string_view s, std::size_t pos, std::u32string_view prefix) {
  if (pos + prefix.size() > s.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    char32_t c = s[pos + i];
    if (c >= U'A' && c <= U'Z') c += 32;
    if (c != prefix[i]) return false;
  }
  return true;
}

// `<tag ...>`, `</tag>`, `<!-- ... -->`: a '<' followed by a letter, '/' or
// '!' and closed by '>' with no '<' in between.
inline std::u32string strip_tags(std::u32string_view s) {
  std::u32string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == U'<' && i + 1 < s.size() &&
        (ascii_letter(s[i + 1]) || s[i + 1] == U'/' || s[i + 1] == U'!')) {
      std::size_t j = i + 1;
      while (j < s.size() && s[j] != U'>' && s[j] != U'<') ++j;
      if (j < s.size() && s[j] == U'>') {
        i = j;
        continue;
      }
    }
    out.push_back(s[i]);
  }
  return out;
}

inline std::u32string strip_urls(std::u32string_view s) {
  std::u32string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size();) {
    if (starts_with_ci(s, i, U"http://") || starts_with_ci(s, i, U"https://") ||
        starts_with_ci(s, i, U"www.")) {
      while (i < s.size() && !unicode::is_space(s[i])) ++i;
      continue;
    }
    out.push_back(s[i++]);
  }
  return out;
}

inline bool emoji_component(char32_t c) {
  return c == 0xFE0E || c == 0xFE0F || c == 0x200D || c == 0x20E3 ||
         (c >= 0x1F3FB && c <= 0x1F3FF) || (c >= 0xE0020 && c <= 0xE007F);
}

inline bool regional_indicator(char32_t c) { return c >= 0x1F1E6 && c <= 0x1F1FF; }

// Drops Extended_Pictographic code points, regional-indicator flags, and the
// joiners/selectors/modifiers attached to them. Variation selectors 15/16 and
// keycap marks are emoji-only and always dropped.
inline std::u32string strip_emoji(std::u32string_view s) {
  std::u32string out;
  out.reserve(s.size());
  bool after_emoji = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    char32_t c = s[i];
    if (unicode::is_pictographic(c) || regional_indicator(c)) {
      after_emoji = true;
      continue;
    }
    if (c == 0xFE0E || c == 0xFE0F || c == 0x20E3) continue;
    if (emoji_component(c)) {
      bool next_is_emoji = i + 1 < s.size() && (unicode::is_pictographic(s[i + 1]) || regional_indicator(s[i + 1]));
      if (after_emoji || next_is_emoji) continue;
    }
    after_emoji = false;
    out.push_back(c);
  }
  return out;
}

inline std::u32string strip_controls(std::u32string_view s) {
  std::u32string out;
  out.reserve(s.size());
  for (char32_t c : s) {
    if (c == U'\n') {
      out.push_back(c);
    } else if (unicode::is_control(c)) {
      if (unicode::is_space(c)) out.push_back(U' ');
    } else {
      out.push_back(c);
    }
  }
  return out;
}

inline bool decoration(char32_t c) { return c == U'*' || c == U'~' || c == U'^'; }

// Removes decoration characters and collapses runs of one repeated
// punctuation character ("!!!" -> "!").
inline std::u32string tidy_punctuation(std::u32string_view s) {
  std::u32string out;
  out.reserve(s.size());
  for (char32_t c : s) {
    if (decoration(c)) continue;
    if (!out.empty() && out.back() == c && unicode::is_punct(c)) continue;
    out.push_back(c);
  }
  return out;
}

inline std::u32string collapse_whitespace(std::u32string_view s) {
  std::u32string out;
  out.reserve(s.size());
  bool pending = false;
  for (char32_t c : s) {
    if (unicode::is_space(c)) {
      pending = !out.empty();
      continue;
    }
    if (pending) out.push_back(U' ');
    pending = false;
    out.push_back(c);
  }
  return out;
}

inline std::u32string clean_pass(std::u32string_view s) {
  std::u32string t = strip_tags(s);
  t = strip_urls(t);
  t = strip_emoji(t);
  t = strip_controls(t);
  t = tidy_punctuation(t);
  t = collapse_whitespace(t);
  return unicode::nfc(t);
}

}  // namespace detail

// Removes markup tags, URLs, emoji, control characters and decorative
// punctuation; collapses whitespace; NFC-normalizes. The passes are repeated
// until the text stops changing, which makes the function idempotent even
// when one removal exposes another (e.g. "ww🎉w.x").
inline std::string clean_text(std::string_view raw) {
  std::u32string current = unicode::decode(raw);
  for (;;) {
    std::u32string next = detail::clean_pass(current);
    if (next == current) break;
    current = std::move(next);
  }
  return unicode::encode(current);
}

inline const std::set<std::string>& default_abbreviations() {
  static const std::set<std::string> list = {
      "mr.",    "mrs.",  "ms.",   "dr.",   "prof.", "sr.",   "jr.",   "st.",   "mt.",
      "ft.",    "gen.",  "gov.",  "sen.",  "rep.",  "rev.",  "capt.", "col.",  "lt.",
      "sgt.",   "cpl.",  "inc.",  "ltd.",  "co.",   "corp.", "bros.", "vs.",   "no.",
      "nos.",   "vol.",  "fig.",  "approx.", "ca.", "cf.",   "al.",   "jan.",  "feb.",
      "mar.",   "apr.",  "jun.",  "jul.",  "aug.",  "sep.",  "sept.", "oct.",  "nov.",
      "dec.",   "dept.", "est.",  "ave.",  "blvd.", "rd.",   "univ.", "assn.", "op.",
  };
  return list;
}

// One abbreviation per line ("Mr."), '#' comments allowed; case-insensitive.
inline std::set<std::string> load_abbreviations(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileNotReadable(path);
  std::set<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    std::size_t start = line.find_first_not_of(" \t");
    if (start == std::string::npos || line[start] == '#') continue;
    std::string word = line.substr(start);
    for (char& c : word)
      if (c >= 'A' && c <= 'Z') c = static_cast<char>(c + 32);
    out.insert(word);
  }
  return out;
}

namespace detail {

inline bool terminator(char32_t c) { return c == U'.' || c == U'!' || c == U'?'; }

inline bool closer(char32_t c) {
  return c == U'"' || c == U'\'' || c == U'”' || c == U'’' || c == U')' || c == U']' || c == U'»';
}

inline bool opener(char32_t c) {
  return c == U'"' || c == U'\'' || c == U'“' || c == U'‘' || c == U'(' || c == U'[' || c == U'«';
}

// "U.S.", "e.g.", "J.": single letters separated by periods.
inline bool initialism(std::u32string_view w) {
  if (w.size() < 2 || w.size() % 2 != 0) return false;
  for (std::size_t i = 0; i < w.size(); i += 2)
    if (!unicode::is_alphabetic(w[i]) || w[i + 1] != U'.') return false;
  return true;
}

}  // namespace detail

// Splits after '.', '!' or '?' (plus any closing quotes/brackets) when the
// next non-space character is uppercase, a digit or an opening quote. A
// period ending a listed abbreviation or an initialism does not split.
inline std::vector<std::string> split_sentences(
    std::string_view text, const std::set<std::string>& abbreviations = default_abbreviations()) {
  std::u32string s = detail::collapse_whitespace(unicode::decode(text));
  std::vector<std::string> out;
  std::size_t start = 0;
  const std::size_t n = s.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (!detail::terminator(s[i])) continue;
    std::size_t j = i + 1;
    while (j < n && (detail::terminator(s[j]) || detail::closer(s[j]))) ++j;
    if (j >= n || s[j] != U' ' || j + 1 >= n) continue;
    char32_t next = s[j + 1];
    if (!(unicode::is_upper(next) || unicode::is_digit(next) || detail::opener(next))) continue;
    if (s[i] == U'.' && j == i + 1) {
      std::size_t w = i;
      while (w > start && s[w - 1] != U' ') --w;
      while (w < i && detail::opener(s[w])) ++w;
      std::u32string_view word(s.data() + w, i + 1 - w);
      if (detail::initialism(word)) continue;
      std::string lowered = unicode::encode(unicode::fold(word));
      if (abbreviations.contains(lowered)) continue;
    }
    out.push_back(unicode::encode(std::u32string_view(s.data() + start, j - start)));
    start = j + 1;
    i = j;
  }
  if (start < n) out.push_back(unicode::encode(std::u32string_view(s.data() + start, n - start)));
  return out;
}

inline bool is_intro_heading(const std::optional<std::string>& heading) {
  if (!heading) return true;
  std::string h = unicode::encode(unicode::fold(detail::collapse_whitespace(unicode::decode(*heading))));
  return h.empty() || h == "introduction";
}

inline std::string select_wikipedia_intro(const RawDocument& doc) {
  if (doc.source != SourceKind::kWikipedia)
    throw InvalidArgument("document " + doc.doc_id + " is not a Wikipedia article");
  for (const auto& section : doc.sections)
    if (is_intro_heading(section.heading)) return section.body;
  throw NoIntroSection(doc.doc_id);
}

struct CapConfig {
  std::size_t per_page_max = 10;               // Wikipedia articles only
  std::size_t per_type_per_source_max = 10000;
};

struct IngestReport {
  std::size_t documents = 0;
  std::size_t skipped_no_intro = 0;
  std::size_t skipped_duplicate_id = 0;
  std::size_t dropped_by_page_cap = 0;
  std::size_t dropped_by_type_cap = 0;
  std::size_t sentences = 0;
  std::vector<std::string> warnings;

  void warn(std::string message) {
    if (warnings.size() < 100) warnings.push_back(std::move(message));
  }
};

// Stage 1 of ingestion, pure per document: the sentences a document yields
// before the shared (type, source) cap is applied. Throws NoIntroSection.
inline std::vector<Sentence> document_sentences(const RawDocument& doc, const CapConfig& caps,
                                                const std::set<std::string>& abbreviations,
                                                std::size_t* page_capped = nullptr) {
  std::vector<std::string_view> bodies;
  std::string intro;
  if (doc.source == SourceKind::kWikipedia) {
    intro = select_wikipedia_intro(doc);
    bodies.push_back(intro);
  } else {
    for (const auto& s : doc.sections) bodies.push_back(s.body);
  }
  std::vector<Sentence> out;
  std::size_t ordinal = 0;
  for (std::string_view body : bodies) {
    std::size_t pos = 0;
    while (pos <= body.size()) {
      std::size_t nl = body.find('\n', pos);
      if (nl == std::string_view::npos) nl = body.size();
      std::string paragraph = clean_text(body.substr(pos, nl - pos));
      pos = nl + 1;
      if (paragraph.empty()) continue;
      for (auto& text : split_sentences(paragraph, abbreviations)) {
        Sentence s;
        s.sent_id = doc.doc_id + "#" + std::to_string(ordinal++);
        s.text = std::move(text);
        s.source = doc.source;
        s.entity_type_hint = doc.entity_type_hint;
        s.doc_id = doc.doc_id;
        out.push_back(std::move(s));
      }
    }
  }
  if (doc.source == SourceKind::kWikipedia && out.size() > caps.per_page_max) {
    if (page_capped) *page_capped = out.size() - caps.per_page_max;
    out.resize(caps.per_page_max);
  }
  return out;
}

// Applies the (entity type hint, source) cap over a stream of documents in
// order. The cap counter is the only shared state, so documents can be
// prepared elsewhere and fed here one at a time.
class Ingestor {
 public:
  explicit Ingestor(CapConfig caps, std::set<std::string> abbreviations = default_abbreviations())
      : caps_(caps), abbreviations_(std::move(abbreviations)) {}

  void add(const RawDocument& doc, std::vector<Sentence>& out) {
    struct Prepared prepared = prepare(doc);
    accept(doc, std::move(prepared), out);
  }

  std::vector<Sentence> ingest(const std::vector<RawDocument>& docs, unsigned threads = 1) {
    auto prepared = parallel_map(docs, [this](const RawDocument& d) { return prepare(d); }, threads);
    std::vector<Sentence> out;
    for (std::size_t i = 0; i < docs.size(); ++i) accept(docs[i], std::move(prepared[i]), out);
    return out;
  }

  const IngestReport& report() const { return report_; }

 private:
  struct Prepared {
    std::vector<Sentence> sentences;
    std::size_t page_capped = 0;
    bool no_intro = false;
  };

  Prepared prepare(const RawDocument& doc) const {
    Prepared p;
    try {
      p.sentences = document_sentences(doc, caps_, abbreviations_, &p.page_capped);
    } catch (const NoIntroSection&) {
      p.no_intro = true;
    }
    return p;
  }

  void accept(const RawDocument& doc, Prepared prepared, std::vector<Sentence>& out) {
    ++report_.documents;
    if (!seen_docs_.insert(doc.doc_id).second) {
      ++report_.skipped_duplicate_id;
      report_.warn("duplicate doc_id " + doc.doc_id + " skipped");
      return;
    }
    if (prepared.no_intro) {
      ++report_.skipped_no_intro;
      report_.warn("document " + doc.doc_id + " has no introduction section; skipped");
      return;
    }
    report_.dropped_by_page_cap += prepared.page_capped;
    auto key = std::make_pair(doc.entity_type_hint.value_or(std::string()), doc.source);
    std::size_t& count = per_type_source_[key];
    for (auto& s : prepared.sentences) {
      if (count >= caps_.per_type_per_source_max) {
        ++report_.dropped_by_type_cap;
        continue;
      }
      ++count;
      ++report_.sentences;
      out.push_back(std::move(s));
    }
  }

  CapConfig caps_;
  std::set<std::string> abbreviations_;
  IngestReport report_;
  std::unordered_set<std::string> seen_docs_;
  std::map<std::pair<std::string, SourceKind>, std::size_t> per_type_source_;
};

inline std::vector<Sentence> ingest(const std::vector<RawDocument>& docs, const CapConfig& caps,
                                    IngestReport* report = nullptr, unsigned threads = 1) {
  Ingestor ingestor(caps);
  auto out = ingestor.ingest(docs, threads);
  if (report) *report = ingestor.report();
  return out;
}

}  // namespace corpus
}  // namespace rapidner
