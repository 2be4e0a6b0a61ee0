#pragma once

// Tokenization, span <-> BIO conversion, reproducible dataset splits, CoNLL
// export and corpus statistics.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rapidner/annotation.hpp"
#include "rapidner/error.hpp"
#include "rapidner/gazetteer.hpp"
#include "rapidner/unicode.hpp"

namespace rapidner::dataset {

struct Token {
  std::string text;
  std::size_t start = 0;
  std::size_t end = 0;

  friend bool operator==(const Token&, const Token&) = default;
};

// Runs of word characters (letters, digits, inner apostrophes/hyphens) are
// tokens; every other non-space character is a token of its own. Hence every
// position where the matcher may start or end a span is a token boundary.
inline std::vector<Token> tokenize(std::u32string_view text) {
  const auto mask = unicode::word_mask(text);
  std::vector<Token> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    if (unicode::is_space(text[i])) {
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    if (mask[i])
      while (j < text.size() && mask[j]) ++j;
    tokens.push_back({slice(text, i, j), i, j});
    i = j;
  }
  return tokens;
}

inline std::vector<Token> tokenize(const Sentence& s) { return tokenize(unicode::decode(s.text)); }

struct BioTag {
  enum class Kind { kO, kB, kI };
  Kind kind = Kind::kO;
  std::string type;

  static BioTag outside() { return {}; }
  static BioTag begin(std::string t) { return {Kind::kB, std::move(t)}; }
  static BioTag inside(std::string t) { return {Kind::kI, std::move(t)}; }

  std::string str() const {
    switch (kind) {
      case Kind::kO: return "O";
      case Kind::kB: return "B-" + type;
      case Kind::kI: return "I-" + type;
    }
    return "O";
  }

  static BioTag parse(std::string_view s) {
    if (s == "O") return outside();
    if (s.size() > 2 && s[1] == '-' && (s[0] == 'B' || s[0] == 'I')) {
      std::string type(s.substr(2));
      if (!valid_type_name(type)) throw MalformedBIO("bad entity type in tag " + std::string(s));
      return {s[0] == 'B' ? Kind::kB : Kind::kI, std::move(type)};
    }
    throw MalformedBIO("not a BIO tag: " + std::string(s));
  }

  friend bool operator==(const BioTag&, const BioTag&) = default;
};

struct TaggedSentence {
  std::string sent_id;
  std::string text;
  std::vector<Token> tokens;
  std::vector<BioTag> tags;
  SourceKind source = SourceKind::kOther;

  friend bool operator==(const TaggedSentence&, const TaggedSentence&) = default;
};

// Index of the token starting (or ending) exactly at `offset`, if any.
inline std::optional<std::size_t> token_starting_at(const std::vector<Token>& tokens, std::size_t offset) {
  auto it = std::lower_bound(tokens.begin(), tokens.end(), offset,
                             [](const Token& t, std::size_t o) { return t.start < o; });
  if (it == tokens.end() || it->start != offset) return std::nullopt;
  return static_cast<std::size_t>(it - tokens.begin());
}

inline std::optional<std::size_t> token_ending_at(const std::vector<Token>& tokens, std::size_t offset) {
  auto it = std::lower_bound(tokens.begin(), tokens.end(), offset,
                             [](const Token& t, std::size_t o) { return t.end < o; });
  if (it == tokens.end() || it->end != offset) return std::nullopt;
  return static_cast<std::size_t>(it - tokens.begin());
}

// True iff the span starts at a token start and ends at a token end.
inline bool aligned(const std::vector<Token>& tokens, std::size_t start, std::size_t end) {
  return token_starting_at(tokens, start).has_value() && token_ending_at(tokens, end).has_value();
}

inline TaggedSentence spans_to_bio(const AnnotatedSentence& a) {
  TaggedSentence t;
  t.sent_id = a.sentence.sent_id;
  t.text = a.sentence.text;
  t.source = a.sentence.source;
  t.tokens = tokenize(a.sentence);
  t.tags.assign(t.tokens.size(), BioTag::outside());
  for (const auto& span : a.spans) {
    auto first = token_starting_at(t.tokens, span.start);
    auto last = token_ending_at(t.tokens, span.end);
    if (!first || !last || *last < *first) throw SpanTokenMisalignment(t.sent_id, span.start, span.end);
    for (std::size_t i = *first; i <= *last; ++i) {
      if (t.tags[i].kind != BioTag::Kind::kO)
        throw OverlapViolation(t.sent_id + ": overlapping spans at token " + std::to_string(i));
      t.tags[i] = i == *first ? BioTag::begin(span.type) : BioTag::inside(span.type);
    }
  }
  return t;
}

// Maximal B/I runs back to spans. Provenance does not survive BIO, so every
// span comes back as AUTO. In lenient mode a stray I-X opens a new span and
// is counted in `repaired`.
inline std::vector<Span> bio_to_spans(const TaggedSentence& t, bool lenient = false,
                                      std::size_t* repaired = nullptr) {
  if (t.tags.size() != t.tokens.size())
    throw MalformedBIO(t.sent_id + ": " + std::to_string(t.tags.size()) + " tags for " +
                       std::to_string(t.tokens.size()) + " tokens");
  const std::u32string text = unicode::decode(t.text);
  std::vector<Span> spans;
  std::optional<std::size_t> open;
  auto close = [&](std::size_t last) {
    Span s;
    s.start = t.tokens[*open].start;
    s.end = t.tokens[last].end;
    s.type = t.tags[*open].type;
    s.surface = slice(text, s.start, s.end);
    spans.push_back(std::move(s));
    open.reset();
  };
  for (std::size_t i = 0; i < t.tags.size(); ++i) {
    const BioTag& tag = t.tags[i];
    if (tag.kind == BioTag::Kind::kI && open && t.tags[*open].type == tag.type) continue;
    if (open) close(i - 1);
    if (tag.kind == BioTag::Kind::kI) {
      if (!lenient)
        throw MalformedBIO(t.sent_id + ": " + tag.str() + " at token " + std::to_string(i) +
                           " does not continue a span of the same type");
      if (repaired) ++*repaired;
    }
    if (tag.kind != BioTag::Kind::kO) open = i;
  }
  if (open) close(t.tags.size() - 1);
  return spans;
}

inline bool well_formed(const TaggedSentence& t) {
  if (t.tags.size() != t.tokens.size()) return false;
  for (std::size_t i = 0; i < t.tags.size(); ++i) {
    if (t.tags[i].kind != BioTag::Kind::kI) continue;
    if (i == 0 || t.tags[i - 1].kind == BioTag::Kind::kO || t.tags[i - 1].type != t.tags[i].type) return false;
  }
  return true;
}

struct Ratios {
  double train = 0.8;
  double dev = 0.1;
  double test = 0.1;
};

inline void validate(const Ratios& r) {
  if (r.train < 0 || r.dev < 0 || r.test < 0) throw BadRatios("ratios must be non-negative");
  if (std::abs(r.train + r.dev + r.test - 1.0) > 1e-9)
    throw BadRatios("ratios must sum to 1, got " + std::to_string(r.train + r.dev + r.test));
}

inline Ratios parse_ratios(std::string_view text) {
  std::vector<double> values;
  std::string s(text);
  std::stringstream ss(s);
  std::string piece;
  while (std::getline(ss, piece, ',')) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(piece, &used));
      if (used != piece.size()) throw std::invalid_argument(piece);
    } catch (const std::exception&) {
      throw BadRatios("not a number: " + piece);
    }
  }
  if (values.size() != 3) throw BadRatios("expected three ratios (train,dev,test)");
  Ratios r{values[0], values[1], values[2]};
  validate(r);
  return r;
}

// Deterministic keyed hash of (seed, sent_id) mapped to [0, 1). FNV-1a over
// the id bytes, seeded and finalized with the splitmix64 mixer.
inline double split_key(std::uint64_t seed, std::string_view sent_id) {
  auto mix = [](std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  };
  std::uint64_t h = 0xCBF29CE484222325ULL ^ mix(seed);
  for (unsigned char c : sent_id) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return static_cast<double>(mix(h) >> 11) * 0x1.0p-53;
}

enum class Stratify { kNone, kSource };

struct DatasetSplit {
  std::vector<TaggedSentence> train, dev, test;
  std::uint64_t seed = 0;
  Ratios ratios;
  Stratify stratify = Stratify::kNone;
};

enum class Bucket { kTrain, kDev, kTest };

inline Bucket bucket_of(double key, const Ratios& r) {
  if (key < r.train) return Bucket::kTrain;
  if (key < r.train + r.dev) return Bucket::kDev;
  return Bucket::kTest;
}

// Global mode buckets each sentence independently by its key, so adding or
// removing one id never moves another. Stratified mode ranks each source's
// sentences by key and cuts at the ratio boundaries, giving exact per-source
// proportions (within one sentence).
inline DatasetSplit split_dataset(const std::vector<TaggedSentence>& sentences, const Ratios& ratios,
                                  std::uint64_t seed, Stratify stratify = Stratify::kNone) {
  validate(ratios);
  DatasetSplit out;
  out.seed = seed;
  out.ratios = ratios;
  out.stratify = stratify;
  std::vector<Bucket> bucket(sentences.size());
  if (stratify == Stratify::kNone) {
    for (std::size_t i = 0; i < sentences.size(); ++i)
      bucket[i] = bucket_of(split_key(seed, sentences[i].sent_id), ratios);
  } else {
    std::map<SourceKind, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < sentences.size(); ++i) groups[sentences[i].source].push_back(i);
    for (auto& [source, idx] : groups) {
      std::vector<std::pair<double, std::size_t>> keyed;
      for (std::size_t i : idx) keyed.emplace_back(split_key(seed, sentences[i].sent_id), i);
      std::sort(keyed.begin(), keyed.end(), [&](const auto& a, const auto& b) {
        return a.first < b.first || (a.first == b.first && sentences[a.second].sent_id < sentences[b.second].sent_id);
      });
      const double n = static_cast<double>(keyed.size());
      const auto n_train = static_cast<std::size_t>(std::llround(ratios.train * n));
      const auto n_dev = std::min(keyed.size() - std::min(keyed.size(), n_train),
                                  static_cast<std::size_t>(std::llround(ratios.dev * n)));
      for (std::size_t k = 0; k < keyed.size(); ++k)
        bucket[keyed[k].second] = k < n_train ? Bucket::kTrain : k < n_train + n_dev ? Bucket::kDev : Bucket::kTest;
    }
  }
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    switch (bucket[i]) {
      case Bucket::kTrain: out.train.push_back(sentences[i]); break;
      case Bucket::kDev: out.dev.push_back(sentences[i]); break;
      case Bucket::kTest: out.test.push_back(sentences[i]); break;
    }
  }
  return out;
}

// token<TAB>tag per line, a blank line after each sentence, LF endings.
inline void write_conll(std::ostream& out, const std::vector<TaggedSentence>& sentences) {
  for (const auto& s : sentences) {
    for (std::size_t i = 0; i < s.tokens.size(); ++i) out << s.tokens[i].text << '\t' << s.tags[i].str() << '\n';
    out << '\n';
  }
}

struct ConllSentence {
  std::vector<std::string> tokens;
  std::vector<BioTag> tags;
  friend bool operator==(const ConllSentence&, const ConllSentence&) = default;
};

// Parses CoNLL text; tags must use types from `vocabulary` (empty = any).
inline std::vector<ConllSentence> read_conll(std::istream& in, const std::set<std::string>& vocabulary = {}) {
  std::vector<ConllSentence> out;
  ConllSentence current;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      if (!current.tokens.empty()) out.push_back(std::move(current));
      current = {};
      continue;
    }
    auto tab = line.rfind('\t');
    if (tab == std::string::npos || tab == 0)
      throw MalformedBIO("line " + std::to_string(line_no) + ": expected token<TAB>tag");
    BioTag tag = BioTag::parse(std::string_view(line).substr(tab + 1));
    if (!vocabulary.empty() && tag.kind != BioTag::Kind::kO && !vocabulary.contains(tag.type))
      throw MalformedBIO("line " + std::to_string(line_no) + ": unknown entity type " + tag.type);
    current.tokens.push_back(line.substr(0, tab));
    current.tags.push_back(std::move(tag));
  }
  if (!current.tokens.empty()) out.push_back(std::move(current));
  return out;
}

inline std::string_view to_string(Stratify s) { return s == Stratify::kSource ? "source" : "none"; }

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << content;
  if (!out) throw IoError("write failed: " + path.string());
}

// Writes train.conll, dev.conll, test.conll and the meta.json sidecar.
inline void export_conll(const DatasetSplit& split, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  const std::pair<const char*, const std::vector<TaggedSentence>*> parts[] = {
      {"train", &split.train}, {"dev", &split.dev}, {"test", &split.test}};
  nlohmann::json counts = nlohmann::json::object();
  for (const auto& [name, sentences] : parts) {
    std::ostringstream body;
    write_conll(body, *sentences);
    write_file(dir / (std::string(name) + ".conll"), body.str());
    std::size_t tokens = 0;
    for (const auto& s : *sentences) tokens += s.tokens.size();
    counts[name] = {{"sentences", sentences->size()}, {"tokens", tokens}};
  }
  nlohmann::json meta = {{"seed", split.seed},
                         {"ratios", {split.ratios.train, split.ratios.dev, split.ratios.test}},
                         {"stratify_by", to_string(split.stratify)},
                         {"counts", counts}};
  write_file(dir / "meta.json", meta.dump(2) + "\n");
}

struct StatsCell {
  std::size_t entity_tokens = 0;
  std::size_t entities = 0;
  std::size_t sentences = 0;

  StatsCell& operator+=(const StatsCell& o) {
    entity_tokens += o.entity_tokens;
    entities += o.entities;
    sentences += o.sentences;
    return *this;
  }
  friend bool operator==(const StatsCell&, const StatsCell&) = default;
};

struct StatsReport {
  std::map<std::pair<std::string, SourceKind>, StatsCell> cells;
  std::map<std::string, StatsCell> by_type;
  std::map<SourceKind, StatsCell> by_source;
  StatsCell total;
  std::size_t sentence_count = 0;  // all input sentences, with or without entities
};

inline StatsReport compute_stats(const std::vector<TaggedSentence>& sentences) {
  StatsReport r;
  r.sentence_count = sentences.size();
  for (const auto& s : sentences) {
    std::set<std::string> types_here;
    for (const auto& tag : s.tags) {
      if (tag.kind == BioTag::Kind::kO) continue;
      StatsCell delta;
      delta.entity_tokens = 1;
      if (tag.kind == BioTag::Kind::kB) {
        delta.entities = 1;
        types_here.insert(tag.type);
      }
      r.cells[{tag.type, s.source}] += delta;
    }
    for (const auto& type : types_here) r.cells[{type, s.source}].sentences += 1;
  }
  for (const auto& [key, cell] : r.cells) {
    r.by_type[key.first] += cell;
    r.by_source[key.second] += cell;
    r.total += cell;
  }
  return r;
}

inline nlohmann::json to_json(const StatsReport& r) {
  auto cell = [](const StatsCell& c) {
    return nlohmann::json{{"entity_tokens", c.entity_tokens}, {"entities", c.entities}, {"sentences", c.sentences}};
  };
  nlohmann::json types = nlohmann::json::object();
  for (const auto& [key, c] : r.cells) types[key.first][std::string(to_string(key.second))] = cell(c);
  for (const auto& [type, c] : r.by_type) types[type]["total"] = cell(c);
  nlohmann::json sources = nlohmann::json::object();
  for (const auto& [source, c] : r.by_source) sources[std::string(to_string(source))] = cell(c);
  return {{"types", types}, {"sources", sources}, {"total", cell(r.total)}, {"input_sentences", r.sentence_count}};
}

// Fixed-width table: one row per entity type, tokens/entities/sentences per
// source plus a total column.
inline std::string to_table(const StatsReport& r) {
  std::vector<SourceKind> sources;
  for (const auto& [s, c] : r.by_source) sources.push_back(s);
  std::ostringstream out;
  auto triple = [](const StatsCell& c) {
    return std::to_string(c.entity_tokens) + "/" + std::to_string(c.entities) + "/" + std::to_string(c.sentences);
  };
  out << std::left << std::setw(14) << "TYPE";
  for (auto s : sources) out << std::setw(22) << std::string(to_string(s));
  out << "total\n";
  out << std::setw(14) << "";
  for (std::size_t i = 0; i < sources.size(); ++i) out << std::setw(22) << "tok/ent/sent";
  out << "tok/ent/sent\n";
  for (const auto& [type, total] : r.by_type) {
    out << std::setw(14) << type;
    for (auto s : sources) {
      auto it = r.cells.find({type, s});
      out << std::setw(22) << triple(it == r.cells.end() ? StatsCell{} : it->second);
    }
    out << triple(total) << "\n";
  }
  out << std::setw(14) << "TOTAL";
  for (auto s : sources) out << std::setw(22) << triple(r.by_source.at(s));
  out << triple(r.total) << "\n";
  return out.str();
}

}  // namespace rapidner::dataset
