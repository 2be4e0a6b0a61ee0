#pragma once

// Dictionary annotator. All dictionaries are compiled into one Aho-Corasick
// automaton over case-folded code points; annotation keeps word-boundary
// aligned matches and resolves them leftmost-longest, so compound entries
// ("Barton Premium Blend") are never split into their parts.

#include <algorithm>
#include <cstdint>
#include <deque>
#include <limits>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "rapidner/annotation.hpp"
#include "rapidner/error.hpp"
#include "rapidner/gazetteer.hpp"
#include "rapidner/parallel.hpp"
#include "rapidner/unicode.hpp"

namespace rapidner::matcher {

struct Options {
  bool case_sensitive = false;
};

struct PatternMeta {
  std::string type;
  std::string surface;  // dictionary surface, for reporting
  std::optional<kg::ItemId> item_id;
  std::size_t priority = 0;  // index of `type` in the priority list
};

class Matcher {
 public:
  // Compiles every entry of every dictionary. Each dictionary's type must
  // appear in `priority`, which also orders exact cross-type ties.
  static Matcher compile(const std::vector<gazetteer::Dictionary>& dicts,
                         const std::vector<std::string>& priority, Options options = {}) {
    if (dicts.empty()) throw EmptyDictionarySet();
    Matcher m;
    m.options_ = options;
    m.priority_ = priority;
    for (const auto& d : dicts) {
      auto it = std::find(priority.begin(), priority.end(), d.entity_type().name);
      if (it == priority.end()) throw UnknownTypeInPriority(d.entity_type().name);
    }
    m.nodes_.emplace_back();
    for (const auto& d : dicts) {
      std::size_t rank = static_cast<std::size_t>(
          std::find(priority.begin(), priority.end(), d.entity_type().name) - priority.begin());
      for (const auto& e : d.entries()) m.add_pattern(e, d.entity_type().name, rank);
    }
    for (auto& metas : m.metas_by_key_) {
      std::stable_sort(metas.begin(), metas.end(), [&](std::size_t a, std::size_t b) {
        return m.metas_[a].priority < m.metas_[b].priority;
      });
    }
    m.link();
    return m;
  }

  std::size_t pattern_count() const { return metas_.size(); }
  std::size_t key_count() const { return metas_by_key_.size(); }
  std::size_t rejected() const { return rejected_; }
  const std::vector<std::string>& priority() const { return priority_; }
  const Options& options() const { return options_; }

  AnnotatedSentence annotate(const Sentence& sentence) const {
    AnnotatedSentence out;
    out.sentence = sentence;
    const std::u32string text = unicode::decode(sentence.text);
    const auto mask = unicode::word_mask(text);
    const std::size_t n = text.size();

    // Longest boundary-valid match starting at each position.
    constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();
    std::vector<std::uint32_t> best_end(n, 0);
    std::vector<std::uint32_t> best_key(n, kNone);

    std::uint32_t state = 0;
    for (std::size_t i = 0; i < n; ++i) {
      char32_t c = options_.case_sensitive ? text[i] : unicode::fold(text[i]);
      state = step(state, c);
      const std::size_t end = i + 1;
      if (!unicode::is_boundary(mask, end)) continue;
      for (std::uint32_t t = nodes_[state].key != kNone ? state : nodes_[state].output; t != 0;
           t = nodes_[t].output) {
        const Node& node = nodes_[t];
        const std::size_t start = end - node.depth;
        if (!unicode::is_boundary(mask, start)) continue;
        if (best_key[start] == kNone || best_end[start] < end) {
          best_end[start] = static_cast<std::uint32_t>(end);
          best_key[start] = node.key;
        }
      }
    }

    std::size_t resume = 0;
    for (std::size_t start = 0; start < n; ++start) {
      if (start < resume || best_key[start] == kNone) continue;
      const std::size_t end = best_end[start];
      const auto& metas = metas_by_key_[best_key[start]];
      const PatternMeta& chosen = metas_[metas.front()];
      Span span;
      span.start = start;
      span.end = end;
      span.type = chosen.type;
      span.surface = slice(text, start, end);
      span.item_id = chosen.item_id;
      span.origin = Origin::kAuto;
      std::vector<std::string> candidates;
      for (std::size_t idx : metas) {
        const auto& t = metas_[idx].type;
        if (std::find(candidates.begin(), candidates.end(), t) == candidates.end()) candidates.push_back(t);
      }
      if (candidates.size() > 1) out.conflicts.push_back({start, end, std::move(candidates), chosen.type});
      out.spans.push_back(std::move(span));
      resume = end;
    }
    return out;
  }

  std::vector<AnnotatedSentence> annotate_all(const std::vector<Sentence>& sentences,
                                              unsigned threads = 1) const {
    return parallel_map(sentences, [this](const Sentence& s) { return annotate(s); }, threads);
  }

 private:
  static constexpr std::uint32_t kNoKey = std::numeric_limits<std::uint32_t>::max();

  struct Node {
    std::uint32_t fail = 0;
    std::uint32_t output = 0;  // nearest terminal node on the failure chain
    std::uint32_t key = kNoKey;
    std::uint32_t depth = 0;
  };

  static std::uint64_t edge(std::uint32_t node, char32_t c) {
    return (static_cast<std::uint64_t>(node) << 21) | static_cast<std::uint64_t>(c);
  }

  std::optional<std::uint32_t> child(std::uint32_t node, char32_t c) const {
    auto it = edges_.find(edge(node, c));
    if (it == edges_.end()) return std::nullopt;
    return it->second;
  }

  std::uint32_t step(std::uint32_t state, char32_t c) const {
    for (;;) {
      if (auto next = child(state, c)) return *next;
      if (state == 0) return 0;
      state = nodes_[state].fail;
    }
  }

  std::u32string pattern_of(const gazetteer::DictEntry& e) const {
    std::u32string text = unicode::nfc(unicode::decode(e.surface));
    std::u32string out;
    bool pending = false;
    for (char32_t c : text) {
      if (unicode::is_space(c)) {
        pending = !out.empty();
        continue;
      }
      if (pending) out.push_back(U' ');
      pending = false;
      out.push_back(options_.case_sensitive ? c : unicode::fold(c));
    }
    return out;
  }

  void add_pattern(const gazetteer::DictEntry& e, const std::string& type, std::size_t rank) {
    std::u32string pattern = pattern_of(e);
    if (pattern.empty()) {
      ++rejected_;
      return;
    }
    std::uint32_t node = 0;
    for (char32_t c : pattern) {
      if (auto next = child(node, c)) {
        node = *next;
        continue;
      }
      auto id = static_cast<std::uint32_t>(nodes_.size());
      Node fresh;
      fresh.depth = nodes_[node].depth + 1;
      nodes_.push_back(fresh);
      edges_.emplace(edge(node, c), id);
      children_.resize(nodes_.size());
      children_[node].push_back({c, id});
      node = id;
    }
    if (nodes_[node].key == kNoKey) {
      nodes_[node].key = static_cast<std::uint32_t>(metas_by_key_.size());
      metas_by_key_.emplace_back();
    }
    auto& metas = metas_by_key_[nodes_[node].key];
    for (std::size_t idx : metas)
      if (metas_[idx].type == type) return;  // same type already owns this key
    metas.push_back(metas_.size());
    metas_.push_back({type, e.surface, e.item_id, rank});
  }

  // Breadth-first failure and output links.
  void link() {
    children_.resize(nodes_.size());
    std::deque<std::uint32_t> queue;
    for (const auto& [c, id] : children_[0]) {
      nodes_[id].fail = 0;
      nodes_[id].output = 0;
      queue.push_back(id);
    }
    while (!queue.empty()) {
      std::uint32_t u = queue.front();
      queue.pop_front();
      for (const auto& [c, v] : children_[u]) {
        std::uint32_t f = nodes_[u].fail;
        std::uint32_t target = 0;
        for (;;) {
          if (auto next = child(f, c); next && *next != v) {
            target = *next;
            break;
          }
          if (f == 0) break;
          f = nodes_[f].fail;
        }
        nodes_[v].fail = target;
        nodes_[v].output = nodes_[target].key != kNoKey ? target : nodes_[target].output;
        queue.push_back(v);
      }
    }
    children_.clear();
    children_.shrink_to_fit();
  }

  Options options_;
  std::vector<std::string> priority_;
  std::vector<Node> nodes_;
  std::unordered_map<std::uint64_t, std::uint32_t> edges_;
  std::vector<std::vector<std::pair<char32_t, std::uint32_t>>> children_;
  std::vector<PatternMeta> metas_;
  std::vector<std::vector<std::size_t>> metas_by_key_;
  std::size_t rejected_ = 0;
};

inline std::string escape_markup(std::u32string_view text) {
  std::string out;
  for (char32_t c : text) {
    if (c == U'<') out += "&lt;";
    else if (c == U'&') out += "&amp;";
    else out += unicode::encode(std::u32string_view(&c, 1));
  }
  return out;
}

// Wraps each span as <em type="TYPE">surface</em>; '<' and '&' are escaped.
inline std::string to_em_markup(const AnnotatedSentence& a) {
  const std::u32string text = unicode::decode(a.sentence.text);
  std::string out;
  std::size_t pos = 0;
  for (const auto& s : a.spans) {
    out += escape_markup(std::u32string_view(text).substr(pos, s.start - pos));
    out += "<em type=\"" + s.type + "\">";
    out += escape_markup(std::u32string_view(text).substr(s.start, s.end - s.start));
    out += "</em>";
    pos = s.end;
  }
  out += escape_markup(std::u32string_view(text).substr(pos));
  return out;
}

// Inverse of to_em_markup over the sentence the markup was produced from.
inline AnnotatedSentence from_em_markup(std::string_view markup, const Sentence& source) {
  const std::u32string m = unicode::decode(markup);
  std::u32string text;
  std::vector<Span> spans;
  std::optional<std::size_t> open_at;
  std::string open_type;
  static const std::u32string kOpen = U"<em type=\"";
  static const std::u32string kClose = U"</em>";
  auto at = [&](std::size_t i, std::u32string_view lit) { return m.compare(i, lit.size(), lit) == 0; };
  for (std::size_t i = 0; i < m.size();) {
    char32_t c = m[i];
    if (c == U'<') {
      if (at(i, kOpen)) {
        if (open_at) throw MalformedMarkup("nested <em> at offset " + std::to_string(i));
        std::size_t q = m.find(U'"', i + kOpen.size());
        if (q == std::u32string::npos || q + 1 >= m.size() || m[q + 1] != U'>')
          throw MalformedMarkup("unterminated <em> tag at offset " + std::to_string(i));
        open_type = unicode::encode(std::u32string_view(m).substr(i + kOpen.size(), q - i - kOpen.size()));
        if (!valid_type_name(open_type)) throw MalformedMarkup("bad entity type \"" + open_type + "\"");
        open_at = text.size();
        i = q + 2;
      } else if (at(i, kClose)) {
        if (!open_at) throw MalformedMarkup("</em> without <em> at offset " + std::to_string(i));
        if (*open_at == text.size()) throw MalformedMarkup("empty <em> element");
        Span s;
        s.start = *open_at;
        s.end = text.size();
        s.type = open_type;
        spans.push_back(std::move(s));
        open_at.reset();
        i += kClose.size();
      } else {
        throw MalformedMarkup("unexpected '<' at offset " + std::to_string(i));
      }
    } else if (c == U'&') {
      if (at(i, U"&lt;")) { text.push_back(U'<'); i += 4; }
      else if (at(i, U"&gt;")) { text.push_back(U'>'); i += 4; }
      else if (at(i, U"&amp;")) { text.push_back(U'&'); i += 5; }
      else if (at(i, U"&quot;")) { text.push_back(U'"'); i += 6; }
      else throw MalformedMarkup("unknown entity at offset " + std::to_string(i));
    } else {
      text.push_back(c);
      ++i;
    }
  }
  if (open_at) throw MalformedMarkup("unclosed <em> element");
  if (unicode::encode(text) != source.text)
    throw MarkupMismatch("markup text differs from sentence " + source.sent_id);
  AnnotatedSentence a;
  a.sentence = source;
  for (auto& s : spans) s.surface = slice(text, s.start, s.end);
  a.spans = std::move(spans);
  return a;
}

}  // namespace rapidner::matcher
