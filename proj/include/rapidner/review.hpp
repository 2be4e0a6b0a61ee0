#pragma once

// Human verification state. Every sentence starts PENDING with its automatic
// spans; annotators accept, skip or correct it. State is persisted as an
// append-only JSON-lines journal that is fsynced before a decision is
// acknowledged, and reopening a store replays the journal.

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "rapidner/annotation.hpp"
#include "rapidner/dataset.hpp"
#include "rapidner/error.hpp"
#include "rapidner/gazetteer.hpp"

namespace rapidner::review {

enum class Status { kPending, kAccepted, kCorrected, kSkipped };

inline std::string_view to_string(Status s) {
  switch (s) {
    case Status::kPending: return "PENDING";
    case Status::kAccepted: return "ACCEPTED";
    case Status::kCorrected: return "CORRECTED";
    case Status::kSkipped: return "SKIPPED";
  }
  return "PENDING";
}

inline Status parse_status(std::string_view s) {
  if (s == "PENDING") return Status::kPending;
  if (s == "ACCEPTED") return Status::kAccepted;
  if (s == "CORRECTED") return Status::kCorrected;
  if (s == "SKIPPED") return Status::kSkipped;
  throw InvalidArgument("unknown status " + std::string(s));
}

// Span reference by identity (offsets + type).
struct SpanRef {
  std::size_t start = 0;
  std::size_t end = 0;
  std::string type;

  friend bool operator==(const SpanRef&, const SpanRef&) = default;
};

inline void to_json(nlohmann::json& j, const SpanRef& s) {
  j = {{"start", s.start}, {"end", s.end}, {"type", s.type}};
}
inline void from_json(const nlohmann::json& j, SpanRef& s) {
  s.start = j.at("start").get<std::size_t>();
  s.end = j.at("end").get<std::size_t>();
  s.type = j.at("type").get<std::string>();
}

struct Action {
  enum class Kind { kAccept, kSkip, kAddSpan, kEditSpan, kDeleteSpan };
  Kind kind = Kind::kAccept;
  std::optional<SpanRef> span;         // add: new span; edit/delete: existing span
  std::optional<SpanRef> replacement;  // edit only

  static Action accept() { return {Kind::kAccept, {}, {}}; }
  static Action skip() { return {Kind::kSkip, {}, {}}; }
  static Action add_span(SpanRef s) { return {Kind::kAddSpan, std::move(s), {}}; }
  static Action edit_span(SpanRef from, SpanRef to) { return {Kind::kEditSpan, std::move(from), std::move(to)}; }
  static Action delete_span(SpanRef s) { return {Kind::kDeleteSpan, std::move(s), {}}; }

  bool mutates_spans() const { return kind != Kind::kAccept && kind != Kind::kSkip; }
};

inline std::string_view to_string(Action::Kind k) {
  switch (k) {
    case Action::Kind::kAccept: return "accept";
    case Action::Kind::kSkip: return "skip";
    case Action::Kind::kAddSpan: return "add_span";
    case Action::Kind::kEditSpan: return "edit_span";
    case Action::Kind::kDeleteSpan: return "delete_span";
  }
  return "accept";
}

inline Action::Kind parse_action_kind(std::string_view s) {
  if (s == "accept") return Action::Kind::kAccept;
  if (s == "skip") return Action::Kind::kSkip;
  if (s == "add_span") return Action::Kind::kAddSpan;
  if (s == "edit_span") return Action::Kind::kEditSpan;
  if (s == "delete_span") return Action::Kind::kDeleteSpan;
  throw InvalidArgument("unknown action " + std::string(s));
}

inline void to_json(nlohmann::json& j, const Action& a) {
  j = {{"action", to_string(a.kind)}};
  if (a.span) j["span"] = *a.span;
  if (a.replacement) j["new_span"] = *a.replacement;
}

// Parses {"action": ..., "span": {...}, "new_span": {...}}, checking that
// the span arguments the action needs are present.
inline void from_json(const nlohmann::json& j, Action& a) {
  a.kind = parse_action_kind(j.at("action").get<std::string>());
  a.span.reset();
  a.replacement.reset();
  if (j.contains("span") && !j.at("span").is_null()) a.span = j.at("span").get<SpanRef>();
  if (j.contains("new_span") && !j.at("new_span").is_null()) a.replacement = j.at("new_span").get<SpanRef>();
  if (a.mutates_spans() && !a.span) throw InvalidArgument(std::string(to_string(a.kind)) + " needs \"span\"");
  if (a.kind == Action::Kind::kEditSpan && !a.replacement) throw InvalidArgument("edit_span needs \"new_span\"");
}

struct HistoryEntry {
  std::string timestamp;
  std::string annotator_id;
  Action action;

  friend bool operator==(const HistoryEntry& a, const HistoryEntry& b) {
    return a.timestamp == b.timestamp && a.annotator_id == b.annotator_id &&
           nlohmann::json(a.action) == nlohmann::json(b.action);
  }
};

struct ReviewRecord {
  Sentence sentence;
  std::vector<Span> auto_spans;  // baseline from the matcher
  std::vector<ConflictNote> conflicts;
  Status status = Status::kPending;
  std::vector<Span> current_spans;
  std::vector<HistoryEntry> history;
  std::optional<std::string> annotator_id;
  std::uint64_t revision = 0;

  const std::string& sent_id() const { return sentence.sent_id; }

  friend bool operator==(const ReviewRecord&, const ReviewRecord&) = default;
};

inline void to_json(nlohmann::json& j, const ReviewRecord& r) {
  j = nlohmann::json(r.sentence);
  j["auto_spans"] = r.auto_spans;
  j["conflicts"] = r.conflicts;
  j["status"] = to_string(r.status);
  j["spans"] = r.current_spans;
  nlohmann::json history = nlohmann::json::array();
  for (const auto& h : r.history) {
    nlohmann::json e = h.action;
    e["timestamp"] = h.timestamp;
    e["annotator_id"] = h.annotator_id;
    history.push_back(std::move(e));
  }
  j["history"] = history;
  j["annotator_id"] = r.annotator_id ? nlohmann::json(*r.annotator_id) : nlohmann::json();
  j["revision"] = r.revision;
}

inline void from_json(const nlohmann::json& j, ReviewRecord& r) {
  from_json(j, r.sentence);
  r.auto_spans = j.at("auto_spans").get<std::vector<Span>>();
  r.conflicts = j.value("conflicts", std::vector<ConflictNote>{});
  r.status = parse_status(j.at("status").get<std::string>());
  r.current_spans = j.at("spans").get<std::vector<Span>>();
  r.history.clear();
  for (const auto& e : j.at("history"))
    r.history.push_back({e.at("timestamp").get<std::string>(), e.at("annotator_id").get<std::string>(),
                         e.get<Action>()});
  r.annotator_id.reset();
  if (j.contains("annotator_id") && !j.at("annotator_id").is_null())
    r.annotator_id = j.at("annotator_id").get<std::string>();
  r.revision = j.at("revision").get<std::uint64_t>();
}

inline ReviewRecord seed_record(const AnnotatedSentence& a) {
  ReviewRecord r;
  r.sentence = a.sentence;
  r.auto_spans = a.spans;
  r.conflicts = a.conflicts;
  r.current_spans = a.spans;
  return r;
}

inline AnnotatedSentence to_annotated(const ReviewRecord& r) {
  return {r.sentence, r.current_spans, r.conflicts};
}

namespace detail {

inline std::vector<Span>::iterator find_span(std::vector<Span>& spans, const SpanRef& ref) {
  return std::find_if(spans.begin(), spans.end(), [&](const Span& s) {
    return s.start == ref.start && s.end == ref.end && s.type == ref.type;
  });
}

inline Span make_human_span(const std::u32string& text, const std::vector<dataset::Token>& tokens,
                            const SpanRef& ref, const std::vector<std::string>& known_types) {
  if (!valid_type_name(ref.type)) throw InvalidArgument("bad entity type \"" + ref.type + "\"");
  if (!known_types.empty() && std::find(known_types.begin(), known_types.end(), ref.type) == known_types.end())
    throw InvalidArgument("entity type " + ref.type + " is not configured");
  if (ref.start >= ref.end || ref.end > text.size())
    throw MisalignedSpan("span [" + std::to_string(ref.start) + "," + std::to_string(ref.end) +
                         ") is outside the sentence");
  if (!dataset::aligned(tokens, ref.start, ref.end))
    throw MisalignedSpan("span [" + std::to_string(ref.start) + "," + std::to_string(ref.end) +
                         ") does not start and end on token boundaries");
  Span s;
  s.start = ref.start;
  s.end = ref.end;
  s.type = ref.type;
  s.surface = slice(text, ref.start, ref.end);
  s.origin = Origin::kHuman;
  return s;
}

inline void insert_checked(std::vector<Span>& spans, Span s) {
  for (const auto& other : spans)
    if (s.start < other.end && other.start < s.end)
      throw OverlapViolation("span [" + std::to_string(s.start) + "," + std::to_string(s.end) +
                             ") overlaps [" + std::to_string(other.start) + "," + std::to_string(other.end) + ")");
  auto pos = std::lower_bound(spans.begin(), spans.end(), s.start,
                              [](const Span& x, std::size_t start) { return x.start < start; });
  spans.insert(pos, std::move(s));
}

}  // namespace detail

// Pure transition: returns the record after `action`, or throws a
// validation error leaving `record` untouched.
inline ReviewRecord transition(const ReviewRecord& record, const std::string& annotator_id, const Action& action,
                               const std::string& timestamp, const std::vector<std::string>& known_types = {}) {
  ReviewRecord next = record;
  const std::u32string text = unicode::decode(record.sentence.text);
  switch (action.kind) {
    case Action::Kind::kAccept:
      next.status = record.status == Status::kCorrected ? Status::kCorrected : Status::kAccepted;
      break;
    case Action::Kind::kSkip:
      next.status = Status::kSkipped;
      break;
    case Action::Kind::kAddSpan: {
      auto tokens = dataset::tokenize(text);
      detail::insert_checked(next.current_spans, detail::make_human_span(text, tokens, *action.span, known_types));
      next.status = Status::kCorrected;
      break;
    }
    case Action::Kind::kEditSpan: {
      auto it = detail::find_span(next.current_spans, *action.span);
      if (it == next.current_spans.end()) throw InvalidArgument("no such span to edit");
      next.current_spans.erase(it);
      auto tokens = dataset::tokenize(text);
      detail::insert_checked(next.current_spans,
                             detail::make_human_span(text, tokens, *action.replacement, known_types));
      next.status = Status::kCorrected;
      break;
    }
    case Action::Kind::kDeleteSpan: {
      auto it = detail::find_span(next.current_spans, *action.span);
      if (it == next.current_spans.end()) throw InvalidArgument("no such span to delete");
      next.current_spans.erase(it);
      next.status = Status::kCorrected;
      break;
    }
  }
  next.history.push_back({timestamp, annotator_id, action});
  next.annotator_id = annotator_id;
  next.revision = record.revision + 1;
  return next;
}

// Rebuilds a record's state from its AUTO baseline and history.
inline ReviewRecord replay(const ReviewRecord& record, const std::vector<std::string>& known_types = {}) {
  ReviewRecord r = record;
  r.current_spans = record.auto_spans;
  r.status = Status::kPending;
  r.history.clear();
  r.annotator_id.reset();
  r.revision = 0;
  for (const auto& h : record.history) r = transition(r, h.annotator_id, h.action, h.timestamp, known_types);
  return r;
}

struct TypeInfo {
  std::string name;
  std::string display;
  std::string color;
};

inline std::string default_color(std::size_t i) {
  static const char* palette[] = {"#e6194b", "#3cb44b", "#4363d8", "#f58231", "#911eb4",
                                  "#46f0f0", "#f032e6", "#bcf60c", "#008080", "#9a6324"};
  return palette[i % (sizeof(palette) / sizeof(palette[0]))];
}

inline std::vector<TypeInfo> type_infos(const std::vector<EntityType>& types) {
  std::vector<TypeInfo> out;
  for (std::size_t i = 0; i < types.size(); ++i) out.push_back({types[i].name, types[i].display, default_color(i)});
  return out;
}

struct Progress {
  std::map<Status, std::size_t> by_status;
  std::map<std::string, std::map<Status, std::size_t>> by_type;  // keyed by entity_type_hint
  std::size_t total = 0;
};

inline std::string utc_now() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1,
                tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
  return buf;
}

// Append-only file with fsync-per-write.
class Journal {
 public:
  Journal() = default;
  explicit Journal(const std::filesystem::path& path) : path_(path) {
    fd_ = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0) throw IoError("cannot open journal " + path.string());
  }
  Journal(const Journal&) = delete;
  Journal& operator=(const Journal&) = delete;
  Journal(Journal&& o) noexcept : path_(std::move(o.path_)), fd_(std::exchange(o.fd_, -1)) {}
  Journal& operator=(Journal&& o) noexcept {
    if (this != &o) {
      close();
      path_ = std::move(o.path_);
      fd_ = std::exchange(o.fd_, -1);
    }
    return *this;
  }
  ~Journal() { close(); }

  void append(const nlohmann::json& event) { append_raw(event.dump() + "\n"); }

  void append_raw(const std::string& line) {
    const char* p = line.data();
    std::size_t left = line.size();
    while (left > 0) {
      ssize_t n = ::write(fd_, p, left);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw IoError("journal write failed: " + path_.string());
      }
      p += n;
      left -= static_cast<std::size_t>(n);
    }
  }

  void sync() {
    if (::fsync(fd_) != 0) throw IoError("journal fsync failed: " + path_.string());
  }

  void close() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

 private:
  std::filesystem::path path_;
  int fd_ = -1;
};

class ReviewStore {
 public:
  // Creates a new journal seeded with PENDING records. Refuses to clobber
  // an existing file unless `force`.
  static ReviewStore create(const std::filesystem::path& path, const std::vector<AnnotatedSentence>& annotated,
                            const std::vector<EntityType>& types = {}, bool force = false) {
    if (std::filesystem::exists(path) && !force) throw PathExists(path.string());
    ReviewStore store;
    store.path_ = path;
    for (const auto& t : types) store.types_.push_back(t);
    for (const auto& a : annotated) {
      if (store.index_.contains(a.sentence.sent_id))
        throw InvalidArgument("duplicate sentence id " + a.sentence.sent_id);
      store.index_.emplace(a.sentence.sent_id, store.records_.size());
      store.records_.push_back(seed_record(a));
    }
    auto tmp = path;
    tmp += ".partial";
    std::filesystem::remove(tmp);
    {
      Journal j(tmp);
      std::string batch = store.header_event().dump() + "\n";
      for (const auto& r : store.records_) batch += init_event(r).dump() + "\n";
      j.append_raw(batch);
      j.sync();
    }
    std::filesystem::rename(tmp, path);
    store.journal_ = Journal(path);
    return store;
  }

  // Replays the journal. A torn final line (crash mid-append) is dropped
  // and truncated away.
  static ReviewStore open(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FileNotReadable(path.string());
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    ReviewStore store;
    store.path_ = path;
    std::size_t pos = 0;
    std::size_t line_no = 0;
    std::size_t good_end = 0;
    while (pos < content.size()) {
      std::size_t nl = content.find('\n', pos);
      const bool complete = nl != std::string::npos;
      std::string line = content.substr(pos, (complete ? nl : content.size()) - pos);
      ++line_no;
      nlohmann::json event;
      try {
        event = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& e) {
        if (!complete) break;  // torn tail
        throw SchemaError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
      }
      if (!complete) break;
      store.apply_event(event, path.string() + ":" + std::to_string(line_no));
      pos = nl + 1;
      good_end = pos;
    }
    if (good_end < content.size()) std::filesystem::resize_file(path, good_end);
    store.journal_ = Journal(path);
    return store;
  }

  ReviewStore(ReviewStore&&) noexcept = default;
  ReviewStore& operator=(ReviewStore&&) noexcept = default;

  const std::filesystem::path& path() const { return path_; }

  std::vector<std::string> type_names() const {
    std::vector<std::string> out;
    for (const auto& t : types_) out.push_back(t.name);
    return out;
  }
  std::vector<TypeInfo> types() const { return type_infos(types_); }

  std::size_t size() const {
    std::shared_lock lock(*state_mutex_);
    return records_.size();
  }

  std::optional<ReviewRecord> get(const std::string& sent_id) const {
    std::shared_lock lock(*state_mutex_);
    auto it = index_.find(sent_id);
    if (it == index_.end()) return std::nullopt;
    return records_[it->second];
  }

  std::vector<ReviewRecord> records() const {
    std::shared_lock lock(*state_mutex_);
    return records_;
  }

  // Filters by status and by type (entity_type_hint or any current span of
  // that type), then pages through the matches in journal order.
  std::pair<std::vector<ReviewRecord>, std::size_t> list(std::optional<Status> status,
                                                         std::optional<std::string> type, std::size_t offset,
                                                         std::size_t limit) const {
    std::shared_lock lock(*state_mutex_);
    std::vector<ReviewRecord> page;
    std::size_t matched = 0;
    for (const auto& r : records_) {
      if (status && r.status != *status) continue;
      if (type) {
        bool hit = r.sentence.entity_type_hint == *type;
        for (const auto& s : r.current_spans) hit = hit || s.type == *type;
        if (!hit) continue;
      }
      if (matched >= offset && page.size() < limit) page.push_back(r);
      ++matched;
    }
    return {std::move(page), matched};
  }

  // Validates and applies one decision. `expected_revision` is the revision
  // the client read; a mismatch raises StaleRevision. The journal line is
  // fsynced before the in-memory state changes.
  ReviewRecord apply_decision(const std::string& sent_id, const std::string& annotator_id,
                              std::uint64_t expected_revision, const Action& action,
                              std::string timestamp = utc_now()) {
    std::lock_guard writer(*writer_mutex_);
    ReviewRecord current;
    std::size_t idx;
    {
      std::shared_lock lock(*state_mutex_);
      auto it = index_.find(sent_id);
      if (it == index_.end()) throw UnknownSentence(sent_id);
      idx = it->second;
      current = records_[idx];
    }
    if (current.revision != expected_revision) throw StaleRevision(expected_revision, current.revision);
    if (annotator_id.empty()) throw InvalidArgument("annotator_id is required");
    ReviewRecord next = transition(current, annotator_id, action, timestamp, type_names());
    nlohmann::json event = action;
    event["event"] = "decision";
    event["sent_id"] = sent_id;
    event["annotator_id"] = annotator_id;
    event["timestamp"] = timestamp;
    event["revision"] = next.revision;
    journal_.append(event);
    journal_.sync();
    std::unique_lock lock(*state_mutex_);
    records_[idx] = next;
    return next;
  }

  // ACCEPTED and CORRECTED records, in journal order.
  std::vector<AnnotatedSentence> export_verified() const {
    std::shared_lock lock(*state_mutex_);
    std::vector<AnnotatedSentence> out;
    for (const auto& r : records_)
      if (r.status == Status::kAccepted || r.status == Status::kCorrected) out.push_back(to_annotated(r));
    return out;
  }

  Progress progress() const {
    std::shared_lock lock(*state_mutex_);
    Progress p;
    for (const auto& r : records_) {
      ++p.by_status[r.status];
      ++p.by_type[r.sentence.entity_type_hint.value_or("")][r.status];
      ++p.total;
    }
    return p;
  }

  // Rewrites the journal as one snapshot event per record (history kept),
  // atomically replacing the old file.
  void compact() {
    std::lock_guard writer(*writer_mutex_);
    std::shared_lock lock(*state_mutex_);
    auto tmp = path_;
    tmp += ".compact";
    std::filesystem::remove(tmp);
    {
      Journal j(tmp);
      std::string batch = header_event().dump() + "\n";
      for (const auto& r : records_) {
        nlohmann::json e = {{"event", "snapshot"}, {"record", r}};
        batch += e.dump() + "\n";
      }
      j.append_raw(batch);
      j.sync();
    }
    journal_.close();
    std::filesystem::rename(tmp, path_);
    journal_ = Journal(path_);
  }

 private:
  ReviewStore()
      : state_mutex_(std::make_unique<std::shared_mutex>()), writer_mutex_(std::make_unique<std::mutex>()) {}

  nlohmann::json header_event() const {
    nlohmann::json types = nlohmann::json::array();
    for (const auto& t : types_) types.push_back({{"name", t.name}, {"display", t.display}});
    return {{"event", "header"}, {"schema", 1}, {"types", types}};
  }

  static nlohmann::json init_event(const ReviewRecord& r) {
    return {{"event", "init"}, {"record", nlohmann::json(to_annotated(r))}};
  }

  void apply_event(const nlohmann::json& e, const std::string& where) {
    try {
      const std::string kind = e.at("event").get<std::string>();
      if (kind == "header") {
        if (e.value("schema", 0) != 1) throw SchemaError("unsupported journal schema");
        types_.clear();
        for (const auto& t : e.at("types"))
          types_.push_back(make_entity_type(t.at("name").get<std::string>(), t.value("display", std::string())));
      } else if (kind == "init" || kind == "snapshot") {
        ReviewRecord r = kind == "init" ? seed_record(e.at("record").get<AnnotatedSentence>())
                                        : e.at("record").get<ReviewRecord>();
        if (index_.contains(r.sent_id())) throw SchemaError("duplicate record " + r.sent_id());
        index_.emplace(r.sent_id(), records_.size());
        records_.push_back(std::move(r));
      } else if (kind == "decision") {
        const auto sent_id = e.at("sent_id").get<std::string>();
        auto it = index_.find(sent_id);
        if (it == index_.end()) throw UnknownSentence(sent_id);
        ReviewRecord& r = records_[it->second];
        auto next = transition(r, e.at("annotator_id").get<std::string>(), e.get<Action>(),
                               e.at("timestamp").get<std::string>(), type_names());
        if (next.revision != e.at("revision").get<std::uint64_t>())
          throw SchemaError("revision gap for " + sent_id);
        r = std::move(next);
      } else {
        throw SchemaError("unknown event " + kind);
      }
    } catch (const nlohmann::json::exception& ex) {
      throw SchemaError(where + ": " + ex.what());
    } catch (const Error& ex) {
      throw SchemaError(where + ": " + ex.what());
    }
  }

  std::filesystem::path path_;
  std::vector<EntityType> types_;
  std::vector<ReviewRecord> records_;
  std::unordered_map<std::string, std::size_t> index_;
  Journal journal_;
  std::unique_ptr<std::shared_mutex> state_mutex_;
  std::unique_ptr<std::mutex> writer_mutex_;
};

}  // namespace rapidner::review
