#pragma once

// End-to-end orchestration from one project file: KG sub-graphs ->
// dictionaries -> ingestion -> annotation -> review store, then `finalize`
// for BIO/CoNLL export and statistics. Every stage writes its artifacts to
// `<name>.partial` and renames on success, and is skipped when its outputs
// are newer than its inputs.

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>
#include <toml.hpp>

#include "rapidner/annotation.hpp"
#include "rapidner/corpus.hpp"
#include "rapidner/dataset.hpp"
#include "rapidner/error.hpp"
#include "rapidner/gazetteer.hpp"
#include "rapidner/kgstore.hpp"
#include "rapidner/matcher.hpp"
#include "rapidner/review.hpp"

namespace rapidner::pipeline {

namespace fs = std::filesystem;

struct TopicRef {
  std::optional<std::string> label;
  std::optional<kg::ItemId> item_id;

  std::string describe() const { return label ? "\"" + *label + "\"" : "Q" + std::to_string(item_id.value_or(0)); }
};

struct TypeConfig {
  EntityType type;
  TopicRef topic;
  std::vector<kg::PropertyId> relations{kg::kInstanceOf, kg::kSubclassOf};
  std::vector<fs::path> augment_files;
  std::vector<TopicRef> union_with;   // further topics whose heads join this dictionary
  std::vector<std::string> subtract;  // entity types whose entries are removed
};

struct CorpusConfig {
  fs::path path;
  std::optional<SourceKind> source;       // overrides the per-document value
  std::optional<std::string> type_hint;   // overrides the per-document value
};

struct ProjectConfig {
  fs::path base_dir;
  std::vector<TypeConfig> types;
  fs::path statements, items;
  std::optional<fs::path> pages;
  std::vector<CorpusConfig> corpora;
  corpus::CapConfig caps;
  std::optional<fs::path> abbreviations;
  gazetteer::EntryLimits limits;
  std::vector<std::string> priority;
  bool case_sensitive = false;
  dataset::Ratios ratios;
  std::uint64_t seed = 42;
  dataset::Stratify stratify = dataset::Stratify::kNone;
  fs::path output_dir;

  std::vector<EntityType> entity_types() const {
    std::vector<EntityType> out;
    for (const auto& t : types) out.push_back(t.type);
    return out;
  }
};

struct Diagnostic {
  std::string field;
  std::string code;
  std::string message;

  std::string str() const { return field + ": [" + code + "] " + message; }
};

struct ConfigReport {
  std::optional<ProjectConfig> config;
  std::vector<Diagnostic> diagnostics;

  bool ok() const { return diagnostics.empty(); }
};

// Reads JSON, or TOML when the extension is .toml; TOML is converted to the
// same JSON document model before interpretation.
inline nlohmann::json read_config_document(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileNotReadable(path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (path.extension() == ".toml") {
    try {
      auto table = toml::parse(text, path.string());
      std::ostringstream json;
      json << toml::json_formatter{table};
      return nlohmann::json::parse(json.str());
    } catch (const toml::parse_error& e) {
      throw SchemaError(path.string() + ": " + std::string(e.description()));
    }
  }
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

namespace detail {

class Reader {
 public:
  explicit Reader(std::vector<Diagnostic>& diags) : diags_(diags) {}

  void error(const std::string& field, const std::string& code, const std::string& message) {
    diags_.push_back({field, code, message});
  }

  template <typename T>
  std::optional<T> get(const nlohmann::json& obj, const std::string& key, const std::string& field) {
    if (!obj.is_object() || !obj.contains(key) || obj.at(key).is_null()) return std::nullopt;
    try {
      return obj.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      error(field, "TypeError", "has the wrong type");
      return std::nullopt;
    }
  }

  template <typename T>
  std::optional<T> require(const nlohmann::json& obj, const std::string& key, const std::string& field) {
    if (!obj.is_object() || !obj.contains(key) || obj.at(key).is_null()) {
      error(field, "Missing", "is required");
      return std::nullopt;
    }
    return get<T>(obj, key, field);
  }

 private:
  std::vector<Diagnostic>& diags_;
};

inline std::optional<TopicRef> topic_ref(const nlohmann::json& j, Reader& r, const std::string& field) {
  TopicRef t;
  if (j.is_string()) t.label = j.get<std::string>();
  else if (j.is_number_integer()) t.item_id = j.get<kg::ItemId>();
  else if (j.is_object()) {
    t.label = r.get<std::string>(j, "topic_label", field + ".topic_label");
    t.item_id = r.get<kg::ItemId>(j, "topic_item_id", field + ".topic_item_id");
  }
  if (t.label.has_value() == t.item_id.has_value()) {
    r.error(field, "BadTopic", "give exactly one of a topic label or a topic item id");
    return std::nullopt;
  }
  return t;
}

inline fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

inline void require_file(Reader& r, const std::string& field, const fs::path& p) {
  std::error_code ec;
  if (!fs::is_regular_file(p, ec)) r.error(field, "FileNotReadable", "no such file: " + p.string());
}

}  // namespace detail

// Interprets a config document; relative paths resolve against `base_dir`.
// Collects every problem rather than stopping at the first.
inline ConfigReport interpret_config(const nlohmann::json& doc, const fs::path& base_dir) {
  ConfigReport report;
  auto& diags = report.diagnostics;
  detail::Reader r(diags);
  ProjectConfig cfg;
  cfg.base_dir = base_dir;
  if (!doc.is_object()) {
    r.error("<root>", "TypeError", "configuration must be an object");
    return report;
  }

  std::set<std::string> names;
  const auto types = doc.contains("entity_types") ? doc.at("entity_types") : nlohmann::json();
  if (!types.is_array() || types.empty()) r.error("entity_types", "Missing", "at least one entity type is required");
  for (std::size_t i = 0; types.is_array() && i < types.size(); ++i) {
    const auto& t = types[i];
    const std::string f = "entity_types[" + std::to_string(i) + "]";
    TypeConfig tc;
    auto name = r.require<std::string>(t, "name", f + ".name");
    if (name && !valid_type_name(*name)) {
      r.error(f + ".name", "BadTypeName", "\"" + *name + "\" must match [A-Z][A-Z0-9_]*");
      name.reset();
    }
    if (name && !names.insert(*name).second) r.error(f + ".name", "DuplicateType", *name + " is defined twice");
    tc.type = make_entity_type(name.value_or("INVALID"), r.get<std::string>(t, "display", f + ".display").value_or(""));
    if (auto topic = detail::topic_ref(t, r, f)) tc.topic = *topic;
    if (auto rel = r.get<std::vector<nlohmann::json>>(t, "relations", f + ".relations")) {
      tc.relations.clear();
      for (const auto& v : *rel) {
        try {
          tc.relations.push_back(v.is_string() ? kg::parse_property(v.get<std::string>()) : v.get<kg::PropertyId>());
        } catch (const std::exception&) {
          r.error(f + ".relations", "BadRelation", "bad property " + v.dump());
          continue;
        }
        if (tc.relations.back() != kg::kInstanceOf && tc.relations.back() != kg::kSubclassOf)
          r.error(f + ".relations", "BadRelation", "only 31 (instance of) and 279 (subclass of) build dictionaries");
      }
      if (tc.relations.empty()) r.error(f + ".relations", "BadRelation", "must not be empty");
    }
    for (const auto& p : r.get<std::vector<std::string>>(t, "augment_files", f + ".augment_files").value_or(std::vector<std::string>{}))
      tc.augment_files.push_back(detail::resolve(base_dir, p));
    if (t.contains("union_with") && t.at("union_with").is_array()) {
      const auto& u = t.at("union_with");
      for (std::size_t k = 0; k < u.size(); ++k)
        if (auto ref = detail::topic_ref(u[k], r, f + ".union_with[" + std::to_string(k) + "]"))
          tc.union_with.push_back(*ref);
    }
    tc.subtract = r.get<std::vector<std::string>>(t, "subtract", f + ".subtract").value_or(std::vector<std::string>{});
    cfg.types.push_back(std::move(tc));
  }
  for (std::size_t i = 0; i < cfg.types.size(); ++i)
    for (const auto& s : cfg.types[i].subtract) {
      const std::string f = "entity_types[" + std::to_string(i) + "].subtract";
      if (!names.contains(s)) r.error(f, "UnknownType", s + " is not a configured entity type");
      else if (s == cfg.types[i].type.name) r.error(f, "SelfSubtract", "a type cannot subtract itself");
    }

  const auto kg_paths = doc.value("kg_paths", nlohmann::json::object());
  if (auto p = r.require<std::string>(kg_paths, "statements", "kg_paths.statements"))
    cfg.statements = detail::resolve(base_dir, *p);
  if (auto p = r.require<std::string>(kg_paths, "items", "kg_paths.items")) cfg.items = detail::resolve(base_dir, *p);
  if (auto p = r.get<std::string>(kg_paths, "pages", "kg_paths.pages")) cfg.pages = detail::resolve(base_dir, *p);

  const auto corpora = doc.contains("corpora") ? doc.at("corpora") : nlohmann::json();
  if (!corpora.is_array() || corpora.empty()) r.error("corpora", "Missing", "at least one corpus is required");
  for (std::size_t i = 0; corpora.is_array() && i < corpora.size(); ++i) {
    const std::string f = "corpora[" + std::to_string(i) + "]";
    CorpusConfig cc;
    if (auto p = r.require<std::string>(corpora[i], "path", f + ".path")) cc.path = detail::resolve(base_dir, *p);
    if (auto s = r.get<std::string>(corpora[i], "source", f + ".source")) {
      try {
        cc.source = parse_source(*s);
      } catch (const Error& e) {
        r.error(f + ".source", "BadSource", e.what());
      }
    }
    cc.type_hint = r.get<std::string>(corpora[i], "entity_type_hint", f + ".entity_type_hint");
    if (cc.type_hint && !names.contains(*cc.type_hint))
      r.error(f + ".entity_type_hint", "UnknownType", *cc.type_hint + " is not a configured entity type");
    cfg.corpora.push_back(std::move(cc));
  }

  const auto caps = doc.value("caps", nlohmann::json::object());
  cfg.caps.per_page_max = r.get<std::size_t>(caps, "per_page_max", "caps.per_page_max").value_or(cfg.caps.per_page_max);
  cfg.caps.per_type_per_source_max =
      r.get<std::size_t>(caps, "per_type_per_source_max", "caps.per_type_per_source_max")
          .value_or(cfg.caps.per_type_per_source_max);
  if (auto p = r.get<std::string>(doc, "abbreviations", "abbreviations")) cfg.abbreviations = detail::resolve(base_dir, *p);

  const auto dict = doc.value("dictionary", nlohmann::json::object());
  cfg.limits.min_chars = r.get<std::size_t>(dict, "min_chars", "dictionary.min_chars").value_or(cfg.limits.min_chars);
  cfg.limits.max_tokens = r.get<std::size_t>(dict, "max_tokens", "dictionary.max_tokens").value_or(cfg.limits.max_tokens);

  const auto matcher = doc.value("matcher", nlohmann::json::object());
  if (auto prio = r.get<std::vector<std::string>>(matcher, "priority", "matcher.priority")) {
    cfg.priority = *prio;
  } else {
    for (const auto& t : cfg.types) cfg.priority.push_back(t.type.name);
  }
  std::set<std::string> seen;
  for (const auto& p : cfg.priority) {
    if (!names.contains(p)) r.error("matcher.priority", "UnknownTypeInPriority", p + " is not a configured entity type");
    if (!seen.insert(p).second) r.error("matcher.priority", "DuplicateType", p + " is listed twice");
  }
  for (const auto& n : names)
    if (!seen.contains(n)) r.error("matcher.priority", "PriorityIncomplete", n + " is missing from the priority list");
  cfg.case_sensitive = r.get<bool>(matcher, "case_sensitive", "matcher.case_sensitive").value_or(false);

  const auto split = doc.value("split", nlohmann::json::object());
  if (split.contains("ratios")) {
    try {
      const auto& v = split.at("ratios");
      if (v.is_string()) {
        cfg.ratios = dataset::parse_ratios(v.get<std::string>());
      } else {
        auto xs = v.get<std::vector<double>>();
        if (xs.size() != 3) throw BadRatios("expected three ratios (train,dev,test)");
        cfg.ratios = {xs[0], xs[1], xs[2]};
        dataset::validate(cfg.ratios);
      }
    } catch (const BadRatios& e) {
      r.error("split.ratios", "BadRatios", e.what());
    } catch (const nlohmann::json::exception&) {
      r.error("split.ratios", "BadRatios", "must be three numbers");
    }
  }
  cfg.seed = r.get<std::uint64_t>(split, "seed", "split.seed").value_or(cfg.seed);
  if (auto s = r.get<std::string>(split, "stratify_by", "split.stratify_by")) {
    if (*s == "source") cfg.stratify = dataset::Stratify::kSource;
    else if (*s != "none") r.error("split.stratify_by", "BadValue", "must be \"none\" or \"source\"");
  }

  cfg.output_dir = detail::resolve(base_dir, r.get<std::string>(doc, "output_dir", "output_dir").value_or("out"));
  report.config = std::move(cfg);
  return report;
}

// Schema and cross-reference checks plus existence of every input file.
// No side effects.
inline ConfigReport validate_config(const fs::path& path) {
  ConfigReport report;
  nlohmann::json doc;
  try {
    doc = read_config_document(path);
  } catch (const Error& e) {
    report.diagnostics.push_back({"<file>", e.code(), e.what()});
    return report;
  }
  report = interpret_config(doc, fs::absolute(path).parent_path());
  if (!report.config) return report;
  detail::Reader r(report.diagnostics);
  const auto& cfg = *report.config;
  if (!cfg.statements.empty()) detail::require_file(r, "kg_paths.statements", cfg.statements);
  if (!cfg.items.empty()) detail::require_file(r, "kg_paths.items", cfg.items);
  if (cfg.pages) detail::require_file(r, "kg_paths.pages", *cfg.pages);
  if (cfg.abbreviations) detail::require_file(r, "abbreviations", *cfg.abbreviations);
  for (std::size_t i = 0; i < cfg.corpora.size(); ++i)
    if (!cfg.corpora[i].path.empty())
      detail::require_file(r, "corpora[" + std::to_string(i) + "].path", cfg.corpora[i].path);
  for (std::size_t i = 0; i < cfg.types.size(); ++i)
    for (std::size_t k = 0; k < cfg.types[i].augment_files.size(); ++k)
      detail::require_file(r, "entity_types[" + std::to_string(i) + "].augment_files[" + std::to_string(k) + "]",
                           cfg.types[i].augment_files[k]);
  return report;
}

inline ProjectConfig load_config(const fs::path& path) {
  auto report = validate_config(path);
  if (!report.ok()) {
    std::vector<std::string> lines;
    for (const auto& d : report.diagnostics) lines.push_back(d.str());
    throw ConfigError(std::move(lines));
  }
  return std::move(*report.config);
}

// Artifact locations under the output directory.
struct Layout {
  fs::path root;

  fs::path subgraph(const std::string& type, std::size_t k) const {
    return root / "kg" / (k == 0 ? type + ".json" : type + ".union" + std::to_string(k) + ".json");
  }
  fs::path dictionary(const std::string& type) const { return root / "dicts" / (type + ".json"); }
  fs::path sentences() const { return root / "sentences.jsonl"; }
  fs::path annotated() const { return root / "annotated.jsonl"; }
  fs::path journal() const { return root / "review.journal"; }
  fs::path verified() const { return root / "verified.jsonl"; }
  fs::path dataset() const { return root / "dataset"; }
  fs::path stats_json() const { return root / "stats.json"; }
  fs::path stats_txt() const { return root / "stats.txt"; }
  fs::path report(const std::string& stage) const { return root / "reports" / (stage + ".json"); }
};

using Log = std::function<void(const std::string&)>;

struct RunOptions {
  bool force = false;
  kg::ParseMode mode = kg::ParseMode::kStrict;
  unsigned threads = 1;
  Log log = [](const std::string&) {};
};

struct StageOutcome {
  std::string stage;
  bool ran = false;
  std::vector<fs::path> outputs;
};

struct PipelineReport {
  std::vector<StageOutcome> stages;

  bool any_ran() const {
    for (const auto& s : stages)
      if (s.ran) return true;
    return false;
  }
};

namespace detail {

// Outputs are fresh when they all exist and none is older than any input.
inline bool fresh(const std::vector<fs::path>& inputs, const std::vector<fs::path>& outputs) {
  std::error_code ec;
  std::optional<fs::file_time_type> oldest_out;
  for (const auto& o : outputs) {
    auto t = fs::last_write_time(o, ec);
    if (ec) return false;
    if (!oldest_out || t < *oldest_out) oldest_out = t;
  }
  for (const auto& i : inputs) {
    auto t = fs::last_write_time(i, ec);
    if (ec) return false;
    if (oldest_out && t > *oldest_out) return false;
  }
  return true;
}

// Collects files and publishes them together: every file is written as
// `<path>.partial` first and renamed only once all writes succeeded.
class Staging {
 public:
  void add(const fs::path& path, std::string content) { files_.emplace_back(path, std::move(content)); }

  void commit() {
    for (const auto& [path, content] : files_) {
      fs::create_directories(path.parent_path());
      dataset::write_file(partial(path), content);
    }
    for (const auto& [path, content] : files_) fs::rename(partial(path), path);
  }

  std::vector<fs::path> paths() const {
    std::vector<fs::path> out;
    for (const auto& f : files_) out.push_back(f.first);
    return out;
  }

  static fs::path partial(const fs::path& p) {
    fs::path out = p;
    out += ".partial";
    return out;
  }

 private:
  std::vector<std::pair<fs::path, std::string>> files_;
};

template <typename T>
std::string jsonl(const std::vector<T>& items) {
  std::ostringstream out;
  write_jsonl(out, items);
  return out.str();
}

}  // namespace detail

class Pipeline {
 public:
  Pipeline(ProjectConfig config, fs::path config_path, RunOptions options = {})
      : cfg_(std::move(config)), config_path_(std::move(config_path)), opt_(std::move(options)),
        layout_{cfg_.output_dir} {}

  const Layout& layout() const { return layout_; }
  const ProjectConfig& config() const { return cfg_; }

  // Everything up to and including review-store initialization.
  PipelineReport run() {
    PipelineReport report;
    report.stages.push_back(stage_kg());
    report.stages.push_back(stage_dicts());
    report.stages.push_back(stage_ingest());
    report.stages.push_back(stage_annotate());
    report.stages.push_back(stage_review());
    return report;
  }

  // Verified sentences -> BIO -> split -> CoNLL + statistics. With
  // `auto_accept`, PENDING records contribute their automatic spans (and
  // without a store the annotated file is used as is).
  StageOutcome finalize(bool auto_accept) {
    std::vector<fs::path> inputs = {config_path_};
    const bool have_store = fs::exists(layout_.journal());
    if (!have_store && !auto_accept)
      throw StageError("finalize", layout_.journal().string(),
                       FileNotReadable(layout_.journal().string() + " (run the pipeline first, or use --auto-accept)"));
    inputs.push_back(have_store ? layout_.journal() : layout_.annotated());
    const std::vector<fs::path> outputs = {layout_.dataset() / "train.conll", layout_.dataset() / "dev.conll",
                                           layout_.dataset() / "test.conll",  layout_.dataset() / "meta.json",
                                           layout_.stats_json(),              layout_.stats_txt(),
                                           layout_.verified()};
    // The auto-accept choice is not visible in file times, so finalize
    // always reruns unless nothing could have changed.
    if (!opt_.force && !auto_accept && detail::fresh(inputs, outputs)) return skipped("finalize", outputs);
    try {
      std::vector<AnnotatedSentence> verified;
      if (have_store) {
        auto store = review::ReviewStore::open(layout_.journal());
        for (const auto& r : store.records()) {
          if (r.status == review::Status::kAccepted || r.status == review::Status::kCorrected ||
              (auto_accept && r.status == review::Status::kPending))
            verified.push_back(review::to_annotated(r));
        }
      } else {
        verified = read_jsonl<AnnotatedSentence>(layout_.annotated().string());
      }
      std::vector<dataset::TaggedSentence> tagged;
      tagged.reserve(verified.size());
      for (const auto& a : verified) tagged.push_back(dataset::spans_to_bio(a));
      auto split = dataset::split_dataset(tagged, cfg_.ratios, cfg_.seed, cfg_.stratify);

      const fs::path staging = layout_.root / "dataset.partial";
      fs::remove_all(staging);
      dataset::export_conll(split, staging);
      auto stats = dataset::compute_stats(tagged);
      detail::Staging files;
      files.add(layout_.stats_json(), dataset::to_json(stats).dump(2) + "\n");
      files.add(layout_.stats_txt(), dataset::to_table(stats));
      files.add(layout_.verified(), detail::jsonl(verified));
      files.commit();
      fs::remove_all(layout_.dataset());
      fs::rename(staging, layout_.dataset());
      opt_.log("finalize: " + std::to_string(verified.size()) + " sentences -> " +
               std::to_string(split.train.size()) + "/" + std::to_string(split.dev.size()) + "/" +
               std::to_string(split.test.size()));
      return {"finalize", true, outputs};
    } catch (const StageError&) {
      throw;
    } catch (const Error& e) {
      throw StageError("finalize", layout_.dataset().string(), e);
    }
  }

 private:
  StageOutcome skipped(const std::string& stage, std::vector<fs::path> outputs) {
    opt_.log(stage + ": up to date, skipped");
    return {stage, false, std::move(outputs)};
  }

  template <typename Fn>
  StageOutcome guarded(const std::string& stage, const fs::path& file, Fn&& fn) {
    try {
      return fn();
    } catch (const StageError&) {
      throw;
    } catch (const Error& e) {
      throw StageError(stage, file.string(), e);
    } catch (const fs::filesystem_error& e) {
      throw StageError(stage, file.string(), IoError(e.what()));
    }
  }

  const kg::ItemIndex& items() {
    if (!items_) {
      opt_.log("loading items from " + cfg_.items.string());
      items_ = kg::load_items(cfg_.items.string(), opt_.mode);
    }
    return *items_;
  }

  kg::ItemId resolve(const TopicRef& t) {
    if (t.item_id) return *t.item_id;
    return kg::resolve_topic(items(), *t.label);
  }

  std::vector<fs::path> subgraph_paths() const {
    std::vector<fs::path> out;
    for (const auto& t : cfg_.types)
      for (std::size_t k = 0; k <= t.union_with.size(); ++k) out.push_back(layout_.subgraph(t.type.name, k));
    return out;
  }

  std::vector<fs::path> dictionary_paths() const {
    std::vector<fs::path> out;
    for (const auto& t : cfg_.types) out.push_back(layout_.dictionary(t.type.name));
    return out;
  }

  StageOutcome stage_kg() {
    auto outputs = subgraph_paths();
    outputs.push_back(layout_.report("kg"));
    if (!opt_.force && detail::fresh({config_path_, cfg_.statements, cfg_.items}, outputs))
      return skipped("kg", outputs);
    return guarded("kg", cfg_.statements, [&] {
      std::set<kg::PropertyId> relations;
      for (const auto& t : cfg_.types) relations.insert(t.relations.begin(), t.relations.end());
      opt_.log("loading statements from " + cfg_.statements.string());
      auto store = kg::load_statements(cfg_.statements.string(), kg::RelationFilter::of(relations), opt_.mode);
      detail::Staging files;
      nlohmann::json rep = {{"statements", {{"rows", store.report.rows},
                                            {"kept", store.report.kept},
                                            {"malformed", store.report.malformed},
                                            {"duplicates", store.report.duplicates}}},
                            {"types", nlohmann::json::object()}};
      for (const auto& t : cfg_.types) {
        std::vector<TopicRef> topics = {t.topic};
        topics.insert(topics.end(), t.union_with.begin(), t.union_with.end());
        for (std::size_t k = 0; k < topics.size(); ++k) {
          auto g = kg::extract_subgraph(store, resolve(topics[k]), t.relations);
          rep["types"][t.type.name].push_back(
              {{"topic", topics[k].describe()}, {"topic_item", g.topic_item}, {"heads", g.total_heads()}});
          files.add(layout_.subgraph(t.type.name, k), nlohmann::json(g).dump() + "\n");
        }
      }
      files.add(layout_.report("kg"), rep.dump(2) + "\n");
      files.commit();
      opt_.log("kg: " + std::to_string(store.report.kept) + " triples kept");
      return StageOutcome{"kg", true, outputs};
    });
  }

  static kg::SubGraph read_subgraph(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw FileNotReadable(p.string());
    try {
      return nlohmann::json::parse(in).get<kg::SubGraph>();
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError(p.string() + ": " + e.what());
    }
  }

  StageOutcome stage_dicts() {
    auto outputs = dictionary_paths();
    outputs.push_back(layout_.report("dicts"));
    std::vector<fs::path> inputs = subgraph_paths();
    inputs.push_back(config_path_);
    inputs.push_back(cfg_.items);
    for (const auto& t : cfg_.types) inputs.insert(inputs.end(), t.augment_files.begin(), t.augment_files.end());
    if (!opt_.force && detail::fresh(inputs, outputs)) return skipped("dicts", outputs);
    return guarded("dicts", layout_.root / "dicts", [&] {
      std::map<std::string, gazetteer::Dictionary> pre;
      nlohmann::json rep = nlohmann::json::object();
      for (const auto& t : cfg_.types) {
        gazetteer::BuildReport br;
        auto d = gazetteer::build_dictionary(read_subgraph(layout_.subgraph(t.type.name, 0)), items(), t.type, &br,
                                             cfg_.limits);
        for (std::size_t k = 1; k <= t.union_with.size(); ++k) {
          auto extra = gazetteer::build_dictionary(read_subgraph(layout_.subgraph(t.type.name, k)), items(), t.type,
                                                   &br, cfg_.limits);
          d = gazetteer::unite(d, extra, t.type);
        }
        for (const auto& f : t.augment_files) d = gazetteer::augment_from_list(d, f.string(), &br, cfg_.limits);
        rep[t.type.name] = {{"added", br.added},           {"duplicates", br.duplicates},
                            {"unresolved", br.unresolved}, {"rejected_short", br.rejected_short},
                            {"rejected_long", br.rejected_long}};
        pre.emplace(t.type.name, std::move(d));
      }
      detail::Staging files;
      for (const auto& t : cfg_.types) {
        gazetteer::Dictionary d = pre.at(t.type.name);
        for (const auto& s : t.subtract) d = gazetteer::subtract(d, pre.at(s));
        rep[t.type.name]["size"] = d.size();
        files.add(layout_.dictionary(t.type.name), gazetteer::to_json(d).dump(1) + "\n");
        opt_.log("dicts: " + t.type.name + " has " + std::to_string(d.size()) + " entries");
      }
      files.add(layout_.report("dicts"), rep.dump(2) + "\n");
      files.commit();
      return StageOutcome{"dicts", true, outputs};
    });
  }

  StageOutcome stage_ingest() {
    std::vector<fs::path> outputs = {layout_.sentences(), layout_.report("ingest")};
    std::vector<fs::path> inputs = {config_path_};
    for (const auto& c : cfg_.corpora) inputs.push_back(c.path);
    if (cfg_.abbreviations) inputs.push_back(*cfg_.abbreviations);
    if (cfg_.pages) {
      inputs.push_back(*cfg_.pages);
      for (const auto& p : dictionary_paths()) inputs.push_back(p);
    }
    if (!opt_.force && detail::fresh(inputs, outputs)) return skipped("ingest", outputs);
    return guarded("ingest", layout_.sentences(), [&] {
      std::vector<RawDocument> docs;
      for (const auto& c : cfg_.corpora) {
        for (auto& d : read_jsonl<RawDocument>(c.path.string())) {
          if (c.source) d.source = *c.source;
          if (c.type_hint) d.entity_type_hint = *c.type_hint;
          docs.push_back(std::move(d));
        }
      }
      nlohmann::json rep = nlohmann::json::object();
      if (cfg_.pages) rep["pages"] = resolve_pages(docs);
      corpus::Ingestor ingestor(cfg_.caps, cfg_.abbreviations ? corpus::load_abbreviations(cfg_.abbreviations->string())
                                                              : corpus::default_abbreviations());
      auto sentences = ingestor.ingest(docs, opt_.threads);
      const auto& ir = ingestor.report();
      rep["documents"] = ir.documents;
      rep["skipped_no_intro"] = ir.skipped_no_intro;
      rep["skipped_duplicate_id"] = ir.skipped_duplicate_id;
      rep["dropped_by_page_cap"] = ir.dropped_by_page_cap;
      rep["dropped_by_type_cap"] = ir.dropped_by_type_cap;
      rep["sentences"] = ir.sentences;
      rep["warnings"] = ir.warnings;
      for (const auto& w : ir.warnings) opt_.log("ingest: " + w);
      detail::Staging files;
      files.add(layout_.sentences(), detail::jsonl(sentences));
      files.add(layout_.report("ingest"), rep.dump(2) + "\n");
      files.commit();
      opt_.log("ingest: " + std::to_string(sentences.size()) + " sentences from " + std::to_string(docs.size()) +
               " documents");
      return StageOutcome{"ingest", true, outputs};
    });
  }

  // Wikipedia documents that carry a page_id are checked against page.csv;
  // a document without a type hint inherits the first type (in priority
  // order) whose dictionary contains the page's item.
  nlohmann::json resolve_pages(std::vector<RawDocument>& docs) {
    auto pages = kg::load_pages(cfg_.pages->string(), opt_.mode);
    std::vector<std::pair<std::string, std::set<kg::ItemId>>> members;
    for (const auto& name : cfg_.priority) {
      std::set<kg::ItemId> ids;
      for (const auto& e : gazetteer::load_dictionary(layout_.dictionary(name).string()).entries())
        if (e.item_id) ids.insert(*e.item_id);
      members.emplace_back(name, std::move(ids));
    }
    std::size_t unknown = 0, hinted = 0;
    for (auto& d : docs) {
      if (d.source != SourceKind::kWikipedia || !d.page_id) continue;
      const kg::PageRecord* page = pages.find(*d.page_id);
      if (!page) {
        ++unknown;
        opt_.log("ingest: page " + std::to_string(*d.page_id) + " of " + d.doc_id + " is not in page.csv");
        continue;
      }
      if (d.entity_type_hint) continue;
      for (const auto& [name, ids] : members)
        if (ids.contains(page->item_id)) {
          d.entity_type_hint = name;
          ++hinted;
          break;
        }
    }
    return {{"unknown_page_ids", unknown}, {"hints_from_pages", hinted}};
  }

  StageOutcome stage_annotate() {
    std::vector<fs::path> outputs = {layout_.annotated(), layout_.report("annotate")};
    std::vector<fs::path> inputs = dictionary_paths();
    inputs.push_back(layout_.sentences());
    inputs.push_back(config_path_);
    if (!opt_.force && detail::fresh(inputs, outputs)) return skipped("annotate", outputs);
    return guarded("annotate", layout_.annotated(), [&] {
      std::vector<gazetteer::Dictionary> dicts;
      for (const auto& t : cfg_.types) dicts.push_back(gazetteer::load_dictionary(layout_.dictionary(t.type.name).string()));
      auto m = matcher::Matcher::compile(dicts, cfg_.priority, {cfg_.case_sensitive});
      auto sentences = read_jsonl<Sentence>(layout_.sentences().string());
      auto annotated = m.annotate_all(sentences, opt_.threads);
      std::size_t spans = 0, conflicts = 0;
      for (const auto& a : annotated) {
        spans += a.spans.size();
        conflicts += a.conflicts.size();
      }
      detail::Staging files;
      files.add(layout_.annotated(), detail::jsonl(annotated));
      files.add(layout_.report("annotate"),
                nlohmann::json{{"patterns", m.pattern_count()}, {"sentences", annotated.size()},
                               {"spans", spans}, {"conflicts", conflicts}}
                        .dump(2) + "\n");
      files.commit();
      opt_.log("annotate: " + std::to_string(spans) + " spans over " + std::to_string(annotated.size()) +
               " sentences");
      return StageOutcome{"annotate", true, outputs};
    });
  }

  StageOutcome stage_review() {
    std::vector<fs::path> outputs = {layout_.journal()};
    if (!opt_.force && detail::fresh({layout_.annotated()}, outputs)) return skipped("review", outputs);
    return guarded("review", layout_.journal(), [&] {
      if (fs::exists(layout_.journal()) && !opt_.force) {
        auto existing = review::ReviewStore::open(layout_.journal());
        std::size_t decided = 0;
        for (const auto& r : existing.records()) decided += !r.history.empty();
        if (decided > 0)
          throw PathExists(layout_.journal().string() + " holds " + std::to_string(decided) +
                           " reviewed sentences and annotations changed;");
      }
      auto annotated = read_jsonl<AnnotatedSentence>(layout_.annotated().string());
      review::ReviewStore::create(layout_.journal(), annotated, cfg_.entity_types(), true);
      opt_.log("review: store initialized with " + std::to_string(annotated.size()) + " sentences");
      return StageOutcome{"review", true, outputs};
    });
  }

  ProjectConfig cfg_;
  fs::path config_path_;
  RunOptions opt_;
  Layout layout_;
  std::optional<kg::ItemIndex> items_;
};

}  // namespace rapidner::pipeline
