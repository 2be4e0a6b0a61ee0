// rapidner: command-line front end for the dataset construction toolkit.

#include <pthread.h>
#include <signal.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "rapidner/rapidner.hpp"

namespace fs = std::filesystem;
using namespace rapidner;

namespace {

struct Globals {
  std::string config;
  bool force = false;
  bool lenient = false;
  unsigned threads = 1;
  std::string log_level = "info";

  kg::ParseMode mode() const { return lenient ? kg::ParseMode::kLenient : kg::ParseMode::kStrict; }
};

// Writes through `<path>.partial` so a failed command never leaves a
// half-written artifact under the final name.
void write_output(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
    return;
  }
  fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  fs::path partial = p;
  partial += ".partial";
  dataset::write_file(partial, content);
  fs::rename(partial, p);
}

void check_clobber(const std::string& path, const Globals& g) {
  if (!g.force && !path.empty() && path != "-" && fs::exists(path)) throw PathExists(path);
}

template <typename T>
std::string jsonl(const std::vector<T>& items) {
  std::ostringstream out;
  write_jsonl(out, items);
  return out.str();
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v * 100.0);
  return buf;
}

std::string prf_table(const quality::PrfReport& r) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof(line), "%-14s %8s %8s %8s %7s %7s %7s\n", "TYPE", "P", "R", "F1", "TP", "FP", "FN");
  out << line;
  auto row = [&](const std::string& name, const quality::Prf& p) {
    std::snprintf(line, sizeof(line), "%-14s %8s %8s %8s %7zu %7zu %7zu\n", name.c_str(), percent(p.precision).c_str(),
                  percent(p.recall).c_str(), percent(p.f1).c_str(), p.tp, p.fp, p.fn);
    out << line;
  };
  for (const auto& [type, p] : r.per_type) row(type, p);
  row("micro", r.micro);
  return out.str();
}

pipeline::ProjectConfig require_config(const Globals& g) {
  if (g.config.empty()) throw InvalidArgument("--config is required for this command");
  return pipeline::load_config(g.config);
}

pipeline::RunOptions run_options(const Globals& g) {
  pipeline::RunOptions o;
  o.force = g.force;
  o.mode = g.mode();
  o.threads = g.threads;
  o.log = [](const std::string& m) { spdlog::info("{}", m); };
  return o;
}

void log_report_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) spdlog::warn("{}", w);
}

// Serves until SIGINT/SIGTERM. Signals are blocked in every thread and
// collected by a dedicated sigwait thread, which stops the server.
void serve_blocking(review::ReviewStore& store, const std::string& bind, const std::optional<fs::path>& static_dir) {
  auto [host, port] = review::parse_bind(bind);
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
  review::ReviewServer server(store, static_dir);
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&set, &sig);
    spdlog::info("shutting down");
    server.stop();
  });
  spdlog::info("serving {} sentences on http://{}:{}/", store.size(), host, port);
  try {
    server.run(host, port);
  } catch (...) {
    pthread_kill(waiter.native_handle(), SIGTERM);
    waiter.join();
    throw;
  }
  waiter.join();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rapidner: build NER datasets from a knowledge graph and text corpora"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "Project configuration (JSON or TOML)");
  app.add_flag("--force", g.force, "Overwrite outputs and rerun up-to-date stages");
  app.add_flag("--lenient", g.lenient, "Skip malformed CSV rows instead of failing");
  app.add_option("--threads", g.threads, "Worker threads for ingestion and annotation")->check(CLI::Range(1u, 1024u));
  app.add_option("--log-level", g.log_level, "trace|debug|info|warn|error|off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "critical", "off"}));

  // kg
  auto* kg_cmd = app.add_subcommand("kg", "Knowledge-graph extraction");
  kg_cmd->require_subcommand(1);
  auto* kg_extract = kg_cmd->add_subcommand("extract", "Extract the depth-1 sub-graph of a topic");
  std::string statements, items_path, topic, relations = "31,279", out;
  std::optional<kg::ItemId> topic_id;
  kg_extract->add_option("--statements", statements)->required();
  kg_extract->add_option("--items", items_path);
  auto* topic_opt = kg_extract->add_option("--topic", topic, "Topic label, resolved through --items");
  kg_extract->add_option("--topic-id", topic_id, "Topic item id")->excludes(topic_opt);
  kg_extract->add_option("--relations", relations, "Comma-separated property ids");
  kg_extract->add_option("--out", out)->required();

  // dict
  auto* dict_cmd = app.add_subcommand("dict", "Dictionary construction");
  dict_cmd->require_subcommand(1);
  std::string subgraph, type_name, display, dict_a, dict_b, list_path;
  auto* dict_build = dict_cmd->add_subcommand("build", "Dictionary from a sub-graph");
  dict_build->add_option("--subgraph", subgraph)->required();
  dict_build->add_option("--items", items_path)->required();
  dict_build->add_option("--type", type_name)->required();
  dict_build->add_option("--display", display);
  dict_build->add_option("--out", out)->required();
  auto* dict_union = dict_cmd->add_subcommand("union", "Union of two dictionaries (first wins on collision)");
  dict_union->add_option("--a", dict_a)->required();
  dict_union->add_option("--b", dict_b)->required();
  dict_union->add_option("--type", type_name, "Result type (default: type of --a)");
  dict_union->add_option("--out", out)->required();
  auto* dict_subtract = dict_cmd->add_subcommand("subtract", "Entries of --a not in --b");
  dict_subtract->add_option("--a", dict_a)->required();
  dict_subtract->add_option("--b", dict_b)->required();
  dict_subtract->add_option("--out", out)->required();
  auto* dict_augment = dict_cmd->add_subcommand("augment", "Add one entry per line of a list file");
  dict_augment->add_option("--dict", dict_a)->required();
  dict_augment->add_option("--list", list_path)->required();
  dict_augment->add_option("--out", out)->required();

  // corpus
  auto* corpus_cmd = app.add_subcommand("corpus", "Corpus ingestion");
  corpus_cmd->require_subcommand(1);
  auto* corpus_ingest = corpus_cmd->add_subcommand("ingest", "Clean, split and cap documents into sentences");
  std::vector<std::string> inputs;
  corpus::CapConfig caps;
  std::string abbreviations;
  corpus_ingest->add_option("--in", inputs, "Corpus dump JSONL (repeatable)")->required();
  corpus_ingest->add_option("--per-page-max", caps.per_page_max);
  corpus_ingest->add_option("--per-type-max", caps.per_type_per_source_max);
  corpus_ingest->add_option("--abbreviations", abbreviations, "Abbreviation list, one per line");
  corpus_ingest->add_option("--out", out)->required();

  // annotate
  auto* annotate_cmd = app.add_subcommand("annotate", "Dictionary annotation of sentences");
  std::string dicts_arg, priority_arg, in_path, em_markup;
  bool case_sensitive = false;
  annotate_cmd->add_option("--dicts", dicts_arg, "Comma-separated dictionary files")->required();
  annotate_cmd->add_option("--priority", priority_arg, "Comma-separated type order for exact ties");
  annotate_cmd->add_option("--in", in_path)->required();
  annotate_cmd->add_option("--out", out)->required();
  annotate_cmd->add_option("--em-markup", em_markup, "Also write <em type=...> markup, one sentence per line");
  annotate_cmd->add_flag("--case-sensitive", case_sensitive);

  // review
  auto* review_cmd = app.add_subcommand("review", "Human verification store");
  review_cmd->require_subcommand(1);
  std::string store_path, bind = "127.0.0.1:8686", static_dir, types_arg;
  auto* review_init = review_cmd->add_subcommand("init", "Create a store of PENDING records");
  review_init->add_option("--in", in_path)->required();
  review_init->add_option("--store", store_path)->required();
  review_init->add_option("--types", types_arg, "Comma-separated entity types (default: from --config or spans)");
  auto* review_serve = review_cmd->add_subcommand("serve", "Serve the review HTTP API");
  review_serve->add_option("--store", store_path)->required();
  review_serve->add_option("--bind", bind);
  review_serve->add_option("--static", static_dir, "Directory of the built review UI");
  auto* review_compact = review_cmd->add_subcommand("compact", "Rewrite the journal as one snapshot per record");
  review_compact->add_option("--store", store_path)->required();
  auto* review_export = review_cmd->add_subcommand("export", "Write ACCEPTED and CORRECTED sentences");
  review_export->add_option("--store", store_path)->required();
  review_export->add_option("--out", out)->required();

  // export / stats
  auto* export_cmd = app.add_subcommand("export", "BIO conversion, split and CoNLL export");
  std::string ratios_arg = "0.8,0.1,0.1", out_dir, stratify = "none", format = "table";
  std::uint64_t seed = 42;
  export_cmd->add_option("--in", in_path)->required();
  export_cmd->add_option("--ratios", ratios_arg);
  export_cmd->add_option("--seed", seed);
  export_cmd->add_option("--stratify-by", stratify)->check(CLI::IsMember({"none", "source"}));
  export_cmd->add_option("--out-dir", out_dir)->required();
  auto* stats_cmd = app.add_subcommand("stats", "Entity statistics per type and source");
  stats_cmd->add_option("--in", in_path)->required();
  stats_cmd->add_option("--format", format)->check(CLI::IsMember({"table", "json"}));

  // quality
  auto* agreement_cmd = app.add_subcommand("agreement", "Cohen's and Fleiss' kappa between annotators");
  std::vector<std::string> golds;
  std::string unit = "token", agreement_format = "json";
  agreement_cmd->add_option("--gold", golds, "Annotated JSONL per annotator (repeatable)")->required();
  agreement_cmd->add_option("--unit", unit)->check(CLI::IsMember({"token", "span"}));
  agreement_cmd->add_option("--format", agreement_format, "json|table")->check(CLI::IsMember({"table", "json"}));
  std::string gold_path, pred_path;
  auto* eval_cmd = app.add_subcommand("eval", "Exact-match span precision, recall and F1");
  eval_cmd->add_option("--gold", gold_path)->required();
  eval_cmd->add_option("--pred", pred_path)->required();
  eval_cmd->add_option("--format", format)->check(CLI::IsMember({"table", "json"}));

  // pipeline
  auto* run_cmd = app.add_subcommand("run", "Run every stage up to review-store initialization");
  auto* finalize_cmd = app.add_subcommand("finalize", "Export the verified dataset");
  bool auto_accept = false;
  finalize_cmd->add_flag("--auto-accept", auto_accept, "Treat PENDING sentences as accepted");
  auto* validate_cmd = app.add_subcommand("validate", "Check a configuration without running anything");
  std::string validate_path;
  validate_cmd->add_option("path", validate_path, "Configuration file (default: --config)");

  for (auto* sub : {kg_cmd, dict_cmd, corpus_cmd, annotate_cmd, review_cmd, export_cmd, stats_cmd, agreement_cmd,
                    eval_cmd, run_cmd, finalize_cmd, validate_cmd})
    sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // --help exits 0; usage errors share exit status 2 with config errors.
    return app.exit(e) == 0 ? 0 : 2;
  }

  auto logger = spdlog::stderr_color_mt("rapidner");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("%^%l%$: %v");
  spdlog::set_level(spdlog::level::from_str(g.log_level));

  try {
    if (kg_extract->parsed()) {
      check_clobber(out, g);
      auto rels = kg::parse_property_list(relations);
      kg::ItemId topic_item = 0;
      if (topic_id) {
        topic_item = *topic_id;
      } else {
        if (topic.empty() || items_path.empty()) throw InvalidArgument("give --topic-id, or --topic with --items");
        topic_item = kg::resolve_topic(kg::load_items(items_path, g.mode()), topic);
      }
      auto store = kg::load_statements(statements, kg::RelationFilter::of(rels), g.mode());
      log_report_warnings(store.report.warnings);
      auto graph = kg::extract_subgraph(store, topic_item, rels);
      write_output(out, nlohmann::json(graph).dump() + "\n");
      spdlog::info("topic {}: {} heads from {} kept triples", topic_item, graph.total_heads(), store.report.kept);
    } else if (dict_build->parsed()) {
      check_clobber(out, g);
      std::ifstream in(subgraph, std::ios::binary);
      if (!in) throw FileNotReadable(subgraph);
      auto graph = nlohmann::json::parse(in).get<kg::SubGraph>();
      gazetteer::BuildReport report;
      auto d = gazetteer::build_dictionary(graph, kg::load_items(items_path, g.mode()),
                                           make_entity_type(type_name, display), &report);
      log_report_warnings(report.warnings);
      write_output(out, gazetteer::to_json(d).dump(1) + "\n");
      spdlog::info("{} entries ({} unresolved heads, {} duplicates)", d.size(), report.unresolved, report.duplicates);
    } else if (dict_union->parsed()) {
      check_clobber(out, g);
      auto a = gazetteer::load_dictionary(dict_a);
      auto b = gazetteer::load_dictionary(dict_b);
      auto type = type_name.empty() ? a.entity_type() : make_entity_type(type_name);
      auto d = gazetteer::unite(a, b, type);
      write_output(out, gazetteer::to_json(d).dump(1) + "\n");
      spdlog::info("{} entries", d.size());
    } else if (dict_subtract->parsed()) {
      check_clobber(out, g);
      auto d = gazetteer::subtract(gazetteer::load_dictionary(dict_a), gazetteer::load_dictionary(dict_b));
      write_output(out, gazetteer::to_json(d).dump(1) + "\n");
      spdlog::info("{} entries", d.size());
    } else if (dict_augment->parsed()) {
      check_clobber(out, g);
      gazetteer::BuildReport report;
      auto d = gazetteer::augment_from_list(gazetteer::load_dictionary(dict_a), list_path, &report);
      log_report_warnings(report.warnings);
      write_output(out, gazetteer::to_json(d).dump(1) + "\n");
      spdlog::info("{} entries ({} added)", d.size(), report.added);
    } else if (corpus_ingest->parsed()) {
      check_clobber(out, g);
      std::vector<RawDocument> docs;
      for (const auto& p : inputs)
        for (auto& d : read_jsonl<RawDocument>(p)) docs.push_back(std::move(d));
      corpus::Ingestor ingestor(caps, abbreviations.empty() ? corpus::default_abbreviations()
                                                            : corpus::load_abbreviations(abbreviations));
      auto sentences = ingestor.ingest(docs, g.threads);
      log_report_warnings(ingestor.report().warnings);
      write_output(out, jsonl(sentences));
      spdlog::info("{} sentences from {} documents", sentences.size(), docs.size());
    } else if (annotate_cmd->parsed()) {
      check_clobber(out, g);
      std::vector<gazetteer::Dictionary> dicts;
      for (const auto& p : split_list(dicts_arg)) dicts.push_back(gazetteer::load_dictionary(p));
      auto priority = split_list(priority_arg);
      if (priority.empty())
        for (const auto& d : dicts) priority.push_back(d.entity_type().name);
      auto m = matcher::Matcher::compile(dicts, priority, {case_sensitive});
      auto annotated = m.annotate_all(read_jsonl<Sentence>(in_path), g.threads);
      write_output(out, jsonl(annotated));
      if (!em_markup.empty()) {
        std::string markup;
        for (const auto& a : annotated) markup += matcher::to_em_markup(a) + "\n";
        write_output(em_markup, markup);
      }
      spdlog::info("annotated {} sentences with {} patterns", annotated.size(), m.pattern_count());
    } else if (review_init->parsed()) {
      auto annotated = read_jsonl<AnnotatedSentence>(in_path);
      std::vector<EntityType> types;
      if (!types_arg.empty()) {
        for (const auto& t : split_list(types_arg)) types.push_back(make_entity_type(t));
      } else if (!g.config.empty()) {
        types = require_config(g).entity_types();
      } else {
        std::set<std::string> seen;
        for (const auto& a : annotated)
          for (const auto& s : a.spans)
            if (seen.insert(s.type).second) types.push_back(make_entity_type(s.type));
      }
      auto store = review::ReviewStore::create(store_path, annotated, types, g.force);
      spdlog::info("store {} initialized with {} sentences", store_path, store.size());
    } else if (review_serve->parsed()) {
      auto store = review::ReviewStore::open(store_path);
      std::optional<fs::path> ui;
      if (!static_dir.empty()) ui = static_dir;
      else if (fs::is_directory(fs::path(store_path).parent_path() / "ui")) ui = fs::path(store_path).parent_path() / "ui";
      serve_blocking(store, bind, ui);
    } else if (review_compact->parsed()) {
      auto store = review::ReviewStore::open(store_path);
      store.compact();
      spdlog::info("compacted {} records", store.size());
    } else if (review_export->parsed()) {
      check_clobber(out, g);
      auto store = review::ReviewStore::open(store_path);
      auto verified = store.export_verified();
      write_output(out, jsonl(verified));
      spdlog::info("exported {} verified sentences", verified.size());
    } else if (export_cmd->parsed()) {
      auto annotated = read_jsonl<AnnotatedSentence>(in_path);
      std::vector<dataset::TaggedSentence> tagged;
      for (const auto& a : annotated) tagged.push_back(dataset::spans_to_bio(a));
      auto split = dataset::split_dataset(tagged, dataset::parse_ratios(ratios_arg), seed,
                                          stratify == "source" ? dataset::Stratify::kSource : dataset::Stratify::kNone);
      dataset::export_conll(split, out_dir);
      spdlog::info("train/dev/test = {}/{}/{}", split.train.size(), split.dev.size(), split.test.size());
    } else if (stats_cmd->parsed()) {
      std::vector<dataset::TaggedSentence> tagged;
      for (const auto& a : read_jsonl<AnnotatedSentence>(in_path)) tagged.push_back(dataset::spans_to_bio(a));
      auto stats = dataset::compute_stats(tagged);
      std::cout << (format == "json" ? dataset::to_json(stats).dump(2) + "\n" : dataset::to_table(stats));
    } else if (agreement_cmd->parsed()) {
      std::vector<std::pair<std::string, std::vector<AnnotatedSentence>>> annotators;
      // Annotators are named after their file stems; repeated stems get a
      // numeric suffix so every pair is reported.
      std::map<std::string, int> seen;
      for (const auto& p : golds) {
        std::string name = fs::path(p).stem().string();
        if (int n = ++seen[name]; n > 1) name += "-" + std::to_string(n);
        annotators.emplace_back(name, read_jsonl<AnnotatedSentence>(p));
      }
      auto seqs = quality::label_sequences(annotators, unit == "span" ? quality::Unit::kSpan : quality::Unit::kToken);
      auto report = quality::agreement(seqs);
      if (agreement_format == "table") {
        for (const auto& [pair, k] : report.pairwise)
          if (pair.first < pair.second) std::cout << pair.first << " vs " << pair.second << "\t" << percent(k) << "\n";
        std::cout << "Fleiss\t" << percent(report.fleiss) << "\n";
      } else {
        auto j = quality::to_json(report);
        j["unit"] = unit;
        std::cout << j.dump(2) << "\n";
      }
    } else if (eval_cmd->parsed()) {
      auto report = quality::span_prf(read_jsonl<AnnotatedSentence>(gold_path), read_jsonl<AnnotatedSentence>(pred_path));
      std::cout << (format == "json" ? quality::to_json(report).dump(2) + "\n" : prf_table(report));
    } else if (run_cmd->parsed()) {
      auto cfg = require_config(g);
      pipeline::Pipeline p(cfg, g.config, run_options(g));
      p.run();
      std::cout << "review store ready; start the review server with:\n  rapidner review serve --store "
                << p.layout().journal().string() << " --bind 127.0.0.1:8686\n"
                << "then export with:\n  rapidner --config " << g.config << " finalize\n";
    } else if (finalize_cmd->parsed()) {
      auto cfg = require_config(g);
      pipeline::Pipeline p(cfg, g.config, run_options(g));
      p.finalize(auto_accept);
      std::cout << "dataset written to " << p.layout().dataset().string() << "\n";
    } else if (validate_cmd->parsed()) {
      std::string path = validate_path.empty() ? g.config : validate_path;
      if (path.empty()) throw InvalidArgument("give a configuration path or --config");
      auto report = pipeline::validate_config(path);
      if (report.ok()) {
        std::cout << path << ": ok\n";
        return 0;
      }
      for (const auto& d : report.diagnostics) std::cout << path << ": " << d.str() << "\n";
      return 2;
    }
  } catch (const ConfigError& e) {
    for (const auto& d : e.diagnostics()) spdlog::error("{}", d);
    return 2;
  } catch (const Error& e) {
    spdlog::error("{}: {}", e.code(), e.what());
    return 1;
  } catch (const nlohmann::json::exception& e) {
    spdlog::error("SchemaError: {}", e.what());
    return 1;
  } catch (const fs::filesystem_error& e) {
    spdlog::error("IoError: {}", e.what());
    return 1;
  }
  return 0;
}
