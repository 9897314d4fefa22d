#pragma once

// The gridstealth command line. JSON on stdout, diagnostics on stderr.
// Exit 0 on success, 1 on validation or report findings, 2 on hard errors.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gridstealth/annotation.hpp"
#include "gridstealth/apps.hpp"
#include "gridstealth/broker.hpp"
#include "gridstealth/components.hpp"
#include "gridstealth/error.hpp"
#include "gridstealth/gasl.hpp"
#include "gridstealth/gridsim.hpp"
#include "gridstealth/metadata.hpp"
#include "gridstealth/resolver.hpp"
#include "gridstealth/schedule.hpp"
#include "gridstealth/xml.hpp"

namespace gridstealth::cli {

inline constexpr int kOk = 0;
inline constexpr int kFindings = 1;
inline constexpr int kHardError = 2;

using json = nlohmann::ordered_json;

namespace detail {

inline json diagnostics_json(const Diagnostics& diags) {
  json out = json::array();
  for (const auto& d : diags) {
    json j{{"code", d.code}, {"subject", d.subject}, {"message", d.message}};
    if (d.line) j["line"] = d.line;
    out.push_back(j);
  }
  return out;
}

inline void print_diagnostics(std::ostream& err, const Diagnostics& diags) {
  for (const auto& d : diags) err << d.to_string() << "\n";
}

inline void emit(std::ostream& out, const json& j) { out << j.dump(2) << "\n"; }

// --catalog, else $GASL_CATALOG, else the stock catalog.
inline components::ComponentCatalog catalog_from(const std::string& path) {
  if (!path.empty()) return components::load_catalog(path);
  if (const char* env = std::getenv("GASL_CATALOG"); env && *env) return components::load_catalog(env);
  return apps::default_catalog();
}

inline std::map<std::string, std::string> bindings_from(const std::vector<std::string>& params) {
  std::map<std::string, std::string> out;
  for (const auto& p : params) {
    auto eq = p.find('=');
    if (eq == std::string::npos) throw Error("invalid-binding", p, "expected name=value");
    out[p.substr(0, eq)] = p.substr(eq + 1);
  }
  return out;
}

// Loads and validates a spec; findings are reported and signalled by nullopt.
inline std::optional<gasl::AppSpec> load_spec(const std::string& path, std::ostream& out, std::ostream& err) {
  auto result = gasl::parse(xml::read_file(path));
  if (!result.ok()) {
    print_diagnostics(err, result.errors);
    emit(out, json{{"errors", diagnostics_json(result.errors)}});
    return std::nullopt;
  }
  return result.spec;
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("io-error", path, "cannot write");
  f << text;
}

struct Prepared {
  gasl::AppSpec spec;
  components::ComponentCatalog catalog;
  broker::GridTopology topology;
};

inline Prepared prepare(const gasl::AppSpec& spec, const std::string& catalog_path,
                        const std::string& topology_path, const std::vector<std::string>& params) {
  auto catalog = catalog_from(catalog_path);
  auto resolved = resolver::resolve(spec, catalog);
  auto grounded = gasl::substitute_static(std::move(resolved), bindings_from(params));
  return {std::move(grounded), std::move(catalog), broker::load_topology(topology_path)};
}

}  // namespace detail

inline int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Grid enablement by stealth: specify, resolve, plan and simulate annotation applications",
               "gridstealth"};
  app.require_subcommand(1);
  app.fallthrough(false);

  std::function<int()> action;
  std::string spec_path, catalog_path, topology_path, policy_text = "processor-centric", dot_path, trace_path,
                                                       out_path, since, lexicon_path, results_dir;
  std::vector<std::string> params, repos, predicates;
  bool strict = false;

  auto* validate = app.add_subcommand("validate", "Check a GASL document");
  validate->add_option("spec", spec_path, "GASL file")->required();
  validate->callback([&] {
    action = [&] {
      auto result = gasl::parse(xml::read_file(spec_path));
      if (result.ok()) return kOk;
      detail::print_diagnostics(err, result.errors);
      detail::emit(out, json{{"errors", detail::diagnostics_json(result.errors)}});
      return kFindings;
    };
  });

  auto* resolve = app.add_subcommand("resolve", "Type-check a spec against a catalog and insert converters");
  resolve->add_option("spec", spec_path, "GASL file")->required();
  resolve->add_option("--catalog", catalog_path, "Component catalog (default $GASL_CATALOG)");
  resolve->add_flag("--strict", strict, "Report only; never rewrite");
  resolve->callback([&] {
    action = [&] {
      auto spec = detail::load_spec(spec_path, out, err);
      if (!spec) return kFindings;
      auto catalog = detail::catalog_from(catalog_path);
      auto report = resolver::check(*spec, catalog);
      detail::print_diagnostics(err, report.warnings);
      if (!report.unresolved.empty() || (strict && !report.empty())) {
        detail::emit(out, resolver::to_json(report));
        return kFindings;
      }
      try {
        out << gasl::serialize(resolver::resolve(*spec, catalog));
      } catch (const Error& e) {
        if (e.code() != "no-conversion-path") throw;
        detail::print_diagnostics(err, e.diagnostics());
        auto j = resolver::to_json(report);
        j["errors"] = detail::diagnostics_json(e.diagnostics());
        detail::emit(out, j);
        return kFindings;
      }
      return kOk;
    };
  });

  auto* plan = app.add_subcommand("plan", "Place and schedule a spec on a topology");
  plan->add_option("spec", spec_path, "GASL file")->required();
  plan->add_option("--topology", topology_path, "Topology file")->required();
  plan->add_option("--policy", policy_text, "processor-centric or data-centric")
      ->check(CLI::IsMember({"processor-centric", "data-centric"}));
  plan->add_option("--catalog", catalog_path, "Component catalog (default $GASL_CATALOG)");
  plan->add_option("--param", params, "Static parameter binding name=value");
  plan->add_option("--dot", dot_path, "Write the placed task graph as DOT");
  plan->callback([&] {
    action = [&] {
      auto spec = detail::load_spec(spec_path, out, err);
      if (!spec) return kFindings;
      auto p = detail::prepare(*spec, catalog_path, topology_path, params);
      auto graph = broker::build_task_graph(p.spec, p.catalog, p.topology);
      auto schedule = broker::plan(graph, p.topology, *broker::parse_policy(policy_text));
      if (!dot_path.empty()) detail::write_text(dot_path, broker::to_dot(graph, schedule));
      auto j = broker::to_json(schedule);
      json violations = json::array();
      for (const auto& v : broker::verify_deadlines(schedule, p.spec))
        violations.push_back({{"subject", v.subject}, {"deadline", v.deadline}, {"finish", v.finish}});
      j["deadline_violations"] = violations;
      detail::emit(out, j);
      return kOk;
    };
  });

  auto* run = app.add_subcommand("run", "Plan and simulate a spec, writing the event trace");
  run->add_option("spec", spec_path, "GASL file")->required();
  run->add_option("--topology", topology_path, "Topology file")->required();
  run->add_option("--policy", policy_text, "processor-centric or data-centric")
      ->check(CLI::IsMember({"processor-centric", "data-centric"}));
  run->add_option("--catalog", catalog_path, "Component catalog (default $GASL_CATALOG)");
  run->add_option("--param", params, "Static parameter binding name=value");
  run->add_option("--lexicon", lexicon_path, "Lexicon served at stub:lexicon");
  run->add_option("--trace", trace_path, "Write the trace as JSON lines")->required();
  run->add_option("--results", results_dir, "Directory for collated graphs, one <task.port>.xml each");
  run->callback([&] {
    action = [&] {
      auto spec = detail::load_spec(spec_path, out, err);
      if (!spec) return kFindings;
      auto p = detail::prepare(*spec, catalog_path, topology_path, params);
      auto schedule = broker::plan(p.spec, p.catalog, p.topology, *broker::parse_policy(policy_text));
      auto store = apps::spr_inputs(p.spec, p.topology,
                                    lexicon_path.empty() ? apps::kDefaultLexicon : xml::read_file(lexicon_path));
      auto result = gridsim::run(p.spec, p.catalog, schedule, p.topology, apps::full_registry(), store);
      detail::write_text(trace_path, gridsim::to_jsonl(result.trace));
      auto bundle = broker::collate(p.spec, result);
      json outputs = json::object();
      for (const auto& [key, a] : bundle.entries) {
        json entry{{"id", a.id}, {"type", a.type.to_string()}, {"size", a.size_mb}};
        if (a.graph) {
          entry["arcs"] = a.graph->arcs.size();
          if (!results_dir.empty()) {
            std::filesystem::create_directories(results_dir);
            auto file = (std::filesystem::path(results_dir) / (key + ".xml")).string();
            detail::write_text(file, annotation::serialize(*a.graph));
            entry["file"] = file;
          }
        }
        outputs[key] = entry;
      }
      detail::emit(out, json{{"application", bundle.application},
                             {"makespan", broker::makespan(schedule)},
                             {"events", result.trace.size()},
                             {"outputs", outputs}});
      return kOk;
    };
  });

  auto* harvest = app.add_subcommand("harvest", "Aggregate metadata repositories into a catalog");
  harvest->add_option("repositories", repos, "Repository files")->required();
  harvest->add_option("--since", since, "Only records stamped at or after this time");
  harvest->add_option("--out", out_path, "Catalog file to write")->required();
  harvest->callback([&] {
    action = [&] {
      std::optional<metadata::Timestamp> from;
      if (!since.empty()) {
        from = metadata::parse_timestamp(since);
        if (!from) throw Error("invalid-timestamp", since);
      }
      std::vector<metadata::Repository> loaded;
      for (const auto& path : repos) loaded.push_back(metadata::read_repository(xml::parse_file(path)));
      auto result = metadata::harvest(loaded, from);
      detail::write_text(out_path, metadata::serialize_catalog(result.catalog));
      detail::print_diagnostics(err, result.skipped);
      detail::emit(out, json{{"records", result.catalog.size()},
                             {"skipped", detail::diagnostics_json(result.skipped)}});
      return result.skipped.empty() ? kOk : kFindings;
    };
  });

  auto* query = app.add_subcommand("query", "Find catalog records matching element=value predicates");
  query->add_option("--catalog", catalog_path, "Harvested catalog file")->required();
  query->add_option("predicates", predicates, "element=value");
  query->callback([&] {
    action = [&] {
      auto catalog = metadata::read_catalog(xml::parse_file(catalog_path));
      metadata::Predicate predicate;
      for (const auto& p : predicates) {
        auto eq = p.find('=');
        if (eq == std::string::npos) throw Error("invalid-predicate", p, "expected element=value");
        predicate.emplace_back(p.substr(0, eq), p.substr(eq + 1));
      }
      auto result = metadata::query_catalog(catalog, predicate);
      json records = json::array();
      for (const auto& r : result.records) {
        json elements = json::array();
        for (const auto& [k, v] : r.elements) elements.push_back({k, v});
        records.push_back({{"identifier", r.identifier},
                           {"datestamp", metadata::format_timestamp(r.datestamp)},
                           {"elements", elements}});
      }
      detail::print_diagnostics(err, result.warnings);
      detail::emit(out, records);
      return result.warnings.empty() ? kOk : kFindings;
    };
  });

  auto* describe = app.add_subcommand("describe", "Metadata record for a spec, for storage and discovery");
  describe->add_option("spec", spec_path, "GASL file")->required();
  describe->callback([&] {
    action = [&] {
      auto spec = detail::load_spec(spec_path, out, err);
      if (!spec) return kFindings;
      out << metadata::serialize_record(metadata::describe_spec(*spec));
      return kOk;
    };
  });

  double corpus_mb = 500;
  std::uint64_t chunk_bytes = 10 * components::kBytesPerMB;
  bool transcripts = false;
  std::string corpus_location = "corpus";
  auto* spr = app.add_subcommand("spr-build", "Build the spoken passage retrieval spec");
  spr->add_option("--size", corpus_mb, "Corpus size in MB")->check(CLI::NonNegativeNumber);
  spr->add_option("--chunk", chunk_bytes, "Chunk size in bytes");
  spr->add_option("--corpus", corpus_location, "Corpus dataset id");
  spr->add_flag("--transcripts", transcripts, "Align existing transcripts instead of recognizing");
  spr->callback([&] {
    action = [&] {
      out << gasl::serialize(apps::build_spr_spec({corpus_location, corpus_mb, apps::types::wav}, transcripts,
                                                  chunk_bytes));
      return kOk;
    };
  });

  std::size_t item_count = 0;
  std::string annotators_text, mode_text = "peer-partition";
  double fraction = 0.1;
  auto* collab = app.add_subcommand("collab-plan", "Assign annotation items to annotators");
  collab->add_option("--items", item_count, "Number of items (item-1 ... item-N)")->required();
  collab->add_option("--annotators", annotators_text, "Comma-separated annotator ids")->required();
  collab->add_option("--mode", mode_text, "peer-partition, supervisor-vet, dual-theory or human-machine")
      ->check(CLI::IsMember({"peer-partition", "supervisor-vet", "dual-theory", "human-machine"}));
  collab->add_option("--fraction", fraction, "Share of items annotated twice");
  collab->callback([&] {
    action = [&] {
      std::vector<std::string> items;
      for (std::size_t i = 1; i <= item_count; ++i) items.push_back("item-" + std::to_string(i));
      std::vector<std::string> annotators;
      for (const auto& a : split(annotators_text, ','))
        if (!trim(a).empty()) annotators.push_back(trim(a));
      detail::emit(out, apps::to_json(apps::plan_collaboration(items, annotators, *apps::parse_mode(mode_text),
                                                               fraction)));
      return kOk;
    };
  });

  std::string index_path, word;
  auto* passages = app.add_subcommand("passages", "Look up a word in a collated annotation graph");
  passages->add_option("--index", index_path, "Annotation graph file")->required();
  passages->add_option("--word", word, "Word to find")->required();
  passages->add_option("--lexicon", lexicon_path, "Lexicon for expansion");
  passages->callback([&] {
    action = [&] {
      auto graph = annotation::read_graph(xml::parse_file(index_path));
      apps::Lexicon lex;
      if (!lexicon_path.empty()) lex = apps::parse_lexicon(xml::read_file(lexicon_path));
      detail::emit(out, apps::to_json(apps::query_passages(graph, word, lex)));
      return kOk;
    };
  });

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n" << app.help();
    return kHardError;
  }

  try {
    return action ? action() : kHardError;
  } catch (const Error& e) {
    detail::print_diagnostics(err, e.diagnostics());
    return kHardError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kHardError;
  }
}

inline int run_command(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_command(args, out, err);
}

}  // namespace gridstealth::cli
