#pragma once

// The spoken passage retrieval and collaborative annotation applications,
// plus the lexicon and semantic-mapping behaviours and the stock catalog and
// grid they run on.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <json.hpp>

#include "gridstealth/annotation.hpp"
#include "gridstealth/artifact.hpp"
#include "gridstealth/components.hpp"
#include "gridstealth/error.hpp"
#include "gridstealth/gasl.hpp"
#include "gridstealth/gridsim.hpp"
#include "gridstealth/schedule.hpp"
#include "gridstealth/util.hpp"

namespace gridstealth::apps {

using components::ComponentDescriptor;
using components::Kind;

// Port types used by the stock components.
namespace types {
inline const PortType wav{"audio/wav", "pcm16", "none"};
inline const PortType mp3{"audio/mpeg", "mp3", "none"};
inline const PortType flac{"audio/flac", "flac", "none"};
inline const PortType sphere{"audio/x-nist-sphere", "sphere", "none"};
inline const PortType transcript{"text/plain", "utf-8", "transcript"};
inline const PortType transcript_latin1{"text/plain", "latin-1", "transcript"};
inline const PortType graph{"application/ag+xml", "utf-8", "time-aligned"};
inline const PortType index{"application/ag+xml", "utf-8", "pos"};
inline const PortType themed{"application/ag+xml", "utf-8", "themes"};
inline const PortType lexicon{"text/tab-separated-values", "utf-8", "lexicon"};
}  // namespace types

inline components::ComponentCatalog default_catalog() {
  components::ComponentCatalog c;
  auto add = [&](std::string id, Kind kind, std::vector<components::Port> in,
                 std::vector<components::Port> out, double speed, double memory, double coefficient) {
    c.add({std::move(id), kind, std::move(in), std::move(out), speed, memory, coefficient});
  };
  add("packager-wav", Kind::packager, {{"audio", types::wav}}, {{"chunk*", types::wav}}, 0, 64, 0.01);
  add("asr-basic", Kind::asr, {{"audio", types::wav}}, {{"graph", types::graph}}, 1, 512, 1.0);
  add("aligner", Kind::alignment, {{"audio", types::wav}, {"transcript", types::transcript}},
      {{"graph", types::graph}}, 1, 256, 0.5);
  add("ag-server", Kind::annotation_server, {{"graph*", types::graph}}, {{"graph", types::graph}}, 0, 256,
      0.1);
  add("pos-indexer", Kind::text_annotation, {{"graph", types::graph}, {"lexicon", types::lexicon}},
      {{"index", types::index}}, 0, 128, 0.1);
  add("theme-mapper", Kind::semantic_mapping, {{"graph", types::index}}, {{"graph", types::themed}}, 0, 128,
      0.1);
  add("lexicon-server", Kind::lexicon_server, {{"source", types::lexicon}}, {{"lexicon", types::lexicon}}, 0,
      64, 0.01);
  add("mp3-to-wav", Kind::conversion, {{"in", types::mp3}}, {{"out", types::wav}}, 0, 64, 0.2);
  add("wav-to-mp3", Kind::conversion, {{"in", types::wav}}, {{"out", types::mp3}}, 0, 64, 0.3);
  add("flac-to-wav", Kind::conversion, {{"in", types::flac}}, {{"out", types::wav}}, 0, 64, 0.1);
  add("sphere-to-flac", Kind::conversion, {{"in", types::sphere}}, {{"out", types::flac}}, 0, 64, 0.1);
  add("latin1-to-utf8", Kind::conversion, {{"in", types::transcript_latin1}}, {{"out", types::transcript}}, 0,
      16, 0.01);
  return c;
}

// An archive node holding the corpus and a faster compute node, 10 MB/s apart.
inline broker::GridTopology default_topology(const std::string& corpus, double corpus_mb) {
  broker::GridTopology t;
  broker::Node archive{"archive", 1, 4096, 1e6, {{corpus, corpus_mb}}};
  broker::Node compute{"compute", 4, 8192, 1e5, {}};
  t.add_node(std::move(archive));
  t.add_node(std::move(compute));
  t.add_link("archive", "compute", 10);
  return t;
}

// ---------------------------------------------------------------------------
// Lexicon

struct LexiconEntry {
  std::string pronunciation;
  std::vector<std::string> senses;
  bool operator==(const LexiconEntry&) const = default;
};

struct Lexicon {
  std::map<std::string, std::vector<LexiconEntry>> entries;  // normalized headword
  bool operator==(const Lexicon&) const = default;
};

inline std::string normalize_headword(std::string_view word) { return to_lower(trim(word)); }

// headword<TAB>pronunciation<TAB>sense;sense per line. Blank lines and lines
// starting with '#' are skipped.
inline Lexicon parse_lexicon(std::string_view text) {
  Lexicon lex;
  int line_no = 0;
  for (const auto& raw : split(text, '\n')) {
    ++line_no;
    auto line = std::string(raw);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty() || line[0] == '#') continue;
    auto fields = split(line, '\t');
    if (fields.size() < 2 || fields.size() > 3 || normalize_headword(fields[0]).empty())
      throw Error(Diagnostics{{"invalid-lexicon-line", std::to_string(line_no), line, line_no}});
    LexiconEntry e{trim(fields[1]), {}};
    if (fields.size() == 3)
      for (const auto& s : split(fields[2], ';'))
        if (!trim(s).empty()) e.senses.push_back(trim(s));
    lex.entries[normalize_headword(fields[0])].push_back(std::move(e));
  }
  return lex;
}

inline std::string serialize_lexicon(const Lexicon& lex) {
  std::string out;
  for (const auto& [head, entries] : lex.entries)
    for (const auto& e : entries) {
      out += head + "\t" + e.pronunciation + "\t";
      for (std::size_t i = 0; i < e.senses.size(); ++i) out += (i ? ";" : "") + e.senses[i];
      out += "\n";
    }
  return out;
}

inline std::vector<LexiconEntry> lexicon_lookup(const Lexicon& lex, std::string_view word) {
  auto it = lex.entries.find(normalize_headword(word));
  return it == lex.entries.end() ? std::vector<LexiconEntry>{} : it->second;
}

// ---------------------------------------------------------------------------
// Passage retrieval

struct Passage {
  std::string signal;
  double lo = 0;
  double hi = 0;
  auto operator<=>(const Passage&) const = default;
};

// The word itself plus every sense listed under its headword.
inline std::set<std::string> expand_word(std::string_view word, const Lexicon& lex) {
  std::set<std::string> out{normalize_headword(word)};
  for (const auto& e : lexicon_lookup(lex, word))
    for (const auto& s : e.senses) out.insert(normalize_headword(s));
  out.erase("");
  return out;
}

inline std::vector<Passage> query_passages(const annotation::AnnotationGraph& index, std::string_view word,
                                           const Lexicon& lex = {}) {
  auto variants = expand_word(word, lex);
  std::set<Passage> found;
  for (const auto& arc : index.arcs) {
    if (!variants.count(to_lower(arc.label))) continue;
    const auto* a = index.anchor(arc.start);
    const auto* b = index.anchor(arc.end);
    if (!a || !b) continue;
    found.insert({a->signal, a->offset, b->offset});
  }
  return {found.begin(), found.end()};
}

inline nlohmann::ordered_json to_json(const std::vector<Passage>& passages) {
  auto out = nlohmann::ordered_json::array();
  for (const auto& p : passages) out.push_back({{"signal", p.signal}, {"lo", p.lo}, {"hi", p.hi}});
  return out;
}

// ---------------------------------------------------------------------------
// Semantic mapping

using Themes = std::map<std::string, std::vector<std::string>>;

// Adds a "themes" arc, labelled with the theme name, over every arc whose
// label equals one of the theme's keywords (ignoring case).
inline annotation::AnnotationGraph map_themes(annotation::AnnotationGraph graph, const Themes& themes) {
  std::map<std::string, std::set<std::string>> keywords;
  for (const auto& [theme, words] : themes)
    for (const auto& w : words) keywords[theme].insert(to_lower(w));
  auto count = graph.arcs.size();
  for (std::size_t i = 0; i < count; ++i) {
    auto label = to_lower(graph.arcs[i].label);
    for (const auto& [theme, words] : keywords)
      if (words.count(label)) {
        auto arc = graph.arcs[i];
        graph.arcs.push_back(annotation::Arc{arc.start, arc.end, theme, "themes", {}});
      }
  }
  return graph;
}

// "weather=rain,sun;sport=goal"
inline Themes parse_themes(std::string_view text) {
  Themes out;
  for (const auto& clause : split(text, ';')) {
    if (trim(clause).empty()) continue;
    auto eq = clause.find('=');
    if (eq == std::string::npos || trim(clause.substr(0, eq)).empty())
      throw Error("invalid-themes", std::string(clause));
    auto& words = out[trim(clause.substr(0, eq))];
    for (const auto& w : split(clause.substr(eq + 1), ','))
      if (!trim(w).empty()) words.push_back(trim(w));
  }
  return out;
}

inline gridsim::Outputs semantic_mapping_stub(const gridsim::TaskContext& ctx) {
  const auto& source = ctx.first_input("graph");
  if (!source.graph) throw Error("missing-input", ctx.task.id + ".graph", "not an annotation graph");
  const auto* themes = ctx.task.param("themes");
  Artifact out = source;
  out.type = ctx.output_type();
  out.graph = map_themes(*source.graph, themes ? parse_themes(*themes) : Themes{});
  return {{ctx.output_port(), std::move(out)}};
}

// Normalizes and re-serves the lexical data it is given.
inline gridsim::Outputs lexicon_server_stub(const gridsim::TaskContext& ctx) {
  Lexicon merged;
  for (const auto& [port, a] : ctx.inputs)
    for (auto& [head, entries] : parse_lexicon(a.text).entries) {
      auto& dst = merged.entries[head];
      dst.insert(dst.end(), entries.begin(), entries.end());
    }
  Artifact out;
  out.id = ctx.task.id;
  out.type = ctx.output_type();
  out.text = serialize_lexicon(merged);
  return {{ctx.output_port(), std::move(out)}};
}

inline gridsim::StubRegistry full_registry() {
  auto r = gridsim::default_registry();
  r.add(Kind::semantic_mapping, semantic_mapping_stub);
  r.add(Kind::lexicon_server, lexicon_server_stub);
  return r;
}

// ---------------------------------------------------------------------------
// Spoken passage retrieval

struct Corpus {
  std::string location = "corpus";  // dataset id
  double size_mb = 0;
  PortType type = types::wav;
};

inline constexpr const char* kLexiconLocation = "stub:lexicon";

inline std::string transcript_location(std::size_t chunk) {
  return "stub:transcript/" + std::to_string(chunk);
}

namespace detail {

inline std::string padded(std::size_t i, std::size_t count) {
  auto s = std::to_string(i);
  auto width = std::to_string(count == 0 ? 0 : count - 1).size();
  return std::string(width > s.size() ? width - s.size() : 0, '0') + s;
}

}  // namespace detail

// packager -> one recognizer (or aligner) per chunk -> annotation server ->
// indexer, with a lexicon server feeding the indexer.
inline gasl::AppSpec build_spr_spec(const Corpus& corpus, bool has_transcripts, std::uint64_t chunk_bytes) {
  auto total = static_cast<std::uint64_t>(std::llround(corpus.size_mb * static_cast<double>(components::kBytesPerMB)));
  auto chunks = components::plan_packaging(total, chunk_bytes);
  const double mb = static_cast<double>(components::kBytesPerMB);

  gasl::AppSpec spec;
  spec.name = has_transcripts ? "spoken-passage-alignment" : "spoken-passage-retrieval";
  spec.version = "1";

  gasl::TaskDecl package;
  package.id = "package";
  package.component = {gasl::ComponentRef::By::kind, "packager"};
  package.inputs.push_back({"audio", corpus.location, corpus.type, corpus.size_mb});
  package.params.push_back({"chunk-bytes", std::to_string(chunk_bytes)});
  for (const auto& c : chunks)
    package.outputs.push_back({"chunk" + std::to_string(c.index), types::wav, static_cast<double>(c.length) / mb});
  spec.tasks.push_back(std::move(package));

  gasl::TaskDecl collate;
  collate.id = "collate";
  collate.component = {gasl::ComponentRef::By::kind, "annotation-server"};

  for (const auto& c : chunks) {
    auto n = detail::padded(c.index, chunks.size());
    gasl::TaskDecl t;
    t.id = (has_transcripts ? "align-" : "asr-") + n;
    t.component = {gasl::ComponentRef::By::kind, has_transcripts ? "alignment" : "asr"};
    if (has_transcripts) t.inputs.push_back({"transcript", transcript_location(c.index), types::transcript, 0});
    spec.edges.push_back({{"package", "chunk" + std::to_string(c.index)}, {t.id, "audio"}, 0});
    spec.edges.push_back({{t.id, "graph"}, {"collate", "graph" + n}, 0});
    spec.tasks.push_back(std::move(t));
  }
  spec.tasks.push_back(std::move(collate));

  gasl::TaskDecl lexicon;
  lexicon.id = "lexicon";
  lexicon.component = {gasl::ComponentRef::By::kind, "lexicon-server"};
  lexicon.inputs.push_back({"source", kLexiconLocation, types::lexicon, 0});
  spec.tasks.push_back(std::move(lexicon));

  gasl::TaskDecl index;
  index.id = "index";
  index.component = {gasl::ComponentRef::By::kind, "text-annotation"};
  index.outputs.push_back({"index", types::index, std::nullopt});
  spec.tasks.push_back(std::move(index));
  spec.edges.push_back({{"collate", "graph"}, {"index", "graph"}, 0});
  spec.edges.push_back({{"lexicon", "lexicon"}, {"index", "lexicon"}, 0});
  return spec;
}

inline const char* kDefaultLexicon =
    "rain\tr ey n\tprecipitation;shower\n"
    "sun\ts ah n\tsunshine\n"
    "bird\tb er d\tfowl\n";

// Source data for a built spec: the corpus as hosted, the lexicon, and
// transcripts when the spec aligns.
inline gridsim::DatasetStore spr_inputs(const gasl::AppSpec& spec, const broker::GridTopology& topology,
                                        std::string lexicon_text = kDefaultLexicon,
                                        const std::vector<std::string>& transcripts = {}) {
  auto store = gridsim::synthesize_inputs(spec, topology);
  store.put(kLexiconLocation, Artifact{kLexiconLocation, types::lexicon, 0, std::move(lexicon_text), {}});
  for (const auto& t : spec.tasks)
    for (const auto& in : t.inputs) {
      if (!starts_with(in.location, "stub:transcript/")) continue;
      auto i = static_cast<std::size_t>(std::stoul(in.location.substr(16)));
      auto text = i < transcripts.size() ? transcripts[i] : std::string("speech in chunk ") + std::to_string(i);
      store.put(in.location, Artifact{in.location, types::transcript, 0, text, {}});
    }
  return store;
}

// ---------------------------------------------------------------------------
// Collaborative annotation

enum class Mode { peer_partition, supervisor_vet, dual_theory, human_machine };

inline const char* to_string(Mode m) {
  switch (m) {
    case Mode::peer_partition: return "peer-partition";
    case Mode::supervisor_vet: return "supervisor-vet";
    case Mode::dual_theory: return "dual-theory";
    case Mode::human_machine: return "human-machine";
  }
  return "peer-partition";
}

inline std::optional<Mode> parse_mode(std::string_view text) {
  for (auto m : {Mode::peer_partition, Mode::supervisor_vet, Mode::dual_theory, Mode::human_machine})
    if (text == to_string(m)) return m;
  return std::nullopt;
}

struct CollaborationPlan {
  Mode mode = Mode::peer_partition;
  double reliability_fraction = 0;
  std::vector<std::pair<std::string, std::vector<std::string>>> assignments;  // item order

  bool operator==(const CollaborationPlan&) const = default;
};

inline std::size_t doubled_count(std::size_t items, double fraction) {
  return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(items) + 1e-9));
}

// Round-robin by item order. In peer-partition the first floor(fraction * n)
// items also go to the next annotator in rotation. The supervisor is the
// first annotator; in human-machine mode the machine is the last.
inline CollaborationPlan plan_collaboration(const std::vector<std::string>& items,
                                            const std::vector<std::string>& annotators, Mode mode,
                                            double fraction) {
  if (annotators.empty()) throw Error("no-annotators", to_string(mode));
  if (!(fraction >= 0 && fraction <= 1)) throw Error("invalid-fraction", format_number(fraction));
  CollaborationPlan plan{mode, fraction, {}};
  const auto k = annotators.size();
  const auto n = items.size();
  switch (mode) {
    case Mode::peer_partition: {
      auto doubled = doubled_count(n, fraction);
      if (doubled > 0 && k < 2) throw Error("too-few-annotators", to_string(mode), "double annotation needs two");
      for (std::size_t j = 0; j < n; ++j) {
        std::vector<std::string> who{annotators[j % k]};
        if (j < doubled) who.push_back(annotators[(j + 1) % k]);
        plan.assignments.emplace_back(items[j], std::move(who));
      }
      break;
    }
    case Mode::supervisor_vet:
    case Mode::human_machine: {
      if (k < 2) throw Error("too-few-annotators", to_string(mode));
      bool vet = mode == Mode::supervisor_vet;
      const auto& fixed = vet ? annotators.front() : annotators.back();
      std::vector<std::string> pool(annotators.begin() + (vet ? 1 : 0), annotators.end() - (vet ? 0 : 1));
      for (std::size_t j = 0; j < n; ++j) plan.assignments.push_back({items[j], {pool[j % pool.size()], fixed}});
      break;
    }
    case Mode::dual_theory:
      if (k != 2) throw Error("dual-theory-annotators", std::to_string(k), "dual-theory needs exactly two");
      for (const auto& item : items) plan.assignments.push_back({item, annotators});
      break;
  }
  return plan;
}

inline nlohmann::ordered_json to_json(const CollaborationPlan& plan) {
  nlohmann::ordered_json assignments = nlohmann::ordered_json::array();
  for (const auto& [item, who] : plan.assignments) assignments.push_back({{"item", item}, {"annotators", who}});
  return {{"mode", to_string(plan.mode)},
          {"reliability_fraction", plan.reliability_fraction},
          {"assignments", assignments}};
}

}  // namespace gridstealth::apps
