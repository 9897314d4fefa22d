#pragma once

// Deterministic discrete-event replay of a schedule on the simulated grid.
// Virtual time only: event times are copied from the schedule, stub
// executors produce the task outputs in dependency order.

#include <cmath>
#include <cstdint>
#include <functional>
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
#include "gridstealth/resolver.hpp"
#include "gridstealth/schedule.hpp"
#include "gridstealth/util.hpp"

namespace gridstealth::gridsim {

using components::Kind;

// Completions sort ahead of starts at equal times, so a dependent task
// starting at its producer's finish time sees the producer's outputs.
enum class EventKind { task_end, transfer_end, transfer_start, task_start, task_failed };

inline const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::task_start: return "task-start";
    case EventKind::task_end: return "task-end";
    case EventKind::transfer_start: return "transfer-start";
    case EventKind::transfer_end: return "transfer-end";
    case EventKind::task_failed: return "task-failed";
  }
  return "task-failed";
}

struct Event {
  double time = 0;
  EventKind kind = EventKind::task_start;
  std::string subject;  // task id or dataset id
  std::string node;     // node id, "from->to" for transfers

  bool operator==(const Event&) const = default;
  bool operator<(const Event& o) const {
    return std::tie(time, kind, subject, node) < std::tie(o.time, o.kind, o.subject, o.node);
  }
};

// ---------------------------------------------------------------------------
// Executors

using Outputs = std::map<std::string, Artifact>;

struct TaskContext {
  const gasl::TaskDecl& task;  // dynamic references already grounded
  const components::ComponentDescriptor& descriptor;
  std::map<std::string, Artifact> inputs;  // port -> artifact

  const Artifact& input(const std::string& port) const {
    auto it = inputs.find(port);
    if (it == inputs.end()) throw Error("missing-input", task.id + "." + port);
    return it->second;
  }

  // First input whose port name starts with `prefix`.
  const Artifact& first_input(std::string_view prefix) const {
    for (const auto& [port, a] : inputs)
      if (starts_with(port, prefix)) return a;
    throw Error("missing-input", task.id + "." + std::string(prefix));
  }

  const std::string& output_port() const { return descriptor.outputs.front().name; }
  const PortType& output_type() const { return descriptor.outputs.front().type; }
};

using StubFunction = std::function<Outputs(const TaskContext&)>;

class StubRegistry {
 public:
  // Re-registration replaces the previous executor.
  void add(Kind kind, StubFunction fn) { stubs_[kind] = std::move(fn); }
  const StubFunction* find(Kind kind) const {
    auto it = stubs_.find(kind);
    return it == stubs_.end() ? nullptr : &it->second;
  }
  bool contains(Kind kind) const { return stubs_.count(kind) != 0; }

 private:
  std::map<Kind, StubFunction> stubs_;
};

inline StubRegistry register_stub(StubRegistry registry, Kind kind, StubFunction fn) {
  registry.add(kind, std::move(fn));
  return registry;
}

// Source data: concrete datasets by location plus in-process providers for
// stub: URIs.
class DatasetStore {
 public:
  void put(Artifact artifact) {
    auto id = artifact.id;
    datasets_[id] = std::move(artifact);
  }
  void put(const std::string& location, Artifact artifact) { datasets_[location] = std::move(artifact); }
  void provide(const std::string& location, std::function<Artifact()> provider) {
    providers_[location] = std::move(provider);
  }

  std::optional<Artifact> fetch(const std::string& location) const {
    if (auto it = datasets_.find(location); it != datasets_.end()) return it->second;
    if (auto it = providers_.find(location); it != providers_.end()) return it->second();
    return std::nullopt;
  }

 private:
  std::map<std::string, Artifact> datasets_;
  std::map<std::string, std::function<Artifact()>> providers_;
};

// ---------------------------------------------------------------------------
// Reference stub behaviours

// Uncompressed 16-bit mono audio at 16 kHz.
inline constexpr double kPcm16BytesPerSecond = 32000.0;

inline double audio_seconds(const Artifact& audio) {
  return audio.size_mb * static_cast<double>(components::kBytesPerMB) / kPcm16BytesPerSecond;
}

// Label of the i-th ASR token on a signal: tok<i>-<fnv1a32("signal:i") mod 997>.
inline std::string asr_token_label(const std::string& signal, std::uint64_t i) {
  auto h = fnv1a32(signal + ":" + std::to_string(i)) % 997u;
  return "tok" + std::to_string(i) + "-" + std::to_string(h);
}

namespace detail {

// Graph of consecutive arcs [bounds[k], bounds[k+1]] built without the
// per-arc anchor search of add_arc.
inline annotation::AnnotationGraph sequence_graph(const std::string& signal, double extent,
                                                  const std::vector<double>& bounds,
                                                  const std::vector<std::string>& labels,
                                                  const std::string& layer) {
  annotation::AnnotationGraph g;
  g.signals[signal] = annotation::Signal{signal, annotation::Axis::time, extent};
  std::vector<std::string> ids;
  for (double b : bounds) {
    auto id = annotation::anchor_id(signal, b);
    if (!g.anchors.count(id)) g.anchors[id] = annotation::Anchor{id, signal, b};
    ids.push_back(id);
  }
  for (std::size_t k = 0; k < labels.size(); ++k)
    g.arcs.push_back(annotation::Arc{ids[k], ids[k + 1], labels[k], layer, {}});
  return g;
}

// A zero-length interval sorts its end ahead of its start; lift the start
// to just before the end.
inline void starts_before_ends(std::vector<Event>& events) {
  auto opening = [](EventKind k) {
    return k == EventKind::task_end ? EventKind::task_start : EventKind::transfer_start;
  };
  std::set<std::pair<EventKind, std::string>> open;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& ev = events[i];
    if (ev.kind == EventKind::task_start || ev.kind == EventKind::transfer_start) {
      open.emplace(ev.kind, ev.subject + "@" + ev.node);
      continue;
    }
    if (ev.kind == EventKind::task_failed) continue;
    auto want = opening(ev.kind);
    if (open.count({want, ev.subject + "@" + ev.node})) continue;
    for (std::size_t j = i + 1; j < events.size(); ++j)
      if (events[j].kind == want && events[j].subject == ev.subject && events[j].node == ev.node) {
        auto start = events[j];
        events.erase(events.begin() + static_cast<std::ptrdiff_t>(j));
        events.insert(events.begin() + static_cast<std::ptrdiff_t>(i), start);
        open.emplace(want, start.subject + "@" + start.node);
        ++i;  // past the end event, now one slot later
        break;
      }
  }
}

inline Artifact graph_artifact(const TaskContext& ctx, const std::string& id,
                               annotation::AnnotationGraph graph) {
  Artifact out;
  out.id = id;
  out.type = ctx.output_type();
  if (const auto* decl = ctx.task.output(ctx.output_port()); decl && decl->size_mb)
    out.size_mb = *decl->size_mb;
  out.graph = std::move(graph);
  return out;
}

}  // namespace detail

// One token arc per whole second of audio.
inline Outputs asr_stub(const TaskContext& ctx) {
  const auto& audio = ctx.first_input("audio");
  double extent = audio_seconds(audio);
  auto n = static_cast<std::uint64_t>(std::floor(extent));
  std::vector<double> bounds;
  std::vector<std::string> labels;
  for (std::uint64_t i = 0; i <= n; ++i) bounds.push_back(static_cast<double>(i));
  for (std::uint64_t i = 0; i < n; ++i) labels.push_back(asr_token_label(audio.id, i));
  return {{ctx.output_port(),
           detail::graph_artifact(ctx, audio.id, detail::sequence_graph(audio.id, extent, bounds, labels, "asr"))}};
}

// Transcript tokens spread evenly over the audio extent.
inline Outputs alignment_stub(const TaskContext& ctx) {
  const auto& audio = ctx.first_input("audio");
  const auto& transcript = ctx.first_input("transcript");
  double extent = audio_seconds(audio);
  std::vector<std::string> tokens;
  std::istringstream in(transcript.text);
  for (std::string tok; in >> tok;) tokens.push_back(tok);
  std::vector<double> bounds;
  for (std::size_t j = 0; j <= tokens.size(); ++j)
    bounds.push_back(tokens.empty() ? 0 : extent * static_cast<double>(j) / static_cast<double>(tokens.size()));
  if (tokens.empty()) bounds.clear();
  return {{ctx.output_port(), detail::graph_artifact(
                                  ctx, audio.id,
                                  detail::sequence_graph(audio.id, extent, bounds, tokens, "alignment"))}};
}

// Retags the data with the converter's output type; content is copied.
inline Outputs conversion_stub(const TaskContext& ctx) {
  Artifact out = ctx.inputs.begin()->second;
  out.type = ctx.output_type();
  return {{ctx.output_port(), std::move(out)}};
}

// Splits the input into chunk<i> outputs following plan_packaging; the
// chunk size in bytes comes from the task parameter "chunk-bytes".
inline Outputs packager_stub(const TaskContext& ctx) {
  const auto& source = ctx.inputs.begin()->second;
  const auto* param = ctx.task.param("chunk-bytes");
  if (!param) throw Error("missing-parameter", ctx.task.id + ".chunk-bytes");
  auto chunk = parse_non_negative(*param);
  if (!chunk) throw Error("invalid-number", *param, "chunk-bytes of " + ctx.task.id);
  auto total = static_cast<std::uint64_t>(
      std::llround(source.size_mb * static_cast<double>(components::kBytesPerMB)));
  std::string family = ctx.output_port();
  if (!family.empty() && family.back() == '*') family.pop_back();
  Outputs out;
  for (const auto& c : components::plan_packaging(total, static_cast<std::uint64_t>(*chunk))) {
    Artifact a;
    a.id = source.id + "/chunk" + std::to_string(c.index);
    a.type = ctx.output_type();
    a.size_mb = static_cast<double>(c.length) / static_cast<double>(components::kBytesPerMB);
    a.text = "offset=" + std::to_string(c.offset) + ";length=" + std::to_string(c.length);
    out[family + std::to_string(c.index)] = std::move(a);
  }
  return out;
}

// Collates every input graph into one.
inline Outputs annotation_server_stub(const TaskContext& ctx) {
  annotation::AnnotationGraph merged;
  for (const auto& [port, a] : ctx.inputs)
    if (a.graph) merged = annotation::merge(merged, *a.graph);
  return {{ctx.output_port(), detail::graph_artifact(ctx, ctx.task.id, std::move(merged))}};
}

// Adds a "pos" layer with label X over every existing arc.
inline Outputs text_annotation_stub(const TaskContext& ctx) {
  const Artifact* source = nullptr;
  for (const auto& [port, a] : ctx.inputs)
    if (a.graph) {
      source = &a;
      break;
    }
  if (!source) throw Error("missing-input", ctx.task.id + ".graph");
  auto graph = *source->graph;
  auto count = graph.arcs.size();
  for (std::size_t i = 0; i < count; ++i) {
    if (graph.arcs[i].layer == "pos") continue;
    auto arc = graph.arcs[i];
    graph.arcs.push_back(annotation::Arc{arc.start, arc.end, "X", "pos", {}});
  }
  return {{ctx.output_port(), detail::graph_artifact(ctx, ctx.task.id, std::move(graph))}};
}

inline StubRegistry default_registry() {
  StubRegistry r;
  r.add(Kind::asr, asr_stub);
  r.add(Kind::alignment, alignment_stub);
  r.add(Kind::conversion, conversion_stub);
  r.add(Kind::packager, packager_stub);
  r.add(Kind::annotation_server, annotation_server_stub);
  r.add(Kind::text_annotation, text_annotation_stub);
  return r;
}

// ---------------------------------------------------------------------------
// Replay

struct RunResult {
  std::vector<Event> trace;
  std::map<std::string, Outputs> outputs;  // task -> port -> artifact
  std::optional<Diagnostic> failure;

  bool ok() const { return !failure; }
};

// Everything a task reads, assembled from the store and upstream outputs.
inline TaskContext task_context(const gasl::AppSpec& spec, const gasl::TaskDecl& grounded,
                                const components::ComponentDescriptor& descriptor,
                                const DatasetStore& store,
                                const std::map<std::string, Outputs>& produced) {
  TaskContext ctx{grounded, descriptor, {}};
  const auto* original = spec.find_task(grounded.id);
  for (std::size_t i = 0; i < grounded.inputs.size(); ++i) {
    const auto& in = grounded.inputs[i];
    // A location that was a single ${task.port} reference reads that output.
    auto refs = gasl::references(original->inputs[i].location);
    if (refs.size() == 1 && original->inputs[i].location == "${" + refs[0] + "}") {
      if (auto ref = gasl::dynamic_reference(spec, refs[0])) {
        auto t = produced.find(ref->task);
        if (t == produced.end() || !t->second.count(ref->port))
          throw Error("missing-input", grounded.id + "." + in.port);
        ctx.inputs[in.port] = t->second.at(ref->port);
        continue;
      }
    }
    auto a = store.fetch(in.location);
    if (!a) throw Error("unknown-dataset", in.location);
    if (in.type) a->type = *in.type;
    ctx.inputs[in.port] = std::move(*a);
  }
  for (const auto& e : spec.edges) {
    if (e.to.task != grounded.id) continue;
    auto t = produced.find(e.from.task);
    if (t == produced.end() || !t->second.count(e.from.port))
      throw Error("missing-input", e.to.to_string(), "no output " + e.from.to_string());
    ctx.inputs[e.to.port] = t->second.at(e.from.port);
  }
  return ctx;
}

// Runs a single task's executor against already produced upstream outputs.
inline Outputs execute_task(const gasl::AppSpec& spec, const components::ComponentCatalog& catalog,
                            const StubRegistry& registry, const DatasetStore& store,
                            const std::map<std::string, Outputs>& produced,
                            const gasl::DynamicBindings& bindings, const std::string& task_id) {
  const auto* decl = spec.find_task(task_id);
  if (!decl) throw Error("unknown-task", task_id);
  const auto* d = resolver::resolve_component(*decl, catalog);
  if (!d) throw Error("no-component", task_id);
  const auto* stub = registry.find(d->kind);
  if (!stub) throw Error("no-executor", components::to_string(d->kind));
  auto grounded = bindings.ground(*decl);
  auto ctx = task_context(spec, grounded, *d, store, produced);
  return (*stub)(ctx);
}

inline std::string bound_value(const Artifact& a) { return a.text.empty() ? a.id : a.text; }

// Validates the schedule, then replays it. Hard errors (invalid schedule,
// missing executor, unknown dataset) throw before any event; a failing
// executor stops the replay with a task-failed event and a partial trace.
inline RunResult run(const gasl::AppSpec& spec, const components::ComponentCatalog& catalog,
                     const broker::Schedule& schedule, const broker::GridTopology& topology,
                     const StubRegistry& registry, const DatasetStore& store) {
  auto graph = broker::build_task_graph(spec, catalog, topology);
  if (auto errors = broker::validate_schedule(schedule, graph, topology); !errors.empty())
    throw Error(errors);
  for (const auto& t : graph.tasks) {
    if (!registry.contains(t.kind)) throw Error("no-executor", components::to_string(t.kind), "task " + t.id);
    for (const auto& in : t.inputs)
      if (in.producer.empty() && !store.fetch(in.dataset)) throw Error("unknown-dataset", in.dataset);
  }

  std::vector<Event> events;
  for (const auto& [task, times] : schedule.times) {
    const auto& node = schedule.placement.at(task);
    events.push_back({times.start, EventKind::task_start, task, node});
    events.push_back({times.finish, EventKind::task_end, task, node});
  }
  for (const auto& tr : schedule.transfers) {
    events.push_back({tr.start, EventKind::transfer_start, tr.dataset, tr.from + "->" + tr.to});
    events.push_back({tr.finish, EventKind::transfer_end, tr.dataset, tr.from + "->" + tr.to});
  }
  std::sort(events.begin(), events.end());
  detail::starts_before_ends(events);

  RunResult result;
  gasl::DynamicBindings bindings(spec);
  std::map<std::string, Outputs> pending;  // computed at start, published at end
  for (const auto& ev : events) {
    if (ev.kind == EventKind::task_start) {
      try {
        pending[ev.subject] =
            execute_task(spec, catalog, registry, store, result.outputs, bindings, ev.subject);
      } catch (const std::exception& e) {
        result.trace.push_back(ev);
        result.trace.push_back({ev.time, EventKind::task_failed, ev.subject, ev.node});
        result.failure = Diagnostic{"task-failed", ev.subject, e.what(), 0};
        return result;
      }
    } else if (ev.kind == EventKind::task_end) {
      auto outputs = std::move(pending[ev.subject]);
      pending.erase(ev.subject);
      std::map<std::string, std::string> values;
      auto declared = gasl::declared_outputs(spec, ev.subject);
      for (const auto& [port, a] : outputs)
        if (declared.count(port)) values[port] = bound_value(a);
      bindings.bind(ev.subject, values);
      result.outputs[ev.subject] = std::move(outputs);
    }
    result.trace.push_back(ev);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Trace file: one JSON object per line.

inline std::string to_jsonl(const std::vector<Event>& trace) {
  std::string out;
  for (const auto& ev : trace) {
    nlohmann::ordered_json j{{"t", ev.time}, {"kind", to_string(ev.kind)}, {"subject", ev.subject},
                             {"node", ev.node}};
    out += j.dump() + "\n";
  }
  return out;
}

// Source datasets for a spec synthesised from the topology: one artifact per
// hosted location the spec reads, sized as hosted and typed as declared.
inline DatasetStore synthesize_inputs(const gasl::AppSpec& spec, const broker::GridTopology& topology) {
  DatasetStore store;
  for (const auto& t : spec.tasks)
    for (const auto& in : t.inputs) {
      if (!gasl::references(in.location).empty() || broker::is_stub_location(in.location)) continue;
      Artifact a;
      a.id = in.location;
      a.type = in.type.value_or(PortType{"application/octet-stream", "none", "none"});
      a.size_mb = in.size_mb;
      if (auto home = topology.home_of(in.location))
        a.size_mb = topology.node(*home)->datasets.at(in.location);
      store.put(std::move(a));
    }
  return store;
}

}  // namespace gridstealth::gridsim
