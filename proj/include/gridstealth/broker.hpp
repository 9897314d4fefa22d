#pragma once

// Placement and scheduling under the two policies, deadline checks, result
// collation, and the Broker facade that hides the grid from its callers.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "gridstealth/artifact.hpp"
#include "gridstealth/components.hpp"
#include "gridstealth/error.hpp"
#include "gridstealth/gasl.hpp"
#include "gridstealth/gridsim.hpp"
#include "gridstealth/metadata.hpp"
#include "gridstealth/resolver.hpp"
#include "gridstealth/schedule.hpp"

namespace gridstealth::broker {

namespace detail {

inline bool feasible(const Node& n, const GroundedTask& t) {
  return n.speed >= t.min_node_speed && n.memory_mb >= t.memory_mb && n.storage_mb >= t.storage_mb;
}

inline bool needs_transfer(const DatasetInput& in) { return !in.everywhere && in.size_mb > 0; }

}  // namespace detail

// List scheduling in canonical order. Each task starts when its node is free
// and its inputs are present; transfers leave the earliest-arriving source
// as soon as the data exists there, and the copy stays cached at the target.
inline Schedule plan(const TaskGraph& graph, const GridTopology& topology, Policy policy) {
  Schedule s;
  s.policy = policy;
  std::map<std::string, double> node_free;
  std::map<std::string, std::map<std::string, double>> available;  // dataset -> node -> time
  for (const auto& [id, n] : topology.nodes())
    for (const auto& [ds, size] : n.datasets) available[ds][id] = 0;

  for (const auto& task : graph.tasks) {
    const Node* chosen = nullptr;
    double best_local = -1;
    for (const auto& [id, n] : topology.nodes()) {
      if (!detail::feasible(n, task)) continue;
      if (policy == Policy::processor_centric) {
        if (!chosen || n.speed > chosen->speed) chosen = &n;
      } else {
        double local = 0;
        for (const auto& in : task.inputs)
          if (detail::needs_transfer(in) && available[in.dataset].count(id)) local += in.size_mb;
        if (local > best_local) {
          chosen = &n;
          best_local = local;
        }
      }
    }
    if (!chosen) throw Error("infeasible", task.id, "no node satisfies speed, memory and storage");

    const auto& node = chosen->id;
    double ready = node_free[node];
    for (const auto& in : task.inputs) {
      if (!in.producer.empty()) ready = std::max(ready, s.times.at(in.producer).finish);
      if (!detail::needs_transfer(in)) continue;
      auto& where = available[in.dataset];
      if (auto here = where.find(node); here != where.end()) {
        ready = std::max(ready, here->second);
        continue;
      }
      std::optional<Transfer> best;
      for (const auto& [src, t] : where) {
        auto bw = topology.bandwidth(src, node);
        if (!bw) continue;
        Transfer tr{in.dataset, src, node, t, t + in.size_mb / *bw, in.size_mb};
        if (!best || tr.finish < best->finish) best = tr;
      }
      if (!best) throw Error("unlinked-transfer", in.dataset, "cannot reach " + node + " for task " + task.id);
      where[node] = best->finish;
      ready = std::max(ready, best->finish);
      s.transfers.push_back(*best);
    }
    double finish = ready + task.work / chosen->speed;
    s.order.push_back(task.id);
    s.placement[task.id] = node;
    s.times[task.id] = {ready, finish};
    node_free[node] = finish;
    for (const auto& [ds, size] : task.outputs) available[ds][node] = finish;
  }
  return s;
}

inline Schedule plan(const gasl::AppSpec& spec, const components::ComponentCatalog& catalog,
                     const GridTopology& topology, Policy policy) {
  return plan(build_task_graph(spec, catalog, topology), topology, policy);
}

struct DeadlineViolation {
  std::string subject;  // task id, or the application name
  bool application = false;
  double deadline = 0;
  double finish = 0;
  bool operator==(const DeadlineViolation&) const = default;
};

// Finishing exactly on the deadline satisfies it.
inline std::vector<DeadlineViolation> verify_deadlines(const Schedule& schedule, const gasl::AppSpec& spec) {
  std::vector<DeadlineViolation> out;
  for (const auto& id : schedule.order) {
    const auto* t = spec.find_task(id);
    if (!t || !t->processing.deadline) continue;
    double finish = schedule.times.at(id).finish;
    if (finish > *t->processing.deadline) out.push_back({id, false, *t->processing.deadline, finish});
  }
  if (spec.deadline && makespan(schedule) > *spec.deadline)
    out.push_back({spec.name, true, *spec.deadline, makespan(schedule)});
  return out;
}

// ---------------------------------------------------------------------------
// Collation

struct ResultBundle {
  std::string application;  // spec identifier
  std::map<std::string, Artifact> entries;  // "task.port" -> artifact
  bool operator==(const ResultBundle&) const = default;
};

// Tasks nothing else depends on.
inline std::vector<std::string> sink_tasks(const gasl::AppSpec& spec) {
  std::set<std::string> feeding;
  for (const auto& [task, preds] : gasl::dependencies(spec)) feeding.insert(preds.begin(), preds.end());
  std::vector<std::string> out;
  for (const auto& t : spec.tasks)
    if (!feeding.count(t.id)) out.push_back(t.id);
  std::sort(out.begin(), out.end());
  return out;
}

inline ResultBundle collate(const gasl::AppSpec& spec, const std::map<std::string, gridsim::Outputs>& outputs) {
  ResultBundle bundle;
  bundle.application = metadata::spec_identifier(spec);
  for (const auto& sink : sink_tasks(spec)) {
    auto produced = outputs.find(sink);
    if (produced == outputs.end()) throw Error("missing-output", sink, "task produced no outputs");
    const auto* decl = spec.find_task(sink);
    if (decl->outputs.empty()) {
      for (const auto& [port, a] : produced->second) bundle.entries[sink + "." + port] = a;
      continue;
    }
    for (const auto& out : decl->outputs) {
      auto it = produced->second.find(out.port);
      if (it == produced->second.end()) throw Error("missing-output", sink + "." + out.port);
      bundle.entries[sink + "." + out.port] = it->second;
    }
  }
  return bundle;
}

// A failed run propagates as Error{"task-failed", task}.
inline ResultBundle collate(const gasl::AppSpec& spec, const gridsim::RunResult& run) {
  if (run.failure) throw Error("task-failed", run.failure->subject, run.failure->message);
  return collate(spec, run.outputs);
}

// Metadata for storing a bundle alongside the application that made it.
inline metadata::MetadataRecord describe_bundle(const gasl::AppSpec& spec, const ResultBundle& bundle,
                                                metadata::Timestamp datestamp = {}) {
  metadata::MetadataRecord r;
  r.identifier = "result:" + spec.name + "/" + spec.version;
  r.datestamp = datestamp;
  r.add("resource-class", "data-source");
  r.add("title", spec.name + " results");
  r.add("source", bundle.application);
  r.add("relation", bundle.application);
  std::set<std::string> formats;
  for (const auto& [port, a] : bundle.entries) formats.insert(a.type.to_string());
  for (const auto& f : formats) r.add("port-format", f);
  return r;
}

// ---------------------------------------------------------------------------
// Facade

// Owns the grid: callers hand over a specification and a policy and get
// collated results back. Nodes, links and placement never cross this
// interface.
class Broker {
 public:
  Broker(components::ComponentCatalog catalog, GridTopology topology, gridsim::StubRegistry registry,
         gridsim::DatasetStore store)
      : catalog_(std::move(catalog)),
        topology_(std::move(topology)),
        registry_(std::move(registry)),
        store_(std::move(store)) {
    if (auto errors = validate_topology(topology_); !errors.empty()) throw Error(errors);
  }

  ResultBundle submit(const gasl::AppSpec& spec, Policy policy,
                      const std::map<std::string, std::string>& parameters = {}) const {
    if (auto errors = gasl::validate(spec); !errors.empty()) throw Error(errors);
    auto resolved = resolver::resolve(spec, catalog_);
    auto grounded = gasl::substitute_static(std::move(resolved), parameters);
    auto schedule = plan(grounded, catalog_, topology_, policy);
    auto run = gridsim::run(grounded, catalog_, schedule, topology_, registry_, store_);
    return collate(grounded, run);
  }

  metadata::MetadataRecord describe(const gasl::AppSpec& spec, const ResultBundle& bundle) const {
    return describe_bundle(spec, bundle);
  }

 private:
  components::ComponentCatalog catalog_;
  GridTopology topology_;
  gridsim::StubRegistry registry_;
  gridsim::DatasetStore store_;
};

}  // namespace gridstealth::broker
