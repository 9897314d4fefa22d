#pragma once

// Pre-execution evaluation of an application against a component catalog:
// unresolved components and ports, incompatible port types, and rewriting
// with conversion tasks.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "gridstealth/components.hpp"
#include "gridstealth/error.hpp"
#include "gridstealth/gasl.hpp"
#include "gridstealth/metadata.hpp"

namespace gridstealth::resolver {

using components::ComponentCatalog;
using components::ComponentDescriptor;

struct Unresolved {
  std::string task;
  std::string reason;  // no-component, unknown-port, unbound-input
  std::string detail;
  bool operator==(const Unresolved&) const = default;
};

struct Incompatibility {
  std::string from;  // "task.port", or the location of a data source
  std::string to;    // "task.port"
  PortType from_type;
  PortType to_type;
  bool from_source = false;
  bool operator==(const Incompatibility&) const = default;
};

struct Report {
  std::vector<Unresolved> unresolved;
  std::vector<Incompatibility> incompatible;
  Diagnostics warnings;  // ambiguous component matches

  bool empty() const { return unresolved.empty() && incompatible.empty(); }
};

// Descriptor a task runs, or nullptr. Several matches resolve to the
// smallest descriptor id with a warning.
inline const ComponentDescriptor* resolve_component(const gasl::TaskDecl& task,
                                                    const ComponentCatalog& catalog,
                                                    Diagnostics* warnings = nullptr) {
  using By = gasl::ComponentRef::By;
  std::vector<std::string> candidates;
  switch (task.component.by) {
    case By::id:
      return catalog.find(task.component.value);
    case By::kind:
      if (auto kind = components::parse_kind(task.component.value))
        for (const auto* d : catalog.of_kind(*kind)) candidates.push_back(d->id);
      break;
    case By::query: {
      auto predicate = metadata::parse_predicate(task.component.value);
      if (!predicate) return nullptr;
      predicate->emplace_back("resource-class", "component");
      auto result = metadata::query_catalog(components::metadata_catalog(catalog), *predicate);
      for (const auto& r : result.records) candidates.push_back(r.identifier);
      break;
    }
  }
  if (candidates.empty()) return nullptr;
  std::sort(candidates.begin(), candidates.end());
  if (candidates.size() > 1 && warnings)
    warnings->push_back({"ambiguous-component", task.id,
                         std::to_string(candidates.size()) + " matches, using " + candidates[0], 0});
  return catalog.find(candidates[0]);
}

namespace detail {

// Data produced by another task at run time; its type is that task's output
// port type, not the binding's.
inline bool is_dynamic(const gasl::AppSpec& spec, const std::string& location) {
  for (const auto& name : gasl::references(location))
    if (gasl::dynamic_reference(spec, name)) return true;
  return false;
}

}  // namespace detail

inline Report check(const gasl::AppSpec& spec, const ComponentCatalog& catalog) {
  Report report;
  std::map<std::string, const ComponentDescriptor*> resolved;
  for (const auto& task : spec.tasks) {
    const auto* d = resolve_component(task, catalog, &report.warnings);
    resolved[task.id] = d;
    if (!d) {
      report.unresolved.push_back({task.id, "no-component", task.component.value});
      continue;
    }
    std::set<std::string> bound;
    for (const auto& in : task.inputs) {
      const auto* port = d->input(in.port);
      if (!port) {
        report.unresolved.push_back({task.id, "unknown-port", in.port});
        continue;
      }
      bound.insert(in.port);
      if (in.type && !detail::is_dynamic(spec, in.location) && !components::compatible(*in.type, port->type))
        report.incompatible.push_back({in.location, task.id + "." + in.port, *in.type, port->type, true});
    }
    for (const auto& e : spec.edges)
      if (e.to.task == task.id) bound.insert(e.to.port);
    for (const auto& out : task.outputs)
      if (!d->output(out.port)) report.unresolved.push_back({task.id, "unknown-port", out.port});
    for (const auto& port : d->inputs) {
      if (port.name.back() == '*') continue;
      if (!bound.count(port.name)) report.unresolved.push_back({task.id, "unbound-input", port.name});
    }
  }
  for (const auto& e : spec.edges) {
    const auto* producer = resolved[e.from.task];
    const auto* consumer = resolved[e.to.task];
    if (!producer || !consumer) continue;
    const auto* out = producer->output(e.from.port);
    const auto* in = consumer->input(e.to.port);
    if (!out) {
      if (!spec.find_task(e.from.task)->output(e.from.port))  // not already reported
        report.unresolved.push_back({e.from.task, "unknown-port", e.from.port});
      continue;
    }
    if (!in) {
      report.unresolved.push_back({e.to.task, "unknown-port", e.to.port});
      continue;
    }
    if (!components::compatible(out->type, in->type))
      report.incompatible.push_back({e.from.to_string(), e.to.to_string(), out->type, in->type, false});
  }
  return report;
}

struct Options {
  bool strict = false;  // report only; never rewrite
};

// Replaces every incompatible edge or source binding with a chain of
// conversion tasks conv-<n>, numbered in canonical order of the tasks they
// feed. Throws Error{"unresolved"} when components are missing,
// Error{"no-conversion-path"} when some types cannot be bridged, and in
// strict mode Error{"incompatible"} for any finding.
inline gasl::AppSpec resolve(gasl::AppSpec spec, const ComponentCatalog& catalog, Options options = {}) {
  auto report = check(spec, catalog);
  if (!report.unresolved.empty()) {
    Diagnostics errors;
    for (const auto& u : report.unresolved) errors.push_back({"unresolved", u.task, u.reason + " " + u.detail, 0});
    throw Error(errors);
  }
  if (report.incompatible.empty()) return spec;
  if (options.strict) {
    Diagnostics errors;
    for (const auto& i : report.incompatible)
      errors.push_back({"incompatible", i.to, i.from_type.to_string() + " -> " + i.to_type.to_string(), 0});
    throw Error(errors);
  }

  auto order = gasl::canonical_order(spec);
  std::map<std::string, std::size_t> rank;
  for (std::size_t i = 0; i < order.size(); ++i) rank[order[i]] = i;
  auto& items = report.incompatible;
  std::sort(items.begin(), items.end(), [&](const Incompatibility& a, const Incompatibility& b) {
    auto ta = *gasl::parse_port_ref(a.to);
    auto tb = *gasl::parse_port_ref(b.to);
    return std::tuple(rank[ta.task], ta.port, a.from) < std::tuple(rank[tb.task], tb.port, b.from);
  });

  std::vector<std::vector<ComponentDescriptor>> paths;
  Diagnostics errors;
  for (const auto& item : items) {
    auto path = components::find_conversion_path(catalog, item.from_type, item.to_type);
    if (!path)
      errors.push_back({"no-conversion-path", item.from + " -> " + item.to,
                        item.from_type.to_string() + " -> " + item.to_type.to_string(), 0});
    else
      paths.push_back(std::move(*path));
  }
  if (!errors.empty()) throw Error(errors);

  int counter = 0;
  auto next_id = [&] {
    std::string id;
    do id = "conv-" + std::to_string(++counter);
    while (spec.find_task(id));
    return id;
  };

  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& item = items[i];
    const auto& path = paths[i];
    auto target = *gasl::parse_port_ref(item.to);

    double size = 0;
    double bandwidth = 0;
    std::optional<gasl::InputBinding> source;
    std::size_t edge_pos = spec.edges.size();
    if (item.from_source) {
      auto* consumer = spec.find_task(target.task);
      auto it = std::find_if(consumer->inputs.begin(), consumer->inputs.end(),
                             [&](const gasl::InputBinding& in) { return in.port == target.port; });
      source = *it;
      size = it->size_mb;
      consumer->inputs.erase(it);
    } else {
      auto from = *gasl::parse_port_ref(item.from);
      auto it = std::find_if(spec.edges.begin(), spec.edges.end(), [&](const gasl::Edge& e) {
        return e.from == from && e.to == target;
      });
      size = gasl::output_size(spec, from);
      bandwidth = it->bandwidth_estimate;
      edge_pos = static_cast<std::size_t>(it - spec.edges.begin());
      spec.edges.erase(it);
    }

    std::vector<gasl::Edge> chain;
    std::optional<gasl::PortRef> upstream;
    if (!item.from_source) upstream = *gasl::parse_port_ref(item.from);
    for (const auto& d : path) {
      gasl::TaskDecl task;
      task.id = next_id();
      task.component = {gasl::ComponentRef::By::id, d.id};
      task.inserted_for = target.task;
      const auto& in = d.inputs.front();
      const auto& out = d.outputs.front();
      if (upstream) {
        chain.push_back({*upstream, {task.id, in.name}, bandwidth});
      } else {
        auto binding = *source;
        binding.port = in.name;
        task.inputs.push_back(std::move(binding));
      }
      task.outputs.push_back({out.name, out.type, size});
      task.processing.min_node_speed = d.min_node_speed;
      task.processing.memory_mb = d.memory_mb;
      task.processing.work = d.cost_coefficient * size;
      upstream = gasl::PortRef{task.id, out.name};
      spec.tasks.push_back(std::move(task));
    }
    chain.push_back({*upstream, target, bandwidth});
    spec.edges.insert(spec.edges.begin() + static_cast<std::ptrdiff_t>(edge_pos), chain.begin(),
                      chain.end());
  }
  return spec;
}

// {"unresolved":[...],"incompatible":[...]}
inline nlohmann::ordered_json to_json(const Report& report) {
  nlohmann::ordered_json unresolved = nlohmann::ordered_json::array();
  for (const auto& u : report.unresolved)
    unresolved.push_back({{"task", u.task}, {"reason", u.reason}, {"detail", u.detail}});
  nlohmann::ordered_json incompatible = nlohmann::ordered_json::array();
  for (const auto& i : report.incompatible)
    incompatible.push_back({{"from", i.from},
                            {"to", i.to},
                            {"from_type", i.from_type.to_string()},
                            {"to_type", i.to_type.to_string()}});
  return {{"unresolved", unresolved}, {"incompatible", incompatible}};
}

}  // namespace gridstealth::resolver
