#pragma once

// Grid topology, grounded task graphs, and schedules: the data shared by the
// broker (which produces schedules) and the simulator (which replays them).

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "gridstealth/components.hpp"
#include "gridstealth/error.hpp"
#include "gridstealth/gasl.hpp"
#include "gridstealth/resolver.hpp"
#include "gridstealth/util.hpp"
#include "gridstealth/xml.hpp"

namespace gridstealth::broker {

enum class Policy { processor_centric, data_centric };

inline const char* to_string(Policy p) {
  return p == Policy::processor_centric ? "processor-centric" : "data-centric";
}

inline std::optional<Policy> parse_policy(std::string_view text) {
  if (text == "processor-centric") return Policy::processor_centric;
  if (text == "data-centric") return Policy::data_centric;
  return std::nullopt;
}

inline constexpr double kUnlimited = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Topology

struct Node {
  std::string id;
  double speed = 1;  // work units per second
  double memory_mb = kUnlimited;
  double storage_mb = kUnlimited;
  std::map<std::string, double> datasets;  // hosted dataset id -> size MB
  bool operator==(const Node&) const = default;
};

class GridTopology {
 public:
  void add_node(Node node) {
    if (nodes_.count(node.id)) throw Error("duplicate-node", node.id);
    nodes_.emplace(node.id, std::move(node));
  }

  void add_link(const std::string& a, const std::string& b, double bandwidth) {
    links_[key(a, b)] = bandwidth;
  }

  const Node* node(const std::string& id) const {
    auto it = nodes_.find(id);
    return it == nodes_.end() ? nullptr : &it->second;
  }

  // MB/s on the direct link; nullopt when unlinked. Same-node is not a link.
  std::optional<double> bandwidth(const std::string& a, const std::string& b) const {
    auto it = links_.find(key(a, b));
    if (it == links_.end()) return std::nullopt;
    return it->second;
  }

  std::optional<std::string> home_of(const std::string& dataset) const {
    for (const auto& [id, n] : nodes_)
      if (n.datasets.count(dataset)) return id;
    return std::nullopt;
  }

  const std::map<std::string, Node>& nodes() const { return nodes_; }
  const std::map<std::pair<std::string, std::string>, double>& links() const { return links_; }

 private:
  static std::pair<std::string, std::string> key(const std::string& a, const std::string& b) {
    return a < b ? std::pair{a, b} : std::pair{b, a};
  }

  std::map<std::string, Node> nodes_;
  std::map<std::pair<std::string, std::string>, double> links_;
};

inline Diagnostics validate_topology(const GridTopology& topology) {
  Diagnostics out;
  std::map<std::string, std::vector<std::string>> hosts;
  for (const auto& [id, n] : topology.nodes()) {
    if (!(n.speed > 0) || !std::isfinite(n.speed)) out.push_back({"invalid-speed", id, "", 0});
    if (!(n.memory_mb >= 0) || !(n.storage_mb >= 0)) out.push_back({"invalid-number", id, "", 0});
    for (const auto& [ds, size] : n.datasets) {
      hosts[ds].push_back(id);
      if (!(size >= 0) || !std::isfinite(size)) out.push_back({"invalid-number", ds, "dataset size", 0});
    }
  }
  for (const auto& [ds, nodes] : hosts)
    if (nodes.size() > 1) out.push_back({"duplicate-dataset", ds, "hosted on more than one node", 0});
  for (const auto& [pair, bw] : topology.links()) {
    auto subject = pair.first + "--" + pair.second;
    if (!topology.node(pair.first) || !topology.node(pair.second))
      out.push_back({"unknown-node", subject, "link endpoint", 0});
    if (pair.first == pair.second) out.push_back({"self-link", subject, "", 0});
    if (!(bw > 0) || !std::isfinite(bw)) out.push_back({"invalid-bandwidth", subject, "", 0});
  }
  return out;
}

// <topology><node id speed memory? storage?><dataset id size/></node>
//   <link a b bandwidth/></topology>
inline GridTopology read_topology(const xml::Element& root) {
  if (root.name != "topology") throw Error("unknown-element", root.name, "expected <topology>");
  GridTopology topology;
  auto number = [](const xml::Element& e, const char* key, double fallback) {
    const auto* text = e.attr(key);
    if (!text) return fallback;
    auto v = parse_non_negative(*text);
    if (!v) throw Error("invalid-number", *text, std::string(key) + " on <" + e.name + ">");
    return *v;
  };
  for (const auto& e : root.children) {
    if (e.name == "node") {
      Node n;
      n.id = e.attr_or("id", "");
      n.speed = number(e, "speed", 1);
      n.memory_mb = number(e, "memory", kUnlimited);
      n.storage_mb = number(e, "storage", kUnlimited);
      for (const auto& d : e.children) {
        if (d.name != "dataset") throw Error("unknown-element", d.name, "in <node>");
        n.datasets[d.attr_or("id", "")] = number(d, "size", 0);
      }
      topology.add_node(std::move(n));
    } else if (e.name == "link") {
      topology.add_link(e.attr_or("a", ""), e.attr_or("b", ""), number(e, "bandwidth", 0));
    } else {
      throw Error("unknown-element", e.name, "in <topology>");
    }
  }
  if (auto errors = validate_topology(topology); !errors.empty()) throw Error(errors);
  return topology;
}

inline GridTopology load_topology(const std::string& path) {
  return read_topology(xml::parse_file(path));
}

inline std::string serialize_topology(const GridTopology& topology) {
  xml::Writer w;
  w.open("topology");
  for (const auto& [id, n] : topology.nodes()) {
    xml::Attributes a{{"id", n.id}, {"speed", format_number(n.speed)}};
    if (std::isfinite(n.memory_mb)) a.emplace_back("memory", format_number(n.memory_mb));
    if (std::isfinite(n.storage_mb)) a.emplace_back("storage", format_number(n.storage_mb));
    if (n.datasets.empty()) {
      w.empty("node", a);
      continue;
    }
    w.open("node", a);
    for (const auto& [ds, size] : n.datasets) w.empty("dataset", {{"id", ds}, {"size", format_number(size)}});
    w.close("node");
  }
  for (const auto& [pair, bw] : topology.links())
    w.empty("link", {{"a", pair.first}, {"b", pair.second}, {"bandwidth", format_number(bw)}});
  w.close("topology");
  return w.str();
}

// ---------------------------------------------------------------------------
// Grounded task graph

struct DatasetInput {
  std::string dataset;   // location, or "task.port" for produced data
  double size_mb = 0;
  std::string producer;  // task id for produced data
  bool everywhere = false;  // stub: providers are reachable from every node
  bool operator==(const DatasetInput&) const = default;
};

struct GroundedTask {
  std::string id;
  std::string component;  // descriptor id
  components::Kind kind = components::Kind::conversion;
  double work = 0;
  double min_node_speed = 0;
  double memory_mb = 0;
  double storage_mb = 0;
  std::optional<double> deadline;
  std::vector<DatasetInput> inputs;
  std::vector<std::pair<std::string, double>> outputs;  // produced dataset ids and sizes
};

struct TaskGraph {
  std::vector<GroundedTask> tasks;  // canonical order
  std::set<std::pair<std::string, std::string>> precedence;  // (producer, consumer)

  const GroundedTask* find(const std::string& id) const {
    for (const auto& t : tasks)
      if (t.id == id) return &t;
    return nullptr;
  }
};

inline bool is_stub_location(std::string_view location) { return starts_with(location, "stub:"); }

// Grounds a resolved, statically substituted spec. Throws on unresolved
// components, unbound parameters, or source datasets that no node hosts.
inline TaskGraph build_task_graph(const gasl::AppSpec& spec,
                                  const components::ComponentCatalog& catalog,
                                  const GridTopology& topology) {
  TaskGraph graph;
  Diagnostics errors;
  auto order = gasl::canonical_order(spec);
  std::map<std::string, std::map<std::string, double>> produced;  // task -> dataset -> size

  for (const auto& id : order) {
    const auto& decl = *spec.find_task(id);
    const auto* d = resolver::resolve_component(decl, catalog);
    if (!d) {
      errors.push_back({"no-component", id, decl.component.value, 0});
      continue;
    }
    GroundedTask task;
    task.id = id;
    task.component = d->id;
    task.kind = d->kind;
    task.min_node_speed = std::max(decl.processing.min_node_speed, d->min_node_speed);
    task.memory_mb = std::max(decl.processing.memory_mb, d->memory_mb);
    task.storage_mb = decl.processing.storage_mb;
    task.deadline = decl.processing.deadline;

    for (const auto& in : decl.inputs) {
      auto refs = gasl::references(in.location);
      if (!refs.empty()) {
        for (const auto& name : refs) {
          auto ref = gasl::dynamic_reference(spec, name);
          if (!ref) {
            errors.push_back({"unbound", name, "task " + id, 0});
            continue;
          }
          task.inputs.push_back({ref->to_string(), in.size_mb, ref->task, false});
          produced[ref->task][ref->to_string()] = in.size_mb;
        }
      } else if (is_stub_location(in.location)) {
        task.inputs.push_back({in.location, in.size_mb, "", true});
      } else {
        // The hosted copy's size is authoritative for sources.
        auto home = topology.home_of(in.location);
        if (!home)
          errors.push_back({"unknown-dataset", in.location, "input of task " + id, 0});
        double size = home ? topology.node(*home)->datasets.at(in.location) : in.size_mb;
        task.inputs.push_back({in.location, size, "", false});
      }
    }
    for (const auto& e : spec.edges) {
      if (e.to.task != id) continue;
      double size = gasl::output_size(spec, e.from);
      task.inputs.push_back({e.from.to_string(), size, e.from.task, false});
      produced[e.from.task][e.from.to_string()] = size;
    }
    for (const auto& p : decl.params)
      for (const auto& name : gasl::references(p.value)) {
        auto ref = gasl::dynamic_reference(spec, name);
        if (!ref) {
          errors.push_back({"unbound", name, "task " + id, 0});
          continue;
        }
        task.inputs.push_back({ref->to_string(), 0, ref->task, false});
        produced[ref->task].emplace(ref->to_string(), 0);
      }
    double input_mb = 0;
    for (const auto& in : task.inputs) {
      input_mb += in.size_mb;
      if (!in.producer.empty()) graph.precedence.emplace(in.producer, id);
    }
    task.work = decl.processing.work.value_or(d->cost_coefficient * input_mb);
    graph.tasks.push_back(std::move(task));
  }
  if (!errors.empty()) throw Error(errors);
  for (auto& t : graph.tasks)
    for (const auto& [ds, size] : produced[t.id]) t.outputs.emplace_back(ds, size);
  return graph;
}

// ---------------------------------------------------------------------------
// Schedules

struct TaskTimes {
  double start = 0;
  double finish = 0;
  bool operator==(const TaskTimes&) const = default;
};

struct Transfer {
  std::string dataset;
  std::string from;
  std::string to;
  double start = 0;
  double finish = 0;
  double size_mb = 0;
  bool operator==(const Transfer&) const = default;
};

struct Schedule {
  Policy policy = Policy::processor_centric;
  std::vector<std::string> order;  // tasks in planning order
  std::map<std::string, std::string> placement;
  std::map<std::string, TaskTimes> times;
  std::vector<Transfer> transfers;
  bool operator==(const Schedule&) const = default;
};

inline double makespan(const Schedule& schedule) {
  double out = 0;
  for (const auto& [task, t] : schedule.times) out = std::max(out, t.finish);
  return out;
}

namespace detail {

inline bool close(double a, double b) {
  return std::fabs(a - b) <= 1e-9 * std::max({1.0, std::fabs(a), std::fabs(b)});
}

inline bool not_before(double later, double earlier) { return later >= earlier || close(later, earlier); }

}  // namespace detail

// Precedence, per-node non-overlap, duration law, feasibility, and transfer
// consistency. Empty when the schedule is valid.
inline Diagnostics validate_schedule(const Schedule& schedule, const TaskGraph& graph,
                                     const GridTopology& topology) {
  Diagnostics out;
  auto add = [&](std::string code, std::string subject, std::string message = {}) {
    out.push_back({std::move(code), std::move(subject), std::move(message), 0});
  };

  // When each dataset becomes available on each node, as justified by the
  // schedule itself.
  std::map<std::string, std::map<std::string, double>> available;
  for (const auto& [id, n] : topology.nodes())
    for (const auto& [ds, size] : n.datasets) available[ds][id] = 0;
  for (const auto& t : graph.tasks) {
    auto p = schedule.placement.find(t.id);
    auto tm = schedule.times.find(t.id);
    if (p == schedule.placement.end() || tm == schedule.times.end()) continue;
    for (const auto& [ds, size] : t.outputs) available[ds][p->second] = tm->second.finish;
  }
  for (const auto& tr : schedule.transfers) {
    auto src = available[tr.dataset].find(tr.from);
    if (src == available[tr.dataset].end() || !detail::not_before(tr.start, src->second))
      add("transfer-before-available", tr.dataset, tr.from + " -> " + tr.to);
    auto bw = topology.bandwidth(tr.from, tr.to);
    if (!bw)
      add("unlinked-transfer", tr.dataset, tr.from + " -> " + tr.to);
    else if (!detail::close(tr.finish - tr.start, tr.size_mb / *bw))
      add("transfer-duration", tr.dataset, tr.from + " -> " + tr.to);
    auto& dst = available[tr.dataset];
    auto it = dst.find(tr.to);
    if (it == dst.end() || tr.finish < it->second) dst[tr.to] = tr.finish;
  }

  std::map<std::string, std::vector<std::pair<double, double>>> busy;
  for (const auto& t : graph.tasks) {
    auto p = schedule.placement.find(t.id);
    auto tm = schedule.times.find(t.id);
    if (p == schedule.placement.end() || tm == schedule.times.end()) {
      add("unscheduled-task", t.id);
      continue;
    }
    const auto* node = topology.node(p->second);
    if (!node) {
      add("unknown-node", p->second, "task " + t.id);
      continue;
    }
    const auto [start, finish] = tm->second;
    if (start < 0) add("negative-time", t.id);
    if (!detail::close(finish - start, t.work / node->speed)) add("duration-law", t.id);
    if (node->speed < t.min_node_speed || node->memory_mb < t.memory_mb ||
        node->storage_mb < t.storage_mb)
      add("infeasible-placement", t.id, p->second);
    for (const auto& in : t.inputs) {
      if (!in.producer.empty()) {
        auto pt = schedule.times.find(in.producer);
        if (pt == schedule.times.end() || !detail::not_before(start, pt->second.finish))
          add("precedence", t.id, "starts before " + in.producer + " finishes");
      }
      if (in.everywhere || in.size_mb == 0) continue;  // nothing to move
      auto ds = available[in.dataset].find(p->second);
      if (ds == available[in.dataset].end() || !detail::not_before(start, ds->second))
        add("input-not-present", t.id, in.dataset);
    }
    busy[p->second].emplace_back(start, finish);
  }
  for (auto& [node, intervals] : busy) {
    std::sort(intervals.begin(), intervals.end());
    for (std::size_t i = 1; i < intervals.size(); ++i)
      if (!detail::not_before(intervals[i].first, intervals[i - 1].second))
        add("node-overlap", node);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Export

inline nlohmann::ordered_json to_json(const Schedule& schedule) {
  nlohmann::ordered_json placement = nlohmann::ordered_json::object();
  nlohmann::ordered_json times = nlohmann::ordered_json::object();
  for (const auto& id : schedule.order) {
    placement[id] = schedule.placement.at(id);
    const auto& t = schedule.times.at(id);
    times[id] = {{"start", t.start}, {"finish", t.finish}};
  }
  nlohmann::ordered_json transfers = nlohmann::ordered_json::array();
  for (const auto& tr : schedule.transfers)
    transfers.push_back({{"dataset", tr.dataset},
                         {"from", tr.from},
                         {"to", tr.to},
                         {"start", tr.start},
                         {"finish", tr.finish},
                         {"size", tr.size_mb}});
  return {{"policy", to_string(schedule.policy)},
          {"makespan", makespan(schedule)},
          {"placement", placement},
          {"times", times},
          {"transfers", transfers}};
}

inline std::string to_dot(const TaskGraph& graph, const Schedule& schedule) {
  std::ostringstream out;
  out << "digraph application {\n  rankdir=LR;\n";
  for (const auto& t : graph.tasks) {
    auto p = schedule.placement.find(t.id);
    out << "  \"" << t.id << "\" [label=\"" << t.id << "\\n" << components::to_string(t.kind);
    if (p != schedule.placement.end()) out << "\\n@" << p->second;
    out << "\"];\n";
  }
  for (const auto& [from, to] : graph.precedence) out << "  \"" << from << "\" -> \"" << to << "\";\n";
  out << "}\n";
  return out.str();
}

}  // namespace gridstealth::broker
