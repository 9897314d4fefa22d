#pragma once

// Independent reference computations for the test suites. Nothing here calls
// the library code it is used to check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "gridstealth/components.hpp"
#include "gridstealth/gasl.hpp"
#include "gridstealth/schedule.hpp"

namespace oracle {

// 32-bit FNV-1a, straight from the published definition.
inline std::uint32_t fnv1a(const std::string& s) {
  std::uint32_t h = 0x811c9dc5u;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x01000193u;
  }
  return h;
}

inline std::string token_label(const std::string& signal, std::uint64_t i) {
  return "tok" + std::to_string(i) + "-" + std::to_string(fnv1a(signal + ":" + std::to_string(i)) % 997);
}

// Length of the shortest converter chain from `from` to `to` by trying every
// ordered selection of distinct converters; nullopt when none exists.
inline std::optional<std::size_t> shortest_chain(const std::vector<gridstealth::components::ComponentDescriptor>& converters,
                                                 const gridstealth::PortType& from, const gridstealth::PortType& to) {
  if (from == to) return 0;
  std::optional<std::size_t> best;
  std::vector<bool> used(converters.size(), false);
  std::function<void(const gridstealth::PortType&, std::size_t)> walk = [&](const gridstealth::PortType& at,
                                                                            std::size_t depth) {
    for (std::size_t i = 0; i < converters.size(); ++i) {
      if (used[i] || converters[i].inputs.front().type != at) continue;
      const auto& next = converters[i].outputs.front().type;
      if (next == to) {
        if (!best || depth + 1 < *best) best = depth + 1;
        continue;
      }
      used[i] = true;
      walk(next, depth + 1);
      used[i] = false;
    }
  };
  walk(from, 0);
  return best;
}

// A schedule checked against the three laws with no help from the library:
// every producer finishes before its consumer starts, compute intervals on
// a node do not overlap, and each duration is work / speed.
inline std::vector<std::string> schedule_law_violations(const gridstealth::broker::Schedule& s,
                                                        const gridstealth::broker::TaskGraph& g,
                                                        const gridstealth::broker::GridTopology& topo) {
  std::vector<std::string> out;
  auto near = [](double a, double b) { return std::fabs(a - b) <= 1e-9 * std::max({1.0, std::fabs(a), std::fabs(b)}); };
  for (const auto& [producer, consumer] : g.precedence)
    if (s.times.at(consumer).start < s.times.at(producer).finish && !near(s.times.at(consumer).start, s.times.at(producer).finish))
      out.push_back("precedence " + producer + "->" + consumer);
  std::map<std::string, std::vector<std::pair<double, double>>> per_node;
  for (const auto& t : g.tasks) {
    const auto& tm = s.times.at(t.id);
    const auto& node = s.placement.at(t.id);
    if (!near(tm.finish - tm.start, t.work / topo.node(node)->speed)) out.push_back("duration " + t.id);
    per_node[node].emplace_back(tm.start, tm.finish);
  }
  for (auto& [node, iv] : per_node) {
    std::sort(iv.begin(), iv.end());
    for (std::size_t i = 1; i < iv.size(); ++i)
      if (iv[i].first < iv[i - 1].second && !near(iv[i].first, iv[i - 1].second)) out.push_back("overlap " + node);
  }
  for (const auto& tr : s.transfers) {
    // Every transfer must complete before the task it serves starts.
    bool served = false;
    for (const auto& t : g.tasks)
      for (const auto& in : t.inputs)
        if (in.dataset == tr.dataset && s.placement.at(t.id) == tr.to) {
          served = true;
          if (s.times.at(t.id).start < tr.finish && !near(s.times.at(t.id).start, tr.finish))
            out.push_back("late transfer " + tr.dataset);
        }
    if (!served) out.push_back("useless transfer " + tr.dataset);
  }
  return out;
}

// Makespan of a given placement under the execution model: tasks run in the
// graph's order on their node once it is free and their inputs are present;
// a missing input is copied from whichever holder delivers it first and the
// copy is kept. Infinity when the placement is infeasible or unreachable.
inline double placement_makespan(const gridstealth::broker::TaskGraph& g,
                                 const gridstealth::broker::GridTopology& topo,
                                 const std::map<std::string, std::string>& placement) {
  const double inf = std::numeric_limits<double>::infinity();
  std::map<std::string, std::map<std::string, double>> held;  // dataset -> node -> time
  for (const auto& [id, n] : topo.nodes())
    for (const auto& [ds, size] : n.datasets) held[ds][id] = 0;
  std::map<std::string, double> free_at, finish;
  double makespan = 0;
  for (const auto& t : g.tasks) {
    const auto& node = placement.at(t.id);
    const auto* n = topo.node(node);
    if (n->speed < t.min_node_speed || n->memory_mb < t.memory_mb || n->storage_mb < t.storage_mb) return inf;
    double start = free_at[node];
    for (const auto& in : t.inputs) {
      if (!in.producer.empty()) start = std::max(start, finish.at(in.producer));
      if (in.everywhere || in.size_mb == 0) continue;
      auto& where = held[in.dataset];
      double arrive = inf;
      if (where.count(node)) {
        arrive = where[node];
      } else {
        for (const auto& [src, ready] : where)
          if (auto bw = topo.bandwidth(src, node)) arrive = std::min(arrive, ready + in.size_mb / *bw);
        if (arrive == inf) return inf;
        where[node] = arrive;
      }
      start = std::max(start, arrive);
    }
    finish[t.id] = start + t.work / n->speed;
    free_at[node] = finish[t.id];
    for (const auto& [ds, size] : t.outputs) held[ds][node] = finish[t.id];
    makespan = std::max(makespan, finish[t.id]);
  }
  return makespan;
}

// Best makespan over every task-to-node assignment.
inline double optimal_makespan(const gridstealth::broker::TaskGraph& g, const gridstealth::broker::GridTopology& topo) {
  std::vector<std::string> nodes;
  for (const auto& [id, n] : topo.nodes()) nodes.push_back(id);
  std::size_t combos = 1;
  for (std::size_t i = 0; i < g.tasks.size(); ++i) combos *= nodes.size();
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < combos; ++c) {
    std::map<std::string, std::string> placement;
    auto rest = c;
    for (const auto& t : g.tasks) {
      placement[t.id] = nodes[rest % nodes.size()];
      rest /= nodes.size();
    }
    best = std::min(best, placement_makespan(g, topo, placement));
  }
  return best;
}

// True when `order` is a topological order of `deps` in which every step
// takes the smallest key among the tasks ready at that point.
template <class Key>
bool is_greedy_topological(const std::vector<std::string>& order,
                           const std::map<std::string, std::set<std::string>>& deps, Key key) {
  std::set<std::string> done;
  for (const auto& id : order) {
    for (const auto& p : deps.at(id))
      if (!done.count(p)) return false;
    for (const auto& [other, preds] : deps) {
      if (done.count(other) || other == id) continue;
      bool ready = std::all_of(preds.begin(), preds.end(), [&](const std::string& p) { return done.count(p) > 0; });
      if (ready && key(other) < key(id)) return false;
    }
    done.insert(id);
  }
  return done.size() == deps.size();
}

}  // namespace oracle
