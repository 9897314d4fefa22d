#pragma once

// Annotation graphs: labelled arcs between anchors on time- or byte-indexed
// signals, organised in layers. Graphs are values; every operation returns a
// new graph.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "gridstealth/error.hpp"
#include "gridstealth/util.hpp"
#include "gridstealth/xml.hpp"

namespace gridstealth::annotation {

enum class Axis { time, byte };

inline const char* to_string(Axis axis) { return axis == Axis::time ? "time" : "byte"; }

struct Signal {
  std::string id;
  Axis axis = Axis::time;
  std::optional<double> extent;  // seconds or bytes
  bool operator==(const Signal&) const = default;
};

struct Anchor {
  std::string id;
  std::string signal;
  double offset = 0;
  bool operator==(const Anchor&) const = default;
};

struct Arc {
  std::string start;  // anchor ids
  std::string end;
  std::string label;
  std::string layer;
  std::map<std::string, std::string> attributes;
  bool operator==(const Arc&) const = default;
};

struct AnnotationGraph {
  std::map<std::string, Signal> signals;
  std::map<std::string, Anchor> anchors;
  std::vector<Arc> arcs;

  bool operator==(const AnnotationGraph&) const = default;

  const Anchor* anchor(std::string_view id) const {
    auto it = anchors.find(std::string(id));
    return it == anchors.end() ? nullptr : &it->second;
  }

  std::set<std::string> layers() const {
    std::set<std::string> out;
    for (const auto& a : arcs) out.insert(a.layer);
    return out;
  }
};

// Canonical anchor id for a (signal, offset) position.
inline std::string anchor_id(std::string_view signal, double offset) {
  return std::string(signal) + "@" + format_number(offset);
}

inline AnnotationGraph add_signal(AnnotationGraph graph, Signal signal) {
  if (signal.id.empty()) throw Error("empty-signal-id", "");
  auto it = graph.signals.find(signal.id);
  if (it != graph.signals.end() && !(it->second == signal))
    throw Error("signal-conflict", signal.id, "signal already declared differently");
  graph.signals[signal.id] = std::move(signal);
  return graph;
}

namespace detail {

inline const Anchor* anchor_at(const AnnotationGraph& g, std::string_view signal, double offset) {
  for (const auto& [id, a] : g.anchors)
    if (a.signal == signal && a.offset == offset) return &a;
  return nullptr;
}

inline std::string new_anchor(AnnotationGraph& g, const std::string& signal, double offset) {
  std::string id = anchor_id(signal, offset);
  for (int n = 1; g.anchors.count(id); ++n) id = anchor_id(signal, offset) + "#" + std::to_string(n);
  g.anchors[id] = Anchor{id, signal, offset};
  return id;
}

inline std::string ensure_anchor(AnnotationGraph& g, const std::string& signal, double offset) {
  if (const auto* a = anchor_at(g, signal, offset)) return a->id;
  return new_anchor(g, signal, offset);
}

using PositionIndex = std::map<std::pair<std::string, double>, std::string>;

inline PositionIndex index_positions(const AnnotationGraph& g) {
  PositionIndex index;
  for (const auto& [id, a] : g.anchors) index.emplace(std::pair{a.signal, a.offset}, id);
  return index;
}

inline std::string ensure_anchor(AnnotationGraph& g, PositionIndex& index,
                                 const std::string& signal, double offset) {
  auto it = index.find({signal, offset});
  if (it != index.end()) return it->second;
  auto id = new_anchor(g, signal, offset);
  index.emplace(std::pair{signal, offset}, id);
  return id;
}

}  // namespace detail

// Adds an arc, reusing anchors at identical (signal, offset) positions.
inline AnnotationGraph add_arc(AnnotationGraph graph, double start_offset, double end_offset,
                               const std::string& signal, std::string label, std::string layer,
                               std::map<std::string, std::string> attributes = {}) {
  auto s = graph.signals.find(signal);
  if (s == graph.signals.end()) throw Error("unknown-signal", signal);
  if (!(start_offset <= end_offset))
    throw Error("reversed-arc", label, "end offset precedes start offset");
  if (start_offset < 0) throw Error("negative-offset", label);
  if (s->second.extent && end_offset > *s->second.extent)
    throw Error("offset-out-of-range", label, "beyond signal extent");
  auto start = detail::ensure_anchor(graph, signal, start_offset);
  auto end = detail::ensure_anchor(graph, signal, end_offset);
  graph.arcs.push_back(Arc{start, end, std::move(label), std::move(layer), std::move(attributes)});
  return graph;
}

inline Diagnostics validate_graph(const AnnotationGraph& graph) {
  Diagnostics out;
  for (const auto& [id, a] : graph.anchors) {
    if (a.signal.empty()) {
      out.push_back({"empty-signal-id", id, "", 0});
      continue;
    }
    auto s = graph.signals.find(a.signal);
    if (s == graph.signals.end()) {
      out.push_back({"unknown-signal", a.signal, "anchor " + id, 0});
      continue;
    }
    if (a.offset < 0) out.push_back({"negative-offset", id, "", 0});
    if (s->second.extent && a.offset > *s->second.extent)
      out.push_back({"offset-out-of-range", id, "", 0});
  }
  for (std::size_t i = 0; i < graph.arcs.size(); ++i) {
    const auto& arc = graph.arcs[i];
    const auto* start = graph.anchor(arc.start);
    const auto* end = graph.anchor(arc.end);
    if (!start || !end) {
      out.push_back({"dangling-anchor", !start ? arc.start : arc.end, "arc " + std::to_string(i), 0});
      continue;
    }
    if (start->signal != end->signal)
      out.push_back({"cross-signal-arc", std::to_string(i), "", 0});
    else if (start->offset > end->offset)
      out.push_back({"reversed-arc", std::to_string(i), "", 0});
  }
  return out;
}

// Position-based identity of an arc, independent of anchor ids.
struct ArcKey {
  std::string signal;
  double start = 0;
  double end = 0;
  std::string label;
  std::string layer;
  std::map<std::string, std::string> attributes;
  auto operator<=>(const ArcKey&) const = default;
};

inline ArcKey arc_key(const AnnotationGraph& g, const Arc& arc) {
  const auto* s = g.anchor(arc.start);
  const auto* e = g.anchor(arc.end);
  return ArcKey{s ? s->signal : "", s ? s->offset : 0, e ? e->offset : 0, arc.label, arc.layer,
                arc.attributes};
}

// Union of both graphs' signals and arcs. Anchors at the same (signal,
// offset) collapse into one; identical arcs appear once.
inline AnnotationGraph merge(const AnnotationGraph& a, const AnnotationGraph& b) {
  for (const auto* g : {&a, &b})
    if (auto errors = validate_graph(*g); !errors.empty()) throw Error(errors);
  AnnotationGraph out = a;
  for (const auto& [id, sig] : b.signals) {
    auto it = out.signals.find(id);
    if (it == out.signals.end()) {
      out.signals[id] = sig;
    } else if (it->second.axis != sig.axis) {
      throw Error("signal-conflict", id, "axis differs");
    } else if (it->second.extent && sig.extent && *it->second.extent != *sig.extent) {
      throw Error("signal-conflict", id, "extent differs");
    } else if (!it->second.extent) {
      it->second.extent = sig.extent;
    }
  }
  std::set<ArcKey> present;
  for (const auto& arc : out.arcs) present.insert(arc_key(out, arc));
  auto index = detail::index_positions(out);
  for (const auto& [id, anchor] : b.anchors)
    detail::ensure_anchor(out, index, anchor.signal, anchor.offset);
  for (const auto& arc : b.arcs) {
    auto key = arc_key(b, arc);
    if (!present.insert(key).second) continue;
    auto start = detail::ensure_anchor(out, index, key.signal, key.start);
    auto end = detail::ensure_anchor(out, index, key.signal, key.end);
    out.arcs.push_back(Arc{start, end, arc.label, arc.layer, arc.attributes});
  }
  return out;
}

// Arcs on `signal` overlapping [lo, hi]: start < hi and end > lo, plus
// zero-length arcs lying inside the closed window.
inline AnnotationGraph slice(const AnnotationGraph& graph, const std::string& signal, double lo,
                             double hi) {
  auto s = graph.signals.find(signal);
  if (s == graph.signals.end()) throw Error("unknown-signal", signal);
  if (!(lo <= hi)) throw Error("invalid-window", signal, "lo must not exceed hi");
  AnnotationGraph out;
  out.signals[signal] = s->second;
  for (const auto& arc : graph.arcs) {
    const auto* a = graph.anchor(arc.start);
    const auto* b = graph.anchor(arc.end);
    if (!a || !b || a->signal != signal) continue;
    bool overlap = a->offset == b->offset ? (lo <= a->offset && a->offset <= hi)
                                          : (a->offset < hi && b->offset > lo);
    if (!overlap) continue;
    out.anchors[a->id] = *a;
    out.anchors[b->id] = *b;
    out.arcs.push_back(arc);
  }
  return out;
}

// Prefix of the arc list together with the anchors it references.
inline AnnotationGraph prefix(const AnnotationGraph& graph, std::size_t arc_count) {
  AnnotationGraph out;
  out.signals = graph.signals;
  arc_count = std::min(arc_count, graph.arcs.size());
  for (std::size_t i = 0; i < arc_count; ++i) {
    const auto& arc = graph.arcs[i];
    for (const auto& id : {arc.start, arc.end})
      if (const auto* a = graph.anchor(id)) out.anchors[id] = *a;
    out.arcs.push_back(arc);
  }
  return out;
}

// ---------------------------------------------------------------------------
// XML: <graph> <signal id axis extent/> <anchor id signal offset/>
//      <arc start end label layer><attr name="k">v</attr></arc> </graph>

inline std::string serialize(const AnnotationGraph& graph) {
  xml::Writer w;
  w.open("graph");
  for (const auto& [id, s] : graph.signals) {
    xml::Attributes a{{"id", s.id}, {"axis", to_string(s.axis)}};
    if (s.extent) a.emplace_back("extent", format_number(*s.extent));
    w.empty("signal", a);
  }
  for (const auto& [id, a] : graph.anchors)
    w.empty("anchor", {{"id", a.id}, {"signal", a.signal}, {"offset", format_number(a.offset)}});
  for (const auto& arc : graph.arcs) {
    xml::Attributes a{{"start", arc.start}, {"end", arc.end}, {"label", arc.label}, {"layer", arc.layer}};
    if (arc.attributes.empty()) {
      w.empty("arc", a);
      continue;
    }
    w.open("arc", a);
    for (const auto& [k, v] : arc.attributes) w.text_element("attr", {{"name", k}}, v);
    w.close("arc");
  }
  w.close("graph");
  return w.str();
}

// Structural read; call validate_graph for the semantic invariants.
inline AnnotationGraph read_graph(const xml::Element& root) {
  if (root.name != "graph") throw Error("unknown-element", root.name, "expected <graph>");
  AnnotationGraph g;
  auto number = [](const xml::Element& e, const char* key) {
    auto text = e.attr_or(key, "");
    auto v = parse_number(text);
    if (!v) throw Error("invalid-number", text, std::string(key) + " on <" + e.name + ">");
    return *v;
  };
  for (const auto& e : root.children) {
    if (e.name == "signal") {
      Signal s{e.attr_or("id", ""), Axis::time, std::nullopt};
      auto axis = e.attr_or("axis", "time");
      if (axis == "byte")
        s.axis = Axis::byte;
      else if (axis != "time")
        throw Error("invalid-axis", axis);
      if (e.has_attr("extent")) s.extent = number(e, "extent");
      g.signals[s.id] = s;
    } else if (e.name == "anchor") {
      Anchor a{e.attr_or("id", ""), e.attr_or("signal", ""), number(e, "offset")};
      g.anchors[a.id] = a;
    } else if (e.name == "arc") {
      Arc arc{e.attr_or("start", ""), e.attr_or("end", ""), e.attr_or("label", ""),
              e.attr_or("layer", ""), {}};
      for (const auto& attr : e.children) {
        if (attr.name != "attr") throw Error("unknown-element", attr.name, "in <arc>");
        arc.attributes[attr.attr_or("name", "")] = attr.text;
      }
      g.arcs.push_back(std::move(arc));
    } else {
      throw Error("unknown-element", e.name, "in <graph>");
    }
  }
  return g;
}

inline AnnotationGraph parse(std::string_view document) { return read_graph(xml::parse(document)); }

}  // namespace gridstealth::annotation
