#pragma once

// Typed component catalog: the eight component kinds, port compatibility,
// conversion-path search over the converter graph, and packaging arithmetic.

#include <algorithm>
#include <array>
#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "gridstealth/error.hpp"
#include "gridstealth/metadata.hpp"
#include "gridstealth/port_type.hpp"
#include "gridstealth/util.hpp"
#include "gridstealth/xml.hpp"

namespace gridstealth::components {

enum class Kind {
  annotation_server,
  alignment,
  asr,
  packager,
  conversion,
  text_annotation,
  lexicon_server,
  semantic_mapping,
};

inline constexpr std::array<std::pair<Kind, std::string_view>, 8> kKindNames = {{
    {Kind::annotation_server, "annotation-server"},
    {Kind::alignment, "alignment"},
    {Kind::asr, "asr"},
    {Kind::packager, "packager"},
    {Kind::conversion, "conversion"},
    {Kind::text_annotation, "text-annotation"},
    {Kind::lexicon_server, "lexicon-server"},
    {Kind::semantic_mapping, "semantic-mapping"},
}};

inline std::string to_string(Kind kind) {
  for (auto [k, name] : kKindNames)
    if (k == kind) return std::string(name);
  return "conversion";
}

inline std::optional<Kind> parse_kind(std::string_view text) {
  for (auto [k, name] : kKindNames)
    if (name == text) return k;
  return std::nullopt;
}

struct Port {
  std::string name;  // a trailing '*' declares a port family: "chunk*" matches chunk0, chunk1, ...
  PortType type;
  bool operator==(const Port&) const = default;

  bool matches(std::string_view port) const {
    if (!name.empty() && name.back() == '*')
      return starts_with(port, std::string_view(name).substr(0, name.size() - 1));
    return port == name;
  }
};

struct ComponentDescriptor {
  std::string id;
  Kind kind = Kind::conversion;
  std::vector<Port> inputs;
  std::vector<Port> outputs;
  double min_node_speed = 0;
  double memory_mb = 0;
  double cost_coefficient = 0;  // work units per input MB

  bool operator==(const ComponentDescriptor&) const = default;

  const Port* input(std::string_view port) const {
    for (const auto& p : inputs)
      if (p.matches(port)) return &p;
    return nullptr;
  }
  const Port* output(std::string_view port) const {
    for (const auto& p : outputs)
      if (p.matches(port)) return &p;
    return nullptr;
  }
};

inline Diagnostics validate_descriptor(const ComponentDescriptor& d) {
  Diagnostics out;
  if (d.id.empty()) out.push_back({"missing-identifier", "", "component id", 0});
  if (d.kind == Kind::conversion && (d.inputs.size() != 1 || d.outputs.size() != 1))
    out.push_back({"invalid-converter", d.id, "conversion needs exactly one input and one output", 0});
  for (double v : {d.min_node_speed, d.memory_mb, d.cost_coefficient})
    if (!(v >= 0) || !std::isfinite(v)) out.push_back({"invalid-number", d.id, "", 0});
  for (const auto* ports : {&d.inputs, &d.outputs})
    for (const auto& p : *ports) {
      if (p.name.empty()) out.push_back({"missing-attribute", d.id, "port name", 0});
      if (!valid(p.type)) out.push_back({"invalid-port-type", d.id + "." + p.name, "", 0});
    }
  return out;
}

// Exact tag equality; all adaptation is done by converters.
inline bool compatible(const PortType& out, const PortType& in) { return out == in; }

struct ConversionEdge {
  PortType from;
  PortType to;
  std::string component;
  bool operator==(const ConversionEdge&) const = default;
};

class ComponentCatalog {
 public:
  // Throws on an invalid descriptor or a duplicate id.
  void add(ComponentDescriptor descriptor) {
    if (auto errors = validate_descriptor(descriptor); !errors.empty()) throw Error(errors);
    if (descriptors_.count(descriptor.id)) throw Error("duplicate-component", descriptor.id);
    if (descriptor.kind == Kind::conversion)
      conversions_.push_back(
          {descriptor.inputs[0].type, descriptor.outputs[0].type, descriptor.id});
    descriptors_.emplace(descriptor.id, std::move(descriptor));
  }

  const ComponentDescriptor* find(std::string_view id) const {
    auto it = descriptors_.find(std::string(id));
    return it == descriptors_.end() ? nullptr : &it->second;
  }

  std::vector<const ComponentDescriptor*> of_kind(Kind kind) const {
    std::vector<const ComponentDescriptor*> out;
    for (const auto& [id, d] : descriptors_)
      if (d.kind == kind) out.push_back(&d);
    return out;
  }

  const std::map<std::string, ComponentDescriptor>& descriptors() const { return descriptors_; }
  const std::vector<ConversionEdge>& conversion_edges() const { return conversions_; }
  std::size_t size() const { return descriptors_.size(); }

 private:
  std::map<std::string, ComponentDescriptor> descriptors_;
  std::vector<ConversionEdge> conversions_;
};

// Returns an updated copy; the catalog argument is left untouched.
inline ComponentCatalog register_component(ComponentCatalog catalog, ComponentDescriptor descriptor) {
  catalog.add(std::move(descriptor));
  return catalog;
}

// Fewest converters turning `from` into `to`; among equally short paths the
// lexicographically smallest sequence of descriptor ids. Empty when the
// types are already compatible, nullopt when no chain exists.
inline std::optional<std::vector<ComponentDescriptor>> find_conversion_path(
    const ComponentCatalog& catalog, const PortType& from, const PortType& to) {
  if (compatible(from, to)) return std::vector<ComponentDescriptor>{};
  const auto& edges = catalog.conversion_edges();

  // Distance to `to` for every type, by breadth-first search on reversed edges.
  std::map<PortType, std::size_t> dist{{to, 0}};
  std::deque<PortType> queue{to};
  while (!queue.empty()) {
    auto current = queue.front();
    queue.pop_front();
    for (const auto& e : edges)
      if (e.to == current && !dist.count(e.from)) {
        dist[e.from] = dist[current] + 1;
        queue.push_back(e.from);
      }
  }
  if (!dist.count(from)) return std::nullopt;

  // Walk forward choosing the smallest id that stays on a shortest path.
  std::vector<ComponentDescriptor> path;
  PortType current = from;
  while (current != to) {
    const ConversionEdge* best = nullptr;
    for (const auto& e : edges) {
      if (e.from != current) continue;
      auto d = dist.find(e.to);
      if (d == dist.end() || d->second + 1 != dist[current]) continue;
      if (!best || e.component < best->component) best = &e;
    }
    path.push_back(*catalog.find(best->component));
    current = best->to;
  }
  return path;
}

// ---------------------------------------------------------------------------
// Packaging

struct Chunk {
  std::uint64_t index = 0;
  std::uint64_t offset = 0;
  std::uint64_t length = 0;
  bool operator==(const Chunk&) const = default;
};

inline constexpr std::uint64_t kBytesPerMB = 1024 * 1024;

inline std::vector<Chunk> plan_packaging(std::uint64_t total, std::uint64_t chunk) {
  if (chunk == 0) throw Error("invalid-chunk-size", "0", "chunk size must be positive");
  std::uint64_t count = total / chunk + (total % chunk != 0 ? 1 : 0);
  std::vector<Chunk> out;
  out.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    std::uint64_t offset = i * chunk;
    out.push_back({i, offset, std::min(chunk, total - offset)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Discovery

// Metadata record advertising a component, so task queries can be answered
// through the discovery layer.
inline metadata::MetadataRecord describe_component(const ComponentDescriptor& d) {
  metadata::MetadataRecord r;
  r.identifier = d.id;
  r.add("resource-class", "component");
  r.add("title", d.id);
  r.add("functionality", to_string(d.kind));
  r.add("cpu-requirement", format_number(d.min_node_speed));
  r.add("memory-requirement", format_number(d.memory_mb));
  for (const auto& p : d.inputs) r.add("port-format", p.type.to_string());
  for (const auto& p : d.outputs) r.add("port-format", p.type.to_string());
  return r;
}

inline metadata::Catalog metadata_catalog(const ComponentCatalog& catalog,
                                          const std::string& source = "components") {
  metadata::Repository repo{source, {}};
  for (const auto& [id, d] : catalog.descriptors()) repo.records.push_back(describe_component(d));
  return metadata::harvest({repo}).catalog;
}

// ---------------------------------------------------------------------------
// Catalog file: <components><component id kind min-node-speed memory cost-coefficient>
//   <input name media encoding annotation/> <output .../></component></components>

inline ComponentCatalog read_catalog(const xml::Element& root) {
  if (root.name != "components") throw Error("unknown-element", root.name, "expected <components>");
  ComponentCatalog catalog;
  for (const auto& e : root.children) {
    if (e.name != "component") throw Error("unknown-element", e.name, "in <components>");
    ComponentDescriptor d;
    d.id = e.attr_or("id", "");
    auto kind_text = e.attr_or("kind", "");
    auto kind = parse_kind(kind_text);
    if (!kind) throw Error("unknown-kind", kind_text, "component " + d.id);
    d.kind = *kind;
    auto number = [&](const char* key) {
      auto text = e.attr_or(key, "0");
      auto v = parse_non_negative(text);
      if (!v) throw Error("invalid-number", text, std::string(key) + " of component " + d.id);
      return *v;
    };
    d.min_node_speed = number("min-node-speed");
    d.memory_mb = number("memory");
    d.cost_coefficient = number("cost-coefficient");
    for (const auto& p : e.children) {
      Port port{p.attr_or("name", ""),
                {p.attr_or("media", ""), p.attr_or("encoding", "none"), p.attr_or("annotation", "none")}};
      if (p.name == "input")
        d.inputs.push_back(std::move(port));
      else if (p.name == "output")
        d.outputs.push_back(std::move(port));
      else
        throw Error("unknown-element", p.name, "in <component>");
    }
    catalog.add(std::move(d));
  }
  return catalog;
}

inline ComponentCatalog load_catalog(const std::string& path) {
  return read_catalog(xml::parse_file(path));
}

inline std::string serialize_catalog(const ComponentCatalog& catalog) {
  xml::Writer w;
  w.open("components");
  for (const auto& [id, d] : catalog.descriptors()) {
    w.open("component", {{"id", d.id},
                         {"kind", to_string(d.kind)},
                         {"min-node-speed", format_number(d.min_node_speed)},
                         {"memory", format_number(d.memory_mb)},
                         {"cost-coefficient", format_number(d.cost_coefficient)}});
    for (const auto& p : d.inputs)
      w.empty("input", {{"name", p.name},
                        {"media", p.type.media},
                        {"encoding", p.type.encoding},
                        {"annotation", p.type.annotation}});
    for (const auto& p : d.outputs)
      w.empty("output", {{"name", p.name},
                         {"media", p.type.media},
                         {"encoding", p.type.encoding},
                         {"annotation", p.type.annotation}});
    w.close("component");
  }
  w.close("components");
  return w.str();
}

}  // namespace gridstealth::components
