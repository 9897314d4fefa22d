#pragma once

// Grid Application Specification Language.
//
// An application document declares tasks with three requirement blocks
// (data, processing, communication) plus dependencies:
//
//   <application name="spr" version="1" deadline="600">
//     <parameters>
//       <param name="corpus" value="file:corpus.wav"/>
//     </parameters>
//     <task id="asr1">
//       <component kind="asr"/>                      (or id="..." / query="k=v;k=v")
//       <data>
//         <input port="audio" location="${corpus}" media=".." encoding=".." annotation=".." size="10"/>
//         <output port="transcript" media=".." encoding=".." annotation=".." size="1"/>
//         <param name="language" value="en"/>
//       </data>
//       <processing min-node-speed="1" memory="64" storage="0" deadline="100" work="50"/>
//     </task>
//     <edge from="asr1.transcript" to="index.graph" bandwidth-estimate="10"/>
//   </application>
//
// `${name}` is a static reference to a declared parameter; `${task.port}` is
// a dynamic reference to another task's output, bound at run time.

#include <algorithm>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "gridstealth/error.hpp"
#include "gridstealth/port_type.hpp"
#include "gridstealth/util.hpp"
#include "gridstealth/xml.hpp"

namespace gridstealth::gasl {

struct Parameter {
  std::string name;
  std::optional<std::string> value;  // static default
  bool operator==(const Parameter&) const = default;
};

struct ComponentRef {
  enum class By { id, kind, query };
  By by = By::kind;
  std::string value;
  bool operator==(const ComponentRef&) const = default;
};

inline const char* to_string(ComponentRef::By by) {
  switch (by) {
    case ComponentRef::By::id: return "id";
    case ComponentRef::By::kind: return "kind";
    case ComponentRef::By::query: return "query";
  }
  return "kind";
}

struct InputBinding {
  std::string port;
  std::string location;  // URI, stub:..., or a ${...} reference
  std::optional<PortType> type;
  double size_mb = 0;
  bool operator==(const InputBinding&) const = default;
};

struct OutputDecl {
  std::string port;
  std::optional<PortType> type;
  std::optional<double> size_mb;
  bool operator==(const OutputDecl&) const = default;
};

struct TaskParam {
  std::string name;
  std::string value;
  bool operator==(const TaskParam&) const = default;
};

struct Processing {
  double min_node_speed = 0;
  double memory_mb = 0;
  double storage_mb = 0;
  std::optional<double> deadline;  // seconds from application start
  std::optional<double> work;      // work units; derived from cost model when absent
  bool operator==(const Processing&) const = default;
};

struct TaskDecl {
  std::string id;
  ComponentRef component;
  std::vector<InputBinding> inputs;
  std::vector<OutputDecl> outputs;
  std::vector<TaskParam> params;
  Processing processing;
  // Set on conversion tasks inserted by the resolver: the user task they feed.
  std::string inserted_for;

  bool operator==(const TaskDecl&) const = default;

  const InputBinding* input(std::string_view port) const {
    for (const auto& in : inputs)
      if (in.port == port) return &in;
    return nullptr;
  }
  const OutputDecl* output(std::string_view port) const {
    for (const auto& out : outputs)
      if (out.port == port) return &out;
    return nullptr;
  }
  const std::string* param(std::string_view name) const {
    for (const auto& p : params)
      if (p.name == name) return &p.value;
    return nullptr;
  }
};

struct PortRef {
  std::string task;
  std::string port;
  auto operator<=>(const PortRef&) const = default;
  bool operator==(const PortRef&) const = default;
  std::string to_string() const { return task + "." + port; }
};

// "task.port"; the task id may itself contain dots (aggregated specs), the
// port may not.
inline std::optional<PortRef> parse_port_ref(std::string_view text) {
  auto dot = text.rfind('.');
  if (dot == std::string_view::npos || dot == 0 || dot + 1 == text.size()) return std::nullopt;
  return PortRef{std::string(text.substr(0, dot)), std::string(text.substr(dot + 1))};
}

struct Edge {
  PortRef from;
  PortRef to;
  double bandwidth_estimate = 0;  // MB/s, advisory
  bool operator==(const Edge&) const = default;
};

struct AppSpec {
  std::string name;
  std::string version;
  std::optional<double> deadline;
  std::vector<Parameter> parameters;
  std::vector<TaskDecl> tasks;
  std::vector<Edge> edges;

  bool operator==(const AppSpec&) const = default;

  const TaskDecl* find_task(std::string_view id) const {
    for (const auto& t : tasks)
      if (t.id == id) return &t;
    return nullptr;
  }
  TaskDecl* find_task(std::string_view id) {
    for (auto& t : tasks)
      if (t.id == id) return &t;
    return nullptr;
  }
  const Parameter* find_parameter(std::string_view name) const {
    for (const auto& p : parameters)
      if (p.name == name) return &p;
    return nullptr;
  }
};

// ---------------------------------------------------------------------------
// Variable references

// Names inside every ${...} occurrence, in order.
inline std::vector<std::string> references(std::string_view text) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while ((pos = text.find("${", pos)) != std::string_view::npos) {
    auto close = text.find('}', pos + 2);
    if (close == std::string_view::npos) break;
    out.emplace_back(text.substr(pos + 2, close - pos - 2));
    pos = close + 1;
  }
  return out;
}

template <typename Fn>
std::string replace_references(std::string_view text, Fn&& replacement) {
  std::string out;
  std::size_t pos = 0;
  while (true) {
    auto open = text.find("${", pos);
    if (open == std::string_view::npos) break;
    auto close = text.find('}', open + 2);
    if (close == std::string_view::npos) break;
    out.append(text.substr(pos, open - pos));
    std::string name(text.substr(open + 2, close - open - 2));
    if (auto value = replacement(name))
      out += *value;
    else
      out.append(text.substr(open, close - open + 1));
    pos = close + 1;
  }
  out.append(text.substr(pos));
  return out;
}

// Fields that may carry references: input locations and task params.
template <typename Fn>
void for_each_reference_site(const TaskDecl& task, Fn&& fn) {
  for (const auto& in : task.inputs) fn(in.location);
  for (const auto& p : task.params) fn(p.value);
}

template <typename Fn>
void for_each_reference_site(TaskDecl& task, Fn&& fn) {
  for (auto& in : task.inputs) fn(in.location);
  for (auto& p : task.params) fn(p.value);
}

// Output ports a task is known to produce: explicit declarations plus the
// source ports of its outgoing edges.
inline std::set<std::string> declared_outputs(const AppSpec& spec, std::string_view task_id) {
  std::set<std::string> ports;
  if (const auto* task = spec.find_task(task_id))
    for (const auto& out : task->outputs) ports.insert(out.port);
  for (const auto& e : spec.edges)
    if (e.from.task == task_id) ports.insert(e.from.port);
  return ports;
}

// Static when it names a declared parameter; otherwise dynamic when it parses
// as task.port for a declared task.
inline std::optional<PortRef> dynamic_reference(const AppSpec& spec, const std::string& name) {
  if (spec.find_parameter(name)) return std::nullopt;
  auto ref = parse_port_ref(name);
  if (!ref || !spec.find_task(ref->task)) return std::nullopt;
  return ref;
}

// ---------------------------------------------------------------------------
// Validation

namespace detail {

struct SourceLines {
  std::vector<int> parameters;
  std::vector<int> tasks;
  std::vector<int> edges;
  int root = 0;
};

inline int line_at(const std::vector<int>& lines, std::size_t i) {
  return i < lines.size() ? lines[i] : 0;
}

inline bool valid_identifier(std::string_view id) {
  if (id.empty()) return false;
  for (char c : id)
    if (std::isspace(static_cast<unsigned char>(c)) || c == '$' || c == '{' || c == '}' ||
        c == '"' || c == '<' || c == '>' || c == '&')
      return false;
  return true;
}

inline bool valid_port_name(std::string_view port) {
  return valid_identifier(port) && port.find('.') == std::string_view::npos;
}

inline bool valid_query(std::string_view query) {
  if (trim(query).empty()) return false;
  for (const auto& clause : split(query, ';')) {
    auto eq = clause.find('=');
    if (eq == std::string::npos || trim(clause.substr(0, eq)).empty()) return false;
  }
  return true;
}

inline Diagnostics validate(const AppSpec& spec, const SourceLines& lines) {
  Diagnostics out;
  auto add = [&](std::string code, std::string subject, std::string message, int line) {
    out.push_back(Diagnostic{std::move(code), std::move(subject), std::move(message), line});
  };

  if (spec.name.empty()) add("missing-attribute", "name", "application name is required", lines.root);
  if (spec.version.empty())
    add("missing-attribute", "version", "application version is required", lines.root);
  if (spec.deadline && *spec.deadline < 0)
    add("invalid-number", "deadline", "deadline must be non-negative", lines.root);

  std::set<std::string> param_names;
  for (std::size_t i = 0; i < spec.parameters.size(); ++i) {
    const auto& p = spec.parameters[i];
    if (!valid_identifier(p.name))
      add("invalid-name", p.name, "parameter name", line_at(lines.parameters, i));
    else if (!param_names.insert(p.name).second)
      add("duplicate-parameter", p.name, "", line_at(lines.parameters, i));
  }

  std::set<std::string> task_ids;
  for (std::size_t i = 0; i < spec.tasks.size(); ++i) {
    const auto& t = spec.tasks[i];
    int line = line_at(lines.tasks, i);
    if (!valid_identifier(t.id)) {
      add("invalid-name", t.id, "task id", line);
    } else if (!task_ids.insert(t.id).second) {
      add("duplicate-task", t.id, "", line);
    }
    if (t.component.value.empty())
      add("missing-attribute", t.id, "component reference is empty", line);
    else if (t.component.by == ComponentRef::By::query && !valid_query(t.component.value))
      add("invalid-query", t.id, "expected key=value;key=value", line);
    const auto& pr = t.processing;
    auto check_num = [&](double v, const char* field) {
      if (!(v >= 0)) add("invalid-number", t.id, std::string(field) + " must be non-negative", line);
    };
    check_num(pr.min_node_speed, "min-node-speed");
    check_num(pr.memory_mb, "memory");
    check_num(pr.storage_mb, "storage");
    if (pr.deadline) check_num(*pr.deadline, "deadline");
    if (pr.work) check_num(*pr.work, "work");
    std::set<std::string> outs;
    for (const auto& o : t.outputs) {
      if (!valid_port_name(o.port)) add("invalid-name", t.id + "." + o.port, "output port", line);
      if (!outs.insert(o.port).second) add("duplicate-output", t.id + "." + o.port, "", line);
      if (o.size_mb) check_num(*o.size_mb, "output size");
      if (o.type && !valid(*o.type))
        add("invalid-port-type", t.id + "." + o.port, "", line);
    }
    for (const auto& in : t.inputs) {
      if (!valid_port_name(in.port)) add("invalid-name", t.id + "." + in.port, "input port", line);
      check_num(in.size_mb, "input size");
      if (in.location.empty())
        add("missing-attribute", t.id + "." + in.port, "input location is required", line);
      if (in.type && !valid(*in.type)) add("invalid-port-type", t.id + "." + in.port, "", line);
    }
  }

  // Every input port bound at most once, by location or by edge.
  std::map<PortRef, int> bindings;
  for (const auto& t : spec.tasks)
    for (const auto& in : t.inputs) ++bindings[PortRef{t.id, in.port}];
  for (std::size_t i = 0; i < spec.edges.size(); ++i) {
    const auto& e = spec.edges[i];
    int line = line_at(lines.edges, i);
    bool ok = true;
    for (const auto* end : {&e.from, &e.to}) {
      if (!spec.find_task(end->task)) {
        add("dangling-edge", end->task, "edge " + e.from.to_string() + " -> " + e.to.to_string(),
            line);
        ok = false;
      } else if (!valid_port_name(end->port)) {
        add("invalid-name", end->to_string(), "edge port", line);
        ok = false;
      }
    }
    if (!(e.bandwidth_estimate >= 0))
      add("invalid-number", e.from.to_string(), "bandwidth-estimate must be non-negative", line);
    if (ok) ++bindings[e.to];
  }
  for (const auto& [ref, count] : bindings)
    if (count > 1) add("duplicate-binding", ref.to_string(), "input bound more than once", 0);

  for (std::size_t i = 0; i < spec.tasks.size(); ++i) {
    const auto& t = spec.tasks[i];
    for_each_reference_site(t, [&](const std::string& text) {
      for (const auto& name : references(text)) {
        if (spec.find_parameter(name)) continue;
        auto ref = dynamic_reference(spec, name);
        if (!ref) {
          add("undeclared-variable", name, "in task " + t.id, line_at(lines.tasks, i));
        } else if (!declared_outputs(spec, ref->task).count(ref->port)) {
          add("unknown-output", name, "in task " + t.id, line_at(lines.tasks, i));
        }
      }
    });
  }
  return out;
}

}  // namespace detail

inline Diagnostics validate(const AppSpec& spec) { return detail::validate(spec, {}); }

// ---------------------------------------------------------------------------
// Parsing

struct ParseResult {
  std::optional<AppSpec> spec;
  Diagnostics errors;
  bool ok() const { return spec.has_value(); }
};

namespace detail {

class SpecReader {
 public:
  Diagnostics errors;
  SourceLines lines;

  AppSpec read(const xml::Element& root) {
    AppSpec spec;
    lines.root = root.line;
    if (root.name != "application") {
      error("unknown-element", root.name, "expected <application>", root.line);
      return spec;
    }
    check_attributes(root, {"name", "version", "deadline"});
    spec.name = root.attr_or("name", "");
    spec.version = root.attr_or("version", "");
    spec.deadline = optional_number(root, "deadline");
    for (const auto& child : root.children) {
      if (child.name == "parameters") {
        check_attributes(child, {});
        for (const auto& p : child.children) {
          if (p.name != "param") {
            error("unknown-element", p.name, "in <parameters>", p.line);
            continue;
          }
          check_attributes(p, {"name", "value"});
          Parameter param{required(p, "name"), std::nullopt};
          if (const auto* v = p.attr("value")) param.value = *v;
          spec.parameters.push_back(std::move(param));
          lines.parameters.push_back(p.line);
        }
      } else if (child.name == "task") {
        spec.tasks.push_back(read_task(child));
        lines.tasks.push_back(child.line);
      } else if (child.name == "edge") {
        check_attributes(child, {"from", "to", "bandwidth-estimate"});
        Edge edge;
        edge.from = port_ref(child, "from");
        edge.to = port_ref(child, "to");
        edge.bandwidth_estimate = optional_number(child, "bandwidth-estimate").value_or(0);
        spec.edges.push_back(std::move(edge));
        lines.edges.push_back(child.line);
      } else {
        error("unknown-element", child.name, "in <application>", child.line);
      }
    }
    return spec;
  }

 private:
  void error(std::string code, std::string subject, std::string message, int line) {
    errors.push_back(Diagnostic{std::move(code), std::move(subject), std::move(message), line});
  }

  void check_attributes(const xml::Element& e, std::initializer_list<std::string_view> allowed) {
    for (const auto& [k, v] : e.attributes)
      if (std::find(allowed.begin(), allowed.end(), k) == allowed.end())
        error("unknown-attribute", k, "on <" + e.name + ">", e.line);
  }

  std::string required(const xml::Element& e, std::string_view key) {
    if (const auto* v = e.attr(key)) return *v;
    error("missing-attribute", std::string(key), "on <" + e.name + ">", e.line);
    return {};
  }

  std::optional<double> optional_number(const xml::Element& e, std::string_view key) {
    const auto* v = e.attr(key);
    if (!v) return std::nullopt;
    auto n = parse_non_negative(*v);
    if (!n) {
      error("invalid-number", std::string(key), "'" + *v + "' on <" + e.name + ">", e.line);
      return std::nullopt;
    }
    return n;
  }

  PortRef port_ref(const xml::Element& e, std::string_view key) {
    auto text = required(e, key);
    if (text.empty()) return {};
    auto ref = parse_port_ref(text);
    if (!ref) {
      error("invalid-port-ref", text, "expected task.port", e.line);
      return {};
    }
    return *ref;
  }

  std::optional<PortType> port_type(const xml::Element& e) {
    bool any = e.has_attr("media") || e.has_attr("encoding") || e.has_attr("annotation");
    if (!any) return std::nullopt;
    PortType type{e.attr_or("media", ""), e.attr_or("encoding", "none"),
                  e.attr_or("annotation", "none")};
    if (!valid(type)) {
      error("invalid-port-type", type.to_string(), "on <" + e.name + ">", e.line);
      return std::nullopt;
    }
    return type;
  }

  TaskDecl read_task(const xml::Element& e) {
    check_attributes(e, {"id", "inserted-for"});
    TaskDecl task;
    task.id = required(e, "id");
    task.inserted_for = e.attr_or("inserted-for", "");
    bool has_component = false;
    for (const auto& child : e.children) {
      if (child.name == "component") {
        check_attributes(child, {"id", "kind", "query"});
        int given = 0;
        for (auto [key, by] : {std::pair{"id", ComponentRef::By::id},
                               std::pair{"kind", ComponentRef::By::kind},
                               std::pair{"query", ComponentRef::By::query}}) {
          if (const auto* v = child.attr(key)) {
            task.component = ComponentRef{by, *v};
            ++given;
          }
        }
        if (given != 1)
          error("invalid-component", task.id, "exactly one of id, kind, query is required",
                child.line);
        if (has_component) error("duplicate-element", "component", "in task " + task.id, child.line);
        has_component = true;
      } else if (child.name == "data") {
        check_attributes(child, {});
        for (const auto& d : child.children) {
          if (d.name == "input") {
            check_attributes(d, {"port", "location", "media", "encoding", "annotation", "size"});
            InputBinding in;
            in.port = required(d, "port");
            in.location = required(d, "location");
            in.type = port_type(d);
            in.size_mb = optional_number(d, "size").value_or(0);
            task.inputs.push_back(std::move(in));
          } else if (d.name == "output") {
            check_attributes(d, {"port", "media", "encoding", "annotation", "size"});
            OutputDecl out;
            out.port = required(d, "port");
            out.type = port_type(d);
            out.size_mb = optional_number(d, "size");
            task.outputs.push_back(std::move(out));
          } else if (d.name == "param") {
            check_attributes(d, {"name", "value"});
            task.params.push_back(TaskParam{required(d, "name"), required(d, "value")});
          } else {
            error("unknown-element", d.name, "in <data>", d.line);
          }
        }
      } else if (child.name == "processing") {
        check_attributes(child, {"min-node-speed", "memory", "storage", "deadline", "work"});
        auto& p = task.processing;
        p.min_node_speed = optional_number(child, "min-node-speed").value_or(0);
        p.memory_mb = optional_number(child, "memory").value_or(0);
        p.storage_mb = optional_number(child, "storage").value_or(0);
        p.deadline = optional_number(child, "deadline");
        p.work = optional_number(child, "work");
      } else {
        error("unknown-element", child.name, "in <task>", child.line);
      }
    }
    if (!has_component) error("missing-element", task.id, "task needs a <component>", e.line);
    return task;
  }
};

}  // namespace detail

inline ParseResult parse(std::string_view document) {
  ParseResult result;
  xml::Element root;
  try {
    root = xml::parse(document);
  } catch (const Error& e) {
    result.errors = e.diagnostics();
    return result;
  }
  detail::SpecReader reader;
  AppSpec spec = reader.read(root);
  result.errors = std::move(reader.errors);
  if (result.errors.empty()) result.errors = detail::validate(spec, reader.lines);
  if (result.errors.empty()) result.spec = std::move(spec);
  return result;
}

// Parses or throws Error carrying every diagnostic.
inline AppSpec parse_or_throw(std::string_view document) {
  auto result = parse(document);
  if (!result.ok()) throw Error(result.errors);
  return std::move(*result.spec);
}

inline AppSpec load(const std::string& path) { return parse_or_throw(xml::read_file(path)); }

// ---------------------------------------------------------------------------
// Canonical serialization

inline void append_port_type(xml::Attributes& attrs, const std::optional<PortType>& type) {
  if (!type) return;
  attrs.emplace_back("media", type->media);
  attrs.emplace_back("encoding", type->encoding);
  attrs.emplace_back("annotation", type->annotation);
}

inline std::string serialize(const AppSpec& spec) {
  xml::Writer w;
  xml::Attributes root{{"name", spec.name}, {"version", spec.version}};
  if (spec.deadline) root.emplace_back("deadline", format_number(*spec.deadline));
  w.open("application", root);
  if (!spec.parameters.empty()) {
    w.open("parameters");
    for (const auto& p : spec.parameters) {
      xml::Attributes a{{"name", p.name}};
      if (p.value) a.emplace_back("value", *p.value);
      w.empty("param", a);
    }
    w.close("parameters");
  }
  for (const auto& t : spec.tasks) {
    xml::Attributes ta{{"id", t.id}};
    if (!t.inserted_for.empty()) ta.emplace_back("inserted-for", t.inserted_for);
    w.open("task", ta);
    w.empty("component", {{to_string(t.component.by), t.component.value}});
    if (!t.inputs.empty() || !t.outputs.empty() || !t.params.empty()) {
      w.open("data");
      for (const auto& in : t.inputs) {
        xml::Attributes a{{"port", in.port}, {"location", in.location}};
        append_port_type(a, in.type);
        if (in.size_mb != 0) a.emplace_back("size", format_number(in.size_mb));
        w.empty("input", a);
      }
      for (const auto& out : t.outputs) {
        xml::Attributes a{{"port", out.port}};
        append_port_type(a, out.type);
        if (out.size_mb) a.emplace_back("size", format_number(*out.size_mb));
        w.empty("output", a);
      }
      for (const auto& p : t.params) w.empty("param", {{"name", p.name}, {"value", p.value}});
      w.close("data");
    }
    const auto& pr = t.processing;
    xml::Attributes pa{{"min-node-speed", format_number(pr.min_node_speed)},
                       {"memory", format_number(pr.memory_mb)},
                       {"storage", format_number(pr.storage_mb)}};
    if (pr.deadline) pa.emplace_back("deadline", format_number(*pr.deadline));
    if (pr.work) pa.emplace_back("work", format_number(*pr.work));
    w.empty("processing", pa);
    w.close("task");
  }
  for (const auto& e : spec.edges)
    w.empty("edge", {{"from", e.from.to_string()},
                     {"to", e.to.to_string()},
                     {"bandwidth-estimate", format_number(e.bandwidth_estimate)}});
  w.close("application");
  return w.str();
}

// ---------------------------------------------------------------------------
// Static substitution

// Grounds every ${param} reference. Parameters without a default must be
// bound; bound values are recorded as the parameter's value so that a second
// substitution is the identity.
inline AppSpec substitute_static(AppSpec spec, const std::map<std::string, std::string>& bindings) {
  Diagnostics errors;
  for (const auto& [name, value] : bindings)
    if (!spec.find_parameter(name)) errors.push_back({"unknown-parameter", name, "", 0});
  std::map<std::string, std::string> values;
  for (auto& p : spec.parameters) {
    if (auto it = bindings.find(p.name); it != bindings.end()) p.value = it->second;
    if (p.value)
      values[p.name] = *p.value;
    else
      errors.push_back({"unbound", p.name, "no binding and no default", 0});
  }
  if (!errors.empty()) throw Error(errors);
  for (auto& task : spec.tasks) {
    for_each_reference_site(task, [&](std::string& text) {
      text = replace_references(text, [&](const std::string& name) -> std::optional<std::string> {
        if (auto it = values.find(name); it != values.end()) return it->second;
        return std::nullopt;
      });
    });
  }
  return spec;
}

// ---------------------------------------------------------------------------
// Dependencies and canonical order

// task id -> ids of tasks it depends on (edges plus dynamic references).
inline std::map<std::string, std::set<std::string>> dependencies(const AppSpec& spec) {
  std::map<std::string, std::set<std::string>> deps;
  for (const auto& t : spec.tasks) deps[t.id];
  for (const auto& e : spec.edges)
    if (deps.count(e.to.task) && deps.count(e.from.task)) deps[e.to.task].insert(e.from.task);
  for (const auto& t : spec.tasks) {
    for_each_reference_site(t, [&](const std::string& text) {
      for (const auto& name : references(text))
        if (auto ref = dynamic_reference(spec, name)) deps[t.id].insert(ref->task);
    });
  }
  return deps;
}

namespace detail {

// Ready tasks are taken smallest key first. A user task's key is its id;
// an inserted converter sorts just ahead of the task it feeds, which keeps
// the relative order of user tasks unchanged by resolution.
using OrderKey = std::tuple<std::string, int, std::string>;

inline OrderKey order_key(const TaskDecl& t) {
  if (t.inserted_for.empty()) return {t.id, 1, t.id};
  return {t.inserted_for, 0, t.id};
}

inline std::vector<std::string> find_cycle(
    const std::set<std::string>& remaining,
    const std::map<std::string, std::set<std::string>>& deps) {
  // Every remaining task has a remaining predecessor; walk predecessors
  // until a task repeats.
  std::vector<std::string> walk;
  std::map<std::string, std::size_t> seen;
  std::string current = *remaining.begin();
  while (!seen.count(current)) {
    seen[current] = walk.size();
    walk.push_back(current);
    for (const auto& pred : deps.at(current)) {
      if (remaining.count(pred)) {
        current = pred;
        break;
      }
    }
  }
  std::vector<std::string> cycle(walk.begin() + static_cast<std::ptrdiff_t>(seen[current]),
                                 walk.end());
  std::reverse(cycle.begin(), cycle.end());  // predecessor walk -> forward direction
  std::rotate(cycle.begin(), std::min_element(cycle.begin(), cycle.end()), cycle.end());
  return cycle;
}

}  // namespace detail

// Topological order over edge and dynamic-reference dependencies, ties by
// task id. Throws Error{"cycle", "A,B,..."} naming one cycle.
inline std::vector<std::string> canonical_order(const AppSpec& spec) {
  auto deps = dependencies(spec);
  std::map<std::string, std::set<std::string>> dependents;
  std::map<std::string, std::size_t> pending;
  std::map<std::string, detail::OrderKey> keys;
  for (const auto& t : spec.tasks) keys[t.id] = detail::order_key(t);
  for (const auto& [task, preds] : deps) {
    pending[task] = preds.size();
    for (const auto& p : preds) dependents[p].insert(task);
  }
  using Item = std::pair<detail::OrderKey, std::string>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> ready;
  for (const auto& [task, n] : pending)
    if (n == 0) ready.emplace(keys[task], task);
  std::vector<std::string> order;
  while (!ready.empty()) {
    auto task = ready.top().second;
    ready.pop();
    order.push_back(task);
    for (const auto& d : dependents[task])
      if (--pending[d] == 0) ready.emplace(keys[d], d);
  }
  if (order.size() != pending.size()) {
    std::set<std::string> remaining;
    for (const auto& [task, n] : pending)
      if (n > 0) remaining.insert(task);
    auto cycle = detail::find_cycle(remaining, deps);
    std::string subject;
    for (const auto& id : cycle) subject += (subject.empty() ? "" : ",") + id;
    throw Error("cycle", subject, "dependency cycle");
  }
  return order;
}

// ---------------------------------------------------------------------------
// Data volume estimates

namespace detail {

inline double output_size(const AppSpec& spec, const PortRef& ref, std::set<std::string>& visiting);

inline double input_size(const AppSpec& spec, const std::string& task_id,
                         std::set<std::string>& visiting) {
  double total = 0;
  if (const auto* task = spec.find_task(task_id))
    for (const auto& in : task->inputs) total += in.size_mb;
  for (const auto& e : spec.edges)
    if (e.to.task == task_id) total += output_size(spec, e.from, visiting);
  return total;
}

inline double output_size(const AppSpec& spec, const PortRef& ref, std::set<std::string>& visiting) {
  const auto* task = spec.find_task(ref.task);
  if (!task) return 0;
  if (const auto* out = task->output(ref.port); out && out->size_mb) return *out->size_mb;
  if (!visiting.insert(ref.task).second) return 0;  // cycle guard
  double size = input_size(spec, ref.task, visiting);
  visiting.erase(ref.task);
  return size;
}

}  // namespace detail

// MB on an output port: the declared size, else everything the producer reads.
inline double output_size(const AppSpec& spec, const PortRef& ref) {
  std::set<std::string> visiting;
  return detail::output_size(spec, ref, visiting);
}

// Total MB a task reads through location bindings and incoming edges.
inline double input_size(const AppSpec& spec, const std::string& task_id) {
  std::set<std::string> visiting{task_id};
  return detail::input_size(spec, task_id, visiting);
}

// ---------------------------------------------------------------------------
// Dynamic binding

// Run-time binding state for ${task.port} references. Owned by one
// execution driver; copies are snapshots.
class DynamicBindings {
 public:
  DynamicBindings() = default;

  explicit DynamicBindings(const AppSpec& spec) : deps_(dependencies(spec)) {
    for (const auto& t : spec.tasks) {
      outputs_[t.id] = declared_outputs(spec, t.id);
      auto& refs = refs_[t.id];
      for_each_reference_site(t, [&](const std::string& text) {
        for (const auto& name : references(text))
          if (auto ref = dynamic_reference(spec, name)) refs.insert(*ref);
      });
    }
  }

  // Records a completed task's outputs. Throws on unknown task, undeclared
  // port, or a second binding for the same task.
  void bind(const std::string& task, const std::map<std::string, std::string>& outputs) {
    auto declared = outputs_.find(task);
    if (declared == outputs_.end()) throw Error("unknown-task", task);
    if (bound_.count(task)) throw Error("already-bound", task);
    for (const auto& [port, value] : outputs)
      if (!declared->second.count(port)) throw Error("undeclared-port", task + "." + port);
    bound_[task] = outputs;
  }

  bool completed(const std::string& task) const { return bound_.count(task) != 0; }

  // Tasks not yet completed whose producers have all completed and whose
  // dynamic references all have values.
  std::set<std::string> ready() const {
    std::set<std::string> out;
    for (const auto& [task, preds] : deps_) {
      if (completed(task)) continue;
      bool ok = std::all_of(preds.begin(), preds.end(),
                            [&](const std::string& p) { return completed(p); });
      for (const auto& ref : refs_.at(task)) ok = ok && value(ref).has_value();
      if (ok) out.insert(task);
    }
    return out;
  }

  std::optional<std::string> value(const PortRef& ref) const {
    auto t = bound_.find(ref.task);
    if (t == bound_.end()) return std::nullopt;
    auto p = t->second.find(ref.port);
    if (p == t->second.end()) return std::nullopt;
    return p->second;
  }

  // Replaces bound dynamic references in a task's reference sites.
  TaskDecl ground(TaskDecl task) const {
    for_each_reference_site(task, [&](std::string& text) {
      text = replace_references(text, [&](const std::string& name) -> std::optional<std::string> {
        auto ref = parse_port_ref(name);
        if (!ref) return std::nullopt;
        return value(*ref);
      });
    });
    return task;
  }

 private:
  std::map<std::string, std::set<std::string>> deps_;
  std::map<std::string, std::set<PortRef>> refs_;
  std::map<std::string, std::set<std::string>> outputs_;
  std::map<std::string, std::map<std::string, std::string>> bound_;
};

inline DynamicBindings bind_dynamic(DynamicBindings state, const std::string& task,
                                    const std::map<std::string, std::string>& outputs) {
  state.bind(task, outputs);
  return state;
}

// ---------------------------------------------------------------------------
// Aggregation into pseudo-applications

// Inter-spec port link, endpoints written "spec.task.port".
struct Link {
  std::string from;
  std::string to;
  double bandwidth_estimate = 0;
};

// Combines specs under one application. Task and parameter names are
// namespaced "spec.name"; each sub-application deadline becomes a per-task
// deadline on its tasks. Port types at links are not checked here.
inline AppSpec aggregate(const std::vector<AppSpec>& specs, const std::vector<Link>& links,
                         std::string name = {}, std::string version = "1") {
  AppSpec out;
  out.version = std::move(version);
  std::set<std::string> names;
  for (const auto& s : specs) {
    if (!names.insert(s.name).second) throw Error("duplicate-spec", s.name);
    if (!out.name.empty() && name.empty()) out.name += "+";
    if (name.empty()) out.name += s.name;
  }
  if (!name.empty()) out.name = std::move(name);

  for (const auto& s : specs) {
    const std::string prefix = s.name + ".";
    auto rename = [&](const std::string& ref) -> std::optional<std::string> {
      if (s.find_parameter(ref) || dynamic_reference(s, ref)) return "${" + prefix + ref + "}";
      return std::nullopt;
    };
    for (const auto& p : s.parameters) out.parameters.push_back({prefix + p.name, p.value});
    for (auto t : s.tasks) {
      for_each_reference_site(t, [&](std::string& text) {
        text = replace_references(text, rename);
      });
      t.id = prefix + t.id;
      if (!t.inserted_for.empty()) t.inserted_for = prefix + t.inserted_for;
      if (s.deadline)
        t.processing.deadline =
            std::min(t.processing.deadline.value_or(*s.deadline), *s.deadline);
      out.tasks.push_back(std::move(t));
    }
    for (auto e : s.edges) {
      e.from.task = prefix + e.from.task;
      e.to.task = prefix + e.to.task;
      out.edges.push_back(std::move(e));
    }
  }

  for (const auto& link : links) {
    auto from = parse_port_ref(link.from);
    auto to = parse_port_ref(link.to);
    if (!from || !out.find_task(from->task) || !declared_outputs(out, from->task).count(from->port))
      throw Error("unknown-port", link.from, "link source is not a declared output");
    if (!to || !out.find_task(to->task)) throw Error("unknown-port", link.to, "link target");
    out.edges.push_back(Edge{*from, *to, link.bandwidth_estimate});
  }

  if (auto errors = validate(out); !errors.empty()) throw Error(errors);
  canonical_order(out);  // throws on a cycle introduced by links
  return out;
}

}  // namespace gridstealth::gasl
