#pragma once

// Dublin Core records with language-technology extensions, harvesting from
// static repositories into a deduplicated catalog, and conjunctive query.

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "gridstealth/error.hpp"
#include "gridstealth/gasl.hpp"
#include "gridstealth/port_type.hpp"
#include "gridstealth/util.hpp"
#include "gridstealth/xml.hpp"

namespace gridstealth::metadata {

using Timestamp = std::chrono::sys_seconds;

inline constexpr std::array<std::string_view, 15> kDublinCore = {
    "title",  "creator", "subject", "description", "publisher",
    "contributor", "date", "type", "format", "identifier",
    "source", "language", "relation", "coverage", "rights"};

inline constexpr std::array<std::string_view, 5> kExtensions = {
    "resource-class", "cpu-requirement", "memory-requirement", "functionality", "port-format"};

inline constexpr std::array<std::string_view, 4> kResourceClasses = {
    "data-source", "component", "application", "grid-node"};

inline bool known_element(std::string_view name) {
  for (auto n : kDublinCore)
    if (n == name) return true;
  for (auto n : kExtensions)
    if (n == name) return true;
  return false;
}

// "YYYY-MM-DDThh:mm:ssZ" or "YYYY-MM-DD".
inline std::optional<Timestamp> parse_timestamp(std::string_view text) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
  std::string buf(text);
  char tail = 0;
  int n = std::sscanf(buf.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d%c", &y, &mo, &d, &h, &mi, &s, &tail);
  bool full = n == 7 && tail == 'Z' && buf.size() == 20;
  bool date_only = n == 3 && buf.size() == 10;
  if (!full && !date_only) return std::nullopt;
  std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(mo)},
                                  std::chrono::day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || s > 59 || h < 0 || mi < 0 || s < 0) return std::nullopt;
  return std::chrono::sys_days{ymd} + std::chrono::hours{h} + std::chrono::minutes{mi} +
         std::chrono::seconds{s};
}

inline std::string format_timestamp(Timestamp t) {
  auto days = std::chrono::floor<std::chrono::days>(t);
  std::chrono::year_month_day ymd{days};
  std::chrono::hh_mm_ss hms{t - days};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                static_cast<int>(hms.seconds().count()));
  return buf;
}

struct MetadataRecord {
  std::string identifier;
  Timestamp datestamp{};
  std::multimap<std::string, std::string> elements;

  bool operator==(const MetadataRecord&) const = default;

  MetadataRecord& add(std::string name, std::string value) {
    elements.emplace(std::move(name), std::move(value));
    return *this;
  }

  std::vector<std::string> values(std::string_view name) const {
    std::vector<std::string> out;
    auto [lo, hi] = elements.equal_range(std::string(name));
    for (auto it = lo; it != hi; ++it) out.push_back(it->second);
    return out;
  }

  bool has(std::string_view name, std::string_view value) const {
    auto [lo, hi] = elements.equal_range(std::string(name));
    for (auto it = lo; it != hi; ++it)
      if (it->second == value) return true;
    return false;
  }
};

struct Repository {
  std::string base_identifier;
  std::vector<MetadataRecord> records;
};

struct Catalog {
  std::map<std::string, MetadataRecord> records;
  std::map<std::string, std::string> provenance;  // identifier -> repository id

  bool operator==(const Catalog&) const = default;
  std::size_t size() const { return records.size(); }
};

// ---------------------------------------------------------------------------

inline Diagnostics validate_record(const MetadataRecord& record) {
  Diagnostics out;
  if (trim(record.identifier).empty()) out.push_back({"missing-identifier", "", "", 0});
  for (const auto& [name, value] : record.elements)
    if (!known_element(name)) out.push_back({"unknown-element", name, "", 0});

  auto classes = record.values("resource-class");
  if (classes.size() > 1) out.push_back({"duplicate-resource-class", record.identifier, "", 0});
  for (const auto& c : classes)
    if (std::find(kResourceClasses.begin(), kResourceClasses.end(), c) == kResourceClasses.end())
      out.push_back({"invalid-resource-class", c, "", 0});

  for (const auto& v : record.values("cpu-requirement"))
    if (!parse_non_negative(v)) out.push_back({"invalid-cpu-requirement", v, "", 0});
  for (const auto& v : record.values("memory-requirement"))
    if (!parse_non_negative(v)) out.push_back({"invalid-memory-requirement", v, "", 0});
  for (const auto& v : record.values("port-format"))
    if (!parse_port_type(v)) out.push_back({"invalid-port-format", v, "", 0});
  return out;
}

// ---------------------------------------------------------------------------
// Harvesting

namespace detail {

inline std::string record_fingerprint(const MetadataRecord& r) {
  std::string out = r.identifier + "\n" + format_timestamp(r.datestamp);
  for (const auto& [k, v] : r.elements) out += "\n" + k + "=" + v;
  return out;
}

// True when (a, repo_a) should replace (b, repo_b): later datestamp wins,
// then the smaller repository id, then the smaller record content.
inline bool preferred(const MetadataRecord& a, const std::string& repo_a,
                      const MetadataRecord& b, const std::string& repo_b) {
  if (a.datestamp != b.datestamp) return a.datestamp > b.datestamp;
  if (repo_a != repo_b) return repo_a < repo_b;
  return record_fingerprint(a) < record_fingerprint(b);
}

inline void offer(Catalog& catalog, const MetadataRecord& record, const std::string& repo) {
  auto it = catalog.records.find(record.identifier);
  if (it == catalog.records.end() ||
      preferred(record, repo, it->second, catalog.provenance.at(record.identifier))) {
    catalog.records[record.identifier] = record;
    catalog.provenance[record.identifier] = repo;
  }
}

}  // namespace detail

inline Diagnostics validate_repository(const Repository& repo) {
  Diagnostics out;
  std::set<std::string> ids;
  for (const auto& r : repo.records) {
    for (auto d : validate_record(r)) {
      d.message = "record '" + r.identifier + "' in repository " + repo.base_identifier;
      out.push_back(std::move(d));
    }
    if (!ids.insert(r.identifier).second)
      out.push_back({"duplicate-identifier", r.identifier, "in repository " + repo.base_identifier, 0});
  }
  return out;
}

struct HarvestResult {
  Catalog catalog;
  Diagnostics skipped;  // one entry per finding in a skipped repository
};

inline HarvestResult harvest(const std::vector<Repository>& repositories,
                             std::optional<Timestamp> since = std::nullopt) {
  HarvestResult result;
  for (const auto& repo : repositories) {
    auto findings = validate_repository(repo);
    if (!findings.empty()) {
      result.skipped.insert(result.skipped.end(), findings.begin(), findings.end());
      continue;
    }
    for (const auto& record : repo.records)
      if (!since || record.datestamp >= *since)
        detail::offer(result.catalog, record, repo.base_identifier);
  }
  return result;
}

// Union of two catalogs under the same dedupe rule as harvest.
inline Catalog merge(Catalog a, const Catalog& b) {
  for (const auto& [id, record] : b.records) detail::offer(a, record, b.provenance.at(id));
  return a;
}

// ---------------------------------------------------------------------------
// Query

using Predicate = std::vector<std::pair<std::string, std::string>>;

struct QueryResult {
  std::vector<MetadataRecord> records;  // identifier ascending
  Diagnostics warnings;
};

inline QueryResult query_catalog(const Catalog& catalog, const Predicate& predicate) {
  QueryResult result;
  for (const auto& [name, value] : predicate)
    if (!known_element(name)) result.warnings.push_back({"unknown-element", name, "", 0});
  if (!result.warnings.empty()) return result;
  for (const auto& [id, record] : catalog.records) {
    bool match = true;
    for (const auto& [name, value] : predicate) {
      bool hit = record.has(name, value) || (name == "identifier" && record.identifier == value);
      if (!hit) {
        match = false;
        break;
      }
    }
    if (match) result.records.push_back(record);
  }
  return result;
}

// "key=value;key=value" -> predicate.
inline std::optional<Predicate> parse_predicate(std::string_view text) {
  Predicate out;
  if (trim(text).empty()) return out;
  for (const auto& clause : split(text, ';')) {
    auto eq = clause.find('=');
    if (eq == std::string::npos) return std::nullopt;
    auto key = trim(clause.substr(0, eq));
    if (key.empty()) return std::nullopt;
    out.emplace_back(key, trim(clause.substr(eq + 1)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Application descriptions

inline std::string spec_identifier(const gasl::AppSpec& spec) {
  return "gasl:" + spec.name + "/" + spec.version;
}

// Component kind named by a task reference, when the reference states one.
inline std::optional<std::string> task_kind(const gasl::TaskDecl& task) {
  using By = gasl::ComponentRef::By;
  if (task.component.by == By::kind) return task.component.value;
  if (task.component.by == By::query) {
    if (auto pred = parse_predicate(task.component.value))
      for (const auto& [k, v] : *pred)
        if (k == "functionality") return v;
  }
  return std::nullopt;
}

// Metadata record for storing and rediscovering an application spec.
// Conversion tasks inserted by the resolver are described like any other.
inline MetadataRecord describe_spec(const gasl::AppSpec& spec, Timestamp datestamp = {}) {
  if (auto errors = gasl::validate(spec); !errors.empty()) throw Error(errors);
  MetadataRecord r;
  r.identifier = spec_identifier(spec);
  r.datestamp = datestamp;
  r.add("resource-class", "application");
  r.add("title", spec.name);
  r.add("description", "version " + spec.version);
  r.add("type", "application/gasl+xml");
  std::set<std::string> kinds;
  double cpu = 0, memory = 0;
  for (const auto& t : spec.tasks) {
    if (auto k = task_kind(t)) kinds.insert(*k);
    cpu = std::max(cpu, t.processing.min_node_speed);
    memory = std::max(memory, t.processing.memory_mb);
  }
  for (const auto& k : kinds) r.add("functionality", k);
  if (!spec.tasks.empty()) {
    r.add("cpu-requirement", format_number(cpu));
    r.add("memory-requirement", format_number(memory));
  }
  return r;
}

// ---------------------------------------------------------------------------
// File formats

inline void write_record(xml::Writer& w, const MetadataRecord& r, const std::string& source = {}) {
  xml::Attributes a{{"identifier", r.identifier}, {"datestamp", format_timestamp(r.datestamp)}};
  if (!source.empty()) a.emplace_back("source", source);
  w.open("record", a);
  for (const auto& [k, v] : r.elements) w.text_element("elem", {{"name", k}}, v);
  w.close("record");
}

inline std::string serialize_record(const MetadataRecord& r) {
  xml::Writer w;
  write_record(w, r);
  return w.str();
}

inline MetadataRecord read_record(const xml::Element& e) {
  if (e.name != "record") throw Error("unknown-element", e.name, "expected <record>");
  MetadataRecord r;
  r.identifier = e.attr_or("identifier", "");
  auto stamp = e.attr_or("datestamp", "1970-01-01T00:00:00Z");
  auto t = parse_timestamp(stamp);
  if (!t) throw Error("invalid-datestamp", stamp, "record " + r.identifier);
  r.datestamp = *t;
  for (const auto& child : e.children) {
    if (child.name != "elem") throw Error("unknown-element", child.name, "in <record>");
    r.add(child.attr_or("name", ""), trim(child.text));
  }
  return r;
}

inline Repository read_repository(const xml::Element& e) {
  Repository repo;
  if (e.name == "record") {
    repo.records.push_back(read_record(e));
    repo.base_identifier = repo.records.back().identifier;
    return repo;
  }
  if (e.name != "repository") throw Error("unknown-element", e.name, "expected <repository>");
  repo.base_identifier = e.attr_or("id", "");
  for (const auto& child : e.children) repo.records.push_back(read_record(child));
  return repo;
}

inline std::string serialize_repository(const Repository& repo) {
  xml::Writer w;
  w.open("repository", {{"id", repo.base_identifier}});
  for (const auto& r : repo.records) write_record(w, r);
  w.close("repository");
  return w.str();
}

inline std::string serialize_catalog(const Catalog& catalog) {
  xml::Writer w;
  w.open("catalog");
  for (const auto& [id, r] : catalog.records) write_record(w, r, catalog.provenance.at(id));
  w.close("catalog");
  return w.str();
}

// Accepts a <catalog> (provenance kept) or a <repository>.
inline Catalog read_catalog(const xml::Element& e) {
  Catalog catalog;
  if (e.name == "repository") {
    auto repo = read_repository(e);
    for (const auto& r : repo.records) detail::offer(catalog, r, repo.base_identifier);
    return catalog;
  }
  if (e.name != "catalog") throw Error("unknown-element", e.name, "expected <catalog>");
  for (const auto& child : e.children) {
    auto r = read_record(child);
    detail::offer(catalog, r, child.attr_or("source", ""));
  }
  return catalog;
}

}  // namespace gridstealth::metadata
