#include <gtest/gtest.h>

#include <algorithm>

#include "gridstealth/gasl.hpp"
#include "gridstealth/metadata.hpp"
#include "gridstealth/xml.hpp"

using namespace gridstealth;
using namespace gridstealth::metadata;

namespace {

MetadataRecord rec(std::string id, std::string stamp, std::vector<std::pair<std::string, std::string>> elems = {}) {
  MetadataRecord r;
  r.identifier = std::move(id);
  r.datestamp = *parse_timestamp(stamp);
  for (auto& [k, v] : elems) r.add(k, v);
  return r;
}

Repository repo(std::string id, int count, int first = 0) {
  Repository r{std::move(id), {}};
  for (int i = first; i < first + count; ++i)
    r.records.push_back(rec("rec" + std::to_string(i), "2002-01-0" + std::to_string(1 + i % 9) + "T00:00:00Z",
                            {{"title", "record " + std::to_string(i)}}));
  return r;
}

Repository fixture(const std::string& name) {
  return read_repository(xml::parse_file(std::string(FIXTURE_DIR) + "/metadata/" + name + ".xml"));
}

}  // namespace

TEST(MetadataValidate, MissingIdentifier) {
  EXPECT_EQ(tags(validate_record(MetadataRecord{})), std::vector<std::string>{"missing-identifier"});
}

TEST(MetadataValidate, ComponentRecordIsValid) {
  auto r = rec("c1", "2002-01-01", {{"resource-class", "component"}, {"cpu-requirement", "2.0"}});
  EXPECT_TRUE(validate_record(r).empty());
}

TEST(MetadataValidate, NegativeCpuRequirement) {
  auto r = rec("c1", "2002-01-01", {{"cpu-requirement", "-1"}});
  auto codes = validate_record(r);
  ASSERT_EQ(codes.size(), 1u);
  EXPECT_EQ(codes[0].code, "invalid-cpu-requirement");
}

TEST(MetadataValidate, ResourceClassRules) {
  EXPECT_EQ(validate_record(rec("x", "2002-01-01", {{"resource-class", "spaceship"}}))[0].code,
            "invalid-resource-class");
  EXPECT_EQ(validate_record(rec("x", "2002-01-01", {{"resource-class", "component"}, {"resource-class", "grid-node"}}))[0].code,
            "duplicate-resource-class");
  EXPECT_EQ(validate_record(rec("x", "2002-01-01", {{"colour", "red"}}))[0].code, "unknown-element");
  EXPECT_EQ(validate_record(rec("x", "2002-01-01", {{"port-format", "audio/wav"}}))[0].code, "invalid-port-format");
}

TEST(MetadataHarvest, SharedIdentifierCountsOnce) {
  auto a = repo("a", 3, 0);
  auto b = repo("b", 4, 2);  // rec2 shared
  EXPECT_EQ(harvest({a, b}).catalog.size(), 6u);
}

TEST(MetadataHarvest, EmptyAndLateSince) {
  EXPECT_EQ(harvest({}).catalog.size(), 0u);
  EXPECT_EQ(harvest({repo("a", 3)}, parse_timestamp("2030-01-01")).catalog.size(), 0u);
}

TEST(MetadataHarvest, LatestDatestampWinsThenRepositoryId) {
  auto catalog = harvest({fixture("repo-c"), fixture("repo-b"), fixture("repo-a")}).catalog;
  EXPECT_EQ(catalog.records.at("oai:ldc:timit").values("title"), std::vector<std::string>{"TIMIT (revised)"});
  EXPECT_EQ(catalog.provenance.at("oai:ldc:timit"), "repo-b");
  EXPECT_EQ(catalog.provenance.at("oai:ldc:switchboard"), "repo-a");
}

TEST(MetadataHarvest, InvalidRepositoryIsSkippedWhole) {
  auto result = harvest({fixture("repo-a"), fixture("repo-bad")});
  EXPECT_EQ(result.catalog.size(), 3u);
  ASSERT_FALSE(result.skipped.empty());
  EXPECT_EQ(result.skipped[0].code, "invalid-resource-class");
}

TEST(MetadataHarvest, OrderIndependentAndIdempotent) {
  std::vector<Repository> repos{fixture("repo-a"), fixture("repo-b"), fixture("repo-c")};
  auto base = serialize_catalog(harvest(repos).catalog);
  std::reverse(repos.begin(), repos.end());
  EXPECT_EQ(serialize_catalog(harvest(repos).catalog), base);
  auto c = harvest(repos).catalog;
  EXPECT_EQ(serialize_catalog(merge(c, c)), base);
}

TEST(MetadataQuery, ConjunctivePredicate) {
  auto catalog = harvest({fixture("repo-a"), fixture("repo-b"), fixture("repo-c")}).catalog;
  auto hit = query_catalog(catalog, {{"resource-class", "component"}, {"functionality", "asr"}});
  ASSERT_EQ(hit.records.size(), 1u);
  EXPECT_EQ(hit.records[0].identifier, "comp:asr-basic");
  EXPECT_EQ(query_catalog(catalog, {}).records.size(), catalog.size());
  EXPECT_TRUE(query_catalog(catalog, {{"language", "fr"}}).records.empty());
}

TEST(MetadataQuery, ResultsSatisfyPredicateByIndependentScan) {
  auto catalog = harvest({fixture("repo-a"), fixture("repo-b"), fixture("repo-c")}).catalog;
  Predicate p{{"language", "en"}, {"resource-class", "data-source"}};
  auto result = query_catalog(catalog, p);
  std::size_t expected = 0;
  for (const auto& [id, r] : catalog.records) {
    bool all = true;
    for (const auto& [k, v] : p) {
      auto [lo, hi] = r.elements.equal_range(k);
      all = all && std::any_of(lo, hi, [&](const auto& e) { return e.second == v; });
    }
    expected += all;
  }
  EXPECT_EQ(result.records.size(), expected);
  for (const auto& r : result.records) EXPECT_TRUE(catalog.records.count(r.identifier));
}

TEST(MetadataQuery, UnknownElementWarns) {
  auto catalog = harvest({fixture("repo-a")}).catalog;
  auto result = query_catalog(catalog, {{"colour", "red"}});
  EXPECT_TRUE(result.records.empty());
  EXPECT_FALSE(result.warnings.empty());
  EXPECT_EQ(parse_predicate("a=b;c=d")->size(), 2u);
  EXPECT_FALSE(parse_predicate("nonsense"));
}

TEST(MetadataDescribe, FunctionalityFromTaskKinds) {
  auto spec = gasl::parse_or_throw(R"(<application name="spr" version="1">
    <task id="p"><component kind="packager"/></task>
    <task id="a"><component kind="asr"/></task></application>)");
  auto r = describe_spec(spec);
  EXPECT_EQ(r.identifier, "gasl:spr/1");
  EXPECT_EQ(r.values("functionality"), (std::vector<std::string>{"asr", "packager"}));
  EXPECT_TRUE(validate_record(r).empty());
  EXPECT_EQ(describe_spec(spec), r);
}

TEST(MetadataDescribe, EmptySpecStillValid) {
  auto spec = gasl::parse_or_throw(R"(<application name="empty" version="1"/>)");
  auto r = describe_spec(spec);
  EXPECT_TRUE(r.values("functionality").empty());
  EXPECT_TRUE(validate_record(r).empty());
}

TEST(MetadataFiles, RecordAndCatalogRoundTrip) {
  auto r = rec("oai:x", "2002-03-04T05:06:07Z", {{"title", "A & B"}, {"language", "en"}});
  EXPECT_EQ(read_record(xml::parse(serialize_record(r))), r);
  auto catalog = harvest({fixture("repo-a"), fixture("repo-b")}).catalog;
  auto text = serialize_catalog(catalog);
  EXPECT_EQ(serialize_catalog(read_catalog(xml::parse(text))), text);
  EXPECT_EQ(format_timestamp(*parse_timestamp("2002-03-04")), "2002-03-04T00:00:00Z");
  EXPECT_FALSE(parse_timestamp("2002-13-04"));
}
