#include <gtest/gtest.h>

#include <numeric>

#include "gridstealth/apps.hpp"
#include "gridstealth/broker.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

using namespace gridstealth;
using namespace gridstealth::apps;

namespace {

constexpr std::uint64_t kTenMB = 10 * components::kBytesPerMB;

std::size_t count_kind(const gasl::AppSpec& spec, const std::string& kind) {
  return static_cast<std::size_t>(std::count_if(spec.tasks.begin(), spec.tasks.end(), [&](const gasl::TaskDecl& t) {
    return t.component.value == kind;
  }));
}

std::vector<std::string> numbered(const std::string& prefix, std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

annotation::AnnotationGraph words(const std::vector<std::string>& labels) {
  std::vector<double> bounds(labels.size() + 1);
  std::iota(bounds.begin(), bounds.end(), 0.0);
  return gridsim::detail::sequence_graph("s", static_cast<double>(labels.size()), bounds, labels, "words");
}

}  // namespace

TEST(Spr, FiftyRecognizers) {
  auto spec = build_spr_spec({"corpus", 500, types::wav}, false, kTenMB);
  EXPECT_EQ(count_kind(spec, "asr"), 50u);
  EXPECT_EQ(count_kind(spec, "alignment"), 0u);
  EXPECT_TRUE(spec.find_task("asr-00"));
  EXPECT_TRUE(spec.find_task("asr-49"));
}

TEST(Spr, TranscriptsSwitchToAlignment) {
  auto spec = build_spr_spec({"corpus", 500, types::wav}, true, kTenMB);
  EXPECT_EQ(count_kind(spec, "alignment"), 50u);
  EXPECT_EQ(count_kind(spec, "asr"), 0u);
}

TEST(Spr, SmallCorpusOneChunk) {
  auto spec = build_spr_spec({"corpus", 3, types::wav}, false, kTenMB);
  EXPECT_EQ(count_kind(spec, "asr"), 1u);
  EXPECT_THROW(build_spr_spec({"corpus", 3, types::wav}, false, 0), Error);
}

TEST(Spr, SmokeProperty) {
  gen::Rng rng(17);
  const auto catalog = default_catalog();
  for (int i = 0; i < 40; ++i) {
    double mb = gen::between(rng, 1, 300);
    auto chunk = static_cast<std::uint64_t>(gen::between(rng, 1, 64)) * components::kBytesPerMB;
    bool transcripts = gen::coin(rng);
    auto spec = build_spr_spec({"corpus", mb, types::wav}, transcripts, chunk);
    EXPECT_TRUE(gasl::validate(spec).empty());
    EXPECT_TRUE(resolver::check(spec, catalog).empty());
    auto topo = default_topology("corpus", mb);
    for (auto p : {broker::Policy::processor_centric, broker::Policy::data_centric})
      EXPECT_NO_THROW(broker::plan(spec, catalog, topo, p));
  }
}

TEST(Spr, MpegCorpusGainsDecoder) {
  auto spec = build_spr_spec({"corpus", 20, types::mp3}, false, kTenMB);
  auto resolved = resolver::resolve(spec, default_catalog());
  EXPECT_EQ(resolved.tasks.size(), spec.tasks.size() + 1);
  EXPECT_EQ(resolved.find_task("conv-1")->component.value, "mp3-to-wav");
}

TEST(Passages, FoundInExactlyTheRightChunk) {
  Corpus corpus{"corpus", 30, types::wav};
  auto spec = build_spr_spec(corpus, false, kTenMB);
  auto topology = default_topology(corpus.location, corpus.size_mb);
  broker::Broker broker(default_catalog(), topology, full_registry(), spr_inputs(spec, topology));
  auto bundle = broker.submit(spec, broker::Policy::data_centric);
  const auto& index = *bundle.entries.at("index.index").graph;

  auto word = oracle::token_label("corpus/chunk1", 42);
  std::vector<Passage> expected;
  for (int c = 0; c < 3; ++c)
    for (std::uint64_t i = 0; i < 327; ++i)
      if (oracle::token_label("corpus/chunk" + std::to_string(c), i) == word)
        expected.push_back({"corpus/chunk" + std::to_string(c), static_cast<double>(i), static_cast<double>(i + 1)});
  ASSERT_FALSE(expected.empty());
  EXPECT_EQ(query_passages(index, word), expected);
  EXPECT_EQ(query_passages(index, "TOK42-" + word.substr(6)), expected);
  EXPECT_TRUE(query_passages(index, "absent").empty());
  EXPECT_TRUE(query_passages(annotation::AnnotationGraph{}, word).empty());
}

TEST(Passages, LexiconExpandsSenses) {
  auto lex = parse_lexicon(kDefaultLexicon);
  auto g = words({"shower", "sun", "precipitation", "bird"});
  auto found = query_passages(g, "Rain", lex);
  ASSERT_EQ(found.size(), 2u);
  EXPECT_EQ(found[0], (Passage{"s", 0, 1}));
  EXPECT_EQ(found[1], (Passage{"s", 2, 3}));
  EXPECT_EQ(query_passages(g, "rain").size(), 0u);
}

TEST(Collaboration, TenPercentOfTwoHundred) {
  auto plan = plan_collaboration(numbered("item", 200), {"a", "b", "c", "d"}, Mode::peer_partition, 0.10);
  std::size_t doubled = 0, total = 0;
  for (const auto& [item, who] : plan.assignments) {
    doubled += who.size() == 2;
    total += who.size();
    if (who.size() == 2) EXPECT_NE(who[0], who[1]);
  }
  EXPECT_EQ(doubled, 20u);
  EXPECT_EQ(total, 220u);
  EXPECT_EQ(plan.assignments.size(), 200u);
}

TEST(Collaboration, RoundRobinLoads) {
  auto plan = plan_collaboration(numbered("i", 10), {"a", "b", "c"}, Mode::peer_partition, 0.10);
  std::map<std::string, int> first;
  std::size_t doubled = 0;
  for (const auto& [item, who] : plan.assignments) {
    ++first[who[0]];
    doubled += who.size() == 2;
  }
  EXPECT_EQ(first, (std::map<std::string, int>{{"a", 4}, {"b", 3}, {"c", 3}}));
  EXPECT_EQ(doubled, 1u);
  EXPECT_EQ(plan.assignments[0].second, (std::vector<std::string>{"a", "b"}));
}

TEST(Collaboration, EmptyAndErrors) {
  EXPECT_TRUE(plan_collaboration({}, {"a"}, Mode::peer_partition, 0.5).assignments.empty());
  EXPECT_THROW(plan_collaboration({"x"}, {"a", "b", "c"}, Mode::dual_theory, 0), Error);
  EXPECT_THROW(plan_collaboration({"x"}, {}, Mode::peer_partition, 0), Error);
  EXPECT_THROW(plan_collaboration({"x"}, {"a"}, Mode::peer_partition, 1.5), Error);
  EXPECT_THROW(plan_collaboration(numbered("i", 10), {"a"}, Mode::peer_partition, 0.5), Error);
  EXPECT_NO_THROW(plan_collaboration(numbered("i", 10), {"a"}, Mode::peer_partition, 0.05));
}

TEST(Collaboration, ModeInvariants) {
  gen::Rng rng(23);
  for (int r = 0; r < 200; ++r) {
    auto n = static_cast<std::size_t>(gen::between(rng, 0, 500));
    auto k = static_cast<std::size_t>(gen::between(rng, 2, 10));
    double f = gen::uniform(rng, 0, 1);
    auto items = numbered("i", n);
    auto people = numbered("p", k);
    auto multiplicity = [](const CollaborationPlan& p) {
      std::size_t m = 0;
      for (const auto& [item, who] : p.assignments) m += who.size();
      return m;
    };
    auto peer = plan_collaboration(items, people, Mode::peer_partition, f);
    EXPECT_EQ(multiplicity(peer), n + static_cast<std::size_t>(std::floor(f * static_cast<double>(n) + 1e-9)));
    auto vet = plan_collaboration(items, people, Mode::supervisor_vet, f);
    for (const auto& [item, who] : vet.assignments) {
      ASSERT_EQ(who.size(), 2u);
      EXPECT_EQ(who[1], "p0");
      EXPECT_NE(who[0], "p0");
    }
    auto hm = plan_collaboration(items, people, Mode::human_machine, f);
    for (const auto& [item, who] : hm.assignments) EXPECT_EQ(who.back(), people.back());
    auto dual = plan_collaboration(items, {"x", "y"}, Mode::dual_theory, f);
    EXPECT_EQ(multiplicity(dual), 2 * n);
  }
}

TEST(Themes, AddsOneArcPerMatch) {
  auto g = words({"Rain", "wind"});
  auto out = map_themes(g, {{"weather", {"rain", "sun"}}});
  ASSERT_EQ(out.arcs.size(), 3u);
  EXPECT_EQ(out.arcs[2].label, "weather");
  EXPECT_EQ(out.arcs[2].layer, "themes");
  EXPECT_EQ(out.arcs[2].start, g.arcs[0].start);
  EXPECT_EQ(out.arcs[2].end, g.arcs[0].end);
  EXPECT_EQ(map_themes(g, {}), g);
  auto twice = map_themes(g, {{"weather", {"rain"}}, {"wet", {"rain"}}});
  EXPECT_EQ(twice.arcs.size(), 4u);
}

TEST(Themes, NeverRemovesArcs) {
  auto g = words({"a", "b", "a", "c"});
  auto out = map_themes(g, parse_themes("x=a,b;y=c"));
  ASSERT_GE(out.arcs.size(), g.arcs.size());
  for (std::size_t i = 0; i < g.arcs.size(); ++i) EXPECT_EQ(out.arcs[i], g.arcs[i]);
  EXPECT_EQ(out.arcs.size(), 8u);
}

TEST(Themes, Parse) {
  auto t = parse_themes("weather=rain, sun ;sport=goal");
  EXPECT_EQ(t.at("weather"), (std::vector<std::string>{"rain", "sun"}));
  EXPECT_EQ(t.at("sport"), (std::vector<std::string>{"goal"}));
  EXPECT_TRUE(parse_themes("").empty());
  EXPECT_THROW(parse_themes("nokeywords"), Error);
}

TEST(Lexicon, LookupNormalises) {
  auto lex = parse_lexicon("bird\tb er d\tfowl;avian\n# comment\n\n");
  auto hits = lexicon_lookup(lex, "Bird");
  ASSERT_EQ(hits.size(), 1u);
  EXPECT_EQ(hits[0].senses, (std::vector<std::string>{"fowl", "avian"}));
  EXPECT_TRUE(lexicon_lookup(lex, "fish").empty());
  EXPECT_TRUE(lexicon_lookup(Lexicon{}, "bird").empty());
}

TEST(Lexicon, RoundTripAndErrors) {
  auto lex = parse_lexicon(kDefaultLexicon);
  EXPECT_EQ(parse_lexicon(serialize_lexicon(lex)), lex);
  try {
    parse_lexicon("ok\tp\n\nbroken\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "invalid-lexicon-line");
    EXPECT_EQ(e.diagnostics()[0].line, 3);
  }
}
