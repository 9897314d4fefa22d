#include <gtest/gtest.h>

#include <cmath>

#include "gridstealth/apps.hpp"
#include "gridstealth/broker.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

using namespace gridstealth;
using namespace gridstealth::broker;

namespace {

struct TwoNode {
  gasl::AppSpec spec = gasl::load(std::string(FIXTURE_DIR) + "/two-node/spec.xml");
  GridTopology topology = load_topology(std::string(FIXTURE_DIR) + "/two-node/topology.xml");
  components::ComponentCatalog catalog = apps::default_catalog();
};

GridTopology single_node(double speed = 1) {
  GridTopology t;
  t.add_node({"only", speed, kUnlimited, kUnlimited, {}});
  return t;
}

GroundedTask task(const std::string& id, double work) {
  GroundedTask t;
  t.id = id;
  t.component = "ag-server";
  t.work = work;
  return t;
}

Artifact graph_of(const std::string& id) {
  Artifact a;
  a.id = id;
  a.type = apps::types::graph;
  a.graph = annotation::AnnotationGraph{};
  return a;
}

}  // namespace

TEST(Plan, SingleTaskLocalData) {
  TaskGraph g;
  g.tasks.push_back(task("t", 100));
  for (auto p : {Policy::processor_centric, Policy::data_centric}) {
    auto s = plan(g, single_node(), p);
    EXPECT_DOUBLE_EQ(s.times.at("t").start, 0);
    EXPECT_DOUBLE_EQ(s.times.at("t").finish, 100);
    EXPECT_DOUBLE_EQ(makespan(s), 100);
  }
}

TEST(Plan, TwoNodePolicies) {
  TwoNode f;
  auto pc = plan(f.spec, f.catalog, f.topology, Policy::processor_centric);
  EXPECT_EQ(pc.placement.at("recognize"), "N2");
  EXPECT_DOUBLE_EQ(makespan(pc), 110);
  ASSERT_EQ(pc.transfers.size(), 1u);
  EXPECT_EQ(pc.transfers[0].dataset, "D");
  EXPECT_DOUBLE_EQ(pc.transfers[0].finish, 100);

  auto dc = plan(f.spec, f.catalog, f.topology, Policy::data_centric);
  EXPECT_EQ(dc.placement.at("recognize"), "N1");
  EXPECT_DOUBLE_EQ(makespan(dc), 100);
  EXPECT_TRUE(dc.transfers.empty());

  auto graph = build_task_graph(f.spec, f.catalog, f.topology);
  EXPECT_DOUBLE_EQ(oracle::optimal_makespan(graph, f.topology), 100);
}

TEST(Plan, Infeasible) {
  TaskGraph g;
  auto t = task("t", 10);
  t.min_node_speed = 5;
  g.tasks.push_back(t);
  GridTopology topo;
  topo.add_node({"a", 1, kUnlimited, kUnlimited, {}});
  topo.add_node({"b", 4, kUnlimited, kUnlimited, {}});
  try {
    plan(g, topo, Policy::processor_centric);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "infeasible");
    EXPECT_EQ(e.subject(), "t");
  }
}

TEST(Plan, UnlinkedTransfer) {
  TaskGraph g;
  auto t = task("t", 10);
  t.inputs.push_back({"D", 50, "", false});
  g.tasks.push_back(t);
  GridTopology topo;
  topo.add_node({"a", 1, kUnlimited, kUnlimited, {{"D", 50}}});
  topo.add_node({"b", 4, kUnlimited, kUnlimited, {}});
  EXPECT_THROW(plan(g, topo, Policy::processor_centric), Error);
  EXPECT_EQ(plan(g, topo, Policy::data_centric).placement.at("t"), "a");
}

TEST(Plan, TiesGoToSmallestNodeId) {
  TaskGraph g;
  g.tasks.push_back(task("t", 10));
  GridTopology topo;
  topo.add_node({"beta", 2, kUnlimited, kUnlimited, {}});
  topo.add_node({"alpha", 2, kUnlimited, kUnlimited, {}});
  EXPECT_EQ(plan(g, topo, Policy::processor_centric).placement.at("t"), "alpha");
  EXPECT_EQ(plan(g, topo, Policy::data_centric).placement.at("t"), "alpha");
}

TEST(Plan, TransferredDataIsCached) {
  TaskGraph g;
  for (auto id : {"a", "b"}) {
    auto t = task(id, 10);
    t.inputs.push_back({"D", 100, "", false});
    g.tasks.push_back(t);
  }
  GridTopology topo;
  topo.add_node({"store", 1, kUnlimited, kUnlimited, {{"D", 100}}});
  topo.add_node({"fast", 10, kUnlimited, kUnlimited, {}});
  topo.add_link("store", "fast", 10);
  auto s = plan(g, topo, Policy::processor_centric);
  EXPECT_EQ(s.transfers.size(), 1u);
  EXPECT_DOUBLE_EQ(s.times.at("b").start, 11);
}

TEST(Makespan, EmptyAndChain) {
  EXPECT_DOUBLE_EQ(makespan(Schedule{}), 0);
  TaskGraph g;
  g.tasks = {task("a", 10), task("b", 20), task("c", 30)};
  g.tasks[1].inputs.push_back({"a.graph", 0, "a", false});
  g.tasks[2].inputs.push_back({"b.graph", 0, "b", false});
  g.tasks[0].outputs.push_back({"a.graph", 0});
  g.tasks[1].outputs.push_back({"b.graph", 0});
  g.precedence = {{"a", "b"}, {"b", "c"}};
  auto s = plan(g, single_node(), Policy::processor_centric);
  EXPECT_DOUBLE_EQ(makespan(s), 60);
}

TEST(Plan, RandomSchedulesObeyTheLaws) {
  gen::Rng rng(11);
  for (int i = 0; i < 150; ++i) {
    auto inst = gen::random_instance(rng);
    auto graph = build_task_graph(inst.spec, apps::default_catalog(), inst.topology);
    for (auto p : {Policy::processor_centric, Policy::data_centric}) {
      auto s = plan(graph, inst.topology, p);
      EXPECT_EQ(oracle::schedule_law_violations(s, graph, inst.topology), std::vector<std::string>{});
      EXPECT_TRUE(validate_schedule(s, graph, inst.topology).empty());
      EXPECT_EQ(plan(graph, inst.topology, p), s);
      EXPECT_EQ(to_json(s).dump(), to_json(plan(graph, inst.topology, p)).dump());
    }
  }
}

TEST(Plan, PoliciesNeverBeatTheOptimum) {
  gen::Rng rng(3);
  for (int i = 0; i < 60; ++i) {
    auto inst = gen::random_instance(rng, 4, 3);
    auto graph = build_task_graph(inst.spec, apps::default_catalog(), inst.topology);
    double best = oracle::optimal_makespan(graph, inst.topology);
    for (auto p : {Policy::processor_centric, Policy::data_centric}) {
      auto s = plan(graph, inst.topology, p);
      EXPECT_GE(makespan(s) + 1e-9, best);
      EXPECT_NEAR(makespan(s), oracle::placement_makespan(graph, inst.topology, s.placement), 1e-6);
    }
  }
}

TEST(Plan, DataCentricWinsWhenDataIsHeavy) {
  gen::Rng rng(5);
  for (int i = 0; i < 60; ++i) {
    auto inst = gen::data_heavy_instance(rng);
    auto graph = build_task_graph(inst.spec, apps::default_catalog(), inst.topology);
    auto dc = makespan(plan(graph, inst.topology, Policy::data_centric));
    auto pc = makespan(plan(graph, inst.topology, Policy::processor_centric));
    EXPECT_LE(dc, pc + 1e-9);
  }
}

TEST(Deadlines, Examples) {
  TwoNode f;
  auto pc = plan(f.spec, f.catalog, f.topology, Policy::processor_centric);
  auto v = verify_deadlines(pc, f.spec);
  ASSERT_EQ(v.size(), 2u);
  EXPECT_EQ(v[0], (DeadlineViolation{"recognize", false, 50, 110}));
  EXPECT_TRUE(v[1].application);

  auto dc = plan(f.spec, f.catalog, f.topology, Policy::data_centric);
  auto dv = verify_deadlines(dc, f.spec);
  ASSERT_EQ(dv.size(), 1u);  // the application deadline is met exactly
  EXPECT_EQ(dv[0].subject, "recognize");

  auto loose = f.spec;
  loose.deadline.reset();
  loose.tasks[0].processing.deadline.reset();
  EXPECT_TRUE(verify_deadlines(pc, loose).empty());
}

TEST(Collate, OneSinkAndTwoSinks) {
  auto spec = gasl::parse_or_throw(R"(<application name="c" version="2">
    <task id="a"><component kind="annotation-server"/></task>
    <task id="b"><component kind="annotation-server"/></task>
    <edge from="a.graph" to="b.graph0"/></application>)");
  auto bundle = collate(spec, {{"a", {{"graph", graph_of("ga")}}}, {"b", {{"graph", graph_of("G")}}}});
  ASSERT_EQ(bundle.entries.size(), 1u);
  EXPECT_EQ(bundle.entries.at("b.graph").id, "G");
  EXPECT_EQ(bundle.application, "gasl:c/2");

  auto parallel = gasl::parse_or_throw(R"(<application name="p" version="1">
    <task id="a"><component kind="annotation-server"/></task>
    <task id="b"><component kind="annotation-server"/></task></application>)");
  auto two = collate(parallel, {{"a", {{"graph", graph_of("x")}}}, {"b", {{"graph", graph_of("y")}}}});
  EXPECT_EQ(two.entries.size(), 2u);

  try {
    collate(parallel, {{"a", {{"graph", graph_of("x")}}}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "missing-output");
    EXPECT_EQ(e.subject(), "b");
  }
}

TEST(Collate, FailedRunNamesTask) {
  gridsim::RunResult run;
  run.failure = Diagnostic{"task-failed", "asr-07", "boom", 0};
  auto spec = gasl::parse_or_throw(R"(<application name="p" version="1">
    <task id="a"><component kind="annotation-server"/></task></application>)");
  try {
    collate(spec, run);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "task-failed");
    EXPECT_EQ(e.subject(), "asr-07");
  }
}

TEST(Broker, SubmitNeedsOnlySpecAndPolicy) {
  apps::Corpus corpus{"corpus", 25, apps::types::wav};
  auto spec = apps::build_spr_spec(corpus, false, 10 * components::kBytesPerMB);
  auto topology = apps::default_topology(corpus.location, corpus.size_mb);
  Broker broker(apps::default_catalog(), topology, apps::full_registry(), apps::spr_inputs(spec, topology));
  auto a = broker.submit(spec, Policy::data_centric);
  auto b = broker.submit(spec, Policy::processor_centric);
  ASSERT_EQ(a.entries.size(), 1u);
  EXPECT_TRUE(a.entries.count("index.index"));
  EXPECT_EQ(a, b);
  auto record = broker.describe(spec, a);
  EXPECT_TRUE(record.has("resource-class", "data-source"));
}

TEST(Broker, ResolvesBeforePlanning) {
  auto spec = gasl::load(std::string(FIXTURE_DIR) + "/specs/mp3-asr.xml");
  auto topology = load_topology(std::string(FIXTURE_DIR) + "/topology/grid.xml");
  Broker broker(apps::default_catalog(), topology, apps::full_registry(), gridsim::synthesize_inputs(spec, topology));
  auto bundle = broker.submit(spec, Policy::processor_centric);
  EXPECT_TRUE(bundle.entries.count("recognize.graph"));
}

TEST(Broker, RejectsInvalidTopology) {
  GridTopology t;
  t.add_node({"a", 0, kUnlimited, kUnlimited, {}});
  EXPECT_THROW(Broker(apps::default_catalog(), t, apps::full_registry(), {}), Error);
}
