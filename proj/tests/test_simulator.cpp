#include <doctest.h>

#include <cmath>

#include "kubewatt/profile_io.hpp"
#include "kubewatt/simulator.hpp"
#include "testutil.hpp"

using namespace kubewatt;
using namespace kubewatt::testutil;

namespace {

ControlPlaneMatcher paper_matcher() {
  return ControlPlaneMatcher(
      {"nfs-.*", "calico-.*", "canal-.*", "coredns-.*", "metrics-.*", "tekton-.*", "kubewatt-.*"});
}

bool has_pod(const CpuSample& sample, const std::string& pod) {
  for (const auto& [ref, cores] : sample.containers) {
    if (ref.pod == pod) return true;
  }
  return false;
}

double pod_cores(const CpuSample& sample, const std::string& pod) {
  for (const auto& [ref, cores] : sample.containers) {
    if (ref.pod == pod) return cores;
  }
  return -1.0;
}

}  // namespace

TEST_CASE("builtin catalog carries the four experiment scenarios") {
  auto names = builtin_scenario_names();
  REQUIRE(names.size() == 4);
  for (const auto& name : names) {
    auto scenario = builtin_scenario(name);
    CHECK(scenario.name == name);
    CHECK_FALSE(scenario.nodes.empty());
  }
  CHECK_THROWS_AS(builtin_scenario("no-such"), Error);
}

TEST_CASE("single-stressor: 32 cores inside a burst, idle pods completed and absent") {
  auto scenario = builtin_scenario("single-stressor");
  auto state = simulate_state(scenario, Duration{200'000});
  const CpuSample& sample = state.cpu.at(NodeRef{"sim-0"});
  CHECK(pod_cores(sample, "stress-runner") == 32.0);
  for (int i = 0; i < 16; ++i) {
    char name[16];
    std::snprintf(name, sizeof(name), "idle-%02d", i);
    CHECK_FALSE(has_pod(sample, name));
  }
  // between bursts the runner sleeps near zero
  auto idle_state = simulate_state(scenario, Duration{500'000});
  CHECK(pod_cores(idle_state.cpu.at(NodeRef{"sim-0"}), "stress-runner") == 0.05);
}

TEST_CASE("inactive-pods: deletion leaves the stressor untouched") {
  auto scenario = builtin_scenario("inactive-pods");
  auto before = simulate_state(scenario, Duration{120'000});
  auto after = simulate_state(scenario, Duration{240'000});
  CHECK(pod_cores(before.cpu.at(NodeRef{"sim-0"}), "stress-runner") == 8.0);
  CHECK(pod_cores(after.cpu.at(NodeRef{"sim-0"}), "stress-runner") == 8.0);
  CHECK_FALSE(has_pod(before.cpu.at(NodeRef{"sim-0"}), "idle-00"));
  CHECK_FALSE(has_pod(after.cpu.at(NodeRef{"sim-0"}), "idle-00"));
  // CPU sums are identical across the deletion: completed pods never
  // contributed anything
  CHECK(before.cpu.at(NodeRef{"sim-0"}).node_cores ==
        after.cpu.at(NodeRef{"sim-0"}).node_cores);
}

TEST_CASE("before any event only the control plane is up") {
  auto scenario = builtin_scenario("inactive-pods");
  auto state = simulate_state(scenario, Duration{0});
  const CpuSample& sample = state.cpu.at(NodeRef{"sim-0"});
  for (const auto& [ref, cores] : sample.containers) {
    CHECK(paper_matcher().matches(ref.pod));
  }
  CHECK(state.true_container_watts.empty());
}

TEST_CASE("simulate_state rejects out-of-range times") {
  auto scenario = builtin_scenario("idle");
  CHECK_THROWS_AS(simulate_state(scenario, Duration{-1}), Error);
  CHECK_THROWS_AS(simulate_state(scenario, scenario.duration + Duration{1}), Error);
}

TEST_CASE("simulated metrics report the stressor within 5% of its scripted level") {
  auto scenario = builtin_scenario("inactive-pods");
  SimulatedCluster cluster(std::move(scenario));
  auto snap = cluster.cpu_source().poll(scenario_epoch() + Duration{120'000});
  double cores = pod_cores(snap.per_node.at(NodeRef{"sim-0"}), "stress-runner");
  CHECK(std::abs(cores - 8.0) / 8.0 < 0.05);
}

TEST_CASE("no state ever has negative cpu or watts") {
  for (const auto& name : builtin_scenario_names()) {
    auto scenario = builtin_scenario(name);
    SimulatedCluster cluster(builtin_scenario(name));
    auto sources = cluster.power_sources();
    for (Duration t{0}; t <= scenario.duration; t += Duration{60'000}) {
      auto state = simulate_state(scenario, t);
      for (const auto& [node, sample] : state.cpu) {
        CHECK(sample.node_cores >= 0.0);
        for (const auto& [ref, cores] : sample.containers) CHECK(cores >= 0.0);
      }
      for (PowerSource* src : sources) {
        CHECK(src->poll(scenario_epoch() + t).watts >= 0.0);
      }
    }
  }
}

TEST_CASE("power trace trails cpu steps by the configured lag") {
  ClusterScenario s;
  s.name = "step";
  s.seed = 1;
  s.duration = Duration{300'000};
  ScenarioNode node;
  node.node = NodeRef{"n"};
  node.capacity_cores = 64.0;
  node.power.static_floor_w = 100.0;
  node.power.slope_w_per_core = 1.0;
  node.power.lag = Duration{60'000};
  node.power.seed = 1;
  s.nodes = {node};
  s.events.push_back({Duration{60'000}, EventKind::StartPod, "step", "app", node.node, 16.0});

  SimulatedCluster cluster(std::move(s));
  auto* source = cluster.power_sources()[0];
  // step happens at t=60; with 60 s lag the power follows at t=120
  CHECK(source->poll(scenario_epoch() + Duration{90'000}).watts == doctest::Approx(100.0));
  CHECK(source->poll(scenario_epoch() + Duration{119'000}).watts == doctest::Approx(100.0));
  CHECK(source->poll(scenario_epoch() + Duration{120'000}).watts == doctest::Approx(116.0));
}

TEST_CASE("control-plane coupling lands on the workload containers") {
  ClusterScenario s;
  s.name = "coupled";
  s.seed = 2;
  s.duration = Duration{120'000};
  ScenarioNode node;
  node.node = NodeRef{"n"};
  node.capacity_cores = 64.0;
  node.system_overhead_cores = 0.0;
  node.power.static_floor_w = 100.0;
  node.power.slope_w_per_core = 1.0;
  node.power.seed = 2;
  s.nodes = {node};
  s.control_plane_pods = {{"coredns-x", "kube-system", node.node, 0.1, 0.01}};
  s.events.push_back({Duration{0}, EventKind::StartPod, "worker", "app", node.node, 10.0});

  ReplayOptions opts;
  opts.speedup = 1e9;
  opts.matcher = paper_matcher();
  ReplayEngine engine(std::move(s), opts);
  bool checked = false;
  engine.run([&](const ReplayTick& tick) {
    if (tick.offset < Duration{30'000}) return;
    REQUIRE(tick.records.size() == 1);
    const auto& rec = tick.records[0];
    // static covers baseline control plane only; the coupled 0.1 cores
    // of control-plane CPU surface as workload watts
    CHECK(rec.per_container.size() == 1);
    double attributed = rec.per_container.begin()->second;
    CHECK(attributed == doctest::Approx(10.0 + 0.01 * 10.0).epsilon(1e-9));
    for (const auto& [ref, watts] : rec.per_container) {
      CHECK_FALSE(paper_matcher().matches(ref.pod));
    }
    checked = true;
  });
  CHECK(checked);
}

TEST_CASE("replay rejects speedups below one") {
  CHECK_THROWS_AS(ReplayEngine(builtin_scenario("idle"), ReplayOptions{.speedup = 0.5}), Error);
  CHECK_THROWS_AS(VirtualClock(scenario_epoch(), 0.5), Error);
}

TEST_CASE("replay traces are bit-identical for identical seeds") {
  auto trace_of = [](std::uint64_t seed) {
    ReplayOptions opts;
    opts.speedup = 1e9;
    opts.matcher = paper_matcher();
    ReplayEngine engine(builtin_scenario("inactive-pods", seed), opts);
    std::string csv = TraceWriter::header();
    engine.run([&](const ReplayTick& tick) { TraceWriter::append_tick(csv, tick); });
    return csv;
  };
  CHECK(trace_of(77) == trace_of(77));
  CHECK(trace_of(77) != trace_of(78));
}

TEST_CASE("scenario json round-trips") {
  auto scenario = builtin_scenario("inactive-pods");
  auto text = scenario_to_json(scenario);
  auto loaded = scenario_from_json(text);
  CHECK(loaded.name == scenario.name);
  CHECK(loaded.duration == scenario.duration);
  CHECK(loaded.events.size() == scenario.events.size());
  CHECK(loaded.nodes[0].power.seed == scenario.nodes[0].power.seed);
  CHECK(scenario_to_json(loaded) == text);
}

TEST_CASE("scenario validation catches schema violations") {
  CHECK_THROWS_AS(scenario_from_json("{"), Error);
  CHECK_THROWS_AS(scenario_from_json(R"({"name":"x","duration_s":10,"nodes":[]})"), Error);
  // event referencing an unknown node
  CHECK_THROWS_AS(scenario_from_json(R"({
    "name": "x", "duration_s": 10,
    "nodes": [{"name":"a","capacity_cores":4,"power":{"static_floor_w":10}}],
    "events": [{"at_s":1,"kind":"start","pod":"p","namespace":"ns","node":"ghost","cpu_cores":1}]
  })"),
                  Error);
}

TEST_CASE("ground-truth static power includes control plane and overhead") {
  auto scenario = builtin_scenario("random-stressor");
  // floor 199.1 + 1.2 W/core * (0.25 control plane + 0.05 overhead)
  CHECK(scenario.true_static_watts(NodeRef{"sim-0"}) == doctest::Approx(199.46).epsilon(1e-12));
}
