#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "kubewatt/rng.hpp"
#include "kubewatt/simulator.hpp"

namespace kubewatt {

using nlohmann::json;

namespace {

constexpr double kPaperStaticFloorW = 199.1;
constexpr double kSlopeWattsPerCore = 1.2;
constexpr double kCapacityCores = 64.0;

std::uint64_t node_seed(std::uint64_t scenario_seed, const std::string& node_name) {
  return hash_mix(scenario_seed, fnv1a(node_name));
}

ScenarioNode make_node(const std::string& name, std::uint64_t scenario_seed, double overhead,
                       Duration lag, double noise_sd) {
  ScenarioNode n;
  n.node = NodeRef{name};
  n.capacity_cores = kCapacityCores;
  n.system_overhead_cores = overhead;
  n.power.static_floor_w = kPaperStaticFloorW;
  n.power.slope_w_per_core = kSlopeWattsPerCore;
  n.power.lag = lag;
  n.power.noise_sd_w = noise_sd;
  n.power.seed = node_seed(scenario_seed, name);
  return n;
}

std::vector<ControlPlanePodSpec> control_plane(const NodeRef& node, double coredns,
                                               double calico, double metrics_server) {
  return {
      {"coredns-5d78c9869d-abcde", "kube-system", node, coredns, 0.0},
      {"calico-node-x7k2p", "kube-system", node, calico, 0.0},
      {"metrics-server-6f8c7b4d9-qwxyz", "kube-system", node, metrics_server, 0.0},
  };
}

void add_completed_idlers(ClusterScenario& s, int count, const NodeRef& node) {
  // Pods that ran `date` once and exited before measurements started:
  // created and completed at t=0, visible to nothing that matters.
  for (int i = 0; i < count; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "idle-%02d", i);
    s.events.push_back({Duration{0}, EventKind::StartPod, name, "idle", node, 0.02});
    s.events.push_back({Duration{0}, EventKind::CompletePod, name, "idle", node, 0.0});
  }
}

ClusterScenario make_idle(std::uint64_t seed) {
  ClusterScenario s;
  s.name = "idle";
  s.seed = seed;
  s.duration = Duration{310'000};  // one base-init window plus slack
  s.nodes = {make_node("sim-0", seed, 0.03, Duration{0}, 0.2)};
  s.control_plane_pods = control_plane(s.nodes[0].node, 0.03, 0.02, 0.01);
  return s;
}

ClusterScenario make_single_stressor(std::uint64_t seed) {
  ClusterScenario s;
  s.name = "single-stressor";
  s.seed = seed;
  s.duration = Duration{2'100'000};  // 35 min: lead-in, 3 stress/sleep cycles, lag tail
  s.nodes = {make_node("sim-0", seed, 0.05, Duration{60'000}, 0.2)};
  const NodeRef node = s.nodes[0].node;
  s.control_plane_pods = control_plane(node, 0.12, 0.08, 0.05);
  add_completed_idlers(s, 16, node);
  // The stressor pod lives for the whole scenario; stress-ng bursts take
  // it to 32 cores for 5 minutes, then it sleeps near zero for 5.
  s.events.push_back({Duration{0}, EventKind::StartPod, "stress-runner", "stress", node, 0.05});
  for (int cycle = 0; cycle < 3; ++cycle) {
    Duration burst_start{180'000 + cycle * 600'000};
    s.events.push_back({burst_start, EventKind::StartPod, "stress-runner", "stress", node, 32.0});
    s.events.push_back(
        {burst_start + Duration{300'000}, EventKind::StartPod, "stress-runner", "stress", node, 0.05});
  }
  return s;
}

ClusterScenario make_inactive_pods(std::uint64_t seed) {
  ClusterScenario s;
  s.name = "inactive-pods";
  s.seed = seed;
  s.duration = Duration{600'000};
  s.nodes = {make_node("sim-0", seed, 0.05, Duration{60'000}, 0.05)};
  const NodeRef node = s.nodes[0].node;
  s.control_plane_pods = control_plane(node, 0.12, 0.08, 0.05);
  add_completed_idlers(s, 64, node);
  // Stabilize one minute, stress 8 CPUs, delete the completed pods two
  // minutes into the stress, stop the stressor later.
  s.events.push_back({Duration{60'000}, EventKind::StartPod, "stress-runner", "stress", node, 8.0});
  for (int i = 0; i < 64; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "idle-%02d", i);
    s.events.push_back({Duration{180'000}, EventKind::DeletePod, name, "idle", node, 0.0});
  }
  s.events.push_back({Duration{420'000}, EventKind::StopPod, "stress-runner", "stress", node, 0.0});
  return s;
}

ClusterScenario make_random_stressor(std::uint64_t seed) {
  ClusterScenario s;
  s.name = "random-stressor";
  s.seed = seed;
  s.duration = Duration{28'800'000};  // 8 h, sixteen 30-min bootstrap windows
  s.nodes = {make_node("sim-0", seed, 0.05, Duration{0}, 0.2)};
  const NodeRef node = s.nodes[0].node;
  s.control_plane_pods = control_plane(node, 0.12, 0.08, 0.05);
  // stress-ng at a fresh uniform level in 1..64 every three minutes.
  SplitMix64 levels(hash_mix(seed, fnv1a("levels")));
  for (Duration at{0}; at < s.duration; at += Duration{180'000}) {
    double cores = static_cast<double>(levels.next_in_pow2_range(1, 64));
    s.events.push_back({at, EventKind::StartPod, "stress-runner", "stress", node, cores});
  }
  return s;
}

}  // namespace

std::vector<std::string> builtin_scenario_names() {
  return {"idle", "single-stressor", "inactive-pods", "random-stressor"};
}

ClusterScenario builtin_scenario(const std::string& name, std::optional<std::uint64_t> seed_override) {
  ClusterScenario s;
  if (name == "idle") {
    s = make_idle(seed_override.value_or(1001));
  } else if (name == "single-stressor") {
    s = make_single_stressor(seed_override.value_or(1002));
  } else if (name == "inactive-pods") {
    s = make_inactive_pods(seed_override.value_or(1003));
  } else if (name == "random-stressor") {
    s = make_random_stressor(seed_override.value_or(1004));
  } else {
    throw Error(ErrorKind::ValidationError, "no builtin scenario named '" + name + "'");
  }
  std::stable_sort(s.events.begin(), s.events.end(),
                   [](const WorkloadEvent& a, const WorkloadEvent& b) { return a.at < b.at; });
  s.validate();
  return s;
}

std::string scenario_to_json(const ClusterScenario& s) {
  json out;
  out["name"] = s.name;
  out["seed"] = s.seed;
  out["duration_s"] = static_cast<double>(s.duration.count()) / 1000.0;
  out["nodes"] = json::array();
  for (const auto& n : s.nodes) {
    out["nodes"].push_back({
        {"name", n.node.name},
        {"capacity_cores", n.capacity_cores},
        {"system_overhead_cores", n.system_overhead_cores},
        {"power",
         {{"static_floor_w", n.power.static_floor_w},
          {"slope_w_per_core", n.power.slope_w_per_core},
          {"lag_s", static_cast<double>(n.power.lag.count()) / 1000.0},
          {"noise_sd_w", n.power.noise_sd_w},
          {"seed", n.power.seed}}},
    });
  }
  out["control_plane_pods"] = json::array();
  for (const auto& cp : s.control_plane_pods) {
    out["control_plane_pods"].push_back({{"pod", cp.pod},
                                         {"namespace", cp.ns},
                                         {"node", cp.node.name},
                                         {"baseline_cores", cp.baseline_cores},
                                         {"coupling_per_workload_core", cp.coupling_per_workload_core}});
  }
  out["events"] = json::array();
  for (const auto& ev : s.events) {
    json e = {{"at_s", static_cast<double>(ev.at.count()) / 1000.0},
              {"kind", to_string(ev.kind)},
              {"pod", ev.pod},
              {"namespace", ev.ns},
              {"node", ev.node.name}};
    if (ev.kind == EventKind::StartPod) e["cpu_cores"] = ev.cpu_cores;
    out["events"].push_back(e);
  }
  return out.dump(2) + "\n";
}

namespace {

Duration seconds_field(const json& obj, const char* key, double fallback = 0.0) {
  double secs = obj.value(key, fallback);
  return Duration{static_cast<std::int64_t>(secs * 1000.0)};
}

}  // namespace

ClusterScenario scenario_from_json(const std::string& text) {
  json in;
  try {
    in = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("scenario is not valid JSON: ") + e.what());
  }
  try {
    ClusterScenario s;
    s.name = in.value("name", "scenario");
    s.seed = in.value("seed", std::uint64_t{0});
    s.duration = seconds_field(in, "duration_s");
    for (const auto& n : in.value("nodes", json::array())) {
      ScenarioNode node;
      node.node = NodeRef{n.at("name").get<std::string>()};
      node.capacity_cores = n.at("capacity_cores").get<double>();
      node.system_overhead_cores = n.value("system_overhead_cores", 0.0);
      const json& p = n.at("power");
      node.power.static_floor_w = p.at("static_floor_w").get<double>();
      node.power.slope_w_per_core = p.value("slope_w_per_core", 0.0);
      node.power.lag = seconds_field(p, "lag_s");
      node.power.noise_sd_w = p.value("noise_sd_w", 0.0);
      node.power.seed = p.value("seed", node_seed(s.seed, node.node.name));
      s.nodes.push_back(node);
    }
    for (const auto& cp : in.value("control_plane_pods", json::array())) {
      ControlPlanePodSpec spec;
      spec.pod = cp.at("pod").get<std::string>();
      spec.ns = cp.value("namespace", "kube-system");
      spec.node = NodeRef{cp.value("node", s.nodes.empty() ? "" : s.nodes[0].node.name)};
      spec.baseline_cores = cp.value("baseline_cores", 0.0);
      spec.coupling_per_workload_core = cp.value("coupling_per_workload_core", 0.0);
      s.control_plane_pods.push_back(spec);
    }
    for (const auto& ev : in.value("events", json::array())) {
      WorkloadEvent e;
      e.at = seconds_field(ev, "at_s");
      e.kind = event_kind_from_string(ev.at("kind").get<std::string>());
      e.pod = ev.at("pod").get<std::string>();
      e.ns = ev.value("namespace", "default");
      e.node = NodeRef{ev.value("node", s.nodes.empty() ? "" : s.nodes[0].node.name)};
      e.cpu_cores = ev.value("cpu_cores", 0.0);
      s.events.push_back(e);
    }
    std::stable_sort(s.events.begin(), s.events.end(),
                     [](const WorkloadEvent& a, const WorkloadEvent& b) { return a.at < b.at; });
    s.validate();
    return s;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("scenario schema error: ") + e.what());
  }
}

ClusterScenario load_scenario(const std::string& name_or_path,
                              std::optional<std::uint64_t> seed_override) {
  for (const auto& name : builtin_scenario_names()) {
    if (name == name_or_path) return builtin_scenario(name, seed_override);
  }
  std::ifstream in(name_or_path);
  if (!in.good()) {
    throw Error(ErrorKind::ValidationError,
                "'" + name_or_path + "' is neither a builtin scenario nor a readable file");
  }
  std::stringstream ss;
  ss << in.rdbuf();
  ClusterScenario s = scenario_from_json(ss.str());
  if (seed_override) {
    s.seed = *seed_override;
    for (auto& n : s.nodes) n.power.seed = node_seed(s.seed, n.node.name);
  }
  return s;
}

}  // namespace kubewatt
