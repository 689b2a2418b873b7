#include "kubewatt/simulator.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "kubewatt/profile_io.hpp"
#include "kubewatt/rng.hpp"

namespace kubewatt {

using nlohmann::json;

const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::StartPod: return "start";
    case EventKind::StopPod: return "stop";
    case EventKind::DeletePod: return "delete";
    case EventKind::CompletePod: return "complete";
  }
  return "start";
}

EventKind event_kind_from_string(const std::string& s) {
  if (s == "start") return EventKind::StartPod;
  if (s == "stop") return EventKind::StopPod;
  if (s == "delete") return EventKind::DeletePod;
  if (s == "complete") return EventKind::CompletePod;
  throw Error(ErrorKind::ParseError, "unknown event kind '" + s + "'");
}

void ClusterScenario::validate() const {
  if (nodes.empty()) throw Error(ErrorKind::ValidationError, "scenario has no nodes");
  if (duration.count() <= 0) throw Error(ErrorKind::ValidationError, "scenario duration must be positive");
  for (const auto& n : nodes) {
    if (n.node.name.empty()) throw Error(ErrorKind::ValidationError, "scenario node without a name");
    if (!(n.capacity_cores > 0.0))
      throw Error(ErrorKind::ValidationError, "node '" + n.node.name + "' needs a positive capacity");
    if (!(n.power.static_floor_w > 0.0) || n.power.slope_w_per_core < 0.0 || n.power.noise_sd_w < 0.0)
      throw Error(ErrorKind::ValidationError, "node '" + n.node.name + "' has an invalid power model");
  }
  auto known = [this](const NodeRef& ref) {
    return std::any_of(nodes.begin(), nodes.end(),
                       [&](const ScenarioNode& n) { return n.node == ref; });
  };
  for (const auto& cp : control_plane_pods) {
    if (!known(cp.node))
      throw Error(ErrorKind::ValidationError,
                  "control-plane pod '" + cp.pod + "' references unknown node '" + cp.node.name + "'");
  }
  Duration prev{-1};
  for (const auto& ev : events) {
    if (ev.at < prev) throw Error(ErrorKind::ValidationError, "events are not time-ordered");
    prev = ev.at;
    if (ev.at > duration)
      throw Error(ErrorKind::ValidationError, "event for pod '" + ev.pod + "' is past scenario end");
    if (!known(ev.node))
      throw Error(ErrorKind::ValidationError,
                  "event for pod '" + ev.pod + "' references unknown node '" + ev.node.name + "'");
    if (ev.cpu_cores < 0.0)
      throw Error(ErrorKind::ValidationError, "event for pod '" + ev.pod + "' has negative CPU");
  }
}

const ScenarioNode& ClusterScenario::node_spec(const NodeRef& node) const {
  for (const auto& n : nodes) {
    if (n.node == node) return n;
  }
  throw Error(ErrorKind::ValidationError, "unknown node '" + node.name + "'");
}

double ClusterScenario::true_static_watts(const NodeRef& node) const {
  const ScenarioNode& spec = node_spec(node);
  double idle_cores = spec.system_overhead_cores;
  for (const auto& cp : control_plane_pods) {
    if (cp.node == node) idle_cores += cp.baseline_cores;
  }
  return spec.power.static_floor_w + spec.power.slope_w_per_core * idle_cores;
}

namespace {

struct PodState {
  std::string ns;
  NodeRef node;
  double cores = 0.0;
  bool running = false;
};

// Pod table after applying all events with at <= t, in list order. t may
// be negative for lag lookups before scenario start: no event applies
// and only the control plane is up.
std::map<std::string, PodState> pods_at(const ClusterScenario& scenario, Duration t) {
  std::map<std::string, PodState> pods;
  for (const auto& ev : scenario.events) {
    if (ev.at > t) break;
    switch (ev.kind) {
      case EventKind::StartPod:
        pods[ev.pod] = PodState{ev.ns, ev.node, ev.cpu_cores, true};
        break;
      case EventKind::StopPod:
      case EventKind::CompletePod: {
        auto it = pods.find(ev.pod);
        if (it != pods.end()) it->second.running = false;
        break;
      }
      case EventKind::DeletePod:
        pods.erase(ev.pod);
        break;
    }
  }
  return pods;
}

SimState state_at(const ClusterScenario& scenario, Duration t) {
  auto pods = pods_at(scenario, t);

  std::map<NodeRef, double> workload_cores;
  for (const auto& n : scenario.nodes) workload_cores[n.node] = 0.0;

  SimState state;
  Instant timestamp = scenario_epoch() + std::max(t, Duration{0});
  for (const auto& n : scenario.nodes) {
    CpuSample sample;
    sample.node = n.node;
    sample.timestamp = timestamp;
    state.cpu.emplace(n.node, std::move(sample));
  }

  for (const auto& [name, pod] : pods) {
    if (!pod.running) continue;
    ContainerRef ref{pod.ns, name, "main", pod.node};
    state.cpu.at(pod.node).containers[ref] = pod.cores;
    workload_cores[pod.node] += pod.cores;
    const ScenarioNode& spec = scenario.node_spec(pod.node);
    state.true_container_watts[ref] = spec.power.slope_w_per_core * pod.cores;
  }

  for (const auto& cp : scenario.control_plane_pods) {
    double cores = cp.baseline_cores + cp.coupling_per_workload_core * workload_cores[cp.node];
    ContainerRef ref{cp.ns, cp.pod, "main", cp.node};
    state.cpu.at(cp.node).containers[ref] = cores;
  }

  for (const auto& n : scenario.nodes) {
    CpuSample& sample = state.cpu.at(n.node);
    double total = n.system_overhead_cores;
    for (const auto& [ref, cores] : sample.containers) total += cores;
    sample.node_cores = total;
    state.true_node_watts[n.node] = n.power.static_floor_w + n.power.slope_w_per_core * total;
  }
  return state;
}

double node_total_cores_at(const ClusterScenario& scenario, const NodeRef& node, Duration t) {
  return state_at(scenario, t).cpu.at(node).node_cores;
}

}  // namespace

SimState simulate_state(const ClusterScenario& scenario, Duration t) {
  if (t < Duration{0} || t > scenario.duration) {
    throw Error(ErrorKind::OutOfRange,
                "t = " + std::to_string(t.count()) + " ms outside scenario [0, " +
                    std::to_string(scenario.duration.count()) + " ms]");
  }
  return state_at(scenario, t);
}

PowerSample SimulatedCluster::NodePower::poll(Instant now) {
  Duration t = now - scenario_epoch();
  if (t < Duration{0} || t > scenario_.duration) {
    throw Error(ErrorKind::OutOfRange, "power poll outside scenario window");
  }
  auto cpu_at = [this](Instant at) {
    // Lag lookups may land before scenario start; the pre-scenario
    // cluster is the t=0 control plane at baseline.
    Duration offset = at - scenario_epoch();
    return node_total_cores_at(scenario_, spec_.node, std::min(offset, scenario_.duration));
  };
  return poll_simulated(spec_.power, spec_.node, cpu_at, now);
}

ClusterCpuSnapshot SimulatedCluster::Metrics::poll(Instant now) {
  Duration t = now - scenario_epoch();
  SimState state = simulate_state(scenario_, t);
  ClusterCpuSnapshot snap;
  snap.timestamp = now;
  snap.per_node = std::move(state.cpu);
  return snap;
}

SimulatedCluster::SimulatedCluster(ClusterScenario scenario)
    : scenario_(std::move(scenario)), cpu_source_(scenario_) {
  scenario_.validate();
  node_power_.reserve(scenario_.nodes.size());
  for (const auto& n : scenario_.nodes) {
    node_power_.emplace_back(scenario_, n);
  }
}

std::vector<PowerSource*> SimulatedCluster::power_sources() {
  std::vector<PowerSource*> out;
  out.reserve(node_power_.size());
  for (auto& p : node_power_) out.push_back(&p);
  return out;
}

std::map<NodeRef, double> SimulatedCluster::capacities() const {
  std::map<NodeRef, double> out;
  for (const auto& n : scenario_.nodes) out[n.node] = n.capacity_cores;
  return out;
}

StaticPowerProfile SimulatedCluster::ground_truth_profile() const {
  StaticPowerProfile profile;
  profile.provenance = ProfileProvenance::Manual;
  profile.calibrated_at = scenario_epoch();
  for (const auto& n : scenario_.nodes) {
    profile.static_watts[n.node] = scenario_.true_static_watts(n.node);
  }
  return profile;
}

ReplayEngine::ReplayEngine(ClusterScenario scenario, ReplayOptions options)
    : cluster_(std::move(scenario)), options_(std::move(options)) {
  if (options_.speedup < 1.0) {
    throw Error(ErrorKind::ValidationError, "replay speedup must be >= 1");
  }
}

void ReplayEngine::run(const TickHook& hook) {
  const ClusterScenario& scenario = cluster_.scenario();
  EstimatorConfig cfg;
  cfg.profile = options_.profile ? *options_.profile : cluster_.ground_truth_profile();
  cfg.cadence = options_.cadence;
  cfg.skew_bound = options_.skew_bound;
  cfg.metric_prefix = options_.metric_prefix;
  Estimator estimator(cfg, options_.matcher);

  VirtualClock clock(scenario_epoch(), options_.speedup);
  auto sources = cluster_.power_sources();

  for (Duration t{0}; t <= scenario.duration; t += options_.cadence) {
    if (options_.abort && options_.abort->load()) break;
    clock.sleep_until(scenario_epoch() + t);
    Instant now = clock.now();

    for (PowerSource* src : sources) estimator.offer_power(src->poll(now));
    SimState truth = state_at(scenario, t);
    for (const auto& [node, sample] : truth.cpu) estimator.offer_cpu(sample);

    ReplayTick tick;
    tick.offset = t;
    tick.at = now;
    tick.records = estimator.tick(now);
    tick.truth = &truth;
    tick.stale_counters = &estimator.stale_counters();
    if (hook) hook(tick);
  }
}

std::string TraceWriter::header() {
  return "timestamp,node,namespace,pod,container,cpu_cores,attributed_watts,true_watts,"
         "node_watts,static_watts,dynamic_watts,residual_watts,unattributed_watts\n";
}

void TraceWriter::append_tick(std::string& out, const ReplayTick& tick) {
  std::string stamp = format_iso8601(tick.at);
  for (const auto& rec : tick.records) {
    const CpuSample& cpu = tick.truth->cpu.at(rec.node);
    out += stamp;
    out += ',';
    out += rec.node.name;
    out += ",,,,";
    out += format_double(cpu.node_cores);
    out += ",,";
    out += format_double(tick.truth->true_node_watts.at(rec.node));
    out += ',';
    out += format_double(rec.node_watts);
    out += ',';
    out += format_double(rec.static_watts);
    out += ',';
    out += format_double(rec.dynamic_watts);
    out += ',';
    out += format_double(rec.residual_watts);
    out += ',';
    out += format_double(rec.unattributed_watts);
    out += '\n';
    for (const auto& [ref, cores] : cpu.containers) {
      out += stamp;
      out += ',';
      out += ref.node.name;
      out += ',';
      out += ref.ns;
      out += ',';
      out += ref.pod;
      out += ',';
      out += ref.container;
      out += ',';
      out += format_double(cores);
      out += ',';
      auto attributed = rec.per_container.find(ref);
      if (attributed != rec.per_container.end()) out += format_double(attributed->second);
      out += ',';
      auto truth = tick.truth->true_container_watts.find(ref);
      if (truth != tick.truth->true_container_watts.end()) out += format_double(truth->second);
      out += ",,,,,\n";
    }
  }
}

StaticPowerProfile run_base_init_on_scenario(const ClusterScenario& scenario,
                                             const BaseInitConfig& cfg,
                                             const ControlPlaneMatcher& matcher, double speedup) {
  SimulatedCluster cluster(scenario);
  VirtualClock clock(scenario_epoch(), speedup);
  auto sources = cluster.power_sources();
  return run_base_init(cfg, clock, sources, cluster.cpu_source(), matcher);
}

StaticPowerProfile run_bootstrap_init_on_scenario(const ClusterScenario& scenario,
                                                  const BootstrapConfig& cfg,
                                                  const ControlPlaneMatcher& matcher,
                                                  double speedup) {
  SimulatedCluster cluster(scenario);
  VirtualClock clock(scenario_epoch(), speedup);
  auto sources = cluster.power_sources();
  return run_bootstrap_init(cfg, clock, sources, cluster.cpu_source(), matcher,
                            cluster.capacities());
}

}  // namespace kubewatt
