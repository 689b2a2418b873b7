#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "kubewatt/calibration.hpp"
#include "kubewatt/core_model.hpp"
#include "kubewatt/estimator.hpp"
#include "kubewatt/k8s_metrics.hpp"
#include "kubewatt/power_sources.hpp"
#include "kubewatt/time.hpp"

namespace kubewatt {

struct ScenarioNode {
  NodeRef node;
  double capacity_cores = 0.0;
  // System-process CPU the node metric reports beyond its containers.
  double system_overhead_cores = 0.0;
  SimPowerModel power;
};

// A control-plane pod whose CPU is baseline cores plus a coupling term
// proportional to the workload cores on its node. The coupled extra is
// excluded from attribution like all control-plane CPU, so its watts
// land on the workload containers that caused it.
struct ControlPlanePodSpec {
  std::string pod;
  std::string ns = "kube-system";
  NodeRef node;
  double baseline_cores = 0.0;
  double coupling_per_workload_core = 0.0;
};

enum class EventKind { StartPod, StopPod, DeletePod, CompletePod };

const char* to_string(EventKind k);
EventKind event_kind_from_string(const std::string& s);

// START creates the pod running at cpu_cores, or changes the level of an
// already-running pod (a restarted stressor). STOP and COMPLETE end the
// pod; DELETE removes the object. All three make it disappear from the
// metrics view: the metrics API only reports running containers.
struct WorkloadEvent {
  Duration at{0};
  EventKind kind = EventKind::StartPod;
  std::string pod;
  std::string ns;
  NodeRef node;
  double cpu_cores = 0.0;
};

struct ClusterScenario {
  std::string name;
  std::uint64_t seed = 0;
  Duration duration{0};
  std::vector<ScenarioNode> nodes;
  std::vector<ControlPlanePodSpec> control_plane_pods;
  std::vector<WorkloadEvent> events;  // ordered by (at, position)

  void validate() const;  // throws ValidationError

  const ScenarioNode& node_spec(const NodeRef& node) const;

  // Idle node power with the control plane at baseline: what a perfect
  // base init would measure with zero noise.
  double true_static_watts(const NodeRef& node) const;
};

// Cluster state the collectors would observe at offset t from scenario
// start. Throws OutOfRange for t outside [0, duration].
struct SimState {
  std::map<NodeRef, CpuSample> cpu;
  // Noise- and lag-free node power, for attribution-error measurement.
  std::map<NodeRef, double> true_node_watts;
  // slope * cores for every running workload (non-control-plane)
  // container: the ground-truth dynamic watts attribution should assign.
  std::map<ContainerRef, double> true_container_watts;
};

SimState simulate_state(const ClusterScenario& scenario, Duration t);

// Named catalog: "idle", "single-stressor", "inactive-pods",
// "random-stressor". seed_override reseeds both the power noise and any
// seed-derived workload script.
std::vector<std::string> builtin_scenario_names();
ClusterScenario builtin_scenario(const std::string& name,
                                 std::optional<std::uint64_t> seed_override = std::nullopt);

// Scenario file schema is JSON; see README for the field list.
ClusterScenario scenario_from_json(const std::string& text);
std::string scenario_to_json(const ClusterScenario& scenario);

// Resolves a builtin name or a file path.
ClusterScenario load_scenario(const std::string& name_or_path,
                              std::optional<std::uint64_t> seed_override = std::nullopt);

// Simulated collectors over a scenario; used by calibration and replay.
// Polls past the scenario end throw OutOfRange.
class SimulatedCluster {
 public:
  explicit SimulatedCluster(ClusterScenario scenario);

  // The collectors keep references into this object.
  SimulatedCluster(const SimulatedCluster&) = delete;
  SimulatedCluster& operator=(const SimulatedCluster&) = delete;

  const ClusterScenario& scenario() const { return scenario_; }
  std::vector<PowerSource*> power_sources();
  CpuSource& cpu_source() { return cpu_source_; }
  std::map<NodeRef, double> capacities() const;

  // Ground-truth profile (true_static_watts per node), the default the
  // replay estimator runs against.
  StaticPowerProfile ground_truth_profile() const;

 private:
  class NodePower final : public PowerSource {
   public:
    NodePower(const ClusterScenario& scenario, const ScenarioNode& spec)
        : scenario_(scenario), spec_(spec) {}
    const NodeRef& node() const override { return spec_.node; }
    PowerSample poll(Instant now) override;

   private:
    const ClusterScenario& scenario_;
    const ScenarioNode& spec_;
  };

  class Metrics final : public CpuSource {
   public:
    explicit Metrics(const ClusterScenario& scenario) : scenario_(scenario) {}
    ClusterCpuSnapshot poll(Instant now) override;

   private:
    const ClusterScenario& scenario_;
  };

  ClusterScenario scenario_;
  std::vector<NodePower> node_power_;
  Metrics cpu_source_;
};

struct ReplayOptions {
  double speedup = 1000.0;
  Duration cadence = Duration{15'000};
  Duration skew_bound = kDefaultSkewBound;
  std::string metric_prefix = "kubewatt";
  ControlPlaneMatcher matcher;                 // defaults set by CLI/config
  std::optional<StaticPowerProfile> profile;   // default: scenario ground truth
  const std::atomic<bool>* abort = nullptr;    // optional early-stop flag
};

struct ReplayTick {
  Duration offset{0};
  Instant at{};
  std::vector<AttributionRecord> records;
  const SimState* truth = nullptr;
  const std::map<NodeRef, std::uint64_t>* stale_counters = nullptr;
};

// Drives simulated collectors and the estimator through virtual time.
// speedup only throttles wall-clock pacing; every timestamp and value in
// the outputs is virtual, so traces are identical at any speedup.
class ReplayEngine {
 public:
  ReplayEngine(ClusterScenario scenario, ReplayOptions options);

  using TickHook = std::function<void(const ReplayTick&)>;
  void run(const TickHook& hook);

  const SimulatedCluster& cluster() const { return cluster_; }

 private:
  SimulatedCluster cluster_;
  ReplayOptions options_;
};

// Long-format CSV trace of a replay; one node row plus one row per
// container per tick.
class TraceWriter {
 public:
  static std::string header();
  static void append_tick(std::string& out, const ReplayTick& tick);
};

StaticPowerProfile run_base_init_on_scenario(const ClusterScenario& scenario,
                                             const BaseInitConfig& cfg,
                                             const ControlPlaneMatcher& matcher, double speedup);

StaticPowerProfile run_bootstrap_init_on_scenario(const ClusterScenario& scenario,
                                                  const BootstrapConfig& cfg,
                                                  const ControlPlaneMatcher& matcher,
                                                  double speedup);

}  // namespace kubewatt
