#pragma once

#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "kubewatt/core_model.hpp"
#include "kubewatt/time.hpp"

namespace kubewatt {

enum class SourceMode { Live, Simulated };

struct MetricsSourceConfig {
  SourceMode mode = SourceMode::Live;
  std::string api_base;                  // cluster API server, scheme://host[:port]
  std::string bearer_token;              // inline token; wins over token_path
  std::string token_path;                // file to read the token from
  std::vector<std::string> namespaces;   // allowlist; empty means cluster-wide
  Duration poll_interval = Duration{15'000};
  bool tls_verify = true;
};

// Standard in-cluster service-account token location.
inline constexpr const char* kInClusterTokenPath =
    "/var/run/secrets/kubernetes.io/serviceaccount/token";

// All per-node CPU samples taken in one poll.
struct ClusterCpuSnapshot {
  Instant timestamp{};
  std::map<NodeRef, CpuSample> per_node;
};

class CpuSource {
 public:
  virtual ~CpuSource() = default;
  virtual ClusterCpuSnapshot poll(Instant now) = 0;
};

// Client for the resource-metrics API (metrics.k8s.io/v1beta1).
class K8sMetricsClient final : public CpuSource {
 public:
  explicit K8sMetricsClient(MetricsSourceConfig cfg);
  ~K8sMetricsClient() override;

  // One CPU rate per schedulable node, normalized to cores.
  std::map<NodeRef, double> poll_node_cpu(Instant now);

  // Per-node CpuSamples covering every running container in allowed
  // namespaces. Completed and pending containers never appear: the
  // metrics API only reports running ones.
  ClusterCpuSnapshot poll_container_cpu(Instant now);

  ClusterCpuSnapshot poll(Instant now) override { return poll_container_cpu(now); }

 private:
  MetricsSourceConfig cfg_;
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct ControlPlanePartition {
  std::set<ContainerRef> control;
  std::set<ContainerRef> workload;
};

// Partitions a sample's containers by anchored pod-name match.
// control and workload are disjoint and together cover every container.
ControlPlanePartition classify_control_plane(const CpuSample& sample,
                                             const ControlPlaneMatcher& matcher);

// Kubernetes resource quantity for CPU -> cores ("3643163n", "250m", "2").
double parse_cpu_quantity(const std::string& quantity);

// Rate (cores) from a cumulative cpu-seconds counter. Counter resets
// show up as negative deltas and clamp to zero.
double rate_from_cumulative(double prev_seconds, double cur_seconds, Duration elapsed);

// True when the container sum exceeds the node figure by more than the
// tolerated system-overhead slack; callers log these as metric
// anomalies, they are never errors.
bool cpu_sum_anomaly(const CpuSample& sample, double tolerance_frac = 0.05);

}  // namespace kubewatt
