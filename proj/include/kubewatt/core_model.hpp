#pragma once

#include <compare>
#include <map>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include "kubewatt/errors.hpp"
#include "kubewatt/time.hpp"

namespace kubewatt {

struct NodeRef {
  std::string name;

  auto operator<=>(const NodeRef&) const = default;
};

struct ContainerRef {
  std::string ns;
  std::string pod;
  std::string container;
  NodeRef node;

  auto operator<=>(const ContainerRef&) const = default;
};

// One node platform power reading.
struct PowerSample {
  NodeRef node;
  double watts = 0.0;
  Instant timestamp{};
  // Window the source averaged over, when it reports one (Redfish
  // readings are trailing 1-minute averages).
  std::optional<Duration> interval_hint;
};

// Per-node CPU snapshot. node_cores may exceed the sum over containers:
// the node figure includes system-process overhead that is covered by
// static power and must not be attributed to containers.
struct CpuSample {
  NodeRef node;
  Instant timestamp{};
  double node_cores = 0.0;
  std::map<ContainerRef, double> containers;  // cores per running container
};

enum class ProfileProvenance { BaseInit, BootstrapInit, Manual };

const char* to_string(ProfileProvenance p);
ProfileProvenance provenance_from_string(const std::string& s);

// Calibrated static power per node, the output of either init mode.
struct StaticPowerProfile {
  std::map<NodeRef, double> static_watts;
  ProfileProvenance provenance = ProfileProvenance::Manual;
  Instant calibrated_at{};

  bool empty() const { return static_watts.empty(); }
};

// Matches pod names against user-supplied control-plane patterns.
// Patterns are anchored: "dns" does not match "freedns-app".
class ControlPlaneMatcher {
 public:
  ControlPlaneMatcher() = default;
  explicit ControlPlaneMatcher(std::vector<std::string> patterns);

  bool matches(const std::string& pod_name) const;
  bool empty() const { return patterns_.empty(); }
  const std::vector<std::string>& patterns() const { return patterns_; }

 private:
  std::vector<std::string> patterns_;
  std::vector<std::regex> compiled_;
};

struct AttributionRecord {
  Instant timestamp{};
  NodeRef node;
  double node_watts = 0.0;
  double static_watts = 0.0;
  double dynamic_watts = 0.0;
  // Negative exactly when measured power fell below calibrated static
  // power; a persistent nonzero value means the profile has drifted.
  double residual_watts = 0.0;
  // Dynamic power that could not be attributed because no
  // non-control-plane container was using CPU.
  double unattributed_watts = 0.0;
  std::map<ContainerRef, double> per_container;
};

struct SplitResult {
  double dynamic_watts = 0.0;
  double residual_watts = 0.0;
};

// dynamic = max(node - static, 0); residual = min(node - static, 0).
// static + dynamic + residual == node_watts exactly.
SplitResult split_power(double node_watts, double static_watts);

struct AttributionShares {
  std::map<ContainerRef, double> per_container;
  double unattributed_watts = 0.0;
};

// Proportional CPU-share allocation. Control-plane containers are
// removed before attribution; each remaining container receives
// dynamic * cpu(c) / sum(cpu). When the attributable sum is zero the
// whole amount is reported as unattributed instead of being spread
// over idle containers.
AttributionShares attribute_power(double dynamic_watts, const CpuSample& cpu,
                                  const ControlPlaneMatcher& matcher);

inline constexpr Duration kDefaultSkewBound = Duration{30'000};

// Composition of split_power and attribute_power over one matched
// power/CPU sample pair. Throws MissingProfile when the node is not
// calibrated and SampleSkew when the two samples are further apart
// than skew_bound (collectors out of sync).
AttributionRecord snapshot_attribution(const PowerSample& power, const CpuSample& cpu,
                                       const StaticPowerProfile& profile,
                                       const ControlPlaneMatcher& matcher,
                                       Duration skew_bound = kDefaultSkewBound);

}  // namespace kubewatt
