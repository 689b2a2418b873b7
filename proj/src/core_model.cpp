#include "kubewatt/core_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

namespace kubewatt {

const char* to_string(ProfileProvenance p) {
  switch (p) {
    case ProfileProvenance::BaseInit: return "BASE_INIT";
    case ProfileProvenance::BootstrapInit: return "BOOTSTRAP_INIT";
    case ProfileProvenance::Manual: return "MANUAL";
  }
  return "MANUAL";
}

ProfileProvenance provenance_from_string(const std::string& s) {
  if (s == "BASE_INIT") return ProfileProvenance::BaseInit;
  if (s == "BOOTSTRAP_INIT") return ProfileProvenance::BootstrapInit;
  if (s == "MANUAL") return ProfileProvenance::Manual;
  throw Error(ErrorKind::ParseError, "unknown provenance '" + s + "'");
}

ControlPlaneMatcher::ControlPlaneMatcher(std::vector<std::string> patterns)
    : patterns_(std::move(patterns)) {
  compiled_.reserve(patterns_.size());
  for (const auto& p : patterns_) {
    try {
      compiled_.emplace_back(p, std::regex::ECMAScript);
    } catch (const std::regex_error& e) {
      throw Error(ErrorKind::ValidationError,
                  "control-plane pattern '" + p + "' does not compile: " + e.what());
    }
  }
}

bool ControlPlaneMatcher::matches(const std::string& pod_name) const {
  for (const auto& re : compiled_) {
    if (std::regex_match(pod_name, re)) return true;
  }
  return false;
}

SplitResult split_power(double node_watts, double static_watts) {
  double delta = node_watts - static_watts;
  SplitResult r;
  r.dynamic_watts = std::max(delta, 0.0);
  r.residual_watts = std::min(delta, 0.0);
  return r;
}

AttributionShares attribute_power(double dynamic_watts, const CpuSample& cpu,
                                  const ControlPlaneMatcher& matcher) {
  AttributionShares out;
  double attributable = 0.0;
  for (const auto& [ref, cores] : cpu.containers) {
    if (matcher.matches(ref.pod)) continue;
    out.per_container.emplace(ref, 0.0);
    attributable += cores;
  }
  if (attributable <= 0.0 || dynamic_watts <= 0.0) {
    out.unattributed_watts = dynamic_watts > 0.0 ? dynamic_watts : 0.0;
    return out;
  }
  for (auto& [ref, watts] : out.per_container) {
    watts = dynamic_watts * (cpu.containers.at(ref) / attributable);
  }
  return out;
}

AttributionRecord snapshot_attribution(const PowerSample& power, const CpuSample& cpu,
                                       const StaticPowerProfile& profile,
                                       const ControlPlaneMatcher& matcher,
                                       Duration skew_bound) {
  if (power.node != cpu.node) {
    throw Error(ErrorKind::ValidationError,
                "power sample for node '" + power.node.name +
                    "' paired with CPU sample for node '" + cpu.node.name + "'");
  }
  auto it = profile.static_watts.find(power.node);
  if (it == profile.static_watts.end()) {
    throw Error(ErrorKind::MissingProfile,
                "node '" + power.node.name + "' has no calibrated static power; run an init mode first");
  }
  auto skew = power.timestamp >= cpu.timestamp ? power.timestamp - cpu.timestamp
                                               : cpu.timestamp - power.timestamp;
  if (skew > skew_bound) {
    throw Error(ErrorKind::SampleSkew,
                "power and CPU samples for node '" + power.node.name + "' are " +
                    std::to_string(skew.count()) + " ms apart (bound " +
                    std::to_string(skew_bound.count()) + " ms)");
  }

  AttributionRecord rec;
  rec.timestamp = power.timestamp;
  rec.node = power.node;
  rec.node_watts = power.watts;
  rec.static_watts = it->second;
  auto split = split_power(power.watts, it->second);
  rec.dynamic_watts = split.dynamic_watts;
  rec.residual_watts = split.residual_watts;
  auto shares = attribute_power(split.dynamic_watts, cpu, matcher);
  rec.unattributed_watts = shares.unattributed_watts;
  rec.per_container = std::move(shares.per_container);
  return rec;
}

}  // namespace kubewatt
