#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "kubewatt/calibration.hpp"
#include "kubewatt/core_model.hpp"
#include "kubewatt/k8s_metrics.hpp"
#include "kubewatt/power_sources.hpp"

namespace kubewatt {

enum class RunMode { InitBase, InitBootstrap, Estimator, Replay };

const char* to_string(RunMode mode);
RunMode run_mode_from_string(const std::string& s);

// Values provided on the command line; they override both the
// environment and the config file.
struct CliOverrides {
  std::optional<std::string> mode;
  std::optional<std::string> scenario;
  std::optional<std::string> profile;
  std::optional<std::string> listen;
  std::optional<std::string> log_level;
  std::optional<std::string> trace;
  std::optional<double> speedup;
  std::optional<double> cadence_s;
  std::optional<std::uint64_t> seed;
};

// Credential overrides honored from the environment.
inline constexpr const char* kEnvRedfishUsername = "KUBEWATT_REDFISH_USERNAME";
inline constexpr const char* kEnvRedfishPassword = "KUBEWATT_REDFISH_PASSWORD";
inline constexpr const char* kEnvBearerToken = "KUBEWATT_BEARER_TOKEN";

struct RunConfig {
  RunMode mode = RunMode::Replay;
  SourceMode source = SourceMode::Simulated;
  std::string log_level = "info";
  std::string metric_prefix = "kubewatt";
  std::string listen_address = "127.0.0.1:9400";
  std::string profile_path;
  std::string scenario;  // builtin name or file path
  double speedup = 1000.0;
  std::optional<std::uint64_t> seed;
  std::string trace_path = "trace.csv";
  Duration cadence = Duration{15'000};
  Duration skew_bound = kDefaultSkewBound;
  std::vector<std::string> control_plane_patterns;
  std::map<NodeRef, double> node_capacities;  // needed for live bootstrap
  std::vector<PowerCollectorEndpoint> power_endpoints;
  MetricsSourceConfig metrics;
  BaseInitConfig base_init;
  BootstrapConfig bootstrap;

  ControlPlaneMatcher matcher() const { return ControlPlaneMatcher(control_plane_patterns); }
};

// The paper's control-plane pod list for an RKE-style cluster; the
// builtin scenario pods match it too.
std::vector<std::string> default_control_plane_patterns();

// Merges file, environment and CLI with precedence CLI > env > file,
// then validates cross-field invariants. Throws ParseError for
// unreadable or malformed input and ValidationError with the offending
// key named for everything else.
RunConfig load_config(const std::optional<std::string>& config_path,
                      const std::map<std::string, std::string>& env, const CliOverrides& cli);

}  // namespace kubewatt
