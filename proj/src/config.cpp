#include "kubewatt/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace kubewatt {

using nlohmann::json;

const char* to_string(RunMode mode) {
  switch (mode) {
    case RunMode::InitBase: return "INIT_BASE";
    case RunMode::InitBootstrap: return "INIT_BOOTSTRAP";
    case RunMode::Estimator: return "ESTIMATOR";
    case RunMode::Replay: return "REPLAY";
  }
  return "REPLAY";
}

RunMode run_mode_from_string(const std::string& s) {
  if (s == "INIT_BASE") return RunMode::InitBase;
  if (s == "INIT_BOOTSTRAP") return RunMode::InitBootstrap;
  if (s == "ESTIMATOR") return RunMode::Estimator;
  if (s == "REPLAY") return RunMode::Replay;
  throw Error(ErrorKind::ValidationError,
              "mode must be one of INIT_BASE, INIT_BOOTSTRAP, ESTIMATOR, REPLAY; got '" + s + "'");
}

std::vector<std::string> default_control_plane_patterns() {
  return {"nfs-.*",     "calico-.*",  "canal-.*",   "coredns-.*",
          "metrics-.*", "tekton-.*",  "kubewatt-.*"};
}

namespace {

SourceMode source_from_string(const std::string& s) {
  if (s == "LIVE") return SourceMode::Live;
  if (s == "SIMULATED") return SourceMode::Simulated;
  throw Error(ErrorKind::ValidationError, "source must be LIVE or SIMULATED; got '" + s + "'");
}

Duration seconds(double s) { return Duration{static_cast<std::int64_t>(s * 1000.0)}; }

void reject_unknown_keys(const json& obj, const std::set<std::string>& known, const char* where) {
  for (const auto& [key, value] : obj.items()) {
    if (!known.count(key)) {
      throw Error(ErrorKind::ValidationError,
                  std::string("unknown key '") + key + "' in " + where);
    }
  }
}

void apply_file(RunConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in.good()) {
    throw Error(ErrorKind::ParseError, "cannot read config file '" + path + "'");
  }
  std::stringstream ss;
  ss << in.rdbuf();
  json doc;
  try {
    doc = json::parse(ss.str(), nullptr, true, /*ignore_comments=*/true);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ParseError, "config file '" + path + "': " + e.what());
  }

  try {
    reject_unknown_keys(doc, {"mode", "source", "log_level", "metric_prefix", "listen", "profile",
                              "scenario", "speedup", "seed", "trace", "cadence_s", "skew_bound_s",
                              "control_plane_patterns", "node_capacities", "power_endpoints",
                              "metrics", "base_init", "bootstrap"},
                        "config");
    if (doc.contains("mode")) cfg.mode = run_mode_from_string(doc["mode"].get<std::string>());
    if (doc.contains("source")) cfg.source = source_from_string(doc["source"].get<std::string>());
    if (doc.contains("log_level")) cfg.log_level = doc["log_level"].get<std::string>();
    if (doc.contains("metric_prefix")) cfg.metric_prefix = doc["metric_prefix"].get<std::string>();
    if (doc.contains("listen")) cfg.listen_address = doc["listen"].get<std::string>();
    if (doc.contains("profile")) cfg.profile_path = doc["profile"].get<std::string>();
    if (doc.contains("scenario")) cfg.scenario = doc["scenario"].get<std::string>();
    if (doc.contains("speedup")) cfg.speedup = doc["speedup"].get<double>();
    if (doc.contains("seed")) cfg.seed = doc["seed"].get<std::uint64_t>();
    if (doc.contains("trace")) cfg.trace_path = doc["trace"].get<std::string>();
    if (doc.contains("cadence_s")) cfg.cadence = seconds(doc["cadence_s"].get<double>());
    if (doc.contains("skew_bound_s")) cfg.skew_bound = seconds(doc["skew_bound_s"].get<double>());
    if (doc.contains("control_plane_patterns")) {
      cfg.control_plane_patterns = doc["control_plane_patterns"].get<std::vector<std::string>>();
    }
    if (doc.contains("node_capacities")) {
      for (const auto& [name, cores] : doc["node_capacities"].items()) {
        cfg.node_capacities[NodeRef{name}] = cores.get<double>();
      }
    }
    if (doc.contains("power_endpoints")) {
      for (const auto& e : doc["power_endpoints"]) {
        reject_unknown_keys(e, {"node", "base_url", "chassis_path", "username", "password",
                                "poll_interval_s", "tls_verify"},
                            "power_endpoints");
        PowerCollectorEndpoint ep;
        ep.node = NodeRef{e.at("node").get<std::string>()};
        ep.base_url = e.at("base_url").get<std::string>();
        if (e.contains("chassis_path")) ep.chassis_path = e["chassis_path"].get<std::string>();
        ep.username = e.value("username", "");
        ep.password = e.value("password", "");
        if (e.contains("poll_interval_s")) ep.poll_interval = seconds(e["poll_interval_s"].get<double>());
        ep.tls_verify = e.value("tls_verify", true);
        cfg.power_endpoints.push_back(ep);
      }
    }
    if (doc.contains("metrics")) {
      const json& m = doc["metrics"];
      reject_unknown_keys(m, {"api_base", "token", "token_path", "namespaces", "poll_interval_s",
                              "tls_verify"},
                          "metrics");
      cfg.metrics.api_base = m.value("api_base", "");
      cfg.metrics.bearer_token = m.value("token", "");
      cfg.metrics.token_path = m.value("token_path", "");
      if (m.contains("namespaces")) cfg.metrics.namespaces = m["namespaces"].get<std::vector<std::string>>();
      if (m.contains("poll_interval_s")) cfg.metrics.poll_interval = seconds(m["poll_interval_s"].get<double>());
      cfg.metrics.tls_verify = m.value("tls_verify", true);
    }
    if (doc.contains("base_init")) {
      const json& b = doc["base_init"];
      reject_unknown_keys(b, {"duration_s", "cadence_s"}, "base_init");
      if (b.contains("duration_s")) cfg.base_init.duration = seconds(b["duration_s"].get<double>());
      if (b.contains("cadence_s")) cfg.base_init.cadence = seconds(b["cadence_s"].get<double>());
    }
    if (doc.contains("bootstrap")) {
      const json& b = doc["bootstrap"];
      reject_unknown_keys(b, {"window_s", "cadence_s", "bucket_width", "bucket_lo", "bucket_hi",
                              "min_fill_factor", "regression_cutoff", "max_rounds"},
                          "bootstrap");
      if (b.contains("window_s")) cfg.bootstrap.window = seconds(b["window_s"].get<double>());
      if (b.contains("cadence_s")) cfg.bootstrap.cadence = seconds(b["cadence_s"].get<double>());
      cfg.bootstrap.bucket_width = b.value("bucket_width", cfg.bootstrap.bucket_width);
      cfg.bootstrap.bucket_lo = b.value("bucket_lo", cfg.bootstrap.bucket_lo);
      cfg.bootstrap.bucket_hi = b.value("bucket_hi", cfg.bootstrap.bucket_hi);
      cfg.bootstrap.min_fill_factor = b.value("min_fill_factor", cfg.bootstrap.min_fill_factor);
      cfg.bootstrap.regression_cutoff = b.value("regression_cutoff", cfg.bootstrap.regression_cutoff);
      cfg.bootstrap.max_rounds = b.value("max_rounds", cfg.bootstrap.max_rounds);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ParseError, "config file '" + path + "': " + e.what());
  }
}

void apply_env(RunConfig& cfg, const std::map<std::string, std::string>& env) {
  auto get = [&env](const char* key) -> std::optional<std::string> {
    auto it = env.find(key);
    if (it == env.end()) return std::nullopt;
    return it->second;
  };
  if (auto user = get(kEnvRedfishUsername)) {
    for (auto& ep : cfg.power_endpoints) ep.username = *user;
  }
  if (auto pass = get(kEnvRedfishPassword)) {
    for (auto& ep : cfg.power_endpoints) ep.password = *pass;
  }
  if (auto token = get(kEnvBearerToken)) cfg.metrics.bearer_token = *token;
}

void apply_cli(RunConfig& cfg, const CliOverrides& cli) {
  if (cli.mode) cfg.mode = run_mode_from_string(*cli.mode);
  if (cli.scenario) cfg.scenario = *cli.scenario;
  if (cli.profile) cfg.profile_path = *cli.profile;
  if (cli.listen) cfg.listen_address = *cli.listen;
  if (cli.log_level) cfg.log_level = *cli.log_level;
  if (cli.trace) cfg.trace_path = *cli.trace;
  if (cli.speedup) cfg.speedup = *cli.speedup;
  if (cli.cadence_s) cfg.cadence = seconds(*cli.cadence_s);
  if (cli.seed) cfg.seed = *cli.seed;
}

void validate(RunConfig& cfg) {
  if (cfg.speedup < 1.0) {
    throw Error(ErrorKind::ValidationError, "speedup must be >= 1");
  }
  if (cfg.cadence < Duration{1000}) {
    throw Error(ErrorKind::ValidationError, "cadence_s must be at least 1 second");
  }
  if (cfg.metrics.poll_interval < Duration{1000}) {
    throw Error(ErrorKind::ValidationError, "metrics.poll_interval_s must be at least 1 second");
  }
  for (const auto& ep : cfg.power_endpoints) {
    if (ep.node.name.empty()) {
      throw Error(ErrorKind::ValidationError, "power_endpoints: every endpoint needs a node name");
    }
    if (ep.base_url.rfind("http://", 0) != 0 && ep.base_url.rfind("https://", 0) != 0) {
      throw Error(ErrorKind::ValidationError,
                  "power_endpoints: base_url for node '" + ep.node.name +
                      "' must start with http:// or https://");
    }
    if (ep.poll_interval < Duration{1000}) {
      throw Error(ErrorKind::ValidationError,
                  "power_endpoints: poll_interval_s for node '" + ep.node.name +
                      "' must be at least 1 second");
    }
  }
  if (cfg.base_init.duration < 2 * cfg.base_init.cadence) {
    throw Error(ErrorKind::ValidationError, "base_init.duration_s must be at least twice the cadence");
  }
  const auto& b = cfg.bootstrap;
  if (!(b.bucket_lo < b.bucket_hi) || !(b.bucket_width > 0.0) ||
      b.bucket_width > b.bucket_hi - b.bucket_lo || !(b.min_fill_factor > 0.0) ||
      b.min_fill_factor > 1.0 || b.max_rounds < 1) {
    throw Error(ErrorKind::ValidationError, "bootstrap bucket configuration is inconsistent");
  }

  // Compiles the patterns, surfacing bad regexes as config errors.
  ControlPlaneMatcher compiled(cfg.control_plane_patterns);

  bool simulated = cfg.source == SourceMode::Simulated;
  bool init_mode = cfg.mode == RunMode::InitBase || cfg.mode == RunMode::InitBootstrap;

  if (cfg.mode == RunMode::Replay && cfg.source == SourceMode::Live) {
    throw Error(ErrorKind::ValidationError, "mode REPLAY requires source SIMULATED");
  }
  if ((cfg.mode == RunMode::Replay || simulated) && cfg.scenario.empty()) {
    throw Error(ErrorKind::ValidationError,
                "scenario: a builtin name or file path is required with source SIMULATED");
  }
  if (init_mode && !simulated && cfg.power_endpoints.empty()) {
    throw Error(ErrorKind::ValidationError,
                "power_endpoints: init modes need at least one Redfish endpoint (or source SIMULATED with a scenario)");
  }
  if (cfg.mode == RunMode::InitBase && cfg.control_plane_patterns.empty()) {
    throw Error(ErrorKind::ValidationError,
                "control_plane_patterns: base init must know the control plane to verify the cluster is empty");
  }
  if (cfg.mode == RunMode::Estimator && cfg.profile_path.empty()) {
    throw Error(ErrorKind::ValidationError,
                "profile: ESTIMATOR needs a static power profile; run INIT_BASE or INIT_BOOTSTRAP first");
  }
  if (!simulated && (cfg.mode == RunMode::Estimator || init_mode) && cfg.metrics.api_base.empty()) {
    throw Error(ErrorKind::ValidationError, "metrics.api_base: required with source LIVE");
  }
  if (init_mode && (cfg.mode == RunMode::InitBootstrap) && !simulated) {
    for (const auto& ep : cfg.power_endpoints) {
      if (!cfg.node_capacities.count(ep.node)) {
        throw Error(ErrorKind::ValidationError,
                    "node_capacities: missing CPU capacity for node '" + ep.node.name + "'");
      }
    }
  }
}

}  // namespace

RunConfig load_config(const std::optional<std::string>& config_path,
                      const std::map<std::string, std::string>& env, const CliOverrides& cli) {
  RunConfig cfg;
  cfg.control_plane_patterns = default_control_plane_patterns();
  if (config_path) apply_file(cfg, *config_path);
  apply_env(cfg, env);
  apply_cli(cfg, cli);
  validate(cfg);
  return cfg;
}

}  // namespace kubewatt
