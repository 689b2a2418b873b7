#include "kubewatt/k8s_metrics.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "kubewatt/http_client.hpp"

namespace kubewatt {

using nlohmann::json;

double parse_cpu_quantity(const std::string& quantity) {
  if (quantity.empty()) {
    throw Error(ErrorKind::SchemaMismatch, "empty CPU quantity");
  }
  const char* begin = quantity.c_str();
  char* end = nullptr;
  double value = std::strtod(begin, &end);
  if (end == begin || value < 0.0 || !std::isfinite(value)) {
    throw Error(ErrorKind::SchemaMismatch, "bad CPU quantity '" + quantity + "'");
  }
  std::string suffix(end);
  double scale = 1.0;
  if (suffix.empty()) {
    scale = 1.0;
  } else if (suffix == "n") {
    scale = 1e-9;
  } else if (suffix == "u") {
    scale = 1e-6;
  } else if (suffix == "m") {
    scale = 1e-3;
  } else if (suffix == "k") {
    scale = 1e3;
  } else if (suffix == "M") {
    scale = 1e6;
  } else if (suffix == "G") {
    scale = 1e9;
  } else {
    throw Error(ErrorKind::SchemaMismatch, "bad CPU quantity suffix '" + quantity + "'");
  }
  return value * scale;
}

double rate_from_cumulative(double prev_seconds, double cur_seconds, Duration elapsed) {
  if (elapsed.count() <= 0) return 0.0;
  double delta = cur_seconds - prev_seconds;
  if (delta < 0.0) return 0.0;  // counter reset
  return delta / (static_cast<double>(elapsed.count()) / 1000.0);
}

bool cpu_sum_anomaly(const CpuSample& sample, double tolerance_frac) {
  double sum = 0.0;
  for (const auto& [ref, cores] : sample.containers) sum += cores;
  return sum > sample.node_cores * (1.0 + tolerance_frac) + 1e-3;
}

ControlPlanePartition classify_control_plane(const CpuSample& sample,
                                             const ControlPlaneMatcher& matcher) {
  ControlPlanePartition out;
  for (const auto& [ref, cores] : sample.containers) {
    if (matcher.matches(ref.pod)) {
      out.control.insert(ref);
    } else {
      out.workload.insert(ref);
    }
  }
  return out;
}

namespace {

std::string read_token(const MetricsSourceConfig& cfg) {
  if (!cfg.bearer_token.empty()) return cfg.bearer_token;
  std::string path = cfg.token_path;
  if (path.empty()) {
    std::ifstream probe(kInClusterTokenPath);
    if (!probe.good()) return {};
    path = kInClusterTokenPath;
  }
  std::ifstream in(path);
  if (!in.good()) {
    throw Error(ErrorKind::AuthFailed, "cannot read bearer token file '" + path + "'");
  }
  std::stringstream ss;
  ss << in.rdbuf();
  std::string token = ss.str();
  while (!token.empty() && (token.back() == '\n' || token.back() == '\r')) token.pop_back();
  return token;
}

json parse_list(const std::string& body, const char* what) {
  json parsed;
  try {
    parsed = json::parse(body);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::SchemaMismatch, std::string(what) + " response is not valid JSON: " + e.what());
  }
  if (!parsed.contains("items") || !parsed["items"].is_array()) {
    throw Error(ErrorKind::SchemaMismatch, std::string(what) + " response has no items array");
  }
  return parsed;
}

// Server-reported sample time; absent or unparsable timestamps fall back
// to the poll time.
Instant item_timestamp(const json& item, Instant now) {
  auto it = item.find("timestamp");
  if (it == item.end() || !it->is_string()) return now;
  try {
    return parse_iso8601(it->get<std::string>());
  } catch (const Error&) {
    return now;
  }
}

}  // namespace

struct K8sMetricsClient::Impl {
  HttpClient client;

  Impl(const MetricsSourceConfig& cfg) : client(cfg.api_base, cfg.tls_verify) {
    client.set_bearer_token(read_token(cfg));
  }
};

K8sMetricsClient::K8sMetricsClient(MetricsSourceConfig cfg)
    : cfg_(std::move(cfg)), impl_(std::make_unique<Impl>(cfg_)) {}

K8sMetricsClient::~K8sMetricsClient() = default;

std::map<NodeRef, double> K8sMetricsClient::poll_node_cpu(Instant now) {
  json parsed = parse_list(impl_->client.get("/apis/metrics.k8s.io/v1beta1/nodes"), "nodes");
  std::map<NodeRef, double> out;
  Duration staleness_bound = cfg_.poll_interval * 2;
  for (const json& item : parsed["items"]) {
    if (!item.contains("metadata") || !item["metadata"].contains("name")) {
      throw Error(ErrorKind::SchemaMismatch, "node metrics item without metadata.name");
    }
    NodeRef node{item["metadata"]["name"].get<std::string>()};
    Instant ts = item_timestamp(item, now);
    if (now - ts > staleness_bound) {
      spdlog::warn("discarding stale node metrics for {} ({} ms old)", node.name,
                   (now - ts).count());
      continue;
    }
    if (!item.contains("usage") || !item["usage"].contains("cpu")) {
      throw Error(ErrorKind::SchemaMismatch, "node metrics item without usage.cpu");
    }
    out[node] = parse_cpu_quantity(item["usage"]["cpu"].get<std::string>());
  }
  if (out.empty()) {
    throw Error(ErrorKind::EmptyResponse, "node metrics returned no nodes; is metrics-server running?");
  }
  return out;
}

ClusterCpuSnapshot K8sMetricsClient::poll_container_cpu(Instant now) {
  auto node_cpu = poll_node_cpu(now);
  if (node_cpu.size() != 1) {
    // PodMetrics carries no node name; without exactly one node the
    // pod->node assignment is ambiguous.
    throw Error(ErrorKind::SchemaMismatch,
                "live metrics source supports single-node clusters only (saw " +
                    std::to_string(node_cpu.size()) + " nodes)");
  }
  const NodeRef node = node_cpu.begin()->first;

  std::vector<std::string> paths;
  if (cfg_.namespaces.empty()) {
    paths.push_back("/apis/metrics.k8s.io/v1beta1/pods");
  } else {
    for (const auto& ns : cfg_.namespaces) {
      paths.push_back("/apis/metrics.k8s.io/v1beta1/namespaces/" + ns + "/pods");
    }
  }

  ClusterCpuSnapshot snap;
  snap.timestamp = now;
  CpuSample sample;
  sample.node = node;
  sample.timestamp = now;
  sample.node_cores = node_cpu.begin()->second;

  Duration staleness_bound = cfg_.poll_interval * 2;
  for (const auto& path : paths) {
    json parsed = parse_list(impl_->client.get(path), "pods");
    for (const json& item : parsed["items"]) {
      if (!item.contains("metadata")) continue;
      const json& meta = item["metadata"];
      std::string pod = meta.value("name", "");
      std::string ns = meta.value("namespace", "");
      if (pod.empty() || ns.empty()) continue;
      Instant ts = item_timestamp(item, now);
      if (now - ts > staleness_bound) {
        spdlog::warn("discarding stale pod metrics for {}/{}", ns, pod);
        continue;
      }
      if (!item.contains("containers") || !item["containers"].is_array()) continue;
      for (const json& c : item["containers"]) {
        std::string cname = c.value("name", "");
        if (cname.empty() || !c.contains("usage") || !c["usage"].contains("cpu")) continue;
        double cores = parse_cpu_quantity(c["usage"]["cpu"].get<std::string>());
        sample.containers[ContainerRef{ns, pod, cname, node}] = cores;
      }
    }
  }
  if (cpu_sum_anomaly(sample)) {
    spdlog::warn("metric anomaly on {}: container CPU sum exceeds node CPU", node.name);
  }
  snap.per_node.emplace(node, std::move(sample));
  return snap;
}

}  // namespace kubewatt
