#include <doctest.h>

#include <httplib.h>

#include <thread>

#include "kubewatt/k8s_metrics.hpp"
#include "kubewatt/rng.hpp"
#include "testutil.hpp"

using namespace kubewatt;
using namespace kubewatt::testutil;

TEST_CASE("cpu quantities normalize to cores") {
  CHECK(parse_cpu_quantity("3643163n") == doctest::Approx(0.003643163));
  CHECK(parse_cpu_quantity("250m") == doctest::Approx(0.25));
  CHECK(parse_cpu_quantity("2") == doctest::Approx(2.0));
  CHECK(parse_cpu_quantity("1500u") == doctest::Approx(0.0015));
  CHECK(parse_cpu_quantity("0") == 0.0);
  CHECK(parse_cpu_quantity("1.5") == doctest::Approx(1.5));

  for (const char* bad : {"", "cores", "-250m", "12x", "1.5mm"}) {
    CHECK_THROWS_AS(parse_cpu_quantity(bad), Error);
  }
}

TEST_CASE("cumulative counters difference into rates, resets clamp to zero") {
  CHECK(rate_from_cumulative(100.0, 130.0, Duration{15'000}) == doctest::Approx(2.0));
  CHECK(rate_from_cumulative(130.0, 100.0, Duration{15'000}) == 0.0);
  CHECK(rate_from_cumulative(1.0, 2.0, Duration{0}) == 0.0);
}

TEST_CASE("container sum above node cpu plus tolerance is an anomaly") {
  auto ok = cpu_sample({{cref("a", "p1"), 2.0}, {cref("a", "p2"), 1.0}}, 3.1);
  CHECK_FALSE(cpu_sum_anomaly(ok));
  auto anomalous = cpu_sample({{cref("a", "p1"), 3.5}}, 3.0);
  CHECK(cpu_sum_anomaly(anomalous));
  // node cpu includes overhead, so sums slightly below node are normal
  auto overhead = cpu_sample({{cref("a", "p1"), 2.0}}, 2.4);
  CHECK_FALSE(cpu_sum_anomaly(overhead));
}

TEST_CASE("classify_control_plane partitions by anchored pod-name match") {
  auto sample = cpu_sample({{cref("kube-system", "coredns-abc"), 0.1}, {cref("app", "myapp-1"), 2.0}},
                           2.2);
  auto part = classify_control_plane(sample, ControlPlaneMatcher({"coredns-.*"}));
  CHECK(part.control.size() == 1);
  CHECK(part.control.count(cref("kube-system", "coredns-abc")) == 1);
  CHECK(part.workload.count(cref("app", "myapp-1")) == 1);

  auto none = classify_control_plane(sample, ControlPlaneMatcher{});
  CHECK(none.control.empty());
  CHECK(none.workload.size() == 2);

  auto all = classify_control_plane(sample, ControlPlaneMatcher({".*"}));
  CHECK(all.workload.empty());
  CHECK(all.control.size() == 2);
}

TEST_CASE("classification is a partition for arbitrary patterns and pods") {
  SplitMix64 rng(23);
  for (int trial = 0; trial < 300; ++trial) {
    std::map<ContainerRef, double> containers;
    auto n = static_cast<int>(rng.next_in_pow2_range(0, 15));
    for (int i = 0; i < n; ++i) {
      std::string pod;
      for (int k = 0; k < 6; ++k) pod += static_cast<char>('a' + rng.next() % 26);
      containers[cref("ns", pod + "-" + std::to_string(i))] = rng.next_unit();
    }
    std::vector<std::string> patterns;
    auto m = static_cast<int>(rng.next_in_pow2_range(0, 3));
    for (int k = 0; k < m; ++k) {
      patterns.push_back(std::string(1, static_cast<char>('a' + rng.next() % 26)) + ".*");
    }
    CpuSample sample = cpu_sample(std::move(containers), 10.0);
    auto part = classify_control_plane(sample, ControlPlaneMatcher(patterns));
    CHECK(part.control.size() + part.workload.size() == sample.containers.size());
    for (const auto& ref : part.control) CHECK(part.workload.count(ref) == 0);
    for (const auto& [ref, cores] : sample.containers) {
      CHECK(part.control.count(ref) + part.workload.count(ref) == 1);
    }
  }
}

namespace {

constexpr const char* kNodesBody = R"({
  "kind": "NodeMetricsList",
  "items": [
    {
      "metadata": {"name": "sut"},
      "timestamp": "2025-01-01T00:00:05Z",
      "window": "15s",
      "usage": {"cpu": "31987654321n", "memory": "2048Ki"}
    }
  ]
})";

constexpr const char* kPodsBody = R"({
  "kind": "PodMetricsList",
  "items": [
    {
      "metadata": {"name": "stress-runner", "namespace": "stress"},
      "timestamp": "2025-01-01T00:00:05Z",
      "containers": [{"name": "main", "usage": {"cpu": "31900m"}}]
    },
    {
      "metadata": {"name": "coredns-abc", "namespace": "kube-system"},
      "timestamp": "2025-01-01T00:00:05Z",
      "containers": [{"name": "coredns", "usage": {"cpu": "12m"}}]
    }
  ]
})";

class MetricsMock {
 public:
  MetricsMock() {
    server_.Get("/apis/metrics.k8s.io/v1beta1/nodes", [this](const httplib::Request& req, httplib::Response& res) {
      seen_auth_ = req.get_header_value("Authorization");
      res.set_content(nodes_body, "application/json");
    });
    server_.Get("/apis/metrics.k8s.io/v1beta1/pods", [this](const httplib::Request&, httplib::Response& res) {
      ++cluster_wide_calls;
      res.set_content(pods_body, "application/json");
    });
    server_.Get(R"(/apis/metrics.k8s.io/v1beta1/namespaces/([^/]+)/pods)",
                [this](const httplib::Request& req, httplib::Response& res) {
                  namespaces_seen.push_back(req.matches[1]);
                  res.set_content(pods_body, "application/json");
                });
    port_ = server_.bind_to_any_port("127.0.0.1");
    REQUIRE(port_ > 0);
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~MetricsMock() {
    server_.stop();
    thread_.join();
  }

  MetricsSourceConfig config() const {
    MetricsSourceConfig cfg;
    cfg.mode = SourceMode::Live;
    cfg.api_base = "http://127.0.0.1:" + std::to_string(port_);
    cfg.bearer_token = "test-token";
    cfg.tls_verify = false;
    return cfg;
  }

  std::string nodes_body = kNodesBody;
  std::string pods_body = kPodsBody;
  std::vector<std::string> namespaces_seen;
  int cluster_wide_calls = 0;
  const std::string& seen_auth() const { return seen_auth_; }

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::string seen_auth_;
};

Instant poll_time() { return parse_iso8601("2025-01-01T00:00:10Z"); }

}  // namespace

TEST_CASE("live node poll normalizes usage and sends the bearer token") {
  MetricsMock mock;
  K8sMetricsClient client(mock.config());
  auto nodes = client.poll_node_cpu(poll_time());
  REQUIRE(nodes.size() == 1);
  CHECK(nodes.at(NodeRef{"sut"}) == doctest::Approx(31.987654321));
  CHECK(mock.seen_auth() == "Bearer test-token");
}

TEST_CASE("live container poll joins node and pod metrics") {
  MetricsMock mock;
  K8sMetricsClient client(mock.config());
  auto snap = client.poll_container_cpu(poll_time());
  REQUIRE(snap.per_node.size() == 1);
  const CpuSample& sample = snap.per_node.at(NodeRef{"sut"});
  CHECK(sample.node_cores == doctest::Approx(31.987654321));
  CHECK(sample.containers.size() == 2);
  CHECK(sample.containers.at(ContainerRef{"stress", "stress-runner", "main", NodeRef{"sut"}}) ==
        doctest::Approx(31.9));
  CHECK(mock.cluster_wide_calls == 1);
}

TEST_CASE("namespace allowlist switches to namespaced endpoints") {
  MetricsMock mock;
  auto cfg = mock.config();
  cfg.namespaces = {"stress"};
  K8sMetricsClient client(cfg);
  client.poll_container_cpu(poll_time());
  CHECK(mock.cluster_wide_calls == 0);
  REQUIRE(mock.namespaces_seen.size() == 1);
  CHECK(mock.namespaces_seen[0] == "stress");
}

TEST_CASE("empty node list is a typed configuration signal") {
  MetricsMock mock;
  mock.nodes_body = R"({"kind":"NodeMetricsList","items":[]})";
  K8sMetricsClient client(mock.config());
  try {
    client.poll_node_cpu(poll_time());
    FAIL("expected EmptyResponse");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::EmptyResponse);
  }
}

TEST_CASE("stale node samples are discarded") {
  MetricsMock mock;
  K8sMetricsClient client(mock.config());
  // 10 s old at a 15 s interval: fresh. Two minutes later: stale.
  CHECK(client.poll_node_cpu(poll_time()).size() == 1);
  try {
    client.poll_node_cpu(poll_time() + Duration{120'000});
    FAIL("expected EmptyResponse after staleness filtering");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::EmptyResponse);
  }
}

TEST_CASE("unreachable metrics API is typed") {
  MetricsSourceConfig cfg;
  cfg.api_base = "http://127.0.0.1:1";
  cfg.bearer_token = "x";
  K8sMetricsClient client(cfg);
  try {
    client.poll_node_cpu(poll_time());
    FAIL("expected Unreachable");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Unreachable);
  }
}

TEST_CASE("auth rejection is typed") {
  MetricsMock mock;
  auto cfg = mock.config();
  cfg.api_base = mock.config().api_base;
  // the mock accepts anything; emulate rejection with a dedicated server
  httplib::Server deny;
  deny.Get(".*", [](const httplib::Request&, httplib::Response& res) { res.status = 401; });
  int port = deny.bind_to_any_port("127.0.0.1");
  std::thread t([&] { deny.listen_after_bind(); });
  deny.wait_until_ready();
  cfg.api_base = "http://127.0.0.1:" + std::to_string(port);
  K8sMetricsClient client(cfg);
  try {
    client.poll_node_cpu(poll_time());
    FAIL("expected AuthFailed");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::AuthFailed);
  }
  deny.stop();
  t.join();
}
