#include <doctest.h>

#include <httplib.h>

#include <atomic>
#include <thread>

#include "exposition_parser.hpp"
#include "kubewatt/estimator.hpp"
#include "testutil.hpp"

using namespace kubewatt;
using namespace kubewatt::testutil;

namespace {

EstimatorConfig config_with_profile(double watts = 199.1) {
  EstimatorConfig cfg;
  cfg.profile = profile_of(watts);
  return cfg;
}

}  // namespace

TEST_CASE("estimator pairs fresh samples and attributes power") {
  Estimator est(config_with_profile(), ControlPlaneMatcher({"coredns-.*"}));
  Instant t0 = scenario_epoch();
  est.offer_power(power_sample(250.0, t0));
  est.offer_cpu(cpu_sample({{cref("stress", "a"), 2.0}, {cref("stress", "b"), 6.0}}, 8.1, t0));
  auto records = est.tick(t0);
  REQUIRE(records.size() == 1);
  CHECK(records[0].per_container.at(cref("stress", "a")) == doctest::Approx(12.725));
  CHECK(est.stale_counters().at(NodeRef{"n1"}) == 0);
}

TEST_CASE("stale samples skip the node and bump the counter") {
  Estimator est(config_with_profile(), ControlPlaneMatcher{});
  Instant t0 = scenario_epoch();
  est.offer_power(power_sample(250.0, t0));
  est.offer_cpu(cpu_sample({{cref("stress", "a"), 2.0}}, 2.0, t0));

  // CPU data has gone stale by the second tick.
  CHECK(est.tick(t0).size() == 1);
  est.offer_power(power_sample(251.0, t0 + Duration{45'000}));
  auto records = est.tick(t0 + Duration{45'000});
  CHECK(records.empty());
  CHECK(est.stale_counters().at(NodeRef{"n1"}) == 1);

  // no record this tick means no gauges for the node either
  auto parsed = parse_exposition(est.render());
  for (const auto& s : parsed.samples) {
    CHECK(s.name == "kubewatt_stale_samples_total");
  }
}

TEST_CASE("a never-sampled node counts as stale from the first tick") {
  Estimator est(config_with_profile(), ControlPlaneMatcher{});
  CHECK(est.tick(scenario_epoch()).empty());
  CHECK(est.stale_counters().at(NodeRef{"n1"}) == 1);
}

TEST_CASE("vanished containers leave no ghost series on the next tick") {
  Estimator est(config_with_profile(), ControlPlaneMatcher{});
  Instant t0 = scenario_epoch();
  est.offer_power(power_sample(250.0, t0));
  est.offer_cpu(cpu_sample({{cref("stress", "doomed"), 4.0}}, 4.0, t0));
  est.tick(t0);
  CHECK(est.render().find("doomed") != std::string::npos);

  Instant t1 = t0 + Duration{15'000};
  est.offer_power(power_sample(250.0, t1));
  est.offer_cpu(cpu_sample({{cref("stress", "fresh"), 4.0}}, 4.0, t1));
  est.tick(t1);
  std::string text = est.render();
  CHECK(text.find("doomed") == std::string::npos);
  CHECK(text.find("fresh") != std::string::npos);
}

TEST_CASE("metrics endpoint serves the published snapshot") {
  auto snapshot = std::make_shared<RenderedSnapshot>();
  snapshot->publish("# HELP x y\n# TYPE x gauge\nx 1\n");
  MetricsHttpServer server(snapshot);
  server.start("127.0.0.1:0");
  REQUIRE(server.port() > 0);

  httplib::Client client("127.0.0.1", server.port());
  auto res = client.Get("/metrics");
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(res->get_header_value("Content-Type") == kExpositionContentType);
  CHECK(res->body == "# HELP x y\n# TYPE x gauge\nx 1\n");
  server.stop();
}

TEST_CASE("binding an occupied port fails loudly") {
  auto snapshot = std::make_shared<RenderedSnapshot>();
  MetricsHttpServer first(snapshot);
  first.start("127.0.0.1:0");
  MetricsHttpServer second(snapshot);
  try {
    second.start("127.0.0.1:" + std::to_string(first.port()));
    FAIL("expected BindFailed");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::BindFailed);
  }
  first.stop();
}

TEST_CASE("scrapes during continuous publishing always see a complete document") {
  auto snapshot = std::make_shared<RenderedSnapshot>();
  Estimator est(config_with_profile(), ControlPlaneMatcher{});
  snapshot->publish(est.render());
  MetricsHttpServer server(snapshot);
  server.start("127.0.0.1:0");

  std::atomic<bool> done{false};
  std::thread publisher([&] {
    Instant t = scenario_epoch();
    for (int i = 0; i < 200; ++i) {
      t += Duration{15'000};
      est.offer_power(power_sample(200.0 + i, t));
      est.offer_cpu(cpu_sample({{cref("s", "pod-" + std::to_string(i % 7)), 1.0 + i}}, 1.0 + i, t));
      est.tick(t);
      snapshot->publish(est.render());
    }
    done.store(true);
  });

  httplib::Client client("127.0.0.1", server.port());
  int scrapes = 0;
  while (!done.load()) {
    auto res = client.Get("/metrics");
    REQUIRE(res);
    REQUIRE(res->status == 200);
    // the parser throws on torn or malformed output
    auto parsed = parse_exposition(res->body);
    CHECK(parsed.types.size() == 7);
    ++scrapes;
  }
  publisher.join();
  server.stop();
  CHECK(scrapes > 0);
}
