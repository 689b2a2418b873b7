#include <doctest.h>

#include <cmath>

#include "kubewatt/core_model.hpp"
#include "kubewatt/rng.hpp"
#include "testutil.hpp"

using namespace kubewatt;
using namespace kubewatt::testutil;

TEST_CASE("split_power splits around the calibrated static value") {
  auto r = split_power(250.0, 199.1);
  CHECK(r.dynamic_watts == doctest::Approx(50.9).epsilon(1e-12));
  CHECK(r.residual_watts == 0.0);

  r = split_power(199.1, 199.1);
  CHECK(r.dynamic_watts == 0.0);
  CHECK(r.residual_watts == 0.0);

  r = split_power(180.0, 199.1);
  CHECK(r.dynamic_watts == 0.0);
  CHECK(r.residual_watts == doctest::Approx(-19.1).epsilon(1e-12));
}

TEST_CASE("split_power conserves node watts") {
  SplitMix64 rng(7);
  for (int i = 0; i < 500; ++i) {
    double node = rng.next_unit() * 500.0;
    double stat = 1.0 + rng.next_unit() * 400.0;
    auto r = split_power(node, stat);
    CHECK(stat + r.dynamic_watts + r.residual_watts == doctest::Approx(node).epsilon(1e-12));
    CHECK(r.dynamic_watts >= 0.0);
    CHECK(r.residual_watts <= 0.0);
  }
}

TEST_CASE("attribute_power is proportional to CPU share") {
  auto cpu = cpu_sample({{cref("stress", "A"), 2.0}, {cref("stress", "B"), 6.0}}, 8.2);
  auto shares = attribute_power(50.9, cpu, ControlPlaneMatcher{});
  CHECK(shares.per_container.at(cref("stress", "A")) == doctest::Approx(12.725).epsilon(1e-12));
  CHECK(shares.per_container.at(cref("stress", "B")) == doctest::Approx(38.175).epsilon(1e-12));
  CHECK(shares.unattributed_watts == 0.0);
}

TEST_CASE("attribute_power excludes matched control-plane pods") {
  auto cpu = cpu_sample({{cref("app", "A"), 4.0}, {cref("kube-system", "kube-x"), 1.0}}, 5.3);
  ControlPlaneMatcher matcher({"kube-.*"});
  auto shares = attribute_power(50.9, cpu, matcher);
  CHECK(shares.per_container.size() == 1);
  CHECK(shares.per_container.at(cref("app", "A")) == doctest::Approx(50.9));
  CHECK(shares.per_container.count(cref("kube-system", "kube-x")) == 0);
}

TEST_CASE("attribute_power with zero attributable CPU attributes nothing") {
  // Degenerate-case oracle: any snapshot whose containers are all at
  // zero CPU must produce zero per-container watts and report the full
  // dynamic amount as unattributed.
  SplitMix64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    std::map<ContainerRef, double> containers;
    auto n = static_cast<int>(rng.next_in_pow2_range(0, 7));
    for (int i = 0; i < n; ++i) {
      containers[cref("ns" + std::to_string(i), "pod-" + std::to_string(i))] = 0.0;
    }
    auto shares = attribute_power(50.9, cpu_sample(std::move(containers), 0.1), ControlPlaneMatcher{});
    for (const auto& [ref, watts] : shares.per_container) CHECK(watts == 0.0);
    CHECK(shares.unattributed_watts == doctest::Approx(50.9));
  }
}

namespace {

CpuSample random_snapshot(SplitMix64& rng, int max_containers = 16) {
  std::map<ContainerRef, double> containers;
  auto n = static_cast<int>(rng.next_in_pow2_range(0, static_cast<std::uint64_t>(max_containers - 1)));
  for (int i = 0; i < n; ++i) {
    std::string pod = (rng.next() % 3 == 0 ? "kube-cp-" : "workload-") + std::to_string(i);
    double cores = rng.next() % 4 == 0 ? 0.0 : rng.next_unit() * 16.0;
    containers[cref("ns", pod)] = cores;
  }
  double sum = 0.0;
  for (auto& [ref, c] : containers) sum += c;
  return cpu_sample(std::move(containers), sum + rng.next_unit());
}

}  // namespace

TEST_CASE("attribution invariants hold for random snapshots") {
  SplitMix64 rng(13);
  ControlPlaneMatcher matcher({"kube-.*"});
  for (int trial = 0; trial < 500; ++trial) {
    CpuSample cpu = random_snapshot(rng);
    double dynamic = rng.next_unit() * 120.0;
    auto shares = attribute_power(dynamic, cpu, matcher);

    double sum = 0.0;
    for (const auto& [ref, watts] : shares.per_container) {
      CHECK(watts >= 0.0);                          // non-negativity
      CHECK(!matcher.matches(ref.pod));             // exclusion
      if (cpu.containers.at(ref) == 0.0) CHECK(watts == 0.0);  // zero law
      sum += watts;
    }
    // conservation of the dynamic component
    CHECK(sum + shares.unattributed_watts == doctest::Approx(dynamic).epsilon(1e-12));

    // proportionality between any two attributed containers
    const ContainerRef* a = nullptr;
    const ContainerRef* b = nullptr;
    for (const auto& [ref, watts] : shares.per_container) {
      if (cpu.containers.at(ref) > 0.0) {
        if (!a) {
          a = &ref;
        } else if (!b) {
          b = &ref;
        }
      }
    }
    if (a && b && dynamic > 0.0) {
      double watts_ratio = shares.per_container.at(*a) / shares.per_container.at(*b);
      double cpu_ratio = cpu.containers.at(*a) / cpu.containers.at(*b);
      CHECK(watts_ratio == doctest::Approx(cpu_ratio).epsilon(1e-9));
    }

    // scale invariance
    CpuSample scaled = cpu;
    double factor = 0.25 + rng.next_unit() * 8.0;
    for (auto& [ref, cores] : scaled.containers) cores *= factor;
    auto rescaled = attribute_power(dynamic, scaled, matcher);
    for (const auto& [ref, watts] : shares.per_container) {
      CHECK(rescaled.per_container.at(ref) == doctest::Approx(watts).epsilon(1e-9));
    }
  }
}

TEST_CASE("snapshot_attribution: idle cluster yields zero container watts") {
  auto cpu = cpu_sample({{cref("app", "worker-1"), 0.0}, {cref("kube-system", "coredns-x"), 0.04}},
                        0.1);
  auto rec = snapshot_attribution(power_sample(199.1), cpu, profile_of(199.1),
                                  ControlPlaneMatcher({"coredns-.*"}));
  CHECK(rec.static_watts == doctest::Approx(199.1));
  CHECK(rec.dynamic_watts == 0.0);
  for (const auto& [ref, watts] : rec.per_container) CHECK(watts == 0.0);
}

TEST_CASE("snapshot_attribution: completed containers are simply absent") {
  // 64 completed idle pods do not appear in the CPU sample at all, so
  // the stressor gets the whole dynamic component and no ghost entries
  // exist.
  auto cpu = cpu_sample({{cref("stress", "stress-runner"), 32.0}}, 32.1);
  auto rec = snapshot_attribution(power_sample(260.0), cpu, profile_of(199.1), ControlPlaneMatcher{});
  CHECK(rec.per_container.size() == 1);
  CHECK(rec.per_container.at(cref("stress", "stress-runner")) == doctest::Approx(60.9).epsilon(1e-12));
}

TEST_CASE("snapshot_attribution enforces the skew bound") {
  auto power = power_sample(250.0, scenario_epoch());
  auto cpu = cpu_sample({{cref("app", "a"), 1.0}}, 1.0, scenario_epoch() + Duration{120'000});
  CHECK_THROWS_WITH_AS(
      snapshot_attribution(power, cpu, profile_of(199.1), ControlPlaneMatcher{}, Duration{30'000}),
      doctest::Contains("apart"), Error);
  try {
    snapshot_attribution(power, cpu, profile_of(199.1), ControlPlaneMatcher{}, Duration{30'000});
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::SampleSkew);
  }
}

TEST_CASE("snapshot_attribution requires a calibrated node") {
  auto cpu = cpu_sample({{cref("app", "a"), 1.0}}, 1.0);
  try {
    snapshot_attribution(power_sample(250.0), cpu, profile_of(199.1, "other-node"),
                         ControlPlaneMatcher{});
    FAIL("expected MissingProfile");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::MissingProfile);
  }
}

TEST_CASE("snapshot_attribution conserves watts including residual and unattributed") {
  SplitMix64 rng(17);
  ControlPlaneMatcher matcher({"kube-.*"});
  for (int trial = 0; trial < 300; ++trial) {
    CpuSample cpu = random_snapshot(rng);
    double node_watts = 150.0 + rng.next_unit() * 200.0;
    auto rec = snapshot_attribution(power_sample(node_watts), cpu, profile_of(199.1), matcher);
    double sum = 0.0;
    for (const auto& [ref, watts] : rec.per_container) sum += watts;
    double reconstructed = rec.static_watts + sum + rec.residual_watts + rec.unattributed_watts;
    CHECK(reconstructed == doctest::Approx(rec.node_watts).epsilon(1e-12));
    CHECK(std::isfinite(reconstructed));
  }
}

TEST_CASE("control-plane matcher anchors patterns") {
  ControlPlaneMatcher matcher({"dns"});
  CHECK(matcher.matches("dns"));
  CHECK_FALSE(matcher.matches("freedns-app"));
  CHECK_FALSE(matcher.matches("dns-extra"));
}

TEST_CASE("control-plane matcher rejects bad patterns") {
  CHECK_THROWS_AS(ControlPlaneMatcher({"co(redns-.*"}), Error);
}
