#pragma once

#include <functional>
#include <memory>
#include <string>

#include "kubewatt/core_model.hpp"
#include "kubewatt/time.hpp"

namespace kubewatt {

// One out-of-band management endpoint serving the Redfish power resource
// for a node.
struct PowerCollectorEndpoint {
  NodeRef node;
  std::string base_url;      // scheme://host[:port]
  std::string username;
  std::string password;
  std::string chassis_path = "/redfish/v1/Chassis/System.Embedded.1/Power";
  Duration poll_interval = Duration{15'000};
  bool tls_verify = true;
};

// Linear node power model for the simulated source: watts at time t are
// static_floor + slope * cluster_cpu(t - lag) + N(0, noise_sd). The lag
// mimics BMCs that report trailing averages, where power readings trail
// CPU steps by up to a minute.
struct SimPowerModel {
  double static_floor_w = 0.0;
  double slope_w_per_core = 0.0;
  Duration lag = Duration{0};
  double noise_sd_w = 0.0;
  std::uint64_t seed = 0;
};

class PowerSource {
 public:
  virtual ~PowerSource() = default;
  virtual const NodeRef& node() const = 0;
  // Throws Error{Unreachable|AuthFailed|SchemaMismatch} on failure; a
  // failed poll never yields a sample.
  virtual PowerSample poll(Instant now) = 0;
};

class RedfishPowerCollector final : public PowerSource {
 public:
  explicit RedfishPowerCollector(PowerCollectorEndpoint endpoint);
  ~RedfishPowerCollector() override;

  const NodeRef& node() const override { return endpoint_.node; }
  PowerSample poll(Instant now) override;

 private:
  PowerCollectorEndpoint endpoint_;
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Parses a Redfish power resource body. Exposed separately so the wire
// contract is testable without a live BMC.
double extract_power_watts(const std::string& json_body);

// Deterministic: identical (model, inputs, now) produce identical watts.
PowerSample poll_simulated(const SimPowerModel& model, const NodeRef& node,
                           const std::function<double(Instant)>& cluster_cpu_at, Instant now);

}  // namespace kubewatt
