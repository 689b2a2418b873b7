#include "kubewatt/power_sources.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "kubewatt/http_client.hpp"
#include "kubewatt/rng.hpp"

namespace kubewatt {

using nlohmann::json;

struct RedfishPowerCollector::Impl {
  HttpClient client;

  explicit Impl(const PowerCollectorEndpoint& ep) : client(ep.base_url, ep.tls_verify) {
    client.set_basic_auth(ep.username, ep.password);
  }
};

RedfishPowerCollector::RedfishPowerCollector(PowerCollectorEndpoint endpoint)
    : endpoint_(std::move(endpoint)), impl_(std::make_unique<Impl>(endpoint_)) {}

RedfishPowerCollector::~RedfishPowerCollector() = default;

double extract_power_watts(const std::string& json_body) {
  json body;
  try {
    body = json::parse(json_body);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::SchemaMismatch, std::string("power resource is not valid JSON: ") + e.what());
  }
  auto pc = body.find("PowerControl");
  if (pc == body.end() || !pc->is_array() || pc->empty()) {
    throw Error(ErrorKind::SchemaMismatch, "power resource has no PowerControl entries");
  }
  if (pc->size() > 1) {
    spdlog::warn("power resource has {} PowerControl entries; using the first", pc->size());
  }
  const json& entry = (*pc)[0];
  // Vendors disagree on the field name; probe the common spellings.
  for (const char* field : {"PowerConsumedWatts", "AverageConsumedWatts"}) {
    auto it = entry.find(field);
    if (it != entry.end() && it->is_number()) {
      double watts = it->get<double>();
      if (watts < 0.0) {
        throw Error(ErrorKind::SchemaMismatch,
                    std::string(field) + " is negative (" + std::to_string(watts) + ")");
      }
      return watts;
    }
  }
  throw Error(ErrorKind::SchemaMismatch,
              "PowerControl[0] has neither PowerConsumedWatts nor AverageConsumedWatts");
}

PowerSample RedfishPowerCollector::poll(Instant now) {
  std::string body = impl_->client.get(endpoint_.chassis_path);
  PowerSample sample;
  sample.node = endpoint_.node;
  sample.watts = extract_power_watts(body);
  sample.timestamp = now;
  // Redfish PowerControl readings are trailing one-minute averages.
  sample.interval_hint = Duration{60'000};
  return sample;
}

PowerSample poll_simulated(const SimPowerModel& model, const NodeRef& node,
                           const std::function<double(Instant)>& cluster_cpu_at, Instant now) {
  double cores = cluster_cpu_at(now - model.lag);
  double watts = model.static_floor_w + model.slope_w_per_core * cores;
  if (model.noise_sd_w > 0.0) {
    SplitMix64 rng(hash_mix(model.seed, static_cast<std::uint64_t>(unix_ms(now))));
    watts += model.noise_sd_w * rng.next_gaussian();
  }
  PowerSample sample;
  sample.node = node;
  sample.watts = std::max(watts, 0.0);
  sample.timestamp = now;
  return sample;
}

}  // namespace kubewatt
