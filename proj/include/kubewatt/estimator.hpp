#pragma once

#include <atomic>
#include <condition_variable>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "kubewatt/core_model.hpp"
#include "kubewatt/exposition.hpp"
#include "kubewatt/k8s_metrics.hpp"
#include "kubewatt/power_sources.hpp"
#include "kubewatt/time.hpp"

namespace kubewatt {

struct EstimatorConfig {
  StaticPowerProfile profile;
  Duration cadence = Duration{15'000};
  Duration skew_bound = kDefaultSkewBound;
  std::string listen_address = "127.0.0.1:9400";
  std::string metric_prefix = "kubewatt";
};

// Estimation core: holds the latest samples per node and turns them into
// AttributionRecords on each tick. Pure state machine, no threads; the
// live service and the replay engine both drive it.
class Estimator {
 public:
  Estimator(EstimatorConfig cfg, ControlPlaneMatcher matcher);

  void offer_power(const PowerSample& sample);
  void offer_cpu(const CpuSample& sample);

  // Produces at most one record per calibrated node. Nodes without a
  // fresh power/CPU pair within the skew bound are skipped and their
  // staleness counter incremented; nothing here is fatal.
  std::vector<AttributionRecord> tick(Instant now);

  // Exposition document for the latest completed tick.
  std::string render() const;

  const std::map<NodeRef, std::uint64_t>& stale_counters() const { return stale_; }
  const EstimatorConfig& config() const { return cfg_; }

 private:
  EstimatorConfig cfg_;
  ControlPlaneMatcher matcher_;
  std::map<NodeRef, PowerSample> latest_power_;
  std::map<NodeRef, CpuSample> latest_cpu_;
  std::map<NodeRef, std::uint64_t> stale_;
  std::vector<AttributionRecord> latest_records_;
};

// Atomic handoff between whoever computes exposition documents and the
// serving endpoint. Readers always get a complete document from a single
// tick; a scrape can never observe a half-updated one.
class RenderedSnapshot {
 public:
  RenderedSnapshot() : current_(std::make_shared<const std::string>()) {}

  void publish(std::string rendered) {
    std::atomic_store(&current_, std::make_shared<const std::string>(std::move(rendered)));
  }

  std::shared_ptr<const std::string> get() const { return std::atomic_load(&current_); }

 private:
  std::shared_ptr<const std::string> current_;
};

// /metrics endpoint. Serves whatever snapshot was last published;
// responds regardless of collector health.
class MetricsHttpServer {
 public:
  explicit MetricsHttpServer(std::shared_ptr<RenderedSnapshot> snapshot);
  ~MetricsHttpServer();

  // Binds and starts serving on a background thread. Throws BindFailed.
  // listen_address "host:0" picks an ephemeral port (see port()).
  void start(const std::string& listen_address);
  void stop();
  int port() const { return port_; }

 private:
  std::shared_ptr<RenderedSnapshot> snapshot_;
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::thread thread_;
  int port_ = 0;
};

// The long-running live estimator: one polling thread per power
// endpoint, one metrics polling thread, one estimation thread, plus the
// serving endpoint. Collector failures are logged and surface as
// staleness; they never take the endpoint down.
class EstimatorService {
 public:
  EstimatorService(EstimatorConfig cfg, ControlPlaneMatcher matcher,
                   std::vector<std::unique_ptr<PowerSource>> power_sources,
                   std::unique_ptr<CpuSource> cpu_source);
  ~EstimatorService();

  void start();
  void stop();
  void wait();  // blocks until stop() is called from elsewhere
  int port() const;

 private:
  void power_loop(PowerSource* source, Duration interval);
  void cpu_loop();
  void tick_loop();

  EstimatorConfig cfg_;
  std::vector<std::unique_ptr<PowerSource>> power_sources_;
  std::unique_ptr<CpuSource> cpu_source_;

  std::mutex mutex_;  // guards estimator_
  Estimator estimator_;

  std::shared_ptr<RenderedSnapshot> snapshot_;
  MetricsHttpServer server_;
  std::vector<std::thread> threads_;
  std::atomic<bool> stop_{false};
  std::mutex wait_mutex_;
  std::condition_variable wait_cv_;
};

}  // namespace kubewatt
