#include "kubewatt/estimator.hpp"

#include <condition_variable>

#include <httplib.h>
#include <spdlog/spdlog.h>

namespace kubewatt {

Estimator::Estimator(EstimatorConfig cfg, ControlPlaneMatcher matcher)
    : cfg_(std::move(cfg)), matcher_(std::move(matcher)) {
  for (const auto& [node, watts] : cfg_.profile.static_watts) {
    stale_[node] = 0;  // counters exist from the start for every calibrated node
  }
}

void Estimator::offer_power(const PowerSample& sample) { latest_power_[sample.node] = sample; }

void Estimator::offer_cpu(const CpuSample& sample) { latest_cpu_[sample.node] = sample; }

std::vector<AttributionRecord> Estimator::tick(Instant now) {
  std::vector<AttributionRecord> records;
  for (const auto& [node, static_watts] : cfg_.profile.static_watts) {
    auto power_it = latest_power_.find(node);
    auto cpu_it = latest_cpu_.find(node);
    bool fresh = power_it != latest_power_.end() && cpu_it != latest_cpu_.end() &&
                 now - power_it->second.timestamp <= cfg_.skew_bound &&
                 now - cpu_it->second.timestamp <= cfg_.skew_bound;
    if (!fresh) {
      ++stale_[node];
      continue;
    }
    try {
      records.push_back(snapshot_attribution(power_it->second, cpu_it->second, cfg_.profile,
                                             matcher_, cfg_.skew_bound));
    } catch (const Error& e) {
      ++stale_[node];
      spdlog::warn("skipping node {} this tick: {}", node.name, e.what());
    }
  }
  latest_records_ = records;
  return records;
}

std::string Estimator::render() const {
  ExpositionInput input;
  input.prefix = cfg_.metric_prefix;
  input.records = latest_records_;
  input.stale_samples = stale_;
  return render_exposition(input);
}

struct MetricsHttpServer::Impl {
  httplib::Server server;
};

MetricsHttpServer::MetricsHttpServer(std::shared_ptr<RenderedSnapshot> snapshot)
    : snapshot_(std::move(snapshot)), impl_(std::make_unique<Impl>()) {
  impl_->server.Get("/metrics", [snap = snapshot_](const httplib::Request&, httplib::Response& res) {
    auto body = snap->get();
    res.set_content(*body, kExpositionContentType);
  });
}

MetricsHttpServer::~MetricsHttpServer() { stop(); }

void MetricsHttpServer::start(const std::string& listen_address) {
  auto colon = listen_address.rfind(':');
  if (colon == std::string::npos) {
    throw Error(ErrorKind::ValidationError, "listen address must be host:port, got '" + listen_address + "'");
  }
  std::string host = listen_address.substr(0, colon);
  int port = 0;
  try {
    port = std::stoi(listen_address.substr(colon + 1));
  } catch (const std::exception&) {
    throw Error(ErrorKind::ValidationError, "bad listen port in '" + listen_address + "'");
  }

  if (port == 0) {
    port_ = impl_->server.bind_to_any_port(host);
    if (port_ < 0) throw Error(ErrorKind::BindFailed, "cannot bind to " + host);
  } else {
    if (!impl_->server.bind_to_port(host, port)) {
      throw Error(ErrorKind::BindFailed, "cannot bind to " + listen_address);
    }
    port_ = port;
  }
  thread_ = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

void MetricsHttpServer::stop() {
  if (thread_.joinable()) {
    impl_->server.stop();
    thread_.join();
  }
}

EstimatorService::EstimatorService(EstimatorConfig cfg, ControlPlaneMatcher matcher,
                                   std::vector<std::unique_ptr<PowerSource>> power_sources,
                                   std::unique_ptr<CpuSource> cpu_source)
    : cfg_(cfg),
      power_sources_(std::move(power_sources)),
      cpu_source_(std::move(cpu_source)),
      estimator_(std::move(cfg), std::move(matcher)),
      snapshot_(std::make_shared<RenderedSnapshot>()),
      server_(snapshot_) {}

EstimatorService::~EstimatorService() { stop(); }

void EstimatorService::start() {
  snapshot_->publish(estimator_.render());
  server_.start(cfg_.listen_address);
  spdlog::info("serving metrics on {} (port {})", cfg_.listen_address, server_.port());
  for (auto& src : power_sources_) {
    threads_.emplace_back([this, s = src.get()] { power_loop(s, cfg_.cadence); });
  }
  threads_.emplace_back([this] { cpu_loop(); });
  threads_.emplace_back([this] { tick_loop(); });
}

void EstimatorService::power_loop(PowerSource* source, Duration interval) {
  WallClock clock;
  while (!stop_.load()) {
    Instant now = clock.now();
    try {
      PowerSample sample = source->poll(now);
      std::lock_guard lock(mutex_);
      estimator_.offer_power(sample);
    } catch (const Error& e) {
      spdlog::warn("power poll failed for {}: {}", source->node().name, e.what());
    }
    std::unique_lock lock(wait_mutex_);
    wait_cv_.wait_until(lock, std::chrono::system_clock::time_point(now + interval),
                        [this] { return stop_.load(); });
  }
}

void EstimatorService::cpu_loop() {
  WallClock clock;
  while (!stop_.load()) {
    Instant now = clock.now();
    try {
      ClusterCpuSnapshot snap = cpu_source_->poll(now);
      std::lock_guard lock(mutex_);
      for (const auto& [node, sample] : snap.per_node) estimator_.offer_cpu(sample);
    } catch (const Error& e) {
      spdlog::warn("metrics poll failed: {}", e.what());
    }
    std::unique_lock lock(wait_mutex_);
    wait_cv_.wait_until(lock, std::chrono::system_clock::time_point(now + cfg_.cadence),
                        [this] { return stop_.load(); });
  }
}

void EstimatorService::tick_loop() {
  WallClock clock;
  while (!stop_.load()) {
    Instant now = clock.now();
    {
      std::lock_guard lock(mutex_);
      estimator_.tick(now);
      snapshot_->publish(estimator_.render());
    }
    std::unique_lock lock(wait_mutex_);
    wait_cv_.wait_until(lock, std::chrono::system_clock::time_point(now + cfg_.cadence),
                        [this] { return stop_.load(); });
  }
}

void EstimatorService::stop() {
  bool was_running = !stop_.exchange(true);
  wait_cv_.notify_all();
  if (was_running) {
    for (auto& t : threads_) {
      if (t.joinable()) t.join();
    }
    threads_.clear();
    server_.stop();
  }
}

void EstimatorService::wait() {
  std::unique_lock lock(wait_mutex_);
  wait_cv_.wait(lock, [this] { return stop_.load(); });
}

int EstimatorService::port() const { return server_.port(); }

}  // namespace kubewatt
