#include <atomic>
#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "kubewatt/config.hpp"
#include "kubewatt/estimator.hpp"
#include "kubewatt/exposition.hpp"
#include "kubewatt/profile_io.hpp"
#include "kubewatt/simulator.hpp"

namespace {

std::atomic<bool> g_stop{false};

void handle_signal(int) { g_stop.store(true); }

int exit_code_for(kubewatt::ErrorKind kind) {
  using kubewatt::ErrorKind;
  switch (kind) {
    case ErrorKind::ParseError:
    case ErrorKind::ValidationError:
      return 2;
    case ErrorKind::ClusterNotEmpty:
    case ErrorKind::InsufficientSamples:
    case ErrorKind::DegenerateData:
    case ErrorKind::NegativeIntercept:
    case ErrorKind::MaxRoundsExceeded:
      return 3;
    default:
      return 1;
  }
}

void set_log_level(const std::string& level) {
  auto parsed = spdlog::level::from_str(level);
  if (parsed == spdlog::level::off && level != "off") {
    throw kubewatt::Error(kubewatt::ErrorKind::ValidationError, "unknown log level '" + level + "'");
  }
  spdlog::set_level(parsed);
}

int run_init(const kubewatt::RunConfig& cfg) {
  using namespace kubewatt;
  ControlPlaneMatcher matcher = cfg.matcher();
  StaticPowerProfile profile;

  if (cfg.source == SourceMode::Simulated) {
    ClusterScenario scenario = load_scenario(cfg.scenario, cfg.seed);
    profile = cfg.mode == RunMode::InitBase
                  ? run_base_init_on_scenario(scenario, cfg.base_init, matcher, cfg.speedup)
                  : run_bootstrap_init_on_scenario(scenario, cfg.bootstrap, matcher, cfg.speedup);
  } else {
    std::vector<std::unique_ptr<RedfishPowerCollector>> collectors;
    std::vector<PowerSource*> sources;
    for (const auto& ep : cfg.power_endpoints) {
      collectors.push_back(std::make_unique<RedfishPowerCollector>(ep));
      sources.push_back(collectors.back().get());
    }
    K8sMetricsClient metrics(cfg.metrics);
    WallClock clock;
    profile = cfg.mode == RunMode::InitBase
                  ? run_base_init(cfg.base_init, clock, sources, metrics, matcher)
                  : run_bootstrap_init(cfg.bootstrap, clock, sources, metrics, matcher,
                                       cfg.node_capacities);
  }

  std::cout << profile_to_string(profile);
  if (!cfg.profile_path.empty()) {
    save_profile(profile, cfg.profile_path);
    spdlog::info("profile written to {}", cfg.profile_path);
  }
  return 0;
}

int run_replay(const kubewatt::RunConfig& cfg) {
  using namespace kubewatt;
  ClusterScenario scenario = load_scenario(cfg.scenario, cfg.seed);
  ReplayOptions opts;
  opts.speedup = cfg.speedup;
  opts.cadence = cfg.cadence;
  opts.skew_bound = cfg.skew_bound;
  opts.metric_prefix = cfg.metric_prefix;
  opts.matcher = cfg.matcher();
  if (!cfg.profile_path.empty()) opts.profile = load_profile(cfg.profile_path);
  opts.abort = &g_stop;

  ReplayEngine engine(std::move(scenario), opts);
  std::string csv = TraceWriter::header();
  std::size_t ticks = 0;
  engine.run([&](const ReplayTick& tick) {
    TraceWriter::append_tick(csv, tick);
    ++ticks;
  });

  std::ofstream out(cfg.trace_path, std::ios::trunc);
  if (!out.good()) {
    throw Error(ErrorKind::ValidationError, "cannot write trace to '" + cfg.trace_path + "'");
  }
  out << csv;
  std::cout << "replayed '" << cfg.scenario << "': " << ticks << " ticks, trace written to "
            << cfg.trace_path << "\n";
  return 0;
}

int run_estimator(const kubewatt::RunConfig& cfg) {
  using namespace kubewatt;
  StaticPowerProfile profile = load_profile(cfg.profile_path);
  EstimatorConfig ecfg;
  ecfg.profile = profile;
  ecfg.cadence = cfg.cadence;
  ecfg.skew_bound = cfg.skew_bound;
  ecfg.listen_address = cfg.listen_address;
  ecfg.metric_prefix = cfg.metric_prefix;

  if (cfg.source == SourceMode::Live) {
    std::vector<std::unique_ptr<PowerSource>> sources;
    for (const auto& ep : cfg.power_endpoints) {
      sources.push_back(std::make_unique<RedfishPowerCollector>(ep));
    }
    auto metrics = std::make_unique<K8sMetricsClient>(cfg.metrics);
    EstimatorService service(ecfg, cfg.matcher(), std::move(sources), std::move(metrics));
    service.start();
    while (!g_stop.load()) {
      std::this_thread::sleep_for(std::chrono::milliseconds(200));
    }
    spdlog::info("shutting down");
    service.stop();
    return 0;
  }

  // Simulated source: replay the scenario at the configured speedup and
  // serve each tick's exposition while it runs.
  ClusterScenario scenario = load_scenario(cfg.scenario, cfg.seed);
  ReplayOptions opts;
  opts.speedup = cfg.speedup;
  opts.cadence = cfg.cadence;
  opts.skew_bound = cfg.skew_bound;
  opts.metric_prefix = cfg.metric_prefix;
  opts.matcher = cfg.matcher();
  opts.profile = profile;
  opts.abort = &g_stop;

  auto snapshot = std::make_shared<RenderedSnapshot>();
  MetricsHttpServer server(snapshot);
  server.start(cfg.listen_address);
  spdlog::info("serving metrics on {} (port {})", cfg.listen_address, server.port());

  ReplayEngine engine(std::move(scenario), opts);
  engine.run([&](const ReplayTick& tick) {
    ExpositionInput input;
    input.prefix = cfg.metric_prefix;
    input.records = tick.records;
    input.stale_samples = *tick.stale_counters;
    snapshot->publish(render_exposition(input));
  });
  server.stop();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kubewatt: per-container power attribution for Kubernetes clusters"};
  app.get_formatter()->column_width(34);

  kubewatt::CliOverrides cli;
  std::optional<std::string> config_path;
  std::optional<double> speedup, cadence_s;
  std::optional<std::uint64_t> seed;

  app.add_option("--mode", cli.mode, "Operation mode: INIT_BASE, INIT_BOOTSTRAP, ESTIMATOR, REPLAY");
  app.add_option("--config", config_path, "Path to the JSON configuration file");
  app.add_option("--scenario", cli.scenario, "Builtin scenario name or scenario file path (simulated source)");
  app.add_option("--speedup", speedup, "Wall-clock pacing divisor for simulated runs (>= 1)");
  app.add_option("--profile", cli.profile, "Static power profile path (written by init modes, read by ESTIMATOR)");
  app.add_option("--listen", cli.listen, "host:port for the /metrics endpoint");
  app.add_option("--log-level", cli.log_level, "trace, debug, info, warn, error or off");
  app.add_option("--seed", seed, "Override the scenario seed");
  app.add_option("--trace", cli.trace, "CSV trace output path for REPLAY");
  app.add_option("--cadence", cadence_s, "Estimation cadence in seconds");

  CLI11_PARSE(app, argc, argv);
  cli.speedup = speedup;
  cli.cadence_s = cadence_s;
  cli.seed = seed;

  std::map<std::string, std::string> env;
  for (const char* key :
       {kubewatt::kEnvRedfishUsername, kubewatt::kEnvRedfishPassword, kubewatt::kEnvBearerToken}) {
    if (const char* value = std::getenv(key)) env[key] = value;
  }

  std::signal(SIGINT, handle_signal);
  std::signal(SIGTERM, handle_signal);

  try {
    kubewatt::RunConfig cfg = kubewatt::load_config(config_path, env, cli);
    set_log_level(cfg.log_level);
    switch (cfg.mode) {
      case kubewatt::RunMode::InitBase:
      case kubewatt::RunMode::InitBootstrap:
        return run_init(cfg);
      case kubewatt::RunMode::Estimator:
        return run_estimator(cfg);
      case kubewatt::RunMode::Replay:
        return run_replay(cfg);
    }
    return 0;
  } catch (const kubewatt::Error& e) {
    spdlog::error("{}", e.what());
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    spdlog::error("unexpected failure: {}", e.what());
    return 1;
  }
}
