#include "kubewatt/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

namespace kubewatt {

std::string BucketVerdict::summary() const {
  std::ostringstream out;
  out << (pass ? "pass" : "fail") << " [";
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (i) out << ' ';
    out << counts[i];
  }
  out << "]";
  return out.str();
}

static std::size_t bucket_count(const BootstrapConfig& cfg) {
  // The epsilon absorbs FP noise in (hi-lo)/width so 0.6/0.1 stays 6
  // buckets rather than spilling into a seventh.
  return static_cast<std::size_t>(std::ceil((cfg.bucket_hi - cfg.bucket_lo) / cfg.bucket_width - 1e-9));
}

BucketVerdict check_bucket_sufficiency(std::span<const CalibrationSamplePair> samples,
                                       const BootstrapConfig& cfg) {
  BucketVerdict verdict;
  std::size_t n = bucket_count(cfg);
  if (n == 0) return verdict;
  verdict.counts.assign(n, 0);
  for (const auto& s : samples) {
    if (s.node_cpu_frac < cfg.bucket_lo || s.node_cpu_frac >= cfg.bucket_hi) continue;
    auto idx = static_cast<std::size_t>((s.node_cpu_frac - cfg.bucket_lo) / cfg.bucket_width);
    if (idx >= n) idx = n - 1;
    ++verdict.counts[idx];
  }
  std::size_t max_count = *std::max_element(verdict.counts.begin(), verdict.counts.end());
  double required = cfg.min_fill_factor * static_cast<double>(max_count);
  verdict.pass = max_count > 0;
  for (std::size_t c : verdict.counts) {
    if (c == 0 || static_cast<double>(c) < required) verdict.pass = false;
  }
  return verdict;
}

namespace {

struct OlsLine {
  double intercept;
  double slope;
  double r_squared;
};

OlsLine ols(const std::vector<double>& xs, const std::vector<double>& ys) {
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double dx = xs[i] - mx;
    double dy = ys[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  OlsLine line;
  line.slope = sxy / sxx;
  line.intercept = my - line.slope * mx;
  if (syy <= 0.0) {
    line.r_squared = 1.0;  // constant response, fit is exact
  } else {
    double ss_res = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      double r = ys[i] - (line.intercept + line.slope * xs[i]);
      ss_res += r * r;
    }
    line.r_squared = std::clamp(1.0 - ss_res / syy, 0.0, 1.0);
  }
  return line;
}

}  // namespace

StaticFitResult fit_static_power(std::span<const CalibrationSamplePair> samples,
                                 const BootstrapConfig& cfg, double capacity_cores) {
  std::vector<double> xs, ys;
  std::set<double> distinct;
  for (const auto& s : samples) {
    if (s.node_cpu_frac >= cfg.regression_cutoff) continue;
    xs.push_back(s.node_cpu_frac);
    ys.push_back(s.watts);
    distinct.insert(s.node_cpu_frac);
  }
  if (distinct.size() < 2) {
    throw Error(ErrorKind::DegenerateData,
                "need at least 2 distinct CPU levels below cutoff " +
                    std::to_string(cfg.regression_cutoff) + ", have " +
                    std::to_string(distinct.size()));
  }
  OlsLine line = ols(xs, ys);
  if (!(line.intercept > 0.0) || !std::isfinite(line.slope)) {
    throw Error(ErrorKind::NegativeIntercept,
                "fitted intercept " + std::to_string(line.intercept) +
                    " W is not positive; power source looks broken");
  }

  double cp_mean_cores = 0.0;
  for (const auto& s : samples) cp_mean_cores += s.control_plane_cores;
  cp_mean_cores /= static_cast<double>(samples.size());
  double cp_frac = cp_mean_cores / capacity_cores;

  StaticFitResult out;
  out.fit = RegressionFit{line.intercept, line.slope, line.r_squared, xs.size()};
  out.control_plane_watts = line.slope * cp_frac;
  out.static_watts = line.intercept + out.control_plane_watts;
  return out;
}

namespace {

double control_plane_cores(const CpuSample& sample, const ControlPlaneMatcher& matcher) {
  double total = 0.0;
  for (const auto& [ref, cores] : sample.containers) {
    if (matcher.matches(ref.pod)) total += cores;
  }
  return total;
}

void ensure_cluster_empty(const ClusterCpuSnapshot& snap, const ControlPlaneMatcher& matcher) {
  std::vector<std::string> offenders;
  for (const auto& [node, sample] : snap.per_node) {
    for (const auto& [ref, cores] : sample.containers) {
      if (!matcher.matches(ref.pod)) offenders.push_back(ref.ns + "/" + ref.pod);
    }
  }
  if (!offenders.empty()) {
    std::sort(offenders.begin(), offenders.end());
    offenders.erase(std::unique(offenders.begin(), offenders.end()), offenders.end());
    std::string list;
    for (const auto& p : offenders) {
      if (!list.empty()) list += ", ";
      list += p;
    }
    throw Error(ErrorKind::ClusterNotEmpty,
                "non-control-plane pods running: " + list +
                    "; base init needs an empty cluster (use bootstrap init instead)");
  }
}

}  // namespace

StaticPowerProfile run_base_init(const BaseInitConfig& cfg, Clock& clock,
                                 std::span<PowerSource* const> power_sources,
                                 CpuSource& cpu_source, const ControlPlaneMatcher& matcher) {
  if (cfg.duration < 2 * cfg.cadence) {
    throw Error(ErrorKind::ValidationError, "base init duration must be at least twice the cadence");
  }
  Instant start = clock.now();
  ensure_cluster_empty(cpu_source.poll(start), matcher);

  auto expected = static_cast<std::size_t>(cfg.duration.count() / cfg.cadence.count());
  std::map<NodeRef, std::vector<double>> watts;
  for (std::size_t k = 0; k < expected; ++k) {
    Instant at = start + cfg.cadence * static_cast<std::int64_t>(k);
    clock.sleep_until(at);
    for (PowerSource* src : power_sources) {
      try {
        watts[src->node()].push_back(src->poll(clock.now()).watts);
      } catch (const Error& e) {
        spdlog::warn("power poll failed for {}: {}", src->node().name, e.what());
      }
    }
  }

  StaticPowerProfile profile;
  profile.provenance = ProfileProvenance::BaseInit;
  profile.calibrated_at = clock.now();
  for (PowerSource* src : power_sources) {
    const auto& samples = watts[src->node()];
    if (samples.size() * 2 < expected) {
      throw Error(ErrorKind::InsufficientSamples,
                  "node '" + src->node().name + "' collected " + std::to_string(samples.size()) +
                      " of " + std::to_string(expected) + " expected power samples");
    }
    double mean = 0.0;
    for (double w : samples) mean += w;
    mean /= static_cast<double>(samples.size());
    profile.static_watts[src->node()] = mean;
  }
  return profile;
}

StaticPowerProfile run_bootstrap_init(const BootstrapConfig& cfg, Clock& clock,
                                      std::span<PowerSource* const> power_sources,
                                      CpuSource& cpu_source, const ControlPlaneMatcher& matcher,
                                      const std::map<NodeRef, double>& capacity_cores) {
  if (!(cfg.bucket_lo < cfg.bucket_hi) || !(cfg.bucket_width > 0.0) ||
      cfg.bucket_width > cfg.bucket_hi - cfg.bucket_lo || !(cfg.min_fill_factor > 0.0) ||
      cfg.min_fill_factor > 1.0) {
    throw Error(ErrorKind::ValidationError, "bootstrap bucket configuration is inconsistent");
  }
  for (PowerSource* src : power_sources) {
    if (!capacity_cores.count(src->node())) {
      throw Error(ErrorKind::ValidationError,
                  "no CPU capacity configured for node '" + src->node().name + "'");
    }
  }

  std::map<NodeRef, std::vector<CalibrationSamplePair>> accumulated;
  auto ticks_per_round = static_cast<std::size_t>(cfg.window.count() / cfg.cadence.count());
  Instant round_start = clock.now();

  for (int round = 1; round <= cfg.max_rounds; ++round) {
    for (std::size_t k = 0; k < ticks_per_round; ++k) {
      Instant at = round_start + cfg.cadence * static_cast<std::int64_t>(k);
      clock.sleep_until(at);
      ClusterCpuSnapshot snap;
      try {
        snap = cpu_source.poll(clock.now());
      } catch (const Error& e) {
        spdlog::warn("metrics poll failed: {}", e.what());
        continue;
      }
      for (PowerSource* src : power_sources) {
        auto cpu_it = snap.per_node.find(src->node());
        if (cpu_it == snap.per_node.end()) continue;
        PowerSample power;
        try {
          power = src->poll(clock.now());
        } catch (const Error& e) {
          spdlog::warn("power poll failed for {}: {}", src->node().name, e.what());
          continue;  // gap; calibration uses real samples only
        }
        const CpuSample& cpu = cpu_it->second;
        CalibrationSamplePair pair;
        pair.node_cpu_frac =
            std::clamp(cpu.node_cores / capacity_cores.at(src->node()), 0.0, 1.0);
        pair.watts = power.watts;
        pair.control_plane_cores = control_plane_cores(cpu, matcher);
        pair.timestamp = power.timestamp;
        accumulated[src->node()].push_back(pair);
      }
    }
    round_start += cfg.window;

    bool all_pass = true;
    for (PowerSource* src : power_sources) {
      auto verdict = check_bucket_sufficiency(accumulated[src->node()], cfg);
      spdlog::info("bootstrap round {}: node {} buckets {}", round, src->node().name,
                   verdict.summary());
      all_pass = all_pass && verdict.pass;
    }
    if (all_pass) {
      StaticPowerProfile profile;
      profile.provenance = ProfileProvenance::BootstrapInit;
      profile.calibrated_at = clock.now();
      for (PowerSource* src : power_sources) {
        auto result = fit_static_power(accumulated[src->node()], cfg, capacity_cores.at(src->node()));
        spdlog::info("node {}: static {:.3f} W (intercept {:.3f}, control plane {:.3f} W, r2 {:.4f}, n {})",
                     src->node().name, result.static_watts, result.fit.intercept,
                     result.control_plane_watts, result.fit.r_squared, result.fit.n_points);
        profile.static_watts[src->node()] = result.static_watts;
      }
      return profile;
    }
  }

  std::string detail;
  for (PowerSource* src : power_sources) {
    auto verdict = check_bucket_sufficiency(accumulated[src->node()], cfg);
    if (!verdict.pass) {
      if (!detail.empty()) detail += "; ";
      detail += src->node().name + " " + verdict.summary();
    }
  }
  throw Error(ErrorKind::MaxRoundsExceeded,
              "bucket distribution still insufficient after " + std::to_string(cfg.max_rounds) +
                  " rounds: " + detail);
}

}  // namespace kubewatt
