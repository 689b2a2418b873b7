#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "kubewatt/core_model.hpp"
#include "kubewatt/k8s_metrics.hpp"
#include "kubewatt/power_sources.hpp"
#include "kubewatt/time.hpp"

namespace kubewatt {

struct BaseInitConfig {
  Duration duration = Duration{5 * 60'000};
  Duration cadence = Duration{15'000};
};

struct BootstrapConfig {
  Duration window = Duration{30 * 60'000};
  Duration cadence = Duration{15'000};
  // Sufficiency buckets span [bucket_lo, bucket_hi) of node CPU capacity.
  double bucket_width = 0.10;
  double bucket_lo = 0.20;
  double bucket_hi = 0.80;
  // Every bucket must hold at least this fraction of the largest
  // bucket's count.
  double min_fill_factor = 0.5;
  // Regression uses only samples below this CPU fraction.
  double regression_cutoff = 0.50;
  int max_rounds = 16;
};

// One matched (CPU, power) observation used for bootstrap calibration.
struct CalibrationSamplePair {
  double node_cpu_frac = 0.0;     // node CPU / node capacity, in [0, 1]
  double watts = 0.0;
  double control_plane_cores = 0.0;
  Instant timestamp{};
};

struct RegressionFit {
  double intercept = 0.0;  // W
  double slope = 0.0;      // W per CPU fraction
  double r_squared = 0.0;
  std::size_t n_points = 0;
};

struct BucketVerdict {
  bool pass = false;
  std::vector<std::size_t> counts;
  std::string summary() const;
};

// Bins node_cpu_frac into [bucket_lo, bucket_hi) buckets and checks the
// distribution is usable: no empty bucket, and no bucket below
// min_fill_factor of the largest. Returns a verdict, never throws.
BucketVerdict check_bucket_sufficiency(std::span<const CalibrationSamplePair> samples,
                                       const BootstrapConfig& cfg);

struct StaticFitResult {
  RegressionFit fit;
  double static_watts = 0.0;
  double control_plane_watts = 0.0;  // slope * mean control-plane CPU fraction
};

// OLS over (node_cpu_frac, watts) below the regression cutoff, evaluated
// at the mean control-plane CPU fraction. Throws DegenerateData with
// fewer than two distinct CPU levels below the cutoff, NegativeIntercept
// when the fitted intercept is not positive (broken power source).
StaticFitResult fit_static_power(std::span<const CalibrationSamplePair> samples,
                                 const BootstrapConfig& cfg, double capacity_cores);

// Averages idle power over a fixed window. The cluster must be empty:
// every running pod has to match the control-plane patterns, checked
// before sampling starts. Collector failures leave gaps; if fewer than
// half the expected samples arrive the run fails with
// InsufficientSamples instead of averaging thin data.
StaticPowerProfile run_base_init(const BaseInitConfig& cfg, Clock& clock,
                                 std::span<PowerSource* const> power_sources,
                                 CpuSource& cpu_source, const ControlPlaneMatcher& matcher);

// Bootstrap calibration for clusters that cannot be emptied: repeats
// window-length collection rounds, accumulating samples, until the
// bucket distribution is sufficient on every node or max_rounds is
// reached, then fits static power per node.
StaticPowerProfile run_bootstrap_init(const BootstrapConfig& cfg, Clock& clock,
                                      std::span<PowerSource* const> power_sources,
                                      CpuSource& cpu_source, const ControlPlaneMatcher& matcher,
                                      const std::map<NodeRef, double>& capacity_cores);

}  // namespace kubewatt
