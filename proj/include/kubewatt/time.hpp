#pragma once

#include <chrono>
#include <cstdint>
#include <string>

namespace kubewatt {

// Millisecond-resolution UTC instants. All timestamps in the system,
// simulated or live, use this one representation.
using Duration = std::chrono::milliseconds;
using Instant = std::chrono::time_point<std::chrono::system_clock, Duration>;

inline Instant instant_from_unix_ms(std::int64_t ms) {
  return Instant{Duration{ms}};
}

inline std::int64_t unix_ms(Instant t) { return t.time_since_epoch().count(); }

// ISO 8601 UTC, e.g. "2025-01-01T00:05:00Z" or with millisecond
// precision "2025-01-01T00:05:00.250Z" when the instant is not on a
// whole second. Output is locale-independent and byte-stable.
std::string format_iso8601(Instant t);

// Parses the two shapes emitted by format_iso8601. Throws
// Error{ParseError} on anything else.
Instant parse_iso8601(const std::string& text);

class Clock {
 public:
  virtual ~Clock() = default;
  virtual Instant now() = 0;
  virtual void sleep_until(Instant t) = 0;
};

class WallClock final : public Clock {
 public:
  Instant now() override;
  void sleep_until(Instant t) override;
};

// Drives simulated components through virtual time. sleep_until advances
// the virtual clock immediately and owes (dt / speedup) of wall time,
// paid off in coalesced sleeps so high speedups are not dominated by
// scheduler wakeups. Timestamps handed to callers are purely virtual, so
// results never depend on the speedup chosen.
class VirtualClock final : public Clock {
 public:
  explicit VirtualClock(Instant start, double speedup);

  Instant now() override { return now_; }
  void sleep_until(Instant t) override;

 private:
  Instant now_;
  double speedup_;
  Duration owed_{0};
};

// Epoch all builtin scenarios start from; fixed so replay traces are
// byte-identical across runs and hosts.
inline constexpr std::int64_t kScenarioEpochUnixMs = 1735689600000;  // 2025-01-01T00:00:00Z

inline Instant scenario_epoch() { return instant_from_unix_ms(kScenarioEpochUnixMs); }

}  // namespace kubewatt
