#pragma once

#include <string>

#include "kubewatt/core_model.hpp"

namespace kubewatt {

// Static-power profile document, the handoff from the init modes to the
// estimator. Line-oriented, versioned:
//
//   kubewatt_profile v1
//   provenance BASE_INIT
//   calibrated_at 2025-01-01T00:05:00Z
//   node <name> <watts>
//
// Watts use shortest round-trip formatting, so load(save(p)) == p.
std::string profile_to_string(const StaticPowerProfile& profile);
StaticPowerProfile profile_from_string(const std::string& text);

void save_profile(const StaticPowerProfile& profile, const std::string& path);
StaticPowerProfile load_profile(const std::string& path);

// Shortest decimal representation that parses back to the same double.
std::string format_double(double value);

}  // namespace kubewatt
