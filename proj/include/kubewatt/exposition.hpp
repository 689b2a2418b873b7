#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "kubewatt/core_model.hpp"

namespace kubewatt {

struct ExpositionInput {
  std::string prefix = "kubewatt";
  std::vector<AttributionRecord> records;  // at most one per node
  std::map<NodeRef, std::uint64_t> stale_samples;
};

// Renders the text exposition document (version 0.0.4 framing). Output
// is deterministic: fixed family order, records sorted by node, label
// sets sorted, shortest round-trip float formatting. Vanished containers
// simply stop appearing; series are never zero-filled.
std::string render_exposition(const ExpositionInput& input);

inline constexpr const char* kExpositionContentType = "text/plain; version=0.0.4; charset=utf-8";

}  // namespace kubewatt
