#include "kubewatt/exposition.hpp"

#include <algorithm>
#include <sstream>

#include "kubewatt/profile_io.hpp"

namespace kubewatt {

namespace {

std::string escape_label(const std::string& value) {
  std::string out;
  out.reserve(value.size());
  for (char c : value) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '"': out += "\\\""; break;
      case '\n': out += "\\n"; break;
      default: out += c;
    }
  }
  return out;
}

void family_header(std::ostringstream& out, const std::string& name, const char* type,
                   const char* help) {
  out << "# HELP " << name << " " << help << "\n";
  out << "# TYPE " << name << " " << type << "\n";
}

void node_gauge(std::ostringstream& out, const std::string& name,
                const std::vector<AttributionRecord>& records,
                double AttributionRecord::*field) {
  for (const auto& rec : records) {
    out << name << "{node=\"" << escape_label(rec.node.name) << "\"} "
        << format_double(rec.*field) << "\n";
  }
}

}  // namespace

std::string render_exposition(const ExpositionInput& input) {
  std::vector<AttributionRecord> records = input.records;
  std::sort(records.begin(), records.end(),
            [](const AttributionRecord& a, const AttributionRecord& b) { return a.node < b.node; });

  const std::string& p = input.prefix;
  std::ostringstream out;

  family_header(out, p + "_container_watts", "gauge",
                "Dynamic node power attributed to the container, in watts.");
  for (const auto& rec : records) {
    for (const auto& [ref, watts] : rec.per_container) {
      out << p << "_container_watts{node=\"" << escape_label(ref.node.name) << "\",namespace=\""
          << escape_label(ref.ns) << "\",pod=\"" << escape_label(ref.pod) << "\",container=\""
          << escape_label(ref.container) << "\"} " << format_double(watts) << "\n";
    }
  }

  family_header(out, p + "_node_watts", "gauge", "Measured node platform power, in watts.");
  node_gauge(out, p + "_node_watts", records, &AttributionRecord::node_watts);

  family_header(out, p + "_node_static_watts", "gauge",
                "Calibrated static node power, reported as a single unattributed figure.");
  node_gauge(out, p + "_node_static_watts", records, &AttributionRecord::static_watts);

  family_header(out, p + "_node_dynamic_watts", "gauge",
                "Node power above static, attributed among workload containers.");
  node_gauge(out, p + "_node_dynamic_watts", records, &AttributionRecord::dynamic_watts);

  family_header(out, p + "_node_residual_watts", "gauge",
                "Shortfall when measured power is below static power; watch for calibration drift.");
  node_gauge(out, p + "_node_residual_watts", records, &AttributionRecord::residual_watts);

  family_header(out, p + "_unattributed_watts", "gauge",
                "Dynamic watts with no attributable container CPU behind them.");
  node_gauge(out, p + "_unattributed_watts", records, &AttributionRecord::unattributed_watts);

  family_header(out, p + "_stale_samples_total", "counter",
                "Estimation ticks skipped because power or CPU samples were stale.");
  for (const auto& [node, count] : input.stale_samples) {
    out << p << "_stale_samples_total{node=\"" << escape_label(node.name) << "\"} " << count
        << "\n";
  }

  return out.str();
}

}  // namespace kubewatt
