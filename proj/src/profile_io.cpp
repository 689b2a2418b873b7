#include "kubewatt/profile_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace kubewatt {

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  (void)ec;
  return std::string(buf, ptr);
}

std::string profile_to_string(const StaticPowerProfile& profile) {
  std::ostringstream out;
  out << "kubewatt_profile v1\n";
  out << "provenance " << to_string(profile.provenance) << "\n";
  out << "calibrated_at " << format_iso8601(profile.calibrated_at) << "\n";
  for (const auto& [node, watts] : profile.static_watts) {
    out << "node " << node.name << " " << format_double(watts) << "\n";
  }
  return out.str();
}

StaticPowerProfile profile_from_string(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "kubewatt_profile v1") {
    throw Error(ErrorKind::ParseError, "not a kubewatt_profile v1 document");
  }
  StaticPowerProfile profile;
  bool saw_provenance = false, saw_calibrated = false;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string key;
    fields >> key;
    if (key == "provenance") {
      std::string value;
      fields >> value;
      profile.provenance = provenance_from_string(value);
      saw_provenance = true;
    } else if (key == "calibrated_at") {
      std::string value;
      fields >> value;
      profile.calibrated_at = parse_iso8601(value);
      saw_calibrated = true;
    } else if (key == "node") {
      std::string name, watts_text;
      fields >> name >> watts_text;
      if (name.empty() || watts_text.empty()) {
        throw Error(ErrorKind::ParseError, "profile line " + std::to_string(lineno) + ": bad node entry");
      }
      double watts = 0.0;
      auto [ptr, ec] = std::from_chars(watts_text.data(), watts_text.data() + watts_text.size(), watts);
      if (ec != std::errc{} || ptr != watts_text.data() + watts_text.size() || !(watts > 0.0)) {
        throw Error(ErrorKind::ParseError,
                    "profile line " + std::to_string(lineno) + ": static watts must be a positive number");
      }
      profile.static_watts[NodeRef{name}] = watts;
    } else {
      throw Error(ErrorKind::ParseError,
                  "profile line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
  }
  if (!saw_provenance || !saw_calibrated || profile.static_watts.empty()) {
    throw Error(ErrorKind::ParseError, "profile is missing provenance, calibrated_at or node entries");
  }
  return profile;
}

void save_profile(const StaticPowerProfile& profile, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out.good()) {
    throw Error(ErrorKind::ValidationError, "cannot write profile to '" + path + "'");
  }
  out << profile_to_string(profile);
}

StaticPowerProfile load_profile(const std::string& path) {
  std::ifstream in(path);
  if (!in.good()) {
    throw Error(ErrorKind::ValidationError,
                "cannot read profile '" + path + "'; run an init mode first to produce it");
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return profile_from_string(ss.str());
}

}  // namespace kubewatt
