#pragma once

// JSON encodings of bound and validation reports. The schema is documented
// in docs/formats.md.

#include <string>
#include <vector>

#include <json.hpp>

#include "lipbound/bounds.hpp"
#include "lipbound/certifier.hpp"

namespace lipbound {

inline constexpr const char* kToolVersion = "0.3.0";

/// Provenance embedded in every report.
struct RunManifest {
  std::string command;
  std::string network_path;
  std::vector<std::string> methods;
  /// method name -> grid values
  std::vector<std::pair<std::string, std::vector<double>>> grids;
  std::vector<std::uint64_t> seeds;
  std::string output_path;
  bool certified = false;
  std::string started_at;
  std::string finished_at;
  std::string tool_version = kToolVersion;
  std::vector<std::string> argv;
};

/// Current UTC time as ISO-8601 with a trailing Z.
std::string utc_timestamp();

nlohmann::json to_json(const RunManifest& m);
nlohmann::json to_json(const StrategyConfig& c);
nlohmann::json to_json(const BoundReport& r);
nlohmann::json to_json(const LmiCertificate& c);
nlohmann::json to_json(const ValidationReport& r);

/// Reads back what to_json(BoundReport) wrote (method, config, bound,
/// multipliers; diagnostics are optional). Throws ParseError.
BoundReport bound_report_from_json(const nlohmann::json& j);

}  // namespace lipbound
