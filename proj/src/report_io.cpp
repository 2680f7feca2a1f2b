#include "lipbound/report_io.hpp"

#include <chrono>
#include <ctime>

#include "lipbound/errors.hpp"

namespace lipbound {

using nlohmann::json;

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json to_json(const RunManifest& m) {
  json grids = json::object();
  for (const auto& [name, values] : m.grids) grids[name] = values;
  return {{"command", m.command},
          {"network", m.network_path},
          {"methods", m.methods},
          {"grids", grids},
          {"seeds", m.seeds},
          {"output", m.output_path},
          {"certified", m.certified},
          {"started_at", m.started_at},
          {"finished_at", m.finished_at},
          {"tool_version", m.tool_version},
          {"argv", m.argv}};
}

json to_json(const StrategyConfig& c) {
  return {{"method", std::string(to_string(c.method))},
          {"c", c.c},
          {"d_tilde", c.d_tilde},
          {"epsilon_q", c.epsilon_q ? json(*c.epsilon_q) : json(nullptr)},
          {"theta", c.theta},
          {"certified", c.certified}};
}

json to_json(const BoundReport& r) {
  json per_layer = json::array();
  for (const auto& d : r.per_layer) {
    per_layer.push_back({{"layer", d.layer}, {"statistic", d.statistic}, {"min_diag_m", d.min_diag_m}});
  }
  json lambdas = json::array();
  for (const auto& l : r.multipliers.lambdas) {
    lambdas.push_back(std::vector<double>(l.values().begin(), l.values().end()));
  }
  json j = {{"method", std::string(to_string(r.method))},
            {"c", method_uses_c(r.method) ? json(r.config.c) : json(nullptr)},
            {"config", to_json(r.config)},
            {"bound", r.bound},
            {"final_residual", r.final_residual},
            {"wall_time_seconds", r.wall_time.count()},
            {"per_layer", per_layer},
            {"multipliers", {{"gamma", r.multipliers.gamma}, {"lambdas", lambdas}}}};
  if (!r.sweep.empty()) {
    json sweep = json::array();
    for (const auto& p : r.sweep) {
      sweep.push_back({{"c", p.c},
                       {"bound", p.bound ? json(*p.bound) : json(nullptr)},
                       {"status", p.status}});
    }
    j["sweep"] = sweep;
  }
  if (!r.candidates.empty()) {
    json cands = json::array();
    for (const auto& cand : r.candidates) {
      cands.push_back({{"method", std::string(to_string(cand.method))},
                       {"c", method_uses_c(cand.method) ? json(cand.config.c) : json(nullptr)},
                       {"theta", cand.method == Method::interp ? json(cand.config.theta)
                                                               : json(nullptr)},
                       {"bound", cand.bound},
                       {"wall_time_seconds", cand.wall_time.count()}});
    }
    j["candidates"] = cands;
  }
  return j;
}

json to_json(const LmiCertificate& c) {
  return {{"dimension", c.dimension},
          {"shift_used", c.shift_used},
          {"psd", c.psd},
          {"min_pivot_estimate", c.min_pivot_estimate}};
}

json to_json(const ValidationReport& r) {
  json j = {{"bound", r.bound},
            {"empirical_lower", r.empirical_lower},
            {"samples", r.samples},
            {"margin", r.margin},
            {"lmi", r.lmi ? to_json(*r.lmi) : json(nullptr)},
            {"passed", r.passed()},
            {"failures", r.failures}};
  if (!r.lmi_skipped_reason.empty()) j["lmi_skipped"] = r.lmi_skipped_reason;
  return j;
}

namespace {

double number_at(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || !j[key].is_number()) {
    throw ParseError(where + ": missing numeric field '" + key + "'");
  }
  return j[key].get<double>();
}

}  // namespace

BoundReport bound_report_from_json(const json& j) {
  if (!j.is_object()) throw ParseError("report: top level must be an object");
  BoundReport r;
  try {
    if (!j.contains("method") || !j["method"].is_string()) {
      throw ParseError("report: missing string field 'method'");
    }
    r.method = method_from_string(j["method"].get<std::string>());
    r.config.method = r.method;
    if (j.contains("config") && j["config"].is_object()) {
      const auto& c = j["config"];
      if (c.contains("c") && c["c"].is_number()) r.config.c = c["c"].get<double>();
      if (c.contains("d_tilde") && c["d_tilde"].is_number()) r.config.d_tilde = c["d_tilde"].get<double>();
      if (c.contains("epsilon_q") && c["epsilon_q"].is_number()) {
        r.config.epsilon_q = c["epsilon_q"].get<double>();
      }
      if (c.contains("theta") && c["theta"].is_number()) r.config.theta = c["theta"].get<double>();
      if (c.contains("certified") && c["certified"].is_boolean()) {
        r.config.certified = c["certified"].get<bool>();
      }
    }
    r.bound = number_at(j, "bound", "report");
    if (!j.contains("multipliers") || !j["multipliers"].is_object()) {
      throw ParseError("report: missing object 'multipliers'");
    }
    const auto& m = j["multipliers"];
    r.multipliers.gamma = number_at(m, "gamma", "report multipliers");
    if (!m.contains("lambdas") || !m["lambdas"].is_array()) {
      throw ParseError("report multipliers: 'lambdas' must be an array");
    }
    for (const auto& l : m["lambdas"]) {
      if (!l.is_array()) throw ParseError("report multipliers: each lambda must be an array");
      Vector v;
      for (const auto& x : l) {
        if (!x.is_number()) throw ParseError("report multipliers: non-numeric lambda entry");
        v.push_back(x.get<double>());
      }
      r.multipliers.lambdas.emplace_back(std::move(v));
    }
    if (j.contains("wall_time_seconds") && j["wall_time_seconds"].is_number()) {
      r.wall_time = std::chrono::duration<double>(j["wall_time_seconds"].get<double>());
    }
    if (j.contains("final_residual") && j["final_residual"].is_number()) {
      r.final_residual = j["final_residual"].get<double>();
    }
  } catch (const InvalidArgument& e) {
    throw ParseError(std::string("report: ") + e.what());
  }
  return r;
}

}  // namespace lipbound
