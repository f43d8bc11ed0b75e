#pragma once

#include <string>

#include <json.hpp>

#include "solgas/geometry.hpp"
#include "solgas/simulator.hpp"
#include "solgas/structures.hpp"

namespace solgas {

using nlohmann::json;

inline json to_json(const ClassificationReport& r) {
  json j;
  j["condition"] = r.condition;
  j["verdict"] = r.pass ? "PASS" : "FAIL";
  j["worst_residual"] = r.worst_residual;
  j["worst_point"] = r.worst_point;
  if (r.fitted_c) j["fitted_c"] = *r.fitted_c;
  if (r.fitted_c_spread) j["fitted_c_spread"] = *r.fitted_c_spread;
  j["samples"] = r.samples;
  j["provenance"] = r.provenance;
  if (!r.details.empty()) j["details"] = r.details;
  return j;
}

inline json to_json(const FamilyVerification& v) {
  json j;
  j["schema"] = 1;
  j["family"] = v.family;
  j["kernel"] = v.kernel;
  j["n"] = v.n;
  j["seed"] = v.seed;
  j["condition_residual_pair"] = v.condition_residual_pair;
  j["condition_residual_diagonal"] = v.condition_residual_diagonal;
  j["verdict"] = v.pass ? "PASS" : "FAIL";
  if (v.curvature_sign) j["curvature_sign"] = *v.curvature_sign;
  j["checks"] = json::array();
  for (const auto& r : v.reports) j["checks"].push_back(to_json(r));
  return j;
}

inline json to_json(const SeparabilityReport& r) {
  json j;
  j["separable"] = r.separable;
  j["mixed_log_residual"] = r.mixed_log_residual;
  j["single_argument"] = r.single_argument;
  j["dG_dmu_max"] = r.dmu_max;
  j["dG_deta_max"] = r.deta_max;
  return j;
}

inline json to_json(const ConservationReport& r) {
  json j;
  j["schema"] = 1;
  j["times"] = r.times;
  j["totals_u"] = r.totals_u;
  if (!r.totals_h.empty()) j["totals_h"] = r.totals_h;
  j["admissibility_margin"] = r.admissibility_margin;
  j["max_total_u_drift"] = r.max_total_u_drift;
  j["max_total_h_drift"] = r.max_total_h_drift;
  j["shock_detected"] = r.shock_detected;
  if (r.shock_detected) j["shock_time"] = r.shock_time;
  j["aborted"] = r.aborted;
  if (r.aborted) {
    j["abort_reason"] = r.abort_reason;
    j["abort_cell"] = r.abort_cell;
    j["abort_time"] = r.abort_time;
  }
  return j;
}

}  // namespace solgas
