#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "solgas/expr.hpp"
#include "solgas/kernels.hpp"
#include "solgas/structures.hpp"

namespace solgas {

/// Kernel from a config object:
///   {"name": "...", "params": {"a": 2.0}, "G": "<expr(mu,eta)>",
///    "S": "<expr(eta)>", "domain": "<expr(mu,eta)>"}
/// Built-in names (no "G" key) bypass the expressions; a "domain"
/// expression marks (mu, eta) valid where it evaluates > 0.
inline Kernel kernel_from_json(const nlohmann::json& j) {
  std::map<std::string, double> params;
  if (j.contains("params"))
    for (auto& [k, v] : j.at("params").items()) params[k] = v.get<double>();
  std::string name = j.at("name").get<std::string>();
  if (!j.contains("G")) return make_kernel(name, params);
  Kernel k = make_expr_kernel(name, j.at("G").get<std::string>(),
                              j.value("S", std::string("eta")),
                              j.value("domain", std::string("")), params);
  if (j.contains("eta_box")) {
    auto& b = j.at("eta_box");
    k.eta_lo = b.at(0).get<double>();
    k.eta_hi = b.at(1).get<double>();
    if (b.size() > 2) k.eta_gap = b.at(2).get<double>();
  }
  return k;
}

/// Family from a config object:
///   {"name": "...", "kernel": "...", "kernel_params": {...},
///    "regime": "flat" | "constant_curvature",
///    "constants": {"c": 0.5, ...},
///    "s": "<expr(eta)>", "phi": "...", "chi": "...", "psi": "..."}
/// Expressions may reference the constants by name; they apply uniformly to
/// every component.
inline FamilyEntry family_from_json(const nlohmann::json& j) {
  FamilyEntry f;
  f.name = j.at("name").get<std::string>();
  f.kernel_name = j.at("kernel").get<std::string>();
  if (j.contains("kernel_params"))
    for (auto& [k, v] : j.at("kernel_params").items()) f.kernel_params[k] = v.get<double>();
  std::string regime = j.value("regime", std::string("flat"));
  if (regime == "flat")
    f.regime = Regime::kFlat;
  else if (regime == "constant_curvature")
    f.regime = Regime::kConstantCurvature;
  else
    throw ConfigError("family config: regime must be flat or constant_curvature");
  if (j.contains("constants"))
    for (auto& [k, v] : j.at("constants").items()) f.constants[k] = v.get<double>();

  std::string s_src = j.value("s", std::string("1"));
  std::string phi_src = j.value("phi", std::string("0"));
  std::string chi_src = j.value("chi", std::string("0"));
  std::string psi_src = j.value("psi", std::string("0"));
  f.make_ansatz = [s_src, phi_src, chi_src, psi_src, name = f.name](
                      const Kernel&, int n, const std::map<std::string, double>& cs) {
    auto fn = [&cs](const std::string& src) {
      return Expr::parse(src, {"eta"}, cs).as_fn1();
    };
    auto a = uniform_ansatz(n, fn(s_src), fn(phi_src), fn(chi_src), fn(psi_src));
    a.family = name;
    a.constants = cs;
    return a;
  };
  return f;
}

struct UserCatalogue {
  std::vector<Kernel> kernels;
  std::vector<FamilyEntry> families;
};

/// Loads every *.json below dir; objects with a "G" or no "kernel" key are
/// kernels, objects with "kernel" are families. Missing directory is an
/// empty catalogue.
inline UserCatalogue load_config_dir(const std::string& dir) {
  UserCatalogue cat;
  if (dir.empty() || !std::filesystem::exists(dir)) return cat;
  std::vector<std::filesystem::path> files;
  for (auto& e : std::filesystem::directory_iterator(dir))
    if (e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (auto& p : files) {
    std::ifstream in(p);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const std::exception& e) {
      throw ConfigError("config " + p.string() + ": " + e.what());
    }
    if (!j.contains("name")) continue;  // run configs etc. are not catalogue entries
    if (j.contains("kernel"))
      cat.families.push_back(family_from_json(j));
    else
      cat.kernels.push_back(kernel_from_json(j));
  }
  // user families may reference user kernels
  for (auto& f : cat.families)
    for (const auto& k : cat.kernels)
      if (k.name == f.kernel_name) f.kernel_override = k;
  return cat;
}

inline Kernel resolve_kernel(const std::string& name, const std::map<std::string, double>& params,
                             const UserCatalogue& user) {
  for (const auto& k : user.kernels)
    if (k.name == name) return k;
  return make_kernel(name, params);
}

inline FamilyEntry resolve_family(const std::string& name, const UserCatalogue& user) {
  for (const auto& f : user.families)
    if (f.name == name) return f;
  return find_family(name);
}

}  // namespace solgas
