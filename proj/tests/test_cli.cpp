#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "solgas/config.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args, const std::string& log = "/dev/null") {
  std::string cmd = std::string(SOLGAS_CLI_PATH) + " " + args + " > " + log + " 2>&1";
  int rc = std::system(cmd.c_str());
  return WEXITSTATUS(rc);
}

json load_json(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  json j;
  in >> j;
  return j;
}

}  // namespace

TEST_CASE("verify: pass, fail, and declared expectations drive the exit code") {
  CHECK(run_cli("verify --family kdv_flat --n 2 --samples 20 --seed 7 --out /tmp/cli_a.json") == 0);
  auto j = load_json("/tmp/cli_a.json");
  CHECK(j["schema"] == 1);
  CHECK(j["verdict"] == "PASS");
  CHECK(j["checks"].size() >= 2);

  // the negative family fails...
  CHECK(run_cli("verify --family lieb_liniger_cc --c 1 --n 2 --samples 20 --seed 7") == 1);
  // ...which is exit 0 once the expectation is declared
  CHECK(run_cli("verify --family lieb_liniger_cc --c 1 --n 2 --samples 20 --seed 7 "
                "--expect fail") == 0);
  // and an expected-fail that passes is itself a failure
  CHECK(run_cli("verify --family kdv_flat --n 2 --samples 20 --seed 7 --expect fail") == 1);
}

TEST_CASE("usage and config errors exit 2") {
  CHECK(run_cli("verify --no-such-flag") == 2);
  CHECK(run_cli("verify --family no_such_family") == 2);
  CHECK(run_cli("") == 2);
  CHECK(run_cli("conditions") == 2);
}

TEST_CASE("reports are byte-identical for identical config and seed") {
  REQUIRE(run_cli("verify --family kdv_cc --c 0.5 --ctilde 1 --n 2 --samples 20 --seed 11 "
                  "--out /tmp/cli_d1.json") == 0);
  REQUIRE(run_cli("verify --family kdv_cc --c 0.5 --ctilde 1 --n 2 --samples 20 --seed 11 "
                  "--out /tmp/cli_d2.json") == 0);
  auto a = load_json("/tmp/cli_d1.json");
  auto b = load_json("/tmp/cli_d2.json");
  a.erase("timestamp");
  b.erase("timestamp");
  CHECK(a.dump() == b.dump());

  // different seed, different sample points
  REQUIRE(run_cli("verify --family kdv_cc --c 0.5 --ctilde 1 --n 2 --samples 20 --seed 12 "
                  "--out /tmp/cli_d3.json") == 0);
  auto c = load_json("/tmp/cli_d3.json");
  c.erase("timestamp");
  CHECK(a.dump() != c.dump());
}

TEST_CASE("catalogue lists the built-in rows") {
  REQUIRE(run_cli("catalogue", "/tmp/cli_cat.txt") == 0);
  std::ifstream in("/tmp/cli_cat.txt");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  for (const char* name : {"kdv", "sinh_gordon", "hard_rod", "lieb_liniger", "dnls",
                           "additive_separable", "general", "kdv_flat", "kdv_cc", "kdv_ii"})
    CHECK(text.find(name) != std::string::npos);
  CHECK(text.find("user config") == std::string::npos);
}

TEST_CASE("user config directory adds kernels and families") {
  fs::path dir = "/tmp/solgas_cfg_test";
  fs::create_directories(dir);
  {
    std::ofstream k(dir / "kernel_ll2.json");
    k << R"JSON({"name": "ll2", "params": {"a": 2.0},
             "G": "2*a/(a^2 + (eta-mu)^2)", "S": "eta",
             "eta_box": [0.5, 3.0, 0.3]})JSON";
  }
  {
    std::ofstream f(dir / "family_ll2_flat.json");
    f << R"JSON({"name": "ll2_flat", "kernel": "ll2", "regime": "flat",
             "s": "1", "phi": "0", "chi": "0", "psi": "0"})JSON";
  }
  setenv("SOLGAS_CONFIG_DIR", dir.c_str(), 1);
  CHECK(run_cli("verify --family ll2_flat --n 2 --samples 20 --seed 7") == 0);
  REQUIRE(run_cli("catalogue", "/tmp/cli_cat2.txt") == 0);
  std::ifstream in("/tmp/cli_cat2.txt");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(text.find("ll2_flat") != std::string::npos);
  unsetenv("SOLGAS_CONFIG_DIR");

  // library-level check of the same path
  auto cat = solgas::load_config_dir(dir.string());
  CHECK(cat.kernels.size() == 1);
  CHECK(cat.families.size() == 1);
  CHECK(cat.families[0].kernel_override.has_value());
}

TEST_CASE("conditions: probe output for a separable and a non-separable kernel") {
  REQUIRE(run_cli("conditions --kernel hard_rod --out /tmp/cli_p1.json") == 0);
  auto j = load_json("/tmp/cli_p1.json");
  CHECK(j["probe"]["separable"] == true);
  CHECK(j["probe"]["single_argument"] == true);

  REQUIRE(run_cli("conditions --family kdv_cc --c 0.5 --n 3 --out /tmp/cli_p2.json") == 0);
  auto j2 = load_json("/tmp/cli_p2.json");
  CHECK(j2["residual_pair"].get<double>() <= 1e-9);
  CHECK(j2["probe"]["separable"] == false);
}

TEST_CASE("classify recovers the regime of inline ansatz data") {
  CHECK(run_cli("classify --kernel kdv --s eta --chi 0-2 --n 2 --samples 20 "
                "--out /tmp/cli_c1.json") == 0);
  auto j = load_json("/tmp/cli_c1.json");
  CHECK(j["classification"] == "flat");

  CHECK(run_cli("classify --kernel kdv --s \"eta - 0.25*eta^3\" --chi \"0.5*eta^2 - 2\" "
                "--psi 0-0.5 --n 2 --samples 20 --out /tmp/cli_c2.json") == 0);
  auto j2 = load_json("/tmp/cli_c2.json");
  CHECK(j2["classification"] == "constant_curvature");

  CHECK(run_cli("classify --kernel kdv --s eta --chi eta --n 2 --samples 20") == 1);
}

TEST_CASE("simulate writes CSV snapshots and a JSON report") {
  fs::remove_all("/tmp/cli_sim");
  CHECK(run_cli("simulate --kernel kdv --n 2 --grid 100 --tmax 0.05 --snapshots 4 "
                "--out-dir /tmp/cli_sim") == 0);
  auto j = load_json("/tmp/cli_sim/report.json");
  CHECK(j["schema"] == 1);
  CHECK(j["aborted"] == false);
  CHECK(j["max_total_u_drift"].get<double>() <= 1e-10);
  int found = 0;
  for (auto& e : fs::directory_iterator("/tmp/cli_sim"))
    if (e.path().extension() == ".csv") ++found;
  CHECK(found >= 2);
  // header shape
  std::ifstream csv("/tmp/cli_sim/snapshot_0000.csv");
  std::string header;
  std::getline(csv, header);
  CHECK(header == "x,u1,u2,eta1,eta2");
}
