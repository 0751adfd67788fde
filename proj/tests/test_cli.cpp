#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "rcm/config.hpp"

using namespace rcm;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string bin_path() {
  const char* p = std::getenv("RCMOB_BIN");
  REQUIRE_MESSAGE(p != nullptr, "RCMOB_BIN must point at the CLI binary");
  return p;
}

int run(const std::string& args, std::string* out = nullptr) {
  const fs::path tmp = fs::temp_directory_path() / "rcmob_cli_out.txt";
  const std::string cmd = bin_path() + " " + args + " >" + tmp.string() + " 2>&1";
  const int rc = std::system(cmd.c_str());
  if (out) {
    std::ifstream in(tmp);
    std::ostringstream ss;
    ss << in.rdbuf();
    *out = ss.str();
  }
  return WEXITSTATUS(rc);
}

fs::path write_temp_config(const std::string& name, const json& j) {
  const fs::path p = fs::temp_directory_path() / name;
  std::ofstream out(p);
  out << j.dump(2);
  return p;
}

json tiny_constant_config() {
  return json{
      {"dim", 1},
      {"environment", {{"kind", "constant"}, {"c0", 1.25}}},
      {"ns", {3}},
      {"omegas", {1.0}},
      {"seeds", {1}},
  };
}

std::string strip_timestamp(std::string text) {
  // drop the generated_at value wherever it appears
  const std::string key = "generated_at";
  std::istringstream in(text);
  std::ostringstream out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find(key) == std::string::npos) out << line << "\n";
  }
  return out.str();
}

}  // namespace

TEST_CASE("config parsing and validation") {
  SUBCASE("defaults are parseable and round trip") {
    const RunConfig def = RunConfig::defaults();
    const RunConfig re = RunConfig::parse(def.canonical_json());
    CHECK(re.canonical_json() == def.canonical_json());
    CHECK(re.hash() == def.hash());
  }
  SUBCASE("bad json names the document") {
    CHECK_THROWS_AS(RunConfig::parse("{nope"), ConfigError);
    try {
      RunConfig::parse("{nope");
    } catch (const ConfigError& e) {
      CHECK(e.field == "document");
    }
  }
  SUBCASE("rose condition violation names ns") {
    json j = tiny_constant_config();
    j["ns"] = {2};
    try {
      RunConfig::parse(j.dump());
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(e.field == "ns");
    }
  }
  SUBCASE("negative frequency names omegas") {
    json j = tiny_constant_config();
    j["omegas"] = {-1.0};
    try {
      RunConfig::parse(j.dump());
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(e.field == "omegas");
    }
  }
  SUBCASE("environment errors carry the environment field") {
    json j = tiny_constant_config();
    j["environment"] = {{"kind", "constant"}, {"c0", -1.0}};
    try {
      RunConfig::parse(j.dump());
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(e.field == "environment");
    }
  }
  SUBCASE("different configs hash differently") {
    RunConfig a = RunConfig::defaults();
    RunConfig b = RunConfig::defaults();
    b.omegas = {2.0};
    CHECK(a.hash() != b.hash());
  }
}

TEST_CASE("cli end to end") {
  const fs::path outdir = fs::temp_directory_path() / "rcmob_cli_e2e";
  fs::remove_all(outdir);

  SUBCASE("defaults subcommand prints a parseable config") {
    std::string out;
    CHECK(run("defaults", &out) == 0);
    CHECK_NOTHROW(RunConfig::parse(out));
  }
  SUBCASE("mobility writes the expected matrix") {
    const fs::path cfg = write_temp_config("cli_mob.json", tiny_constant_config());
    CHECK(run("mobility --config " + cfg.string() + " --out " + (outdir / "a").string() +
              " --format json") == 0);
    std::ifstream in(outdir / "a" / "mobility_n3_w1_s1.json");
    REQUIRE(in.good());
    json j;
    in >> j;
    CHECK(j["n"] == 3);
    CHECK(j["omega"] == 1.0);
    CHECK(std::abs(j["sigma"][0][0]["re"].get<double>() - 2.5) <= 1e-12);
    CHECK(std::abs(j["sigma"][0][0]["im"].get<double>()) <= 1e-12);
    CHECK(j["config_hash"].is_string());
  }
  SUBCASE("reruns are identical modulo the timestamp") {
    const fs::path cfg = write_temp_config("cli_mob.json", tiny_constant_config());
    REQUIRE(run("mobility --config " + cfg.string() + " --out " +
                (outdir / "r1").string() + " --format json") == 0);
    REQUIRE(run("mobility --config " + cfg.string() + " --out " +
                (outdir / "r2").string() + " --format json") == 0);
    std::ifstream a(outdir / "r1" / "mobility_n3_w1_s1.json");
    std::ifstream b(outdir / "r2" / "mobility_n3_w1_s1.json");
    std::ostringstream sa, sb;
    sa << a.rdbuf();
    sb << b.rdbuf();
    CHECK(strip_timestamp(sa.str()) == strip_timestamp(sb.str()));
  }
  SUBCASE("oracle agrees with mobility") {
    json j = tiny_constant_config();
    j["environment"] = {{"kind", "iid"},
                        {"distribution", {{"type", "uniform"}, {"a", 1.0}, {"b", 2.0}}}};
    j["ns"] = {8};
    const fs::path cfg = write_temp_config("cli_oracle.json", j);
    REQUIRE(run("mobility --config " + cfg.string() + " --out " +
                (outdir / "m").string() + " --format json") == 0);
    REQUIRE(run("oracle --config " + cfg.string() + " --out " +
                (outdir / "o").string() + " --format json") == 0);
    std::ifstream ma(outdir / "m" / "mobility_n8_w1_s1.json");
    std::ifstream ob(outdir / "o" / "oracle_n8_w1_s1.json");
    REQUIRE(ma.good());
    REQUIRE(ob.good());
    json jm, jo;
    ma >> jm;
    ob >> jo;
    CHECK(std::abs(jm["sigma"][0][0]["re"].get<double>() -
                   jo["sigma"][0][0]["re"].get<double>()) <= 1e-8);
    CHECK(std::abs(jm["sigma"][0][0]["im"].get<double>() -
                   jo["sigma"][0][0]["im"].get<double>()) <= 1e-8);
  }
  SUBCASE("sweep writes records and a summary") {
    json j = tiny_constant_config();
    j["ns"] = {4, 8};
    j["seeds"] = {1, 2};
    const fs::path cfg = write_temp_config("cli_sweep.json", j);
    REQUIRE(run("sweep --config " + cfg.string() + " --out " + (outdir / "s").string() +
                " --jobs 2") == 0);
    CHECK(fs::exists(outdir / "s" / "sweep.csv"));
    std::ifstream in(outdir / "s" / "sweep_summary.json");
    REQUIRE(in.good());
    json rep;
    in >> rep;
    CHECK(rep["all_monotone"] == true);
  }
  SUBCASE("validate emits the identity report") {
    json j = tiny_constant_config();
    j["floquet"] = {{"lambda", 1e-2}, {"steps_per_period", 512}, {"phases", 4}};
    const fs::path cfg = write_temp_config("cli_validate.json", j);
    REQUIRE(run("validate --config " + cfg.string() + " --out " +
                (outdir / "v").string()) == 0);
    std::ifstream in(outdir / "v" / "validate_n3_w1_s1.json");
    REQUIRE(in.good());
    json rep;
    in >> rep;
    CHECK(rep["identities"]["gradient_deviation"].get<double>() <= 1e-10);
    CHECK(rep["identities"]["conjugation_deviation"].get<double>() <= 1e-10);
    CHECK(rep["deviation"].get<double>() <= 1e-3);
  }
  SUBCASE("malformed config exits with code 2 and names the field") {
    json j = tiny_constant_config();
    j["omegas"] = {-2.0};
    const fs::path cfg = write_temp_config("cli_bad.json", j);
    std::string out;
    CHECK(run("mobility --config " + cfg.string() + " --out " + (outdir / "x").string(),
              &out) == 2);
    CHECK(out.find("omegas") != std::string::npos);
  }
  SUBCASE("numeric failure exits with code 3") {
    json j = tiny_constant_config();
    j["environment"] = {{"kind", "iid"},
                        {"distribution", {{"type", "uniform"}, {"a", 1.0}, {"b", 2.0}}}};
    j["ns"] = {8};
    j["solver"] = {{"tol", 1e-15}, {"max_iter", 1}};
    const fs::path cfg = write_temp_config("cli_starved.json", j);
    std::string out;
    CHECK(run("mobility --config " + cfg.string() + " --out " + (outdir / "y").string(),
              &out) == 3);
  }
}
