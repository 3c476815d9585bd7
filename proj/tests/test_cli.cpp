#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>

#include <json.hpp>

#include "cli_helpers.hpp"
#include "testutil.hpp"

using nlohmann::json;
using testutil::run_command;
using Catch::Matchers::WithinAbs;

namespace {

std::string bin() {
  const auto b = testutil::cli_binary();
  REQUIRE_FALSE(b.empty());
  return b;
}

std::string config_dir() { return testutil::source_dir() + "/configs"; }
std::string schema_dir() { return testutil::source_dir() + "/schemas"; }

std::filesystem::path temp_dir() {
  auto dir = std::filesystem::temp_directory_path() / "cbm_cli_tests";
  std::filesystem::create_directories(dir);
  return dir;
}

void require_schema(const json& instance, const std::string& schema_file) {
  const auto schema =
      json::parse(testutil::read_file(schema_dir() + "/" + schema_file));
  std::string why;
  const bool ok = testutil::validate_schema(instance, schema, &why);
  CAPTURE(schema_file, why, instance.dump());
  REQUIRE(ok);
}

}  // namespace

TEST_CASE("weights command emits schema-valid JSON") {
  const auto res = run_command(bin() + " weights --config " + config_dir() +
                               "/additive_uniform.json");
  REQUIRE(res.exit_code == 0);
  const auto out = json::parse(res.output);
  require_schema(out, "weights_output.schema.json");
  // closed form for (g, l, M) = (0.2, 0.4, 4)
  CHECK_THAT(out["C1"].get<double>(), WithinAbs(0.2, 1e-12));
  CHECK_THAT(out["C2"].get<double>(), WithinAbs(0.2 * 0.2 * 0.4 / (2 * (3 * 0.16 + 3 * 0.04)), 1e-12));
  CHECK(out["tight"].get<bool>() == false);
}

TEST_CASE("weights command handles tight models with a report, not a failure") {
  const auto res = run_command(bin() + " weights --config " + config_dir() +
                               "/multiplicative_tight.json");
  REQUIRE(res.exit_code == 0);
  const auto out = json::parse(res.output);
  require_schema(out, "weights_output.schema.json");
  CHECK(out["tight"].get<bool>());
  CHECK(out["C1"].is_null());
}

TEST_CASE("weights command supports heterogeneous kernels") {
  const auto res = run_command(bin() + " weights --config " + config_dir() +
                               "/two_cluster_antagonistic.json");
  REQUIRE(res.exit_code == 0);
  const auto out = json::parse(res.output);
  require_schema(out, "weights_output.schema.json");
  CHECK(out["A"].is_array());
}

TEST_CASE("weights CSV header is stable") {
  const auto res = run_command(bin() + " weights --format csv --config " +
                               config_dir() + "/additive_uniform.json");
  REQUIRE(res.exit_code == 0);
  CHECK(res.output.rfind(
            "group,alpha,weight,normalised,C1,C2,a,sum_w,delta_inf,tight\n",
            0) == 0);
}

TEST_CASE("finite command: exact and Monte Carlo") {
  const auto dir = temp_dir();
  SECTION("exact JSON output validates") {
    const auto res =
        run_command(bin() + " finite --config " + config_dir() +
                    "/additive_uniform.json --sizes 3,4,5,6 --method exact");
    REQUIRE(res.exit_code == 0);
    const auto out = json::parse(res.output);
    require_schema(out, "finite_output.schema.json");
    CHECK(out["method"] == "exact");
  }
  SECTION("mc runs are byte-identical for a fixed seed") {
    const auto out1 = (dir / "mc1.json").string();
    const auto out2 = (dir / "mc2.json").string();
    const std::string cmd = bin() + " finite --config " + config_dir() +
                            "/additive_uniform.json --sizes 3,4,5,6 "
                            "--method mc --samples 20000 --seed 7 --out ";
    REQUIRE(run_command(cmd + out1).exit_code == 0);
    REQUIRE(run_command(cmd + out2).exit_code == 0);
    const auto t1 = testutil::read_file(out1);
    REQUIRE_FALSE(t1.empty());
    REQUIRE(t1 == testutil::read_file(out2));
    require_schema(json::parse(t1), "finite_output.schema.json");
  }
  SECTION("csv header is stable") {
    const auto res = run_command(
        bin() + " finite --config " + config_dir() +
        "/additive_uniform.json --sizes 3,4,5,6 --method exact --format csv");
    REQUIRE(res.exit_code == 0);
    CHECK(res.output.rfind("entry,i,j,value,stderr\n", 0) == 0);
  }
}

TEST_CASE("unanimity command") {
  const std::string cmd = bin() + " unanimity --config " + config_dir() +
                          "/multiplicative_tight.json --sizes 200,200,200 "
                          "--samples 20000 --seed 3";
  const auto res = run_command(cmd);
  REQUIRE(res.exit_code == 0);
  const auto out = json::parse(res.output);
  require_schema(out, "unanimity_output.schema.json");
  // exact value for this model at 200 voters per group is 0.3488; the limit
  // is 1 but the approach is O(1/sqrt(N))
  CHECK_THAT(out["probability"].get<double>(), WithinAbs(0.3488, 0.02));
  const auto rerun = run_command(cmd);
  CHECK(rerun.output == res.output);
}

TEST_CASE("nonneg command variants") {
  const std::string cfg = config_dir() + "/mu_rho_pair.json";
  SECTION("ram") {
    const auto res = run_command(bin() + " nonneg --check ram --config " + cfg);
    REQUIRE(res.exit_code == 0);
    const auto out = json::parse(res.output);
    require_schema(out, "nonneg_ram_output.schema.json");
    CHECK_THAT(out["a"].get<double>(), WithinAbs(0.25, 1e-13));
    CHECK(out["negative_for_small_groups"].get<bool>());  // l2 = 0.35 > 3g = 0.3
  }
  SECTION("fosd") {
    const auto res = run_command(bin() + " nonneg --check fosd --config " + cfg);
    REQUIRE(res.exit_code == 0);
    require_schema(json::parse(res.output), "nonneg_fosd_output.schema.json");
  }
  SECTION("ribbon") {
    const auto res = run_command(bin() + " nonneg --check ribbon --c 1 --C 2 " +
                                 "--a-value 0.2 --config " + cfg);
    REQUIRE(res.exit_code == 0);
    const auto out = json::parse(res.output);
    require_schema(out, "nonneg_ribbon_output.schema.json");
    CHECK(out["cond2"].get<bool>());
  }
  SECTION("tfunc") {
    const auto res = run_command(bin() + " nonneg --check tfunc --config " + cfg);
    REQUIRE(res.exit_code == 0);
    require_schema(json::parse(res.output), "nonneg_tfunc_output.schema.json");
  }
  SECTION("contraction") {
    const auto res =
        run_command(bin() + " nonneg --check contraction --config " + cfg);
    REQUIRE(res.exit_code == 0);
    const auto out = json::parse(res.output);
    require_schema(out, "nonneg_contraction_output.schema.json");
    CHECK(out["t"].get<double>() == 0.5);
    CHECK(out.contains("c0"));
  }
}

TEST_CASE("sweep reproduces the negative-weight boundary") {
  const auto dir = temp_dir();
  const auto out_path = (dir / "sweep.csv").string();
  const auto res = run_command(
      bin() + " sweep --config " + config_dir() +
      "/negative_weights.json --param rho.atoms[3][0] --mirror rho.atoms[0][0]"
      " --from 0.2 --to 0.4 --steps 21 --emit weights --out " + out_path);
  REQUIRE(res.exit_code == 0);
  const auto text = testutil::read_file(out_path);
  REQUIRE(text.rfind("param,value,a,tight,C1,C2,sum_w,delta_inf,w_1,w_2,w_3,w_4\n",
                     0) == 0);
  // C2 changes sign at l2 = 3g = 0.3; the smallest group goes negative there
  std::istringstream lines(text);
  std::string line;
  std::getline(lines, line);  // header
  bool saw_negative_weight = false;
  while (std::getline(lines, line)) {
    std::istringstream fields(line);
    std::string field;
    std::vector<std::string> cols;
    while (std::getline(fields, field, ',')) cols.push_back(field);
    REQUIRE(cols.size() == 12);
    const double value = std::stod(cols[1]);
    const double c2 = std::stod(cols[5]);
    const double w4 = std::stod(cols[11]);
    CAPTURE(value);
    if (value < 0.3 - 1e-9) REQUIRE(c2 > 0.0);
    if (value > 0.3 + 1e-9) REQUIRE(c2 < 0.0);
    if (std::abs(value - 0.3) <= 1e-9) REQUIRE(std::abs(c2) <= 1e-12);
    if (w4 < 0.0) saw_negative_weight = true;
  }
  CHECK(saw_negative_weight);
}

TEST_CASE("sweep emits correlation and deficit tables") {
  const std::string base = bin() + " sweep --config " + config_dir() +
                           "/additive_uniform.json --param mu.hi "
                           "--mirror mu.lo --from 0.1 --to 0.3 --steps 3 ";
  const auto a_res = run_command(base + "--emit a");
  REQUIRE(a_res.exit_code == 0);
  CHECK(a_res.output.rfind("param,value,a,tight\n", 0) == 0);
  const auto d_res = run_command(base + "--emit deficit");
  REQUIRE(d_res.exit_code == 0);
  CHECK(d_res.output.rfind("param,value,delta_inf,tight\n", 0) == 0);
  // a = g^2/(3 l^2) grows with the swept global width g
  std::istringstream lines(a_res.output);
  std::string line;
  std::getline(lines, line);
  double prev = -1.0;
  while (std::getline(lines, line)) {
    const auto c1 = line.find(','), c2 = line.find(',', c1 + 1);
    const double a = std::stod(line.substr(c2 + 1));
    REQUIRE(a > prev);
    prev = a;
  }
}

TEST_CASE("exit codes distinguish failure classes") {
  const auto dir = temp_dir();
  SECTION("unreadable config") {
    CHECK(run_command(bin() + " weights --config /nonexistent.json").exit_code ==
          1);
  }
  SECTION("invalid field") {
    const auto bad = (dir / "bad.json").string();
    testutil::write_file(bad, R"({"mu": {"type":"uniform","lo":0.3,"hi":0.1},
      "kernel": {"type":"constant","rho":{"type":"uniform","lo":-0.5,"hi":0.5}},
      "groups": 2, "alpha": [0.5, 0.5]})");
    CHECK(run_command(bin() + " weights --config " + bad).exit_code == 1);
  }
  SECTION("trivial local bias degenerates") {
    const auto triv = (dir / "trivial.json").string();
    testutil::write_file(triv, R"({"mu": {"type":"uniform","lo":-0.5,"hi":0.5},
      "kernel": {"type":"constant","rho":{"type":"discrete","atoms":[[0.0,1.0]]}},
      "groups": 2, "alpha": [0.5, 0.5]})");
    CHECK(run_command(bin() + " weights --config " + triv).exit_code == 2);
  }
  SECTION("insufficient randomness degenerates") {
    const auto una = (dir / "unanimous.json").string();
    testutil::write_file(una,
                         R"({"mu": {"type":"uniform","lo":-0.5,"hi":0.5},
      "kernel": {"type":"tabulated","z_grid":[-0.5,0.5],
                 "measures":[{"type":"point","loc":-1.0},{"type":"point","loc":1.0}]},
      "groups": 2, "alpha": [0.5, 0.5]})");
    CHECK(run_command(bin() + " weights --config " + una).exit_code == 2);
  }
}

TEST_CASE("quad order can come from the environment") {
  const auto res = run_command("CBM_QUAD_ORDER=32 " + bin() +
                               " weights --config " + config_dir() +
                               "/additive_uniform.json");
  CHECK(res.exit_code == 0);
}
