#include <catch2/catch_amalgamated.hpp>

#include <fstream>
#include <random>
#include <sstream>

#include "commands.hpp"
#include "multitreat/oracle.hpp"
#include "multitreat/errors.hpp"
#include "support.hpp"

using namespace multitreat;
using multitreat::cli::Json;

namespace {

cli::DataOptions example_data_options() {
  cli::DataOptions data;
  data.data_path = testsupport::repo_file("data/example_two_strata.csv");
  data.outcome = "y";
  data.treatment = "arm";
  data.controls = {"stratum:categorical"};
  data.control_arm = "0";
  return data;
}

Json load_json_file(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  Json doc;
  in >> doc;
  return doc;
}

// Minimal structural validator: checks required keys, property types, enum
// and const constraints from the shipped schema (the subset it uses).
bool type_matches(const std::string& type, const Json& value) {
  if (type == "object") return value.is_object();
  if (type == "array") return value.is_array();
  if (type == "string") return value.is_string();
  if (type == "integer") return value.is_number_integer() || value.is_number_unsigned();
  if (type == "number") return value.is_number();
  if (type == "boolean") return value.is_boolean();
  return true;
}

void validate_against(const Json& schema, const Json& value, const std::string& where) {
  if (schema.contains("type")) {
    INFO(where << ": type " << schema["type"].get<std::string>());
    REQUIRE(type_matches(schema["type"].get<std::string>(), value));
  }
  if (schema.contains("const")) {
    REQUIRE(value == schema["const"]);
  }
  if (schema.contains("enum")) {
    bool found = false;
    for (const auto& candidate : schema["enum"]) found = found || candidate == value;
    INFO(where << ": enum");
    REQUIRE(found);
  }
  if (schema.contains("required")) {
    for (const auto& key : schema["required"]) {
      INFO(where << ": required key " << key.get<std::string>());
      REQUIRE(value.contains(key.get<std::string>()));
    }
  }
  if (schema.contains("properties") && value.is_object()) {
    for (const auto& [key, sub] : schema["properties"].items()) {
      if (value.contains(key)) validate_against(sub, value[key], where + "/" + key);
    }
  }
  if (schema.contains("items") && value.is_array()) {
    for (const auto& element : value) validate_against(schema["items"], element, where + "[]");
  }
}

}  // namespace

TEST_CASE("decompose command reproduces the worked example from the bundled CSV") {
  cli::DecomposeOptions options;
  options.data = example_data_options();
  options.bootstrap = 25;
  Json report = cli::run_decompose(options);

  REQUIRE(report["command"] == "decompose");
  REQUIRE(report["input"]["rows"] == 2000);
  const Json& results = report["results"];
  REQUIRE(std::abs(results["beta"][0].get<double>() + 99.0 / 212.0) < 1e-9);
  REQUIRE(std::abs(results["own"][0].get<double>()) < 1e-9);
  REQUIRE(results["strata"] == 2);
  REQUIRE(results["scatter"].size() == 2);

  // the iid bootstrap sees share variation only; SEs stay small and finite
  REQUIRE(results["bootstrap"]["replicates"] == 25);
  REQUIRE(results["bootstrap"]["beta_se"][0].get<double>() >= 0.0);
  REQUIRE(results["bootstrap"]["beta_se"][0].get<double>() < 0.1);
}

TEST_CASE("reports are byte-for-byte reproducible for a fixed invocation") {
  cli::DecomposeOptions options;
  options.data = example_data_options();
  options.bootstrap = 10;
  options.seed = 42;
  const std::string first = cli::run_decompose(options).dump(2);
  const std::string second = cli::run_decompose(options).dump(2);
  REQUIRE(first == second);

  options.jobs = 3;  // parallel execution must not change the numeric results
  Json parallel = cli::run_decompose(options);
  Json serial = Json::parse(first);
  REQUIRE(parallel["results"].dump() == serial["results"].dump());
}

TEST_CASE("estimate command emits every requested estimator block") {
  cli::EstimateOptions options;
  options.data = example_data_options();
  options.which = "all";
  Json report = cli::run_estimate(options);
  const Json& sets = report["results"]["estimates"];
  REQUIRE(sets.size() == 4);
  REQUIRE(sets[0]["kind"] == "uninteracted");
  REQUIRE(sets[1]["kind"] == "ate_interacted");
  REQUIRE(std::abs(sets[1]["beta"][1].get<double>() - 0.5) < 1e-9);
  REQUIRE(sets[3]["kind"] == "common_weights");
  REQUIRE(sets[3]["se_known_pscore"].is_array());

  options.which = "common";
  REQUIRE(cli::run_estimate(options)["results"]["estimates"].size() == 1);

  options.which = "bogus";
  REQUIRE_THROWS_AS(cli::run_estimate(options), Error);
}

TEST_CASE("oracle command emits the closed forms and passes its own check") {
  cli::OracleOptions options;
  options.spec_path = testsupport::repo_file("data/example_two_strata_spec.json");
  options.check = true;
  Json report = cli::run_oracle(options);
  const Json& results = report["results"];
  REQUIRE(std::abs(results["lambda"][0]["lambda"][0][1].get<double>() - 99.0 / 106.0) < 1e-12);
  REQUIRE(std::abs(results["lambda"][1]["lambda"][0][1].get<double>() + 99.0 / 106.0) < 1e-12);
  REQUIRE(std::abs(results["beta"][0].get<double>() + 99.0 / 212.0) < 1e-12);
  REQUIRE(results["check"]["pass"] == true);
  REQUIRE(results["optimal_weights"]["common"].is_array());
}

TEST_CASE("oracle --check agrees on a random integer-cell spec via scale search") {
  std::mt19937_64 rng(163);
  testsupport::RationalSpec rational = testsupport::random_rational_spec(rng, 2, 4, 1, 3);
  const std::string path = "random_rational_spec_tmp.json";
  {
    std::ofstream out(path);
    out << population_spec_to_json(rational.spec);
  }
  cli::OracleOptions options;
  options.spec_path = path;
  options.check = true;  // cell scale found by search
  Json report = cli::run_oracle(options);
  REQUIRE(report["results"]["check"]["pass"] == true);
  std::remove(path.c_str());
}

TEST_CASE("simulate command: zero variance and constant effects give exactly zero bias") {
  const std::string spec_json = R"({"strata": [
    {"mass": 0.5, "p": [0.50, 0.05, 0.45], "mu": [1.0, 3.0, 0.5], "sigma2": [0.0, 0.0, 0.0]},
    {"mass": 0.5, "p": [0.10, 0.45, 0.45], "mu": [-2.0, 0.0, -2.5], "sigma2": [0.0, 0.0, 0.0]}
  ]})";
  const std::string path = "zero_variance_spec_tmp.json";
  {
    std::ofstream out(path);
    out << spec_json;
  }
  cli::SimulateOptions options;
  options.spec_path = path;
  options.n = 2000;
  options.reps = 1;
  Json report = cli::run_simulate(options);
  for (const auto& block : report["results"]["estimators"]) {
    REQUIRE(block["replicates_failed"] == 0);
    for (std::size_t a = 0; a < 2; ++a) {
      REQUIRE(std::abs(block["bias"][a].get<double>()) < 1e-9);
    }
  }
  std::remove(path.c_str());
}

TEST_CASE("every command's report validates against the shipped schema") {
  Json schema = load_json_file(testsupport::repo_file("data/report.schema.json"));

  cli::DecomposeOptions decompose;
  decompose.data = example_data_options();
  decompose.bootstrap = 5;
  validate_against(schema, cli::run_decompose(decompose), "decompose");

  cli::EstimateOptions estimate;
  estimate.data = example_data_options();
  validate_against(schema, cli::run_estimate(estimate), "estimate");

  cli::OracleOptions oracle;
  oracle.spec_path = testsupport::repo_file("data/example_two_strata_spec.json");
  validate_against(schema, cli::run_oracle(oracle), "oracle");
}

TEST_CASE("scatter CSV has a header plus one line per stratum") {
  cli::DecomposeOptions options;
  options.data = example_data_options();
  options.bootstrap = 0;
  Json report = cli::run_decompose(options);
  const std::string csv = cli::scatter_csv(report);
  std::istringstream lines(csv);
  std::string line;
  std::vector<std::string> all;
  while (std::getline(lines, line)) all.push_back(line);
  REQUIRE(all.size() == 3);
  REQUIRE(all[0].find("stratum,count,lambda_1_1") == 0);
}
