#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"
#include "multitreat/errors.hpp"
#include "multitreat/version.hpp"

namespace {

using multitreat::cli::Json;

std::string timestamp_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buffer[32];
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::strftime(buffer, sizeof(buffer), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buffer;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    multitreat::fail(multitreat::ErrorCode::InvalidSpec, "cannot write to '" + path + "'");
  }
  out << content;
}

int emit(Json report, const std::string& json_path, const std::string& csv_path) {
  std::cout << multitreat::cli::render_report(report);
  if (!csv_path.empty()) {
    write_file(csv_path, multitreat::cli::scatter_csv(report));
    std::cout << "scatter table written to " << csv_path << "\n";
  }
  if (!json_path.empty()) {
    report["timestamp"] = timestamp_now();
    write_file(json_path, report.dump(2) + "\n");
    std::cout << "report written to " << json_path << "\n";
  }
  return 0;
}

void add_data_flags(CLI::App* cmd, multitreat::cli::DataOptions& data) {
  cmd->add_option("--data", data.data_path, "input CSV file")->required();
  cmd->add_option("--outcome", data.outcome, "outcome column name")->required();
  cmd->add_option("--treatment", data.treatment, "treatment arm column name")->required();
  cmd->add_option("--control", data.controls,
                  "control column, repeatable; suffix :categorical or :continuous "
                  "(default categorical)")
      ->required();
  cmd->add_option("--control-arm", [&data](const std::vector<std::string>& values) {
        data.control_arm = values.back();
        return true;
      },
      "treatment label mapped to the control arm (default: smallest label)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-treatment regression diagnostics and estimators"};
  app.set_version_flag("--version", multitreat::kVersion);
  app.require_subcommand(1);

  multitreat::cli::DecomposeOptions decompose;
  CLI::App* cmd_decompose =
      app.add_subcommand("decompose", "split each treatment coefficient into own and "
                                      "cross-effect parts, with diagnostics");
  add_data_flags(cmd_decompose, decompose.data);
  cmd_decompose->add_option("--bootstrap", decompose.bootstrap,
                            "bootstrap replicates for component SEs (0 disables)");
  cmd_decompose->add_option("--seed", decompose.seed, "RNG seed");
  cmd_decompose->add_option("--jobs", decompose.jobs, "worker threads");
  cmd_decompose->add_option("--json", decompose.json_path, "write the JSON report here");
  cmd_decompose->add_option("--csv", decompose.csv_path, "write the per-stratum scatter CSV here");

  multitreat::cli::EstimateOptions estimate;
  CLI::App* cmd_estimate = app.add_subcommand("estimate", "contamination-free estimators");
  add_data_flags(cmd_estimate, estimate.data);
  cmd_estimate->add_option("--which", estimate.which, "ate | one_at_a_time | common | all");
  cmd_estimate->add_option("--json", estimate.json_path, "write the JSON report here");

  multitreat::cli::OracleOptions oracle;
  CLI::App* cmd_oracle =
      app.add_subcommand("oracle", "closed-form population weights and coefficient split");
  cmd_oracle->add_option("--spec", oracle.spec_path, "population spec JSON")->required();
  cmd_oracle->add_flag("--check", oracle.check,
                       "verify the closed forms against an exact-frequency dataset");
  cmd_oracle->add_option("--n", oracle.cell_scale, "cell scale for --check (default: search)");
  cmd_oracle->add_option("--json", oracle.json_path, "write the JSON report here");

  multitreat::cli::SimulateOptions simulate;
  CLI::App* cmd_simulate =
      app.add_subcommand("simulate", "Monte Carlo runs of every estimator against the oracle");
  cmd_simulate->add_option("--spec", simulate.spec_path, "population spec JSON")->required();
  cmd_simulate->add_option("--n", simulate.n, "observations per replication");
  cmd_simulate->add_option("--reps", simulate.reps, "number of replications");
  cmd_simulate->add_option("--seed", simulate.seed, "RNG seed");
  cmd_simulate->add_option("--jobs", simulate.jobs, "worker threads");
  cmd_simulate->add_option("--json", simulate.json_path, "write the JSON report here");

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_decompose->parsed()) {
      return emit(multitreat::cli::run_decompose(decompose), decompose.json_path,
                  decompose.csv_path);
    }
    if (cmd_estimate->parsed()) {
      return emit(multitreat::cli::run_estimate(estimate), estimate.json_path, "");
    }
    if (cmd_oracle->parsed()) {
      return emit(multitreat::cli::run_oracle(oracle), oracle.json_path, "");
    }
    if (cmd_simulate->parsed()) {
      return emit(multitreat::cli::run_simulate(simulate), simulate.json_path, "");
    }
  } catch (const multitreat::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.category() == multitreat::ErrorCategory::Validation ? 2 : 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
