#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "report.hpp"

namespace multitreat::cli {

struct DataOptions {
  std::string data_path;
  std::string outcome;
  std::string treatment;
  std::vector<std::string> controls;  // name[:categorical|:continuous]
  std::optional<std::string> control_arm;
};

struct DecomposeOptions {
  DataOptions data;
  int bootstrap = 500;  // 0 disables the bootstrap block
  std::uint64_t seed = 0;
  int jobs = 1;
  std::string json_path;
  std::string csv_path;
};

struct EstimateOptions {
  DataOptions data;
  std::string which = "all";  // ate | one_at_a_time | common | all
  std::string json_path;
};

struct OracleOptions {
  std::string spec_path;
  bool check = false;
  long cell_scale = 0;  // 0 = search for the smallest usable scale
  std::string json_path;
};

struct SimulateOptions {
  std::string spec_path;
  long n = 5000;
  int reps = 1;
  std::uint64_t seed = 0;
  int jobs = 1;
  std::string json_path;
};

// Command runners build the machine-readable report; they throw
// multitreat::Error on failure. The timestamp is added by the caller so that
// reports stay reproducible byte for byte.
Json run_decompose(const DecomposeOptions& options);
Json run_estimate(const EstimateOptions& options);
Json run_oracle(const OracleOptions& options);
Json run_simulate(const SimulateOptions& options);

// Human-readable rendering of a report produced by the matching runner.
std::string render_report(const Json& report);

// Scatter table CSV (cmd_decompose --csv).
std::string scatter_csv(const Json& report);

}  // namespace multitreat::cli
