#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

namespace multitreat {

enum class ColumnKind { categorical, continuous };

// Rows of (outcome, treatment arm, controls). Arm labels are remapped to
// 0..K with 0 the designated control arm; categorical control columns store
// integer level codes whose labels live in `control_levels`.
struct Dataset {
  Eigen::VectorXd outcome;
  std::vector<int> treatment;
  Eigen::MatrixXd controls;
  std::vector<std::string> control_names;
  std::vector<ColumnKind> control_kinds;
  std::vector<std::vector<std::string>> control_levels;
  std::vector<std::string> arm_names;
  long dropped_rows = 0;

  long rows() const { return static_cast<long>(outcome.size()); }
  int num_treatments() const { return static_cast<int>(arm_names.size()) - 1; }
  bool all_controls_categorical() const;

  // Enforces the structural invariants (every arm present with >= 2
  // observations, finite values, consistent shapes). Throws on violation.
  void validate() const;
};

struct CsvColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::categorical;
};

struct CsvLoadOptions {
  std::string outcome_column;
  std::string treatment_column;
  std::vector<CsvColumnSpec> control_columns;
  // Arm label mapped to 0. Defaults to the lexicographically smallest label.
  std::optional<std::string> control_arm;
};

Dataset load_csv(const std::string& path, const CsvLoadOptions& options);
Dataset load_csv_text(const std::string& text, const CsvLoadOptions& options);

// N x K indicator block: row i carries a single 1 in column D_i - 1 when
// D_i >= 1 and is all zeros for control rows.
Eigen::MatrixXd encode_treatments(const Dataset& data);

// Strata are the unique control rows, ordered lexicographically.
struct StrataIndex {
  std::vector<int> stratum_of_row;
  std::vector<std::string> labels;
  std::vector<long> counts;
  Eigen::MatrixXd control_rows;  // S x C representative rows

  long num_strata() const { return static_cast<long>(counts.size()); }
};

StrataIndex index_strata(const Dataset& data);

// S x (K+1) occupancy table of stratum-by-arm cell counts.
Eigen::MatrixXd cell_counts(const Dataset& data, const StrataIndex& strata);

// Restriction of the dataset to the given arms (first entry becomes the new
// control arm, the rest are renumbered 1..). `rows` maps back to the source.
struct ArmFilter {
  Dataset data;
  std::vector<long> rows;
};

ArmFilter filter_arms(const Dataset& data, const std::vector<int>& arms_to_keep);

}  // namespace multitreat
