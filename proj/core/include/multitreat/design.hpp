#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "multitreat/dataset.hpp"
#include "multitreat/regress.hpp"

namespace multitreat {

enum class ControlStyle { strata_dummies, linear };
enum class InteractionStyle { none, demeaned, raw };

// Choice of regression specification. `strata_dummies` expands every
// categorical control into indicator columns (reference category dropped);
// `linear` additionally lets continuous controls enter as-is. Interactions
// multiply each treatment indicator with the control block, optionally
// demeaned with sample means taken on the estimation subsample.
struct DesignSpec {
  ControlStyle control_style = ControlStyle::strata_dummies;
  InteractionStyle interaction = InteractionStyle::none;
  std::optional<std::vector<int>> subsample;  // arms kept; first entry is the control arm
};

// Design with the stable layout [intercept | treatments | controls | interactions]
// plus the bookkeeping needed to slice coefficient vectors by block.
struct BuiltDesign {
  DesignMatrix design;
  std::vector<long> rows;  // dataset row per design row
  std::vector<int> arms;   // arm label behind each treatment column
  int treatment_begin = 1;
  int treatment_count = 0;
  int control_begin = 0;
  int control_count = 0;
  int interaction_begin = -1;
  Eigen::VectorXd control_means;  // demeaning constants (zero when interaction != demeaned)

  // Control-block values for an arbitrary control row, matching the layout
  // of columns [control_begin, control_begin + control_count).
  Eigen::VectorXd control_row_values(const Eigen::VectorXd& control_row) const;

 private:
  friend BuiltDesign build_design(const Dataset&, const DesignSpec&);
  // Per control column: dummy level codes (categorical) or {-1} marker (continuous).
  std::vector<std::vector<int>> dummy_levels_;
};

BuiltDesign build_design(const Dataset& data, const DesignSpec& spec);

// [intercept | controls] only; used for residualization and propensity fits.
DesignMatrix control_design(const Dataset& data, const DesignSpec& spec);

}  // namespace multitreat
