#include "multitreat/design.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "multitreat/errors.hpp"

namespace multitreat {

namespace {

std::string level_name(const Dataset& data, std::size_t col, int code) {
  const auto& levels = data.control_levels[col];
  if (code >= 0 && static_cast<std::size_t>(code) < levels.size()) {
    return levels[static_cast<std::size_t>(code)];
  }
  return std::to_string(code);
}

}  // namespace

Eigen::VectorXd BuiltDesign::control_row_values(const Eigen::VectorXd& control_row) const {
  Eigen::VectorXd values(control_count);
  Eigen::Index out = 0;
  for (std::size_t j = 0; j < dummy_levels_.size(); ++j) {
    const auto& levels = dummy_levels_[j];
    if (levels.size() == 1 && levels[0] == -1) {
      values[out++] = control_row[static_cast<Eigen::Index>(j)];
      continue;
    }
    int code = static_cast<int>(control_row[static_cast<Eigen::Index>(j)]);
    for (int level : levels) values[out++] = (code == level) ? 1.0 : 0.0;
  }
  return values;
}

BuiltDesign build_design(const Dataset& data, const DesignSpec& spec) {
  BuiltDesign built;
  const Dataset* source = &data;
  Dataset filtered;
  if (spec.subsample) {
    ArmFilter f = filter_arms(data, *spec.subsample);
    filtered = std::move(f.data);
    built.rows = std::move(f.rows);
    source = &filtered;
  } else {
    built.rows.resize(static_cast<std::size_t>(data.rows()));
    std::iota(built.rows.begin(), built.rows.end(), 0L);
  }
  const Dataset& d = *source;
  const long n = d.rows();
  const int k = d.num_treatments();

  if (spec.control_style == ControlStyle::strata_dummies && !d.all_controls_categorical()) {
    fail(ErrorCode::InvalidSpec, "strata_dummies requires all control columns categorical");
  }

  // Control block layout: categorical columns expand into indicators for every
  // level except the most frequent one (best conditioning); continuous columns
  // enter linearly.
  std::vector<std::string> control_labels;
  built.dummy_levels_.resize(d.control_kinds.size());
  for (std::size_t j = 0; j < d.control_kinds.size(); ++j) {
    if (d.control_kinds[j] == ColumnKind::continuous) {
      built.dummy_levels_[j] = {-1};
      control_labels.push_back(d.control_names[j]);
      continue;
    }
    std::map<int, long> freq;
    for (long i = 0; i < n; ++i) {
      ++freq[static_cast<int>(d.controls(i, static_cast<Eigen::Index>(j)))];
    }
    int reference = freq.begin()->first;
    long best = freq.begin()->second;
    for (const auto& [level, count] : freq) {
      if (count > best) {
        reference = level;
        best = count;
      }
    }
    for (const auto& [level, count] : freq) {
      if (level == reference) continue;
      built.dummy_levels_[j].push_back(level);
      control_labels.push_back(d.control_names[j] + "=" + level_name(d, j, level));
    }
  }
  const int c = static_cast<int>(control_labels.size());

  built.treatment_begin = 1;
  built.treatment_count = k;
  built.control_begin = 1 + k;
  built.control_count = c;
  const bool interact = spec.interaction != InteractionStyle::none && k > 0 && c > 0;
  built.interaction_begin = interact ? built.control_begin + c : -1;
  const int p = 1 + k + c + (interact ? k * c : 0);

  DesignMatrix X;
  X.values.resize(n, p);
  X.has_intercept = true;
  X.values.col(0).setOnes();
  X.column_labels.push_back("(intercept)");

  for (int a = 1; a <= k; ++a) {
    built.arms.push_back(a);
    X.column_labels.push_back(d.arm_names[static_cast<std::size_t>(a)]);
  }
  Eigen::MatrixXd treat = encode_treatments(d);
  X.values.block(0, 1, n, k) = treat;

  Eigen::MatrixXd controls(n, c);
  for (long i = 0; i < n; ++i) {
    controls.row(i) = built.control_row_values(d.controls.row(i).transpose()).transpose();
  }
  X.values.block(0, built.control_begin, n, c) = controls;
  for (const auto& label : control_labels) X.column_labels.push_back(label);

  built.control_means = Eigen::VectorXd::Zero(c);
  if (interact) {
    if (spec.interaction == InteractionStyle::demeaned) {
      built.control_means = controls.colwise().mean();
    }
    Eigen::MatrixXd centered = controls.rowwise() - built.control_means.transpose();
    for (int a = 0; a < k; ++a) {
      for (int j = 0; j < c; ++j) {
        X.values.col(built.interaction_begin + a * c + j) =
            treat.col(a).cwiseProduct(centered.col(j));
        X.column_labels.push_back(d.arm_names[static_cast<std::size_t>(built.arms[a])] + ":" +
                                  control_labels[static_cast<std::size_t>(j)]);
      }
    }
  }

  built.design = std::move(X);
  return built;
}

DesignMatrix control_design(const Dataset& data, const DesignSpec& spec) {
  DesignSpec controls_only = spec;
  controls_only.interaction = InteractionStyle::none;
  controls_only.subsample.reset();
  BuiltDesign built = build_design(data, controls_only);
  DesignMatrix W;
  const long n = built.design.rows();
  W.values.resize(n, 1 + built.control_count);
  W.values.col(0) = built.design.values.col(0);
  W.values.rightCols(built.control_count) =
      built.design.values.middleCols(built.control_begin, built.control_count);
  W.column_labels.push_back(built.design.column_labels[0]);
  for (int j = 0; j < built.control_count; ++j) {
    W.column_labels.push_back(
        built.design.column_labels[static_cast<std::size_t>(built.control_begin + j)]);
  }
  W.has_intercept = true;
  return W;
}

}  // namespace multitreat
