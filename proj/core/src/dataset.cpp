#include "multitreat/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "multitreat/errors.hpp"

namespace multitreat {

bool Dataset::all_controls_categorical() const {
  return std::all_of(control_kinds.begin(), control_kinds.end(),
                     [](ColumnKind k) { return k == ColumnKind::categorical; });
}

void Dataset::validate() const {
  const long n = rows();
  if (n == 0) fail(ErrorCode::EmptyAfterFiltering, "dataset has no rows");
  if (static_cast<long>(treatment.size()) != n || controls.rows() != n) {
    fail(ErrorCode::InvalidSpec, "dataset blocks have inconsistent row counts");
  }
  if (controls.cols() != static_cast<Eigen::Index>(control_kinds.size()) ||
      control_names.size() != control_kinds.size() ||
      control_levels.size() != control_kinds.size()) {
    fail(ErrorCode::InvalidSpec, "control metadata does not match control matrix");
  }
  if (arm_names.size() < 2) fail(ErrorCode::InvalidSpec, "need at least two arms");
  if (!outcome.allFinite() || !controls.allFinite()) {
    fail(ErrorCode::NonFinite, "dataset contains NaN or Inf after ingestion");
  }
  std::vector<long> arm_counts(arm_names.size(), 0);
  for (int d : treatment) {
    if (d < 0 || d >= static_cast<int>(arm_names.size())) {
      fail(ErrorCode::InvalidSpec, "treatment label " + std::to_string(d) + " out of range");
    }
    ++arm_counts[static_cast<std::size_t>(d)];
  }
  for (std::size_t k = 0; k < arm_counts.size(); ++k) {
    if (arm_counts[k] < 2) {
      fail(ErrorCode::SingletonArm,
           "arm '" + arm_names[k] + "' has " + std::to_string(arm_counts[k]) + " observation(s)");
    }
  }
}

namespace {

// RFC-4180 field splitter: quoted fields may contain commas, escaped quotes
// ("") and embedded newlines. Returns one record per call.
bool next_record(const std::string& text, std::size_t& pos, std::vector<std::string>& fields) {
  fields.clear();
  if (pos >= text.size()) return false;
  std::string field;
  bool quoted = false;
  bool any = false;
  while (pos < text.size()) {
    char c = text[pos];
    if (quoted) {
      if (c == '"') {
        if (pos + 1 < text.size() && text[pos + 1] == '"') {
          field += '"';
          ++pos;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      ++pos;
      continue;
    }
    if (c == '"') {
      quoted = true;
      ++pos;
      any = true;
    } else if (c == ',') {
      fields.push_back(field);
      field.clear();
      ++pos;
      any = true;
    } else if (c == '\r' || c == '\n') {
      if (c == '\r' && pos + 1 < text.size() && text[pos + 1] == '\n') ++pos;
      ++pos;
      if (!any && field.empty()) continue;  // skip blank lines
      fields.push_back(field);
      return true;
    } else {
      field += c;
      ++pos;
      any = true;
    }
  }
  if (!any && field.empty()) return false;
  fields.push_back(field);
  return true;
}

bool is_missing(const std::string& raw) {
  std::string s;
  for (char c : raw) {
    if (!std::isspace(static_cast<unsigned char>(c))) s += static_cast<char>(std::tolower(c));
  }
  return s.empty() || s == "na" || s == "nan" || s == "null";
}

std::optional<double> parse_double(const std::string& raw) {
  try {
    std::size_t used = 0;
    double v = std::stod(raw, &used);
    while (used < raw.size() && std::isspace(static_cast<unsigned char>(raw[used]))) ++used;
    if (used != raw.size()) return std::nullopt;
    if (!std::isfinite(v)) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

std::size_t find_column(const std::vector<std::string>& header, const std::string& name) {
  auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) {
    fail(ErrorCode::MissingColumn, "column '" + name + "' not found in CSV header");
  }
  return static_cast<std::size_t>(it - header.begin());
}

}  // namespace

Dataset load_csv_text(const std::string& text, const CsvLoadOptions& options) {
  std::size_t pos = 0;
  std::vector<std::string> header;
  if (!next_record(text, pos, header)) {
    fail(ErrorCode::EmptyAfterFiltering, "CSV input is empty (header row required)");
  }
  const std::size_t outcome_idx = find_column(header, options.outcome_column);
  const std::size_t treatment_idx = find_column(header, options.treatment_column);
  std::vector<std::size_t> control_idx;
  control_idx.reserve(options.control_columns.size());
  for (const auto& col : options.control_columns) {
    control_idx.push_back(find_column(header, col.name));
  }

  struct RawRow {
    double outcome;
    std::string arm;
    std::vector<std::string> controls;
  };
  std::vector<RawRow> kept;
  long dropped = 0;
  std::vector<std::string> fields;
  while (next_record(text, pos, fields)) {
    if (fields.size() < header.size()) {
      ++dropped;
      continue;
    }
    RawRow row;
    if (is_missing(fields[outcome_idx]) || is_missing(fields[treatment_idx])) {
      ++dropped;
      continue;
    }
    auto y = parse_double(fields[outcome_idx]);
    if (!y) {
      ++dropped;
      continue;
    }
    row.outcome = *y;
    row.arm = fields[treatment_idx];
    bool bad = false;
    row.controls.reserve(control_idx.size());
    for (std::size_t j = 0; j < control_idx.size(); ++j) {
      const std::string& raw = fields[control_idx[j]];
      if (is_missing(raw)) {
        bad = true;
        break;
      }
      if (options.control_columns[j].kind == ColumnKind::continuous && !parse_double(raw)) {
        bad = true;
        break;
      }
      row.controls.push_back(raw);
    }
    if (bad) {
      ++dropped;
      continue;
    }
    kept.push_back(std::move(row));
  }
  if (kept.empty()) {
    fail(ErrorCode::EmptyAfterFiltering, "no usable rows after dropping incomplete records");
  }

  // Arm labels: designated control first, remaining labels in sorted order.
  std::vector<std::string> arm_labels;
  for (const auto& row : kept) {
    if (std::find(arm_labels.begin(), arm_labels.end(), row.arm) == arm_labels.end()) {
      arm_labels.push_back(row.arm);
    }
  }
  std::sort(arm_labels.begin(), arm_labels.end());
  std::string control_label = options.control_arm.value_or(arm_labels.front());
  auto ctrl_it = std::find(arm_labels.begin(), arm_labels.end(), control_label);
  if (ctrl_it == arm_labels.end()) {
    fail(ErrorCode::InvalidSpec, "control arm '" + control_label + "' not present in data");
  }
  arm_labels.erase(ctrl_it);
  arm_labels.insert(arm_labels.begin(), control_label);
  std::map<std::string, int> arm_code;
  for (std::size_t k = 0; k < arm_labels.size(); ++k) arm_code[arm_labels[k]] = static_cast<int>(k);

  const long n = static_cast<long>(kept.size());
  const std::size_t c = options.control_columns.size();
  Dataset data;
  data.outcome.resize(n);
  data.treatment.resize(static_cast<std::size_t>(n));
  data.controls.resize(n, static_cast<Eigen::Index>(c));
  data.arm_names = arm_labels;
  data.dropped_rows = dropped;
  for (const auto& col : options.control_columns) {
    data.control_names.push_back(col.name);
    data.control_kinds.push_back(col.kind);
  }
  data.control_levels.resize(c);

  // Categorical levels are coded in sorted label order for determinism.
  for (std::size_t j = 0; j < c; ++j) {
    if (options.control_columns[j].kind != ColumnKind::categorical) continue;
    std::vector<std::string> levels;
    for (const auto& row : kept) levels.push_back(row.controls[j]);
    std::sort(levels.begin(), levels.end());
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
    data.control_levels[j] = levels;
  }

  for (long i = 0; i < n; ++i) {
    const auto& row = kept[static_cast<std::size_t>(i)];
    data.outcome[i] = row.outcome;
    data.treatment[static_cast<std::size_t>(i)] = arm_code.at(row.arm);
    for (std::size_t j = 0; j < c; ++j) {
      if (options.control_columns[j].kind == ColumnKind::categorical) {
        const auto& levels = data.control_levels[j];
        auto it = std::lower_bound(levels.begin(), levels.end(), row.controls[j]);
        data.controls(i, static_cast<Eigen::Index>(j)) =
            static_cast<double>(it - levels.begin());
      } else {
        data.controls(i, static_cast<Eigen::Index>(j)) = *parse_double(row.controls[j]);
      }
    }
  }

  data.validate();
  return data;
}

Dataset load_csv(const std::string& path, const CsvLoadOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::InvalidSpec, "cannot open CSV file '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return load_csv_text(buffer.str(), options);
}

Eigen::MatrixXd encode_treatments(const Dataset& data) {
  const long n = data.rows();
  const int k = data.num_treatments();
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(n, k);
  for (long i = 0; i < n; ++i) {
    int d = data.treatment[static_cast<std::size_t>(i)];
    if (d >= 1) X(i, d - 1) = 1.0;
  }
  return X;
}

StrataIndex index_strata(const Dataset& data) {
  const long n = data.rows();
  const Eigen::Index c = data.controls.cols();
  std::map<std::vector<double>, int> seen;
  std::vector<std::vector<double>> keys;
  StrataIndex index;
  index.stratum_of_row.resize(static_cast<std::size_t>(n));
  for (long i = 0; i < n; ++i) {
    std::vector<double> key(static_cast<std::size_t>(c));
    for (Eigen::Index j = 0; j < c; ++j) key[static_cast<std::size_t>(j)] = data.controls(i, j);
    auto [it, inserted] = seen.emplace(key, static_cast<int>(keys.size()));
    if (inserted) keys.push_back(key);
    index.stratum_of_row[static_cast<std::size_t>(i)] = it->second;
  }

  // Re-map to lexicographic order of the control rows.
  std::vector<int> order(keys.size());
  for (std::size_t s = 0; s < order.size(); ++s) order[s] = static_cast<int>(s);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return keys[static_cast<std::size_t>(a)] < keys[static_cast<std::size_t>(b)]; });
  std::vector<int> rank(keys.size());
  for (std::size_t s = 0; s < order.size(); ++s) rank[static_cast<std::size_t>(order[s])] = static_cast<int>(s);
  for (auto& s : index.stratum_of_row) s = rank[static_cast<std::size_t>(s)];

  const long num = static_cast<long>(keys.size());
  index.counts.assign(static_cast<std::size_t>(num), 0);
  index.control_rows.resize(num, c);
  index.labels.resize(static_cast<std::size_t>(num));
  for (long s = 0; s < num; ++s) {
    const auto& key = keys[static_cast<std::size_t>(order[static_cast<std::size_t>(s)])];
    std::ostringstream label;
    for (Eigen::Index j = 0; j < c; ++j) {
      index.control_rows(s, j) = key[static_cast<std::size_t>(j)];
      if (j > 0) label << "|";
      if (data.control_kinds[static_cast<std::size_t>(j)] == ColumnKind::categorical &&
          !data.control_levels[static_cast<std::size_t>(j)].empty()) {
        auto code = static_cast<std::size_t>(key[static_cast<std::size_t>(j)]);
        label << data.control_levels[static_cast<std::size_t>(j)][code];
      } else {
        label << key[static_cast<std::size_t>(j)];
      }
    }
    index.labels[static_cast<std::size_t>(s)] = label.str();
  }
  for (long i = 0; i < n; ++i) {
    ++index.counts[static_cast<std::size_t>(index.stratum_of_row[static_cast<std::size_t>(i)])];
  }
  return index;
}

Eigen::MatrixXd cell_counts(const Dataset& data, const StrataIndex& strata) {
  Eigen::MatrixXd cells =
      Eigen::MatrixXd::Zero(strata.num_strata(), data.num_treatments() + 1);
  for (long i = 0; i < data.rows(); ++i) {
    cells(strata.stratum_of_row[static_cast<std::size_t>(i)],
          data.treatment[static_cast<std::size_t>(i)]) += 1.0;
  }
  return cells;
}

ArmFilter filter_arms(const Dataset& data, const std::vector<int>& arms_to_keep) {
  if (arms_to_keep.empty()) fail(ErrorCode::InvalidSpec, "arm filter is empty");
  std::vector<int> remap(data.arm_names.size(), -1);
  ArmFilter out;
  for (std::size_t k = 0; k < arms_to_keep.size(); ++k) {
    int arm = arms_to_keep[k];
    if (arm < 0 || arm > data.num_treatments()) {
      fail(ErrorCode::InvalidSpec, "arm filter entry " + std::to_string(arm) + " out of range");
    }
    remap[static_cast<std::size_t>(arm)] = static_cast<int>(k);
    out.data.arm_names.push_back(data.arm_names[static_cast<std::size_t>(arm)]);
  }
  for (long i = 0; i < data.rows(); ++i) {
    if (remap[static_cast<std::size_t>(data.treatment[static_cast<std::size_t>(i)])] >= 0) {
      out.rows.push_back(i);
    }
  }
  if (out.rows.empty()) fail(ErrorCode::EmptyAfterFiltering, "arm filter removed every row");

  const long n = static_cast<long>(out.rows.size());
  out.data.outcome.resize(n);
  out.data.controls.resize(n, data.controls.cols());
  out.data.treatment.resize(static_cast<std::size_t>(n));
  for (long i = 0; i < n; ++i) {
    long src = out.rows[static_cast<std::size_t>(i)];
    out.data.outcome[i] = data.outcome[src];
    out.data.controls.row(i) = data.controls.row(src);
    out.data.treatment[static_cast<std::size_t>(i)] =
        remap[static_cast<std::size_t>(data.treatment[static_cast<std::size_t>(src)])];
  }
  out.data.control_names = data.control_names;
  out.data.control_kinds = data.control_kinds;
  out.data.control_levels = data.control_levels;
  out.data.dropped_rows = data.dropped_rows;
  return out;
}

}  // namespace multitreat
