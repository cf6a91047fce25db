#include "report.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "multitreat/errors.hpp"
#include "multitreat/version.hpp"

namespace multitreat::cli {

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t hash = 0xCBF29CE484222325ULL;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001B3ULL;
  }
  return hash;
}

std::string file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return "fnv1a:unavailable";
  std::ostringstream buffer;
  buffer << in.rdbuf();
  std::ostringstream out;
  out << "fnv1a:" << std::hex << fnv1a(buffer.str());
  return out.str();
}

Json to_json(const Eigen::VectorXd& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::isfinite(v[i])) {
      out.push_back(v[i]);
    } else {
      out.push_back(nullptr);
    }
  }
  return out;
}

Json to_json(const Eigen::MatrixXd& m) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.push_back(to_json(Eigen::VectorXd(m.row(i))));
  return out;
}

Json estimate_set_to_json(const EstimateSet& set) {
  Json out;
  out["kind"] = estimator_kind_name(set.kind);
  out["beta"] = to_json(set.beta);
  out["se_robust"] = to_json(set.se_robust);
  out["se_known_pscore"] = set.se_known_pscore ? to_json(*set.se_known_pscore) : Json(nullptr);
  out["se_estimated_pscore"] =
      set.se_estimated_pscore ? to_json(*set.se_estimated_pscore) : Json(nullptr);
  out["n_used"] = set.n_used;
  if (set.weights_summary) {
    out["weights_summary"] = {{"min", set.weights_summary->min},
                              {"mean", set.weights_summary->mean},
                              {"max", set.weights_summary->max}};
  } else {
    out["weights_summary"] = nullptr;
  }
  out["warnings"] = set.warnings;
  return out;
}

Json report_skeleton(const std::string& command) {
  Json report;
  report["schema_version"] = kReportSchemaVersion;
  report["tool"] = {{"name", "multitreat"}, {"version", kVersion}};
  report["command"] = command;
  report["invocation"] = Json::object();
  report["input"] = Json::object();
  report["seed"] = 0;
  report["warnings"] = Json::array();
  report["results"] = Json::object();
  return report;
}

std::string fixed(double value, int precision) {
  if (!std::isfinite(value)) return "nan";
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(precision);
  out << value;
  return out.str();
}

std::string pad_left(const std::string& text, int width) {
  if (static_cast<int>(text.size()) >= width) return text;
  return std::string(static_cast<std::size_t>(width) - text.size(), ' ') + text;
}

}  // namespace multitreat::cli
