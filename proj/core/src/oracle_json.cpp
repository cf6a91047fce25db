#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "multitreat/errors.hpp"
#include "multitreat/oracle.hpp"

namespace multitreat {

namespace {

using nlohmann::json;

Eigen::VectorXd read_vector(const json& node, const std::string& path) {
  if (!node.is_array()) fail(ErrorCode::InvalidSpec, path + ": expected an array of numbers");
  Eigen::VectorXd out(node.size());
  for (std::size_t i = 0; i < node.size(); ++i) {
    if (!node[i].is_number()) {
      fail(ErrorCode::InvalidSpec, path + "/" + std::to_string(i) + ": expected a number");
    }
    out[static_cast<Eigen::Index>(i)] = node[i].get<double>();
  }
  return out;
}

}  // namespace

PopulationSpec parse_population_spec(const std::string& json_text) {
  json doc = json::parse(json_text, nullptr, false);
  if (doc.is_discarded()) fail(ErrorCode::InvalidSpec, "/: not valid JSON");
  if (!doc.is_object() || !doc.contains("strata")) {
    fail(ErrorCode::InvalidSpec, "/strata: missing");
  }
  const json& strata = doc["strata"];
  if (!strata.is_array() || strata.empty()) {
    fail(ErrorCode::InvalidSpec, "/strata: expected a non-empty array");
  }
  PopulationSpec spec;
  for (std::size_t s = 0; s < strata.size(); ++s) {
    const std::string at = "/strata/" + std::to_string(s);
    const json& node = strata[s];
    if (!node.is_object()) fail(ErrorCode::InvalidSpec, at + ": expected an object");
    for (const char* key : {"mass", "p", "mu", "sigma2"}) {
      if (!node.contains(key)) fail(ErrorCode::InvalidSpec, at + "/" + key + ": missing");
    }
    if (!node["mass"].is_number()) fail(ErrorCode::InvalidSpec, at + "/mass: expected a number");
    PopulationStratum stratum;
    stratum.mass = node["mass"].get<double>();
    stratum.p = read_vector(node["p"], at + "/p");
    stratum.mu = read_vector(node["mu"], at + "/mu");
    stratum.sigma2 = read_vector(node["sigma2"], at + "/sigma2");
    spec.strata.push_back(std::move(stratum));
  }
  spec.validate();
  return spec;
}

PopulationSpec load_population_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::InvalidSpec, "cannot open spec file '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_population_spec(buffer.str());
}

std::string population_spec_to_json(const PopulationSpec& spec) {
  json strata = json::array();
  for (const auto& s : spec.strata) {
    json node;
    node["mass"] = s.mass;
    node["p"] = std::vector<double>(s.p.data(), s.p.data() + s.p.size());
    node["mu"] = std::vector<double>(s.mu.data(), s.mu.data() + s.mu.size());
    node["sigma2"] = std::vector<double>(s.sigma2.data(), s.sigma2.data() + s.sigma2.size());
    strata.push_back(std::move(node));
  }
  json doc;
  doc["strata"] = std::move(strata);
  return doc.dump(2);
}

}  // namespace multitreat
