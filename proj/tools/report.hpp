#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "multitreat/decompose.hpp"
#include "multitreat/estimators.hpp"

namespace multitreat::cli {

using Json = nlohmann::ordered_json;

// 64-bit FNV-1a content hash, stable across platforms.
std::uint64_t fnv1a(const std::string& bytes);
std::string file_hash(const std::string& path);

Json to_json(const Eigen::VectorXd& v);
Json to_json(const Eigen::MatrixXd& m);
Json estimate_set_to_json(const EstimateSet& set);

// Report skeleton shared by every command: tool identity, command echo,
// input fingerprint, seed, warnings, results.
Json report_skeleton(const std::string& command);

// Fixed-width numeric formatting for the human-readable tables.
std::string fixed(double value, int precision = 3);
std::string pad_left(const std::string& text, int width);

}  // namespace multitreat::cli
