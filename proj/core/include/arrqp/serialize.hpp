#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "arrqp/common.hpp"
#include "arrqp/nn.hpp"

namespace arrqp {

/// Raw little-endian float64 row-major dump of a matrix (no header).
void write_matrix_binary(const std::filesystem::path& path, const Matrix& m);
Matrix read_matrix_binary(const std::filesystem::path& path, Eigen::Index rows, Eigen::Index cols);

/// Matrix as <stem>.bin plus <stem>.json sidecar holding {"rows","cols"} and caller metadata.
void save_matrix(const std::filesystem::path& stem, const Matrix& m, nlohmann::json meta = {});
Matrix load_matrix(const std::filesystem::path& stem, nlohmann::json* meta = nullptr);

/// Parameter set as <stem>.bin + <stem>.json manifest listing every tensor's name, shape and offset.
void save_parameters(const std::filesystem::path& stem, const std::vector<const nn::Parameter*>& params,
                     nlohmann::json meta = {});
/// Loads values into params by name; throws FormatError on any missing or mis-shaped tensor.
nlohmann::json load_parameters(const std::filesystem::path& stem, const nn::ParameterList& params);

nlohmann::json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace arrqp
