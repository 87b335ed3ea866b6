#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "arrqp/common.hpp"

namespace arrqp {

/// Mean absolute error over paired values. Throws UndefinedMetricError when empty.
double mae(std::span<const double> actual, std::span<const double> predicted);
double rmse(std::span<const double> actual, std::span<const double> predicted);

/// Masked variants: only cells with mask != 0 count.
double mae(const Matrix& actual, const Matrix& predicted, const Matrix& mask);
double rmse(const Matrix& actual, const Matrix& predicted, const Matrix& mask);

/// ((p2 - p1) / p2) * 100: the improvement of a model scoring p1 over one scoring p2.
double improvement(double p1, double p2);

struct ConfidenceInterval {
  int level = 95;
  double mean = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

/// z value for 90, 95 or 99 percent.
double z_value(int level);
/// mean +- z * s / sqrt(k) with the sample standard deviation s. Needs k >= 2.
ConfidenceInterval confidence_interval(std::span<const double> runs, int level);

struct MetricReport {
  double mae = 0.0;
  double rmse = 0.0;
  std::size_t n_pairs = 0;
};

MetricReport evaluate_pairs(std::span<const double> actual, std::span<const double> predicted);

/// Aggregate over k repeated runs: means plus confidence intervals at 90/95/99.
struct RepeatedMetrics {
  std::vector<MetricReport> runs;
  double mean_mae = 0.0;
  double mean_rmse = 0.0;
  std::vector<ConfidenceInterval> mae_ci;
  std::vector<ConfidenceInterval> rmse_ci;
};

RepeatedMetrics aggregate_runs(const std::vector<MetricReport>& runs);

nlohmann::json to_json(const MetricReport& r);
nlohmann::json to_json(const ConfidenceInterval& ci);
nlohmann::json to_json(const RepeatedMetrics& r);

/// Plain-text table: one MAE/RMSE row per run plus mean and CI rows.
std::string format_table(const std::string& label, const RepeatedMetrics& r);

}  // namespace arrqp
