#include "arrqp/eval.hpp"

#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

namespace arrqp {

namespace {

void check_pairs(std::span<const double> actual, std::span<const double> predicted) {
  if (actual.size() != predicted.size()) throw DimensionError("actual and predicted lengths differ");
  if (actual.empty()) throw UndefinedMetricError("metric over an empty test set");
}

}  // namespace

double mae(std::span<const double> actual, std::span<const double> predicted) {
  check_pairs(actual, predicted);
  double sum = 0.0;
  for (std::size_t k = 0; k < actual.size(); ++k) sum += std::abs(actual[k] - predicted[k]);
  return sum / static_cast<double>(actual.size());
}

double rmse(std::span<const double> actual, std::span<const double> predicted) {
  check_pairs(actual, predicted);
  double sum = 0.0;
  for (std::size_t k = 0; k < actual.size(); ++k) sum += (actual[k] - predicted[k]) * (actual[k] - predicted[k]);
  return std::sqrt(sum / static_cast<double>(actual.size()));
}

namespace {

void masked_pairs(const Matrix& actual, const Matrix& predicted, const Matrix& mask, std::vector<double>& a,
                  std::vector<double>& p) {
  if (actual.rows() != predicted.rows() || actual.cols() != predicted.cols() || actual.rows() != mask.rows() ||
      actual.cols() != mask.cols()) {
    throw DimensionError("actual, predicted and mask shapes differ");
  }
  for (Eigen::Index k = 0; k < mask.size(); ++k) {
    if (mask.data()[k] != 0.0) {
      a.push_back(actual.data()[k]);
      p.push_back(predicted.data()[k]);
    }
  }
}

}  // namespace

double mae(const Matrix& actual, const Matrix& predicted, const Matrix& mask) {
  std::vector<double> a, p;
  masked_pairs(actual, predicted, mask, a, p);
  return mae(a, p);
}

double rmse(const Matrix& actual, const Matrix& predicted, const Matrix& mask) {
  std::vector<double> a, p;
  masked_pairs(actual, predicted, mask, a, p);
  return rmse(a, p);
}

double improvement(double p1, double p2) {
  if (p2 == 0.0) throw UndefinedMetricError("improvement against a zero baseline");
  return (p2 - p1) / p2 * 100.0;
}

double z_value(int level) {
  switch (level) {
    case 90: return 1.645;
    case 95: return 1.960;
    case 99: return 2.576;
    default: throw std::invalid_argument("confidence level must be 90, 95 or 99");
  }
}

ConfidenceInterval confidence_interval(std::span<const double> runs, int level) {
  const double z = z_value(level);
  if (runs.size() < 2) throw UndefinedMetricError("confidence interval needs at least 2 runs");
  const double k = static_cast<double>(runs.size());
  const double mean = std::accumulate(runs.begin(), runs.end(), 0.0) / k;
  double ss = 0.0;
  for (double x : runs) ss += (x - mean) * (x - mean);
  const double half = z * std::sqrt(ss / (k - 1.0)) / std::sqrt(k);
  return {level, mean, mean - half, mean + half};
}

MetricReport evaluate_pairs(std::span<const double> actual, std::span<const double> predicted) {
  return {mae(actual, predicted), rmse(actual, predicted), actual.size()};
}

RepeatedMetrics aggregate_runs(const std::vector<MetricReport>& runs) {
  RepeatedMetrics r;
  r.runs = runs;
  if (runs.empty()) return r;
  std::vector<double> maes, rmses;
  for (const auto& m : runs) {
    maes.push_back(m.mae);
    rmses.push_back(m.rmse);
  }
  r.mean_mae = std::accumulate(maes.begin(), maes.end(), 0.0) / static_cast<double>(maes.size());
  r.mean_rmse = std::accumulate(rmses.begin(), rmses.end(), 0.0) / static_cast<double>(rmses.size());
  if (runs.size() >= 2) {
    for (int level : {90, 95, 99}) {
      r.mae_ci.push_back(confidence_interval(maes, level));
      r.rmse_ci.push_back(confidence_interval(rmses, level));
    }
  }
  return r;
}

nlohmann::json to_json(const MetricReport& r) {
  return {{"mae", r.mae}, {"rmse", r.rmse}, {"n_pairs", r.n_pairs}};
}

nlohmann::json to_json(const ConfidenceInterval& ci) {
  return {{"level", ci.level}, {"mean", ci.mean}, {"lower", ci.lower}, {"upper", ci.upper}};
}

nlohmann::json to_json(const RepeatedMetrics& r) {
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& m : r.runs) runs.push_back(to_json(m));
  nlohmann::json mae_ci = nlohmann::json::array(), rmse_ci = nlohmann::json::array();
  for (const auto& c : r.mae_ci) mae_ci.push_back(to_json(c));
  for (const auto& c : r.rmse_ci) rmse_ci.push_back(to_json(c));
  return {{"runs", runs},
          {"mean_mae", r.mean_mae},
          {"mean_rmse", r.mean_rmse},
          {"mae_ci", mae_ci},
          {"rmse_ci", rmse_ci},
          {"ci_method", "normal approximation, sample std"}};
}

std::string format_table(const std::string& label, const RepeatedMetrics& r) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(4);
  out << label << '\n' << std::left << std::setw(12) << "run" << std::setw(12) << "MAE" << "RMSE\n";
  for (std::size_t k = 0; k < r.runs.size(); ++k)
    out << std::setw(12) << k + 1 << std::setw(12) << r.runs[k].mae << r.runs[k].rmse << '\n';
  out << std::setw(12) << "mean" << std::setw(12) << r.mean_mae << r.mean_rmse << '\n';
  for (std::size_t k = 0; k < r.mae_ci.size(); ++k) {
    std::ostringstream lvl;
    lvl << "CI " << r.mae_ci[k].level << '%';
    std::ostringstream m, s;
    m << std::fixed << std::setprecision(4) << '(' << r.mae_ci[k].lower << ", " << r.mae_ci[k].upper << ')';
    s << std::fixed << std::setprecision(4) << '(' << r.rmse_ci[k].lower << ", " << r.rmse_ci[k].upper << ')';
    out << std::setw(12) << lvl.str() << std::setw(22) << m.str() << s.str() << '\n';
  }
  return out.str();
}

}  // namespace arrqp
