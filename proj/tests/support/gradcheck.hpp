#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "arrqp/nn.hpp"

namespace arrqp::testing {

struct GradCheck {
  std::string name;
  double rel_error = 0.0;
};

// ||fd - analytic|| / (||fd|| + ||analytic||), central differences.
inline double relative_error(const Matrix& fd, const Matrix& analytic) {
  const double denom = fd.norm() + analytic.norm();
  if (denom < 1e-12) return 0.0;
  return (fd - analytic).norm() / denom;
}

inline Matrix numeric_gradient(Matrix& value, const std::function<double()>& loss, double step = 1e-6) {
  Matrix fd(value.rows(), value.cols());
  for (Eigen::Index k = 0; k < value.size(); ++k) {
    const double old = value.data()[k];
    const double h = step * std::max(1.0, std::abs(old));
    value.data()[k] = old + h;
    const double up = loss();
    value.data()[k] = old - h;
    const double down = loss();
    value.data()[k] = old;
    fd.data()[k] = (up - down) / (2.0 * h);
  }
  return fd;
}

// `analytic` must zero the gradients, run forward + backward, and leave dL/dparam in p->grad.
inline std::vector<GradCheck> check_parameters(const nn::ParameterList& params, const std::function<double()>& loss,
                                               const std::function<void()>& analytic) {
  analytic();
  std::vector<Matrix> grads;
  for (auto* p : params) grads.push_back(p->grad);
  std::vector<GradCheck> out;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const Matrix fd = numeric_gradient(params[k]->value, loss);
    out.push_back({params[k]->name, relative_error(fd, grads[k])});
  }
  return out;
}

inline double worst(const std::vector<GradCheck>& checks) {
  double w = 0.0;
  for (const auto& c : checks) w = std::max(w, c.rel_error);
  return w;
}

// Fixed random weights r: L = sum(r .* out), so dL/dout = r.
inline Matrix probe(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  return Matrix::NullaryExpr(rows, cols, [&] { return u(rng); });
}

}  // namespace arrqp::testing
