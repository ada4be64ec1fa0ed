// SPDX-License-Identifier: Apache-2.0
#include "wgmrf/evaluation.hpp"

#include <cmath>
#include <limits>

namespace wgmrf {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Shared core: per-node MSE of (observed - approximated) over entries where
// the observed value exceeds q.
ErrorReport exceedance_mse(const Eigen::MatrixXd& observed,
                           const Eigen::MatrixXd& approximated, double q) {
  int n = static_cast<int>(observed.rows());
  int m = static_cast<int>(observed.cols());
  ErrorReport report;
  report.threshold = q;
  report.per_node = Eigen::VectorXd::Constant(m, kNaN);
  report.exceedance_counts = Eigen::VectorXi::Zero(m);
  double total = 0.0;
  int defined = 0;
  for (int j = 0; j < m; ++j) {
    double acc = 0.0;
    int count = 0;
    for (int k = 0; k < n; ++k) {
      if (observed(k, j) > q) {
        double d = observed(k, j) - approximated(k, j);
        acc += d * d;
        ++count;
      }
    }
    report.exceedance_counts[j] = count;
    if (count > 0) {
      report.per_node[j] = acc / count;
      total += report.per_node[j];
      ++defined;
    }
  }
  report.aggregate = defined > 0 ? total / defined : kNaN;
  return report;
}

}  // namespace

int ErrorReport::defined_count() const {
  return static_cast<int>((exceedance_counts.array() > 0).count());
}

ErrorReport compression_error(const FieldSamples& test, const Basis& basis,
                              double q, const Eigen::VectorXd& mean) {
  test.validate();
  if (test.mean)
    throw Error(ErrorCode::invalid_argument,
                "compression error expects raw (uncentered) test samples");
  if (test.node_count() != basis.dimension() || mean.size() != basis.dimension())
    throw Error(ErrorCode::dimension_mismatch, "sample/basis/mean dimensions disagree");
  Eigen::MatrixXd centered = test.values.rowwise() - mean.transpose();
  Eigen::MatrixXd reconstructed;
  if (basis.size() > 0) {
    reconstructed = (centered * basis.vectors) * basis.vectors.transpose();
  } else {
    reconstructed = Eigen::MatrixXd::Zero(centered.rows(), centered.cols());
  }
  reconstructed.rowwise() += mean.transpose();
  return exceedance_mse(test.values, reconstructed, q);
}

ErrorRate theoretical_error_rate(const CovarianceOperator& cov,
                                 const WeightVector& w, const Basis& basis) {
  w.validate();
  basis.validate();
  double denom = cov.weighted_trace(w.values);
  if (!(denom > 0.0))
    throw Error(ErrorCode::invalid_argument,
                "tr(W Sigma) must be positive for a valid covariance and weights");
  DeflatedObjective obj(cov, w, basis.vectors);
  double numer = obj.constant_term();
  ErrorRate rate;
  rate.r_comp = numer / denom;
  // Residual rounding can push the ratio a hair outside [0, 1].
  rate.r_comp = std::min(std::max(rate.r_comp, 0.0), 1.0);
  rate.contained_information = 1.0 - rate.r_comp;
  return rate;
}

ErrorReport prediction_error(const FieldSamples& test_high,
                             const FieldSamples& predicted, double q) {
  test_high.validate();
  predicted.validate();
  if (test_high.sample_count() != predicted.sample_count())
    throw Error(ErrorCode::sample_mismatch,
                "test and predicted sample counts differ");
  if (test_high.node_count() != predicted.node_count())
    throw Error(ErrorCode::dimension_mismatch, "test and predicted widths differ");
  return exceedance_mse(test_high.values, predicted.values, q);
}

ScatterResult exceedance_scatter(const FieldSamples& test_high,
                                 const FieldSamples& predicted, double q) {
  test_high.validate();
  predicted.validate();
  if (test_high.sample_count() != predicted.sample_count())
    throw Error(ErrorCode::sample_mismatch,
                "test and predicted sample counts differ");
  if (test_high.node_count() != predicted.node_count())
    throw Error(ErrorCode::dimension_mismatch, "test and predicted widths differ");
  ScatterResult result;
  for (int k = 0; k < test_high.sample_count(); ++k)
    for (int j = 0; j < test_high.node_count(); ++j)
      if (test_high.values(k, j) > q)
        result.pairs.emplace_back(test_high.values(k, j), predicted.values(k, j));
  auto npairs = result.pairs.size();
  if (npairs < 2)
    throw Error(ErrorCode::correlation_undefined,
                "fewer than two exceedance pairs");
  double mean_y = 0.0, mean_p = 0.0;
  for (auto [y, p] : result.pairs) {
    mean_y += y;
    mean_p += p;
  }
  mean_y /= npairs;
  mean_p /= npairs;
  double syy = 0.0, spp = 0.0, syp = 0.0;
  for (auto [y, p] : result.pairs) {
    syy += (y - mean_y) * (y - mean_y);
    spp += (p - mean_p) * (p - mean_p);
    syp += (y - mean_y) * (p - mean_p);
  }
  if (syy <= 0.0 || spp <= 0.0)
    throw Error(ErrorCode::correlation_undefined,
                "zero variance among exceedance pairs");
  result.correlation = syp / std::sqrt(syy * spp);
  return result;
}

QuarticTensor::QuarticTensor(Eigen::MatrixXd sigma, Eigen::VectorXd w)
    : m_(static_cast<int>(w.size())), sigma_(std::move(sigma)), w_(std::move(w)) {
  // M = (W Sigma + Sigma W) / 2, the symmetric form of b^t W Sigma b.
  Eigen::MatrixXd ws = w_.asDiagonal() * sigma_;
  Eigen::MatrixXd msym = 0.5 * (ws + ws.transpose());
  Eigen::MatrixXd wdiag = Eigen::MatrixXd(w_.asDiagonal());
  Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(m_, m_);

  values_.assign(static_cast<std::size_t>(m_) * m_ * m_ * m_, 0.0);
  // Fourth derivative of a product of quadratic forms (b^t A b)(b^t B b):
  // 4 * sum over the three pairings of {i,j,k,l}, each in both (A, B)
  // assignments. g has A = I, B = M with coefficient -2, plus A = W,
  // B = Sigma.
  auto pair_sum = [](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, int i,
                     int j, int k, int l) {
    return a(i, j) * b(k, l) + a(i, k) * b(j, l) + a(i, l) * b(j, k) +
           b(i, j) * a(k, l) + b(i, k) * a(j, l) + b(i, l) * a(j, k);
  };
  std::size_t idx = 0;
  for (int i = 0; i < m_; ++i)
    for (int j = 0; j < m_; ++j)
      for (int k = 0; k < m_; ++k)
        for (int l = 0; l < m_; ++l, ++idx)
          values_[idx] = -8.0 * pair_sum(eye, msym, i, j, k, l) +
                         4.0 * pair_sum(wdiag, sigma_, i, j, k, l);
}

double QuarticTensor::contract(const Eigen::VectorXd& b) const {
  if (b.size() != m_)
    throw Error(ErrorCode::dimension_mismatch, "vector length does not match tensor");
  double total = 0.0;
  std::size_t idx = 0;
  for (int i = 0; i < m_; ++i)
    for (int j = 0; j < m_; ++j)
      for (int k = 0; k < m_; ++k)
        for (int l = 0; l < m_; ++l, ++idx)
          total += values_[idx] * b[i] * b[j] * b[k] * b[l];
  return total;
}

double QuarticTensor::objective(const Eigen::VectorXd& b) const {
  if (b.size() != m_)
    throw Error(ErrorCode::dimension_mismatch, "vector length does not match tensor");
  Eigen::VectorXd sb = sigma_ * b;
  double bb = b.squaredNorm();
  double bwsb = b.cwiseProduct(w_).dot(sb);
  double bwb = b.cwiseProduct(w_).dot(b);
  double bsb = b.dot(sb);
  return -2.0 * bb * bwsb + bwb * bsb;
}

QuarticTensor build_quartic_tensor(const Eigen::MatrixXd& sigma,
                                   const WeightVector& w) {
  w.validate();
  if (sigma.rows() != sigma.cols() || sigma.rows() != w.values.size())
    throw Error(ErrorCode::dimension_mismatch, "covariance/weights dimensions disagree");
  if (w.values.size() > 20)
    throw Error(ErrorCode::dimension_cap,
                "dense fourth-order tensor is capped at dimension 20");
  return QuarticTensor(sigma, w.values);
}

}  // namespace wgmrf
