// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "wgmrf/basis_solver.hpp"

namespace wgmrf {

// Per-node mean squared error over exceedances. Nodes without exceedances
// carry NaN in per_node (absent, not zero); `aggregate` averages the defined
// entries.
struct ErrorReport {
  Eigen::VectorXd per_node;
  Eigen::VectorXi exceedance_counts;
  double aggregate = 0.0;
  double threshold = 0.0;

  int defined_count() const;
};

// Compression error of `basis` on raw (uncentered) test samples:
//   yhat = mean + B B^t (y - mean),
// per-node MSE over samples whose raw value at that node exceeds q. `mean`
// is the training-set mean.
ErrorReport compression_error(const FieldSamples& test, const Basis& basis,
                              double q, const Eigen::VectorXd& mean);

struct ErrorRate {
  double r_comp = 0.0;
  double contained_information = 0.0;  // 1 - r_comp
};

// Theoretical compression error rate
//   r_comp = tr(W (I - B B^t) Sigma (I - B B^t)) / tr(W Sigma),
// numerator matrix-free with p operator applications.
ErrorRate theoretical_error_rate(const CovarianceOperator& cov,
                                 const WeightVector& w, const Basis& basis);

// Analogue of compression_error for pipeline predictions.
ErrorReport prediction_error(const FieldSamples& test_high,
                             const FieldSamples& predicted, double q);

struct ScatterResult {
  std::vector<std::pair<double, double>> pairs;  // (observed, predicted)
  double correlation = 0.0;
};

// All (y, y~) pairs with y > q plus their Pearson correlation.
ScatterResult exceedance_scatter(const FieldSamples& test_high,
                                 const FieldSamples& predicted, double q);

// Symmetrized fourth-derivative tensor of the homogenized quartic objective
//   g(b) = -2 (b^t b)(b^t W Sigma b) + (b^t W b)(b^t Sigma b),
// dense, for verification at m <= 20.
class QuarticTensor {
 public:
  QuarticTensor(Eigen::MatrixXd sigma, Eigen::VectorXd w);

  int dimension() const { return m_; }
  double operator()(int i, int j, int k, int l) const {
    return values_[((static_cast<std::size_t>(i) * m_ + j) * m_ + k) * m_ + l];
  }

  // T x1 b x2 b x3 b x4 b; equals 24 g(b) for the homogeneous quartic.
  double contract(const Eigen::VectorXd& b) const;
  double objective(const Eigen::VectorXd& b) const;  // g(b)

 private:
  int m_;
  Eigen::MatrixXd sigma_;
  Eigen::VectorXd w_;
  std::vector<double> values_;
};

QuarticTensor build_quartic_tensor(const Eigen::MatrixXd& sigma,
                                   const WeightVector& w);

}  // namespace wgmrf
