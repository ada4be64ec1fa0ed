// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <string>

#include "wgmrf/basis_solver.hpp"

namespace wgmrf {

// Two-step low-to-high fidelity predictor:
//   x -> u_x = Bx^t (x - mean_x) -> u_y = A u_x + c -> mean_y + By u_y.
struct PipelineModel {
  Basis low_basis;   // p_x columns on the low-fidelity graph
  Basis high_basis;  // p_y columns on the high-fidelity graph
  Eigen::MatrixXd coefficient_map;  // p_y x p_x
  Eigen::VectorXd intercept;        // p_y
  double ridge_penalty = 0.0;
  Eigen::VectorXd mean_low;
  Eigen::VectorXd mean_high;
};

// Leading-p eigenvectors of Sigma by the matrix-free eigensolver with
// deflation; the equal-weights special case of the basis computation.
Basis eigen_basis(const CovarianceOperator& cov, int p, double tol = 1e-8,
                  int max_iter = -1, std::uint64_t seed = 0x5eedba5e0002ULL);

// u = B^t (value - mean), one row per sample.
Eigen::MatrixXd encode(const FieldSamples& samples, const Basis& basis,
                       const Eigen::VectorXd& mean);

// value = mean + B u, one row per coefficient row.
FieldSamples decode(const Eigen::MatrixXd& coeffs, const Basis& basis,
                    const Eigen::VectorXd& mean,
                    const std::vector<std::string>& sample_ids = {});

struct RidgePenalty {
  bool select_by_gcv = false;
  double value = 0.0;

  static RidgePenalty fixed(double lambda);
  static RidgePenalty gcv() { return RidgePenalty{true, 0.0}; }
};

// Fits the coefficient map by ridge-regularized least squares per output
// coordinate (shared penalty). Samples are aligned by sample_id, both sides
// centered with their training means. With gcv selection the penalty
// minimizes the ridge-GCV score over the grid 10^-6 .. 10^2.
PipelineModel fit_pipeline(const FieldSamples& train_low,
                           const FieldSamples& train_high,
                           const Basis& low_basis, const Basis& high_basis,
                           RidgePenalty ridge);

FieldSamples predict(const PipelineModel& model, const FieldSamples& low);

}  // namespace wgmrf
