// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "wgmrf/sparse_la.hpp"
#include "wgmrf/weights.hpp"

namespace wgmrf {

struct SolverOptions {
  double grad_tol = 1e-8;      // relative to max(1, |risk|)
  int max_iter = 1000;         // quasi-Newton iterations per vector
  double start_scale = 1e-3;   // b_start = scale * v_max
  int lbfgs_memory = 10;
  double wolfe_c1 = 1e-4;
  double wolfe_c2 = 0.9;
  int max_line_search = 60;
  bool newton = false;         // Hessian-vector products inside CG instead of L-BFGS
  double eigen_tol = 1e-8;
  int eigen_max_iter = -1;     // default 10 * m
  std::uint64_t seed = 0x77a1ba5e0001ULL;
};

struct VectorDiagnostics {
  double risk = 0.0;        // objective at the returned unit vector, constant off
  double grad_norm = 0.0;   // optimizer gradient norm at termination
  int iterations = 0;
  double wall_time_s = 0.0;
  double start_eigenvalue = 0.0;  // top eigenvalue of the seeding operator
  int eigen_iterations = 0;
};

// Ordered orthonormal basis with per-vector solver diagnostics.
struct Basis {
  Eigen::MatrixXd vectors;  // m x p, orthonormal columns
  std::vector<VectorDiagnostics> diagnostics;
  std::string weights_fingerprint;

  int dimension() const { return static_cast<int>(vectors.rows()); }
  int size() const { return static_cast<int>(vectors.cols()); }

  // max |B^t B - I| over entries.
  double orthonormality_defect() const;
  void validate(double tol = 1e-8) const;
};

// Weighted compression risk of the residual after projecting out `previous`:
//   R_p(b) = tr(W Sigma_p) - 2 b^t W Sigma_p b + (b^t W b)(b^t Sigma_p b),
// with Sigma_p = (I - B_p B_p^t) Sigma (I - B_p B_p^t). All Sigma_p products
// are matrix-free (project, apply, project).
class DeflatedObjective {
 public:
  DeflatedObjective(CovarianceOperator cov, const WeightVector& w,
                    Eigen::MatrixXd previous);

  int dimension() const { return cov_.dimension(); }
  int deflation_order() const { return static_cast<int>(previous_.cols()); }
  const CovarianceOperator& covariance() const { return cov_; }
  const Eigen::VectorXd& weights() const { return w_; }
  const Eigen::MatrixXd& previous() const { return previous_; }

  Eigen::VectorXd project(const Eigen::VectorXd& v) const;
  Eigen::VectorXd sigma_p(const Eigen::VectorXd& v) const;

  double risk(const Eigen::VectorXd& b, bool include_constant = false) const;
  Eigen::VectorXd gradient(const Eigen::VectorXd& b) const;
  // Both value and gradient from two operator applications.
  std::pair<double, Eigen::VectorXd> value_and_gradient(const Eigen::VectorXd& b) const;
  Eigen::VectorXd hessian_vector(const Eigen::VectorXd& b, const Eigen::VectorXd& v) const;

  // tr(W Sigma_p), cached after first use.
  double constant_term() const;

  // scale times the unit top eigenvector of P (W Sigma_p + Sigma_p W) P,
  // the most negative curvature direction of the risk at the origin.
  Eigen::VectorXd starting_point(double scale, double tol = 1e-8,
                                 int max_iter = -1, std::uint64_t seed = 1,
                                 EigenPair* info = nullptr) const;

 private:
  CovarianceOperator cov_;
  Eigen::VectorXd w_;
  Eigen::MatrixXd previous_;  // m x p
  mutable std::optional<double> constant_;
};

class LineSearchError : public Error {
 public:
  LineSearchError(Eigen::VectorXd iterate, const std::string& message)
      : Error(ErrorCode::line_search_failure, message),
        last_iterate(std::move(iterate)) {}
  Eigen::VectorXd last_iterate;
};

// One step of the iterative heuristic: seed at scale * v_max, run the
// quasi-Newton descent on the unconstrained deflated risk, project onto the
// orthogonal complement of the previous vectors, normalize, canonicalize.
std::pair<Eigen::VectorXd, VectorDiagnostics> solve_next_vector(
    const DeflatedObjective& obj, const SolverOptions& opts = {});

class BasisComputationError : public Error {
 public:
  BasisComputationError(int index, Basis partial, const std::string& message)
      : Error(ErrorCode::convergence_failure, message),
        failed_index(index),
        partial_basis(std::move(partial)) {}
  int failed_index;
  Basis partial_basis;  // vectors computed before the failure
};

// p rounds of solve_next_vector with deflation. `resume` extends an existing
// basis in place of starting from scratch.
Basis compute_basis(const CovarianceOperator& cov, const WeightVector& w, int p,
                    const SolverOptions& opts = {},
                    const Basis* resume = nullptr);

// Residual weighted risk tr(W (I - B B^t) Sigma (I - B B^t)), matrix-free.
double residual_weighted_risk(const CovarianceOperator& cov,
                              const WeightVector& w, const Basis& basis);

}  // namespace wgmrf
