// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <memory>
#include <variant>
#include <vector>

#include "wgmrf/mesh_graph.hpp"
#include "wgmrf/weights.hpp"

namespace wgmrf {

// Sparse lower-triangular Cholesky factor of a permuted SPD matrix,
//   P Q~ P^t = C C^t,
// with the fill-reducing permutation stored explicitly. Columns of C keep
// the diagonal entry first.
class CholeskyFactor {
 public:
  int dimension() const { return n_; }
  std::int64_t nonzeros() const { return static_cast<std::int64_t>(values_.size()); }

  // perm()[k] = original index placed at permuted position k.
  const std::vector<int>& perm() const { return perm_; }

  // Q~^{-1} v via the two triangular solves.
  Eigen::VectorXd solve(const Eigen::VectorXd& v) const;

  // P^t C^{-t} z: maps iid standard normals to a N(0, Q~^{-1}) draw.
  Eigen::VectorXd coloring_transform(const Eigen::VectorXd& z) const;

  // Dense inverse of the triangular factor (desk-scale only).
  Eigen::MatrixXd lower_inverse() const;

  // diag(Q~^{-1}), cached; computed from the triangular inverse.
  const Eigen::VectorXd& covariance_diagonal() const;

  // Dense reconstruction P^t C C^t P, for verification.
  Eigen::MatrixXd reconstruct() const;

  std::uint64_t fingerprint() const;

 private:
  friend CholeskyFactor factorize(const SparseSpdMatrix& q);

  int n_ = 0;
  std::vector<int> col_ptr_;  // CSC structure of C
  std::vector<int> row_idx_;
  std::vector<double> values_;
  std::vector<int> perm_;   // position -> original index
  std::vector<int> iperm_;  // original index -> position
  mutable std::shared_ptr<Eigen::VectorXd> cov_diag_;

  // y = C^{-1} x, x = C^{-t} y, in permuted coordinates.
  void solve_lower(Eigen::VectorXd& x) const;
  void solve_lower_transpose(Eigen::VectorXd& x) const;
};

class NotPositiveDefiniteError : public Error {
 public:
  NotPositiveDefiniteError(int pivot, const std::string& message)
      : Error(ErrorCode::not_positive_definite, message), pivot_index(pivot) {}
  int pivot_index;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(double residual, const std::string& message)
      : Error(ErrorCode::convergence_failure, message), best_residual(residual) {}
  double best_residual;
};

// Up-looking sparse Cholesky with an AMD fill-reducing ordering. Throws
// NotPositiveDefiniteError with the failing pivot index when a pivot is not
// strictly positive.
CholeskyFactor factorize(const SparseSpdMatrix& q);

// Covariance abstraction: products with Sigma may come from GMRF precision
// solves, an explicit dense matrix, or an empirical second-moment estimate.
class CovarianceOperator {
 public:
  static CovarianceOperator gmrf(CholeskyFactor factor);
  static CovarianceOperator dense(Eigen::MatrixXd sigma);
  static CovarianceOperator empirical(const FieldSamples& samples);

  int dimension() const { return dim_; }
  Eigen::VectorXd apply(const Eigen::VectorXd& v) const;

  // tr(W Sigma) for arbitrary nonnegative diagonal weights.
  double weighted_trace(const Eigen::VectorXd& w) const;

  // Non-null only for the gmrf variant.
  const CholeskyFactor* factor() const;

  Eigen::MatrixXd dense_sigma() const;  // desk-scale verification helper

 private:
  struct Gmrf {
    std::shared_ptr<CholeskyFactor> factor;
  };
  struct Dense {
    std::shared_ptr<Eigen::MatrixXd> sigma;
  };
  struct Empirical {
    std::shared_ptr<Eigen::MatrixXd> centered;  // n x m
  };

  CovarianceOperator() = default;
  std::variant<Gmrf, Dense, Empirical> impl_;
  int dim_ = 0;
};

enum class EigenWhich { largest_algebraic, smallest_algebraic };

struct EigenPair {
  double value = 0.0;
  Eigen::VectorXd vector;
  int iterations = 0;   // operator applications
  double residual = 0.0;
};

using LinearOperator = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

// Extreme eigenpair of a symmetric operator given only through its action,
// by Lanczos iteration with full reorthogonalization. The returned vector
// has unit norm and its largest-magnitude entry positive. max_iter < 0
// selects the default 10 * dim.
EigenPair extreme_eigenpair(const LinearOperator& apply, int dim,
                            EigenWhich which, double tol = 1e-8,
                            int max_iter = -1,
                            std::uint64_t seed = 0x9c0ffee123456789ULL);

enum class TraceMethod { triangular_inverse, per_column_solve };

// tr(W Sigma) = sum_j w_j (Q~^{-1})_jj from the factor, either via one
// triangular inverse or by per-column solves (exact, slower).
double weighted_trace(const CholeskyFactor& factor, const Eigen::VectorXd& w,
                      TraceMethod method = TraceMethod::triangular_inverse);

}  // namespace wgmrf
