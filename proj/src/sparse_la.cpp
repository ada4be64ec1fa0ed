// SPDX-License-Identifier: Apache-2.0
#include "wgmrf/sparse_la.hpp"

#include <Eigen/OrderingMethods>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <optional>

#include "wgmrf/rng.hpp"

namespace wgmrf {

namespace {

// Elimination tree of an upper-triangular CSC pattern (Davis, Direct
// Methods for Sparse Linear Systems).
std::vector<int> elimination_tree(const Eigen::SparseMatrix<double>& upper) {
  int n = static_cast<int>(upper.cols());
  std::vector<int> parent(n, -1), ancestor(n, -1);
  for (int k = 0; k < n; ++k) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(upper, k); it; ++it) {
      int i = static_cast<int>(it.row());
      while (i != -1 && i < k) {
        int next = ancestor[i];
        ancestor[i] = k;
        if (next == -1) parent[i] = k;
        i = next;
      }
    }
  }
  return parent;
}

// Nonzero pattern of row k of the factor, in topological order; returns the
// start offset into s (pattern occupies s[top..n-1]).
int ereach(const Eigen::SparseMatrix<double>& upper, int k,
           const std::vector<int>& parent, std::vector<int>& visit,
           std::vector<int>& stack, std::vector<int>& s) {
  int n = static_cast<int>(upper.cols());
  int top = n;
  visit[k] = k;
  for (Eigen::SparseMatrix<double>::InnerIterator it(upper, k); it; ++it) {
    int i = static_cast<int>(it.row());
    if (i >= k) continue;
    int len = 0;
    while (visit[i] != k) {
      stack[len++] = i;
      visit[i] = k;
      i = parent[i];
    }
    while (len > 0) s[--top] = stack[--len];
  }
  return top;
}

}  // namespace

CholeskyFactor factorize(const SparseSpdMatrix& q) {
  const int n = q.dimension;
  if (n <= 0 || q.upper.rows() != n || q.upper.cols() != n)
    throw Error(ErrorCode::invalid_argument, "invalid matrix dimensions");

  // Fill-reducing permutation (approximate minimum degree on the full
  // symmetric pattern).
  Eigen::SparseMatrix<double> full =
      q.upper.selfadjointView<Eigen::Upper>();
  Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> pm;
  Eigen::AMDOrdering<int>()(full, pm);

  CholeskyFactor f;
  f.n_ = n;
  f.perm_.resize(n);
  f.iperm_.resize(n);
  // pm.indices()[k] = original index eliminated at position k.
  for (int k = 0; k < n; ++k) {
    f.perm_[k] = pm.indices()[k];
    f.iperm_[pm.indices()[k]] = k;
  }

  // Permuted matrix Ap(k, l) = A(perm[k], perm[l]), upper triangle.
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(q.upper.nonZeros());
  for (int col = 0; col < n; ++col)
    for (Eigen::SparseMatrix<double>::InnerIterator it(q.upper, col); it; ++it) {
      int k = f.iperm_[it.row()];
      int l = f.iperm_[col];
      trips.emplace_back(std::min(k, l), std::max(k, l), it.value());
    }
  Eigen::SparseMatrix<double> ap(n, n);
  ap.setFromTriplets(trips.begin(), trips.end());
  ap.makeCompressed();

  auto parent = elimination_tree(ap);

  // Symbolic pass: column counts of the factor.
  std::vector<int> visit(n, -1), stack(n), s(n);
  std::vector<int> count(n, 1);  // diagonal
  for (int k = 0; k < n; ++k) {
    int top = ereach(ap, k, parent, visit, stack, s);
    for (int t = top; t < n; ++t) ++count[s[t]];
  }
  f.col_ptr_.assign(n + 1, 0);
  for (int j = 0; j < n; ++j) f.col_ptr_[j + 1] = f.col_ptr_[j] + count[j];
  f.row_idx_.resize(f.col_ptr_[n]);
  f.values_.resize(f.col_ptr_[n]);

  double max_diag = 0.0;
  for (int k = 0; k < n; ++k) max_diag = std::max(max_diag, ap.coeff(k, k));
  const double pivot_tol =
      static_cast<double>(n) * std::numeric_limits<double>::epsilon() * max_diag;

  // Numeric up-looking pass: row k of the factor is the sparse triangular
  // solve of the leading principal factor against column k of Ap.
  std::fill(visit.begin(), visit.end(), -1);
  std::vector<int> fill(f.col_ptr_.begin(), f.col_ptr_.end() - 1);
  std::vector<double> x(n, 0.0);
  for (int k = 0; k < n; ++k) {
    int top = ereach(ap, k, parent, visit, stack, s);
    double d = 0.0;
    for (Eigen::SparseMatrix<double>::InnerIterator it(ap, k); it; ++it) {
      if (it.row() < k)
        x[it.row()] = it.value();
      else if (it.row() == k)
        d = it.value();
    }
    for (int t = top; t < n; ++t) {
      int j = s[t];
      double lkj = x[j] / f.values_[f.col_ptr_[j]];
      x[j] = 0.0;
      for (int p = f.col_ptr_[j] + 1; p < fill[j]; ++p)
        x[f.row_idx_[p]] -= f.values_[p] * lkj;
      d -= lkj * lkj;
      int p = fill[j]++;
      f.row_idx_[p] = k;
      f.values_[p] = lkj;
    }
    if (!(d > pivot_tol))
      throw NotPositiveDefiniteError(
          f.perm_[k], "matrix is not positive definite: pivot " +
                          std::to_string(f.perm_[k]) + " (elimination step " +
                          std::to_string(k) + ") is not strictly positive");
    int p = fill[k]++;
    f.row_idx_[p] = k;
    f.values_[p] = std::sqrt(d);
  }
  return f;
}

void CholeskyFactor::solve_lower(Eigen::VectorXd& x) const {
  for (int j = 0; j < n_; ++j) {
    double xj = x[j] / values_[col_ptr_[j]];
    x[j] = xj;
    for (int p = col_ptr_[j] + 1; p < col_ptr_[j + 1]; ++p)
      x[row_idx_[p]] -= values_[p] * xj;
  }
}

void CholeskyFactor::solve_lower_transpose(Eigen::VectorXd& x) const {
  for (int j = n_ - 1; j >= 0; --j) {
    double acc = x[j];
    for (int p = col_ptr_[j] + 1; p < col_ptr_[j + 1]; ++p)
      acc -= values_[p] * x[row_idx_[p]];
    x[j] = acc / values_[col_ptr_[j]];
  }
}

Eigen::VectorXd CholeskyFactor::solve(const Eigen::VectorXd& v) const {
  if (v.size() != n_)
    throw Error(ErrorCode::dimension_mismatch, "vector length does not match factor");
  Eigen::VectorXd t(n_);
  for (int k = 0; k < n_; ++k) t[k] = v[perm_[k]];
  solve_lower(t);
  solve_lower_transpose(t);
  Eigen::VectorXd out(n_);
  for (int k = 0; k < n_; ++k) out[perm_[k]] = t[k];
  return out;
}

Eigen::VectorXd CholeskyFactor::coloring_transform(const Eigen::VectorXd& z) const {
  if (z.size() != n_)
    throw Error(ErrorCode::dimension_mismatch, "vector length does not match factor");
  Eigen::VectorXd t = z;
  solve_lower_transpose(t);
  Eigen::VectorXd out(n_);
  for (int k = 0; k < n_; ++k) out[perm_[k]] = t[k];
  return out;
}

Eigen::MatrixXd CholeskyFactor::lower_inverse() const {
  Eigen::MatrixXd inv = Eigen::MatrixXd::Identity(n_, n_);
  for (int col = 0; col < n_; ++col) {
    // forward solve against e_col touches rows >= col only
    for (int j = col; j < n_; ++j) {
      double xj = inv(j, col) / values_[col_ptr_[j]];
      inv(j, col) = xj;
      if (xj != 0.0)
        for (int p = col_ptr_[j] + 1; p < col_ptr_[j + 1]; ++p)
          inv(row_idx_[p], col) -= values_[p] * xj;
    }
  }
  return inv;
}

const Eigen::VectorXd& CholeskyFactor::covariance_diagonal() const {
  if (!cov_diag_) {
    Eigen::MatrixXd inv = lower_inverse();
    auto diag = std::make_shared<Eigen::VectorXd>(n_);
    for (int j = 0; j < n_; ++j)
      (*diag)[j] = inv.col(iperm_[j]).squaredNorm();
    cov_diag_ = diag;
  }
  return *cov_diag_;
}

Eigen::MatrixXd CholeskyFactor::reconstruct() const {
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n_, n_);
  for (int j = 0; j < n_; ++j)
    for (int p = col_ptr_[j]; p < col_ptr_[j + 1]; ++p)
      l(row_idx_[p], j) = values_[p];
  Eigen::MatrixXd ap = l * l.transpose();
  Eigen::MatrixXd a(n_, n_);
  for (int k = 0; k < n_; ++k)
    for (int l2 = 0; l2 < n_; ++l2) a(perm_[k], perm_[l2]) = ap(k, l2);
  return a;
}

std::uint64_t CholeskyFactor::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int k = 0; k < 8; ++k) {
      h ^= (v >> (8 * k)) & 0xffULL;
      h *= 0x100000001b3ULL;
    }
  };
  mix(static_cast<std::uint64_t>(n_));
  mix(static_cast<std::uint64_t>(values_.size()));
  for (int p : perm_) mix(static_cast<std::uint64_t>(p));
  for (double v : values_) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    mix(bits);
  }
  return h;
}

CovarianceOperator CovarianceOperator::gmrf(CholeskyFactor factor) {
  CovarianceOperator op;
  op.dim_ = factor.dimension();
  op.impl_ = Gmrf{std::make_shared<CholeskyFactor>(std::move(factor))};
  return op;
}

CovarianceOperator CovarianceOperator::dense(Eigen::MatrixXd sigma) {
  if (sigma.rows() != sigma.cols())
    throw Error(ErrorCode::invalid_argument, "dense covariance must be square");
  double asym = (sigma - sigma.transpose()).cwiseAbs().maxCoeff();
  double scale = std::max(1.0, sigma.cwiseAbs().maxCoeff());
  if (asym > 1e-10 * scale)
    throw Error(ErrorCode::invalid_argument, "dense covariance must be symmetric");
  CovarianceOperator op;
  op.dim_ = static_cast<int>(sigma.rows());
  op.impl_ = Dense{std::make_shared<Eigen::MatrixXd>(std::move(sigma))};
  return op;
}

CovarianceOperator CovarianceOperator::empirical(const FieldSamples& samples) {
  samples.validate();
  if (samples.sample_count() < 2)
    throw Error(ErrorCode::insufficient_data,
                "empirical covariance needs at least two samples");
  FieldSamples centered = samples.mean ? samples : samples.centered();
  CovarianceOperator op;
  op.dim_ = centered.node_count();
  op.impl_ =
      Empirical{std::make_shared<Eigen::MatrixXd>(std::move(centered.values))};
  return op;
}

Eigen::VectorXd CovarianceOperator::apply(const Eigen::VectorXd& v) const {
  if (v.size() != dim_)
    throw Error(ErrorCode::dimension_mismatch, "vector length does not match operator");
  if (auto* g = std::get_if<Gmrf>(&impl_)) return g->factor->solve(v);
  if (auto* d = std::get_if<Dense>(&impl_))
    return d->sigma->selfadjointView<Eigen::Lower>() * v;
  const auto& xc = *std::get<Empirical>(impl_).centered;
  return xc.transpose() * (xc * v) / static_cast<double>(xc.rows() - 1);
}

double CovarianceOperator::weighted_trace(const Eigen::VectorXd& w) const {
  if (w.size() != dim_)
    throw Error(ErrorCode::dimension_mismatch, "weight length does not match operator");
  if (auto* g = std::get_if<Gmrf>(&impl_))
    return wgmrf::weighted_trace(*g->factor, w);
  if (auto* d = std::get_if<Dense>(&impl_)) return w.dot(d->sigma->diagonal());
  const auto& xc = *std::get<Empirical>(impl_).centered;
  Eigen::VectorXd diag =
      xc.colwise().squaredNorm().transpose() / static_cast<double>(xc.rows() - 1);
  return w.dot(diag);
}

const CholeskyFactor* CovarianceOperator::factor() const {
  if (auto* g = std::get_if<Gmrf>(&impl_)) return g->factor.get();
  return nullptr;
}

Eigen::MatrixXd CovarianceOperator::dense_sigma() const {
  Eigen::MatrixXd out(dim_, dim_);
  for (int j = 0; j < dim_; ++j)
    out.col(j) = apply(Eigen::VectorXd::Unit(dim_, j));
  return 0.5 * (out + out.transpose());
}

namespace {

void canonicalize_sign(Eigen::VectorXd& v) {
  int imax = 0;
  double best = std::abs(v[0]);
  for (int i = 1; i < v.size(); ++i) {
    double a = std::abs(v[i]);
    if (a > best) {
      best = a;
      imax = i;
    }
  }
  if (v[imax] < 0.0) v = -v;
}

}  // namespace

EigenPair extreme_eigenpair(const LinearOperator& apply, int dim,
                            EigenWhich which, double tol, int max_iter,
                            std::uint64_t seed) {
  if (dim <= 0) throw Error(ErrorCode::invalid_argument, "dimension must be positive");
  if (max_iter < 0) max_iter = 10 * dim;
  Rng rng(seed);

  Eigen::MatrixXd basis(dim, std::min(dim, 2));
  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(dim);

  Eigen::VectorXd v0(dim);
  for (int i = 0; i < dim; ++i) v0[i] = rng.next_normal();
  v0.normalize();
  basis.col(0) = v0;

  int applies = 0;
  double best_residual = std::numeric_limits<double>::infinity();

  auto try_ritz = [&](int k) -> std::optional<EigenPair> {
    // Ritz pair of the k+1 dimensional tridiagonal section.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(alpha.head(k + 1), beta.head(k),
                              Eigen::ComputeEigenvectors);
    int idx = (which == EigenWhich::largest_algebraic) ? k : 0;
    Eigen::VectorXd y = es.eigenvectors().col(idx);
    Eigen::VectorXd x = basis.leftCols(k + 1) * y;
    x.normalize();
    Eigen::VectorXd ax = apply(x);
    ++applies;
    double theta = x.dot(ax);
    double residual = (ax - theta * x).norm();
    best_residual = std::min(best_residual, residual);
    if (residual <= tol * std::max(std::abs(theta), 1.0)) {
      canonicalize_sign(x);
      return EigenPair{theta, x, applies, residual};
    }
    return std::nullopt;
  };

  const double breakdown_tol = 1e-13;
  for (int k = 0; k < dim && applies < max_iter; ++k) {
    if (basis.cols() < k + 2) basis.conservativeResize(Eigen::NoChange, k + 2);
    Eigen::VectorXd w = apply(basis.col(k));
    ++applies;
    alpha[k] = basis.col(k).dot(w);
    w -= alpha[k] * basis.col(k);
    if (k > 0) w -= beta[k - 1] * basis.col(k - 1);
    // Full reorthogonalization, two passes.
    for (int pass = 0; pass < 2; ++pass)
      w -= basis.leftCols(k + 1) *
           (basis.leftCols(k + 1).transpose() * w).eval();
    double b = w.norm();

    bool breakdown = b <= breakdown_tol * std::max(1.0, std::abs(alpha[k]));
    bool last = (k == dim - 1) || (applies >= max_iter - 1);
    bool check = breakdown || last || k < 32 || (k % 8 == 7);
    if (check) {
      if (auto pair = try_ritz(k)) return *pair;
      if (applies >= max_iter) break;
    }
    if (k == dim - 1) break;

    if (breakdown) {
      // Invariant subspace that misses the target: continue in its
      // orthogonal complement (the section stays block tridiagonal).
      for (int i = 0; i < dim; ++i) w[i] = rng.next_normal();
      for (int pass = 0; pass < 2; ++pass)
        w -= basis.leftCols(k + 1) *
             (basis.leftCols(k + 1).transpose() * w).eval();
      b = w.norm();
      if (b <= breakdown_tol) break;  // complement exhausted
      beta[k] = 0.0;
    } else {
      beta[k] = b;
    }
    basis.col(k + 1) = w / b;
  }
  throw ConvergenceError(best_residual,
                         "eigen iteration did not converge within " +
                             std::to_string(max_iter) +
                             " operator applications (best residual " +
                             std::to_string(best_residual) + ")");
}

double weighted_trace(const CholeskyFactor& factor, const Eigen::VectorXd& w,
                      TraceMethod method) {
  if (w.size() != factor.dimension())
    throw Error(ErrorCode::dimension_mismatch, "weight length does not match factor");
  if (method == TraceMethod::triangular_inverse)
    return w.dot(factor.covariance_diagonal());
  double total = 0.0;
  int n = factor.dimension();
  for (int j = 0; j < n; ++j) {
    if (w[j] == 0.0) continue;
    Eigen::VectorXd col = factor.solve(Eigen::VectorXd::Unit(n, j));
    total += w[j] * col[j];
  }
  return total;
}

}  // namespace wgmrf
