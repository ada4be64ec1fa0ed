// SPDX-License-Identifier: Apache-2.0
#include "wgmrf/multifidelity.hpp"

#include <Eigen/SVD>
#include <chrono>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "wgmrf/rng.hpp"

namespace wgmrf {

Basis eigen_basis(const CovarianceOperator& cov, int p, double tol,
                  int max_iter, std::uint64_t seed) {
  int m = cov.dimension();
  if (p < 1 || p > m)
    throw Error(ErrorCode::invalid_argument,
                "basis length must lie in [1, " + std::to_string(m) + "]");
  Basis basis;
  basis.vectors.resize(m, p);
  for (int i = 0; i < p; ++i) {
    auto t0 = std::chrono::steady_clock::now();
    auto deflated = [&](const Eigen::VectorXd& v) {
      Eigen::VectorXd u = v;
      for (int c = 0; c < i; ++c)
        u -= basis.vectors.col(c).dot(u) * basis.vectors.col(c);
      u = cov.apply(u);
      for (int c = 0; c < i; ++c)
        u -= basis.vectors.col(c).dot(u) * basis.vectors.col(c);
      return u;
    };
    EigenPair pair =
        extreme_eigenpair(deflated, m, EigenWhich::largest_algebraic, tol,
                          max_iter, Rng::mix_seed(seed, i));
    Eigen::VectorXd v = pair.vector;
    // Guard orthogonality against drift across deflations.
    for (int round = 0; round < 2; ++round)
      for (int c = 0; c < i; ++c) v -= basis.vectors.col(c).dot(v) * basis.vectors.col(c);
    v.normalize();
    basis.vectors.col(i) = v;
    VectorDiagnostics diag;
    // Equal-weights risk of an eigenvector with eigenvalue lambda is -lambda/m.
    diag.risk = -pair.value / m;
    diag.grad_norm = pair.residual;
    diag.iterations = pair.iterations;
    diag.start_eigenvalue = pair.value;
    diag.eigen_iterations = pair.iterations;
    diag.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    basis.diagnostics.push_back(diag);
  }
  basis.weights_fingerprint = WeightVector::equal(m).fingerprint();
  return basis;
}

Eigen::MatrixXd encode(const FieldSamples& samples, const Basis& basis,
                       const Eigen::VectorXd& mean) {
  if (samples.node_count() != basis.dimension() ||
      mean.size() != basis.dimension())
    throw Error(ErrorCode::dimension_mismatch, "sample/basis/mean dimensions disagree");
  return (samples.values.rowwise() - mean.transpose()) * basis.vectors;
}

FieldSamples decode(const Eigen::MatrixXd& coeffs, const Basis& basis,
                    const Eigen::VectorXd& mean,
                    const std::vector<std::string>& sample_ids) {
  if (coeffs.cols() != basis.size() || mean.size() != basis.dimension())
    throw Error(ErrorCode::dimension_mismatch, "coefficient/basis dimensions disagree");
  FieldSamples out;
  out.values = coeffs * basis.vectors.transpose();
  out.values.rowwise() += mean.transpose();
  out.sample_ids = sample_ids;
  return out;
}

RidgePenalty RidgePenalty::fixed(double lambda) {
  if (lambda < 0.0)
    throw Error(ErrorCode::invalid_argument, "ridge penalty must be nonnegative");
  return RidgePenalty{false, lambda};
}

namespace {

// Ridge-GCV score over the decade grid 1e-6 .. 1e2, all outputs pooled:
//   GCV(lambda) = (RSS(lambda) / n) / (1 - tr(H(lambda)) / n)^2.
double select_ridge_gcv(const Eigen::BDCSVD<Eigen::MatrixXd>& svd,
                        const Eigen::MatrixXd& targets) {
  int n = static_cast<int>(targets.rows());
  Eigen::VectorXd sv = svd.singularValues();
  Eigen::MatrixXd ut_y = svd.matrixU().transpose() * targets;  // r x p_y
  double best_score = std::numeric_limits<double>::infinity();
  double best_lambda = 1e2;
  for (int e = -6; e <= 2; ++e) {
    double lambda = std::pow(10.0, e);
    double df = 0.0;
    double rss = 0.0;
    // Residual = y - U diag(phi) U^t y with phi_i = s_i^2/(s_i^2+lambda);
    // the component of y outside span(U) is untouched.
    Eigen::VectorXd phi(sv.size());
    for (int i = 0; i < sv.size(); ++i) {
      phi[i] = sv[i] * sv[i] / (sv[i] * sv[i] + lambda);
      df += phi[i];
    }
    double total_sq = targets.squaredNorm();
    double inside_sq = ut_y.squaredNorm();
    double shrunk = 0.0;
    for (int i = 0; i < sv.size(); ++i)
      shrunk += (1.0 - phi[i]) * (1.0 - phi[i]) * ut_y.row(i).squaredNorm();
    rss = (total_sq - inside_sq) + shrunk;
    double denom = 1.0 - df / n;
    if (denom <= 0.0) continue;
    double score = (rss / n) / (denom * denom);
    if (score < best_score) {
      best_score = score;
      best_lambda = lambda;
    }
  }
  return best_lambda;
}

}  // namespace

PipelineModel fit_pipeline(const FieldSamples& train_low,
                           const FieldSamples& train_high,
                           const Basis& low_basis, const Basis& high_basis,
                           RidgePenalty ridge) {
  train_low.validate();
  train_high.validate();
  low_basis.validate();
  high_basis.validate();
  if (train_low.mean || train_high.mean)
    throw Error(ErrorCode::invalid_argument,
                "pipeline fitting expects raw (uncentered) samples");
  int n = train_low.sample_count();
  if (n < 2)
    throw Error(ErrorCode::insufficient_data,
                "pipeline fitting needs at least two samples");
  if (train_high.sample_count() != n)
    throw Error(ErrorCode::sample_mismatch,
                "low and high fidelity sample counts differ");

  // Align high-fidelity rows to the low-fidelity sample order by id.
  Eigen::MatrixXd high_values = train_high.values;
  if (!train_low.sample_ids.empty() || !train_high.sample_ids.empty()) {
    if (train_low.sample_ids.size() != train_high.sample_ids.size())
      throw Error(ErrorCode::sample_mismatch, "sample id lists differ in length");
    std::unordered_map<std::string, int> row_of;
    for (int k = 0; k < n; ++k) {
      if (!row_of.emplace(train_high.sample_ids[k], k).second)
        throw Error(ErrorCode::sample_mismatch,
                    "duplicate sample id: " + train_high.sample_ids[k]);
    }
    for (int k = 0; k < n; ++k) {
      auto it = row_of.find(train_low.sample_ids[k]);
      if (it == row_of.end())
        throw Error(ErrorCode::sample_mismatch,
                    "sample id missing on the high-fidelity side: " +
                        train_low.sample_ids[k]);
      high_values.row(k) = train_high.values.row(it->second);
    }
  }

  PipelineModel model;
  model.low_basis = low_basis;
  model.high_basis = high_basis;
  model.mean_low = train_low.values.colwise().mean().transpose();
  model.mean_high = high_values.colwise().mean().transpose();

  Eigen::MatrixXd ux =
      (train_low.values.rowwise() - model.mean_low.transpose()) * low_basis.vectors;
  Eigen::MatrixXd uy =
      (high_values.rowwise() - model.mean_high.transpose()) * high_basis.vectors;

  // Centered coefficient streams; the design is centered again so the
  // intercept decouples from the slope fit.
  Eigen::RowVectorXd ux_mean = ux.colwise().mean();
  Eigen::RowVectorXd uy_mean = uy.colwise().mean();
  Eigen::MatrixXd xc = ux.rowwise() - ux_mean;
  Eigen::MatrixXd yc = uy.rowwise() - uy_mean;

  Eigen::BDCSVD<Eigen::MatrixXd> svd(xc, Eigen::ComputeThinU | Eigen::ComputeThinV);
  double lambda = ridge.select_by_gcv ? select_ridge_gcv(svd, yc) : ridge.value;

  // A^t = V diag(s/(s^2+lambda)) U^t Y; lambda = 0 falls back to the
  // minimum-norm least squares solution.
  Eigen::VectorXd sv = svd.singularValues();
  double cutoff = std::max(xc.rows(), xc.cols()) *
                  std::numeric_limits<double>::epsilon() *
                  (sv.size() > 0 ? sv[0] : 0.0);
  Eigen::VectorXd shrink(sv.size());
  for (int i = 0; i < sv.size(); ++i) {
    if (lambda == 0.0 && sv[i] <= cutoff)
      shrink[i] = 0.0;  // rank-deficient direction, pseudoinverse drop
    else
      shrink[i] = sv[i] / (sv[i] * sv[i] + lambda);
  }
  Eigen::MatrixXd at = svd.matrixV() * shrink.asDiagonal() *
                       (svd.matrixU().transpose() * yc);
  model.coefficient_map = at.transpose();
  model.ridge_penalty = lambda;
  model.intercept =
      uy_mean.transpose() - model.coefficient_map * ux_mean.transpose();
  return model;
}

FieldSamples predict(const PipelineModel& model, const FieldSamples& low) {
  low.validate();
  if (low.mean)
    throw Error(ErrorCode::invalid_argument,
                "prediction expects raw (uncentered) samples");
  if (low.node_count() != model.low_basis.dimension())
    throw Error(ErrorCode::dimension_mismatch,
                "low-fidelity width does not match the model");
  Eigen::MatrixXd ux = encode(low, model.low_basis, model.mean_low);
  Eigen::MatrixXd uy = ux * model.coefficient_map.transpose();
  uy.rowwise() += model.intercept.transpose();
  return decode(uy, model.high_basis, model.mean_high, low.sample_ids);
}

}  // namespace wgmrf
