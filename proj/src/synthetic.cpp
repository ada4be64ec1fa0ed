// SPDX-License-Identifier: Apache-2.0
#include "wgmrf/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <set>

#include "wgmrf/rng.hpp"

namespace wgmrf {

namespace {

// Stream tags keep the per-operation generators independent of each other
// and of evaluation order.
enum StreamTag : std::uint64_t {
  kGmrfSample = 0x01,
  kWeightCenters = 0x02,
  kLatentTrain = 0x03,
  kLatentTest = 0x04,
  kLoadings = 0x05,
  kNoiseHighTrain = 0x06,
  kNoiseHighTest = 0x07,
  kNoiseLowTrain = 0x08,
  kNoiseLowTest = 0x09,
};

std::uint64_t stream(std::uint64_t seed, std::uint64_t tag, std::uint64_t index) {
  return Rng::mix_seed(Rng::mix_seed(seed, tag), index);
}

std::string indexed_id(const char* prefix, int k) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s-%05d", prefix, k);
  return buf;
}

Eigen::MatrixXd gmrf_draws(const CholeskyFactor& factor, int n,
                           std::uint64_t seed, std::uint64_t tag) {
  int m = factor.dimension();
  Eigen::MatrixXd values(n, m);
  Eigen::VectorXd z(m);
  for (int k = 0; k < n; ++k) {
    Rng rng(stream(seed, tag, static_cast<std::uint64_t>(k)));
    for (int j = 0; j < m; ++j) z[j] = rng.next_normal();
    values.row(k) = factor.coloring_transform(z).transpose();
  }
  return values;
}

}  // namespace

FieldSamples sample_gmrf(const CholeskyFactor& factor, int n, std::uint64_t seed) {
  if (n < 1)
    throw Error(ErrorCode::invalid_argument, "sample count must be positive");
  FieldSamples out;
  out.values = gmrf_draws(factor, n, seed, kGmrfSample);
  out.sample_ids.reserve(n);
  for (int k = 0; k < n; ++k) out.sample_ids.push_back(indexed_id("gmrf", k));
  return out;
}

WeightVector simulation_weights(const MeshGraph& g, const CovarianceOperator& cov,
                                int centers, int basis_len, std::uint64_t seed) {
  int m = g.node_count;
  if (cov.dimension() != m)
    throw Error(ErrorCode::dimension_mismatch, "operator does not match mesh");
  if (centers < 1 || centers > m)
    throw Error(ErrorCode::invalid_argument, "center count out of range");
  if (basis_len < 1 || basis_len > m)
    throw Error(ErrorCode::invalid_argument,
                "smoothing basis length must lie in [1, m]");

  // The full eigenbasis spans everything; skip the eigen computation then.
  Basis smoothing_basis;
  if (basis_len < m)
    smoothing_basis = eigen_basis(cov, basis_len, 1e-8, -1,
                                  Rng::mix_seed(seed, 0xe16e5ULL));

  for (int attempt = 0; attempt < 10; ++attempt) {
    Rng rng(stream(seed, kWeightCenters, static_cast<std::uint64_t>(attempt)));
    std::set<int> chosen;
    while (static_cast<int>(chosen.size()) < centers)
      chosen.insert(static_cast<int>(rng.next_below(m)));
    Eigen::VectorXd indicator = Eigen::VectorXd::Zero(m);
    for (int c : chosen) indicator[c] = 1.0;

    Eigen::VectorXd projected;
    if (basis_len < m) {
      projected = smoothing_basis.vectors *
                  (smoothing_basis.vectors.transpose() * indicator).eval();
    } else {
      projected = indicator;
    }
    projected = projected.cwiseMax(0.0);
    double total = projected.sum();
    if (total > 0.0) {
      WeightVector w = make_weights(projected);
      w.bandwidth = std::nullopt;
      return w;
    }
  }
  throw Error(ErrorCode::degenerate_direction,
              "smoothed indicator collapsed to zero after 10 retries");
}

CoupledData coupled_fidelity(const SyntheticSpec& spec) {
  if (spec.coarsening < 1 || spec.high_rows % spec.coarsening != 0 ||
      spec.high_cols % spec.coarsening != 0)
    throw Error(ErrorCode::invalid_argument,
                "coarsening factor incompatible with lattice dimensions");
  if (spec.n_train < 1 || spec.n_test < 0)
    throw Error(ErrorCode::invalid_argument, "sample counts must be positive");
  if (spec.latent_count < 0)
    throw Error(ErrorCode::invalid_argument, "latent count must be nonnegative");
  if (spec.noise_scale < 0.0)
    throw Error(ErrorCode::invalid_argument, "noise scale must be nonnegative");

  CoupledData data;
  data.high_mesh = MeshGraph::lattice(spec.high_rows, spec.high_cols);
  int low_rows = spec.high_rows / spec.coarsening;
  int low_cols = spec.high_cols / spec.coarsening;
  data.low_mesh = MeshGraph::lattice(low_rows, low_cols);
  data.low_to_high.reserve(low_rows * low_cols);
  for (int r = 0; r < low_rows; ++r)
    for (int c = 0; c < low_cols; ++c)
      data.low_to_high.push_back(r * spec.coarsening * spec.high_cols +
                                 c * spec.coarsening);

  CholeskyFactor high_factor = factorize(build_precision(data.high_mesh, spec.epsilon));
  CholeskyFactor low_factor = factorize(build_precision(data.low_mesh, spec.epsilon));
  int mh = data.high_mesh.node_count;
  int ml = data.low_mesh.node_count;

  // Smooth localized loading fields: Gaussian bumps in hop distance around
  // seeded centers, one column per latent factor.
  int latent = spec.latent_count;
  Eigen::MatrixXd load_high = Eigen::MatrixXd::Zero(mh, latent);
  Eigen::MatrixXd load_low = Eigen::MatrixXd::Zero(ml, latent);
  Rng load_rng(stream(spec.seed, kLoadings, 0));
  double rho = std::max(2.0, std::min(spec.high_rows, spec.high_cols) / 6.0);
  for (int l = 0; l < latent; ++l) {
    int center = static_cast<int>(load_rng.next_below(mh));
    double amplitude = 1.0 + 0.25 * load_rng.next_normal();
    auto dist = graph_distance(data.high_mesh, center);
    for (int j = 0; j < mh; ++j)
      load_high(j, l) =
          amplitude * std::exp(-dist[j] * dist[j] / (2.0 * rho * rho));
    for (int i = 0; i < ml; ++i) load_low(i, l) = load_high(data.low_to_high[i], l);
  }

  // Noise normalization: unit average marginal variance, so noise_scale is
  // interpretable against the O(1) latent signal.
  double high_norm = std::sqrt(high_factor.covariance_diagonal().mean());
  double low_norm = std::sqrt(low_factor.covariance_diagonal().mean());

  auto generate = [&](int n, std::uint64_t latent_tag, std::uint64_t high_tag,
                      std::uint64_t low_tag, const char* prefix,
                      FieldSamples& out_low, FieldSamples& out_high) {
    Eigen::MatrixXd z(n, latent);
    for (int k = 0; k < n; ++k) {
      Rng rng(stream(spec.seed, latent_tag, static_cast<std::uint64_t>(k)));
      for (int l = 0; l < latent; ++l) z(k, l) = rng.next_normal();
    }
    out_high.values = z * load_high.transpose();  // n x mh, zero when latent = 0
    out_low.values = z * load_low.transpose();
    if (spec.noise_scale > 0.0) {
      out_high.values +=
          (spec.noise_scale / high_norm) * gmrf_draws(high_factor, n, spec.seed, high_tag);
      out_low.values +=
          (spec.noise_scale / low_norm) * gmrf_draws(low_factor, n, spec.seed, low_tag);
    }
    out_low.sample_ids.clear();
    out_high.sample_ids.clear();
    for (int k = 0; k < n; ++k) {
      out_low.sample_ids.push_back(indexed_id(prefix, k));
      out_high.sample_ids.push_back(indexed_id(prefix, k));
    }
  };

  generate(spec.n_train, kLatentTrain, kNoiseHighTrain, kNoiseLowTrain, "train",
           data.train_low, data.train_high);
  generate(spec.n_test, kLatentTest, kNoiseHighTest, kNoiseLowTest, "test",
           data.test_low, data.test_high);
  return data;
}

}  // namespace wgmrf
