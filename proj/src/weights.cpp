// SPDX-License-Identifier: Apache-2.0
#include "wgmrf/weights.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>

namespace wgmrf {

void FieldSamples::validate() const {
  if (values.rows() == 0 || values.cols() == 0)
    throw Error(ErrorCode::empty_input, "field samples are empty");
  if (!values.allFinite())
    throw Error(ErrorCode::invalid_argument, "field samples contain non-finite values");
  if (!sample_ids.empty() &&
      static_cast<int>(sample_ids.size()) != values.rows())
    throw Error(ErrorCode::invalid_argument, "sample id count does not match rows");
  if (mean) {
    if (mean->size() != values.cols())
      throw Error(ErrorCode::dimension_mismatch, "recorded mean has wrong length");
    double worst = values.colwise().mean().cwiseAbs().maxCoeff();
    if (worst > 1e-10)
      throw Error(ErrorCode::invalid_argument,
                  "centered samples have non-zero column means");
  }
}

FieldSamples FieldSamples::centered() const {
  FieldSamples out = *this;
  Eigen::VectorXd mu = values.colwise().mean().transpose();
  out.values.rowwise() -= mu.transpose();
  out.mean = mu;
  return out;
}

void WeightVector::validate() const {
  if (values.size() == 0)
    throw Error(ErrorCode::empty_weights, "weight vector is empty");
  if ((values.array() < 0.0).any())
    throw Error(ErrorCode::invalid_argument, "weights must be nonnegative");
  if (std::abs(values.sum() - 1.0) > 1e-12)
    throw Error(ErrorCode::invalid_argument, "weights must sum to one");
}

std::string WeightVector::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int k = 0; k < 8; ++k) {
      h ^= (v >> (8 * k)) & 0xffULL;
      h *= 0x100000001b3ULL;
    }
  };
  mix(static_cast<std::uint64_t>(values.size()));
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    std::uint64_t bits;
    double v = values[i];
    static_assert(sizeof(bits) == sizeof(v));
    std::memcpy(&bits, &v, sizeof(bits));
    mix(bits);
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

WeightVector WeightVector::equal(int m) {
  WeightVector w;
  w.values = Eigen::VectorXd::Constant(m, 1.0 / m);
  return w;
}

double pooled_quantile(const FieldSamples& samples, double upper_fraction) {
  samples.validate();
  if (samples.mean)
    throw Error(ErrorCode::invalid_argument,
                "pooled quantile expects uncentered samples");
  if (!(upper_fraction > 0.0 && upper_fraction < 1.0))
    throw Error(ErrorCode::invalid_argument, "upper fraction must lie in (0, 1)");
  std::vector<double> pool(samples.values.data(),
                           samples.values.data() + samples.values.size());
  // Nearest-rank: q = x_(ceil(p * N)) for p = 1 - upper_fraction.
  double p = 1.0 - upper_fraction;
  auto n = static_cast<std::size_t>(pool.size());
  std::size_t rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(n)));
  rank = std::min(std::max<std::size_t>(rank, 1), n);
  std::nth_element(pool.begin(), pool.begin() + (rank - 1), pool.end());
  return pool[rank - 1];
}

Eigen::VectorXd exceedance_frequency(const FieldSamples& samples, double q) {
  samples.validate();
  if (samples.mean)
    throw Error(ErrorCode::invalid_argument,
                "exceedance frequency expects uncentered samples");
  int n = samples.sample_count();
  Eigen::VectorXd f =
      ((samples.values.array() > q).cast<double>().colwise().sum() / n).transpose();
  return f;
}

int kernel_truncation_radius(double sigma) {
  if (sigma <= 0.0)
    throw Error(ErrorCode::invalid_argument, "sigma must be positive");
  // exp(-d^2 / (2 sigma^2)) < 1e-8 beyond d = sigma * sqrt(2 ln 1e8).
  return static_cast<int>(std::ceil(sigma * std::sqrt(2.0 * std::log(1e8))));
}

namespace {

// Kernel-weighted sums over one node's truncated neighborhood.
struct SmootherRow {
  double weighted_sum = 0.0;  // sum_l K(d_jl) f_l
  double kernel_sum = 0.0;    // sum_l K(d_jl)
};

SmootherRow smoother_row(const MeshGraph& g, const Eigen::VectorXd& f,
                         double sigma, int node, int radius) {
  SmootherRow row;
  double inv = 1.0 / (2.0 * sigma * sigma);
  for (auto [l, d] : bfs_ball(g, node, radius)) {
    double k = std::exp(-static_cast<double>(d) * d * inv);
    row.kernel_sum += k;
    row.weighted_sum += k * f[l];
  }
  return row;
}

}  // namespace

Eigen::VectorXd kernel_smooth(const MeshGraph& g, const Eigen::VectorXd& f,
                              double sigma) {
  if (f.size() != g.node_count)
    throw Error(ErrorCode::dimension_mismatch, "field length does not match mesh");
  int radius = kernel_truncation_radius(sigma);
  Eigen::VectorXd out(g.node_count);
  for (int j = 0; j < g.node_count; ++j) {
    auto row = smoother_row(g, f, sigma, j, radius);
    out[j] = row.weighted_sum / row.kernel_sum;
  }
  return out;
}

GcvResult gcv_bandwidth(const MeshGraph& g, const Eigen::VectorXd& f,
                        const std::vector<double>& grid) {
  if (grid.empty())
    throw Error(ErrorCode::invalid_argument, "bandwidth grid is empty");
  if (f.size() != g.node_count)
    throw Error(ErrorCode::dimension_mismatch, "field length does not match mesh");
  int m = g.node_count;
  GcvResult result;
  double best = std::numeric_limits<double>::infinity();
  bool any_valid = false;
  for (double sigma : grid) {
    int radius = kernel_truncation_radius(sigma);
    double rss = 0.0;
    double trace = 0.0;
    for (int j = 0; j < m; ++j) {
      auto row = smoother_row(g, f, sigma, j, radius);
      double smoothed = row.weighted_sum / row.kernel_sum;
      rss += (f[j] - smoothed) * (f[j] - smoothed);
      trace += 1.0 / row.kernel_sum;  // K(0) = 1
    }
    double denom = 1.0 - trace / m;
    double score;
    if (denom == 0.0) {
      score = std::numeric_limits<double>::infinity();
    } else {
      score = (rss / m) / (denom * denom);
      if (score < best || (score == best && (!any_valid || sigma < result.sigma))) {
        best = score;
        result.sigma = sigma;
      }
      any_valid = true;
    }
    result.scores.emplace_back(sigma, score);
  }
  if (!any_valid)
    throw Error(ErrorCode::degenerate_grid,
                "every candidate smoother is the identity (tr(S) = m)");
  return result;
}

WeightVector make_weights(const Eigen::VectorXd& f_smoothed,
                          std::optional<double> quantile_level,
                          std::optional<double> bandwidth) {
  if (f_smoothed.size() == 0)
    throw Error(ErrorCode::empty_input, "smoothed field is empty");
  if ((f_smoothed.array() < 0.0).any())
    throw Error(ErrorCode::invalid_argument, "smoothed field must be nonnegative");
  double total = f_smoothed.sum();
  if (total <= 0.0)
    throw Error(ErrorCode::empty_weights,
                "no exceedances anywhere; lower the threshold");
  WeightVector w;
  w.values = f_smoothed / total;
  w.quantile_level = quantile_level;
  w.bandwidth = bandwidth;
  w.validate();
  return w;
}

}  // namespace wgmrf
