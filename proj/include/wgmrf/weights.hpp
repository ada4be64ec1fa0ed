// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "wgmrf/mesh_graph.hpp"

namespace wgmrf {

// Matrix of simulation outcomes, one sample per row. `mean` is recorded when
// the values have been centered; most statistics below require raw values.
struct FieldSamples {
  Eigen::MatrixXd values;               // n x m
  std::vector<std::string> sample_ids;  // length n
  std::optional<Eigen::VectorXd> mean;  // set iff values are centered

  int sample_count() const { return static_cast<int>(values.rows()); }
  int node_count() const { return static_cast<int>(values.cols()); }

  void validate() const;

  // Subtracts the column means and records them.
  FieldSamples centered() const;
};

// Nonnegative per-node relevance weights summing to one.
struct WeightVector {
  Eigen::VectorXd values;
  std::optional<double> quantile_level;  // defining upper-tail fraction
  std::optional<double> bandwidth;       // smoothing sigma, if data driven

  int size() const { return static_cast<int>(values.size()); }
  void validate() const;
  std::string fingerprint() const;

  static WeightVector equal(int m);
};

// Empirical (1 - upper_fraction)-quantile of all n*m pooled values,
// nearest-rank convention.
double pooled_quantile(const FieldSamples& samples, double upper_fraction);

// f_j = |{k : y_k(s_j) > q}| / n.
Eigen::VectorXd exceedance_frequency(const FieldSamples& samples, double q);

// Hop radius at which the Gaussian kernel drops below 1e-8.
int kernel_truncation_radius(double sigma);

// Nadaraya-Watson smoothing of f over graph-distance neighborhoods with a
// Gaussian kernel exp(-d^2 / (2 sigma^2)), truncated at
// kernel_truncation_radius(sigma).
Eigen::VectorXd kernel_smooth(const MeshGraph& g, const Eigen::VectorXd& f,
                              double sigma);

struct GcvResult {
  double sigma = 0.0;
  // (sigma, score) per grid point; degenerate candidates carry +inf.
  std::vector<std::pair<double, double>> scores;
};

// Bandwidth choice minimizing
//   GCV(sigma) = (1/m) sum_j (f_j - (S f)_j)^2 / (1 - tr(S)/m)^2,
// ties broken toward smaller sigma.
GcvResult gcv_bandwidth(const MeshGraph& g, const Eigen::VectorXd& f,
                        const std::vector<double>& grid);

// Normalizes a nonnegative smoothed frequency field to sum one.
WeightVector make_weights(const Eigen::VectorXd& f_smoothed,
                          std::optional<double> quantile_level = std::nullopt,
                          std::optional<double> bandwidth = std::nullopt);

}  // namespace wgmrf
