// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "wgmrf/multifidelity.hpp"
#include "wgmrf/sparse_la.hpp"

namespace wgmrf {

// Parameters of a desk-scale experiment; the seed fully determines all
// generated data.
struct SyntheticSpec {
  int high_rows = 30;
  int high_cols = 30;
  int coarsening = 3;  // low mesh keeps every coarsening-th lattice node
  double epsilon = 1e-4;
  int n_train = 50;
  int n_test = 850;
  std::uint64_t seed = 1;
  int latent_count = 6;       // shared factors coupling the fidelities
  double noise_scale = 0.3;   // GMRF noise level relative to unit variance
  int weight_centers = 3;     // drawn weight centers (1, 3, 9, 15)
  int weight_basis_len = 100; // smoothing eigenbasis length, capped at m
};

// One draw per row of N(0, Q~^{-1}) through the factor's coloring transform.
FieldSamples sample_gmrf(const CholeskyFactor& factor, int n, std::uint64_t seed);

// Indicator of `centers` uniformly drawn nodes, projected onto the span of
// the leading basis_len eigenvectors of Sigma, clamped at zero, normalized.
WeightVector simulation_weights(const MeshGraph& g, const CovarianceOperator& cov,
                                int centers, int basis_len, std::uint64_t seed);

struct CoupledData {
  MeshGraph high_mesh;
  MeshGraph low_mesh;
  std::vector<int> low_to_high;  // node correspondence
  FieldSamples train_low, train_high;
  FieldSamples test_low, test_high;
};

// Paired low/high fidelity datasets: shared latent factors with smooth
// localized loading fields plus independent GMRF noise per mesh.
CoupledData coupled_fidelity(const SyntheticSpec& spec);

}  // namespace wgmrf
