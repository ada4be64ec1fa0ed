// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "wgmrf/errors.hpp"

namespace wgmrf {

// Undirected connectivity of a finite-element grid. Nodes are indexed
// 0..node_count-1; the adjacency is symmetric, sorted, and free of
// self-loops and duplicates after construction.
struct MeshGraph {
  int node_count = 0;
  std::vector<std::vector<int>> adjacency;
  // Optional spatial coordinates, passthrough metadata for plotting tools.
  std::optional<Eigen::MatrixX3d> coords;

  int degree(int i) const { return static_cast<int>(adjacency[i].size()); }

  // Validates symmetry, no isolated node, and connectivity; throws on
  // violation. Called by all factory paths.
  void validate() const;

  std::uint64_t fingerprint() const;

  static MeshGraph from_edges(int node_count,
                              const std::vector<std::pair<int, int>>& edges);

  // rows x cols 4-neighbour lattice, node (r, c) -> index r * cols + c.
  static MeshGraph lattice(int rows, int cols);
  static MeshGraph path(int n);
};

enum class MeshFormat { edge_list, element_list };

struct MeshLoadStats {
  int self_loops_dropped = 0;
  int duplicate_edges_dropped = 0;
};

// Reads an edge-list file (first non-comment line = node count, then "i j"
// pairs) or an element-list file (node count, then one element per line; all
// pairwise connections within an element become edges). '#' starts a comment.
MeshGraph load_mesh(const std::string& path, MeshFormat format,
                    MeshLoadStats* stats = nullptr);

void save_mesh_edge_list(const MeshGraph& g, const std::string& path);

// Attaches coordinates from a CSV with header node,x,y,z.
void load_coords_csv(const std::string& path, MeshGraph& g);

// BFS hop distances from source. Entries are -1 for nodes beyond `radius`
// when a radius is given (absent); otherwise all entries are filled since
// the graph is connected.
std::vector<int> graph_distance(const MeshGraph& g, int source,
                                std::optional<int> radius = std::nullopt);

// Nodes within `radius` hops of source, as (node, distance) pairs in BFS
// order starting with (source, 0).
std::vector<std::pair<int, int>> bfs_ball(const MeshGraph& g, int source,
                                          int radius);

// Symmetric positive definite sparse matrix; entries are stored once per
// (i <= j) pair in the upper triangle.
struct SparseSpdMatrix {
  int dimension = 0;
  Eigen::SparseMatrix<double> upper;  // compressed, i <= j only

  Eigen::VectorXd apply(const Eigen::VectorXd& v) const;
  Eigen::MatrixXd dense() const;
  std::int64_t nonzeros_full() const;
};

// GMRF precision with diagonal regularization:
//   Q~_ii = |ne(i)| + epsilon,  Q~_ij = -1 for j in ne(i).
SparseSpdMatrix build_precision(const MeshGraph& g, double epsilon);

}  // namespace wgmrf
