// SPDX-License-Identifier: Apache-2.0
#include "wgmrf/mesh_graph.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <set>
#include <sstream>

namespace wgmrf {

namespace {

std::uint64_t fnv1a_step(std::uint64_t h, std::uint64_t v) {
  for (int k = 0; k < 8; ++k) {
    h ^= (v >> (8 * k)) & 0xffULL;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Strips comments and surrounding whitespace; returns false for blank lines.
bool clean_line(std::string& line) {
  auto hash = line.find('#');
  if (hash != std::string::npos) line.erase(hash);
  auto begin = line.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return false;
  auto end = line.find_last_not_of(" \t\r\n");
  line = line.substr(begin, end - begin + 1);
  return true;
}

std::vector<int> component_sizes(const MeshGraph& g) {
  std::vector<int> comp(g.node_count, -1);
  std::vector<int> sizes;
  for (int start = 0; start < g.node_count; ++start) {
    if (comp[start] >= 0) continue;
    int label = static_cast<int>(sizes.size());
    int size = 0;
    std::deque<int> queue{start};
    comp[start] = label;
    while (!queue.empty()) {
      int u = queue.front();
      queue.pop_front();
      ++size;
      for (int v : g.adjacency[u]) {
        if (comp[v] < 0) {
          comp[v] = label;
          queue.push_back(v);
        }
      }
    }
    sizes.push_back(size);
  }
  return sizes;
}

}  // namespace

void MeshGraph::validate() const {
  if (node_count <= 0)
    throw Error(ErrorCode::invalid_argument, "mesh must have at least one node");
  if (static_cast<int>(adjacency.size()) != node_count)
    throw Error(ErrorCode::invalid_argument, "adjacency size does not match node count");
  for (int i = 0; i < node_count; ++i) {
    if (adjacency[i].empty())
      throw Error(ErrorCode::isolated_node,
                  "node " + std::to_string(i) + " is isolated");
    int prev = -1;
    for (int j : adjacency[i]) {
      if (j < 0 || j >= node_count)
        throw Error(ErrorCode::invalid_argument,
                    "neighbor index out of range at node " + std::to_string(i));
      if (j == i)
        throw Error(ErrorCode::invalid_argument,
                    "self-loop at node " + std::to_string(i));
      if (j <= prev)
        throw Error(ErrorCode::invalid_argument,
                    "adjacency not sorted/unique at node " + std::to_string(i));
      prev = j;
      if (!std::binary_search(adjacency[j].begin(), adjacency[j].end(), i))
        throw Error(ErrorCode::invalid_argument,
                    "adjacency not symmetric between " + std::to_string(i) +
                        " and " + std::to_string(j));
    }
  }
  auto sizes = component_sizes(*this);
  if (sizes.size() > 1) {
    std::ostringstream msg;
    msg << "mesh graph is disconnected (component sizes:";
    for (int s : sizes) msg << ' ' << s;
    msg << ")";
    throw Error(ErrorCode::disconnected_graph, msg.str());
  }
}

std::uint64_t MeshGraph::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  h = fnv1a_step(h, static_cast<std::uint64_t>(node_count));
  for (int i = 0; i < node_count; ++i)
    for (int j : adjacency[i])
      if (j > i) h = fnv1a_step(fnv1a_step(h, i), j);
  return h;
}

MeshGraph MeshGraph::from_edges(int node_count,
                                const std::vector<std::pair<int, int>>& edges) {
  MeshGraph g;
  g.node_count = node_count;
  g.adjacency.assign(node_count, {});
  for (auto [i, j] : edges) {
    if (i < 0 || i >= node_count || j < 0 || j >= node_count)
      throw Error(ErrorCode::parse_error,
                  "edge (" + std::to_string(i) + ", " + std::to_string(j) +
                      ") out of range for " + std::to_string(node_count) + " nodes");
    if (i == j) continue;
    g.adjacency[i].push_back(j);
    g.adjacency[j].push_back(i);
  }
  for (auto& nbrs : g.adjacency) {
    std::sort(nbrs.begin(), nbrs.end());
    nbrs.erase(std::unique(nbrs.begin(), nbrs.end()), nbrs.end());
  }
  g.validate();
  return g;
}

MeshGraph MeshGraph::lattice(int rows, int cols) {
  if (rows < 1 || cols < 1)
    throw Error(ErrorCode::invalid_argument, "lattice dimensions must be positive");
  std::vector<std::pair<int, int>> edges;
  auto id = [cols](int r, int c) { return r * cols + c; };
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      if (c + 1 < cols) edges.emplace_back(id(r, c), id(r, c + 1));
      if (r + 1 < rows) edges.emplace_back(id(r, c), id(r + 1, c));
    }
  return from_edges(rows * cols, edges);
}

MeshGraph MeshGraph::path(int n) { return lattice(1, n); }

MeshGraph load_mesh(const std::string& path, MeshFormat format,
                    MeshLoadStats* stats) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_error, "cannot open mesh file: " + path);

  MeshLoadStats local;
  int node_count = -1;
  std::vector<std::pair<int, int>> edges;
  std::set<std::pair<int, int>> seen;
  std::string line;
  int line_no = 0;

  auto parse_fail = [&](const std::string& what) {
    throw Error(ErrorCode::parse_error,
                path + ":" + std::to_string(line_no) + ": " + what);
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (!clean_line(line)) continue;
    std::istringstream ss(line);
    if (node_count < 0) {
      if (!(ss >> node_count) || node_count <= 0)
        parse_fail("expected positive node count");
      std::string rest;
      if (ss >> rest) parse_fail("unexpected token after node count");
      continue;
    }
    std::vector<int> ids;
    int v;
    while (ss >> v) {
      if (v < 0 || v >= node_count)
        parse_fail("node index " + std::to_string(v) + " out of range [0, " +
                   std::to_string(node_count) + ")");
      ids.push_back(v);
    }
    if (!ss.eof()) parse_fail("invalid token");
    if (format == MeshFormat::edge_list) {
      if (ids.size() != 2) parse_fail("expected exactly two node indices");
    } else {
      if (ids.size() < 2) parse_fail("element needs at least two node indices");
    }
    // All pairwise connections; for an edge list that is just the pair itself.
    for (std::size_t a = 0; a < ids.size(); ++a)
      for (std::size_t b = a + 1; b < ids.size(); ++b) {
        int i = ids[a], j = ids[b];
        if (i == j) {
          ++local.self_loops_dropped;
          continue;
        }
        auto key = std::minmax(i, j);
        if (!seen.insert(key).second) {
          ++local.duplicate_edges_dropped;
          continue;
        }
        edges.emplace_back(key.first, key.second);
      }
  }
  if (node_count < 0)
    throw Error(ErrorCode::parse_error, path + ": empty mesh file");
  if (stats) *stats = local;
  return MeshGraph::from_edges(node_count, edges);
}

void save_mesh_edge_list(const MeshGraph& g, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io_error, "cannot write mesh file: " + path);
  out << g.node_count << "\n";
  for (int i = 0; i < g.node_count; ++i)
    for (int j : g.adjacency[i])
      if (j > i) out << i << ' ' << j << "\n";
}

void load_coords_csv(const std::string& path, MeshGraph& g) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_error, "cannot open coordinates file: " + path);
  std::string line;
  int line_no = 0;
  Eigen::MatrixX3d coords = Eigen::MatrixX3d::Zero(g.node_count, 3);
  std::vector<bool> filled(g.node_count, false);
  while (std::getline(in, line)) {
    ++line_no;
    if (!clean_line(line)) continue;
    if (line_no == 1 || line.rfind("node", 0) == 0) continue;  // header
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    int node;
    double x, y, z;
    if (!(ss >> node >> x >> y >> z) || node < 0 || node >= g.node_count)
      throw Error(ErrorCode::parse_error,
                  path + ":" + std::to_string(line_no) + ": bad coordinate row");
    coords.row(node) << x, y, z;
    filled[node] = true;
  }
  for (int i = 0; i < g.node_count; ++i)
    if (!filled[i])
      throw Error(ErrorCode::parse_error,
                  path + ": missing coordinates for node " + std::to_string(i));
  g.coords = coords;
}

std::vector<std::pair<int, int>> bfs_ball(const MeshGraph& g, int source,
                                          int radius) {
  if (source < 0 || source >= g.node_count)
    throw Error(ErrorCode::invalid_argument,
                "source node " + std::to_string(source) + " out of range");
  std::vector<std::pair<int, int>> ball;
  std::vector<int> dist(g.node_count, -1);
  std::deque<int> queue{source};
  dist[source] = 0;
  ball.emplace_back(source, 0);
  while (!queue.empty()) {
    int u = queue.front();
    queue.pop_front();
    if (dist[u] >= radius) continue;
    for (int v : g.adjacency[u]) {
      if (dist[v] < 0) {
        dist[v] = dist[u] + 1;
        ball.emplace_back(v, dist[v]);
        queue.push_back(v);
      }
    }
  }
  return ball;
}

std::vector<int> graph_distance(const MeshGraph& g, int source,
                                std::optional<int> radius) {
  int r = radius.value_or(g.node_count);
  if (r < 0) throw Error(ErrorCode::invalid_argument, "radius must be nonnegative");
  std::vector<int> dist(g.node_count, -1);
  for (auto [node, d] : bfs_ball(g, source, r)) dist[node] = d;
  return dist;
}

Eigen::VectorXd SparseSpdMatrix::apply(const Eigen::VectorXd& v) const {
  if (v.size() != dimension)
    throw Error(ErrorCode::dimension_mismatch, "vector length does not match matrix");
  return upper.selfadjointView<Eigen::Upper>() * v;
}

Eigen::MatrixXd SparseSpdMatrix::dense() const {
  Eigen::MatrixXd full = Eigen::MatrixXd(upper);
  Eigen::MatrixXd strict = full;
  strict.diagonal().setZero();
  return full + strict.transpose();
}

std::int64_t SparseSpdMatrix::nonzeros_full() const {
  std::int64_t diag = dimension;
  return diag + 2 * (upper.nonZeros() - diag);
}

SparseSpdMatrix build_precision(const MeshGraph& g, double epsilon) {
  // epsilon = 0 yields the singular graph Laplacian; it is accepted here so
  // the failure surfaces at factorization with a pivot index.
  if (epsilon < 0.0)
    throw Error(ErrorCode::invalid_argument, "epsilon must be nonnegative");
  g.validate();
  SparseSpdMatrix q;
  q.dimension = g.node_count;
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(g.node_count * 3);
  for (int i = 0; i < g.node_count; ++i) {
    triplets.emplace_back(i, i, g.degree(i) + epsilon);
    for (int j : g.adjacency[i])
      if (j > i) triplets.emplace_back(i, j, -1.0);
  }
  q.upper.resize(g.node_count, g.node_count);
  q.upper.setFromTriplets(triplets.begin(), triplets.end());
  q.upper.makeCompressed();
  return q;
}

}  // namespace wgmrf
