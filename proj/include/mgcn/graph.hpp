#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mgcn/common.hpp"
#include "mgcn/data_types.hpp"

namespace mgcn {

struct Edge {
  int src = 0;
  int dst = 0;
  Real weight = 0.0;
};

// Weighted undirected graph stored as directed pairs: (i,j,w) is always
// accompanied by (j,i,w). Edges are kept sorted by (src, dst).
struct SparseGraph {
  int n_nodes = 0;
  std::vector<Edge> edges;
};

using DegreeVector = Vec;

// Cosine k-nearest-neighbour graph over the feature rows. Each node is linked
// to its k most similar distinct nodes (ties broken toward the lower index),
// weights are cosine similarity clamped to [1e-6, 1], and the directed picks
// are symmetrized by union. The seed is accepted for interface stability; the
// exact search does not consume randomness.
SparseGraph knn_graph(const FeatureMatrix& x, int k_neighbors, std::uint64_t seed);

// Inserts (i,i,loop_weight) for every node, overwriting existing self-loops.
SparseGraph add_self_loops(const SparseGraph& g, Real loop_weight = 1.0);

// Weighted out-degree per node; throws if any node has no incident edge.
DegreeVector degree_vector(const SparseGraph& g);

// Replaces each weight w_ij by w_ij / sqrt(d_i * d_j).
SparseGraph symmetric_normalize(const SparseGraph& g);

// Throws unless all SparseGraph invariants hold (bounds, positive finite
// weights, no duplicate pairs, symmetric with equal weights).
void validate_graph(const SparseGraph& g);

// Row-wise view of the edge set, entries ascending by column.
SparseRows sparse_rows(const SparseGraph& g);

// Text persistence: header "N E", then one "src dst weight" line per edge
// with the weight at 17 significant digits.
void write_graph(const std::string& path, const SparseGraph& g);
SparseGraph read_graph(const std::string& path);

}  // namespace mgcn
