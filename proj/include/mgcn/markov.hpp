#pragma once

#include <string>
#include <vector>

#include "mgcn/common.hpp"
#include "mgcn/graph.hpp"

namespace mgcn {

// Sparse row-stochastic matrix: every entry in (0, 1], every row sums to 1
// within 1e-9, no empty rows. Entries ascend by column within a row.
struct RowStochasticMatrix {
  int n_nodes = 0;
  SparseRows rows;
};

struct MarkovConfig {
  Real inflation = 2.0;  // elementwise exponent, > 1
  Real epsilon = 0.01;   // prune threshold, in [0, 1)
  int nlayers = 2;
  bool expand = false;  // multiply P*P before inflating (MCL-style expansion)
};

// One row-stochastic matrix per GCN layer. With expansion off, each layer's
// support is a subset of the previous layer's.
struct MarkovLayerStack {
  std::vector<RowStochasticMatrix> layers;

  int n_nodes() const { return layers.empty() ? 0 : layers.front().n_nodes; }
};

// P[i][j] = w_ij / degree(i); throws on a zero-degree node.
RowStochasticMatrix transition_matrix(const SparseGraph& g);

// Raises every entry to the k-th power, then renormalizes each row. Requires
// k > 1.
RowStochasticMatrix inflate_normalize(const RowStochasticMatrix& m, Real k);

// Drops entries < epsilon and renormalizes the survivors. A row whose
// entries would all be dropped keeps only its maximum entry (lowest column
// on ties) with weight 1. epsilon = 0 is the identity.
RowStochasticMatrix prune_epsilon(const RowStochasticMatrix& m, Real epsilon);

// Row-stochastic product m*m, used by the expansion step.
RowStochasticMatrix expand_square(const RowStochasticMatrix& m);

// Layer 1 is transition_matrix(g); each later layer applies
// [expansion ->] inflation -> pruning to its predecessor.
MarkovLayerStack markov_process_agg(const SparseGraph& g, const MarkovConfig& cfg);

// Throws unless all RowStochasticMatrix invariants hold.
void validate_row_stochastic(const RowStochasticMatrix& m);

// Text persistence: "LAYER t" (t starting at 1) followed by the graph
// edge-list format, once per layer.
void write_stack(const std::string& path, const MarkovLayerStack& stack);
MarkovLayerStack read_stack(const std::string& path);

}  // namespace mgcn
