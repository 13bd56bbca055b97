#include "mgcn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <utility>

namespace mgcn {

namespace {

void sort_edges(std::vector<Edge>& edges) {
  std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
    return a.src != b.src ? a.src < b.src : a.dst < b.dst;
  });
}

constexpr Real kWeightFloor = 1e-6;

}  // namespace

SparseGraph knn_graph(const FeatureMatrix& x, int k_neighbors, std::uint64_t /*seed*/) {
  const int n = static_cast<int>(x.data.rows());
  if (k_neighbors < 1 || k_neighbors >= n)
    throw Error("knn_graph: k_neighbors must be in [1, N), got " +
                std::to_string(k_neighbors) + " for N=" + std::to_string(n));

  Mat unit = x.data;
  for (int i = 0; i < n; ++i) {
    const Real norm = unit.row(i).norm();
    if (!(norm > 0.0))
      throw Error("knn_graph: node " + std::to_string(i) + " has a zero-norm feature row");
    unit.row(i) /= norm;
  }

  // Blocked similarity: one (block x N) product at a time, then an exact
  // top-k selection per row with ties broken toward the lower index.
  std::vector<std::pair<int, int>> pairs;  // canonical (min, max)
  std::vector<Real> pair_weights;
  pairs.reserve(static_cast<std::size_t>(n) * k_neighbors);
  pair_weights.reserve(pairs.capacity());

  const int block = 256;
  std::vector<int> cand;
  cand.reserve(n);
  for (int i0 = 0; i0 < n; i0 += block) {
    const int rows = std::min(block, n - i0);
    const Mat sims = unit.middleRows(i0, rows) * unit.transpose();
    for (int r = 0; r < rows; ++r) {
      const int i = i0 + r;
      cand.clear();
      for (int j = 0; j < n; ++j)
        if (j != i) cand.push_back(j);
      const auto better = [&](int a, int b) {
        const Real sa = sims(r, a), sb = sims(r, b);
        return sa != sb ? sa > sb : a < b;
      };
      std::partial_sort(cand.begin(), cand.begin() + k_neighbors, cand.end(), better);
      for (int t = 0; t < k_neighbors; ++t) {
        const int j = cand[t];
        // Unit-row dot products land within a few ulps of 1 for identical
        // vectors; snap so duplicates get weight exactly 1.
        Real w = sims(r, j);
        if (w > 1.0 - 1e-12) w = 1.0;
        w = std::clamp(w, kWeightFloor, 1.0);
        pairs.emplace_back(std::min(i, j), std::max(i, j));
        pair_weights.push_back(w);
      }
    }
  }

  // Union of directed picks: dedupe canonical pairs. Cosine is symmetric, so
  // duplicates carry the same weight.
  std::vector<std::size_t> idx(pairs.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return pairs[a] < pairs[b]; });

  SparseGraph g;
  g.n_nodes = n;
  g.edges.reserve(pairs.size() * 2);
  for (std::size_t t = 0; t < idx.size(); ++t) {
    if (t > 0 && pairs[idx[t]] == pairs[idx[t - 1]]) continue;
    const auto [a, b] = pairs[idx[t]];
    const Real w = pair_weights[idx[t]];
    g.edges.push_back({a, b, w});
    g.edges.push_back({b, a, w});
  }
  sort_edges(g.edges);
  return g;
}

SparseGraph add_self_loops(const SparseGraph& g, Real loop_weight) {
  SparseGraph out;
  out.n_nodes = g.n_nodes;
  out.edges.reserve(g.edges.size() + g.n_nodes);
  for (const Edge& e : g.edges)
    if (e.src != e.dst) out.edges.push_back(e);
  for (int i = 0; i < g.n_nodes; ++i) out.edges.push_back({i, i, loop_weight});
  sort_edges(out.edges);
  return out;
}

DegreeVector degree_vector(const SparseGraph& g) {
  DegreeVector deg = DegreeVector::Zero(g.n_nodes);
  for (const Edge& e : g.edges) deg[e.src] += e.weight;
  for (int i = 0; i < g.n_nodes; ++i)
    if (!(deg[i] > 0.0))
      throw Error("degree_vector: node " + std::to_string(i) +
                  " has no incident edges (add self-loops first)");
  return deg;
}

SparseGraph symmetric_normalize(const SparseGraph& g) {
  const DegreeVector deg = degree_vector(g);
  SparseGraph out = g;
  for (Edge& e : out.edges) e.weight /= std::sqrt(deg[e.src] * deg[e.dst]);
  return out;
}

void validate_graph(const SparseGraph& g) {
  std::vector<Edge> sorted = g.edges;
  sort_edges(sorted);
  for (std::size_t t = 0; t < sorted.size(); ++t) {
    const Edge& e = sorted[t];
    if (e.src < 0 || e.src >= g.n_nodes || e.dst < 0 || e.dst >= g.n_nodes)
      throw Error("graph: edge endpoint out of range");
    if (!(e.weight > 0.0) || !std::isfinite(e.weight))
      throw Error("graph: non-positive or non-finite edge weight");
    if (t > 0 && sorted[t - 1].src == e.src && sorted[t - 1].dst == e.dst)
      throw Error("graph: duplicate edge (" + std::to_string(e.src) + "," +
                  std::to_string(e.dst) + ")");
  }
  // Symmetry with equal weights.
  const auto find = [&](int s, int d) -> const Edge* {
    auto it = std::lower_bound(sorted.begin(), sorted.end(), std::make_pair(s, d),
                               [](const Edge& e, const std::pair<int, int>& key) {
                                 return e.src != key.first ? e.src < key.first
                                                           : e.dst < key.second;
                               });
    if (it == sorted.end() || it->src != s || it->dst != d) return nullptr;
    return &*it;
  };
  for (const Edge& e : sorted) {
    const Edge* rev = find(e.dst, e.src);
    if (rev == nullptr || rev->weight != e.weight)
      throw Error("graph: edge (" + std::to_string(e.src) + "," + std::to_string(e.dst) +
                  ") has no symmetric counterpart");
  }
}

SparseRows sparse_rows(const SparseGraph& g) {
  SparseRows rows(g.n_nodes);
  std::vector<Edge> sorted = g.edges;
  sort_edges(sorted);
  for (const Edge& e : sorted) rows[e.src].push_back({e.dst, e.weight});
  return rows;
}

void write_graph(const std::string& path, const SparseGraph& g) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << g.n_nodes << ' ' << g.edges.size() << '\n';
  for (const Edge& e : g.edges)
    out << e.src << ' ' << e.dst << ' ' << real_to_text(e.weight) << '\n';
  if (!out) throw Error("write failed: " + path);
}

SparseGraph read_graph(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  SparseGraph g;
  std::size_t n_edges = 0;
  if (!(in >> g.n_nodes >> n_edges)) throw Error("bad graph header in " + path);
  g.edges.resize(n_edges);
  for (std::size_t t = 0; t < n_edges; ++t) {
    std::string w;
    if (!(in >> g.edges[t].src >> g.edges[t].dst >> w))
      throw Error("truncated graph file " + path);
    g.edges[t].weight = text_to_real(w);
  }
  sort_edges(g.edges);
  return g;
}

}  // namespace mgcn
