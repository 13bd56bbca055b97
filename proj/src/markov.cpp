#include "mgcn/markov.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace mgcn {

namespace {

void check_config(const MarkovConfig& cfg) {
  if (!(cfg.inflation > 1.0))
    throw Error("markov: inflation must be > 1, got " + real_to_text(cfg.inflation));
  if (!(cfg.epsilon >= 0.0 && cfg.epsilon < 1.0))
    throw Error("markov: epsilon must be in [0, 1), got " + real_to_text(cfg.epsilon));
  if (cfg.nlayers < 1)
    throw Error("markov: nlayers must be >= 1, got " + std::to_string(cfg.nlayers));
}

}  // namespace

RowStochasticMatrix transition_matrix(const SparseGraph& g) {
  RowStochasticMatrix m;
  m.n_nodes = g.n_nodes;
  m.rows = sparse_rows(g);
  for (int i = 0; i < m.n_nodes; ++i) {
    auto& row = m.rows[i];
    Real sum = 0.0;
    for (const auto& e : row) sum += e.value;
    if (!(sum > 0.0))
      throw Error("transition_matrix: node " + std::to_string(i) + " has zero degree");
    for (auto& e : row) e.value /= sum;
  }
  return m;
}

RowStochasticMatrix inflate_normalize(const RowStochasticMatrix& m, Real k) {
  if (!(k > 1.0)) throw Error("inflate_normalize: k must be > 1, got " + real_to_text(k));
  RowStochasticMatrix out;
  out.n_nodes = m.n_nodes;
  out.rows.resize(m.rows.size());
  for (std::size_t i = 0; i < m.rows.size(); ++i) {
    auto& row = out.rows[i];
    row = m.rows[i];
    Real sum = 0.0;
    for (auto& e : row) {
      e.value = std::pow(e.value, k);
      sum += e.value;
    }
    for (auto& e : row) e.value /= sum;
  }
  return out;
}

RowStochasticMatrix prune_epsilon(const RowStochasticMatrix& m, Real epsilon) {
  if (!(epsilon >= 0.0)) throw Error("prune_epsilon: epsilon must be >= 0");
  RowStochasticMatrix out;
  out.n_nodes = m.n_nodes;
  out.rows.resize(m.rows.size());
  for (std::size_t i = 0; i < m.rows.size(); ++i) {
    const auto& src = m.rows[i];
    auto& row = out.rows[i];
    Real kept_sum = 0.0;
    for (const auto& e : src) {
      if (e.value >= epsilon) {
        row.push_back(e);
        kept_sum += e.value;
      }
    }
    if (row.empty()) {
      // Degenerate row: keep only the maximum entry (lowest column on ties).
      const auto max_it = std::max_element(
          src.begin(), src.end(),
          [](const SparseEntry& a, const SparseEntry& b) { return a.value < b.value; });
      row.push_back({max_it->col, 1.0});
    } else if (row.size() != src.size()) {
      for (auto& e : row) e.value /= kept_sum;
    }
    // Nothing removed: leave the row bit-identical (epsilon = 0 is the identity).
  }
  return out;
}

RowStochasticMatrix expand_square(const RowStochasticMatrix& m) {
  RowStochasticMatrix out;
  out.n_nodes = m.n_nodes;
  out.rows.resize(m.rows.size());
  std::vector<Real> acc(m.n_nodes, 0.0);
  std::vector<char> seen(m.n_nodes, 0);
  std::vector<int> touched;
  for (int i = 0; i < m.n_nodes; ++i) {
    touched.clear();
    for (const auto& e : m.rows[i]) {
      for (const auto& f : m.rows[e.col]) {
        if (!seen[f.col]) {
          seen[f.col] = 1;
          touched.push_back(f.col);
        }
        acc[f.col] += e.value * f.value;
      }
    }
    std::sort(touched.begin(), touched.end());
    auto& row = out.rows[i];
    row.reserve(touched.size());
    for (int c : touched) {
      row.push_back({c, acc[c]});
      acc[c] = 0.0;
      seen[c] = 0;
    }
  }
  return out;
}

MarkovLayerStack markov_process_agg(const SparseGraph& g, const MarkovConfig& cfg) {
  check_config(cfg);
  MarkovLayerStack stack;
  stack.layers.push_back(transition_matrix(g));
  for (int t = 1; t < cfg.nlayers; ++t) {
    RowStochasticMatrix next = stack.layers.back();
    if (cfg.expand) next = expand_square(next);
    next = inflate_normalize(next, cfg.inflation);
    next = prune_epsilon(next, cfg.epsilon);
    stack.layers.push_back(std::move(next));
  }
  return stack;
}

void validate_row_stochastic(const RowStochasticMatrix& m) {
  if (static_cast<int>(m.rows.size()) != m.n_nodes)
    throw Error("row-stochastic matrix: row count mismatch");
  for (int i = 0; i < m.n_nodes; ++i) {
    const auto& row = m.rows[i];
    if (row.empty()) throw Error("row-stochastic matrix: empty row " + std::to_string(i));
    Real sum = 0.0;
    int prev_col = -1;
    for (const auto& e : row) {
      if (e.col <= prev_col)
        throw Error("row-stochastic matrix: columns not strictly ascending in row " +
                    std::to_string(i));
      prev_col = e.col;
      if (e.col < 0 || e.col >= m.n_nodes)
        throw Error("row-stochastic matrix: column out of range");
      if (!(e.value > 0.0 && e.value <= 1.0) || !std::isfinite(e.value))
        throw Error("row-stochastic matrix: entry outside (0, 1] in row " + std::to_string(i));
      sum += e.value;
    }
    if (std::abs(sum - 1.0) > 1e-9)
      throw Error("row-stochastic matrix: row " + std::to_string(i) + " sums to " +
                  real_to_text(sum));
  }
}

void write_stack(const std::string& path, const MarkovLayerStack& stack) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  for (std::size_t t = 0; t < stack.layers.size(); ++t) {
    const auto& layer = stack.layers[t];
    std::size_t n_entries = 0;
    for (const auto& row : layer.rows) n_entries += row.size();
    out << "LAYER " << (t + 1) << '\n';
    out << layer.n_nodes << ' ' << n_entries << '\n';
    for (int i = 0; i < layer.n_nodes; ++i)
      for (const auto& e : layer.rows[i])
        out << i << ' ' << e.col << ' ' << real_to_text(e.value) << '\n';
  }
  if (!out) throw Error("write failed: " + path);
}

MarkovLayerStack read_stack(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  MarkovLayerStack stack;
  std::string tag;
  while (in >> tag) {
    if (tag != "LAYER") throw Error("bad stack file " + path + ": expected LAYER, got " + tag);
    int layer_index = 0;
    std::size_t n_entries = 0;
    RowStochasticMatrix layer;
    if (!(in >> layer_index >> layer.n_nodes >> n_entries))
      throw Error("bad stack header in " + path);
    layer.rows.resize(layer.n_nodes);
    for (std::size_t t = 0; t < n_entries; ++t) {
      int src = 0, dst = 0;
      std::string w;
      if (!(in >> src >> dst >> w)) throw Error("truncated stack file " + path);
      layer.rows.at(src).push_back({dst, text_to_real(w)});
    }
    for (auto& row : layer.rows)
      std::sort(row.begin(), row.end(),
                [](const SparseEntry& a, const SparseEntry& b) { return a.col < b.col; });
    stack.layers.push_back(std::move(layer));
  }
  if (stack.layers.empty()) throw Error("empty stack file " + path);
  return stack;
}

}  // namespace mgcn
