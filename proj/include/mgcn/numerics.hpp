#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mgcn/common.hpp"
#include "mgcn/data_types.hpp"
#include "mgcn/graph.hpp"
#include "mgcn/markov.hpp"
#include "mgcn/rng.hpp"

namespace mgcn {

// Sparse-dense product. Rows are accumulated in ascending column order by a
// single pass, so the result is independent of thread count and bit-stable.
Mat spmm(const SparseRows& rows, const Mat& h);
Mat spmm(const RowStochasticMatrix& m, const Mat& h);
Mat spmm(const SparseGraph& g, const Mat& h);

// M^T * h with the same fixed accumulation order.
Mat spmm_transpose(const SparseRows& rows, const Mat& h);

template <typename Derived>
auto relu(const Eigen::MatrixBase<Derived>& z) {
  return z.cwiseMax(typename Derived::Scalar(0));
}

template <typename Derived>
auto relu_mask(const Eigen::MatrixBase<Derived>& z) {
  return (z.array() > typename Derived::Scalar(0))
      .template cast<typename Derived::Scalar>()
      .matrix();
}

// Per-row log-softmax with max subtraction; exp of each output row sums to 1.
Mat log_softmax_rows(const Mat& z);

struct MseResult {
  Real loss = 0.0;
  Vec grad;  // d loss / d pred
};
// loss = (1/n) * sum (pred - target)^2, grad = 2 (pred - target) / n.
MseResult mse_loss(const Vec& pred, const Vec& target);

struct NllResult {
  Real loss = 0.0;
  Mat grad_logits;  // (softmax - onehot) / |mask| on masked rows, else 0
};
// Mean negative log-likelihood over the masked rows of a log-distribution
// matrix. The gradient is expressed w.r.t. the pre-softmax logits.
NllResult nll_loss(const Mat& logp, const LabelVector& labels, const BoolMask& mask);

// Uniform on +-sqrt(6 / (rows + cols)), filled row-major from the stream.
Mat glorot_init(int rows, int cols, RngStream& rng);

struct AdamState {
  std::vector<Mat> first_moment;
  std::vector<Mat> second_moment;
  long step_count = 0;
};

struct AdamHyper {
  Real lr = 0.01;
  Real beta1 = 0.9;
  Real beta2 = 0.999;
  Real eps = 1e-8;
  Real weight_decay = 5e-4;
};

AdamState make_adam_state(const std::vector<const Mat*>& params);

// One Adam step over a parameter list. Decoupled weight decay is applied to
// the parameters before the moment update.
void adam_step(const std::vector<Mat*>& params, const std::vector<const Mat*>& grads,
               AdamState& state, const AdamHyper& hp);

// Central-difference check of an analytic gradient. Returns
// max_i |fd_i - analytic_i| / max(1, |analytic_i|).
Real grad_check(const std::function<Real(const Vec&)>& f, const Vec& analytic_grad,
                const Vec& point, Real h);

// Text persistence: header "rows cols", then one line per row at 17
// significant digits.
void write_matrix(std::ostream& out, const Mat& m);
Mat read_matrix(std::istream& in);
void write_matrix_file(const std::string& path, const Mat& m);
Mat read_matrix_file(const std::string& path);

}  // namespace mgcn
