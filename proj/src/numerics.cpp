#include "mgcn/numerics.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace mgcn {

Mat spmm(const SparseRows& rows, const Mat& h) {
  const int n = static_cast<int>(rows.size());
  if (n == 0 || h.rows() != n)
    throw Error("spmm: shape mismatch, " + std::to_string(n) + " sparse rows vs " +
                std::to_string(h.rows()) + " dense rows");
  Mat out = Mat::Zero(n, h.cols());
  for (int i = 0; i < n; ++i)
    for (const auto& e : rows[i]) out.row(i) += e.value * h.row(e.col);
  return out;
}

Mat spmm(const RowStochasticMatrix& m, const Mat& h) { return spmm(m.rows, h); }

Mat spmm(const SparseGraph& g, const Mat& h) { return spmm(sparse_rows(g), h); }

Mat spmm_transpose(const SparseRows& rows, const Mat& h) {
  const int n = static_cast<int>(rows.size());
  if (n == 0 || h.rows() != n)
    throw Error("spmm_transpose: shape mismatch, " + std::to_string(n) + " sparse rows vs " +
                std::to_string(h.rows()) + " dense rows");
  Mat out = Mat::Zero(n, h.cols());
  for (int i = 0; i < n; ++i)
    for (const auto& e : rows[i]) out.row(e.col) += e.value * h.row(i);
  return out;
}

Mat log_softmax_rows(const Mat& z) {
  Mat out(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const Real m = z.row(i).maxCoeff();
    const Real lse = std::log((z.row(i).array() - m).exp().sum());
    out.row(i) = z.row(i).array() - m - lse;
  }
  return out;
}

MseResult mse_loss(const Vec& pred, const Vec& target) {
  if (pred.size() == 0) throw Error("mse_loss: empty vectors");
  if (pred.size() != target.size()) throw Error("mse_loss: length mismatch");
  const Real n = static_cast<Real>(pred.size());
  const Vec diff = pred - target;
  MseResult r;
  r.loss = diff.squaredNorm() / n;
  r.grad = 2.0 * diff / n;
  return r;
}

NllResult nll_loss(const Mat& logp, const LabelVector& labels, const BoolMask& mask) {
  const Eigen::Index n = logp.rows();
  if (static_cast<Eigen::Index>(labels.labels.size()) != n ||
      static_cast<Eigen::Index>(mask.size()) != n)
    throw Error("nll_loss: size mismatch");
  const long mc = mask_count(mask);
  if (mc == 0) throw Error("nll_loss: empty mask");

  NllResult r;
  r.grad_logits = Mat::Zero(n, logp.cols());
  Real loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!mask[i]) continue;
    const int y = labels.labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= logp.cols()) throw Error("nll_loss: label out of range");
    loss -= logp(i, y);
    r.grad_logits.row(i) = logp.row(i).array().exp() / static_cast<Real>(mc);
    r.grad_logits(i, y) -= 1.0 / static_cast<Real>(mc);
  }
  r.loss = loss / static_cast<Real>(mc);
  return r;
}

Mat glorot_init(int rows, int cols, RngStream& rng) {
  if (rows < 1 || cols < 1) throw Error("glorot_init: dimensions must be >= 1");
  const Real bound = std::sqrt(6.0 / static_cast<Real>(rows + cols));
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = rng.uniform(-bound, bound);
  return m;
}

AdamState make_adam_state(const std::vector<const Mat*>& params) {
  AdamState s;
  s.first_moment.reserve(params.size());
  s.second_moment.reserve(params.size());
  for (const Mat* p : params) {
    s.first_moment.push_back(Mat::Zero(p->rows(), p->cols()));
    s.second_moment.push_back(Mat::Zero(p->rows(), p->cols()));
  }
  return s;
}

void adam_step(const std::vector<Mat*>& params, const std::vector<const Mat*>& grads,
               AdamState& state, const AdamHyper& hp) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size())
    throw Error("adam_step: parameter/gradient/state count mismatch");
  state.step_count += 1;
  const Real t = static_cast<Real>(state.step_count);
  const Real bc1 = 1.0 - std::pow(hp.beta1, t);
  const Real bc2 = 1.0 - std::pow(hp.beta2, t);
  for (std::size_t p = 0; p < params.size(); ++p) {
    Mat& w = *params[p];
    const Mat& g = *grads[p];
    if (w.rows() != g.rows() || w.cols() != g.cols())
      throw Error("adam_step: shape mismatch at parameter " + std::to_string(p));
    if (hp.weight_decay != 0.0) w -= hp.lr * hp.weight_decay * w;
    Mat& m = state.first_moment[p];
    Mat& v = state.second_moment[p];
    m = hp.beta1 * m + (1.0 - hp.beta1) * g;
    v = hp.beta2 * v + (1.0 - hp.beta2) * g.cwiseProduct(g);
    const Mat m_hat = m / bc1;
    const Mat v_hat = v / bc2;
    w.array() -= hp.lr * m_hat.array() / (v_hat.array().sqrt() + hp.eps);
  }
}

Real grad_check(const std::function<Real(const Vec&)>& f, const Vec& analytic_grad,
                const Vec& point, Real h) {
  if (!(h > 0.0)) throw Error("grad_check: h must be > 0");
  if (analytic_grad.size() != point.size()) throw Error("grad_check: size mismatch");
  Real worst = 0.0;
  Vec x = point;
  for (Eigen::Index i = 0; i < point.size(); ++i) {
    const Real saved = x[i];
    x[i] = saved + h;
    const Real up = f(x);
    x[i] = saved - h;
    const Real down = f(x);
    x[i] = saved;
    const Real fd = (up - down) / (2.0 * h);
    const Real denom = std::max(Real(1.0), std::abs(analytic_grad[i]));
    worst = std::max(worst, std::abs(fd - analytic_grad[i]) / denom);
  }
  return worst;
}

void write_matrix(std::ostream& out, const Mat& m) {
  out << m.rows() << ' ' << m.cols() << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j > 0) out << ' ';
      out << real_to_text(m(i, j));
    }
    out << '\n';
  }
}

Mat read_matrix(std::istream& in) {
  Eigen::Index rows = 0, cols = 0;
  if (!(in >> rows >> cols)) throw Error("bad matrix header");
  Mat m(rows, cols);
  std::string tok;
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) {
      if (!(in >> tok)) throw Error("truncated matrix");
      m(i, j) = text_to_real(tok);
    }
  return m;
}

void write_matrix_file(const std::string& path, const Mat& m) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  write_matrix(out, m);
  if (!out) throw Error("write failed: " + path);
}

Mat read_matrix_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return read_matrix(in);
}

}  // namespace mgcn
