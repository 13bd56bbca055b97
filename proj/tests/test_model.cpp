#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mgcn/ingest.hpp"
#include "mgcn/model.hpp"
#include "mgcn/rng.hpp"
#include "testutil.hpp"

using namespace mgcn;
using testutil::dense_from_rows;

namespace {

struct SmallInstance {
  FeatureMatrix x;
  SparseGraph graph;  // with self-loops
  PropagationStack prop;
  RowStochasticMatrix layer1;
  ModelParams params;
  LabelVector labels;
  BoolMask mask;
};

SmallInstance make_instance(int n, int f, int hidden, int n_classes, std::uint64_t seed) {
  RngStream rng(seed);
  SmallInstance inst;
  inst.x.data = testutil::random_matrix(n, f, rng, 0.05, 1.0);
  for (int j = 0; j < f; ++j) inst.x.feature_names.push_back("f" + std::to_string(j));
  inst.graph = testutil::random_graph(n, 0.4, rng, true);
  inst.layer1 = transition_matrix(inst.graph);
  MarkovConfig mc;
  mc.nlayers = 2;
  inst.prop = propagation_from_stack(markov_process_agg(inst.graph, mc));
  RngStream prng(seed + 1);
  inst.params = init_params({f, hidden, n_classes, 2}, prng);
  for (int k = 0; k < n_classes; ++k)
    inst.labels.class_names.push_back(std::string(1, 'a' + k));
  inst.mask.assign(n, 0);
  for (int i = 0; i < n; ++i) {
    inst.labels.labels.push_back(static_cast<int>(rng.next_below(n_classes)));
    inst.mask[i] = rng.next_double() < 0.7 ? 1 : 0;
  }
  inst.mask[0] = 1;
  return inst;
}

// Independent dense reimplementation of the layer recurrence.
Mat oracle_embeddings(const SmallInstance& inst) {
  Mat h = inst.x.data;
  for (std::size_t l = 0; l < inst.prop.mats.size(); ++l) {
    const Mat m = dense_from_rows(inst.prop.mats[l], inst.prop.n_nodes);
    Mat z = m * h * inst.params.gcn_w[l];
    for (Eigen::Index i = 0; i < z.rows(); ++i)
      for (Eigen::Index j = 0; j < z.cols(); ++j) z(i, j) = std::max(z(i, j), 0.0);
    h = z;
  }
  return h;
}

// Plain-loop two-layer perceptron on the concatenated endpoint embeddings.
Real oracle_edge_pred(const Mat& emb, int i, int j, const ModelParams& p) {
  const int hidden = static_cast<int>(emb.cols());
  std::vector<Real> concat(2 * static_cast<std::size_t>(hidden));
  for (int t = 0; t < hidden; ++t) {
    concat[t] = emb(i, t);
    concat[hidden + t] = emb(j, t);
  }
  Real out = p.mlp_b2(0, 0);
  for (Eigen::Index u = 0; u < p.mlp_w1.cols(); ++u) {
    Real z = p.mlp_b1(0, u);
    for (int t = 0; t < 2 * hidden; ++t) z += concat[t] * p.mlp_w1(t, u);
    const Real act = z > 0.0 ? z : 0.0;
    out += act * p.mlp_w2(u, 0);
  }
  return out;
}

std::vector<Mat*> tensor_list(ModelParams& p, bool with_mlp, bool with_cls) {
  std::vector<Mat*> out;
  for (auto& w : p.gcn_w) out.push_back(&w);
  if (with_mlp) {
    out.push_back(&p.mlp_w1);
    out.push_back(&p.mlp_b1);
    out.push_back(&p.mlp_w2);
    out.push_back(&p.mlp_b2);
  }
  if (with_cls) {
    out.push_back(&p.cls_w);
    out.push_back(&p.cls_b);
  }
  return out;
}

std::vector<const Mat*> grad_list(const ParamGrads& g, bool with_mlp, bool with_cls) {
  std::vector<const Mat*> out;
  for (const auto& w : g.gcn_w) out.push_back(&w);
  if (with_mlp) {
    out.push_back(&g.mlp_w1);
    out.push_back(&g.mlp_b1);
    out.push_back(&g.mlp_w2);
    out.push_back(&g.mlp_b2);
  }
  if (with_cls) {
    out.push_back(&g.cls_w);
    out.push_back(&g.cls_b);
  }
  return out;
}

Vec flatten(const std::vector<const Mat*>& tensors) {
  Eigen::Index total = 0;
  for (const Mat* t : tensors) total += t->size();
  Vec v(total);
  Eigen::Index at = 0;
  for (const Mat* t : tensors)
    for (Eigen::Index i = 0; i < t->rows(); ++i)
      for (Eigen::Index j = 0; j < t->cols(); ++j) v[at++] = (*t)(i, j);
  return v;
}

Vec flatten(const std::vector<Mat*>& tensors) {
  return flatten(std::vector<const Mat*>(tensors.begin(), tensors.end()));
}

void unflatten(const Vec& v, const std::vector<Mat*>& tensors) {
  Eigen::Index at = 0;
  for (Mat* t : tensors)
    for (Eigen::Index i = 0; i < t->rows(); ++i)
      for (Eigen::Index j = 0; j < t->cols(); ++j) (*t)(i, j) = v[at++];
}

// ReLU kinks near zero break finite differences; keep instances whose
// pre-activations stay clear of the probe radius.
bool well_conditioned(const SmallInstance& inst, const PretextBatch& batch, Real margin) {
  const ForwardTrace trace = gcn_forward(inst.prop, inst.x, inst.params);
  for (const Mat& z : trace.z)
    if (z.cwiseAbs().minCoeff() < margin) return false;
  const EdgeHeadTrace head =
      edge_head_forward_trace(trace.embeddings, batch.edges, inst.params);
  return head.z1.cwiseAbs().minCoeff() >= margin;
}

}  // namespace

TEST_CASE("gcn_forward: single self-looped node is the identity pipeline") {
  SmallInstance inst;
  inst.x.data = Mat::Constant(1, 1, 2.0);
  inst.x.feature_names = {"f0"};
  inst.prop.n_nodes = 1;
  inst.prop.mats = {SparseRows{{{0, 1.0}}}};
  inst.params.gcn_w = {Mat::Constant(1, 1, 1.0)};
  inst.params.mlp_w1 = Mat::Zero(2, 1);
  inst.params.mlp_b1 = Mat::Zero(1, 1);
  inst.params.mlp_w2 = Mat::Zero(1, 1);
  inst.params.mlp_b2 = Mat::Zero(1, 1);
  inst.params.cls_w = Mat::Zero(1, 2);
  inst.params.cls_b = Mat::Zero(1, 2);
  const ForwardTrace trace = gcn_forward(inst.prop, inst.x, inst.params);
  CHECK(trace.embeddings(0, 0) == 2.0);
}

TEST_CASE("gcn_forward: zero classifier gives uniform log-probabilities") {
  SmallInstance inst = make_instance(6, 3, 4, 3, 100);
  inst.params.cls_w.setZero();
  inst.params.cls_b.setZero();
  const ForwardTrace trace = gcn_forward(inst.prop, inst.x, inst.params);
  const Real uniform = std::log(1.0 / 3.0);
  CHECK((trace.logp.array() - uniform).abs().maxCoeff() < 1e-15);
}

TEST_CASE("gcn_forward: matches the dense oracle on random instances") {
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    const SmallInstance inst = make_instance(8, 3, 5, 3, 200 + seed);
    const ForwardTrace trace = gcn_forward(inst.prop, inst.x, inst.params);
    const Mat expect = oracle_embeddings(inst);
    CHECK((trace.embeddings - expect).cwiseAbs().maxCoeff() < 1e-10);

    // Log-probabilities via an independent per-row log-sum-exp.
    Mat logits = expect * inst.params.cls_w;
    logits.rowwise() += inst.params.cls_b.row(0);
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
      const Real mx = logits.row(i).maxCoeff();
      Real sum = 0.0;
      for (Eigen::Index c = 0; c < logits.cols(); ++c) sum += std::exp(logits(i, c) - mx);
      for (Eigen::Index c = 0; c < logits.cols(); ++c) {
        const Real expect_lp = logits(i, c) - mx - std::log(sum);
        CHECK(std::abs(trace.logp(i, c) - expect_lp) < 1e-10);
      }
    }
  }
}

TEST_CASE("gcn_forward: shape errors") {
  SmallInstance inst = make_instance(6, 3, 4, 2, 300);
  PropagationStack short_stack = inst.prop;
  short_stack.mats.pop_back();
  CHECK_THROWS_AS(gcn_forward(short_stack, inst.x, inst.params), Error);

  FeatureMatrix wrong = inst.x;
  wrong.data.conservativeResize(5, Eigen::NoChange);
  CHECK_THROWS_AS(gcn_forward(inst.prop, wrong, inst.params), Error);
}

TEST_CASE("edge_head_forward: zero weights give the bias, order matters") {
  SmallInstance inst = make_instance(5, 3, 4, 2, 400);
  const ForwardTrace trace = gcn_forward(inst.prop, inst.x, inst.params);

  ModelParams zeroed = inst.params;
  zeroed.mlp_w1.setZero();
  zeroed.mlp_w2.setZero();
  zeroed.mlp_b1.setZero();
  zeroed.mlp_b2(0, 0) = 0.75;
  const EdgeList edges{{0, 1}, {2, 3}, {4, 0}};
  const Vec pred = edge_head_forward(trace.embeddings, edges, zeroed);
  for (Eigen::Index e = 0; e < pred.size(); ++e) CHECK(pred[e] == 0.75);

  // Concatenation is ordered: (i,j) and (j,i) differ in general.
  const Vec fwd = edge_head_forward(trace.embeddings, {{0, 1}}, inst.params);
  const Vec rev = edge_head_forward(trace.embeddings, {{1, 0}}, inst.params);
  CHECK(fwd[0] != rev[0]);
}

TEST_CASE("edge_head_forward: matches a hand-rolled perceptron oracle") {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const SmallInstance inst = make_instance(7, 3, 4, 2, 500 + seed);
    const ForwardTrace trace = gcn_forward(inst.prop, inst.x, inst.params);
    EdgeList edges;
    for (int i = 0; i < 7; ++i) edges.emplace_back(i, (i * 3 + 1) % 7);
    const Vec pred = edge_head_forward(trace.embeddings, edges, inst.params);
    for (std::size_t e = 0; e < edges.size(); ++e) {
      const Real expect =
          oracle_edge_pred(trace.embeddings, edges[e].first, edges[e].second, inst.params);
      CHECK(std::abs(pred[static_cast<Eigen::Index>(e)] - expect) < 1e-12);
    }
  }
}

TEST_CASE("pretext loss equals the mse of the forward predictions") {
  const SmallInstance inst = make_instance(9, 3, 4, 2, 600);
  const PretextBatch batch = pretext_batch(inst.layer1);
  const Real loss = pretext_loss_grads(inst.prop, inst.x, inst.params, batch, nullptr);

  const ForwardTrace trace = gcn_forward(inst.prop, inst.x, inst.params);
  const Vec pred = edge_head_forward(trace.embeddings, batch.edges, inst.params);
  CHECK(loss == doctest::Approx(mse_loss(pred, batch.targets).loss).epsilon(1e-15));
}

TEST_CASE("pretext gradients pass the finite-difference check") {
  int checked = 0;
  for (std::uint64_t seed = 700; checked < 5 && seed < 760; ++seed) {
    SmallInstance inst = make_instance(8, 3, 4, 2, seed);
    const PretextBatch batch = pretext_batch(inst.layer1);
    if (!well_conditioned(inst, batch, 1e-3)) continue;
    ++checked;

    ParamGrads grads;
    pretext_loss_grads(inst.prop, inst.x, inst.params, batch, &grads);
    const Vec point = flatten(tensor_list(inst.params, true, false));
    const Vec analytic = flatten(grad_list(grads, true, false));
    const auto f = [&](const Vec& v) {
      ModelParams local = inst.params;
      unflatten(v, tensor_list(local, true, false));
      return pretext_loss_grads(inst.prop, inst.x, local, batch, nullptr);
    };
    CHECK(grad_check(f, analytic, point, 1e-5) < 1e-4);
  }
  CHECK(checked == 5);
}

TEST_CASE("finetune gradients pass the finite-difference check") {
  int checked = 0;
  for (std::uint64_t seed = 800; checked < 5 && seed < 860; ++seed) {
    SmallInstance inst = make_instance(10, 4, 4, 3, seed);
    const PretextBatch batch = pretext_batch(inst.layer1);
    if (!well_conditioned(inst, batch, 1e-3)) continue;
    ++checked;

    ParamGrads grads;
    finetune_loss_grads(inst.prop, inst.x, inst.params, inst.labels, inst.mask, &grads);
    const Vec point = flatten(tensor_list(inst.params, false, true));
    const Vec analytic = flatten(grad_list(grads, false, true));
    const auto f = [&](const Vec& v) {
      ModelParams local = inst.params;
      unflatten(v, tensor_list(local, false, true));
      return finetune_loss_grads(inst.prop, inst.x, local, inst.labels, inst.mask, nullptr);
    };
    CHECK(grad_check(f, analytic, point, 1e-5) < 1e-4);
  }
  CHECK(checked == 5);
}

TEST_CASE("finetune: zero classifier starts at ln C") {
  SmallInstance inst = make_instance(10, 3, 4, 3, 900);
  inst.params.cls_w.setZero();
  inst.params.cls_b.setZero();
  const Real loss =
      finetune_loss_grads(inst.prop, inst.x, inst.params, inst.labels, inst.mask, nullptr);
  CHECK(loss == doctest::Approx(std::log(3.0)).epsilon(1e-12));
}

TEST_CASE("pretext_step: 50 steps halve the loss on a small synthetic graph") {
  const RecordTable t = synth_dataset(10, 3, 8, 6.0, 5);
  const Preprocessed pre = preprocess(t);
  const SparseGraph g = add_self_loops(knn_graph(pre.features, 3, 0));
  const RowStochasticMatrix layer1 = transition_matrix(g);
  MarkovConfig mc;
  mc.nlayers = 2;
  const PropagationStack prop = propagation_from_stack(markov_process_agg(g, mc));
  RngStream rng(5);
  ModelParams params =
      init_params({static_cast<int>(pre.features.data.cols()), 16, 3, 2}, rng);
  const PretextBatch batch = pretext_batch(layer1);
  AdamState state = make_adam_state({&params.gcn_w[0], &params.gcn_w[1], &params.mlp_w1,
                                     &params.mlp_b1, &params.mlp_w2, &params.mlp_b2});
  const AdamHyper hp;
  Real initial = 0.0, last = 0.0;
  for (int step = 0; step < 50; ++step) {
    const Real loss = pretext_step(prop, pre.features, params, batch, state, hp);
    if (step == 0) initial = loss;
    last = loss;
  }
  CHECK(last < 0.5 * initial);
}

TEST_CASE("pretext loss decreases in the median over 10 seeds") {
  std::vector<Real> initial, final_losses;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SmallInstance inst = make_instance(12, 4, 6, 2, 1000 + seed);
    const PretextBatch batch = pretext_batch(inst.layer1);
    AdamState state = make_adam_state({&inst.params.gcn_w[0], &inst.params.gcn_w[1],
                                       &inst.params.mlp_w1, &inst.params.mlp_b1,
                                       &inst.params.mlp_w2, &inst.params.mlp_b2});
    const AdamHyper hp;
    Real first = 0.0, last = 0.0;
    for (int step = 0; step < 30; ++step) {
      const Real loss = pretext_step(inst.prop, inst.x, inst.params, batch, state, hp);
      if (step == 0) first = loss;
      last = loss;
    }
    initial.push_back(first);
    final_losses.push_back(last);
  }
  std::sort(initial.begin(), initial.end());
  std::sort(final_losses.begin(), final_losses.end());
  CHECK(final_losses[5] < initial[5]);
}

TEST_CASE("freezing contracts: heads stay untouched by the other phase") {
  SmallInstance inst = make_instance(9, 3, 4, 3, 1100);
  const PretextBatch batch = pretext_batch(inst.layer1);
  const AdamHyper hp;

  const Mat cls_w_before = inst.params.cls_w, cls_b_before = inst.params.cls_b;
  AdamState pre_state = make_adam_state({&inst.params.gcn_w[0], &inst.params.gcn_w[1],
                                         &inst.params.mlp_w1, &inst.params.mlp_b1,
                                         &inst.params.mlp_w2, &inst.params.mlp_b2});
  for (int s = 0; s < 3; ++s)
    pretext_step(inst.prop, inst.x, inst.params, batch, pre_state, hp);
  CHECK((inst.params.cls_w - cls_w_before).cwiseAbs().maxCoeff() == 0.0);
  CHECK((inst.params.cls_b - cls_b_before).cwiseAbs().maxCoeff() == 0.0);

  const Mat w1 = inst.params.mlp_w1, b1 = inst.params.mlp_b1;
  const Mat w2 = inst.params.mlp_w2, b2 = inst.params.mlp_b2;
  AdamState ft_state = make_adam_state({&inst.params.gcn_w[0], &inst.params.gcn_w[1],
                                        &inst.params.cls_w, &inst.params.cls_b});
  for (int s = 0; s < 3; ++s)
    finetune_step(inst.prop, inst.x, inst.params, inst.labels, inst.mask, ft_state, hp);
  CHECK((inst.params.mlp_w1 - w1).cwiseAbs().maxCoeff() == 0.0);
  CHECK((inst.params.mlp_b1 - b1).cwiseAbs().maxCoeff() == 0.0);
  CHECK((inst.params.mlp_w2 - w2).cwiseAbs().maxCoeff() == 0.0);
  CHECK((inst.params.mlp_b2 - b2).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("predict: argmax with low-id tie-break and shift invariance") {
  Mat logp(3, 3);
  logp << -0.1, -5, -5, -5, -0.1, -5, -5, -5, -0.1;
  const LabelVector p = predict(logp, {"a", "b", "c"});
  CHECK(p.labels == std::vector<int>{0, 1, 2});

  const Mat uniform = Mat::Constant(2, 4, std::log(0.25));
  CHECK(predict(uniform, {"a", "b", "c", "d"}).labels == std::vector<int>{0, 0});

  RngStream rng(7);
  const Mat logits = testutil::random_matrix(6, 4, rng);
  Mat shifted = logits;
  shifted.array() += 3.25;
  Mat scaled = logits * 2.5;  // positive affine maps preserve the argmax
  CHECK(predict(log_softmax_rows(logits), {"a", "b", "c", "d"}).labels ==
        predict(log_softmax_rows(shifted), {"a", "b", "c", "d"}).labels);
  CHECK(predict(log_softmax_rows(logits), {"a", "b", "c", "d"}).labels ==
        predict(log_softmax_rows(scaled), {"a", "b", "c", "d"}).labels);
}

TEST_CASE("permutation equivariance of the forward pass") {
  const int n = 10;
  SmallInstance inst = make_instance(n, 3, 4, 3, 1200);

  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  RngStream rng(77);
  rng.shuffle(perm);

  SmallInstance permuted = inst;
  for (int i = 0; i < n; ++i) permuted.x.data.row(perm[i]) = inst.x.data.row(i);
  SparseGraph pg;
  pg.n_nodes = n;
  for (const auto& e : inst.graph.edges)
    pg.edges.push_back({perm[e.src], perm[e.dst], e.weight});
  std::sort(pg.edges.begin(), pg.edges.end(), [](const Edge& a, const Edge& b) {
    return a.src != b.src ? a.src < b.src : a.dst < b.dst;
  });
  permuted.graph = pg;
  MarkovConfig mc;
  mc.nlayers = 2;
  permuted.prop = propagation_from_stack(markov_process_agg(pg, mc));

  const ForwardTrace base = gcn_forward(inst.prop, inst.x, inst.params);
  const ForwardTrace shuf = gcn_forward(permuted.prop, permuted.x, permuted.params);
  for (int i = 0; i < n; ++i)
    CHECK((base.embeddings.row(i) - shuf.embeddings.row(perm[i])).cwiseAbs().maxCoeff() <
          1e-12);
  const LabelVector pred_base = predict(base.logp, inst.labels.class_names);
  const LabelVector pred_shuf = predict(shuf.logp, inst.labels.class_names);
  for (int i = 0; i < n; ++i) CHECK(pred_base.labels[i] == pred_shuf.labels[perm[i]]);
}

TEST_CASE("train_pipeline: 200 fine-tune epochs master separable blobs") {
  const RecordTable t = synth_dataset(100, 3, 8, 6.0, 11);
  const Preprocessed pre = preprocess(t);
  DatasetBundle data{pre.features, pre.labels,
                     stratified_split(pre.labels, {0.6, 0.2, 0.2}, 11)};
  TrainConfig cfg;
  cfg.hidden_dim = 32;
  cfg.pretext_epochs = 1;
  cfg.fine_tune_epochs = 200;
  cfg.mode = TrainConfig::Mode::scratch;
  cfg.seed = 11;
  const TrainResult result = train_pipeline(data, cfg);

  // Train-mask accuracy from the returned parameters.
  const SparseGraph g = add_self_loops(knn_graph(data.X, cfg.k_neighbors, cfg.seed));
  const PropagationStack prop = propagation_from_stack(markov_process_agg(g, cfg.markov));
  const ForwardTrace trace = gcn_forward(prop, data.X, result.params);
  const LabelVector pred = predict(trace.logp, data.y.class_names);
  long hit = 0, total = 0;
  for (std::size_t i = 0; i < data.y.labels.size(); ++i) {
    if (!data.masks.train[i]) continue;
    ++total;
    if (pred.labels[i] == data.y.labels[i]) ++hit;
  }
  CHECK(static_cast<Real>(hit) / static_cast<Real>(total) >= 0.99);
}

TEST_CASE("train_pipeline: deterministic and structurally mode-independent") {
  const RecordTable t = synth_dataset(12, 3, 6, 6.0, 3);
  const Preprocessed pre = preprocess(t);
  DatasetBundle data{pre.features, pre.labels,
                     stratified_split(pre.labels, {0.6, 0.2, 0.2}, 3)};
  TrainConfig cfg;
  cfg.hidden_dim = 8;
  cfg.pretext_epochs = 5;
  cfg.fine_tune_epochs = 10;
  cfg.k_neighbors = 4;
  cfg.seed = 3;

  const TrainResult a = train_pipeline(data, cfg);
  const TrainResult b = train_pipeline(data, cfg);
  CHECK(a.report == b.report);
  CHECK(a.report.wall_clock_seconds == 0.0);
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    CHECK(a.history[i].loss == b.history[i].loss);
    CHECK(a.history[i].val_accuracy == b.history[i].val_accuracy);
  }
  for (std::size_t l = 0; l < a.params.gcn_w.size(); ++l)
    CHECK((a.params.gcn_w[l] - b.params.gcn_w[l]).cwiseAbs().maxCoeff() == 0.0);

  cfg.mode = TrainConfig::Mode::scratch;
  const TrainResult scratch = train_pipeline(data, cfg);
  REQUIRE(scratch.params.gcn_w.size() == a.params.gcn_w.size());
  for (std::size_t l = 0; l < a.params.gcn_w.size(); ++l) {
    CHECK(scratch.params.gcn_w[l].rows() == a.params.gcn_w[l].rows());
    CHECK(scratch.params.gcn_w[l].cols() == a.params.gcn_w[l].cols());
  }
  CHECK(scratch.params.cls_w.rows() == a.params.cls_w.rows());
  // Scratch mode records no pretext epochs.
  for (const auto& rec : scratch.history) CHECK(rec.phase == "finetune");
}

TEST_CASE("train_pipeline: non-finite loss aborts with a diagnostic") {
  const RecordTable t = synth_dataset(8, 2, 4, 6.0, 9);
  const Preprocessed pre = preprocess(t);
  DatasetBundle data{pre.features, pre.labels,
                     stratified_split(pre.labels, {0.6, 0.2, 0.2}, 9)};
  // A huge magnitude survives graph construction but overflows the squared
  // pretext error into +inf on the first epoch.
  data.X.data(0, 0) = 1e200;
  TrainConfig cfg;
  cfg.hidden_dim = 4;
  cfg.pretext_epochs = 2;
  cfg.fine_tune_epochs = 2;
  cfg.k_neighbors = 3;
  cfg.seed = 9;
  cfg.mode = TrainConfig::Mode::ssl;
  CHECK_THROWS_WITH_AS(train_pipeline(data, cfg), doctest::Contains("non-finite"), Error);
}

TEST_CASE("checkpoint round-trips parameters and config echo bit-faithfully") {
  RngStream rng(13);
  const ModelParams params = init_params({5, 4, 3, 2}, rng);
  TrainConfig cfg;
  cfg.seed = 99;
  cfg.hidden_dim = 4;
  const auto echo = train_config_echo(cfg);

  const std::string dir = testutil::fresh_dir("ckpt");
  write_checkpoint(dir + "/ckpt.txt", params, echo);
  const auto [back, echo2] = read_checkpoint(dir + "/ckpt.txt");
  CHECK(echo2 == echo);
  REQUIRE(back.gcn_w.size() == params.gcn_w.size());
  for (std::size_t l = 0; l < params.gcn_w.size(); ++l)
    CHECK((back.gcn_w[l] - params.gcn_w[l]).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.mlp_w1 - params.mlp_w1).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.mlp_b1 - params.mlp_b1).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.mlp_w2 - params.mlp_w2).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.mlp_b2 - params.mlp_b2).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.cls_w - params.cls_w).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.cls_b - params.cls_b).cwiseAbs().maxCoeff() == 0.0);

  const TrainConfig cfg2 = train_config_from_echo(echo2);
  CHECK(cfg2.seed == cfg.seed);
  CHECK(cfg2.hidden_dim == cfg.hidden_dim);
  CHECK(cfg2.markov.nlayers == cfg.markov.nlayers);
}
