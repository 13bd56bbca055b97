#include "mgcn/model.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

namespace mgcn {

namespace {

std::vector<Mat*> pretext_trainables(ModelParams& p) {
  std::vector<Mat*> out;
  for (auto& w : p.gcn_w) out.push_back(&w);
  out.push_back(&p.mlp_w1);
  out.push_back(&p.mlp_b1);
  out.push_back(&p.mlp_w2);
  out.push_back(&p.mlp_b2);
  return out;
}

std::vector<Mat*> finetune_trainables(ModelParams& p) {
  std::vector<Mat*> out;
  for (auto& w : p.gcn_w) out.push_back(&w);
  out.push_back(&p.cls_w);
  out.push_back(&p.cls_b);
  return out;
}

std::vector<const Mat*> const_view(const std::vector<Mat*>& v) {
  return {v.begin(), v.end()};
}

// Shared backward pass from d(embeddings) down through the GCN layers.
void backprop_gcn(const PropagationStack& prop, const ModelParams& params,
                  const ForwardTrace& trace, Mat d_h, std::vector<Mat>& d_gcn_w) {
  const int layers = static_cast<int>(params.gcn_w.size());
  d_gcn_w.resize(layers);
  for (int l = layers - 1; l >= 0; --l) {
    const Mat d_z = d_h.cwiseProduct(relu_mask(trace.z[l]));
    d_gcn_w[l] = trace.propagated[l].transpose() * d_z;
    if (l > 0) d_h = spmm_transpose(prop.mats[l], d_z * params.gcn_w[l].transpose());
  }
}

Real checked_loss(Real loss, const char* phase, int epoch) {
  if (!std::isfinite(loss))
    throw Error(std::string(phase) + " loss became non-finite at epoch " +
                std::to_string(epoch) + "; lower the learning rate or inflation");
  return loss;
}

}  // namespace

ModelParams init_params(const ModelDims& dims, RngStream& rng) {
  if (dims.in_features < 1 || dims.hidden < 1 || dims.n_classes < 2 || dims.n_layers < 1)
    throw Error("init_params: bad dimensions");
  ModelParams p;
  p.gcn_w.reserve(dims.n_layers);
  int in_dim = dims.in_features;
  for (int l = 0; l < dims.n_layers; ++l) {
    p.gcn_w.push_back(glorot_init(in_dim, dims.hidden, rng));
    in_dim = dims.hidden;
  }
  p.mlp_w1 = glorot_init(2 * dims.hidden, dims.hidden, rng);
  p.mlp_b1 = Mat::Zero(1, dims.hidden);
  p.mlp_w2 = glorot_init(dims.hidden, 1, rng);
  p.mlp_b2 = Mat::Zero(1, 1);
  p.cls_w = glorot_init(dims.hidden, dims.n_classes, rng);
  p.cls_b = Mat::Zero(1, dims.n_classes);
  return p;
}

ModelDims dims_of(const ModelParams& params) {
  ModelDims d;
  d.n_layers = static_cast<int>(params.gcn_w.size());
  d.in_features = static_cast<int>(params.gcn_w.front().rows());
  d.hidden = static_cast<int>(params.gcn_w.back().cols());
  d.n_classes = static_cast<int>(params.cls_w.cols());
  return d;
}

PropagationStack propagation_from_stack(const MarkovLayerStack& stack) {
  PropagationStack prop;
  prop.n_nodes = stack.n_nodes();
  for (const auto& layer : stack.layers) prop.mats.push_back(layer.rows);
  return prop;
}

PropagationStack propagation_symmetric(const SparseGraph& normalized, int n_layers) {
  PropagationStack prop;
  prop.n_nodes = normalized.n_nodes;
  const SparseRows rows = sparse_rows(normalized);
  for (int l = 0; l < n_layers; ++l) prop.mats.push_back(rows);
  return prop;
}

ForwardTrace gcn_forward(const PropagationStack& prop, const FeatureMatrix& x,
                         const ModelParams& params) {
  const int layers = static_cast<int>(params.gcn_w.size());
  if (static_cast<int>(prop.mats.size()) != layers)
    throw Error("gcn_forward: stack depth " + std::to_string(prop.mats.size()) +
                " does not match " + std::to_string(layers) + " GCN layers");
  if (x.data.rows() != prop.n_nodes)
    throw Error("gcn_forward: feature rows do not match graph nodes");

  ForwardTrace trace;
  trace.propagated.reserve(layers);
  trace.z.reserve(layers);
  trace.h.reserve(layers);
  const Mat* h_prev = &x.data;
  for (int l = 0; l < layers; ++l) {
    if (h_prev->cols() != params.gcn_w[l].rows())
      throw Error("gcn_forward: dimension mismatch at layer " + std::to_string(l));
    trace.propagated.push_back(spmm(prop.mats[l], *h_prev));
    trace.z.push_back(trace.propagated.back() * params.gcn_w[l]);
    trace.h.push_back(relu(trace.z.back()));
    h_prev = &trace.h.back();
  }
  trace.embeddings = trace.h.back();
  trace.logits = trace.embeddings * params.cls_w;
  trace.logits.rowwise() += params.cls_b.row(0);
  trace.logp = log_softmax_rows(trace.logits);
  return trace;
}

EdgeHeadTrace edge_head_forward_trace(const Mat& embeddings, const EdgeList& edges,
                                      const ModelParams& params) {
  const int hidden = static_cast<int>(embeddings.cols());
  EdgeHeadTrace t;
  t.concat.resize(static_cast<Eigen::Index>(edges.size()), 2 * hidden);
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto [i, j] = edges[e];
    if (i < 0 || i >= embeddings.rows() || j < 0 || j >= embeddings.rows())
      throw Error("edge_head: edge endpoint out of range");
    t.concat.row(static_cast<Eigen::Index>(e)) << embeddings.row(i), embeddings.row(j);
  }
  t.z1 = t.concat * params.mlp_w1;
  t.z1.rowwise() += params.mlp_b1.row(0);
  t.hidden = relu(t.z1);
  t.pred = (t.hidden * params.mlp_w2).col(0).array() + params.mlp_b2(0, 0);
  return t;
}

Vec edge_head_forward(const Mat& embeddings, const EdgeList& edges, const ModelParams& params) {
  return edge_head_forward_trace(embeddings, edges, params).pred;
}

PretextBatch pretext_batch(const RowStochasticMatrix& layer1) {
  PretextBatch batch;
  std::size_t n_entries = 0;
  for (const auto& row : layer1.rows) n_entries += row.size();
  batch.edges.reserve(n_entries);
  batch.targets.resize(static_cast<Eigen::Index>(n_entries));
  Eigen::Index t = 0;
  for (int i = 0; i < layer1.n_nodes; ++i)
    for (const auto& e : layer1.rows[i]) {
      batch.edges.emplace_back(i, e.col);
      batch.targets[t++] = e.value;
    }
  return batch;
}

Real pretext_loss_grads(const PropagationStack& prop, const FeatureMatrix& x,
                        const ModelParams& params, const PretextBatch& batch,
                        ParamGrads* grads) {
  const ForwardTrace trace = gcn_forward(prop, x, params);
  const EdgeHeadTrace head = edge_head_forward_trace(trace.embeddings, batch.edges, params);
  const MseResult mse = mse_loss(head.pred, batch.targets);
  if (grads == nullptr) return mse.loss;

  const Mat d_hidden = mse.grad * params.mlp_w2.transpose();
  const Mat d_z1 = d_hidden.cwiseProduct(relu_mask(head.z1));
  grads->mlp_w2 = head.hidden.transpose() * mse.grad;
  grads->mlp_b2 = Mat::Constant(1, 1, mse.grad.sum());
  grads->mlp_w1 = head.concat.transpose() * d_z1;
  grads->mlp_b1 = d_z1.colwise().sum();

  const int hidden = static_cast<int>(trace.embeddings.cols());
  const Mat d_concat = d_z1 * params.mlp_w1.transpose();
  Mat d_emb = Mat::Zero(trace.embeddings.rows(), hidden);
  for (std::size_t e = 0; e < batch.edges.size(); ++e) {
    const auto [i, j] = batch.edges[e];
    d_emb.row(i) += d_concat.row(static_cast<Eigen::Index>(e)).head(hidden);
    d_emb.row(j) += d_concat.row(static_cast<Eigen::Index>(e)).tail(hidden);
  }
  backprop_gcn(prop, params, trace, std::move(d_emb), grads->gcn_w);
  grads->cls_w = Mat::Zero(params.cls_w.rows(), params.cls_w.cols());
  grads->cls_b = Mat::Zero(params.cls_b.rows(), params.cls_b.cols());
  return mse.loss;
}

Real finetune_loss_grads(const PropagationStack& prop, const FeatureMatrix& x,
                         const ModelParams& params, const LabelVector& labels,
                         const BoolMask& mask, ParamGrads* grads) {
  const ForwardTrace trace = gcn_forward(prop, x, params);
  const NllResult nll = nll_loss(trace.logp, labels, mask);
  if (grads == nullptr) return nll.loss;

  grads->cls_w = trace.embeddings.transpose() * nll.grad_logits;
  grads->cls_b = nll.grad_logits.colwise().sum();
  Mat d_emb = nll.grad_logits * params.cls_w.transpose();
  backprop_gcn(prop, params, trace, std::move(d_emb), grads->gcn_w);
  grads->mlp_w1 = Mat::Zero(params.mlp_w1.rows(), params.mlp_w1.cols());
  grads->mlp_b1 = Mat::Zero(params.mlp_b1.rows(), params.mlp_b1.cols());
  grads->mlp_w2 = Mat::Zero(params.mlp_w2.rows(), params.mlp_w2.cols());
  grads->mlp_b2 = Mat::Zero(params.mlp_b2.rows(), params.mlp_b2.cols());
  return nll.loss;
}

Real pretext_step(const PropagationStack& prop, const FeatureMatrix& x, ModelParams& params,
                  const PretextBatch& batch, AdamState& state, const AdamHyper& hp) {
  ParamGrads grads;
  const Real loss = pretext_loss_grads(prop, x, params, batch, &grads);
  std::vector<const Mat*> grad_list;
  for (const auto& g : grads.gcn_w) grad_list.push_back(&g);
  grad_list.push_back(&grads.mlp_w1);
  grad_list.push_back(&grads.mlp_b1);
  grad_list.push_back(&grads.mlp_w2);
  grad_list.push_back(&grads.mlp_b2);
  adam_step(pretext_trainables(params), grad_list, state, hp);
  return loss;
}

Real finetune_step(const PropagationStack& prop, const FeatureMatrix& x, ModelParams& params,
                   const LabelVector& labels, const BoolMask& mask, AdamState& state,
                   const AdamHyper& hp) {
  ParamGrads grads;
  const Real loss = finetune_loss_grads(prop, x, params, labels, mask, &grads);
  std::vector<const Mat*> grad_list;
  for (const auto& g : grads.gcn_w) grad_list.push_back(&g);
  grad_list.push_back(&grads.cls_w);
  grad_list.push_back(&grads.cls_b);
  adam_step(finetune_trainables(params), grad_list, state, hp);
  return loss;
}

LabelVector predict(const Mat& logp, const std::vector<std::string>& class_names) {
  LabelVector out;
  out.class_names = class_names;
  out.labels.resize(static_cast<std::size_t>(logp.rows()));
  for (Eigen::Index i = 0; i < logp.rows(); ++i) {
    int best = 0;
    for (Eigen::Index c = 1; c < logp.cols(); ++c)
      if (logp(i, c) > logp(i, best)) best = static_cast<int>(c);
    out.labels[static_cast<std::size_t>(i)] = best;
  }
  return out;
}

namespace {

Real masked_accuracy(const std::vector<int>& pred, const std::vector<int>& truth,
                     const BoolMask& mask) {
  long hit = 0, total = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (!mask[i]) continue;
    ++total;
    if (pred[i] == truth[i]) ++hit;
  }
  return total == 0 ? 0.0 : static_cast<Real>(hit) / static_cast<Real>(total);
}

}  // namespace

TrainResult train_pipeline(const DatasetBundle& data, const TrainConfig& cfg) {
  if (cfg.hidden_dim < 1 || cfg.pretext_epochs < 1 || cfg.fine_tune_epochs < 1)
    throw Error("train_pipeline: counts must be >= 1");
  if (!(cfg.lr > 0.0)) throw Error("train_pipeline: lr must be > 0");

  const auto t0 = std::chrono::steady_clock::now();
  const int n = static_cast<int>(data.X.data.rows());
  const int n_classes = data.y.n_classes();

  const SparseGraph knn = knn_graph(data.X, cfg.k_neighbors, cfg.seed);
  const SparseGraph g = add_self_loops(knn);
  const RowStochasticMatrix layer1 = transition_matrix(g);

  PropagationStack prop;
  if (cfg.propagation == TrainConfig::Propagation::markov) {
    prop = propagation_from_stack(markov_process_agg(g, cfg.markov));
  } else {
    prop = propagation_symmetric(symmetric_normalize(g), cfg.markov.nlayers);
  }

  RngStream rng(cfg.seed);
  ModelDims dims{static_cast<int>(data.X.data.cols()), cfg.hidden_dim, n_classes,
                 cfg.markov.nlayers};
  ModelParams params = init_params(dims, rng);
  const AdamHyper hp{cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay};

  TrainResult result;
  if (cfg.mode == TrainConfig::Mode::ssl) {
    const PretextBatch batch = pretext_batch(layer1);
    AdamState state = make_adam_state(const_view(pretext_trainables(params)));
    for (int epoch = 1; epoch <= cfg.pretext_epochs; ++epoch) {
      const Real loss = checked_loss(pretext_step(prop, data.X, params, batch, state, hp),
                                     "pretext", epoch);
      result.history.push_back({"pretext", epoch, loss, -1.0});
    }
    // The pretrained GCN carries over; the classifier head starts fresh.
    params.cls_w = glorot_init(cfg.hidden_dim, n_classes, rng);
    params.cls_b = Mat::Zero(1, n_classes);
  }

  AdamState state = make_adam_state(const_view(finetune_trainables(params)));
  ModelParams best_params = params;
  Real best_val = -1.0;
  int best_epoch = 0;
  for (int epoch = 1; epoch <= cfg.fine_tune_epochs; ++epoch) {
    const Real loss = checked_loss(
        finetune_step(prop, data.X, params, data.y, data.masks.train, state, hp), "finetune",
        epoch);
    const ForwardTrace trace = gcn_forward(prop, data.X, params);
    const LabelVector pred = predict(trace.logp, data.y.class_names);
    const Real val_acc = masked_accuracy(pred.labels, data.y.labels, data.masks.val);
    result.history.push_back({"finetune", epoch, loss, val_acc});
    if (val_acc > best_val) {
      best_val = val_acc;
      best_epoch = epoch;
      best_params = params;
    }
  }

  const ForwardTrace trace = gcn_forward(prop, data.X, best_params);
  const LabelVector pred = predict(trace.logp, data.y.class_names);
  std::vector<int> y_true, y_pred;
  Mat probs(mask_count(data.masks.test), n_classes);
  Eigen::Index r = 0;
  for (int i = 0; i < n; ++i) {
    if (!data.masks.test[i]) continue;
    y_true.push_back(data.y.labels[i]);
    y_pred.push_back(pred.labels[i]);
    probs.row(r++) = trace.logp.row(i).array().exp();
  }

  result.params = std::move(best_params);
  result.best_epoch = best_epoch;
  result.best_val_accuracy = best_val;
  result.report = compute_metrics(y_true, y_pred, probs, data.y.class_names);
  result.report.seed = cfg.seed;
  result.report.config_echo = train_config_echo(cfg);
  // wall_clock_seconds stays 0 in the report so identical runs emit identical
  // bytes; the measured time travels separately.
  result.elapsed_seconds =
      std::chrono::duration<Real>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

namespace {

void write_section(std::ostream& out, const std::string& name, const Mat& m) {
  out << '[' << name << "]\n";
  write_matrix(out, m);
}

}  // namespace

void write_checkpoint(const std::string& path, const ModelParams& params,
                      const std::map<std::string, std::string>& config_echo) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << "MGCN-CHECKPOINT 1\n";
  out << "[config]\n";
  for (const auto& [k, v] : config_echo) out << k << " = " << v << '\n';
  out << "[layers]\n" << params.gcn_w.size() << '\n';
  for (std::size_t l = 0; l < params.gcn_w.size(); ++l)
    write_section(out, "gcn_w " + std::to_string(l), params.gcn_w[l]);
  write_section(out, "mlp_w1", params.mlp_w1);
  write_section(out, "mlp_b1", params.mlp_b1);
  write_section(out, "mlp_w2", params.mlp_w2);
  write_section(out, "mlp_b2", params.mlp_b2);
  write_section(out, "cls_w", params.cls_w);
  write_section(out, "cls_b", params.cls_b);
  out << "END\n";
  if (!out) throw Error("write failed: " + path);
}

std::pair<ModelParams, std::map<std::string, std::string>> read_checkpoint(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != "MGCN-CHECKPOINT 1")
    throw Error(path + ": not a checkpoint file");
  if (!std::getline(in, line) || line != "[config]")
    throw Error(path + ": missing [config] section");

  std::map<std::string, std::string> echo;
  while (std::getline(in, line)) {
    if (line == "[layers]") break;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(path + ": bad config line '" + line + "'");
    std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 1);
    const auto trim = [](std::string& s) {
      s.erase(0, s.find_first_not_of(" \t"));
      s.erase(s.find_last_not_of(" \t") + 1);
    };
    trim(key);
    trim(value);
    echo[key] = value;
  }
  std::size_t n_layers = 0;
  if (!(in >> n_layers)) throw Error(path + ": missing layer count");

  ModelParams params;
  const auto read_section = [&](const std::string& expect) -> Mat {
    std::string tag;
    std::getline(in, tag);  // consume end of previous line
    if (!std::getline(in, tag) || tag != "[" + expect + "]")
      throw Error(path + ": expected section [" + expect + "], got '" + tag + "'");
    return read_matrix(in);
  };
  for (std::size_t l = 0; l < n_layers; ++l)
    params.gcn_w.push_back(read_section("gcn_w " + std::to_string(l)));
  params.mlp_w1 = read_section("mlp_w1");
  params.mlp_b1 = read_section("mlp_b1");
  params.mlp_w2 = read_section("mlp_w2");
  params.mlp_b2 = read_section("mlp_b2");
  params.cls_w = read_section("cls_w");
  params.cls_b = read_section("cls_b");
  return {std::move(params), std::move(echo)};
}

std::map<std::string, std::string> train_config_echo(const TrainConfig& cfg) {
  std::map<std::string, std::string> echo;
  echo["model.hidden_dim"] = std::to_string(cfg.hidden_dim);
  echo["model.propagation"] =
      cfg.propagation == TrainConfig::Propagation::markov ? "markov" : "symmetric";
  echo["train.pretext_epochs"] = std::to_string(cfg.pretext_epochs);
  echo["train.fine_tune_epochs"] = std::to_string(cfg.fine_tune_epochs);
  echo["train.lr"] = real_to_text(cfg.lr);
  echo["train.weight_decay"] = real_to_text(cfg.weight_decay);
  echo["train.mode"] = cfg.mode == TrainConfig::Mode::ssl ? "ssl" : "scratch";
  echo["markov.inflation"] = real_to_text(cfg.markov.inflation);
  echo["markov.epsilon"] = real_to_text(cfg.markov.epsilon);
  echo["markov.nlayers"] = std::to_string(cfg.markov.nlayers);
  echo["markov.expand"] = cfg.markov.expand ? "true" : "false";
  echo["graph.k_neighbors"] = std::to_string(cfg.k_neighbors);
  echo["seed"] = std::to_string(cfg.seed);
  return echo;
}

TrainConfig train_config_from_echo(const std::map<std::string, std::string>& echo) {
  TrainConfig cfg;
  const auto get = [&](const char* key) -> const std::string& {
    auto it = echo.find(key);
    if (it == echo.end()) throw Error(std::string("config echo missing key '") + key + "'");
    return it->second;
  };
  cfg.hidden_dim = std::stoi(get("model.hidden_dim"));
  cfg.propagation = get("model.propagation") == "symmetric"
                        ? TrainConfig::Propagation::symmetric
                        : TrainConfig::Propagation::markov;
  cfg.pretext_epochs = std::stoi(get("train.pretext_epochs"));
  cfg.fine_tune_epochs = std::stoi(get("train.fine_tune_epochs"));
  cfg.lr = text_to_real(get("train.lr"));
  cfg.weight_decay = text_to_real(get("train.weight_decay"));
  cfg.mode =
      get("train.mode") == "scratch" ? TrainConfig::Mode::scratch : TrainConfig::Mode::ssl;
  cfg.markov.inflation = text_to_real(get("markov.inflation"));
  cfg.markov.epsilon = text_to_real(get("markov.epsilon"));
  cfg.markov.nlayers = std::stoi(get("markov.nlayers"));
  cfg.markov.expand = get("markov.expand") == "true";
  cfg.k_neighbors = std::stoi(get("graph.k_neighbors"));
  cfg.seed = std::stoull(get("seed"));
  return cfg;
}

}  // namespace mgcn
