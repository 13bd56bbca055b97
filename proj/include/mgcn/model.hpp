#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mgcn/common.hpp"
#include "mgcn/data_types.hpp"
#include "mgcn/graph.hpp"
#include "mgcn/markov.hpp"
#include "mgcn/metrics.hpp"
#include "mgcn/numerics.hpp"
#include "mgcn/rng.hpp"

namespace mgcn {

// All trainable tensors. Biases are 1 x k row matrices so every parameter
// shares one type. GCN layers carry no bias.
struct ModelParams {
  std::vector<Mat> gcn_w;          // gcn_w[0]: F x hidden, later: hidden x hidden
  Mat mlp_w1, mlp_b1;              // edge head hidden layer, input 2*hidden
  Mat mlp_w2, mlp_b2;              // edge head output, scalar per edge
  Mat cls_w, cls_b;                // classifier head, hidden x C
};

struct ModelDims {
  int in_features = 0;
  int hidden = 0;
  int n_classes = 0;
  int n_layers = 0;
};

ModelParams init_params(const ModelDims& dims, RngStream& rng);
ModelDims dims_of(const ModelParams& params);

// The per-layer propagation operators consumed by the forward pass: either
// the Markov layer stack or nlayers copies of the symmetric-normalized graph.
struct PropagationStack {
  int n_nodes = 0;
  std::vector<SparseRows> mats;
};

PropagationStack propagation_from_stack(const MarkovLayerStack& stack);
PropagationStack propagation_symmetric(const SparseGraph& normalized, int n_layers);

struct ForwardTrace {
  std::vector<Mat> propagated;  // M_l * H^{l-1}
  std::vector<Mat> z;           // pre-activations
  std::vector<Mat> h;           // activations
  Mat embeddings;               // last H
  Mat logits;
  Mat logp;
};

// H^{l} = ReLU(M_l * H^{l-1} * W^{l}); logits = H^{L} * cls_w + cls_b.
ForwardTrace gcn_forward(const PropagationStack& prop, const FeatureMatrix& x,
                         const ModelParams& params);

using EdgeList = std::vector<std::pair<int, int>>;

struct EdgeHeadTrace {
  Mat concat;  // E x 2*hidden, row e = [emb_i || emb_j]
  Mat z1;
  Mat hidden;
  Vec pred;
};

// w_hat(i,j) = mlp_w2 . ReLU([emb_i || emb_j] mlp_w1 + mlp_b1) + mlp_b2.
// Concatenation is ordered, so (i,j) and (j,i) generally differ.
Vec edge_head_forward(const Mat& embeddings, const EdgeList& edges, const ModelParams& params);
EdgeHeadTrace edge_head_forward_trace(const Mat& embeddings, const EdgeList& edges,
                                      const ModelParams& params);

// Gradients, mirroring ModelParams shape for the trained subset and
// zero-sized for the frozen one.
struct ParamGrads {
  std::vector<Mat> gcn_w;
  Mat mlp_w1, mlp_b1, mlp_w2, mlp_b2;
  Mat cls_w, cls_b;
};

// Regression targets of the pretext task: the support and values of the
// layer-1 Markov transition matrix.
struct PretextBatch {
  EdgeList edges;
  Vec targets;
};

PretextBatch pretext_batch(const RowStochasticMatrix& layer1);

Real pretext_loss_grads(const PropagationStack& prop, const FeatureMatrix& x,
                        const ModelParams& params, const PretextBatch& batch,
                        ParamGrads* grads);
Real finetune_loss_grads(const PropagationStack& prop, const FeatureMatrix& x,
                         const ModelParams& params, const LabelVector& labels,
                         const BoolMask& mask, ParamGrads* grads);

// One full-batch optimization step. The pretext step trains GCN + edge head
// (classifier frozen); the fine-tune step trains GCN + classifier (edge head
// frozen).
Real pretext_step(const PropagationStack& prop, const FeatureMatrix& x, ModelParams& params,
                  const PretextBatch& batch, AdamState& state, const AdamHyper& hp);
Real finetune_step(const PropagationStack& prop, const FeatureMatrix& x, ModelParams& params,
                   const LabelVector& labels, const BoolMask& mask, AdamState& state,
                   const AdamHyper& hp);

// Per-row argmax of a log-distribution matrix, ties toward the lower id.
LabelVector predict(const Mat& logp, const std::vector<std::string>& class_names);

struct TrainConfig {
  enum class Mode { ssl, scratch };
  enum class Propagation { markov, symmetric };

  int hidden_dim = 64;
  int pretext_epochs = 100;
  int fine_tune_epochs = 200;
  Real lr = 0.01;
  Real weight_decay = 5e-4;
  MarkovConfig markov;
  int k_neighbors = 8;
  std::uint64_t seed = 0;
  Mode mode = Mode::ssl;
  Propagation propagation = Propagation::markov;
};

struct EpochRecord {
  std::string phase;  // "pretext" or "finetune"
  int epoch = 0;
  Real loss = 0.0;
  Real val_accuracy = -1.0;  // finetune only
};

struct DatasetBundle {
  FeatureMatrix X;
  LabelVector y;
  Masks masks;
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochRecord> history;
  MetricsReport report;       // wall_clock_seconds stays 0 for reproducibility
  Real elapsed_seconds = 0.0; // measured separately
  int best_epoch = 0;
  Real best_val_accuracy = 0.0;
};

// Graph build -> Markov aggregation -> optional pretext phase -> fine-tuning
// with best-validation-accuracy parameter selection -> test-set metrics.
TrainResult train_pipeline(const DatasetBundle& data, const TrainConfig& cfg);

// Checkpoint: named sections of matrices in the text format, with the config
// echo embedded.
void write_checkpoint(const std::string& path, const ModelParams& params,
                      const std::map<std::string, std::string>& config_echo);
std::pair<ModelParams, std::map<std::string, std::string>> read_checkpoint(
    const std::string& path);

std::map<std::string, std::string> train_config_echo(const TrainConfig& cfg);
TrainConfig train_config_from_echo(const std::map<std::string, std::string>& echo);

}  // namespace mgcn
