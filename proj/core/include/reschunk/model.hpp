#pragma once

#include <optional>
#include <string>
#include <vector>

#include "reschunk/edge_inference.hpp"
#include "reschunk/graph_layers.hpp"
#include "reschunk/motion.hpp"

namespace reschunk {

struct ModelConfig {
  int J = 0;
  int D = 3;
  int T = 0;          // input frames
  int p = 0;          // output frames
  int n_chunks = 6;
  int F = 256;        // feature width
  double tau = 0.5;
  double sigma0 = 1.0;
  double sigma1 = 1.0;
  PonoVariant pono_variant = PonoVariant::standard;
  double grouping_threshold = 0.5;
  double pono_epsilon = 1e-5;
  int edge_hidden = 256;
  int edge_classes = 2;
  double kl_weight = 1.0;

  // Ablation / variant switches.
  bool coarse_branch = true;      // off: single-scale network (1L)
  bool learned_grouping = true;   // off: fixed partition, no edge encoder
  bool use_pono = true;           // off: concat+PONO replaced by a sum
  bool infer_uniform_prior = false;  // uniform-prior reading of inference-time z
  std::optional<JointPartition> fixed_partition;

  int K() const { return J * D; }
  int chunk() const { return p / n_chunks; }
  void validate() const;
};

// One prediction branch: start projection, per-chunk GCN blocks, PONO
// states, and end projections back to frame space. The coarse branch uses a
// single chunk-sized stack of the same pieces.
struct BranchParams {
  GraphConv start;                // K nodes, T features -> F features
  std::vector<GcnBlock> blocks;   // width-preserving, F -> F
  std::vector<Pono> ponos;
  std::vector<GraphConv> ends;    // F -> frame features, identity activation
};

struct ModelParams {
  ModelConfig cfg;
  BranchParams fine;
  BranchParams coarse;  // empty vectors when cfg.coarse_branch is false
  EdgeEncoderParams edge;
};

struct ForwardResult {
  Matrix y0_hat;  // [p x K]
  Matrix y1_hat;  // [p x K]; empty without the coarse branch
  Matrix x1;      // [T x K] coarsened input
  JointPartition partition;
  EdgePosterior posterior;
  Matrix z;       // sampled edge tensor, [J*J x C]
  std::vector<FrameRange> chunk_boundaries;
};

struct ForwardCache {
  GraphConv::Cache fine_start;
  std::vector<GcnBlock::Cache> fine_blocks;
  std::vector<Pono::Cache> fine_ponos;
  std::vector<GraphConv::Cache> fine_ends;
  GraphConv::Cache coarse_start;
  GcnBlock::Cache coarse_block;
  Pono::Cache coarse_pono;
  GraphConv::Cache coarse_end;
  EdgeEncoderParams::Cache edge;
  bool valid = false;
};

struct BranchGrads {
  GraphConv::Grads start;
  std::vector<GcnBlock::Grads> blocks;
  std::vector<GraphConv::Grads> ends;
};

struct ModelGrads {
  BranchGrads fine;
  BranchGrads coarse;
  EdgeEncoderParams::Grads edge;
};

struct ForwardOptions {
  // Frozen Gumbel noise (gradient checking) instead of fresh draws.
  const Matrix* noise = nullptr;
  // Frozen partition; skips clustering entirely.
  const JointPartition* partition = nullptr;
};

ModelParams make_model(const ModelConfig& cfg, Rng& rng);

ForwardResult forward(const Matrix& x0, const ModelParams& params, Rng& rng, SampleMode mode,
                      ForwardCache& cache, const ForwardOptions& opts = {});

// Accumulates parameter gradients of a scalar loss given its gradients with
// respect to y0_hat, y1_hat (may be empty), and the edge logits.
void backward(const ModelParams& params, const ForwardCache& cache, const Matrix& grad_y0,
              const Matrix& grad_y1, const Matrix& grad_logits, ModelGrads& grads);

ModelGrads zero_grads(const ModelParams& params);

/// Deterministic inference: noise-free posterior, no sampling.
std::pair<Matrix, JointPartition> predict(const Matrix& x0, const ModelParams& params);

// Flat named view over every trainable array, in a stable order. The same
// names and order are used for gradients, optimizer state, and checkpoints.
struct ParamView {
  std::string name;
  double* data = nullptr;
  Eigen::Index rows = 0, cols = 0;
  Eigen::Index size() const { return rows * cols; }
};

std::vector<ParamView> parameter_tree(ModelParams& params);
std::vector<ParamView> gradient_tree(const ModelParams& params, ModelGrads& grads);
Eigen::Index parameter_count(const ModelParams& params);

void save_checkpoint(const ModelParams& params, const std::string& path);
ModelParams load_checkpoint(const std::string& path);

std::string config_to_json(const ModelConfig& cfg);
ModelConfig config_from_json(const std::string& text);

}  // namespace reschunk
