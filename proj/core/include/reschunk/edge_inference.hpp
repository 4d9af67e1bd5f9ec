#pragma once

#include <vector>

#include "reschunk/motion.hpp"

namespace reschunk {

// Two-layer perceptron (linear, ELU, linear) operating on row batches.
struct Mlp {
  Matrix W1, W2;           // [in x hidden], [hidden x out]
  Eigen::RowVectorXd b1, b2;

  struct Cache {
    Matrix X, Z1, A1;
    bool valid = false;
  };
  struct Grads {
    Matrix W1, W2;
    Eigen::RowVectorXd b1, b2;
  };

  Matrix forward(const Matrix& X, Cache& cache) const;
  Matrix backward(const Cache& cache, const Matrix& grad_out, Grads& grads) const;
  Grads zero_grads() const;
};

Mlp make_mlp(int in, int hidden, int out, Rng& rng);

/// Categorical edge logits/probabilities for all ordered joint pairs.
/// Rows are indexed i*J + j; diagonal rows are unused and kept at zero.
struct EdgePosterior {
  int J = 0;
  int C = 2;
  Matrix logits;  // [J*J x C]
  Matrix probs;   // softmax over classes, per off-diagonal row

  Eigen::Index pair(int i, int j) const { return static_cast<Eigen::Index>(i) * J + j; }
};

struct JointPartition {
  std::vector<int> group_id;  // one entry per joint, ids in [0, group_count)
  int group_count = 0;

  void validate() const;
  bool operator==(const JointPartition&) const = default;
};

// Encoder of the factorized edge posterior: per-joint trajectory embedding,
// one node->edge->node->edge round of message passing, softmax over classes.
struct EdgeEncoderParams {
  Mlp f0;       // trajectory -> node embedding
  Mlp f_e1;     // [h_i, h_j] -> edge embedding
  Mlp f_v1;     // aggregated incoming edges -> node embedding
  Mlp f_e2;     // [h_i, h_j] -> class logits
  int n_classes = 2;

  struct Cache {
    Matrix R;              // [J x T*D] per-joint trajectories
    Mlp::Cache c0, ce1, cv1, ce2;
    std::vector<std::pair<int, int>> pairs;  // ordered (i, j), i != j
    bool valid = false;
  };
  struct Grads {
    Mlp::Grads f0, f_e1, f_v1, f_e2;
  };
  Grads zero_grads() const;
};

EdgeEncoderParams make_edge_encoder(int traj_dim, int hidden, int n_classes, Rng& rng);

EdgePosterior encode_edges(const Matrix& x0, int J, const EdgeEncoderParams& params,
                           EdgeEncoderParams::Cache& cache);
// Backward from dL/dlogits (same [J*J x C] layout, diagonal ignored).
void encode_edges_backward(const EdgeEncoderParams& params, const EdgeEncoderParams::Cache& cache,
                           const Matrix& grad_logits, EdgeEncoderParams::Grads& grads);

enum class SampleMode { train, infer };

/// Concrete-distribution sample per ordered pair: softmax((logits + g)/tau)
/// with fresh Gumbel noise in train mode, softmax(logits/tau) in infer mode.
Matrix sample_edges(const EdgePosterior& posterior, double tau, Rng& rng, SampleMode mode);
// Deterministic variant with caller-supplied noise (zero noise in infer
// mode); used by the gradient checker.
Matrix sample_edges_with_noise(const EdgePosterior& posterior, double tau, const Matrix& noise);
Matrix sample_edges_backward(const Matrix& z, double tau, const Matrix& grad_z);

Matrix gumbel_noise(int J, int C, Rng& rng);

/// Symmetric correlation matrix from a sampled edge tensor; class 0 is the
/// "on" class, diagonal fixed at 1.
Matrix correlation_matrix(const Matrix& z, int J);

/// Average-linkage agglomerative grouping on distance 1 - C. Merging stops
/// once the closest cluster pair is farther than 1 - threshold; equal
/// distances resolve to the lexicographically lowest cluster pair. Uses the
/// Lance-Williams update for the merged distances.
JointPartition group_joints(const Matrix& C, double threshold);

/// Replace every joint's D-vector by its group mean, per frame. Shape is
/// preserved: grouped joints share a value rather than being removed.
Matrix coarsen(const Matrix& seq, const JointPartition& partition, int D);

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b);

}  // namespace reschunk
