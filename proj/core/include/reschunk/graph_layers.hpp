#pragma once

#include <vector>

#include "reschunk/motion.hpp"

namespace reschunk {

enum class Activation { tanh, identity };

// Graph convolution H' = act(A * H * W) with a trainable dense adjacency.
// Forward records into a caller-owned cache; backward replays it. Parameters
// are plain value members so layers can be copied, serialized, and shared
// read-only across threads.
struct GraphConv {
  Matrix A;  // [N x N]
  Matrix W;  // [F_in x F_out]
  Activation activation = Activation::tanh;

  struct Cache {
    Matrix H;   // input
    Matrix M;   // H * W
    Matrix Y;   // activated output
    bool valid = false;
  };

  struct Grads {
    Matrix A;
    Matrix W;
  };

  Matrix forward(const Matrix& H, Cache& cache) const;
  // Accumulates parameter gradients into `grads` and returns dL/dH.
  Matrix backward(const Cache& cache, const Matrix& grad_out, Grads& grads) const;

  Grads zero_grads() const { return {Matrix::Zero(A.rows(), A.cols()), Matrix::Zero(W.rows(), W.cols())}; }
};

inline constexpr int kGcnBlockLayers = 6;

// Six stacked width-preserving graph convolutions.
struct GcnBlock {
  std::vector<GraphConv> layers;

  struct Cache {
    std::vector<GraphConv::Cache> layer_caches;
    bool valid = false;
  };

  using Grads = std::vector<GraphConv::Grads>;

  Matrix forward(const Matrix& H, Cache& cache) const;
  Matrix backward(const Cache& cache, const Matrix& grad_out, Grads& grads) const;
  Grads zero_grads() const;
};

enum class PonoVariant { standard, as_printed };

// Position normalization with a sigmoid gate. The input stacks two equal
// halves along the node axis: the first half is normalized per feature
// column (statistics over its rows), the second half gates it.
struct Pono {
  double epsilon = 1e-5;
  PonoVariant variant = PonoVariant::standard;

  struct Cache {
    Matrix a, b;
    Eigen::RowVectorXd mu, sdev;
    Matrix normed;  // pre-gate branch
    Matrix gate;    // sigmoid(b)
    bool valid = false;
  };

  Matrix forward(const Matrix& concat, Cache& cache) const;
  // Returns dL/dconcat (same stacked layout as the forward input).
  Matrix backward(const Cache& cache, const Matrix& grad_out) const;
};

// Initialization used across the model: adjacency close to identity with a
// small uniform perturbation, weights with symmetric fan-in scaling.
Matrix init_adjacency(int n, Rng& rng);
Matrix init_weight(int fan_in, int fan_out, Rng& rng);
GraphConv make_graph_conv(int n, int f_in, int f_out, Activation act, Rng& rng);
GcnBlock make_gcn_block(int n, int f, Rng& rng);

}  // namespace reschunk
