#include "reschunk/graph_layers.hpp"

#include <cmath>

#include "reschunk/errors.hpp"

namespace reschunk {

Matrix GraphConv::forward(const Matrix& H, Cache& cache) const {
  if (H.rows() != A.cols())
    throw ShapeError("graph_conv: input has " + std::to_string(H.rows()) +
                     " nodes, adjacency expects " + std::to_string(A.cols()));
  if (H.cols() != W.rows())
    throw ShapeError("graph_conv: input width " + std::to_string(H.cols()) +
                     " does not match weight fan-in " + std::to_string(W.rows()));
  cache.H = H;
  cache.M = H * W;
  Matrix Z = A * cache.M;
  cache.Y = activation == Activation::tanh ? Z.array().tanh().matrix() : Z;
  cache.valid = true;
  return cache.Y;
}

Matrix GraphConv::backward(const Cache& cache, const Matrix& grad_out, Grads& grads) const {
  if (!cache.valid) throw StateError("graph_conv: backward before forward");
  if (grad_out.rows() != cache.Y.rows() || grad_out.cols() != cache.Y.cols())
    throw ShapeError("graph_conv: upstream gradient shape mismatch");
  Matrix dZ = activation == Activation::tanh
                  ? (grad_out.array() * (1.0 - cache.Y.array().square())).matrix()
                  : grad_out;
  grads.A += dZ * cache.M.transpose();
  Matrix dM = A.transpose() * dZ;
  grads.W += cache.H.transpose() * dM;
  return dM * W.transpose();
}

Matrix GcnBlock::forward(const Matrix& H, Cache& cache) const {
  cache.layer_caches.assign(layers.size(), {});
  Matrix cur = H;
  for (size_t l = 0; l < layers.size(); ++l) cur = layers[l].forward(cur, cache.layer_caches[l]);
  cache.valid = true;
  return cur;
}

Matrix GcnBlock::backward(const Cache& cache, const Matrix& grad_out, Grads& grads) const {
  if (!cache.valid) throw StateError("gcn_block: backward before forward");
  Matrix g = grad_out;
  for (size_t l = layers.size(); l-- > 0;)
    g = layers[l].backward(cache.layer_caches[l], g, grads[l]);
  return g;
}

GcnBlock::Grads GcnBlock::zero_grads() const {
  Grads g;
  g.reserve(layers.size());
  for (const auto& layer : layers) g.push_back(layer.zero_grads());
  return g;
}

Matrix Pono::forward(const Matrix& concat, Cache& cache) const {
  if (concat.rows() % 2 != 0) throw ShapeError("pono: row count must be even");
  const Eigen::Index n = concat.rows() / 2;
  cache.a = concat.topRows(n);
  cache.b = concat.bottomRows(n);
  cache.mu = cache.a.colwise().mean();
  Matrix centered = cache.a.rowwise() - cache.mu;
  cache.sdev = (centered.array().square().colwise().mean()).sqrt();
  cache.gate = (1.0 / (1.0 + (-cache.b.array()).exp())).matrix();
  if (variant == PonoVariant::standard) {
    cache.normed = centered.array().rowwise() / (cache.sdev.array() + epsilon);
  } else {
    // The printed form subtracts the per-column ratio mean/std instead of
    // normalizing; kept for A/B comparison behind the variant switch.
    cache.normed = cache.a.array().rowwise() -
                   (cache.mu.array() / (cache.sdev.array() + epsilon));
  }
  cache.valid = true;
  return (cache.normed.array() * cache.gate.array()).matrix();
}

Matrix Pono::backward(const Cache& cache, const Matrix& grad_out) const {
  if (!cache.valid) throw StateError("pono: backward before forward");
  const Eigen::Index n = cache.a.rows();
  const Eigen::Index f = cache.a.cols();
  if (grad_out.rows() != n || grad_out.cols() != f)
    throw ShapeError("pono: upstream gradient shape mismatch");

  Matrix dn = (grad_out.array() * cache.gate.array()).matrix();
  Matrix db = (grad_out.array() * cache.normed.array() * cache.gate.array() *
               (1.0 - cache.gate.array()))
                  .matrix();

  Matrix da(n, f);
  const double N = static_cast<double>(n);
  for (Eigen::Index c = 0; c < f; ++c) {
    const double s = cache.sdev(c);
    const double v = s + epsilon;
    const double dn_sum = dn.col(c).sum();
    if (variant == PonoVariant::standard) {
      const double dot = dn.col(c).dot(cache.normed.col(c));
      for (Eigen::Index r = 0; r < n; ++r) {
        double g = (dn(r, c) - dn_sum / N) / v;
        if (s > 1e-300) g -= dot * cache.normed(r, c) / (N * s);
        da(r, c) = g;
      }
    } else {
      const double mu = cache.mu(c);
      for (Eigen::Index r = 0; r < n; ++r) {
        double g = dn(r, c) - dn_sum / (N * v);
        if (s > 1e-300) g += mu * (cache.a(r, c) - mu) * dn_sum / (N * s * v * v);
        da(r, c) = g;
      }
    }
  }

  Matrix dconcat(2 * n, f);
  dconcat.topRows(n) = da;
  dconcat.bottomRows(n) = db;
  return dconcat;
}

Matrix init_adjacency(int n, Rng& rng) {
  Matrix A = Matrix::Identity(n, n);
  std::uniform_real_distribution<double> u(-0.01, 0.01);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) A(i, j) += u(rng);
  return A;
}

Matrix init_weight(int fan_in, int fan_out, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> u(-bound, bound);
  Matrix W(fan_in, fan_out);
  for (int i = 0; i < fan_in; ++i)
    for (int j = 0; j < fan_out; ++j) W(i, j) = u(rng);
  return W;
}

GraphConv make_graph_conv(int n, int f_in, int f_out, Activation act, Rng& rng) {
  GraphConv layer;
  layer.A = init_adjacency(n, rng);
  layer.W = init_weight(f_in, f_out, rng);
  layer.activation = act;
  return layer;
}

GcnBlock make_gcn_block(int n, int f, Rng& rng) {
  GcnBlock block;
  block.layers.reserve(kGcnBlockLayers);
  for (int l = 0; l < kGcnBlockLayers; ++l)
    block.layers.push_back(make_graph_conv(n, f, f, Activation::tanh, rng));
  return block;
}

}  // namespace reschunk
