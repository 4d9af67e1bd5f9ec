#include "reschunk/edge_inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "reschunk/errors.hpp"
#include "reschunk/graph_layers.hpp"

namespace reschunk {

namespace {

inline double elu(double x) { return x > 0.0 ? x : std::expm1(x); }
inline double elu_grad(double x) { return x > 0.0 ? 1.0 : std::exp(x); }

Eigen::RowVectorXd softmax_row(const Eigen::RowVectorXd& v) {
  Eigen::RowVectorXd e = (v.array() - v.maxCoeff()).exp();
  return e / e.sum();
}

}  // namespace

Matrix Mlp::forward(const Matrix& X, Cache& cache) const {
  if (X.cols() != W1.rows()) throw ShapeError("mlp: input width mismatch");
  cache.X = X;
  cache.Z1 = (X * W1).rowwise() + b1;
  cache.A1 = cache.Z1.unaryExpr([](double v) { return elu(v); });
  cache.valid = true;
  return (cache.A1 * W2).rowwise() + b2;
}

Matrix Mlp::backward(const Cache& cache, const Matrix& grad_out, Grads& grads) const {
  if (!cache.valid) throw StateError("mlp: backward before forward");
  grads.W2 += cache.A1.transpose() * grad_out;
  grads.b2 += grad_out.colwise().sum();
  Matrix dA1 = grad_out * W2.transpose();
  Matrix dZ1 = dA1.array() * cache.Z1.unaryExpr([](double v) { return elu_grad(v); }).array();
  grads.W1 += cache.X.transpose() * dZ1;
  grads.b1 += dZ1.colwise().sum();
  return dZ1 * W1.transpose();
}

Mlp::Grads Mlp::zero_grads() const {
  return {Matrix::Zero(W1.rows(), W1.cols()), Matrix::Zero(W2.rows(), W2.cols()),
          Eigen::RowVectorXd::Zero(b1.cols()), Eigen::RowVectorXd::Zero(b2.cols())};
}

Mlp make_mlp(int in, int hidden, int out, Rng& rng) {
  Mlp m;
  m.W1 = init_weight(in, hidden, rng);
  m.W2 = init_weight(hidden, out, rng);
  m.b1 = Eigen::RowVectorXd::Zero(hidden);
  m.b2 = Eigen::RowVectorXd::Zero(out);
  return m;
}

void JointPartition::validate() const {
  if (group_count < 1) throw DomainError("partition must contain at least one group");
  std::vector<bool> seen(group_count, false);
  for (int g : group_id) {
    if (g < 0 || g >= group_count) throw DomainError("group id out of range");
    seen[g] = true;
  }
  for (bool s : seen)
    if (!s) throw DomainError("group ids must form a contiguous range");
}

EdgeEncoderParams::Grads EdgeEncoderParams::zero_grads() const {
  return {f0.zero_grads(), f_e1.zero_grads(), f_v1.zero_grads(), f_e2.zero_grads()};
}

EdgeEncoderParams make_edge_encoder(int traj_dim, int hidden, int n_classes, Rng& rng) {
  EdgeEncoderParams p;
  p.f0 = make_mlp(traj_dim, hidden, hidden, rng);
  p.f_e1 = make_mlp(2 * hidden, hidden, hidden, rng);
  p.f_v1 = make_mlp(hidden, hidden, hidden, rng);
  p.f_e2 = make_mlp(2 * hidden, hidden, n_classes, rng);
  p.n_classes = n_classes;
  return p;
}

EdgePosterior encode_edges(const Matrix& x0, int J, const EdgeEncoderParams& params,
                           EdgeEncoderParams::Cache& cache) {
  if (J < 2) throw DomainError("encode_edges requires at least two joints");
  if (x0.cols() % J != 0) throw ShapeError("encode_edges: K is not a multiple of J");
  const int D = static_cast<int>(x0.cols()) / J;
  const int T = static_cast<int>(x0.rows());
  const int C = params.n_classes;

  // r_j: joint j's D values over all T frames, flattened time-major.
  cache.R.resize(J, static_cast<Eigen::Index>(T) * D);
  for (int j = 0; j < J; ++j)
    for (int t = 0; t < T; ++t)
      for (int d = 0; d < D; ++d) cache.R(j, t * D + d) = x0(t, j * D + d);

  Matrix h1 = params.f0.forward(cache.R, cache.c0);
  const int emb = static_cast<int>(h1.cols());

  cache.pairs.clear();
  cache.pairs.reserve(static_cast<size_t>(J) * (J - 1));
  for (int i = 0; i < J; ++i)
    for (int j = 0; j < J; ++j)
      if (i != j) cache.pairs.emplace_back(i, j);
  const int P = static_cast<int>(cache.pairs.size());

  Matrix pair_in(P, 2 * emb);
  for (int p = 0; p < P; ++p) {
    pair_in.block(p, 0, 1, emb) = h1.row(cache.pairs[p].first);
    pair_in.block(p, emb, 1, emb) = h1.row(cache.pairs[p].second);
  }
  Matrix e1 = params.f_e1.forward(pair_in, cache.ce1);

  Matrix agg = Matrix::Zero(J, emb);
  for (int p = 0; p < P; ++p) agg.row(cache.pairs[p].second) += e1.row(p);
  Matrix h2 = params.f_v1.forward(agg, cache.cv1);

  Matrix pair_in2(P, 2 * emb);
  for (int p = 0; p < P; ++p) {
    pair_in2.block(p, 0, 1, emb) = h2.row(cache.pairs[p].first);
    pair_in2.block(p, emb, 1, emb) = h2.row(cache.pairs[p].second);
  }
  Matrix logit_rows = params.f_e2.forward(pair_in2, cache.ce2);
  cache.valid = true;

  EdgePosterior post;
  post.J = J;
  post.C = C;
  post.logits = Matrix::Zero(static_cast<Eigen::Index>(J) * J, C);
  post.probs = Matrix::Zero(static_cast<Eigen::Index>(J) * J, C);
  for (int p = 0; p < P; ++p) {
    const auto row = post.pair(cache.pairs[p].first, cache.pairs[p].second);
    post.logits.row(row) = logit_rows.row(p);
    post.probs.row(row) = softmax_row(logit_rows.row(p));
  }
  return post;
}

void encode_edges_backward(const EdgeEncoderParams& params, const EdgeEncoderParams::Cache& cache,
                           const Matrix& grad_logits, EdgeEncoderParams::Grads& grads) {
  if (!cache.valid) throw StateError("encode_edges: backward before forward");
  const int P = static_cast<int>(cache.pairs.size());
  const int emb = static_cast<int>(params.f_v1.W2.cols());
  const int J = static_cast<int>(cache.R.rows());

  Matrix d_logit_rows(P, grad_logits.cols());
  for (int p = 0; p < P; ++p)
    d_logit_rows.row(p) =
        grad_logits.row(static_cast<Eigen::Index>(cache.pairs[p].first) * J + cache.pairs[p].second);

  Matrix d_pair2 = params.f_e2.backward(cache.ce2, d_logit_rows, grads.f_e2);
  Matrix d_h2 = Matrix::Zero(J, emb);
  for (int p = 0; p < P; ++p) {
    d_h2.row(cache.pairs[p].first) += d_pair2.block(p, 0, 1, emb);
    d_h2.row(cache.pairs[p].second) += d_pair2.block(p, emb, 1, emb);
  }

  Matrix d_agg = params.f_v1.backward(cache.cv1, d_h2, grads.f_v1);
  Matrix d_e1(P, emb);
  for (int p = 0; p < P; ++p) d_e1.row(p) = d_agg.row(cache.pairs[p].second);

  Matrix d_pair1 = params.f_e1.backward(cache.ce1, d_e1, grads.f_e1);
  Matrix d_h1 = Matrix::Zero(J, emb);
  for (int p = 0; p < P; ++p) {
    d_h1.row(cache.pairs[p].first) += d_pair1.block(p, 0, 1, emb);
    d_h1.row(cache.pairs[p].second) += d_pair1.block(p, emb, 1, emb);
  }
  params.f0.backward(cache.c0, d_h1, grads.f0);
}

Matrix gumbel_noise(int J, int C, Rng& rng) {
  Matrix g = Matrix::Zero(static_cast<Eigen::Index>(J) * J, C);
  for (int i = 0; i < J; ++i)
    for (int j = 0; j < J; ++j)
      if (i != j)
        for (int c = 0; c < C; ++c) g(static_cast<Eigen::Index>(i) * J + j, c) = gumbel01(rng);
  return g;
}

Matrix sample_edges_with_noise(const EdgePosterior& posterior, double tau, const Matrix& noise) {
  if (tau <= 0.0) throw DomainError("sample_edges: tau must be positive");
  if (noise.rows() != posterior.logits.rows() || noise.cols() != posterior.logits.cols())
    throw ShapeError("sample_edges: noise shape mismatch");
  const int J = posterior.J;
  Matrix z = Matrix::Zero(posterior.logits.rows(), posterior.logits.cols());
  for (int i = 0; i < J; ++i)
    for (int j = 0; j < J; ++j) {
      if (i == j) continue;
      const auto r = posterior.pair(i, j);
      z.row(r) = softmax_row((posterior.logits.row(r) + noise.row(r)) / tau);
    }
  return z;
}

Matrix sample_edges(const EdgePosterior& posterior, double tau, Rng& rng, SampleMode mode) {
  if (tau <= 0.0) throw DomainError("sample_edges: tau must be positive");
  Matrix noise = mode == SampleMode::train
                     ? gumbel_noise(posterior.J, posterior.C, rng)
                     : Matrix::Zero(posterior.logits.rows(), posterior.logits.cols());
  return sample_edges_with_noise(posterior, tau, noise);
}

Matrix sample_edges_backward(const Matrix& z, double tau, const Matrix& grad_z) {
  if (tau <= 0.0) throw DomainError("sample_edges_backward: tau must be positive");
  Matrix dl = Matrix::Zero(z.rows(), z.cols());
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const double dot = z.row(r).dot(grad_z.row(r));
    dl.row(r) = (z.row(r).array() * (grad_z.row(r).array() - dot)).matrix() / tau;
  }
  return dl;
}

Matrix correlation_matrix(const Matrix& z, int J) {
  Matrix C = Matrix::Zero(J, J);
  for (int i = 0; i < J; ++i) {
    C(i, i) = 1.0;
    for (int j = 0; j < J; ++j) {
      if (i == j) continue;
      C(i, j) = 0.5 * (z(static_cast<Eigen::Index>(i) * J + j, 0) +
                       z(static_cast<Eigen::Index>(j) * J + i, 0));
    }
  }
  return C;
}

JointPartition group_joints(const Matrix& C, double threshold) {
  const int J = static_cast<int>(C.rows());
  if (C.cols() != J) throw DomainError("group_joints: correlation matrix must be square");
  if ((C - C.transpose()).cwiseAbs().maxCoeff() > 1e-9)
    throw DomainError("group_joints: correlation matrix must be symmetric");

  // Active clusters keyed by lowest member; distances maintained with the
  // Lance-Williams average-linkage update.
  struct Cluster {
    std::vector<int> members;
    int size() const { return static_cast<int>(members.size()); }
  };
  std::vector<Cluster> clusters(J);
  std::vector<bool> alive(J, true);
  Matrix dist = (1.0 - C.array()).matrix();
  for (int j = 0; j < J; ++j) clusters[j].members = {j};

  const double stop = 1.0 - threshold;
  int n_alive = J;
  while (n_alive > 1) {
    int best_a = -1, best_b = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (int a = 0; a < J; ++a) {
      if (!alive[a]) continue;
      for (int b = a + 1; b < J; ++b) {
        if (!alive[b]) continue;
        if (dist(a, b) < best_d) {  // strict: ties keep the lowest (a, b)
          best_d = dist(a, b);
          best_a = a;
          best_b = b;
        }
      }
    }
    if (best_d > stop) break;
    const double na = clusters[best_a].size();
    const double nb = clusters[best_b].size();
    for (int k = 0; k < J; ++k) {
      if (!alive[k] || k == best_a || k == best_b) continue;
      dist(best_a, k) = dist(k, best_a) =
          (na * dist(best_a, k) + nb * dist(best_b, k)) / (na + nb);
    }
    auto& merged = clusters[best_a].members;
    merged.insert(merged.end(), clusters[best_b].members.begin(), clusters[best_b].members.end());
    alive[best_b] = false;
    --n_alive;
  }

  // Group ids ordered by lowest member joint index; cluster slot index is
  // already the lowest member since merges keep the smaller key.
  JointPartition part;
  part.group_id.assign(J, -1);
  int next_id = 0;
  for (int a = 0; a < J; ++a) {
    if (!alive[a]) continue;
    for (int m : clusters[a].members) part.group_id[m] = next_id;
    ++next_id;
  }
  part.group_count = next_id;
  part.validate();
  return part;
}

Matrix coarsen(const Matrix& seq, const JointPartition& partition, int D) {
  const int J = static_cast<int>(partition.group_id.size());
  if (seq.cols() != static_cast<Eigen::Index>(J) * D)
    throw ShapeError("coarsen: sequence width does not match partition * D");
  partition.validate();

  Matrix out(seq.rows(), seq.cols());
  std::vector<std::vector<int>> members(partition.group_count);
  for (int j = 0; j < J; ++j) members[partition.group_id[j]].push_back(j);

  for (const auto& group : members) {
    for (int d = 0; d < D; ++d) {
      Vector mean = Vector::Zero(seq.rows());
      for (int j : group) mean += seq.col(static_cast<Eigen::Index>(j) * D + d);
      mean /= static_cast<double>(group.size());
      for (int j : group) out.col(static_cast<Eigen::Index>(j) * D + d) = mean;
    }
  }
  return out;
}

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) throw DomainError("adjusted_rand_index: size mismatch");
  const int n = static_cast<int>(a.size());
  std::map<std::pair<int, int>, long long> cont;
  std::map<int, long long> ra, rb;
  for (int i = 0; i < n; ++i) {
    ++cont[{a[i], b[i]}];
    ++ra[a[i]];
    ++rb[b[i]];
  }
  auto choose2 = [](long long m) { return m * (m - 1) / 2.0; };
  double sum_ij = 0, sum_a = 0, sum_b = 0;
  for (const auto& [k, v] : cont) sum_ij += choose2(v);
  for (const auto& [k, v] : ra) sum_a += choose2(v);
  for (const auto& [k, v] : rb) sum_b += choose2(v);
  const double total = choose2(n);
  const double expected = sum_a * sum_b / total;
  const double max_index = 0.5 * (sum_a + sum_b);
  if (std::abs(max_index - expected) < 1e-15) return 1.0;  // both trivial partitions
  return (sum_ij - expected) / (max_index - expected);
}

}  // namespace reschunk
