#include "reschunk/model.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include "reschunk/errors.hpp"

namespace reschunk {

using nlohmann::json;

void ModelConfig::validate() const {
  if (J < 1 || D < 1 || T < 1 || p < 1 || F < 1 || n_chunks < 1)
    throw ConfigError("model dimensions must be positive");
  if (p % n_chunks != 0)
    throw ConfigError("p=" + std::to_string(p) + " is not divisible by n_chunks=" +
                      std::to_string(n_chunks));
  if (T < p / n_chunks) throw ConfigError("T must be at least one chunk long");
  if (tau <= 0.0) throw ConfigError("tau must be positive");
  if (sigma0 <= 0.0 || sigma1 <= 0.0) throw ConfigError("sigma0/sigma1 must be positive");
  if (edge_classes < 2) throw ConfigError("edge_classes must be at least 2");
  if (grouping_threshold <= 0.0 || grouping_threshold >= 1.0)
    throw ConfigError("grouping_threshold must lie in (0,1)");
  if (!learned_grouping && coarse_branch && !fixed_partition)
    throw ConfigError("fixed grouping requires fixed_partition");
  if (fixed_partition) {
    fixed_partition->validate();
    if (static_cast<int>(fixed_partition->group_id.size()) != J)
      throw ConfigError("fixed_partition must cover exactly J joints");
  }
}

namespace {

JointPartition singleton_partition(int J) {
  JointPartition p;
  p.group_id.resize(J);
  for (int j = 0; j < J; ++j) p.group_id[j] = j;
  p.group_count = J;
  return p;
}

BranchParams make_branch(const ModelConfig& cfg, int stacks, int out_frames, Rng& rng) {
  BranchParams b;
  b.start = make_graph_conv(cfg.K(), cfg.T, cfg.F, Activation::tanh, rng);
  for (int i = 0; i < stacks; ++i) {
    b.blocks.push_back(make_gcn_block(cfg.K(), cfg.F, rng));
    b.ponos.push_back(Pono{cfg.pono_epsilon, cfg.pono_variant});
    b.ends.push_back(make_graph_conv(cfg.K(), cfg.F, out_frames, Activation::identity, rng));
  }
  return b;
}

}  // namespace

ModelParams make_model(const ModelConfig& cfg, Rng& rng) {
  cfg.validate();
  ModelParams params;
  params.cfg = cfg;
  params.fine = make_branch(cfg, cfg.n_chunks, cfg.T, rng);
  if (cfg.coarse_branch) params.coarse = make_branch(cfg, 1, cfg.p, rng);
  if (cfg.learned_grouping)
    params.edge = make_edge_encoder(cfg.T * cfg.D, cfg.edge_hidden, cfg.edge_classes, rng);
  return params;
}

ForwardResult forward(const Matrix& x0, const ModelParams& params, Rng& rng, SampleMode mode,
                      ForwardCache& cache, const ForwardOptions& opts) {
  const ModelConfig& cfg = params.cfg;
  cfg.validate();
  if (x0.rows() != cfg.T || x0.cols() != cfg.K())
    throw ShapeError("forward: x0 must be [T x K] = [" + std::to_string(cfg.T) + " x " +
                     std::to_string(cfg.K()) + "]");
  const int K = cfg.K();
  const int c = cfg.chunk();
  const int n = cfg.n_chunks;

  ForwardResult res;
  res.chunk_boundaries.reserve(n);
  for (int i = 0; i < n; ++i) res.chunk_boundaries.push_back({i * c, (i + 1) * c});

  // Fine branch over K nodes with T-frame features.
  cache.fine_blocks.assign(n, {});
  cache.fine_ponos.assign(n, {});
  cache.fine_ends.assign(n, {});
  Matrix rep = params.fine.start.forward(x0.transpose(), cache.fine_start);
  Matrix ch = x0.bottomRows(c).transpose();  // ch_0
  res.y0_hat.resize(cfg.p, K);
  for (int i = 0; i < n; ++i) {
    Matrix g = params.fine.blocks[i].forward(rep, cache.fine_blocks[i]);
    Matrix gated;
    if (cfg.use_pono) {
      Matrix concat(2 * K, cfg.F);
      concat.topRows(K) = rep;
      concat.bottomRows(K) = g;
      gated = params.fine.ponos[i].forward(concat, cache.fine_ponos[i]);
    } else {
      gated = rep + g;
    }
    Matrix e_out = params.fine.ends[i].forward(gated, cache.fine_ends[i]);  // K x T
    ch = e_out.rightCols(c) + ch;  // Eq-style residual recursion
    res.y0_hat.middleRows(i * c, c) = ch.transpose();
    rep = gated;
  }

  // Grouping.
  if (cfg.learned_grouping) {
    res.posterior = encode_edges(x0, cfg.J, params.edge, cache.edge);
    if (mode == SampleMode::infer && cfg.infer_uniform_prior) {
      // Uniform-prior reading: edge weights carry no sequence information.
      res.z = Matrix::Constant(static_cast<Eigen::Index>(cfg.J) * cfg.J, cfg.edge_classes,
                               1.0 / cfg.edge_classes);
      for (int j = 0; j < cfg.J; ++j) res.z.row(res.posterior.pair(j, j)).setZero();
    } else if (mode == SampleMode::train) {
      res.z = opts.noise ? sample_edges_with_noise(res.posterior, cfg.tau, *opts.noise)
                         : sample_edges(res.posterior, cfg.tau, rng, SampleMode::train);
    } else {
      res.z = sample_edges(res.posterior, cfg.tau, rng, SampleMode::infer);
    }
    if (opts.partition) {
      res.partition = *opts.partition;
    } else {
      res.partition = group_joints(correlation_matrix(res.z, cfg.J), cfg.grouping_threshold);
    }
  } else {
    res.partition = opts.partition ? *opts.partition
                    : cfg.fixed_partition ? *cfg.fixed_partition
                                          : singleton_partition(cfg.J);
  }
  res.x1 = coarsen(x0, res.partition, cfg.D);

  // Coarse branch: one stack plus a single global input-to-output residual.
  if (cfg.coarse_branch) {
    Matrix rc = params.coarse.start.forward(res.x1.transpose(), cache.coarse_start);
    Matrix gc = params.coarse.blocks[0].forward(rc, cache.coarse_block);
    Matrix pc;
    if (cfg.use_pono) {
      Matrix concat(2 * K, cfg.F);
      concat.topRows(K) = rc;
      concat.bottomRows(K) = gc;
      pc = params.coarse.ponos[0].forward(concat, cache.coarse_pono);
    } else {
      pc = rc + gc;
    }
    Matrix ec = params.coarse.ends[0].forward(pc, cache.coarse_end);  // K x p
    Matrix tail = res.x1.bottomRows(c).transpose();                   // K x c
    Matrix tile(K, cfg.p);
    for (int i = 0; i < n; ++i) tile.middleCols(i * c, c) = tail;
    res.y1_hat = (ec + tile).transpose();
  }

  cache.valid = true;
  return res;
}

void backward(const ModelParams& params, const ForwardCache& cache, const Matrix& grad_y0,
              const Matrix& grad_y1, const Matrix& grad_logits, ModelGrads& grads) {
  if (!cache.valid) throw StateError("model: backward before forward");
  const ModelConfig& cfg = params.cfg;
  const int K = cfg.K();
  const int c = cfg.chunk();
  const int n = cfg.n_chunks;

  if (grad_y0.size() > 0) {
    if (grad_y0.rows() != cfg.p || grad_y0.cols() != K)
      throw ShapeError("backward: grad_y0 shape mismatch");
    Matrix d_rep = Matrix::Zero(K, cfg.F);
    Matrix acc = Matrix::Zero(K, c);  // accumulated dL/d(ch_i)
    for (int i = n - 1; i >= 0; --i) {
      acc += grad_y0.middleRows(i * c, c).transpose();
      Matrix d_eout = Matrix::Zero(K, cfg.T);
      d_eout.rightCols(c) = acc;
      Matrix d_gated = params.fine.ends[i].backward(cache.fine_ends[i], d_eout, grads.fine.ends[i]);
      d_gated += d_rep;
      Matrix d_g;
      if (cfg.use_pono) {
        Matrix d_concat = params.fine.ponos[i].backward(cache.fine_ponos[i], d_gated);
        d_g = d_concat.bottomRows(K);
        d_rep = d_concat.topRows(K);
      } else {
        d_g = d_gated;
        d_rep = d_gated;
      }
      d_rep += params.fine.blocks[i].backward(cache.fine_blocks[i], d_g, grads.fine.blocks[i]);
    }
    params.fine.start.backward(cache.fine_start, d_rep, grads.fine.start);
  }

  if (cfg.coarse_branch && grad_y1.size() > 0) {
    if (grad_y1.rows() != cfg.p || grad_y1.cols() != K)
      throw ShapeError("backward: grad_y1 shape mismatch");
    Matrix d_ec = grad_y1.transpose();
    Matrix d_pc = params.coarse.ends[0].backward(cache.coarse_end, d_ec, grads.coarse.ends[0]);
    Matrix d_gc, d_rc;
    if (cfg.use_pono) {
      Matrix d_concat = params.coarse.ponos[0].backward(cache.coarse_pono, d_pc);
      d_gc = d_concat.bottomRows(K);
      d_rc = d_concat.topRows(K);
    } else {
      d_gc = d_pc;
      d_rc = d_pc;
    }
    d_rc += params.coarse.blocks[0].backward(cache.coarse_block, d_gc, grads.coarse.blocks[0]);
    params.coarse.start.backward(cache.coarse_start, d_rc, grads.coarse.start);
  }

  if (cfg.learned_grouping && grad_logits.size() > 0)
    encode_edges_backward(params.edge, cache.edge, grad_logits, grads.edge);
}

ModelGrads zero_grads(const ModelParams& params) {
  ModelGrads g;
  auto zero_branch = [](const BranchParams& b) {
    BranchGrads bg;
    bg.start = b.start.zero_grads();
    for (const auto& blk : b.blocks) bg.blocks.push_back(blk.zero_grads());
    for (const auto& e : b.ends) bg.ends.push_back(e.zero_grads());
    return bg;
  };
  g.fine = zero_branch(params.fine);
  if (params.cfg.coarse_branch) g.coarse = zero_branch(params.coarse);
  if (params.cfg.learned_grouping) g.edge = params.edge.zero_grads();
  return g;
}

std::pair<Matrix, JointPartition> predict(const Matrix& x0, const ModelParams& params) {
  ForwardCache cache;
  Rng rng = make_rng(0);  // unused in infer mode
  ForwardResult res = forward(x0, params, rng, SampleMode::infer, cache);
  return {res.y0_hat, res.partition};
}

namespace {

struct TreeBuilder {
  std::vector<ParamView> views;
  void add(const std::string& name, Matrix& m) {
    views.push_back({name, m.data(), m.rows(), m.cols()});
  }
  void add(const std::string& name, Eigen::RowVectorXd& v) {
    views.push_back({name, v.data(), 1, v.cols()});
  }
  void mlp(const std::string& prefix, Mlp& m) {
    add(prefix + ".W1", m.W1);
    add(prefix + ".b1", m.b1);
    add(prefix + ".W2", m.W2);
    add(prefix + ".b2", m.b2);
  }
  void mlp(const std::string& prefix, Mlp::Grads& m) {
    add(prefix + ".W1", m.W1);
    add(prefix + ".b1", m.b1);
    add(prefix + ".W2", m.W2);
    add(prefix + ".b2", m.b2);
  }
  void conv(const std::string& prefix, GraphConv& l) {
    add(prefix + ".A", l.A);
    add(prefix + ".W", l.W);
  }
  void conv(const std::string& prefix, GraphConv::Grads& l) {
    add(prefix + ".A", l.A);
    add(prefix + ".W", l.W);
  }
};

}  // namespace

std::vector<ParamView> parameter_tree(ModelParams& params) {
  TreeBuilder tb;
  auto add_branch = [&](const std::string& prefix, BranchParams& b) {
    tb.conv(prefix + ".start", b.start);
    for (size_t i = 0; i < b.blocks.size(); ++i)
      for (size_t l = 0; l < b.blocks[i].layers.size(); ++l)
        tb.conv(prefix + ".block" + std::to_string(i) + ".layer" + std::to_string(l),
                b.blocks[i].layers[l]);
    for (size_t i = 0; i < b.ends.size(); ++i)
      tb.conv(prefix + ".end" + std::to_string(i), b.ends[i]);
  };
  add_branch("fine", params.fine);
  if (params.cfg.coarse_branch) add_branch("coarse", params.coarse);
  if (params.cfg.learned_grouping) {
    tb.mlp("edge.f0", params.edge.f0);
    tb.mlp("edge.f_e1", params.edge.f_e1);
    tb.mlp("edge.f_v1", params.edge.f_v1);
    tb.mlp("edge.f_e2", params.edge.f_e2);
  }
  return std::move(tb.views);
}

std::vector<ParamView> gradient_tree(const ModelParams& params, ModelGrads& grads) {
  TreeBuilder tb;
  auto add_branch = [&](const std::string& prefix, BranchGrads& b) {
    tb.conv(prefix + ".start", b.start);
    for (size_t i = 0; i < b.blocks.size(); ++i)
      for (size_t l = 0; l < b.blocks[i].size(); ++l)
        tb.conv(prefix + ".block" + std::to_string(i) + ".layer" + std::to_string(l),
                b.blocks[i][l]);
    for (size_t i = 0; i < b.ends.size(); ++i)
      tb.conv(prefix + ".end" + std::to_string(i), b.ends[i]);
  };
  add_branch("fine", grads.fine);
  if (params.cfg.coarse_branch) add_branch("coarse", grads.coarse);
  if (params.cfg.learned_grouping) {
    tb.mlp("edge.f0", grads.edge.f0);
    tb.mlp("edge.f_e1", grads.edge.f_e1);
    tb.mlp("edge.f_v1", grads.edge.f_v1);
    tb.mlp("edge.f_e2", grads.edge.f_e2);
  }
  return std::move(tb.views);
}

Eigen::Index parameter_count(const ModelParams& params) {
  auto views = parameter_tree(const_cast<ModelParams&>(params));
  Eigen::Index total = 0;
  for (const auto& v : views) total += v.size();
  return total;
}

std::string config_to_json(const ModelConfig& cfg) {
  json j;
  j["J"] = cfg.J;
  j["D"] = cfg.D;
  j["T"] = cfg.T;
  j["p"] = cfg.p;
  j["n_chunks"] = cfg.n_chunks;
  j["F"] = cfg.F;
  j["tau"] = cfg.tau;
  j["sigma0"] = cfg.sigma0;
  j["sigma1"] = cfg.sigma1;
  j["pono_variant"] = cfg.pono_variant == PonoVariant::standard ? "standard" : "as_printed";
  j["grouping_threshold"] = cfg.grouping_threshold;
  j["pono_epsilon"] = cfg.pono_epsilon;
  j["edge_hidden"] = cfg.edge_hidden;
  j["edge_classes"] = cfg.edge_classes;
  j["kl_weight"] = cfg.kl_weight;
  j["coarse_branch"] = cfg.coarse_branch;
  j["learned_grouping"] = cfg.learned_grouping;
  j["use_pono"] = cfg.use_pono;
  j["infer_uniform_prior"] = cfg.infer_uniform_prior;
  if (cfg.fixed_partition) j["fixed_partition"] = cfg.fixed_partition->group_id;
  return j.dump();
}

ModelConfig config_from_json(const std::string& text) {
  json j = json::parse(text);
  ModelConfig cfg;
  cfg.J = j.at("J").get<int>();
  cfg.D = j.at("D").get<int>();
  cfg.T = j.at("T").get<int>();
  cfg.p = j.at("p").get<int>();
  cfg.n_chunks = j.at("n_chunks").get<int>();
  cfg.F = j.at("F").get<int>();
  cfg.tau = j.at("tau").get<double>();
  cfg.sigma0 = j.at("sigma0").get<double>();
  cfg.sigma1 = j.at("sigma1").get<double>();
  cfg.pono_variant = j.at("pono_variant").get<std::string>() == "as_printed"
                         ? PonoVariant::as_printed
                         : PonoVariant::standard;
  cfg.grouping_threshold = j.at("grouping_threshold").get<double>();
  cfg.pono_epsilon = j.value("pono_epsilon", 1e-5);
  cfg.edge_hidden = j.at("edge_hidden").get<int>();
  cfg.edge_classes = j.at("edge_classes").get<int>();
  cfg.kl_weight = j.at("kl_weight").get<double>();
  cfg.coarse_branch = j.at("coarse_branch").get<bool>();
  cfg.learned_grouping = j.at("learned_grouping").get<bool>();
  cfg.use_pono = j.at("use_pono").get<bool>();
  cfg.infer_uniform_prior = j.value("infer_uniform_prior", false);
  if (j.contains("fixed_partition")) {
    JointPartition p;
    p.group_id = j.at("fixed_partition").get<std::vector<int>>();
    p.group_count = p.group_id.empty() ? 0 : *std::max_element(p.group_id.begin(), p.group_id.end()) + 1;
    cfg.fixed_partition = std::move(p);
  }
  return cfg;
}

void save_checkpoint(const ModelParams& params, const std::string& path) {
  auto views = parameter_tree(const_cast<ModelParams&>(params));
  json manifest = json::array();
  Eigen::Index total = 0;
  for (const auto& v : views) {
    manifest.push_back({{"name", v.name}, {"rows", v.rows}, {"cols", v.cols}, {"dtype", "f64"}});
    total += v.size();
  }
  json header;
  header["format_version"] = 1;
  header["config"] = json::parse(config_to_json(params.cfg));
  header["manifest"] = manifest;
  header["param_count"] = total;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot open " + path + " for writing");
  out << header.dump() << "\n";
  // Arrays follow in manifest order as little-endian 8-byte floats; Eigen
  // stores column-major, serialized in storage order.
  for (const auto& v : views)
    out.write(reinterpret_cast<const char*>(v.data), static_cast<std::streamsize>(v.size() * 8));
  if (!out) throw CheckpointError("failed writing " + path);
}

ModelParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path);
  std::string header_line;
  if (!std::getline(in, header_line)) throw CheckpointError(path + ": missing header");
  json header;
  try {
    header = json::parse(header_line);
  } catch (const json::exception& e) {
    throw CheckpointError(path + ": malformed header: " + std::string(e.what()));
  }
  if (header.value("format_version", -1) != 1)
    throw CheckpointError(path + ": unsupported format version");

  ModelConfig cfg = config_from_json(header.at("config").dump());
  Rng rng = make_rng(0);
  ModelParams params = make_model(cfg, rng);
  auto views = parameter_tree(params);

  std::map<std::string, ParamView*> by_name;
  for (auto& v : views) by_name[v.name] = &v;

  std::set<std::string> seen;
  for (const auto& entry : header.at("manifest")) {
    const std::string name = entry.at("name").get<std::string>();
    auto it = by_name.find(name);
    if (it == by_name.end()) throw CheckpointError(path + ": unknown parameter key: " + name);
    ParamView* v = it->second;
    if (entry.at("rows").get<Eigen::Index>() != v->rows ||
        entry.at("cols").get<Eigen::Index>() != v->cols)
      throw CheckpointError(path + ": shape mismatch for " + name);
    in.read(reinterpret_cast<char*>(v->data), static_cast<std::streamsize>(v->size() * 8));
    if (!in) throw CheckpointError(path + ": truncated data for " + name);
    seen.insert(name);
  }
  for (const auto& v : views)
    if (!seen.count(v.name)) throw CheckpointError(path + ": missing parameter key: " + v.name);
  return params;
}

}  // namespace reschunk
