#include "reschunk/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "reschunk/errors.hpp"

namespace reschunk {

void OptimizerConfig::validate() const {
  if (learning_rate <= 0.0 || weight_decay < 0.0) throw ConfigError("bad optimizer rates");
  if (beta1 <= 0.0 || beta1 >= 1.0 || beta2 <= 0.0 || beta2 >= 1.0)
    throw ConfigError("beta1/beta2 must lie in (0,1)");
  if (batch_size < 1 || max_steps < 1 || patience < 0) throw ConfigError("bad loop bounds");
}

double kl_loss(const EdgePosterior& posterior) {
  const int J = posterior.J;
  const double log_c = std::log(static_cast<double>(posterior.C));
  double total = 0.0;
  for (int i = 0; i < J; ++i)
    for (int j = 0; j < J; ++j) {
      if (i == j) continue;
      const auto r = posterior.pair(i, j);
      double neg_entropy = 0.0;
      for (int c = 0; c < posterior.C; ++c) {
        const double q = posterior.probs(r, c);
        if (q > 0.0) neg_entropy += q * std::log(q);
      }
      total += log_c + neg_entropy;
    }
  return total;
}

Matrix kl_loss_grad(const EdgePosterior& posterior) {
  const int J = posterior.J;
  Matrix g = Matrix::Zero(posterior.logits.rows(), posterior.logits.cols());
  for (int i = 0; i < J; ++i)
    for (int j = 0; j < J; ++j) {
      if (i == j) continue;
      const auto r = posterior.pair(i, j);
      double phi = 0.0;  // sum q log q
      for (int c = 0; c < posterior.C; ++c) {
        const double q = posterior.probs(r, c);
        if (q > 0.0) phi += q * std::log(q);
      }
      for (int c = 0; c < posterior.C; ++c) {
        const double q = posterior.probs(r, c);
        g(r, c) = q > 0.0 ? q * (std::log(q) - phi) : 0.0;
      }
    }
  return g;
}

double recon_loss(const Matrix& y_hat, const Matrix& y, double sigma) {
  if (y_hat.rows() != y.rows() || y_hat.cols() != y.cols())
    throw ShapeError("recon_loss: shape mismatch");
  if (sigma <= 0.0) throw DomainError("recon_loss: sigma must be positive");
  return (y_hat - y).squaredNorm() / (2.0 * sigma * sigma);
}

Matrix recon_loss_grad(const Matrix& y_hat, const Matrix& y, double sigma) {
  return (y_hat - y) / (sigma * sigma);
}

LossBreakdown total_loss(const ForwardResult& result, const Matrix& y0, const Matrix& y1,
                         const ModelConfig& cfg) {
  LossBreakdown lb;
  lb.recon_fine = recon_loss(result.y0_hat, y0, cfg.sigma0);
  if (cfg.coarse_branch) {
    if (y1.size() == 0) throw ShapeError("total_loss: coarse branch requires a coarse target");
    lb.recon_coarse = recon_loss(result.y1_hat, y1, cfg.sigma1);
  }
  if (cfg.learned_grouping) lb.kl = kl_loss(result.posterior);
  lb.total = cfg.kl_weight * lb.kl + lb.recon_fine + lb.recon_coarse;
  return lb;
}

AdamState make_adam_state(ModelParams& params) {
  AdamState st;
  for (const auto& view : parameter_tree(params)) {
    st.m.push_back(Matrix::Zero(view.rows, view.cols));
    st.v.push_back(Matrix::Zero(view.rows, view.cols));
  }
  return st;
}

void adam_step(ModelParams& params, ModelGrads& grads, AdamState& state,
               const OptimizerConfig& cfg) {
  cfg.validate();
  auto pviews = parameter_tree(params);
  auto gviews = gradient_tree(params, grads);
  if (pviews.size() != gviews.size() || pviews.size() != state.m.size())
    throw StateError("adam_step: parameter/gradient/state trees do not match");

  constexpr double eps = 1e-8;
  ++state.t;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (size_t k = 0; k < pviews.size(); ++k) {
    if (pviews[k].name != gviews[k].name || pviews[k].size() != gviews[k].size())
      throw StateError("adam_step: tree mismatch at " + pviews[k].name);
    Eigen::Map<Eigen::ArrayXd> p(pviews[k].data, pviews[k].size());
    Eigen::Map<const Eigen::ArrayXd> g(gviews[k].data, gviews[k].size());
    auto m = state.m[k].array().reshaped();
    auto v = state.v[k].array().reshaped();
    p *= (1.0 - cfg.learning_rate * cfg.weight_decay);  // decoupled decay
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.square();
    p -= cfg.learning_rate * (m / bc1) / ((v / bc2).sqrt() + eps);
  }
}

namespace {

struct WindowRef {
  int seq = 0;
  FrameRange range;
};

std::vector<WindowRef> collect_windows(const std::vector<MotionSequence>& seqs,
                                       const WindowingConfig& wcfg) {
  std::vector<WindowRef> out;
  for (size_t s = 0; s < seqs.size(); ++s)
    for (const auto& r : slide_windows(seqs[s], wcfg)) out.push_back({static_cast<int>(s), r});
  return out;
}

constexpr std::uint64_t kValStream = 0x76616c69ULL;    // validation crops
constexpr std::uint64_t kShuffleStream = 0x73687566ULL;
constexpr std::uint64_t kTrainStream = 0x74726169ULL;

std::vector<double> eval_windows(const ModelParams* params,
                                 const std::vector<MotionSequence>& seqs,
                                 const TrainConfig& tcfg) {
  const auto windows = collect_windows(seqs, tcfg.windowing);
  if (windows.empty()) throw ConfigError("evaluation split yields no windows");
  const auto& horizons = tcfg.horizons.horizons_ms;
  std::vector<double> acc(horizons.size(), 0.0);
  for (size_t w = 0; w < windows.size(); ++w) {
    Rng rng = split_rng(tcfg.seed, kValStream, w);
    const auto& seq = seqs[windows[w].seq];
    WindowSample sample = crop_sample(seq, windows[w].range, tcfg.windowing, rng);
    const int p = static_cast<int>(sample.target.rows());
    Matrix pred = params ? predict(sample.input, *params).first
                         : zero_velocity_baseline(sample.input, p);
    for (size_t h = 0; h < horizons.size(); ++h)
      acc[h] += mpjpe(pred, sample.target, seq.skeleton, tcfg.horizons.frame_for(horizons[h]));
  }
  for (auto& a : acc) a /= static_cast<double>(windows.size());
  return acc;
}

}  // namespace

std::vector<double> evaluate_model(const ModelParams& params,
                                   const std::vector<MotionSequence>& seqs,
                                   const TrainConfig& tcfg) {
  return eval_windows(&params, seqs, tcfg);
}

std::vector<double> evaluate_zero_velocity(const std::vector<MotionSequence>& seqs,
                                           const TrainConfig& tcfg) {
  return eval_windows(nullptr, seqs, tcfg);
}

TrainResult train(const ModelConfig& mcfg, const std::vector<MotionSequence>& train_seqs,
                  const std::vector<MotionSequence>& val_seqs, const TrainConfig& tcfg) {
  mcfg.validate();
  tcfg.opt.validate();
  if (train_seqs.empty()) throw ConfigError("train split is empty");
  if (val_seqs.empty()) throw ConfigError("validation split is empty");
  const double fps = train_seqs.front().fps;
  if (std::abs(tcfg.horizons.fps - fps) > 1e-9)
    throw ConfigError("horizon fps does not match the dataset fps");
  tcfg.horizons.validate(mcfg.p);

  const auto windows = collect_windows(train_seqs, tcfg.windowing);
  if (windows.empty()) throw ConfigError("train split yields no windows");

  Rng init_rng = make_rng(tcfg.seed);
  ModelParams params = make_model(mcfg, init_rng);
  AdamState adam = make_adam_state(params);

  std::ostringstream log;
  char line[256];
  TrainResult result;
  ModelParams best = params;
  double best_val = std::numeric_limits<double>::infinity();
  std::vector<double> best_val_vec;
  int epochs_since_improve = 0;
  int step = 0;
  int epoch = 0;
  const int B = tcfg.opt.batch_size;

  bool stop = false;
  while (!stop && step < tcfg.opt.max_steps) {
    // Shuffle window order once per epoch.
    std::vector<size_t> order(windows.size());
    std::iota(order.begin(), order.end(), size_t{0});
    {
      Rng srng = split_rng(tcfg.seed, kShuffleStream, epoch);
      std::shuffle(order.begin(), order.end(), srng);
    }
    for (size_t pos = 0; pos < order.size() && step < tcfg.opt.max_steps; pos += B) {
      const size_t take = std::min<size_t>(B, order.size() - pos);
      ModelGrads grads = zero_grads(params);
      LossBreakdown batch_loss;
      for (size_t b = 0; b < take; ++b) {
        const size_t widx = order[pos + b];
        Rng wrng = split_rng(tcfg.seed ^ kTrainStream, static_cast<std::uint64_t>(step), widx);
        const auto& seq = train_seqs[windows[widx].seq];
        WindowSample sample = crop_sample(seq, windows[widx].range, tcfg.windowing, wrng);
        ForwardCache cache;
        ForwardResult res = forward(sample.input, params, wrng, SampleMode::train, cache);
        Matrix y1;
        if (mcfg.coarse_branch) y1 = coarsen(sample.target, res.partition, mcfg.D);
        LossBreakdown lb = total_loss(res, sample.target, y1, mcfg);
        batch_loss.kl += lb.kl;
        batch_loss.recon_fine += lb.recon_fine;
        batch_loss.recon_coarse += lb.recon_coarse;
        batch_loss.total += lb.total;

        const double inv = 1.0 / static_cast<double>(take);
        Matrix d_y0 = recon_loss_grad(res.y0_hat, sample.target, mcfg.sigma0) * inv;
        Matrix d_y1, d_logits;
        if (mcfg.coarse_branch) d_y1 = recon_loss_grad(res.y1_hat, y1, mcfg.sigma1) * inv;
        if (mcfg.learned_grouping && mcfg.kl_weight != 0.0)
          d_logits = kl_loss_grad(res.posterior) * (mcfg.kl_weight * inv);
        backward(params, cache, d_y0, d_y1, d_logits, grads);
      }
      const double inv = 1.0 / static_cast<double>(take);
      batch_loss.kl *= inv;
      batch_loss.recon_fine *= inv;
      batch_loss.recon_coarse *= inv;
      batch_loss.total *= inv;

      adam_step(params, grads, adam, tcfg.opt);
      ++step;
      std::snprintf(line, sizeof(line), "step %d %.17g %.17g %.17g %.17g\n", step, batch_loss.kl,
                    batch_loss.recon_fine, batch_loss.recon_coarse, batch_loss.total);
      log << line;
      result.step_total.push_back(batch_loss.total);
    }
    ++epoch;

    std::vector<double> val = evaluate_model(params, val_seqs, tcfg);
    log << "epoch " << epoch << " val_mpjpe";
    double avg = 0.0;
    for (size_t h = 0; h < val.size(); ++h) {
      std::snprintf(line, sizeof(line), " %d:%.17g", tcfg.horizons.horizons_ms[h], val[h]);
      log << line;
      avg += val[h];
    }
    log << "\n";
    avg /= static_cast<double>(val.size());

    if (avg < best_val) {
      best_val = avg;
      best = params;
      best_val_vec = val;
      epochs_since_improve = 0;
    } else {
      ++epochs_since_improve;
    }
    // patience 0 means a single epoch; otherwise stop after `patience`
    // epochs without validation improvement.
    if (tcfg.opt.patience == 0 || epochs_since_improve > tcfg.opt.patience) stop = true;
  }

  result.params = std::move(best);
  result.metrics_log = log.str();
  result.best_val_mpjpe = std::move(best_val_vec);
  result.epochs = epoch;
  result.steps = step;
  return result;
}

std::string GradCheckReport::summary() const {
  std::ostringstream out;
  for (const auto& g : groups)
    out << (g.ok ? "ok   " : "FAIL ") << g.name << " max_rel_err=" << g.max_rel_err << "\n";
  out << (ok ? "PASS" : "FAIL") << " overall max_rel_err=" << max_rel_err << "\n";
  return out.str();
}

GradCheckReport grad_check(const ModelConfig& cfg, double tolerance, std::uint64_t seed,
                           const std::string& corrupt_group) {
  cfg.validate();
  Rng rng = make_rng(seed);
  ModelParams params = make_model(cfg, rng);

  Matrix x0(cfg.T, cfg.K());
  for (Eigen::Index r = 0; r < x0.rows(); ++r)
    for (Eigen::Index c = 0; c < x0.cols(); ++c) x0(r, c) = normal01(rng);

  // Freeze sampling noise and the (piecewise-constant) partition so the
  // loss is smooth in every parameter.
  Matrix noise;
  JointPartition partition;
  Matrix baseline_y0;
  {
    if (cfg.learned_grouping) noise = gumbel_noise(cfg.J, cfg.edge_classes, rng);
    ForwardCache cache;
    ForwardResult res = forward(x0, params, rng, SampleMode::train, cache,
                                ForwardOptions{cfg.learned_grouping ? &noise : nullptr, nullptr});
    partition = res.partition;
    baseline_y0 = res.y0_hat;
  }
  ForwardOptions opts{cfg.learned_grouping ? &noise : nullptr, &partition};

  // A target near the model output keeps the loss value small relative to
  // its per-parameter gradients; otherwise the finite differences of the
  // smallest entries disappear into rounding of the large loss.
  Matrix y0 = baseline_y0;
  for (Eigen::Index r = 0; r < y0.rows(); ++r)
    for (Eigen::Index c = 0; c < y0.cols(); ++c) y0(r, c) += 0.1 * normal01(rng);

  auto loss_of = [&](ModelParams& p, ForwardCache* cache_out, ForwardResult* res_out) {
    ForwardCache local;
    ForwardCache& cache = cache_out ? *cache_out : local;
    Rng dummy = make_rng(0);
    ForwardResult res = forward(x0, p, dummy, SampleMode::train, cache, opts);
    Matrix y1;
    if (cfg.coarse_branch) y1 = coarsen(y0, res.partition, cfg.D);
    LossBreakdown lb = total_loss(res, y0, y1, cfg);
    if (res_out) *res_out = std::move(res);
    return lb;
  };

  // Analytic gradients.
  ForwardCache cache;
  ForwardResult res;
  loss_of(params, &cache, &res);
  ModelGrads grads = zero_grads(params);
  Matrix y1;
  if (cfg.coarse_branch) y1 = coarsen(y0, res.partition, cfg.D);
  Matrix d_y0 = recon_loss_grad(res.y0_hat, y0, cfg.sigma0);
  Matrix d_y1, d_logits;
  if (cfg.coarse_branch) d_y1 = recon_loss_grad(res.y1_hat, y1, cfg.sigma1);
  if (cfg.learned_grouping && cfg.kl_weight != 0.0)
    d_logits = kl_loss_grad(res.posterior) * cfg.kl_weight;
  backward(params, cache, d_y0, d_y1, d_logits, grads);

  auto pviews = parameter_tree(params);
  auto gviews = gradient_tree(params, grads);

  constexpr double fd_eps = 1e-5;
  GradCheckReport report;
  for (size_t k = 0; k < pviews.size(); ++k) {
    GradCheckEntry entry;
    entry.name = pviews[k].name;
    const double corrupt = entry.name == corrupt_group ? 2.0 : 1.0;
    for (Eigen::Index idx = 0; idx < pviews[k].size(); ++idx) {
      double& theta = pviews[k].data[idx];
      const double saved = theta;
      theta = saved + fd_eps;
      const LossBreakdown lp = loss_of(params, nullptr, nullptr);
      theta = saved - fd_eps;
      const LossBreakdown lm = loss_of(params, nullptr, nullptr);
      theta = saved;
      // Difference per component before summing: the KL term is orders of
      // magnitude below the reconstruction terms and would otherwise drown
      // in cancellation error.
      const double numeric = (cfg.kl_weight * (lp.kl - lm.kl) +
                              (lp.recon_fine - lm.recon_fine) +
                              (lp.recon_coarse - lm.recon_coarse)) /
                             (2.0 * fd_eps);
      const double analytic = gviews[k].data[idx] * corrupt;
      const double denom = std::max(std::abs(analytic), std::abs(numeric));
      if (std::abs(analytic) < 1e-6 && std::abs(numeric) < 1e-6) {
        if (std::abs(analytic - numeric) > 1e-7) entry.ok = false;
      } else {
        const double rel = std::abs(analytic - numeric) / denom;
        entry.max_rel_err = std::max(entry.max_rel_err, rel);
        if (rel > tolerance) entry.ok = false;
      }
    }
    report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
    report.ok = report.ok && entry.ok;
    report.groups.push_back(std::move(entry));
  }
  return report;
}

}  // namespace reschunk
