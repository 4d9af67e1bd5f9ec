// Command line front end: synth, train, eval, ablate, predict, plot,
// gradcheck. Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "reschunk/ablation.hpp"
#include "reschunk/config.hpp"
#include "reschunk/errors.hpp"

namespace fs = std::filesystem;
using namespace reschunk;

namespace {

std::vector<MotionSequence> load_dir(const std::string& dir) {
  std::vector<std::string> paths;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".mtf")
      paths.push_back(entry.path().string());
  std::sort(paths.begin(), paths.end());
  if (paths.empty()) throw DataError("no .mtf files in " + dir);
  std::vector<MotionSequence> out;
  for (const auto& p : paths) out.push_back(load_sequence(p));
  return out;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << text;
}

// Shared --config/--set/--seed plumbing. Values are applied in order:
// defaults, config file, then --set overrides.
struct ConfigArgs {
  std::string config_path;
  std::vector<std::string> sets;
  std::uint64_t seed = 0;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "flat key = value config file");
    app->add_option("--set", sets, "override a config key, KEY=VALUE")->take_all();
    app->add_option("--seed", seed, "root random seed");
  }

  RunConfig resolve() const {
    RunConfig cfg;
    if (!config_path.empty()) cfg = load_config(config_path);
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects KEY=VALUE, got '" + kv + "'");
      set_config_key(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    return cfg;
  }
};

void print_resolved(const RunConfig& cfg, std::uint64_t seed) {
  std::cout << "# resolved config\n" << render_config(cfg) << "seed = " << seed << "\n";
}

// Fills dataset-derived fields the user left unset: joint layout always
// comes from the data, T/p from the cropping scheme when zero.
void adopt_dataset(RunConfig& cfg, const std::vector<MotionSequence>& seqs,
                   const WindowingConfig& wcfg) {
  const auto& sk = seqs.front().skeleton;
  cfg.model.J = sk.joint_count;
  cfg.model.D = sk.per_joint_dim;
  cfg.horizons.fps = seqs.front().fps;
  if (cfg.model.T == 0 || cfg.model.p == 0) {
    const int L = static_cast<int>(std::llround(wcfg.crop_seconds * seqs.front().fps));
    const int n_in = static_cast<int>(std::llround(L * wcfg.input_fraction));
    if (cfg.model.T == 0) cfg.model.T = n_in;
    if (cfg.model.p == 0) cfg.model.p = L - n_in;
  }
}

struct WindowingArgs {
  WindowingConfig cfg;
  void attach(CLI::App* app) {
    app->add_option("--window-seconds", cfg.window_seconds, "sliding window length, seconds");
    app->add_option("--stride", cfg.stride_frames, "sliding window stride, frames");
    app->add_option("--crop-seconds", cfg.crop_seconds, "cropped sample length, seconds");
    app->add_option("--input-fraction", cfg.input_fraction, "input share of the crop");
  }
};

int cmd_synth(const std::string& out_dir, const SynthConfig& scfg, std::uint64_t seed) {
  std::cout << "# resolved config\n"
            << "sequences = " << scfg.n_sequences << "\njoints = " << scfg.joints
            << "\nfps = " << scfg.fps << "\nseconds = " << scfg.seconds
            << "\ngroups = " << scfg.n_groups << "\nbase_hz = " << scfg.base_hz
            << "\namplitude = " << scfg.amplitude
            << "\njitter = " << scfg.jitter << "\nseed = " << seed << "\n";
  fs::create_directories(out_dir);
  Rng rng = make_rng(seed);
  auto seqs = synth_dataset(scfg, rng);
  for (size_t i = 0; i < seqs.size(); ++i) {
    char name[64];
    std::snprintf(name, sizeof(name), "seq_%03zu.mtf", i);
    save_sequence(seqs[i], (fs::path(out_dir) / name).string());
  }
  std::cout << "wrote " << seqs.size() << " sequences to " << out_dir << "\n";
  return 0;
}

int cmd_train(const ConfigArgs& cargs, const WindowingArgs& wargs, const std::string& train_dir,
              const std::string& val_dir, const std::string& ckpt_path,
              const std::string& metrics_path) {
  auto train_seqs = load_dir(train_dir);
  auto val_seqs = load_dir(val_dir);
  RunConfig cfg = cargs.resolve();
  adopt_dataset(cfg, train_seqs, wargs.cfg);
  print_resolved(cfg, cargs.seed);

  TrainConfig tcfg{cfg.opt, wargs.cfg, cfg.horizons, cargs.seed};
  TrainResult res = train(cfg.model, train_seqs, val_seqs, tcfg);
  if (!metrics_path.empty()) write_file(metrics_path, res.metrics_log);
  save_checkpoint(res.params, ckpt_path);
  std::cout << "trained " << res.steps << " steps over " << res.epochs
            << " epochs, checkpoint " << ckpt_path << "\nbest val mpjpe:";
  for (size_t h = 0; h < res.best_val_mpjpe.size(); ++h)
    std::cout << " " << cfg.horizons.horizons_ms[h] << "ms=" << res.best_val_mpjpe[h];
  std::cout << "\n";
  return 0;
}

int cmd_eval(const ConfigArgs& cargs, const WindowingArgs& wargs, const std::string& data_dir,
             const std::string& ckpt_path, const std::string& format,
             const std::string& out_path) {
  auto seqs = load_dir(data_dir);
  ModelParams params = load_checkpoint(ckpt_path);
  RunConfig cfg = cargs.resolve();
  cfg.model = params.cfg;
  cfg.horizons.fps = seqs.front().fps;
  print_resolved(cfg, cargs.seed);

  TrainConfig tcfg{cfg.opt, wargs.cfg, cfg.horizons, cargs.seed};
  tcfg.horizons.validate(cfg.model.p);
  ResultsTable table;
  table.horizons_ms = cfg.horizons.horizons_ms;
  table.rows.push_back({"reschunk", "all", evaluate_model(params, seqs, tcfg)});
  table.rows.push_back({"zero_velocity", "all", evaluate_zero_velocity(seqs, tcfg)});
  const std::string text =
      emit_table(table, format == "markdown" ? TableFormat::markdown : TableFormat::csv);
  if (out_path.empty()) std::cout << text;
  else write_file(out_path, text);
  return 0;
}

int cmd_ablate(const ConfigArgs& cargs, const WindowingArgs& wargs, const std::string& train_dir,
               const std::string& val_dir, const std::vector<std::string>& variant_names,
               const std::vector<std::uint64_t>& seeds, const std::string& format,
               const std::string& out_path) {
  auto train_seqs = load_dir(train_dir);
  auto val_seqs = load_dir(val_dir);
  AblationConfig acfg;
  acfg.base = cargs.resolve();
  adopt_dataset(acfg.base, train_seqs, wargs.cfg);
  acfg.windowing = wargs.cfg;
  for (const auto& n : variant_names) acfg.variants.push_back(variant_from_name(n));
  if (!seeds.empty()) acfg.seeds = seeds;
  print_resolved(acfg.base, acfg.seeds.front());

  ResultsTable table = run_ablation(train_seqs, val_seqs, acfg);
  const std::string text =
      emit_table(table, format == "markdown" ? TableFormat::markdown : TableFormat::csv);
  if (out_path.empty()) std::cout << text;
  else write_file(out_path, text);
  return 0;
}

int cmd_predict(const ConfigArgs& cargs, const std::string& ckpt_path, const std::string& in_path,
                const std::string& out_path) {
  ModelParams params = load_checkpoint(ckpt_path);
  RunConfig cfg = cargs.resolve();
  cfg.model = params.cfg;
  print_resolved(cfg, cargs.seed);

  MotionSequence seq = load_sequence(in_path);
  const int T = params.cfg.T;
  if (seq.total_frames() < T)
    throw DataError("input has " + std::to_string(seq.total_frames()) + " frames, need " +
                    std::to_string(T));
  Matrix x0 = seq.frames.bottomRows(T);
  auto [y_hat, partition] = predict(x0, params);
  MotionSequence out = seq;
  out.frames = y_hat;
  out.name = seq.name + "_pred";
  save_sequence(out, out_path);
  std::cout << "groups:";
  for (int g : partition.group_id) std::cout << " " << g;
  std::cout << "\npredicted " << y_hat.rows() << " frames to " << out_path << "\n";
  return 0;
}

int cmd_plot(const std::string& gt_path, const std::string& pred_path,
             std::vector<int> frames, const std::string& out_path) {
  MotionSequence gt = load_sequence(gt_path);
  MotionSequence pred = load_sequence(pred_path, gt.skeleton);
  write_file(out_path, plot_prediction(gt.frames, pred.frames, gt.skeleton, frames));
  std::cout << "wrote " << out_path << "\n";
  return 0;
}

int cmd_gradcheck(const ConfigArgs& cargs, double tolerance) {
  RunConfig cfg = cargs.resolve();
  print_resolved(cfg, cargs.seed);
  GradCheckReport report = grad_check(cfg.model, tolerance, cargs.seed);
  std::cout << report.summary();
  if (!report.ok) throw StateError("gradient check failed, max relative error " +
                                   std::to_string(report.max_rel_err));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"residual-chunk motion prediction"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  std::string synth_out;
  SynthConfig scfg;
  std::uint64_t synth_seed = 0;
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--sequences", scfg.n_sequences, "number of sequences");
  synth->add_option("--joints", scfg.joints, "joints per skeleton");
  synth->add_option("--fps", scfg.fps, "frames per second");
  synth->add_option("--seconds", scfg.seconds, "seconds per sequence");
  synth->add_option("--groups", scfg.n_groups, "planted joint groups");
  synth->add_option("--amplitude", scfg.amplitude, "motion amplitude, mm");
  synth->add_option("--base-hz", scfg.base_hz, "base oscillation frequency");
  synth->add_option("--jitter", scfg.jitter, "observation noise, mm");
  synth->add_option("--seed", synth_seed, "root random seed");

  // train
  auto* tr = app.add_subcommand("train", "train a model");
  ConfigArgs tr_cfg;
  WindowingArgs tr_win;
  std::string tr_data, tr_val, tr_ckpt = "model.ckpt", tr_metrics;
  tr_cfg.attach(tr);
  tr_win.attach(tr);
  tr->add_option("--data", tr_data, "training .mtf directory")->required();
  tr->add_option("--val", tr_val, "validation .mtf directory")->required();
  tr->add_option("--out", tr_ckpt, "checkpoint output path");
  tr->add_option("--metrics", tr_metrics, "metrics log output path");

  // eval
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  ConfigArgs ev_cfg;
  WindowingArgs ev_win;
  std::string ev_data, ev_ckpt, ev_format = "csv", ev_out;
  ev_cfg.attach(ev);
  ev_win.attach(ev);
  ev->add_option("--data", ev_data, "evaluation .mtf directory")->required();
  ev->add_option("--checkpoint", ev_ckpt, "checkpoint path")->required();
  ev->add_option("--format", ev_format, "csv or markdown")
      ->check(CLI::IsMember({"csv", "markdown"}));
  ev->add_option("--out", ev_out, "table output path (default stdout)");

  // ablate
  auto* ab = app.add_subcommand("ablate", "run the ablation table");
  ConfigArgs ab_cfg;
  WindowingArgs ab_win;
  std::string ab_train, ab_val, ab_format = "csv", ab_out;
  std::vector<std::string> ab_variants = {"full", "1L", "Fixed", "1ch", "4ch", "NoPONO"};
  std::vector<std::uint64_t> ab_seeds;
  ab_cfg.attach(ab);
  ab_win.attach(ab);
  ab->add_option("--data", ab_train, "training .mtf directory")->required();
  ab->add_option("--val", ab_val, "validation .mtf directory")->required();
  ab->add_option("--variants", ab_variants, "variant names")->delimiter(',');
  ab->add_option("--seeds", ab_seeds, "training seeds")->delimiter(',');
  ab->add_option("--format", ab_format, "csv or markdown")
      ->check(CLI::IsMember({"csv", "markdown"}));
  ab->add_option("--out", ab_out, "table output path (default stdout)");

  // predict
  auto* pr = app.add_subcommand("predict", "predict from the tail of a sequence");
  ConfigArgs pr_cfg;
  std::string pr_ckpt, pr_in, pr_out;
  pr_cfg.attach(pr);
  pr->add_option("--checkpoint", pr_ckpt, "checkpoint path")->required();
  pr->add_option("--input", pr_in, "input .mtf file")->required();
  pr->add_option("--out", pr_out, "output .mtf path")->required();

  // plot
  auto* pl = app.add_subcommand("plot", "render ground truth vs prediction as SVG");
  std::string pl_gt, pl_pred, pl_out;
  std::vector<int> pl_frames;
  pl->add_option("--gt", pl_gt, "ground truth .mtf file")->required();
  pl->add_option("--pred", pl_pred, "prediction .mtf file")->required();
  pl->add_option("--frames", pl_frames, "frame indices to draw")->delimiter(',');
  pl->add_option("--out", pl_out, "output .svg path")->required();

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient audit");
  ConfigArgs gc_cfg;
  double gc_tol = 1e-4;
  gc_cfg.attach(gc);
  gc->add_option("--tolerance", gc_tol, "max relative error");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*synth) return cmd_synth(synth_out, scfg, synth_seed);
    if (*tr) return cmd_train(tr_cfg, tr_win, tr_data, tr_val, tr_ckpt, tr_metrics);
    if (*ev) return cmd_eval(ev_cfg, ev_win, ev_data, ev_ckpt, ev_format, ev_out);
    if (*ab)
      return cmd_ablate(ab_cfg, ab_win, ab_train, ab_val, ab_variants, ab_seeds, ab_format,
                        ab_out);
    if (*pr) return cmd_predict(pr_cfg, pr_ckpt, pr_in, pr_out);
    if (*pl) return cmd_plot(pl_gt, pl_pred, pl_frames, pl_out);
    if (*gc) return cmd_gradcheck(gc_cfg, gc_tol);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
