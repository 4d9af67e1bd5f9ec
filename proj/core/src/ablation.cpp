#include "reschunk/ablation.hpp"

#include "reschunk/errors.hpp"

namespace reschunk {

std::string variant_name(AblationVariant v) {
  switch (v) {
    case AblationVariant::full: return "full";
    case AblationVariant::one_l: return "1L";
    case AblationVariant::fixed: return "Fixed";
    case AblationVariant::one_ch: return "1ch";
    case AblationVariant::four_ch: return "4ch";
    case AblationVariant::seven_ch: return "7ch";
    case AblationVariant::no_pono: return "NoPONO";
  }
  throw DomainError("unknown ablation variant");
}

AblationVariant variant_from_name(const std::string& name) {
  if (name == "full") return AblationVariant::full;
  if (name == "1L") return AblationVariant::one_l;
  if (name == "Fixed") return AblationVariant::fixed;
  if (name == "1ch") return AblationVariant::one_ch;
  if (name == "4ch") return AblationVariant::four_ch;
  if (name == "7ch") return AblationVariant::seven_ch;
  if (name == "NoPONO") return AblationVariant::no_pono;
  throw ConfigError("unknown ablation variant '" + name + "'");
}

JointPartition default_fixed_partition(int joints) {
  if (joints < 1) throw ConfigError("default_fixed_partition: need at least one joint");
  JointPartition part;
  part.group_count = std::min(joints, 5);
  part.group_id.resize(joints);
  for (int j = 0; j < joints; ++j)
    part.group_id[j] = std::min(part.group_count - 1,
                                j * part.group_count / joints);
  part.validate();
  return part;
}

ModelConfig apply_variant(const ModelConfig& base, AblationVariant v) {
  ModelConfig cfg = base;
  switch (v) {
    case AblationVariant::full:
      break;
    case AblationVariant::one_l:
      cfg.coarse_branch = false;
      cfg.learned_grouping = false;
      break;
    case AblationVariant::fixed:
      cfg.learned_grouping = false;
      if (!cfg.fixed_partition) cfg.fixed_partition = default_fixed_partition(cfg.J);
      break;
    case AblationVariant::one_ch:
      cfg.n_chunks = 1;
      break;
    case AblationVariant::four_ch:
      cfg.n_chunks = 4;
      break;
    case AblationVariant::seven_ch:
      cfg.n_chunks = 7;
      break;
    case AblationVariant::no_pono:
      cfg.use_pono = false;
      break;
  }
  if (cfg.n_chunks < 1 || cfg.p % cfg.n_chunks != 0)
    throw ConfigError("variant " + variant_name(v) + ": p = " + std::to_string(cfg.p) +
                      " is not divisible by n_chunks = " + std::to_string(cfg.n_chunks));
  return cfg;
}

ResultsTable run_ablation(const std::vector<MotionSequence>& train_seqs,
                          const std::vector<MotionSequence>& val_seqs,
                          const AblationConfig& cfg) {
  if (cfg.variants.empty()) throw ConfigError("run_ablation: no variants requested");
  if (cfg.seeds.empty()) throw ConfigError("run_ablation: no seeds requested");

  // Fail fast on any bad variant before spending time on training.
  for (AblationVariant v : cfg.variants) apply_variant(cfg.base.model, v).validate();

  ResultsTable table;
  table.horizons_ms = cfg.base.horizons.horizons_ms;
  for (AblationVariant v : cfg.variants) {
    const ModelConfig mcfg = apply_variant(cfg.base.model, v);
    for (size_t s = 0; s < cfg.seeds.size(); ++s) {
      TrainConfig tcfg;
      tcfg.opt = cfg.base.opt;
      tcfg.windowing = cfg.windowing;
      tcfg.horizons = cfg.base.horizons;
      tcfg.seed = cfg.seeds[s];
      TrainResult res = train(mcfg, train_seqs, val_seqs, tcfg);
      ResultsTable::Row row;
      row.key = variant_name(v);
      row.subject = "seed" + std::to_string(cfg.seeds[s]);
      row.cells = res.best_val_mpjpe;
      table.rows.push_back(std::move(row));
    }
  }
  return table;
}

}  // namespace reschunk
