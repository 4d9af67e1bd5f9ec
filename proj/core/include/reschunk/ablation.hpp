#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "reschunk/config.hpp"

namespace reschunk {

enum class AblationVariant { full, one_l, fixed, one_ch, four_ch, seven_ch, no_pono };

std::string variant_name(AblationVariant v);
AblationVariant variant_from_name(const std::string& name);

/// Derives the variant's model config from the base config:
///   1L      drop the coarse branch, edge encoder and KL term
///   Fixed   fixed partition instead of the learned grouping, no KL
///   1ch/4ch/7ch  change n_chunks (p must stay divisible)
///   NoPONO  elementwise sum instead of concat+PONO
/// Divisibility failures raise ConfigError naming the variant.
ModelConfig apply_variant(const ModelConfig& base, AblationVariant v);

/// Contiguous 5-block grouping (torso, two arms, two legs reading of the
/// synthetic chain); the shipped default for the Fixed variant.
JointPartition default_fixed_partition(int joints);

struct AblationConfig {
  RunConfig base;
  std::vector<AblationVariant> variants;
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  WindowingConfig windowing;
};

/// Trains and evaluates every (variant, seed) pair with an identical seed
/// schedule; one table row per pair, subject "seed<N>", cells are validation
/// MPJPE per horizon.
ResultsTable run_ablation(const std::vector<MotionSequence>& train_seqs,
                          const std::vector<MotionSequence>& val_seqs,
                          const AblationConfig& cfg);

}  // namespace reschunk
