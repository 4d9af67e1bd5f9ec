#include <doctest.h>
#include <cmath>

#include "reschunk/ablation.hpp"
#include "reschunk/errors.hpp"

using namespace reschunk;

namespace {

ModelConfig base_config() {
  ModelConfig cfg;
  cfg.J = 8;
  cfg.D = 3;
  cfg.T = 28;
  cfg.p = 28;
  cfg.n_chunks = 4;
  cfg.F = 6;
  cfg.edge_hidden = 6;
  return cfg;
}

}  // namespace

TEST_CASE("variant names round trip") {
  for (AblationVariant v :
       {AblationVariant::full, AblationVariant::one_l, AblationVariant::fixed,
        AblationVariant::one_ch, AblationVariant::four_ch, AblationVariant::seven_ch,
        AblationVariant::no_pono})
    CHECK(variant_from_name(variant_name(v)) == v);
  CHECK_THROWS_AS(variant_from_name("2L"), ConfigError);
}

TEST_CASE("apply_variant transforms the config as documented") {
  const ModelConfig base = base_config();

  SUBCASE("full is the identity") {
    ModelConfig cfg = apply_variant(base, AblationVariant::full);
    CHECK(cfg.coarse_branch);
    CHECK(cfg.learned_grouping);
    CHECK(cfg.n_chunks == 4);
  }
  SUBCASE("1L strips the second scale and the encoder") {
    ModelConfig cfg = apply_variant(base, AblationVariant::one_l);
    CHECK_FALSE(cfg.coarse_branch);
    CHECK_FALSE(cfg.learned_grouping);
    CHECK_NOTHROW(cfg.validate());
  }
  SUBCASE("Fixed swaps in the default partition") {
    ModelConfig cfg = apply_variant(base, AblationVariant::fixed);
    CHECK_FALSE(cfg.learned_grouping);
    CHECK(cfg.coarse_branch);
    REQUIRE(cfg.fixed_partition.has_value());
    CHECK(cfg.fixed_partition->group_count == 5);
    CHECK_NOTHROW(cfg.validate());
  }
  SUBCASE("Fixed keeps a user-supplied partition") {
    ModelConfig with = base;
    JointPartition part;
    part.group_id = {0, 0, 0, 0, 1, 1, 1, 1};
    part.group_count = 2;
    with.fixed_partition = part;
    ModelConfig cfg = apply_variant(with, AblationVariant::fixed);
    CHECK(*cfg.fixed_partition == part);
  }
  SUBCASE("chunk variants adjust n_chunks") {
    CHECK(apply_variant(base, AblationVariant::one_ch).n_chunks == 1);
    CHECK(apply_variant(base, AblationVariant::four_ch).n_chunks == 4);
    CHECK(apply_variant(base, AblationVariant::seven_ch).n_chunks == 7);
  }
  SUBCASE("indivisible chunk count names the variant") {
    ModelConfig odd = base;
    odd.T = odd.p = 24;
    CHECK_THROWS_WITH_AS(apply_variant(odd, AblationVariant::seven_ch),
                         doctest::Contains("7ch"), ConfigError);
  }
  SUBCASE("NoPONO flips the sum switch only") {
    ModelConfig cfg = apply_variant(base, AblationVariant::no_pono);
    CHECK_FALSE(cfg.use_pono);
    CHECK(cfg.coarse_branch);
  }
}

TEST_CASE("default fixed partition is five contiguous blocks") {
  JointPartition part = default_fixed_partition(10);
  CHECK(part.group_count == 5);
  CHECK(part.group_id == std::vector<int>{0, 0, 1, 1, 2, 2, 3, 3, 4, 4});
  // Small skeletons degrade gracefully.
  CHECK(default_fixed_partition(3).group_count == 3);
  CHECK_THROWS_AS(default_fixed_partition(0), ConfigError);
}

TEST_CASE("run_ablation produces one row per variant and seed") {
  SynthConfig scfg;
  scfg.n_sequences = 1;
  scfg.joints = 4;
  scfg.fps = 10.0;
  scfg.seconds = 6.0;
  Rng rng = make_rng(1);
  auto train_seqs = synth_dataset(scfg, rng);
  auto val_seqs = synth_dataset(scfg, rng);

  AblationConfig acfg;
  acfg.base.model = base_config();
  acfg.base.model.J = 4;
  acfg.base.model.T = 10;
  acfg.base.model.p = 10;
  acfg.base.model.n_chunks = 5;
  acfg.base.opt.batch_size = 4;
  acfg.base.opt.max_steps = 2;
  acfg.base.horizons.horizons_ms = {500, 1000};
  acfg.base.horizons.fps = 10.0;
  acfg.windowing.window_seconds = 3.0;
  acfg.windowing.stride_frames = 10;
  acfg.windowing.crop_seconds = 2.0;
  acfg.variants = {AblationVariant::full, AblationVariant::one_l};
  acfg.seeds = {1, 2};

  ResultsTable table = run_ablation(train_seqs, val_seqs, acfg);
  REQUIRE(table.rows.size() == 4);
  CHECK(table.rows[0].key == "full");
  CHECK(table.rows[0].subject == "seed1");
  CHECK(table.rows[3].key == "1L");
  CHECK(table.rows[3].subject == "seed2");
  for (const auto& row : table.rows) {
    REQUIRE(row.cells.size() == 2);
    for (double c : row.cells) {
      CHECK(std::isfinite(c));
      CHECK(c >= 0.0);
    }
  }

  SUBCASE("bad variant fails before any training") {
    acfg.base.model.T = acfg.base.model.p = 10;
    acfg.variants = {AblationVariant::seven_ch};
    CHECK_THROWS_WITH_AS(run_ablation(train_seqs, val_seqs, acfg),
                         doctest::Contains("7ch"), ConfigError);
  }
  SUBCASE("empty variant list is rejected") {
    acfg.variants.clear();
    CHECK_THROWS_AS(run_ablation(train_seqs, val_seqs, acfg), ConfigError);
  }
}
