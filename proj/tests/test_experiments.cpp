#include <doctest.h>

#include <cmath>

#include "flowdub/errors.hpp"
#include "flowdub/experiments.hpp"
#include "flowdub/io.hpp"

using namespace flowdub;

namespace {

ToyCorpus small_corpus(std::uint64_t seed, std::size_t n = 60) {
  Rng rng(seed);
  return gen_corpus(ToyConfig{}, n, rng);
}

}  // namespace

TEST_CASE("tv and nll helpers") {
  FactorizedLaw law(2, 2);
  law.row(0)[0] = 0.5, law.row(0)[1] = 0.5;
  law.row(1)[1] = 1.0;
  const StreamLayout layout{1, 1, 1, 2};
  GenerativeTarget a = all_mask_target(layout, 1), b = a;
  a.symbols.flat()[0] = 0, a.symbols.flat()[1] = 1;
  b.symbols.flat()[0] = 1, b.symbols.flat()[1] = 1;
  const std::vector<GenerativeTarget> even{a, b}, skew{a, a};
  CHECK(compute_tv(even, TargetLaw{law}) == 0.0);
  CHECK(compute_tv(skew, TargetLaw{law}) == doctest::Approx(0.25));
  CHECK(mean_position_nll(TargetLaw{law}, a) == doctest::Approx(0.5 * std::log(2.0)));
}

TEST_CASE("oracle sweep rows") {
  SweepConfig cfg;
  cfg.nfe_list = {1, 4, 32};
  cfg.samples_per_context = 200;
  cfg.max_contexts = 2;
  cfg.seed = 3;
  const ToyCorpus corpus = small_corpus(1);
  const SweepReport r = run_nfe_sweep(cfg, make_toy_oracle(corpus.config()), corpus);
  REQUIRE(r.rows.size() == 3);
  for (const SweepRow& row : r.rows) {
    CHECK_FALSE(row.flagged);
    CHECK_FALSE(row.walltime_ms);
    CHECK(row.tv_distance < 0.1);
  }
  CHECK(r.rows[2].mean_nll <= r.rows[0].mean_nll + 1e-9);
  const std::string csv = sweep_to_csv(r);
  CHECK(csv.rfind("nfe,walltime_ms,token_accuracy,tv_distance,mean_nll\n", 0) == 0);
  const json j = sweep_to_json(r);
  CHECK(j.at("kind") == "nfe_sweep");
  CHECK(j.at("rows").size() == 3);
}

TEST_CASE("sweep config validation") {
  SweepConfig cfg;
  cfg.nfe_list = {};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.nfe_list = {0};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("two-stage with zero adaptation keeps the pretrained state") {
  TwoStageConfig cfg;
  cfg.corpus_size = 40;
  cfg.pretrain_steps = 200;
  cfg.adapt_steps = 0;
  cfg.eval_examples = 16;
  const TwoStageReport r = run_two_stage(cfg);
  CHECK(r.adapted_final_state == r.adapted_pretrain_state);
  CHECK(state_digest(r.adapted_final_state) == state_digest(r.adapted_pretrain_state));
  const json j = two_stage_to_json(r);
  CHECK(validate_two_stage_report(j).empty());
  json broken = j;
  broken.erase("arms");
  CHECK_FALSE(validate_two_stage_report(broken).empty());
}

TEST_CASE("two-stage arms have finite losses") {
  TwoStageConfig cfg;
  cfg.corpus_size = 40;
  cfg.pretrain_steps = 200;
  cfg.adapt_steps = 200;
  cfg.eval_examples = 16;
  const TwoStageReport r = run_two_stage(cfg);
  for (const ArmResult* a : {&r.adapted, &r.from_scratch}) {
    CHECK_FALSE(a->diverged);
    CHECK(std::isfinite(a->final_mean_dfm_loss));
    CHECK(std::isfinite(a->held_out_mean_dfm_loss));
  }
  CHECK(r.from_scratch.adapt_steps == 400);
}
