#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "flowdub/denoiser.hpp"
#include "flowdub/target_law.hpp"
#include "flowdub/toyworld.hpp"

namespace flowdub {

// Metrics are desk-scale analogs of the quality-vs-NFE table: token
// agreement with the reference utterance, per-position total variation to
// the exact law and mean per-position NLL under the exact law.
struct SweepConfig {
  std::vector<int> nfe_list{1, 2, 4, 8, 16, 32, 64, 128};
  std::size_t samples_per_context = 1000;
  std::size_t max_contexts = 4;
  double held_out_fraction = 0.2;
  std::uint64_t seed = 0;
  int threads = 1;
  bool record_walltime = false;

  void validate() const;
};

struct SweepRow {
  int nfe = 0;
  std::optional<double> walltime_ms;
  double token_accuracy = 0.0;
  double tv_distance = 0.0;
  double mean_nll = 0.0;
  bool flagged = false;
  std::string flag_reason;
};

struct SweepReport {
  SweepConfig config;
  ToyConfig toy;
  std::string denoiser;
  std::size_t contexts = 0;
  std::vector<SweepRow> rows;
};

// Context c samples with seed derive_seed(config.seed, c) at every NFE, so
// rows share their symbol draws (see sample()).
SweepReport run_nfe_sweep(const SweepConfig& config, const Denoiser& denoiser,
                          const ToyCorpus& corpus, const std::string& denoiser_label = "oracle");

// Mean over positions of 1/2 * sum_x |empirical_i(x) - q_i(x)|.
double compute_tv(std::span<const GenerativeTarget> samples, const TargetLaw& exact);

// Mean over positions of -log max(q_i(x_i), kLogFloor).
double mean_position_nll(const TargetLaw& law, const GenerativeTarget& sample);

nlohmann::json sweep_to_json(const SweepReport& report);
std::string sweep_to_csv(const SweepReport& report);

struct TwoStageConfig {
  ToyConfig toy;
  std::size_t corpus_size = 120;
  int pretrain_steps = 1000;
  int adapt_steps = 1000;
  double lr = 0.5;
  std::uint64_t seed = 0;
  std::size_t eval_examples = 64;
  double held_out_fraction = 0.2;
  int threads = 1;
  TabularConfig table;

  void validate() const;
};

struct ArmResult {
  std::string name;
  int pretrain_steps = 0;
  int adapt_steps = 0;
  bool diverged = false;
  std::string diagnostic;
  double final_mean_dfm_loss = 0.0;     // in-domain eval batch (dub mode)
  double held_out_mean_dfm_loss = 0.0;  // held-out (speaker, expression) pairs
  double token_accuracy = 0.0;          // argmax at masked positions, in-domain
  double last_train_loss = 0.0;         // mean of the final 100 trace entries
};

struct TwoStageReport {
  TwoStageConfig config;
  ArmResult adapted;       // tts pretrain then dub adaptation
  ArmResult from_scratch;  // dub only, equal total steps
  TabularDenoiser adapted_pretrain_state;
  TabularDenoiser adapted_final_state;
  TabularDenoiser scratch_final_state;
};

TwoStageReport run_two_stage(const TwoStageConfig& config);

// Fraction of masked positions whose posterior argmax equals the truth.
double masked_token_accuracy(const Denoiser& denoiser, std::span<const TrainingExample> examples,
                             const Scheduler& sched, std::uint64_t seed);

// FNV-1a over the serialized table.
std::string state_digest(const TabularDenoiser& denoiser);

nlohmann::json two_stage_to_json(const TwoStageReport& report);

// Structural checks of the documented report schema; returns the problems
// found (empty when valid).
std::vector<std::string> validate_two_stage_report(const nlohmann::json& report);

}  // namespace flowdub
