#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "flowdub/denoiser.hpp"
#include "flowdub/rng.hpp"
#include "flowdub/target_law.hpp"
#include "flowdub/tokens.hpp"

namespace flowdub {

// Generating law of the synthetic dubbing corpus.
struct ToyConfig {
  int phonemes = 4;     // P
  int expressions = 2;  // E
  int speakers = 2;     // S
  StreamLayout layout{1, 2, 3, 8};
  int min_phonemes = 2;
  int max_phonemes = 4;
  int min_beats = 1;
  int max_beats = 3;
  // Probability of the modal prosody symbol 2e; 2e+1 gets the rest.
  double modal_probability = 0.7;
  std::uint64_t seed = 0;

  // Throws ConfigError naming the violated invariant.
  void validate() const;
  bool operator==(const ToyConfig&) const = default;
};

struct ToySample {
  std::size_t id = 0;
  std::vector<int> phonemes;
  std::vector<int> durations;  // beats
  int expression = 0;
  SpeakerId speaker;
  int frames = 0;  // 5 * sum(durations)
  FactorizedTokens tokens;  // length 16 * sum(durations)

  bool operator==(const ToySample&) const = default;
};

class ToyCorpus {
 public:
  ToyCorpus() = default;
  ToyCorpus(ToyConfig config, std::vector<ToySample> samples);

  const ToyConfig& config() const { return config_; }
  const std::vector<ToySample>& samples() const { return samples_; }
  std::size_t size() const { return samples_.size(); }
  const ToySample& operator[](std::size_t i) const { return samples_[i]; }

  // Indices of samples with the given (speaker, expression).
  std::vector<std::size_t> group(int speaker, int expression) const;

  bool operator==(const ToyCorpus&) const = default;

 private:
  ToyConfig config_;
  std::vector<ToySample> samples_;
};

ToyCorpus gen_corpus(const ToyConfig& config, std::size_t count, Rng& rng);

// Token-level streams implied by phonemes and durations.
TokenGrid content_streams(const ToyConfig& config, std::span<const int> phonemes,
                          std::span<const int> durations);

GenerativeTarget target_of(const ToySample& sample);

// Exact q(prosody, acoustic | ctx) for a dub-mode context: prosody
// positions independent over {2e, 2e+1} with (p, 1-p); acoustic a point
// mass at (content0 + speaker + stream) mod v.
FactorizedLaw true_conditional(const ToyConfig& config, const ConditioningContext& ctx);

struct Violation {
  std::string field;
  int stream = -1;
  int position = -1;
  std::string message;
};

struct Verification {
  bool ok = true;
  std::vector<Violation> violations;
};

Verification verify_sample(const ToyConfig& config, const ToySample& sample);

enum class ContextMode { tts, dub };

ContextMode parse_context_mode(const std::string& text);
const char* to_string(ContextMode mode);

// tts: reference = next same-speaker sample, content ABSENT.
// dub: prosody prior = modal symbol 2e over every stream and token, content
// channel = the sample's own content grid.
ConditioningContext context_of(const ToyCorpus& corpus, std::size_t index, ContextMode mode);

std::vector<TrainingExample> training_examples(const ToyCorpus& corpus, ContextMode mode,
                                               std::span<const std::size_t> indices);
std::vector<TrainingExample> training_examples(const ToyCorpus& corpus, ContextMode mode);

// Oracle denoiser over the toy law (dub-mode contexts).
ExactPosteriorDenoiser make_toy_oracle(const ToyConfig& config, const Scheduler& sched = Scheduler{});

// Samples whose (speaker, expression) pair is held out for evaluation.
struct HeldOutSplit {
  std::vector<std::pair<int, int>> held_out_pairs;
  std::vector<std::size_t> train;
  std::vector<std::size_t> eval;
};

// Holds out max(1, round(fraction * S * E)) pairs chosen by a seeded shuffle.
HeldOutSplit split_held_out(const ToyCorpus& corpus, double fraction, std::uint64_t seed);

}  // namespace flowdub
