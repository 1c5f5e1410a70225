#include "flowdub/toyworld.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "flowdub/alignment.hpp"
#include "flowdub/errors.hpp"

namespace flowdub {

namespace {

int uniform_int(Rng& rng, int lo, int hi) {
  return lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
}

}  // namespace

void ToyConfig::validate() const {
  try {
    layout.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("layout: ") + e.what());
  }
  if (phonemes < 1 || expressions < 1 || speakers < 1)
    throw ConfigError("P, E and S must be positive");
  const int needed = std::max({phonemes, expressions, speakers}) + 2;
  if (layout.v < needed)
    throw ConfigError("v >= max(P, E, S) + 2 violated: v=" + std::to_string(layout.v) +
                      " needs at least " + std::to_string(needed));
  if (2 * expressions > layout.v)
    throw ConfigError("prosody symbols 2e+1 must fit the vocabulary: 2E <= v violated");
  if (min_phonemes < 1 || min_phonemes > max_phonemes)
    throw ConfigError("phoneme count range must be non-empty with min >= 1");
  if (min_beats < 1 || min_beats > max_beats)
    throw ConfigError("beat range must be non-empty with min >= 1");
  if (!(modal_probability >= 0.0 && modal_probability <= 1.0))
    throw ConfigError("modal_probability must lie in [0, 1]");
}

ToyCorpus::ToyCorpus(ToyConfig config, std::vector<ToySample> samples)
    : config_(std::move(config)), samples_(std::move(samples)) {}

std::vector<std::size_t> ToyCorpus::group(int speaker, int expression) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < samples_.size(); ++i)
    if (static_cast<int>(samples_[i].speaker.id) == speaker && samples_[i].expression == expression)
      out.push_back(i);
  return out;
}

TokenGrid content_streams(const ToyConfig& config, std::span<const int> phonemes,
                          std::span<const int> durations) {
  const int v = config.layout.v;
  std::vector<int> counts;
  for (int d : durations) counts.push_back(kTokensPerBeat * d);
  const std::vector<int> per_token = duration_expand(phonemes, std::span<const int>(counts));

  TokenGrid content(config.layout.n, per_token.size());
  for (std::size_t i = 0; i < per_token.size(); ++i) {
    content.at(0, i) = per_token[i];
    for (int s = 1; s < config.layout.n; ++s)
      content.at(s, i) = static_cast<Symbol>((per_token[i] + static_cast<int>(i)) % v);
  }
  return content;
}

ToyCorpus gen_corpus(const ToyConfig& config, std::size_t count, Rng& rng) {
  config.validate();
  if (count < 1) throw ConfigError("corpus needs at least one sample");
  const StreamLayout& layout = config.layout;

  std::vector<ToySample> samples;
  samples.reserve(count);
  for (std::size_t id = 0; id < count; ++id) {
    ToySample s;
    s.id = id;
    const int n = uniform_int(rng, config.min_phonemes, config.max_phonemes);
    for (int j = 0; j < n; ++j) s.phonemes.push_back(uniform_int(rng, 0, config.phonemes - 1));
    for (int j = 0; j < n; ++j) s.durations.push_back(uniform_int(rng, config.min_beats, config.max_beats));
    s.expression = uniform_int(rng, 0, config.expressions - 1);
    s.speaker.id = static_cast<std::uint32_t>(uniform_int(rng, 0, config.speakers - 1));

    const int beats = std::accumulate(s.durations.begin(), s.durations.end(), 0);
    s.frames = kFramesPerBeat * beats;
    const std::size_t length = static_cast<std::size_t>(kTokensPerBeat * beats);

    FactorizedTokens& tok = s.tokens;
    tok.layout = layout;
    tok.length = length;
    tok.content = content_streams(config, s.phonemes, s.durations);
    tok.prosody = TokenGrid(layout.m, length);
    for (int r = 0; r < layout.m; ++r)
      for (std::size_t i = 0; i < length; ++i)
        tok.prosody.at(r, i) = 2 * s.expression + (rng.uniform() < config.modal_probability ? 0 : 1);
    tok.acoustic = TokenGrid(layout.k, length);
    for (int r = 0; r < layout.k; ++r)
      for (std::size_t i = 0; i < length; ++i)
        tok.acoustic.at(r, i) = static_cast<Symbol>(
            (tok.content.at(0, i) + static_cast<int>(s.speaker.id) + r) % layout.v);
    samples.push_back(std::move(s));
  }
  return ToyCorpus(config, std::move(samples));
}

GenerativeTarget target_of(const ToySample& sample) {
  return concat_target(sample.tokens.layout, sample.tokens.prosody, sample.tokens.acoustic);
}

FactorizedLaw true_conditional(const ToyConfig& config, const ConditioningContext& ctx) {
  const StreamLayout& layout = config.layout;
  if (!ctx.prosody_prior || !ctx.content_channel)
    throw DomainError("true_conditional needs a prosody prior and a content channel (dub mode)");
  const std::size_t length = ctx.target_length;
  if (ctx.prosody_prior->cols() != length || ctx.content_channel->cols() != length ||
      ctx.content_channel->rows() != static_cast<std::size_t>(layout.n) ||
      ctx.prosody_prior->rows() == 0)
    throw ShapeError("context grids do not match the target length");
  if (length == 0) throw DomainError("true_conditional needs a non-empty target");
  if (static_cast<int>(ctx.speaker.id) >= config.speakers)
    throw DomainError("unknown speaker " + std::to_string(ctx.speaker.id));

  const Symbol modal = ctx.prosody_prior->at(0, 0);
  if (modal < 0 || modal % 2 != 0 || modal / 2 >= config.expressions)
    throw DomainError("prosody prior symbol " + std::to_string(modal) +
                      " does not name a known expression");
  for (Symbol s : ctx.prosody_prior->flat())
    if (s != modal) throw DomainError("prosody prior must repeat one modal symbol");

  FactorizedLaw law(static_cast<std::size_t>(layout.target_streams()) * length, layout.v);
  for (int r = 0; r < layout.m; ++r) {
    for (std::size_t i = 0; i < length; ++i) {
      auto row = law.row(r * length + i);
      row[modal] += config.modal_probability;
      row[modal + 1] += 1.0 - config.modal_probability;
    }
  }
  for (int r = 0; r < layout.k; ++r) {
    for (std::size_t i = 0; i < length; ++i) {
      const Symbol c0 = ctx.content_channel->at(0, i);
      if (c0 < 0 || c0 >= layout.v) throw DomainError("content channel symbol outside the vocabulary");
      const int a = (c0 + static_cast<int>(ctx.speaker.id) + r) % layout.v;
      law.row((layout.m + r) * length + i)[a] = 1.0;
    }
  }
  return law;
}

Verification verify_sample(const ToyConfig& config, const ToySample& s) {
  Verification out;
  auto fail = [&](std::string field, int stream, int position, std::string message) {
    out.ok = false;
    out.violations.push_back({std::move(field), stream, position, std::move(message)});
  };
  const StreamLayout& layout = config.layout;

  if (s.phonemes.size() != s.durations.size()) {
    fail("durations", -1, -1, "one duration per phoneme required");
    return out;
  }
  const int n = static_cast<int>(s.phonemes.size());
  if (n < config.min_phonemes || n > config.max_phonemes)
    fail("phonemes", -1, -1, "phoneme count outside the configured range");
  for (int j = 0; j < n; ++j) {
    if (s.phonemes[j] < 0 || s.phonemes[j] >= config.phonemes)
      fail("phonemes", -1, j, "phoneme id outside [0, P)");
    if (s.durations[j] < config.min_beats || s.durations[j] > config.max_beats)
      fail("durations", -1, j, "duration outside the configured beat range");
  }
  if (s.expression < 0 || s.expression >= config.expressions)
    fail("expression", -1, -1, "expression outside [0, E)");
  if (static_cast<int>(s.speaker.id) >= config.speakers)
    fail("speaker", -1, -1, "speaker outside [0, S)");

  const int beats = std::accumulate(s.durations.begin(), s.durations.end(), 0);
  if (s.frames != kFramesPerBeat * beats) fail("frames", -1, -1, "frames != 5 * sum(durations)");
  const auto length = static_cast<std::size_t>(kTokensPerBeat * beats);
  const FactorizedTokens& tok = s.tokens;
  if (tok.length != length) {
    fail("length", -1, -1, "token length != 16 * sum(durations)");
    return out;
  }
  if (tok.layout != layout || tok.prosody.rows() != size_t(layout.m) || tok.prosody.cols() != length ||
      tok.content.rows() != size_t(layout.n) || tok.content.cols() != length ||
      tok.acoustic.rows() != size_t(layout.k) || tok.acoustic.cols() != length) {
    fail("layout", -1, -1, "stream grids do not match the layout and length");
    return out;
  }

  bool ids_ok = true;
  for (int p : s.phonemes) ids_ok = ids_ok && p >= 0 && p < config.phonemes;
  for (int d : s.durations) ids_ok = ids_ok && d >= 1;
  if (ids_ok) {
    const TokenGrid expected = content_streams(config, s.phonemes, s.durations);
    for (int r = 0; r < layout.n; ++r)
      for (std::size_t i = 0; i < length; ++i)
        if (tok.content.at(r, i) != expected.at(r, i))
          fail("content", r, static_cast<int>(i), "content symbol breaks the duration layout");
  }
  for (int r = 0; r < layout.m; ++r)
    for (std::size_t i = 0; i < length; ++i) {
      const Symbol p = tok.prosody.at(r, i);
      if (p != 2 * s.expression && p != 2 * s.expression + 1)
        fail("prosody", r, static_cast<int>(i), "prosody symbol not in {2e, 2e+1}");
    }
  for (int r = 0; r < layout.k; ++r)
    for (std::size_t i = 0; i < length; ++i) {
      const int want = (tok.content.at(0, i) + static_cast<int>(s.speaker.id) + r) % layout.v;
      if (tok.acoustic.at(r, i) != want)
        fail("acoustic", r, static_cast<int>(i), "acoustic symbol != (content0 + speaker + stream) mod v");
    }
  return out;
}

ContextMode parse_context_mode(const std::string& text) {
  if (text == "tts") return ContextMode::tts;
  if (text == "dub") return ContextMode::dub;
  throw DomainError("mode must be 'tts' or 'dub', got '" + text + "'");
}

const char* to_string(ContextMode mode) { return mode == ContextMode::tts ? "tts" : "dub"; }

ConditioningContext context_of(const ToyCorpus& corpus, std::size_t index, ContextMode mode) {
  if (index >= corpus.size()) throw DomainError("sample index out of range");
  const ToySample& s = corpus[index];
  const StreamLayout& layout = corpus.config().layout;
  ConditioningContext ctx;
  ctx.speaker = s.speaker;
  ctx.target_length = s.tokens.length;

  if (mode == ContextMode::dub) {
    ctx.prosody_prior = TokenGrid(layout.m, s.tokens.length, 2 * s.expression);
    ctx.content_channel = s.tokens.content;
    return ctx;
  }
  for (std::size_t step = 1; step < corpus.size(); ++step) {
    const std::size_t j = (index + step) % corpus.size();
    if (corpus[j].speaker == s.speaker) {
      ctx.reference = corpus[j].tokens;
      return ctx;
    }
  }
  throw DomainError("no other sample from speaker " + std::to_string(s.speaker.id) +
                    " to use as a reference");
}

std::vector<TrainingExample> training_examples(const ToyCorpus& corpus, ContextMode mode,
                                               std::span<const std::size_t> indices) {
  std::vector<TrainingExample> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back({context_of(corpus, i, mode), target_of(corpus[i])});
  return out;
}

std::vector<TrainingExample> training_examples(const ToyCorpus& corpus, ContextMode mode) {
  std::vector<std::size_t> all(corpus.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return training_examples(corpus, mode, all);
}

ExactPosteriorDenoiser make_toy_oracle(const ToyConfig& config, const Scheduler& sched) {
  config.validate();
  return ExactPosteriorDenoiser(
      config.layout,
      [config](const ConditioningContext& ctx) -> TargetLaw { return true_conditional(config, ctx); },
      sched);
}

HeldOutSplit split_held_out(const ToyCorpus& corpus, double fraction, std::uint64_t seed) {
  const ToyConfig& cfg = corpus.config();
  std::vector<std::pair<int, int>> pairs;
  for (int s = 0; s < cfg.speakers; ++s)
    for (int e = 0; e < cfg.expressions; ++e) pairs.emplace_back(s, e);

  Rng rng(seed);
  for (std::size_t i = pairs.size(); i > 1; --i) std::swap(pairs[i - 1], pairs[rng.below(i)]);
  const auto wanted = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(pairs.size())));
  const std::size_t count = std::min(pairs.size(), std::max<std::size_t>(1, wanted));

  HeldOutSplit split;
  split.held_out_pairs.assign(pairs.begin(), pairs.begin() + static_cast<std::ptrdiff_t>(count));
  std::ranges::sort(split.held_out_pairs);
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const std::pair<int, int> key{static_cast<int>(corpus[i].speaker.id), corpus[i].expression};
    const bool held = std::ranges::binary_search(split.held_out_pairs, key);
    (held ? split.eval : split.train).push_back(i);
  }
  return split;
}

}  // namespace flowdub
