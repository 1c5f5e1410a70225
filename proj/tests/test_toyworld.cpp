#include <doctest.h>

#include "flowdub/errors.hpp"
#include "flowdub/toyworld.hpp"

using namespace flowdub;

TEST_CASE("config invariants") {
  ToyConfig c;
  CHECK_NOTHROW(c.validate());
  c.layout.v = 5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = ToyConfig{};
  c.expressions = 5;
  c.phonemes = 2;
  c.speakers = 2;
  CHECK_THROWS_AS(c.validate(), ConfigError);  // 2E > v
  c = ToyConfig{};
  c.min_phonemes = 5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("generated samples satisfy the toy law") {
  ToyConfig c;
  Rng rng(13);
  const ToyCorpus corpus = gen_corpus(c, 200, rng);
  for (const ToySample& s : corpus.samples()) {
    const Verification v = verify_sample(c, s);
    CHECK(v.ok);
    CHECK(16 * s.frames == 5 * static_cast<int>(s.tokens.length));
  }
}

TEST_CASE("verification reports the offending field") {
  ToyConfig c;
  Rng rng(2);
  ToySample s = gen_corpus(c, 1, rng)[0];
  s.tokens.acoustic.at(1, 3) = (s.tokens.acoustic.at(1, 3) + 1) % c.layout.v;
  const Verification v = verify_sample(c, s);
  REQUIRE_FALSE(v.ok);
  CHECK(v.violations[0].field == "acoustic");
  CHECK(v.violations[0].stream == 1);
  CHECK(v.violations[0].position == 3);
}

TEST_CASE("prosody frequencies follow the modal probability") {
  ToyConfig c;
  Rng rng(5);
  const ToyCorpus corpus = gen_corpus(c, 400, rng);
  double modal = 0, total = 0;
  for (const ToySample& s : corpus.samples())
    for (Symbol x : s.tokens.prosody.flat()) {
      modal += x == 2 * s.expression;
      total += 1;
    }
  CHECK(modal / total == doctest::Approx(0.7).epsilon(0.02));
}

TEST_CASE("contexts and the true conditional") {
  ToyConfig c;
  Rng rng(1);
  const ToyCorpus corpus = gen_corpus(c, 10, rng);
  const ConditioningContext dub = context_of(corpus, 3, ContextMode::dub);
  REQUIRE(dub.content_channel);
  REQUIRE(dub.prosody_prior);
  CHECK(*dub.content_channel == corpus[3].tokens.content);
  const FactorizedLaw law = true_conditional(c, dub);
  const GenerativeTarget x1 = target_of(corpus[3]);
  for (std::size_t i = 0; i < x1.position_count(); ++i) CHECK(law.row(i)[x1.at(i)] > 0.0);

  const ConditioningContext tts = context_of(corpus, 3, ContextMode::tts);
  CHECK_FALSE(tts.content_channel);
  REQUIRE(tts.reference);
  CHECK_THROWS(true_conditional(c, tts));
  CHECK(parse_context_mode("tts") == ContextMode::tts);
  CHECK_THROWS(parse_context_mode("both"));
}

TEST_CASE("held-out split is disjoint and seeded") {
  ToyConfig c;
  c.speakers = 3;
  c.layout.v = 8;
  Rng rng(3);
  const ToyCorpus corpus = gen_corpus(c, 120, rng);
  const HeldOutSplit a = split_held_out(corpus, 0.2, 9), b = split_held_out(corpus, 0.2, 9);
  CHECK(a.held_out_pairs == b.held_out_pairs);
  CHECK(a.held_out_pairs.size() == 1);
  CHECK(a.train.size() + a.eval.size() == corpus.size());
  for (std::size_t i : a.eval) {
    const std::pair<int, int> pair{static_cast<int>(corpus[i].speaker.id), corpus[i].expression};
    CHECK(std::find(a.held_out_pairs.begin(), a.held_out_pairs.end(), pair) != a.held_out_pairs.end());
  }
}
