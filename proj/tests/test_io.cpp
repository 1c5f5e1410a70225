#include <doctest.h>

#include <sstream>

#include "flowdub/errors.hpp"
#include "flowdub/io.hpp"
#include "oracles.hpp"

using namespace flowdub;

TEST_CASE("corpus round trip") {
  ToyConfig c;
  c.seed = 17;
  Rng rng(17);
  const ToyCorpus corpus = gen_corpus(c, 12, rng);
  std::istringstream in(corpus_to_jsonl(corpus));
  CHECK(corpus_from_jsonl(in) == corpus);
}

TEST_CASE("tabular round trip") {
  ToyConfig c;
  Rng rng(2);
  const ToyCorpus corpus = gen_corpus(c, 10, rng);
  TabularDenoiser d(c.layout);
  tabular_train(d, training_examples(corpus, ContextMode::dub), 100, 0.3, Scheduler{}, rng);
  const TabularDenoiser back = tabular_from_json(json::parse(tabular_to_json(d).dump()));
  CHECK(back == d);
}

TEST_CASE("context json keeps the absent marker") {
  ToyConfig c;
  Rng rng(2);
  const ToyCorpus corpus = gen_corpus(c, 20, rng);
  const ConditioningContext tts = context_of(corpus, 0, ContextMode::tts);
  const json j = tts;
  CHECK(j.at("content_channel") == kAbsentMarker);
  CHECK(j.get<ConditioningContext>() == tts);
  const ConditioningContext dub = context_of(corpus, 0, ContextMode::dub);
  CHECK(json(dub).get<ConditioningContext>() == dub);
}

TEST_CASE("malformed inputs") {
  std::istringstream empty("");
  CHECK_THROWS(corpus_from_jsonl(empty));
  oracle::TempDir dir("io");
  write_text_file(dir.path / "bad.jsonl", "{not json}\n");
  CHECK_THROWS_AS(read_corpus(dir.path / "bad.jsonl"), ParseError);
  CHECK_THROWS_AS(read_corpus(dir.path / "missing.jsonl"), IoError);
  json bad_grid = json::array({json::array({1, 2}), json::array({3})});
  CHECK_THROWS(bad_grid.get<TokenGrid>());
}

TEST_CASE("loss breakdown nulls non-finite values") {
  LossBreakdown b;
  b.components.l_ctc = std::numeric_limits<double>::infinity();
  b.total = b.components.l_ctc;
  b.ctc_infeasible = true;
  const json j = b;
  CHECK(j.at("l_ctc").is_null());
  CHECK(j.at("total").is_null());
  CHECK(j.at("ctc_infeasible") == true);
}
