#include <doctest.h>

#include <cmath>
#include <random>

#include "flowdub/denoiser.hpp"
#include "flowdub/errors.hpp"
#include "flowdub/toyworld.hpp"

using namespace flowdub;

namespace {

// Bayes posterior by enumerating every x1 in {0..v-1}^n.
std::vector<double> brute_posterior(const JointLaw& law, const std::vector<Symbol>& xt, double kappa, int mask) {
  const std::size_t n = law.positions;
  const int v = law.vocab;
  std::vector<double> marg(n * v, 0.0);
  double z = 0.0;
  std::vector<Symbol> x(n, 0);
  std::size_t total = 1;
  for (std::size_t i = 0; i < n; ++i) total *= v;
  for (std::size_t code = 0; code < total; ++code) {
    std::size_t c = code;
    for (std::size_t i = 0; i < n; ++i) x[i] = static_cast<Symbol>(c % v), c /= v;
    double q = 0.0;
    for (std::size_t s = 0; s < law.support.size(); ++s)
      if (law.support[s] == x) q += law.weights[s];
    double w = q;
    for (std::size_t i = 0; i < n; ++i) w *= xt[i] == mask ? 1.0 - kappa : (xt[i] == x[i] ? kappa : 0.0);
    z += w;
    for (std::size_t i = 0; i < n; ++i) marg[i * v + x[i]] += w;
  }
  for (auto& m : marg) m /= z;
  return marg;
}

}  // namespace

TEST_CASE("exact posterior matches enumeration") {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  const StreamLayout layout{1, 1, 2, 3};  // 3 positions at L = 1
  for (int rep = 0; rep < 50; ++rep) {
    JointLaw law;
    law.positions = 3;
    law.vocab = 3;
    for (int s = 0; s < 5; ++s) {
      std::vector<Symbol> x{Symbol(gen() % 3), Symbol(gen() % 3), Symbol(gen() % 3)};
      law.support.push_back(x);
      law.weights.push_back(u(gen));
    }
    double z = 0;
    for (double w : law.weights) z += w;
    for (double& w : law.weights) w /= z;
    // Reveal a random subset of a support point so the state is consistent.
    const auto& anchor = law.support[gen() % law.support.size()];
    PathState st{u(gen) * 0.9, all_mask_target(layout, 1)};
    std::vector<Symbol> xt(3, 3);
    for (int i = 0; i < 3; ++i)
      if (gen() % 2) xt[i] = st.state.symbols.flat()[i] = anchor[i];
    const PosteriorGrid p = exact_posterior(TargetLaw{law}, st, Scheduler{});
    const auto expect = brute_posterior(law, xt, Scheduler{}.kappa(st.time), 3);
    for (std::size_t i = 0; i < 3; ++i)
      for (int x = 0; x < 3; ++x) CHECK(p.row(i)[x] == doctest::Approx(expect[i * 3 + x]).epsilon(1e-12));
  }
}

TEST_CASE("inconsistent state is rejected") {
  const StreamLayout layout{1, 1, 1, 2};
  JointLaw law{2, 2, {{0, 0}}, {1.0}};
  PathState st{0.5, all_mask_target(layout, 1)};
  st.state.symbols.at(0, 0) = 1;
  CHECK_THROWS_AS(exact_posterior(TargetLaw{law}, st, Scheduler{}), InconsistencyError);
  FactorizedLaw f(2, 2);
  f.row(0)[0] = 1.0;
  f.row(1)[1] = 1.0;
  CHECK_THROWS_AS(exact_posterior(TargetLaw{f}, st, Scheduler{}), InconsistencyError);
}

TEST_CASE("table key text round trip") {
  TableKey k;
  k.fields = {1, 3, 8, 9, -1, 7, 0, 4, 2};
  CHECK(k.to_string() == "1,3,8,9,-1,7,0,4,2");
  CHECK(TableKey::parse(k.to_string()) == k);
  CHECK_THROWS(TableKey::parse("1,2,3"));
}

TEST_CASE("tabular gradient matches central differences") {
  ToyConfig cfg;
  Rng rng(11);
  const ToyCorpus corpus = gen_corpus(cfg, 6, rng);
  const auto ex = training_examples(corpus, ContextMode::dub);
  TabularDenoiser d(cfg.layout);
  std::mt19937_64 gen(5);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (auto& x : d.mutable_default_row()) x = nd(gen);
  int checked = 0;
  for (const auto& e : ex) {
    const PathState st = corrupt(e.target, 0.6, Scheduler{}, rng);
    const auto grad = d.loss_gradient(st, e.ctx, e.target);
    for (const auto& [key, g] : grad) {
      auto& row = d.mutable_logits(key);
      for (double& x : row) x = nd(gen);
      const auto fresh = d.loss_gradient(st, e.ctx, e.target).at(key);
      const int s = static_cast<int>(gen() % row.size());
      const double eps = 1e-5, keep = row[s];
      row[s] = keep + eps;
      const double up = d.loss(st, e.ctx, e.target);
      row[s] = keep - eps;
      const double down = d.loss(st, e.ctx, e.target);
      row[s] = keep;
      const double fd = (up - down) / (2 * eps);
      CHECK(std::abs(fd - fresh[s]) <= 1e-4 * std::max({std::abs(fd), std::abs(fresh[s]), 1e-3}));
      if (++checked == 30) break;
    }
    if (checked == 30) break;
  }
  CHECK(checked == 30);
}

TEST_CASE("zero-logit table is the uniform denoiser") {
  ToyConfig cfg;
  Rng rng(2);
  const ToyCorpus corpus = gen_corpus(cfg, 2, rng);
  const auto ex = training_examples(corpus, ContextMode::dub);
  const TabularDenoiser d(cfg.layout);
  const PathState st = corrupt(ex[0].target, 0.3, Scheduler{}, rng);
  const double expect = static_cast<double>(ex[0].target.position_count()) * std::log(8.0);
  CHECK(dfm_loss_at(d.evaluate(st, ex[0].ctx), ex[0].target) == doctest::Approx(expect).epsilon(1e-13));
}

TEST_CASE("training lowers the loss and lr zero is a no-op") {
  ToyConfig cfg;
  cfg.modal_probability = 1.0;
  Rng rng(4);
  const ToyCorpus corpus = gen_corpus(cfg, 20, rng);
  const auto ex = training_examples(corpus, ContextMode::dub);

  TabularDenoiser frozen(cfg.layout);
  Rng r0(1);
  const TrainTrace t0 = tabular_train(frozen, ex, 50, 0.0, Scheduler{}, r0);
  CHECK(frozen == TabularDenoiser(cfg.layout));
  CHECK(t0.loss.size() == 50);

  TabularDenoiser d(cfg.layout);
  Rng r1(1);
  const TrainTrace t = tabular_train(d, ex, 2000, 0.5, Scheduler{}, r1);
  double head = 0, tail = 0, head_n = 0, tail_n = 0;
  for (int i = 0; i < 100; ++i) {
    head += t.loss[i], head_n += t.positions[i];
    tail += t.loss[1900 + i], tail_n += t.positions[1900 + i];
  }
  MESSAGE("per-position loss: first 100 steps " << head / head_n << ", last 100 " << tail / tail_n);
  CHECK(tail / tail_n < 0.5 * head / head_n);

  Rng r2(0);
  CHECK_THROWS_AS(tabular_train(d, ex, -1, 0.1, Scheduler{}, r2), DomainError);
  CHECK_THROWS_AS(tabular_train(d, {}, 3, 0.1, Scheduler{}, r2), DomainError);
}
