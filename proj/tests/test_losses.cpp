#include <doctest.h>

#include <cmath>
#include <random>

#include "flowdub/errors.hpp"
#include "flowdub/losses.hpp"
#include "oracles.hpp"

using namespace flowdub;

TEST_CASE("ctc against path enumeration") {
  std::mt19937_64 gen(21);
  for (std::size_t T = 1; T <= 5; ++T)
    for (std::size_t P = 1; P <= 3; ++P) {
      const LogProbTable lp = oracle::random_log_probs(T, P + 1, gen);
      for (std::size_t len = 0; len <= 3; ++len)
        for (int rep = 0; rep < 4; ++rep) {
          std::vector<int> y(len);
          for (int& s : y) s = 1 + static_cast<int>(gen() % P);
          const CtcResult r = ctc_loss(lp, y);
          const double expect = oracle::ctc_enumerate(lp, y);
          if (std::isinf(expect)) {
            CHECK_FALSE(r.feasible);
            CHECK(std::isinf(r.loss));
          } else {
            CHECK(r.feasible);
            CHECK(std::abs(r.loss - expect) < 1e-9);
          }
        }
    }
}

TEST_CASE("ctc uniform example and edge cases") {
  const LogProbTable uniform(2, 3, -std::log(3.0));
  const std::vector<int> one{1};
  CHECK(std::abs(ctc_loss(uniform, one).loss - std::log(3.0)) < 1e-9);
  const std::vector<int> repeat{1, 1};
  CHECK_FALSE(ctc_loss(uniform, repeat).feasible);
  const std::vector<int> blank{0};
  CHECK_THROWS(ctc_loss(uniform, blank));
  const LogProbTable none(0, 3);
  CHECK(ctc_loss(none, {}).loss == 0.0);
}

TEST_CASE("distillation") {
  const std::vector<double> a{1.0, 2.0}, neg{-1.0, -2.0}, e1{1.0, 0.0}, diag{1.0, 1.0};
  CHECK(std::abs(distill_loss(a, a)) < 1e-9);
  CHECK(std::abs(distill_loss(a, neg) - 2.0) < 1e-9);
  CHECK(std::abs(distill_loss(e1, diag) - (1.0 - 1.0 / std::sqrt(2.0))) < 1e-9);
  const std::vector<double> zero{0.0, 0.0};
  CHECK_THROWS(distill_loss(a, zero));
  const std::vector<std::vector<double>> seq{{1.0, 3.0}, {3.0, 5.0}};
  CHECK(pool(seq) == std::vector<double>{2.0, 4.0});
}

TEST_CASE("content cross entropy") {
  const ContentLogits zero(2, 3, 8);
  TokenGrid target(2, 3, 5);
  CHECK(std::abs(content_ce(zero, target) - std::log(8.0)) < 1e-9);
  target.at(1, 1) = 8;
  CHECK_THROWS_AS(content_ce(zero, target), DomainError);
}

TEST_CASE("weighted total") {
  LossComponents unit{1, 1, 1, 1, 1, 1, true};
  const LossBreakdown b = total_loss(unit, LossWeights{});
  CHECK(std::abs(b.total - 2.202) < 1e-12);
  unit.ctc_feasible = false;
  unit.l_ctc = std::numeric_limits<double>::infinity();
  CHECK(std::isinf(total_loss(unit, LossWeights{}).total));
  LossWeights no_ctc;
  no_ctc.lambda2 = 0.0;
  const LossBreakdown c = total_loss(unit, no_ctc);
  CHECK(std::abs(c.total - 2.102) < 1e-12);
  CHECK(c.ctc_infeasible);
  LossWeights negative;
  negative.lambda3 = -1;
  CHECK_THROWS(total_loss(unit, negative));
}
