#include <doctest.h>

#include <cmath>
#include <random>

#include "flowdub/alignment.hpp"
#include "flowdub/errors.hpp"
#include "oracles.hpp"

using namespace flowdub;

TEST_CASE("frame and token conversion") {
  CHECK(frames_to_tokens(5) == 16);
  CHECK(frames_to_tokens(25) == 80);
  CHECK(frames_to_tokens(0) == 0);
  CHECK_THROWS_AS(frames_to_tokens(7), DomainError);
  CHECK_THROWS_AS(frames_to_tokens(-5), DomainError);
  CHECK(token_to_frame_index(0, 5) == 0);
  CHECK(token_to_frame_index(15, 5) == 4);
  CHECK(token_to_frame_index(16, 10) == 5);
  CHECK_THROWS(token_to_frame_index(16, 5));
}

TEST_CASE("duration tables build monotonic matrices") {
  const DurationTable d{{2, 1, 3}};
  CHECK(d.total_frames() == 30);
  CHECK(d.total_tokens() == 96);
  const AlignmentMatrix f = build_alignment_matrix(d, AlignUnit::frames);
  CHECK(f.rows() == 30);
  CHECK(f.cols() == 3);
  CHECK(f.is_monotonic());
  CHECK(f.at(9, 0) == 1);
  CHECK(f.at(10, 1) == 1);
  CHECK(build_alignment_matrix(d, AlignUnit::tokens).rows() == 96);
  const DurationTable zero{{1, 0}};
  CHECK_THROWS_AS(zero.validate(), DomainError);
  AlignmentMatrix bad = f;
  bad.set(0, 0, false);
  bad.set(0, 2, true);
  CHECK_FALSE(bad.is_monotonic());
}

TEST_CASE("duration expand") {
  const std::vector<int> items{7, 8, 9}, counts{2, 0, 1};
  CHECK(duration_expand<int>(items, counts) == std::vector<int>{7, 7, 9});
  const std::vector<int> neg{1, -1, 1};
  CHECK_THROWS_AS(duration_expand<int>(items, neg), DomainError);
}

TEST_CASE("contrastive loss closed forms") {
  const std::vector<int> two_each{2, 2};
  const AlignmentMatrix m = AlignmentMatrix::from_counts(two_each);
  ScoreGrid uniform(4, 2, 0.3);
  CHECK(std::abs(contrastive_alignment_loss({uniform, 0.1}, m) - 6 * std::log(2.0)) < 1e-9);

  ScoreGrid sat(4, 2, 0.0);
  for (std::size_t i = 0; i < 4; ++i) sat.at(i, i / 2) = 10.0;
  CHECK(contrastive_alignment_loss({sat, 0.1}, m) < 1e-6);

  std::mt19937_64 gen(1);
  std::normal_distribution<double> nd;
  for (int rep = 0; rep < 20; ++rep) {
    ScoreGrid a(4, 2);
    for (double& x : a.values) x = nd(gen);
    CHECK(contrastive_alignment_loss({a, 0.7}, m) == doctest::Approx(oracle::contrastive_direct(a, 0.7, m)).epsilon(1e-12));
  }
}

TEST_CASE("contrastive loss input checks") {
  const std::vector<int> counts{1, 1};
  const AlignmentMatrix m = AlignmentMatrix::from_counts(counts);
  CHECK_THROWS_AS(contrastive_alignment_loss({ScoreGrid(3, 2), 0.1}, m), ShapeError);
  CHECK_THROWS_AS(contrastive_alignment_loss({ScoreGrid(2, 2), 0.0}, m), DomainError);
  ScoreGrid nan(2, 2);
  nan.at(0, 1) = std::nan("");
  CHECK_THROWS_AS(contrastive_alignment_loss({nan, 0.1}, m), DomainError);
  AlignmentMatrix empty(2, 2);
  empty.set(0, 0, true);
  empty.set(1, 0, true);
  CHECK(std::isinf(contrastive_alignment_loss({ScoreGrid(2, 2), 0.1}, empty)));
}

TEST_CASE("mas equals exhaustive maximum") {
  std::mt19937_64 gen(8);
  std::normal_distribution<double> nd;
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t cols = 1 + gen() % 5;
    const std::size_t rows = cols + gen() % (9 - cols);
    ScoreGrid g(rows, cols);
    for (double& x : g.values) x = nd(gen);
    const MonotonicPath p = mas(g);
    CHECK(p.columns.size() == rows);
    CHECK(path_score(g, p) == doctest::Approx(oracle::best_path_score(g)).epsilon(1e-12));
  }
  CHECK_THROWS_AS(mas(ScoreGrid(2, 3)), DomainError);
}

TEST_CASE("mas ties advance as early as possible") {
  const MonotonicPath p = mas(ScoreGrid(4, 2, 0.0));
  CHECK(p.columns == std::vector<int>{0, 1, 1, 1});
}

TEST_CASE("mas recovers duration-built paths") {
  const DurationTable d{{1, 3, 2}};
  const AlignmentMatrix m = build_alignment_matrix(d, AlignUnit::frames);
  ScoreGrid g(m.rows(), m.cols(), -10.0);
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j)
      if (m.at(i, j)) g.at(i, j) = 0.0;
  CHECK(path_to_durations(mas(g), 3) == std::vector<int>{5, 15, 10});
}
