#include <doctest.h>

#include "flowdub/errors.hpp"
#include "flowdub/rng.hpp"
#include "flowdub/tokens.hpp"

using namespace flowdub;

TEST_CASE("layout validation") {
  CHECK_NOTHROW(StreamLayout{1, 2, 3, 8}.validate());
  CHECK_THROWS_AS(StreamLayout({0, 2, 3, 8}).validate(), ConfigError);
  CHECK_THROWS_AS(StreamLayout({1, 2, 3, 1}).validate(), ConfigError);
  CHECK(StreamLayout{1, 2, 3, 8}.mask_symbol() == 8);
  CHECK(StreamLayout{1, 2, 3, 8}.target_streams() == 4);
}

TEST_CASE("concat and split round trip") {
  const StreamLayout layout{2, 1, 3, 5};
  TokenGrid prosody(2, 4), acoustic(3, 4);
  for (std::size_t t = 0; t < 4; ++t) {
    prosody.at(0, t) = 0;
    prosody.at(1, t) = 1;
    for (std::size_t s = 0; s < 3; ++s) acoustic.at(s, t) = static_cast<Symbol>(2 + s);
  }
  const GenerativeTarget g = concat_target(layout, prosody, acoustic);
  CHECK(g.position_count() == 20);
  // Prosody streams come first; flat index is stream * L + token.
  CHECK(g.at(1 * 4 + 2) == 1);
  CHECK(g.at(2 * 4 + 0) == 2);
  CHECK(g.at(4 * 4 + 3) == 4);
  const auto [p, a] = split_target(g);
  CHECK(p == prosody);
  CHECK(a == acoustic);
}

TEST_CASE("concat rejects length mismatch") {
  const StreamLayout layout{1, 1, 1, 4};
  CHECK_THROWS_AS(concat_target(layout, TokenGrid(1, 3), TokenGrid(1, 4)), ShapeError);
  CHECK_THROWS_AS(concat_target(layout, TokenGrid(2, 3), TokenGrid(1, 3)), ShapeError);
}

TEST_CASE("mask fraction") {
  const StreamLayout layout{1, 1, 1, 4};
  CHECK(mask_fraction(all_mask_target(layout, 6)) == 1.0);
  CHECK(mask_fraction(all_mask_target(layout, 0)) == 0.0);
  GenerativeTarget g = all_mask_target(layout, 2);
  g.symbols.at(0, 0) = 3;
  CHECK(mask_fraction(g) == doctest::Approx(0.75));
  CHECK(g.has_mask());
}

TEST_CASE("symbol range checks") {
  TokenGrid grid(1, 3, 2);
  CHECK_NOTHROW(check_symbols(grid, 4, "grid"));
  grid.at(0, 1) = 5;
  CHECK_THROWS_AS(check_symbols(grid, 4, "grid"), DomainError);
  grid.at(0, 1) = -1;
  CHECK_THROWS_AS(check_symbols(grid, 4, "grid"), DomainError);
}

TEST_CASE("rng is reproducible and streams differ") {
  Rng a(42), b(42), c(derive_seed(42, 1));
  for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());
  CHECK(Rng(42).next() != c.next());
  Rng r(3);
  for (int i = 0; i < 1000; ++i) {
    const double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(r.below(7) < 7);
  }
}
