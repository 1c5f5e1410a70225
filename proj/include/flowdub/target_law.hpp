#pragma once

#include <cstddef>
#include <span>
#include <variant>
#include <vector>

#include "flowdub/tokens.hpp"

namespace flowdub {

// Explicit finite support over flattened targets with probability weights.
struct JointLaw {
  std::size_t positions = 0;
  int vocab = 0;
  std::vector<std::vector<Symbol>> support;
  std::vector<double> weights;

  void validate() const;
};

// Product law: positions are independent, each with its own row over v.
class FactorizedLaw {
 public:
  FactorizedLaw() = default;
  FactorizedLaw(std::size_t positions, int vocab)
      : positions_(positions), vocab_(vocab), probs_(positions * vocab, 0.0) {}

  std::size_t positions() const { return positions_; }
  int vocab() const { return vocab_; }
  std::span<double> row(std::size_t i) { return {probs_.data() + i * vocab_, std::size_t(vocab_)}; }
  std::span<const double> row(std::size_t i) const {
    return {probs_.data() + i * vocab_, std::size_t(vocab_)};
  }

  void validate() const;

 private:
  std::size_t positions_ = 0;
  int vocab_ = 0;
  std::vector<double> probs_;
};

using TargetLaw = std::variant<JointLaw, FactorizedLaw>;

std::size_t law_positions(const TargetLaw& law);
int law_vocab(const TargetLaw& law);

// positions x vocab row-major table of per-position marginals.
std::vector<double> law_marginals(const TargetLaw& law);

// log q(x); -inf outside the support.
double law_log_prob(const TargetLaw& law, std::span<const Symbol> x);

// Joint law putting the empirical frequency of each distinct target on it.
JointLaw empirical_law(std::span<const GenerativeTarget> targets);

}  // namespace flowdub
