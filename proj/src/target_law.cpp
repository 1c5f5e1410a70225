#include "flowdub/target_law.hpp"

#include <algorithm>
#include <type_traits>
#include <cmath>
#include <limits>
#include <map>
#include <string>

#include "flowdub/errors.hpp"

namespace flowdub {

void JointLaw::validate() const {
  if (support.size() != weights.size())
    throw ShapeError("joint law support and weight counts differ");
  double total = 0.0;
  for (std::size_t s = 0; s < support.size(); ++s) {
    if (support[s].size() != positions) throw ShapeError("joint law support point has wrong length");
    for (Symbol x : support[s])
      if (x < 0 || x >= vocab) throw DomainError("joint law symbol outside the vocabulary");
    if (!(weights[s] >= 0.0)) throw DomainError("joint law weight must be non-negative");
    total += weights[s];
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw DomainError("joint law weights sum to " + std::to_string(total));
}

void FactorizedLaw::validate() const {
  for (std::size_t i = 0; i < positions_; ++i) {
    double total = 0.0;
    for (double p : row(i)) {
      if (!(p >= 0.0)) throw DomainError("factorized law has a negative entry");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-9)
      throw DomainError("factorized law row " + std::to_string(i) + " sums to " +
                        std::to_string(total));
  }
}

std::size_t law_positions(const TargetLaw& law) {
  return std::visit(
      [](const auto& l) -> std::size_t {
        if constexpr (std::is_same_v<std::decay_t<decltype(l)>, JointLaw>)
          return l.positions;
        else
          return l.positions();
      },
      law);
}

int law_vocab(const TargetLaw& law) {
  return std::visit(
      [](const auto& l) -> int {
        if constexpr (std::is_same_v<std::decay_t<decltype(l)>, JointLaw>)
          return l.vocab;
        else
          return l.vocab();
      },
      law);
}

std::vector<double> law_marginals(const TargetLaw& law) {
  const std::size_t positions = law_positions(law);
  const int vocab = law_vocab(law);
  std::vector<double> out(positions * vocab, 0.0);
  if (const auto* joint = std::get_if<JointLaw>(&law)) {
    for (std::size_t s = 0; s < joint->support.size(); ++s)
      for (std::size_t i = 0; i < positions; ++i)
        out[i * vocab + joint->support[s][i]] += joint->weights[s];
  } else {
    const auto& fact = std::get<FactorizedLaw>(law);
    for (std::size_t i = 0; i < positions; ++i)
      for (int x = 0; x < vocab; ++x) out[i * vocab + x] = fact.row(i)[x];
  }
  return out;
}

double law_log_prob(const TargetLaw& law, std::span<const Symbol> x) {
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  if (x.size() != law_positions(law)) throw ShapeError("sequence length differs from the law");
  const int vocab = law_vocab(law);
  if (const auto* joint = std::get_if<JointLaw>(&law)) {
    double mass = 0.0;
    for (std::size_t s = 0; s < joint->support.size(); ++s)
      if (std::ranges::equal(joint->support[s], x)) mass += joint->weights[s];
    return mass > 0.0 ? std::log(mass) : kNegInf;
  }
  const auto& fact = std::get<FactorizedLaw>(law);
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] < 0 || x[i] >= vocab) return kNegInf;
    const double p = fact.row(i)[x[i]];
    if (p <= 0.0) return kNegInf;
    total += std::log(p);
  }
  return total;
}

JointLaw empirical_law(std::span<const GenerativeTarget> targets) {
  if (targets.empty()) throw DomainError("empirical law needs at least one target");
  std::map<std::vector<Symbol>, std::size_t> counts;
  for (const auto& t : targets) {
    if (t.has_mask()) throw PreconditionError("empirical law targets must be unmasked");
    if (t.position_count() != targets.front().position_count() ||
        t.layout.v != targets.front().layout.v)
      throw ShapeError("empirical law targets must share shape");
    ++counts[std::vector<Symbol>(t.symbols.flat().begin(), t.symbols.flat().end())];
  }
  JointLaw law;
  law.positions = targets.front().position_count();
  law.vocab = targets.front().layout.v;
  for (auto& [seq, count] : counts) {
    law.support.push_back(seq);
    law.weights.push_back(static_cast<double>(count) / static_cast<double>(targets.size()));
  }
  return law;
}

}  // namespace flowdub
