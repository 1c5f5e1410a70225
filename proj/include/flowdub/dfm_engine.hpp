#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "flowdub/rng.hpp"
#include "flowdub/tokens.hpp"

namespace flowdub {

class Denoiser;

enum class SchedulerFamily { quadratic, linear };

// Monotone kappa on [0,1] with kappa(0) = 0 and kappa(1) = 1.
class Scheduler {
 public:
  explicit Scheduler(SchedulerFamily family = SchedulerFamily::quadratic) : family_(family) {}

  SchedulerFamily family() const { return family_; }
  double kappa(double t) const;
  double kappa_dot(double t) const;

 private:
  SchedulerFamily family_;
};

// Partially masked target at time t of the mask path.
struct PathState {
  double time = 0.0;
  GenerativeTarget state;
};

// Per-position distribution over the v data symbols (mask excluded).
class PosteriorGrid {
 public:
  PosteriorGrid() = default;
  PosteriorGrid(std::size_t positions, int vocab, double fill = 0.0)
      : positions_(positions), vocab_(vocab), probs_(positions * vocab, fill) {}

  std::size_t positions() const { return positions_; }
  int vocab() const { return vocab_; }
  std::span<double> row(std::size_t i) { return {probs_.data() + i * vocab_, std::size_t(vocab_)}; }
  std::span<const double> row(std::size_t i) const {
    return {probs_.data() + i * vocab_, std::size_t(vocab_)};
  }

  // Throws ValidationError unless every row is non-negative and sums to 1
  // within tol.
  void validate(double tol = 1e-9) const;

  bool operator==(const PosteriorGrid&) const = default;

 private:
  std::size_t positions_ = 0;
  int vocab_ = 0;
  std::vector<double> probs_;
};

// Per-position signed rates over the extended alphabet: v data symbols then
// the mask symbol at index v.
class VelocityGrid {
 public:
  VelocityGrid(std::size_t positions, int width)
      : positions_(positions), width_(width), rates_(positions * width, 0.0) {}

  std::size_t positions() const { return positions_; }
  int width() const { return width_; }
  std::span<double> row(std::size_t i) { return {rates_.data() + i * width_, std::size_t(width_)}; }
  std::span<const double> row(std::size_t i) const {
    return {rates_.data() + i * width_, std::size_t(width_)};
  }

 private:
  std::size_t positions_;
  int width_;
  std::vector<double> rates_;
};

// Clamp applied to probabilities inside every log of the DFM objective.
inline constexpr double kLogFloor = 1e-12;

// Keeps each symbol of a fully unmasked x1 with probability kappa(t),
// otherwise replaces it by the mask symbol.
PathState corrupt(const GenerativeTarget& x1, double t, const Scheduler& sched, Rng& rng);

// u^i = kappa_dot / (1 - kappa) * (p_{1|t}(.|x_t) - delta_{x_t^i}).
VelocityGrid velocity(const PosteriorGrid& posterior, const PathState& current,
                      const Scheduler& sched);

// Probability that a masked position unmasks over [t, t+h].
double unmask_probability(double t, double h, const Scheduler& sched);

// One step of mask-path kinetics: every masked position independently
// unmasks with probability (kappa(t+h) - kappa(t)) / (1 - kappa(t)) and draws
// its symbol from its posterior row. Revealed positions never change.
PathState euler_step(const PathState& state, const PosteriorGrid& posterior, double h,
                     const Scheduler& sched, Rng& rng);

// Same kinetics, but the symbol for position i is chosen by inverse CDF at
// symbol_uniforms[i]; only the unmask decisions consume rng.
PathState euler_step(const PathState& state, const PosteriorGrid& posterior, double h,
                     const Scheduler& sched, Rng& rng,
                     std::span<const double> symbol_uniforms);

// Draws a target of length L starting from the all-mask state with nfe
// uniform Euler steps, evaluating the denoiser exactly once per step.
//
// The first (m+k)L draws of rng are the per-position symbol uniforms; unmask
// decisions follow. Two calls with the same seed but different nfe therefore
// share their symbol draws, which makes NFE comparisons low-variance.
GenerativeTarget sample(const Denoiser& denoiser, const ConditioningContext& ctx,
                        std::size_t length, int nfe, const Scheduler& sched, Rng& rng);

// Sum over all positions of -log max(p_{1|t}(x1^i), kLogFloor).
double dfm_loss_at(const PosteriorGrid& posterior, const GenerativeTarget& x1);

// Single-sample estimate of the DFM objective: t ~ U[0,1], x_t ~ corrupt(x1, t).
double dfm_loss(const Denoiser& denoiser, const GenerativeTarget& x1,
                const ConditioningContext& ctx, const Scheduler& sched, Rng& rng);

}  // namespace flowdub
