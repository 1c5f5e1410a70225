#include "flowdub/dfm_engine.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "flowdub/denoiser.hpp"
#include "flowdub/errors.hpp"

namespace flowdub {

namespace {

void check_time(double t) {
  if (!(t >= 0.0 && t <= 1.0))
    throw DomainError("time " + std::to_string(t) + " outside [0, 1]");
}

// Inverse CDF over a probability row; falls back to the last symbol with
// positive mass when rounding leaves u above the cumulative total.
Symbol draw_symbol(std::span<const double> row, double u) {
  double cumulative = 0.0;
  Symbol last_positive = 0;
  for (std::size_t s = 0; s < row.size(); ++s) {
    if (row[s] <= 0.0) continue;
    cumulative += row[s];
    last_positive = static_cast<Symbol>(s);
    if (u < cumulative) return last_positive;
  }
  return last_positive;
}

void check_posterior_shape(const PosteriorGrid& posterior, const GenerativeTarget& target) {
  if (posterior.positions() != target.position_count() || posterior.vocab() != target.layout.v)
    throw ShapeError("posterior grid is " + std::to_string(posterior.positions()) + "x" +
                     std::to_string(posterior.vocab()) + ", state has " +
                     std::to_string(target.position_count()) + " positions over v=" +
                     std::to_string(target.layout.v));
}

template <class SymbolSource>
PathState step_impl(const PathState& state, const PosteriorGrid& posterior, double h,
                    const Scheduler& sched, Rng& rng, SymbolSource&& symbol_uniform) {
  if (!(h > 0.0)) throw DomainError("euler step size must be positive");
  if (state.time + h > 1.0 + 1e-12)
    throw DomainError("euler step overshoots t = 1");
  check_posterior_shape(posterior, state.state);

  const double p_unmask = unmask_probability(state.time, h, sched);
  PathState next{std::min(1.0, state.time + h), state.state};
  if (next.time >= 1.0 - 1e-12) next.time = 1.0;

  auto flat = next.state.symbols.flat();
  const Symbol mask = next.state.layout.mask_symbol();
  for (std::size_t i = 0; i < flat.size(); ++i) {
    if (flat[i] != mask) continue;
    if (rng.uniform() < p_unmask) flat[i] = draw_symbol(posterior.row(i), symbol_uniform(i));
  }
  return next;
}

}  // namespace

double Scheduler::kappa(double t) const {
  check_time(t);
  return family_ == SchedulerFamily::quadratic ? t * t : t;
}

double Scheduler::kappa_dot(double t) const {
  check_time(t);
  return family_ == SchedulerFamily::quadratic ? 2.0 * t : 1.0;
}

void PosteriorGrid::validate(double tol) const {
  for (std::size_t i = 0; i < positions_; ++i) {
    double sum = 0.0;
    for (double p : row(i)) {
      if (!(p >= 0.0)) throw ValidationError("posterior row " + std::to_string(i) +
                                             " has a negative or NaN entry");
      sum += p;
    }
    if (std::abs(sum - 1.0) > tol)
      throw ValidationError("posterior row " + std::to_string(i) + " sums to " +
                            std::to_string(sum));
  }
}

PathState corrupt(const GenerativeTarget& x1, double t, const Scheduler& sched, Rng& rng) {
  if (x1.has_mask()) throw PreconditionError("corrupt requires a fully unmasked target");
  const double keep = sched.kappa(t);
  PathState out{t, x1};
  const Symbol mask = x1.layout.mask_symbol();
  for (Symbol& s : out.state.symbols.flat()) {
    if (!(rng.uniform() < keep)) s = mask;
  }
  return out;
}

VelocityGrid velocity(const PosteriorGrid& posterior, const PathState& current,
                      const Scheduler& sched) {
  check_posterior_shape(posterior, current.state);
  const double kappa = sched.kappa(current.time);
  if (current.time >= 1.0 || kappa >= 1.0)
    throw DomainError("velocity is singular at t = 1 (1 - kappa = 0)");
  const double factor = sched.kappa_dot(current.time) / (1.0 - kappa);

  const int v = current.state.layout.v;
  VelocityGrid out(posterior.positions(), v + 1);
  for (std::size_t i = 0; i < posterior.positions(); ++i) {
    auto rates = out.row(i);
    const auto p = posterior.row(i);
    for (int s = 0; s < v; ++s) rates[s] = factor * p[s];
    rates[current.state.at(i)] -= factor;
  }
  return out;
}

double unmask_probability(double t, double h, const Scheduler& sched) {
  const double end = std::min(1.0, t + h);
  if (end >= 1.0 - 1e-12) return 1.0;
  const double k0 = sched.kappa(t);
  return (sched.kappa(end) - k0) / (1.0 - k0);
}

PathState euler_step(const PathState& state, const PosteriorGrid& posterior, double h,
                     const Scheduler& sched, Rng& rng) {
  return step_impl(state, posterior, h, sched, rng, [&rng](std::size_t) { return rng.uniform(); });
}

PathState euler_step(const PathState& state, const PosteriorGrid& posterior, double h,
                     const Scheduler& sched, Rng& rng,
                     std::span<const double> symbol_uniforms) {
  if (symbol_uniforms.size() != state.state.position_count())
    throw ShapeError("one symbol uniform per position is required");
  return step_impl(state, posterior, h, sched, rng,
                   [symbol_uniforms](std::size_t i) { return symbol_uniforms[i]; });
}

GenerativeTarget sample(const Denoiser& denoiser, const ConditioningContext& ctx,
                        std::size_t length, int nfe, const Scheduler& sched, Rng& rng) {
  if (nfe < 1) throw DomainError("nfe must be at least 1");
  const StreamLayout& layout = denoiser.layout();
  PathState state{0.0, all_mask_target(layout, length)};

  std::vector<double> symbol_uniforms(state.state.position_count());
  for (double& u : symbol_uniforms) u = rng.uniform();

  for (int step = 0; step < nfe; ++step) {
    const double t = static_cast<double>(step) / nfe;
    const double t_next = static_cast<double>(step + 1) / nfe;
    state.time = t;
    PosteriorGrid posterior = denoiser.evaluate(state, ctx);
    check_posterior_shape(posterior, state.state);
    posterior.validate();
    state = euler_step(state, posterior, t_next - t, sched, rng, symbol_uniforms);
  }
  return std::move(state.state);
}

double dfm_loss_at(const PosteriorGrid& posterior, const GenerativeTarget& x1) {
  check_posterior_shape(posterior, x1);
  double loss = 0.0;
  for (std::size_t i = 0; i < x1.position_count(); ++i) {
    const Symbol s = x1.at(i);
    if (s < 0 || s >= x1.layout.v) throw PreconditionError("dfm loss target must be unmasked");
    loss -= std::log(std::max(posterior.row(i)[s], kLogFloor));
  }
  return loss;
}

double dfm_loss(const Denoiser& denoiser, const GenerativeTarget& x1,
                const ConditioningContext& ctx, const Scheduler& sched, Rng& rng) {
  const double t = rng.uniform();
  const PathState x_t = corrupt(x1, t, sched, rng);
  return dfm_loss_at(denoiser.evaluate(x_t, ctx), x1);
}

}  // namespace flowdub
