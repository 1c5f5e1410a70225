#include "flowdub/denoiser.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "flowdub/errors.hpp"

namespace flowdub {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_law_shape(const TargetLaw& law, const GenerativeTarget& x_t) {
  if (law_positions(law) != x_t.position_count() || law_vocab(law) != x_t.layout.v)
    throw ShapeError("target law shape does not match the path state");
}

PosteriorGrid joint_posterior(const JointLaw& law, const PathState& x_t, double kappa) {
  const GenerativeTarget& state = x_t.state;
  const double log_keep = std::log(kappa);
  const double log_drop = std::log1p(-kappa);

  std::vector<double> log_w(law.support.size(), kNegInf);
  double best = kNegInf;
  for (std::size_t s = 0; s < law.support.size(); ++s) {
    if (!(law.weights[s] > 0.0)) continue;
    double lw = std::log(law.weights[s]);
    for (std::size_t i = 0; i < state.position_count() && lw > kNegInf; ++i) {
      if (state.is_masked(i))
        lw += log_drop;
      else if (state.at(i) == law.support[s][i])
        lw += log_keep;
      else
        lw = kNegInf;
    }
    log_w[s] = lw;
    best = std::max(best, lw);
  }
  if (best == kNegInf)
    throw InconsistencyError("no support sequence is consistent with the observed state");

  PosteriorGrid out(state.position_count(), law.vocab);
  double total = 0.0;
  for (std::size_t s = 0; s < law.support.size(); ++s) {
    if (log_w[s] == kNegInf) continue;
    const double w = std::exp(log_w[s] - best);
    total += w;
    for (std::size_t i = 0; i < state.position_count(); ++i) out.row(i)[law.support[s][i]] += w;
  }
  for (std::size_t i = 0; i < out.positions(); ++i)
    for (double& p : out.row(i)) p /= total;
  return out;
}

// Under a product law the kappa factors are shared by every compatible
// symbol of a position and cancel: masked positions keep their marginal,
// revealed positions collapse onto the observed symbol.
PosteriorGrid factorized_posterior(const FactorizedLaw& law, const PathState& x_t, double kappa) {
  const GenerativeTarget& state = x_t.state;
  PosteriorGrid out(state.position_count(), law.vocab());
  for (std::size_t i = 0; i < state.position_count(); ++i) {
    const auto q = law.row(i);
    auto row = out.row(i);
    if (state.is_masked(i)) {
      if (kappa >= 1.0) throw InconsistencyError("masked position at kappa = 1");
      std::ranges::copy(q, row.begin());
    } else {
      const Symbol x = state.at(i);
      if (kappa <= 0.0 || !(q[x] > 0.0))
        throw InconsistencyError("revealed symbol " + std::to_string(x) + " at position " +
                                 std::to_string(i) + " has zero probability");
      row[x] = 1.0;
    }
  }
  return out;
}

double log_sum_exp(std::span<const double> z) {
  const double m = *std::ranges::max_element(z);
  double s = 0.0;
  for (double x : z) s += std::exp(x - m);
  return m + std::log(s);
}

void softmax_into(std::span<const double> z, std::span<double> out) {
  const double m = *std::ranges::max_element(z);
  double s = 0.0;
  for (std::size_t j = 0; j < z.size(); ++j) {
    out[j] = std::exp(z[j] - m);
    s += out[j];
  }
  for (double& p : out) p /= s;
}

}  // namespace

PosteriorGrid exact_posterior(const TargetLaw& law, const PathState& x_t, const Scheduler& sched) {
  check_law_shape(law, x_t.state);
  const double kappa = sched.kappa(x_t.time);
  if (const auto* joint = std::get_if<JointLaw>(&law)) return joint_posterior(*joint, x_t, kappa);
  return factorized_posterior(std::get<FactorizedLaw>(law), x_t, kappa);
}

ExactPosteriorDenoiser::ExactPosteriorDenoiser(StreamLayout layout, LawProvider provider,
                                               Scheduler sched)
    : layout_(layout), provider_(std::move(provider)), sched_(sched) {
  layout_.validate();
}

PosteriorGrid ExactPosteriorDenoiser::evaluate(const PathState& x_t,
                                               const ConditioningContext& ctx) const {
  return exact_posterior(provider_(ctx), x_t, sched_);
}

std::string TableKey::to_string() const {
  std::ostringstream out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out << ',';
    out << fields[i];
  }
  return out.str();
}

TableKey TableKey::parse(const std::string& text) {
  TableKey key;
  std::istringstream in(text);
  for (std::size_t i = 0; i < key.fields.size(); ++i) {
    if (i) {
      char comma = 0;
      if (!(in >> comma) || comma != ',') throw ParseError("malformed table key: " + text);
    }
    if (!(in >> key.fields[i])) throw ParseError("malformed table key: " + text);
  }
  in >> std::ws;
  if (!in.eof()) throw ParseError("trailing characters in table key: " + text);
  return key;
}

TabularDenoiser::TabularDenoiser(StreamLayout layout, TabularConfig config)
    : layout_(layout), config_(config), default_row_(layout.v, 0.0) {
  layout_.validate();
  if (config_.time_buckets < 1 || config_.max_position_buckets < 1)
    throw ConfigError("bucket counts must be positive");
}

TableKey TabularDenoiser::key_for(const PathState& x_t, const ConditioningContext& ctx,
                                  std::size_t position) const {
  const GenerativeTarget& state = x_t.state;
  const std::size_t length = state.length;
  const std::size_t stream = position / length;
  const std::size_t token = position % length;
  const Symbol boundary = layout_.v + 1;

  const std::size_t position_buckets =
      std::min<std::size_t>(length, static_cast<std::size_t>(config_.max_position_buckets));
  const auto position_bucket = static_cast<std::int32_t>(token * position_buckets / length);
  const auto time_bucket = std::min<std::int32_t>(
      static_cast<std::int32_t>(x_t.time * config_.time_buckets), config_.time_buckets - 1);

  const auto row = state.symbols.row(stream);
  const Symbol left = token > 0 ? row[token - 1] : boundary;
  const Symbol right = token + 1 < length ? row[token + 1] : boundary;

  std::int32_t prior = kAbsentChannel;
  if (ctx.prosody_prior) {
    const std::size_t prior_row =
        std::min<std::size_t>(stream, ctx.prosody_prior->rows() - 1);
    prior = ctx.prosody_prior->at(prior_row, token);
  }
  std::int32_t content = kAbsentChannel;
  if (ctx.content_channel) content = ctx.content_channel->at(0, token);

  return TableKey{{static_cast<std::int32_t>(stream), position_bucket, row[token], left, right,
                   time_bucket, static_cast<std::int32_t>(ctx.speaker.id), prior, content}};
}

std::span<const double> TabularDenoiser::logits(const TableKey& key) const {
  const auto it = rows_.find(key);
  return it == rows_.end() ? std::span<const double>(default_row_)
                           : std::span<const double>(it->second);
}

std::vector<double>& TabularDenoiser::mutable_logits(const TableKey& key) {
  return rows_.try_emplace(key, default_row_).first->second;
}

PosteriorGrid TabularDenoiser::evaluate(const PathState& x_t,
                                        const ConditioningContext& ctx) const {
  const GenerativeTarget& state = x_t.state;
  if (state.layout != layout_) throw ShapeError("state layout differs from the denoiser layout");
  PosteriorGrid out(state.position_count(), layout_.v);
  for (std::size_t i = 0; i < state.position_count(); ++i)
    softmax_into(logits(key_for(x_t, ctx, i)), out.row(i));
  return out;
}

double TabularDenoiser::loss(const PathState& x_t, const ConditioningContext& ctx,
                             const GenerativeTarget& x1) const {
  double total = 0.0;
  for (std::size_t i = 0; i < x1.position_count(); ++i) {
    const auto z = logits(key_for(x_t, ctx, i));
    total += log_sum_exp(z) - z[x1.at(i)];
  }
  return total;
}

TabularDenoiser::Gradient TabularDenoiser::loss_gradient(const PathState& x_t,
                                                         const ConditioningContext& ctx,
                                                         const GenerativeTarget& x1) const {
  Gradient grad;
  std::vector<double> p(layout_.v);
  for (std::size_t i = 0; i < x1.position_count(); ++i) {
    const TableKey key = key_for(x_t, ctx, i);
    softmax_into(logits(key), p);
    auto& g = grad.try_emplace(key, layout_.v, 0.0).first->second;
    for (int s = 0; s < layout_.v; ++s) g[s] += p[s];
    g[x1.at(i)] -= 1.0;
  }
  return grad;
}

TrainTrace tabular_train(TabularDenoiser& denoiser, std::span<const TrainingExample> examples,
                         int steps, double lr, const Scheduler& sched, Rng& rng) {
  if (steps < 0) throw DomainError("training steps must be non-negative");
  if (!(lr >= 0.0)) throw DomainError("learning rate must be non-negative");
  if (steps > 0 && examples.empty()) throw DomainError("training needs at least one example");

  TrainTrace trace;
  trace.loss.reserve(steps);
  trace.positions.reserve(steps);
  for (int step = 0; step < steps; ++step) {
    const TrainingExample& ex = examples[rng.below(examples.size())];
    const double t = rng.uniform();
    const PathState x_t = corrupt(ex.target, t, sched, rng);
    const double loss = dfm_loss_at(denoiser.evaluate(x_t, ex.ctx), ex.target);
    if (!std::isfinite(loss))
      throw NumericError("non-finite training loss at step " + std::to_string(step));
    if (lr > 0.0) {
      for (const auto& [key, g] : denoiser.loss_gradient(x_t, ex.ctx, ex.target)) {
        auto& row = denoiser.mutable_logits(key);
        for (std::size_t s = 0; s < g.size(); ++s) row[s] -= lr * g[s];
      }
    }
    trace.loss.push_back(loss);
    trace.positions.push_back(ex.target.position_count());
  }
  return trace;
}

}  // namespace flowdub
