#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "flowdub/dfm_engine.hpp"
#include "flowdub/target_law.hpp"

namespace flowdub {

// p_{1|t}(x1 | x_t, c). Implementations must be safe for concurrent
// evaluate() calls.
class Denoiser {
 public:
  virtual ~Denoiser() = default;
  virtual const StreamLayout& layout() const = 0;
  virtual PosteriorGrid evaluate(const PathState& x_t, const ConditioningContext& ctx) const = 0;
};

// Bayes inversion of the mask channel:
//   p(x1 | x_t) ∝ q(x1) * prod_i [kappa if x_t^i = x1^i; 1-kappa if masked; 0 otherwise]
// reduced to per-position marginals. Throws InconsistencyError when no
// support point is compatible with x_t.
PosteriorGrid exact_posterior(const TargetLaw& law, const PathState& x_t, const Scheduler& sched);

using LawProvider = std::function<TargetLaw(const ConditioningContext&)>;

// Oracle denoiser: resolves the exact target law for a context and returns
// its posterior marginals.
class ExactPosteriorDenoiser final : public Denoiser {
 public:
  ExactPosteriorDenoiser(StreamLayout layout, LawProvider provider, Scheduler sched = Scheduler{});

  const StreamLayout& layout() const override { return layout_; }
  PosteriorGrid evaluate(const PathState& x_t, const ConditioningContext& ctx) const override;

 private:
  StreamLayout layout_;
  LawProvider provider_;
  Scheduler sched_;
};

struct TabularConfig {
  int time_buckets = 8;
  int max_position_buckets = 16;

  bool operator==(const TabularConfig&) const = default;
};

// Table key fields, in order:
//   stream, position bucket, current symbol, left neighbour, right neighbour,
//   time bucket, speaker, prosody-prior symbol, content symbol.
// Neighbour slots use v for MASK and v+1 for the sequence boundary; absent
// conditioning channels use -1.
struct TableKey {
  std::array<std::int32_t, 9> fields{};

  auto operator<=>(const TableKey&) const = default;
  std::string to_string() const;
  static TableKey parse(const std::string& text);
};

inline constexpr std::int32_t kAbsentChannel = -1;

// One supervised pair for the DFM objective.
struct TrainingExample {
  ConditioningContext ctx;
  GenerativeTarget target;
};

// Trainable lookup-table denoiser: each position selects a row of v logits
// by its TableKey and applies softmax. Missing keys use a shared default row.
class TabularDenoiser final : public Denoiser {
 public:
  using Table = std::map<TableKey, std::vector<double>>;
  using Gradient = std::map<TableKey, std::vector<double>>;

  explicit TabularDenoiser(StreamLayout layout, TabularConfig config = {});

  const StreamLayout& layout() const override { return layout_; }
  const TabularConfig& config() const { return config_; }
  PosteriorGrid evaluate(const PathState& x_t, const ConditioningContext& ctx) const override;

  TableKey key_for(const PathState& x_t, const ConditioningContext& ctx,
                   std::size_t position) const;
  std::span<const double> logits(const TableKey& key) const;
  // Materializes the row (as a copy of the default row) if missing.
  std::vector<double>& mutable_logits(const TableKey& key);

  const Table& rows() const { return rows_; }
  const std::vector<double>& default_row() const { return default_row_; }
  std::vector<double>& mutable_default_row() { return default_row_; }

  // Sum over positions of -log p(x1^i) (unfloored) and its gradient with
  // respect to the selected logits rows: softmax minus one-hot, accumulated
  // over positions sharing a key.
  double loss(const PathState& x_t, const ConditioningContext& ctx,
              const GenerativeTarget& x1) const;
  Gradient loss_gradient(const PathState& x_t, const ConditioningContext& ctx,
                         const GenerativeTarget& x1) const;

  bool operator==(const TabularDenoiser& o) const {
    return layout_ == o.layout_ && config_ == o.config_ && default_row_ == o.default_row_ && rows_ == o.rows_;
  }

 private:
  StreamLayout layout_;
  TabularConfig config_;
  std::vector<double> default_row_;
  Table rows_;
};

struct TrainTrace {
  std::vector<double> loss;            // per-step sum over positions
  std::vector<std::size_t> positions;  // (m+k)L of the drawn example
};

// Plain SGD on the DFM objective, one example per step:
// draw example, t ~ U[0,1], x_t ~ corrupt, logits -= lr * (softmax - onehot).
// lr = 0 performs no writes. Throws NumericError on a non-finite loss.
TrainTrace tabular_train(TabularDenoiser& denoiser, std::span<const TrainingExample> examples,
                         int steps, double lr, const Scheduler& sched, Rng& rng);

}  // namespace flowdub
