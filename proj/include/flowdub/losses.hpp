#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "flowdub/tokens.hpp"

namespace flowdub {

// steps x (P+1) log-probabilities; column 0 is the CTC blank.
struct LogProbTable {
  std::size_t steps = 0;
  std::size_t symbols = 0;
  std::vector<double> values;

  LogProbTable() = default;
  LogProbTable(std::size_t t, std::size_t s, double fill = 0.0) : steps(t), symbols(s), values(t * s, fill) {}

  double& at(std::size_t t, std::size_t s) { return values[t * symbols + s]; }
  double at(std::size_t t, std::size_t s) const { return values[t * symbols + s]; }

  // Throws ValidationError unless each row log-sum-exps to 0 within tol.
  void validate(double tol = 1e-6) const;
};

inline constexpr int kCtcBlank = 0;

struct CtcResult {
  double loss = 0.0;  // +inf when infeasible
  bool feasible = true;
};

// -log of the total probability of all blank-interleaved alignments of the
// target (symbols in [1, P]). A target that cannot be emitted in `steps`
// frames yields {+inf, false}.
CtcResult ctc_loss(const LogProbTable& logp, std::span<const int> target);

using PooledFeature = std::vector<double>;

// Componentwise mean of a non-empty feature sequence.
PooledFeature pool(std::span<const std::vector<double>> features);

// 1 - cos(teacher, student).
double distill_loss(std::span<const double> teacher, std::span<const double> student);

// Batch mean of distill_loss over aligned pairs.
double distill_loss_batch(std::span<const PooledFeature> teachers,
                          std::span<const PooledFeature> students);

// n x L x v logits, row-major over (stream, token, symbol).
struct ContentLogits {
  std::size_t streams = 0;
  std::size_t length = 0;
  std::size_t vocab = 0;
  std::vector<double> values;

  ContentLogits() = default;
  ContentLogits(std::size_t n, std::size_t l, std::size_t v, double fill = 0.0)
      : streams(n), length(l), vocab(v), values(n * l * v, fill) {}

  std::span<double> row(std::size_t s, std::size_t t) {
    return {values.data() + (s * length + t) * vocab, vocab};
  }
  std::span<const double> row(std::size_t s, std::size_t t) const {
    return {values.data() + (s * length + t) * vocab, vocab};
  }
};

// Mean over all n*L positions of -log softmax(logits)[target].
double content_ce(const ContentLogits& logits, const TokenGrid& target);

struct LossWeights {
  double lambda1 = 1.0;    // content CE
  double lambda2 = 0.1;    // CTC
  double lambda3 = 0.1;    // distillation
  double lambda4 = 1.0;    // DFM
  double lambda5 = 0.001;  // video-text alignment
  double lambda6 = 0.001;  // speech-text alignment

  void validate() const;
};

struct LossComponents {
  double l_vt = 0.0;
  double l_st = 0.0;
  double l_c = 0.0;
  double l_ctc = 0.0;
  double l_distill = 0.0;
  double l_dfm = 0.0;
  bool ctc_feasible = true;
};

struct LossBreakdown {
  LossComponents components;
  double total = 0.0;
  bool ctc_infeasible = false;
};

// total = l5*L_VT + l6*L_ST + l1*L_c + l2*L_CTC + l3*L_distill + l4*L_DFM.
// An infeasible CTC term makes the total +inf when lambda2 > 0 and is
// dropped when lambda2 = 0; the flag is carried either way.
LossBreakdown total_loss(const LossComponents& components, const LossWeights& weights);

}  // namespace flowdub
