#include "flowdub/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "flowdub/errors.hpp"

namespace flowdub {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kInf = std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

double norm(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

}  // namespace

void LogProbTable::validate(double tol) const {
  if (values.size() != steps * symbols) throw ShapeError("log-prob table data size mismatch");
  for (std::size_t t = 0; t < steps; ++t) {
    double total = kNegInf;
    for (std::size_t s = 0; s < symbols; ++s) total = log_add(total, at(t, s));
    if (!(std::abs(total) <= tol))
      throw ValidationError("log-prob row " + std::to_string(t) + " log-sum-exps to " +
                            std::to_string(total));
  }
}

CtcResult ctc_loss(const LogProbTable& logp, std::span<const int> target) {
  logp.validate();
  const auto alphabet = static_cast<int>(logp.symbols) - 1;
  for (int y : target)
    if (y < 1 || y > alphabet)
      throw DomainError("CTC target symbol " + std::to_string(y) + " outside [1, " +
                        std::to_string(alphabet) + "]");

  // Minimum emission length: one frame per label plus a blank between repeats.
  std::size_t required = target.size();
  for (std::size_t u = 1; u < target.size(); ++u)
    if (target[u] == target[u - 1]) ++required;
  if (required > logp.steps) return {kInf, false};
  if (logp.steps == 0) return {0.0, true};

  // Extended label sequence: blank, y1, blank, y2, ..., yU, blank.
  const std::size_t states = 2 * target.size() + 1;
  auto label = [&](std::size_t s) { return s % 2 == 0 ? kCtcBlank : target[s / 2]; };

  std::vector<double> alpha(states, kNegInf), next(states);
  alpha[0] = logp.at(0, kCtcBlank);
  if (states > 1) alpha[1] = logp.at(0, label(1));
  for (std::size_t t = 1; t < logp.steps; ++t) {
    for (std::size_t s = 0; s < states; ++s) {
      double acc = alpha[s];
      if (s >= 1) acc = log_add(acc, alpha[s - 1]);
      if (s >= 2 && label(s) != kCtcBlank && label(s) != label(s - 2))
        acc = log_add(acc, alpha[s - 2]);
      next[s] = acc == kNegInf ? kNegInf : acc + logp.at(t, label(s));
    }
    alpha.swap(next);
  }
  double total = alpha[states - 1];
  if (states > 1) total = log_add(total, alpha[states - 2]);
  if (total == kNegInf) return {kInf, false};
  return {-total, true};
}

PooledFeature pool(std::span<const std::vector<double>> features) {
  if (features.empty()) throw DomainError("cannot pool an empty feature sequence");
  PooledFeature mean(features.front().size(), 0.0);
  for (const auto& f : features) {
    if (f.size() != mean.size()) throw ShapeError("pooled features must share a dimension");
    for (std::size_t d = 0; d < f.size(); ++d) mean[d] += f[d];
  }
  for (double& x : mean) x /= static_cast<double>(features.size());
  return mean;
}

double distill_loss(std::span<const double> teacher, std::span<const double> student) {
  if (teacher.size() != student.size()) throw ShapeError("distillation features differ in size");
  const double nt = norm(teacher);
  const double ns = norm(student);
  if (!(nt > 0.0) || !(ns > 0.0)) throw DomainError("cosine needs nonzero-norm features");
  double dot = 0.0;
  for (std::size_t d = 0; d < teacher.size(); ++d) dot += teacher[d] * student[d];
  const double cosine = std::clamp(dot / (nt * ns), -1.0, 1.0);
  return 1.0 - cosine;
}

double distill_loss_batch(std::span<const PooledFeature> teachers,
                          std::span<const PooledFeature> students) {
  if (teachers.size() != students.size() || teachers.empty())
    throw ShapeError("distillation batch needs equal, non-zero sizes");
  double total = 0.0;
  for (std::size_t b = 0; b < teachers.size(); ++b) total += distill_loss(teachers[b], students[b]);
  return total / static_cast<double>(teachers.size());
}

double content_ce(const ContentLogits& logits, const TokenGrid& target) {
  if (logits.streams == 0 || logits.length == 0) throw DomainError("content CE over an empty grid");
  if (target.rows() != logits.streams || target.cols() != logits.length)
    throw ShapeError("content target shape differs from logits");
  if (logits.values.size() != logits.streams * logits.length * logits.vocab)
    throw ShapeError("content logits data size mismatch");

  double total = 0.0;
  for (std::size_t s = 0; s < logits.streams; ++s) {
    for (std::size_t t = 0; t < logits.length; ++t) {
      const Symbol y = target.at(s, t);
      if (y < 0 || static_cast<std::size_t>(y) >= logits.vocab)
        throw DomainError("content target symbol " + std::to_string(y) + " outside the vocabulary");
      const auto z = logits.row(s, t);
      const double hi = *std::ranges::max_element(z);
      double sum = 0.0;
      for (double x : z) sum += std::exp(x - hi);
      total += hi + std::log(sum) - z[y];
    }
  }
  return total / static_cast<double>(logits.streams * logits.length);
}

void LossWeights::validate() const {
  for (double w : {lambda1, lambda2, lambda3, lambda4, lambda5, lambda6})
    if (!(w >= 0.0)) throw DomainError("loss weights must be non-negative");
}

LossBreakdown total_loss(const LossComponents& c, const LossWeights& w) {
  w.validate();
  LossBreakdown out;
  out.components = c;
  out.ctc_infeasible = !c.ctc_feasible || !std::isfinite(c.l_ctc);
  out.total = w.lambda5 * c.l_vt + w.lambda6 * c.l_st + w.lambda1 * c.l_c +
              w.lambda3 * c.l_distill + w.lambda4 * c.l_dfm;
  if (out.ctc_infeasible) {
    if (w.lambda2 > 0.0) out.total = kInf;
  } else {
    out.total += w.lambda2 * c.l_ctc;
  }
  return out;
}

}  // namespace flowdub
