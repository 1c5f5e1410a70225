#include "flowdub/batch.hpp"

#include <exception>

#include <omp.h>

#include "flowdub/errors.hpp"

namespace flowdub {

namespace {

// Runs body(j) for j in [0, count) across threads and rethrows the first
// exception on the calling thread.
template <class Body>
void parallel_for(std::size_t count, int threads, Body&& body) {
  if (threads < 1) throw DomainError("thread count must be at least 1");
  std::exception_ptr failure;
  const auto n = static_cast<std::ptrdiff_t>(count);
#pragma omp parallel for schedule(dynamic, 16) num_threads(threads)
  for (std::ptrdiff_t j = 0; j < n; ++j) {
    try {
      body(static_cast<std::size_t>(j));
    } catch (...) {
#pragma omp critical(flowdub_batch_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

double ordered_mean(const std::vector<double>& values) {
  if (values.empty()) return 0.0;
  double total = 0.0;
  for (double v : values) total += v;
  return total / static_cast<double>(values.size());
}

}  // namespace

std::vector<GenerativeTarget> sample_batch(const Denoiser& denoiser, const ConditioningContext& ctx,
                                           std::size_t count, int nfe, const Scheduler& sched,
                                           std::uint64_t seed, int threads) {
  std::vector<GenerativeTarget> out(count);
  parallel_for(count, threads, [&](std::size_t j) {
    Rng rng(derive_seed(seed, j));
    out[j] = sample(denoiser, ctx, ctx.target_length, nfe, sched, rng);
  });
  return out;
}

std::vector<GenerativeTarget> sample_batch_serial(const Denoiser& denoiser,
                                                  const ConditioningContext& ctx, std::size_t count,
                                                  int nfe, const Scheduler& sched,
                                                  std::uint64_t seed) {
  std::vector<GenerativeTarget> out;
  out.reserve(count);
  for (std::size_t j = 0; j < count; ++j) {
    Rng rng(derive_seed(seed, j));
    out.push_back(sample(denoiser, ctx, ctx.target_length, nfe, sched, rng));
  }
  return out;
}

double mean_dfm_loss(const Denoiser& denoiser, std::span<const TrainingExample> examples,
                     const Scheduler& sched, std::uint64_t seed, int threads) {
  std::vector<double> losses(examples.size());
  parallel_for(examples.size(), threads, [&](std::size_t j) {
    Rng rng(derive_seed(seed, j));
    losses[j] = dfm_loss(denoiser, examples[j].target, examples[j].ctx, sched, rng);
  });
  return ordered_mean(losses);
}

double mean_dfm_loss_serial(const Denoiser& denoiser, std::span<const TrainingExample> examples,
                            const Scheduler& sched, std::uint64_t seed) {
  std::vector<double> losses;
  losses.reserve(examples.size());
  for (std::size_t j = 0; j < examples.size(); ++j) {
    Rng rng(derive_seed(seed, j));
    losses.push_back(dfm_loss(denoiser, examples[j].target, examples[j].ctx, sched, rng));
  }
  return ordered_mean(losses);
}

}  // namespace flowdub
