#pragma once

// Batch kernels over independent sequences. Each kernel comes in an OpenMP
// version and a serial reference; item j always draws from
// Rng(derive_seed(seed, j)) and reductions run in index order, so both
// versions return bit-identical results for any thread count.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "flowdub/denoiser.hpp"

namespace flowdub {

std::vector<GenerativeTarget> sample_batch(const Denoiser& denoiser, const ConditioningContext& ctx,
                                           std::size_t count, int nfe, const Scheduler& sched,
                                           std::uint64_t seed, int threads);

std::vector<GenerativeTarget> sample_batch_serial(const Denoiser& denoiser,
                                                  const ConditioningContext& ctx, std::size_t count,
                                                  int nfe, const Scheduler& sched,
                                                  std::uint64_t seed);

// Mean single-sample DFM loss over the examples.
double mean_dfm_loss(const Denoiser& denoiser, std::span<const TrainingExample> examples,
                     const Scheduler& sched, std::uint64_t seed, int threads);

double mean_dfm_loss_serial(const Denoiser& denoiser, std::span<const TrainingExample> examples,
                            const Scheduler& sched, std::uint64_t seed);

}  // namespace flowdub
