#include "flowdub/alignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace flowdub {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log(sum exp(x)) over the selected entries; -inf when none are selected.
template <class Pick>
double masked_log_sum_exp(std::size_t count, Pick&& pick) {
  double best = kNegInf;
  for (std::size_t i = 0; i < count; ++i)
    if (auto [use, x] = pick(i); use) best = std::max(best, x);
  if (best == kNegInf) return kNegInf;
  double sum = 0.0;
  for (std::size_t i = 0; i < count; ++i)
    if (auto [use, x] = pick(i); use) sum += std::exp(x - best);
  return best + std::log(sum);
}

}  // namespace

AlignUnit parse_align_unit(const std::string& text) {
  if (text == "frames") return AlignUnit::frames;
  if (text == "tokens") return AlignUnit::tokens;
  throw DomainError("unit must be 'frames' or 'tokens', got '" + text + "'");
}

void DurationTable::validate() const {
  for (int d : beats)
    if (d < 1) throw DomainError("phoneme duration must be at least 1 beat");
}

int DurationTable::total_beats() const {
  int total = 0;
  for (int d : beats) total += d;
  return total;
}

AlignmentMatrix AlignmentMatrix::from_counts(std::span<const int> counts) {
  std::size_t rows = 0;
  for (int c : counts) {
    if (c < 1) throw DomainError("every phoneme needs at least one row");
    rows += static_cast<std::size_t>(c);
  }
  AlignmentMatrix m(rows, counts.size());
  std::size_t row = 0;
  for (std::size_t j = 0; j < counts.size(); ++j)
    for (int r = 0; r < counts[j]; ++r) m.set(row++, j, true);
  return m;
}

bool AlignmentMatrix::is_monotonic() const {
  if (rows_ == 0 || cols_ == 0) return false;
  std::size_t previous = 0;
  for (std::size_t i = 0; i < rows_; ++i) {
    std::size_t ones = 0, col = 0;
    for (std::size_t j = 0; j < cols_; ++j)
      if (at(i, j)) ++ones, col = j;
    if (ones != 1) return false;
    if (i == 0 ? col != 0 : (col != previous && col != previous + 1)) return false;
    previous = col;
  }
  return previous == cols_ - 1;
}

AlignmentMatrix build_alignment_matrix(const DurationTable& durations, AlignUnit unit) {
  durations.validate();
  const int per_beat = unit == AlignUnit::frames ? kFramesPerBeat : kTokensPerBeat;
  std::vector<int> counts;
  counts.reserve(durations.beats.size());
  for (int d : durations.beats) counts.push_back(per_beat * d);
  return AlignmentMatrix::from_counts(counts);
}

double contrastive_alignment_loss(const AttentionScores& attention, const AlignmentMatrix& alignment) {
  const ScoreGrid& a = attention.scores;
  if (a.rows != alignment.rows() || a.cols != alignment.cols() || a.values.size() != a.rows * a.cols)
    throw ShapeError("attention grid " + std::to_string(a.rows) + "x" + std::to_string(a.cols) +
                     " does not match alignment " + std::to_string(alignment.rows()) + "x" +
                     std::to_string(alignment.cols()));
  if (!(attention.temperature > 0.0)) throw DomainError("temperature must be positive");
  for (double x : a.values)
    if (!std::isfinite(x)) throw DomainError("attention scores must be finite");

  const double tau = attention.temperature;
  double loss = 0.0;
  for (std::size_t j = 0; j < a.cols; ++j) {
    const double all = masked_log_sum_exp(a.rows, [&](std::size_t i) {
      return std::pair{true, a.at(i, j) / tau};
    });
    const double aligned = masked_log_sum_exp(a.rows, [&](std::size_t i) {
      return std::pair{alignment.at(i, j) != 0, a.at(i, j) / tau};
    });
    loss += all - aligned;
  }
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double all = masked_log_sum_exp(a.cols, [&](std::size_t j) {
      return std::pair{true, a.at(i, j) / tau};
    });
    const double aligned = masked_log_sum_exp(a.cols, [&](std::size_t j) {
      return std::pair{alignment.at(i, j) != 0, a.at(i, j) / tau};
    });
    loss += all - aligned;
  }
  return loss;
}

MonotonicPath mas(const ScoreGrid& log_scores) {
  const std::size_t rows = log_scores.rows;
  const std::size_t cols = log_scores.cols;
  if (cols < 1) throw DomainError("MAS needs at least one column");
  if (rows < cols)
    throw DomainError("MAS is infeasible: " + std::to_string(rows) + " rows for " +
                      std::to_string(cols) + " columns");

  // best[i][j]: maximal score of a monotonic path over rows 0..i ending at
  // column j, via predecessors (i-1, j) and (i-1, j-1).
  ScoreGrid best(rows, cols, kNegInf);
  best.at(0, 0) = log_scores.at(0, 0);
  for (std::size_t i = 1; i < rows; ++i) {
    const std::size_t j_max = std::min(i, cols - 1);
    for (std::size_t j = 0; j <= j_max; ++j) {
      const double stay = best.at(i - 1, j);
      const double advance = j > 0 ? best.at(i - 1, j - 1) : kNegInf;
      best.at(i, j) = std::max(stay, advance) + log_scores.at(i, j);
    }
  }

  MonotonicPath path;
  path.columns.assign(rows, 0);
  std::size_t j = cols - 1;
  for (std::size_t i = rows - 1;; --i) {
    path.columns[i] = static_cast<int>(j);
    if (i == 0) break;
    // Forced to move when the remaining rows equal the remaining columns.
    if (j > 0 && (j == i || best.at(i - 1, j) < best.at(i - 1, j - 1))) --j;
  }
  return path;
}

double path_score(const ScoreGrid& log_scores, const MonotonicPath& path) {
  if (path.columns.size() != log_scores.rows) throw ShapeError("path length differs from grid rows");
  double total = 0.0;
  for (std::size_t i = 0; i < path.columns.size(); ++i) total += log_scores.at(i, path.columns[i]);
  return total;
}

std::vector<int> path_to_durations(const MonotonicPath& path, int columns) {
  std::vector<int> counts(static_cast<std::size_t>(std::max(columns, 0)), 0);
  for (int c : path.columns) {
    if (c < 0 || c >= columns) throw DomainError("path column outside [0, columns)");
    ++counts[c];
  }
  return counts;
}

int frames_to_tokens(int frames) {
  if (frames < 0 || frames % kFramesPerBeat != 0)
    throw DomainError("frame count " + std::to_string(frames) + " is not divisible by 5");
  return frames / kFramesPerBeat * kTokensPerBeat;
}

int token_to_frame_index(int token, int frames) {
  const int tokens = frames_to_tokens(frames);
  if (token < 0 || token >= tokens)
    throw DomainError("token index " + std::to_string(token) + " outside [0, " +
                      std::to_string(tokens) + ")");
  return token * kFramesPerBeat / kTokensPerBeat;
}

}  // namespace flowdub
