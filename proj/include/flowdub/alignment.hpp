#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "flowdub/errors.hpp"

namespace flowdub {

// Beats are the integer duration unit; 5 video frames and 16 speech tokens
// per beat give the exact 5:16 frame-to-token ratio.
inline constexpr int kFramesPerBeat = 5;
inline constexpr int kTokensPerBeat = 16;

enum class AlignUnit { frames, tokens };

AlignUnit parse_align_unit(const std::string& text);

struct DurationTable {
  std::vector<int> beats;  // per phoneme, each >= 1

  void validate() const;
  int total_beats() const;
  int total_frames() const { return kFramesPerBeat * total_beats(); }
  int total_tokens() const { return kTokensPerBeat * total_beats(); }
};

// Row-major real grid; rows are frames or tokens, columns are phonemes.
struct ScoreGrid {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  ScoreGrid() = default;
  ScoreGrid(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), values(r * c, fill) {}

  double& at(std::size_t i, std::size_t j) { return values[i * cols + j]; }
  double at(std::size_t i, std::size_t j) const { return values[i * cols + j]; }
};

// Raw attention scores a_ij with softmax temperature tau.
struct AttentionScores {
  ScoreGrid scores;
  double temperature = 0.1;
};

// Binary rows x N assignment of frames (or tokens) to phonemes.
class AlignmentMatrix {
 public:
  AlignmentMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), cells_(rows * cols, 0) {}

  // Phoneme j occupies the next counts[j] rows.
  static AlignmentMatrix from_counts(std::span<const int> counts);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::uint8_t at(std::size_t i, std::size_t j) const { return cells_[i * cols_ + j]; }
  void set(std::size_t i, std::size_t j, bool on) { cells_[i * cols_ + j] = on ? 1 : 0; }

  // One 1 per row, non-empty contiguous ordered column supports.
  bool is_monotonic() const;

  bool operator==(const AlignmentMatrix&) const = default;

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<std::uint8_t> cells_;
};

// columns[i] is the phoneme assigned to row i.
struct MonotonicPath {
  std::vector<int> columns;
  bool operator==(const MonotonicPath&) const = default;
};

AlignmentMatrix build_alignment_matrix(const DurationTable& durations, AlignUnit unit);

// Column-softmax term summed over phonemes plus row-softmax term summed over
// rows, each -log of the aligned mass. Unscaled. A row or column with no
// aligned cell contributes +inf.
double contrastive_alignment_loss(const AttentionScores& attention, const AlignmentMatrix& alignment);

// Monotonic alignment search: the complete monotonic path maximizing the
// summed log scores. Ties on backtracking keep the current column, so
// columns advance as early as possible.
MonotonicPath mas(const ScoreGrid& log_scores);

double path_score(const ScoreGrid& log_scores, const MonotonicPath& path);

std::vector<int> path_to_durations(const MonotonicPath& path, int columns);

// Repeats items[j] counts[j] times, preserving order.
template <class T>
std::vector<T> duration_expand(std::span<const T> items, std::span<const int> counts) {
  if (items.size() != counts.size())
    throw ShapeError("duration_expand needs one count per item");
  std::vector<T> out;
  for (std::size_t j = 0; j < items.size(); ++j) {
    if (counts[j] < 0) throw DomainError("duration_expand count must be non-negative");
    out.insert(out.end(), static_cast<std::size_t>(counts[j]), items[j]);
  }
  return out;
}

// L = 16F/5; F must be divisible by 5.
int frames_to_tokens(int frames);

// floor(i * 5 / 16) for a token index i < frames_to_tokens(frames).
int token_to_frame_index(int token, int frames);

}  // namespace flowdub
