#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace flowdub {

using Symbol = std::int32_t;

// Stream counts of the factorized codec and the per-stream vocabulary.
// Data symbols are 0..v-1; the mask symbol is v.
struct StreamLayout {
  int m = 1;  // prosody streams
  int n = 2;  // content streams
  int k = 3;  // acoustic streams
  int v = 1024;

  Symbol mask_symbol() const { return v; }
  int target_streams() const { return m + k; }
  void validate() const;

  bool operator==(const StreamLayout&) const = default;
};

// Row-major rows x cols grid of symbols.
class TokenGrid {
 public:
  TokenGrid() = default;
  TokenGrid(std::size_t rows, std::size_t cols, Symbol fill = 0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  TokenGrid(std::size_t rows, std::size_t cols, std::vector<Symbol> data);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  Symbol& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  Symbol at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<Symbol> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const Symbol> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<Symbol> flat() { return data_; }
  std::span<const Symbol> flat() const { return data_; }

  bool operator==(const TokenGrid&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<Symbol> data_;
};

// Throws DomainError if any symbol lies outside [0, max_symbol].
void check_symbols(const TokenGrid& grid, Symbol max_symbol, const char* what);

// Aligned prosody / content / acoustic token streams of one utterance.
struct FactorizedTokens {
  StreamLayout layout;
  std::size_t length = 0;
  TokenGrid prosody;   // m x L
  TokenGrid content;   // n x L
  TokenGrid acoustic;  // k x L

  // Shape and symbol-range check; the mask symbol v is allowed.
  void validate() const;
  bool operator==(const FactorizedTokens&) const = default;
};

// The (m+k) x L generation target: prosody streams first, then acoustic.
// Flat position index i = stream * L + token.
struct GenerativeTarget {
  StreamLayout layout;
  std::size_t length = 0;
  TokenGrid symbols;

  std::size_t position_count() const { return symbols.size(); }
  Symbol at(std::size_t i) const { return symbols.flat()[i]; }
  bool is_masked(std::size_t i) const { return at(i) == layout.mask_symbol(); }
  bool has_mask() const;
  void validate() const;

  bool operator==(const GenerativeTarget&) const = default;
};

struct SpeakerId {
  std::uint32_t id = 0;
  bool operator==(const SpeakerId&) const = default;
};

// Conditioning for the denoiser. A disengaged content_channel is the ABSENT
// marker (the discrete counterpart of a zero embedding).
struct ConditioningContext {
  std::optional<FactorizedTokens> reference;  // TTS mode
  std::optional<TokenGrid> prosody_prior;     // dub mode, m x L
  std::optional<TokenGrid> content_channel;   // n x L, or ABSENT
  SpeakerId speaker;
  std::size_t target_length = 0;

  bool operator==(const ConditioningContext&) const = default;
};

GenerativeTarget concat_target(const StreamLayout& layout, const TokenGrid& prosody,
                               const TokenGrid& acoustic);
std::pair<TokenGrid, TokenGrid> split_target(const GenerativeTarget& target);
GenerativeTarget all_mask_target(const StreamLayout& layout, std::size_t length);

// Fraction of positions holding the mask symbol; 0 for an empty target.
double mask_fraction(const GenerativeTarget& target);

}  // namespace flowdub
