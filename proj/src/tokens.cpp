#include "flowdub/tokens.hpp"

#include <algorithm>
#include <string>

#include "flowdub/errors.hpp"

namespace flowdub {

void StreamLayout::validate() const {
  if (m < 1 || n < 1 || k < 1)
    throw ConfigError("stream layout requires m >= 1, n >= 1, k >= 1");
  if (v < 2) throw ConfigError("stream layout requires v >= 2");
}

TokenGrid::TokenGrid(std::size_t rows, std::size_t cols, std::vector<Symbol> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols)
    throw ShapeError("token grid data size does not match " + std::to_string(rows) + "x" +
                     std::to_string(cols));
}

void check_symbols(const TokenGrid& grid, Symbol max_symbol, const char* what) {
  for (Symbol s : grid.flat()) {
    if (s < 0 || s > max_symbol)
      throw DomainError(std::string(what) + ": symbol " + std::to_string(s) +
                        " outside [0, " + std::to_string(max_symbol) + "]");
  }
}

namespace {

void check_shape(const TokenGrid& grid, int rows, std::size_t cols, const char* what) {
  if (grid.rows() != static_cast<std::size_t>(rows) || grid.cols() != cols)
    throw ShapeError(std::string(what) + " grid is " + std::to_string(grid.rows()) + "x" +
                     std::to_string(grid.cols()) + ", expected " + std::to_string(rows) +
                     "x" + std::to_string(cols));
}

}  // namespace

void FactorizedTokens::validate() const {
  layout.validate();
  check_shape(prosody, layout.m, length, "prosody");
  check_shape(content, layout.n, length, "content");
  check_shape(acoustic, layout.k, length, "acoustic");
  check_symbols(prosody, layout.mask_symbol(), "prosody");
  check_symbols(content, layout.mask_symbol(), "content");
  check_symbols(acoustic, layout.mask_symbol(), "acoustic");
}

bool GenerativeTarget::has_mask() const {
  const auto flat = symbols.flat();
  return std::find(flat.begin(), flat.end(), layout.mask_symbol()) != flat.end();
}

void GenerativeTarget::validate() const {
  layout.validate();
  check_shape(symbols, layout.target_streams(), length, "target");
  check_symbols(symbols, layout.mask_symbol(), "target");
}

GenerativeTarget concat_target(const StreamLayout& layout, const TokenGrid& prosody,
                               const TokenGrid& acoustic) {
  if (prosody.cols() != acoustic.cols())
    throw ShapeError("prosody length " + std::to_string(prosody.cols()) +
                     " differs from acoustic length " + std::to_string(acoustic.cols()));
  const std::size_t length = prosody.cols();
  check_shape(prosody, layout.m, length, "prosody");
  check_shape(acoustic, layout.k, length, "acoustic");

  GenerativeTarget out{layout, length, TokenGrid(layout.target_streams(), length)};
  for (int s = 0; s < layout.m; ++s)
    std::ranges::copy(prosody.row(s), out.symbols.row(s).begin());
  for (int s = 0; s < layout.k; ++s)
    std::ranges::copy(acoustic.row(s), out.symbols.row(layout.m + s).begin());
  out.validate();
  return out;
}

std::pair<TokenGrid, TokenGrid> split_target(const GenerativeTarget& target) {
  const auto& layout = target.layout;
  TokenGrid prosody(layout.m, target.length);
  TokenGrid acoustic(layout.k, target.length);
  for (int s = 0; s < layout.m; ++s)
    std::ranges::copy(target.symbols.row(s), prosody.row(s).begin());
  for (int s = 0; s < layout.k; ++s)
    std::ranges::copy(target.symbols.row(layout.m + s), acoustic.row(s).begin());
  return {std::move(prosody), std::move(acoustic)};
}

GenerativeTarget all_mask_target(const StreamLayout& layout, std::size_t length) {
  return {layout, length, TokenGrid(layout.target_streams(), length, layout.mask_symbol())};
}

double mask_fraction(const GenerativeTarget& target) {
  const std::size_t total = target.position_count();
  if (total == 0) return 0.0;
  const auto flat = target.symbols.flat();
  const auto masked = std::count(flat.begin(), flat.end(), target.layout.mask_symbol());
  return static_cast<double>(masked) / static_cast<double>(total);
}

}  // namespace flowdub
