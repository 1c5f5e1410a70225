#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include <json.hpp>

#include "flowdub/alignment.hpp"
#include "flowdub/denoiser.hpp"
#include "flowdub/losses.hpp"
#include "flowdub/tokens.hpp"
#include "flowdub/toyworld.hpp"

namespace flowdub {

using nlohmann::json;

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kAbsentMarker = "ABSENT";

// nlohmann ADL hooks. from_json validates shapes and symbol ranges.
void to_json(json& j, const StreamLayout& layout);
void from_json(const json& j, StreamLayout& layout);
void to_json(json& j, const TokenGrid& grid);
void from_json(const json& j, TokenGrid& grid);
void to_json(json& j, const FactorizedTokens& tokens);
void from_json(const json& j, FactorizedTokens& tokens);
void to_json(json& j, const GenerativeTarget& target);
void from_json(const json& j, GenerativeTarget& target);
void to_json(json& j, const ConditioningContext& ctx);
void from_json(const json& j, ConditioningContext& ctx);
void to_json(json& j, const ToyConfig& config);
void from_json(const json& j, ToyConfig& config);
void to_json(json& j, const ToySample& sample);
void from_json(const json& j, ToySample& sample);
void to_json(json& j, const AlignmentMatrix& matrix);
void to_json(json& j, const MonotonicPath& path);
void to_json(json& j, const LossBreakdown& breakdown);

// Finite doubles as numbers, anything else as null.
json finite_or_null(double x);

json tabular_to_json(const TabularDenoiser& denoiser);
TabularDenoiser tabular_from_json(const json& j);

// `.toyc.jsonl`: a header line carrying the config, then one sample per line.
std::string corpus_to_jsonl(const ToyCorpus& corpus);
ToyCorpus corpus_from_jsonl(std::istream& in);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

// Wrap json / domain failures of parsing into ParseError.
ToyCorpus read_corpus(const std::filesystem::path& path);
TabularDenoiser read_tabular(const std::filesystem::path& path);

}  // namespace flowdub
