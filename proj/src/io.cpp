#include "flowdub/io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "flowdub/errors.hpp"

namespace flowdub {

void to_json(json& j, const StreamLayout& layout) {
  j = json{{"m", layout.m}, {"n", layout.n}, {"k", layout.k}, {"v", layout.v}};
}

void from_json(const json& j, StreamLayout& layout) {
  layout.m = j.at("m").get<int>();
  layout.n = j.at("n").get<int>();
  layout.k = j.at("k").get<int>();
  layout.v = j.at("v").get<int>();
}

void to_json(json& j, const TokenGrid& grid) {
  j = json::array();
  for (std::size_t r = 0; r < grid.rows(); ++r) {
    const auto row = grid.row(r);
    j.push_back(std::vector<Symbol>(row.begin(), row.end()));
  }
}

void from_json(const json& j, TokenGrid& grid) {
  if (!j.is_array()) throw ParseError("token grid must be an array of rows");
  const std::size_t rows = j.size();
  const std::size_t cols = rows ? j.front().size() : 0;
  std::vector<Symbol> data;
  data.reserve(rows * cols);
  for (const auto& row : j) {
    if (!row.is_array() || row.size() != cols) throw ParseError("token grid rows must share a length");
    for (const auto& x : row) data.push_back(x.get<Symbol>());
  }
  grid = TokenGrid(rows, cols, std::move(data));
}

void to_json(json& j, const FactorizedTokens& t) {
  j = json{{"layout", t.layout},   {"length", t.length},   {"prosody", t.prosody},
           {"content", t.content}, {"acoustic", t.acoustic}};
}

void from_json(const json& j, FactorizedTokens& t) {
  t.layout = j.at("layout").get<StreamLayout>();
  t.length = j.at("length").get<std::size_t>();
  t.prosody = j.at("prosody").get<TokenGrid>();
  t.content = j.at("content").get<TokenGrid>();
  t.acoustic = j.at("acoustic").get<TokenGrid>();
  t.validate();
}

void to_json(json& j, const GenerativeTarget& t) {
  const auto [prosody, acoustic] = split_target(t);
  j = json{{"layout", t.layout}, {"length", t.length}, {"prosody", prosody}, {"acoustic", acoustic}};
}

void from_json(const json& j, GenerativeTarget& t) {
  const auto layout = j.at("layout").get<StreamLayout>();
  const auto length = j.at("length").get<std::size_t>();
  t = concat_target(layout, j.at("prosody").get<TokenGrid>(), j.at("acoustic").get<TokenGrid>());
  if (t.length != length) throw ShapeError("target length field disagrees with its grids");
}

void to_json(json& j, const ConditioningContext& ctx) {
  j = json{{"speaker", ctx.speaker.id}, {"length", ctx.target_length}};
  j["reference"] = ctx.reference ? json(*ctx.reference) : json(nullptr);
  j["prosody_prior"] = ctx.prosody_prior ? json(*ctx.prosody_prior) : json(nullptr);
  j["content_channel"] = ctx.content_channel ? json(*ctx.content_channel) : json(kAbsentMarker);
}

void from_json(const json& j, ConditioningContext& ctx) {
  ctx.speaker.id = j.at("speaker").get<std::uint32_t>();
  ctx.target_length = j.at("length").get<std::size_t>();
  const auto ref = j.value("reference", json(nullptr));
  ctx.reference = ref.is_null() ? std::nullopt : std::optional(ref.get<FactorizedTokens>());
  const auto prior = j.value("prosody_prior", json(nullptr));
  ctx.prosody_prior = prior.is_null() ? std::nullopt : std::optional(prior.get<TokenGrid>());
  const auto content = j.at("content_channel");
  if (content.is_string()) {
    if (content.get<std::string>() != kAbsentMarker)
      throw ParseError("content_channel must be a grid or \"ABSENT\"");
    ctx.content_channel.reset();
  } else {
    ctx.content_channel = content.get<TokenGrid>();
  }
}

void to_json(json& j, const ToyConfig& c) {
  j = json{{"phonemes", c.phonemes},
           {"expressions", c.expressions},
           {"speakers", c.speakers},
           {"layout", c.layout},
           {"min_phonemes", c.min_phonemes},
           {"max_phonemes", c.max_phonemes},
           {"min_beats", c.min_beats},
           {"max_beats", c.max_beats},
           {"modal_probability", c.modal_probability},
           {"seed", c.seed}};
}

// Missing fields keep their defaults so config files may be partial.
void from_json(const json& j, ToyConfig& c) {
  c.phonemes = j.value("phonemes", c.phonemes);
  c.expressions = j.value("expressions", c.expressions);
  c.speakers = j.value("speakers", c.speakers);
  if (j.contains("layout")) c.layout = j.at("layout").get<StreamLayout>();
  c.min_phonemes = j.value("min_phonemes", c.min_phonemes);
  c.max_phonemes = j.value("max_phonemes", c.max_phonemes);
  c.min_beats = j.value("min_beats", c.min_beats);
  c.max_beats = j.value("max_beats", c.max_beats);
  c.modal_probability = j.value("modal_probability", c.modal_probability);
  c.seed = j.value("seed", c.seed);
}

void to_json(json& j, const ToySample& s) {
  j = json{{"id", s.id},
           {"phonemes", s.phonemes},
           {"durations", s.durations},
           {"expression", s.expression},
           {"speaker", s.speaker.id},
           {"frames", s.frames},
           {"tokens", s.tokens}};
}

void from_json(const json& j, ToySample& s) {
  s.id = j.at("id").get<std::size_t>();
  s.phonemes = j.at("phonemes").get<std::vector<int>>();
  s.durations = j.at("durations").get<std::vector<int>>();
  s.expression = j.at("expression").get<int>();
  s.speaker.id = j.at("speaker").get<std::uint32_t>();
  s.frames = j.at("frames").get<int>();
  s.tokens = j.at("tokens").get<FactorizedTokens>();
}

void to_json(json& j, const AlignmentMatrix& m) {
  j = json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (std::size_t c = 0; c < m.cols(); ++c) row.push_back(int(m.at(i, c)));
    j.push_back(std::move(row));
  }
}

void to_json(json& j, const MonotonicPath& path) { j = json{{"columns", path.columns}}; }

json finite_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

void to_json(json& j, const LossBreakdown& b) {
  const auto& c = b.components;
  j = json{{"l_vt", finite_or_null(c.l_vt)},         {"l_st", finite_or_null(c.l_st)},
           {"l_c", finite_or_null(c.l_c)},           {"l_ctc", finite_or_null(c.l_ctc)},
           {"l_distill", finite_or_null(c.l_distill)}, {"l_dfm", finite_or_null(c.l_dfm)},
           {"total", finite_or_null(b.total)},       {"ctc_infeasible", b.ctc_infeasible}};
}

json tabular_to_json(const TabularDenoiser& d) {
  json rows = json::object();
  for (const auto& [key, logits] : d.rows()) rows[key.to_string()] = logits;
  return json{{"schema_version", kSchemaVersion},
              {"kind", "tabular_denoiser"},
              {"layout", d.layout()},
              {"time_buckets", d.config().time_buckets},
              {"max_position_buckets", d.config().max_position_buckets},
              {"default_row", d.default_row()},
              {"rows", std::move(rows)}};
}

TabularDenoiser tabular_from_json(const json& j) {
  if (j.at("schema_version").get<int>() != kSchemaVersion)
    throw ParseError("unsupported denoiser schema_version");
  TabularConfig config;
  config.time_buckets = j.at("time_buckets").get<int>();
  config.max_position_buckets = j.at("max_position_buckets").get<int>();
  TabularDenoiser d(j.at("layout").get<StreamLayout>(), config);
  auto check_row = [&](const std::vector<double>& row) {
    if (row.size() != static_cast<std::size_t>(d.layout().v))
      throw ParseError("denoiser row width differs from v");
    return row;
  };
  d.mutable_default_row() = check_row(j.at("default_row").get<std::vector<double>>());
  for (const auto& [key, row] : j.at("rows").items())
    d.mutable_logits(TableKey::parse(key)) = check_row(row.get<std::vector<double>>());
  return d;
}

std::string corpus_to_jsonl(const ToyCorpus& corpus) {
  std::string out = json{{"schema_version", kSchemaVersion},
                         {"kind", "toy_corpus"},
                         {"count", corpus.size()},
                         {"config", corpus.config()}}
                        .dump();
  out += '\n';
  for (const auto& s : corpus.samples()) {
    out += json(s).dump();
    out += '\n';
  }
  return out;
}

ToyCorpus corpus_from_jsonl(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("corpus file is empty");
  const json header = json::parse(line);
  if (header.at("kind").get<std::string>() != "toy_corpus")
    throw ParseError("corpus header has the wrong kind");
  if (header.at("schema_version").get<int>() != kSchemaVersion)
    throw ParseError("unsupported corpus schema_version");
  ToyConfig config;
  from_json(header.at("config"), config);
  config.validate();
  const auto count = header.at("count").get<std::size_t>();

  std::vector<ToySample> samples;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    samples.push_back(json::parse(line).get<ToySample>());
  }
  if (samples.size() != count)
    throw ParseError("corpus header announces " + std::to_string(count) + " samples, found " +
                     std::to_string(samples.size()));
  return ToyCorpus(config, std::move(samples));
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

namespace {

template <class Fn>
auto as_parse_error(const std::filesystem::path& path, Fn&& fn) {
  try {
    return fn();
  } catch (const IoError&) {
    throw;
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  } catch (const Error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace

ToyCorpus read_corpus(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  return as_parse_error(path, [&] {
    std::istringstream in(text);
    return corpus_from_jsonl(in);
  });
}

TabularDenoiser read_tabular(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  return as_parse_error(path, [&] { return tabular_from_json(json::parse(text)); });
}

}  // namespace flowdub
