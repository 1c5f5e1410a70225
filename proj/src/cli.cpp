#include "flowdub/cli.hpp"

#include <filesystem>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "flowdub/alignment.hpp"
#include "flowdub/batch.hpp"
#include "flowdub/errors.hpp"
#include "flowdub/experiments.hpp"
#include "flowdub/io.hpp"

namespace flowdub::cli {

namespace {

namespace fs = std::filesystem;

// Flags shared by every subcommand.
struct Common {
  std::string config_path;
  std::uint64_t seed = 0;
  std::string out_dir = ".";
  int threads = 1;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config_path, "JSON config file (schema_version 1)");
  sub->add_option("--seed", c.seed, "64-bit seed; overrides the config file");
  sub->add_option("--out", c.out_dir, "Output directory");
  sub->add_option("--threads", c.threads, "Worker threads")->check(CLI::PositiveNumber);
}

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  const std::string text = read_text_file(path);
  json config;
  try {
    config = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  if (!config.is_object() || config.value("schema_version", 0) != kSchemaVersion)
    throw ConfigError(path + ": config must be an object with schema_version 1");
  return config;
}

json section(const json& config, const char* name) {
  return config.contains(name) ? config.at(name) : json::object();
}

// Flag value when given on the command line, else the config value, else the default.
template <class T>
T resolve(const CLI::App* sub, const char* flag, const T& flag_value, const json& cfg,
          const char* key, const T& fallback) {
  if (sub->count(flag) > 0) return flag_value;
  if (cfg.contains(key)) {
    try {
      return cfg.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(std::string("config field '") + key + "': " + e.what());
    }
  }
  return fallback;
}

fs::path prepare_out(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir);
  return dir;
}

ToyConfig toy_config(const json& config, const CLI::App* sub, const Common& c) {
  ToyConfig toy;
  try {
    from_json(section(config, "toy"), toy);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("toy config: ") + e.what());
  }
  if (sub->count("--seed"))
    toy.seed = c.seed;
  else if (!section(config, "toy").contains("seed") && config.contains("seed"))
    toy.seed = config.at("seed").get<std::uint64_t>();
  toy.validate();
  return toy;
}

std::vector<int> parse_nfe_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw ConfigError("invalid --nfe-list entry '" + item + "'");
    }
  }
  if (out.empty()) throw ConfigError("--nfe-list must not be empty");
  return out;
}

ScoreGrid read_score_csv(const std::string& path) {
  const std::string text = read_text_file(path);
  ScoreGrid grid;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<double> row;
    std::stringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        if (cell.find_first_not_of(" \t\r", used) != std::string::npos) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw ParseError(path + ": not a number: '" + cell + "'");
      }
    }
    if (grid.rows == 0) grid.cols = row.size();
    if (row.size() != grid.cols) throw ParseError(path + ": ragged score rows");
    grid.values.insert(grid.values.end(), row.begin(), row.end());
    ++grid.rows;
  }
  if (grid.rows == 0) throw ParseError(path + ": empty score grid");
  return grid;
}

// {"beats": [...]} or {"frame_counts": [...]} -> per-phoneme row counts.
std::vector<int> read_row_counts(const std::string& path, AlignUnit unit) {
  json spec;
  try {
    spec = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  std::vector<int> counts;
  if (spec.contains("beats")) {
    DurationTable d{spec.at("beats").get<std::vector<int>>()};
    d.validate();
    const int per_beat = unit == AlignUnit::frames ? kFramesPerBeat : kTokensPerBeat;
    for (int b : d.beats) counts.push_back(per_beat * b);
  } else if (spec.contains("frame_counts")) {
    for (int f : spec.at("frame_counts").get<std::vector<int>>())
      counts.push_back(unit == AlignUnit::frames ? f : frames_to_tokens(f));
  } else {
    throw ParseError(path + ": expected 'beats' or 'frame_counts'");
  }
  return counts;
}

int cmd_gen(const CLI::App* sub, const Common& c, std::size_t count_flag, std::ostream& out) {
  const json config = load_config(c.config_path);
  const ToyConfig toy = toy_config(config, sub, c);
  const auto count = resolve<std::size_t>(sub, "--count", count_flag, config, "corpus_size", 200);
  Rng rng(toy.seed);
  const ToyCorpus corpus = gen_corpus(toy, count, rng);
  const fs::path path = prepare_out(c.out_dir) / "corpus.toyc.jsonl";
  write_text_file(path, corpus_to_jsonl(corpus));
  out << "wrote " << corpus.size() << " samples to " << path.string() << " (layout m=" << toy.layout.m
      << " n=" << toy.layout.n << " k=" << toy.layout.k << " v=" << toy.layout.v << ")\n";
  return kExitOk;
}

struct TrainFlags {
  std::string corpus;
  int steps = 2000;
  double lr = 0.5;
  std::string mode = "dub";
};

int cmd_train(const CLI::App* sub, const Common& c, const TrainFlags& f, std::ostream& out) {
  const json config = load_config(c.config_path);
  const json train = section(config, "train");
  const int steps = resolve(sub, "--steps", f.steps, train, "steps", 2000);
  const double lr = resolve(sub, "--lr", f.lr, train, "lr", 0.5);
  const std::uint64_t seed = resolve<std::uint64_t>(sub, "--seed", c.seed, config, "seed", 0);
  const ContextMode mode = parse_context_mode(resolve(sub, "--mode", f.mode, train, "mode", std::string("dub")));
  if (steps < 0) throw ConfigError("--steps must be >= 0");
  if (!(lr >= 0.0)) throw ConfigError("--lr must be >= 0");

  const ToyCorpus corpus = read_corpus(f.corpus);
  TabularConfig table;
  table.time_buckets = train.value("time_buckets", table.time_buckets);
  table.max_position_buckets = train.value("max_position_buckets", table.max_position_buckets);
  TabularDenoiser denoiser(corpus.config().layout, table);
  const auto examples = training_examples(corpus, mode);
  Rng rng(seed);
  const TrainTrace trace = tabular_train(denoiser, examples, steps, lr, Scheduler{}, rng);

  const fs::path dir = prepare_out(c.out_dir);
  write_text_file(dir / "denoiser.json", tabular_to_json(denoiser).dump() + "\n");
  std::string csv = "step,loss,positions\n";
  for (std::size_t i = 0; i < trace.loss.size(); ++i)
    csv += std::to_string(i) + ',' + json(trace.loss[i]).dump() + ',' + std::to_string(trace.positions[i]) + '\n';
  write_text_file(dir / "trace.csv", csv);
  out << "trained " << steps << " steps (" << denoiser.rows().size() << " table rows); wrote "
      << (dir / "denoiser.json").string() << " and " << (dir / "trace.csv").string() << "\n";
  return kExitOk;
}

struct SampleFlags {
  std::string corpus;
  std::string denoiser;
  bool oracle = false;
  int nfe = 32;
  std::size_t count = 10;
  std::string mode = "dub";
};

int cmd_sample(const CLI::App* sub, const Common& c, const SampleFlags& f, std::ostream& out) {
  const json config = load_config(c.config_path);
  const json cfg = section(config, "sample");
  const int nfe = resolve(sub, "--nfe", f.nfe, cfg, "nfe", 32);
  const auto count = resolve<std::size_t>(sub, "--count", f.count, cfg, "count", 10);
  const std::uint64_t seed = resolve<std::uint64_t>(sub, "--seed", c.seed, config, "seed", 0);
  const ContextMode mode = parse_context_mode(resolve(sub, "--mode", f.mode, cfg, "mode", std::string("dub")));
  if (nfe < 1) throw ConfigError("--nfe must be >= 1");
  if (f.oracle == !f.denoiser.empty()) throw ConfigError("give exactly one of --denoiser or --oracle");
  if (f.oracle && mode != ContextMode::dub) throw ConfigError("--oracle requires dub-mode contexts");

  const ToyCorpus corpus = read_corpus(f.corpus);
  std::unique_ptr<Denoiser> denoiser;
  std::string label = "oracle";
  if (f.oracle) {
    denoiser = std::make_unique<ExactPosteriorDenoiser>(make_toy_oracle(corpus.config()));
  } else {
    auto table = std::make_unique<TabularDenoiser>(read_tabular(f.denoiser));
    // Content digest rather than the path, so the file depends only on inputs.
    label = "tabular:" + state_digest(*table);
    denoiser = std::move(table);
  }
  if (denoiser->layout() != corpus.config().layout)
    throw ConfigError("denoiser layout differs from the corpus layout");

  const Scheduler sched;
  std::vector<ConditioningContext> contexts(count);
  std::vector<GenerativeTarget> targets(count);
  for (std::size_t j = 0; j < count; ++j) contexts[j] = context_of(corpus, j % corpus.size(), mode);
  // One generator per output line keeps the file independent of --threads.
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic) num_threads(c.threads)
  for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(count); ++j) {
    try {
      Rng rng(derive_seed(seed, static_cast<std::uint64_t>(j)));
      targets[j] = sample(*denoiser, contexts[j], contexts[j].target_length, nfe, sched, rng);
    } catch (...) {
#pragma omp critical(flowdub_cli_sample)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  std::string text = json{{"schema_version", kSchemaVersion},
                          {"kind", "samples"},
                          {"count", count},
                          {"nfe", nfe},
                          {"seed", seed},
                          {"mode", to_string(mode)},
                          {"denoiser", label}}
                         .dump() +
                     "\n";
  for (std::size_t j = 0; j < count; ++j)
    text += json{{"index", j}, {"source_sample", j % corpus.size()}, {"context", contexts[j]},
                 {"target", targets[j]}}
                .dump() +
            "\n";
  const fs::path path = prepare_out(c.out_dir) / "samples.jsonl";
  write_text_file(path, text);
  out << "wrote " << count << " samples at nfe=" << nfe << " to " << path.string() << "\n";
  return kExitOk;
}

struct AlignFlags {
  std::string scores;
  std::string durations;
  std::string unit = "frames";
  double tau = 0.1;
};

int cmd_eval_align(const CLI::App* sub, const Common& c, const AlignFlags& f, std::ostream& out) {
  const json config = load_config(c.config_path);
  const json cfg = section(config, "align");
  const AlignUnit unit = parse_align_unit(resolve(sub, "--unit", f.unit, cfg, "unit", std::string("frames")));
  const double tau = resolve(sub, "--tau", f.tau, cfg, "tau", 0.1);

  const ScoreGrid scores = read_score_csv(f.scores);
  const std::vector<int> counts = read_row_counts(f.durations, unit);
  const AlignmentMatrix alignment = AlignmentMatrix::from_counts(counts);
  const double loss = contrastive_alignment_loss({scores, tau}, alignment);

  // MAS over row-wise log-softmax of the tempered scores.
  ScoreGrid log_scores(scores.rows, scores.cols);
  for (std::size_t i = 0; i < scores.rows; ++i) {
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < scores.cols; ++j) hi = std::max(hi, scores.at(i, j) / tau);
    double sum = 0.0;
    for (std::size_t j = 0; j < scores.cols; ++j) sum += std::exp(scores.at(i, j) / tau - hi);
    for (std::size_t j = 0; j < scores.cols; ++j) log_scores.at(i, j) = scores.at(i, j) / tau - hi - std::log(sum);
  }
  const MonotonicPath path = mas(log_scores);

  const json report{{"unit", unit == AlignUnit::frames ? "frames" : "tokens"},
                    {"loss_name", unit == AlignUnit::frames ? "l_vt" : "l_st"},
                    {"loss", finite_or_null(loss)},
                    {"tau", tau},
                    {"rows", scores.rows},
                    {"phonemes", scores.cols},
                    {"mas_durations", path_to_durations(path, static_cast<int>(scores.cols))}};
  out << report.dump() << "\n";
  if (sub->count("--out")) write_text_file(prepare_out(c.out_dir) / "align.json", report.dump(2) + "\n");
  return kExitOk;
}

struct SweepFlags {
  std::string corpus;
  std::string denoiser;
  bool oracle = false;
  std::string nfe_list;
  std::size_t count = 1000;
  std::size_t corpus_size = 200;
  bool timing = false;
};

int cmd_sweep(const CLI::App* sub, const Common& c, const SweepFlags& f, std::ostream& out) {
  const json config = load_config(c.config_path);
  const json cfg = section(config, "sweep");
  SweepConfig sweep;
  sweep.nfe_list = sub->count("--nfe-list") ? parse_nfe_list(f.nfe_list)
                                            : cfg.value("nfe_list", sweep.nfe_list);
  sweep.samples_per_context = resolve(sub, "--count", f.count, cfg, "samples_per_context", sweep.samples_per_context);
  sweep.max_contexts = cfg.value("max_contexts", sweep.max_contexts);
  sweep.held_out_fraction = cfg.value("held_out_fraction", sweep.held_out_fraction);
  sweep.seed = resolve<std::uint64_t>(sub, "--seed", c.seed, config, "seed", 0);
  sweep.threads = c.threads;
  sweep.record_walltime = f.timing || cfg.value("record_walltime", false);
  sweep.validate();
  if (f.oracle && !f.denoiser.empty()) throw ConfigError("give at most one of --denoiser or --oracle");

  ToyCorpus corpus;
  if (!f.corpus.empty()) {
    corpus = read_corpus(f.corpus);
  } else {
    const ToyConfig toy = toy_config(config, sub, c);
    Rng rng(toy.seed);
    corpus = gen_corpus(toy, resolve(sub, "--corpus-size", f.corpus_size, config, "corpus_size", f.corpus_size), rng);
  }

  std::unique_ptr<Denoiser> denoiser;
  std::string label = "oracle";
  if (f.denoiser.empty()) {
    denoiser = std::make_unique<ExactPosteriorDenoiser>(make_toy_oracle(corpus.config()));
  } else {
    auto table = std::make_unique<TabularDenoiser>(read_tabular(f.denoiser));
    label = "tabular:" + state_digest(*table);
    denoiser = std::move(table);
  }

  const SweepReport report = run_nfe_sweep(sweep, *denoiser, corpus, label);
  const fs::path dir = prepare_out(c.out_dir);
  write_text_file(dir / "sweep.json", sweep_to_json(report).dump(2) + "\n");
  write_text_file(dir / "sweep.csv", sweep_to_csv(report));
  out << sweep_to_csv(report);
  return kExitOk;
}

struct TwoStageFlags {
  int pretrain_steps = 1000;
  int adapt_steps = 1000;
  double lr = 0.5;
  std::size_t corpus_size = 120;
};

int cmd_two_stage(const CLI::App* sub, const Common& c, const TwoStageFlags& f, std::ostream& out) {
  const json config = load_config(c.config_path);
  const json cfg = section(config, "two_stage");
  TwoStageConfig ts;
  ts.toy = toy_config(config, sub, c);
  ts.pretrain_steps = resolve(sub, "--pretrain-steps", f.pretrain_steps, cfg, "pretrain_steps", ts.pretrain_steps);
  ts.adapt_steps = resolve(sub, "--adapt-steps", f.adapt_steps, cfg, "adapt_steps", ts.adapt_steps);
  if (sub->count("--steps")) ts.pretrain_steps = ts.adapt_steps = f.pretrain_steps;
  ts.lr = resolve(sub, "--lr", f.lr, cfg, "lr", ts.lr);
  ts.corpus_size = resolve(sub, "--corpus-size", f.corpus_size, cfg, "corpus_size", ts.corpus_size);
  ts.eval_examples = cfg.value("eval_examples", ts.eval_examples);
  ts.seed = resolve<std::uint64_t>(sub, "--seed", c.seed, config, "seed", 0);
  ts.threads = c.threads;

  const TwoStageReport report = run_two_stage(ts);
  const json j = two_stage_to_json(report);
  const fs::path path = prepare_out(c.out_dir) / "two_stage.json";
  write_text_file(path, j.dump(2) + "\n");
  out << j.at("arms").dump() << "\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Discrete flow matching and alignment toolkit for factorized-token dubbing"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  Common common;
  std::size_t gen_count = 200;
  auto* gen = app.add_subcommand("gen", "Generate a synthetic corpus (.toyc.jsonl)");
  add_common(gen, common);
  gen->add_option("--count", gen_count, "Number of samples");

  TrainFlags train_flags;
  auto* train = app.add_subcommand("train", "Train a tabular denoiser on a corpus");
  add_common(train, common);
  train->add_option("--corpus", train_flags.corpus, "Corpus file")->required();
  train->add_option("--steps", train_flags.steps, "SGD steps");
  train->add_option("--lr", train_flags.lr, "Learning rate");
  train->add_option("--mode", train_flags.mode, "Context mode: tts|dub");

  SampleFlags sample_flags;
  auto* samp = app.add_subcommand("sample", "Sample targets with the Euler sampler");
  add_common(samp, common);
  samp->add_option("--corpus", sample_flags.corpus, "Corpus supplying the contexts")->required();
  samp->add_option("--denoiser", sample_flags.denoiser, "Tabular denoiser JSON");
  samp->add_flag("--oracle", sample_flags.oracle, "Use the exact-posterior denoiser");
  samp->add_option("--nfe", sample_flags.nfe, "Denoiser evaluations per sample");
  samp->add_option("--count", sample_flags.count, "Number of samples");
  samp->add_option("--mode", sample_flags.mode, "Context mode: tts|dub");

  AlignFlags align_flags;
  auto* align = app.add_subcommand("eval-align", "Contrastive alignment loss and MAS durations");
  add_common(align, common);
  align->add_option("--scores", align_flags.scores, "CSV attention score grid (rows x phonemes)")->required();
  align->add_option("--durations", align_flags.durations, "JSON with 'beats' or 'frame_counts'")->required();
  align->add_option("--unit", align_flags.unit, "frames (video-text) or tokens (speech-text)");
  align->add_option("--tau", align_flags.tau, "Softmax temperature");

  SweepFlags sweep_flags;
  auto* sweep = app.add_subcommand("sweep", "NFE sweep against the exact toy law");
  add_common(sweep, common);
  sweep->add_option("--corpus", sweep_flags.corpus, "Corpus file (default: generate from config)");
  sweep->add_option("--corpus-size", sweep_flags.corpus_size, "Samples to generate when no corpus is given");
  sweep->add_option("--denoiser", sweep_flags.denoiser, "Tabular denoiser JSON (default: oracle)");
  sweep->add_flag("--oracle", sweep_flags.oracle, "Use the exact-posterior denoiser");
  sweep->add_option("--nfe-list", sweep_flags.nfe_list, "Comma-separated NFE values")
      ->default_str("1,2,4,8,16,32,64,128");
  sweep->add_option("--count", sweep_flags.count, "Samples per held-out context");
  sweep->add_flag("--timing", sweep_flags.timing, "Record wall time per row");

  TwoStageFlags ts_flags;
  auto* two = app.add_subcommand("two-stage", "Pretrain (tts) then adapt (dub) vs from-scratch");
  add_common(two, common);
  two->add_option("--pretrain-steps", ts_flags.pretrain_steps, "Pretraining steps");
  two->add_option("--adapt-steps", ts_flags.adapt_steps, "Adaptation steps");
  two->add_option("--steps", ts_flags.pretrain_steps, "Set both stage step counts");
  two->add_option("--lr", ts_flags.lr, "Learning rate");
  two->add_option("--corpus-size", ts_flags.corpus_size, "Corpus size");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitInvalid;
  }

  try {
    if (*gen) return cmd_gen(gen, common, gen_count, out);
    if (*train) return cmd_train(train, common, train_flags, out);
    if (*samp) return cmd_sample(samp, common, sample_flags, out);
    if (*align) return cmd_eval_align(align, common, align_flags, out);
    if (*sweep) return cmd_sweep(sweep, common, sweep_flags, out);
    if (*two) return cmd_two_stage(two, common, ts_flags, out);
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << "\n";
    return kExitParse;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kExitFailure;
  } catch (const Error& e) {
    err << "invalid input: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitInvalid;
}

}  // namespace flowdub::cli
