#include "flowdub/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>

#include "flowdub/batch.hpp"
#include "flowdub/errors.hpp"
#include "flowdub/io.hpp"

namespace flowdub {

namespace {

// Shortest round-trip decimal form, shared by JSON and CSV output.
std::string number_text(double x) { return json(x).dump(); }

double finite_mean(const std::vector<double>& values) {
  if (values.empty()) return 0.0;
  double total = 0.0;
  for (double v : values) total += v;
  return total / static_cast<double>(values.size());
}

json sweep_config_json(const SweepConfig& c) {
  return json{{"nfe_list", c.nfe_list},
              {"samples_per_context", c.samples_per_context},
              {"max_contexts", c.max_contexts},
              {"held_out_fraction", c.held_out_fraction},
              {"seed", c.seed},
              {"record_walltime", c.record_walltime}};
}

json two_stage_config_json(const TwoStageConfig& c) {
  return json{{"toy", c.toy},
              {"corpus_size", c.corpus_size},
              {"pretrain_steps", c.pretrain_steps},
              {"adapt_steps", c.adapt_steps},
              {"lr", c.lr},
              {"seed", c.seed},
              {"eval_examples", c.eval_examples},
              {"held_out_fraction", c.held_out_fraction},
              {"time_buckets", c.table.time_buckets},
              {"max_position_buckets", c.table.max_position_buckets}};
}

}  // namespace

void SweepConfig::validate() const {
  if (nfe_list.empty()) throw ConfigError("nfe list must not be empty");
  for (std::size_t i = 0; i < nfe_list.size(); ++i) {
    if (nfe_list[i] < 1) throw ConfigError("nfe values must be >= 1");
    if (i > 0 && nfe_list[i] <= nfe_list[i - 1])
      throw ConfigError("nfe values must be strictly increasing");
  }
  if (samples_per_context < 1) throw ConfigError("samples per context must be >= 1");
  if (max_contexts < 1) throw ConfigError("max_contexts must be >= 1");
  if (threads < 1) throw ConfigError("threads must be >= 1");
  if (!(held_out_fraction >= 0.0 && held_out_fraction <= 1.0))
    throw ConfigError("held_out_fraction must lie in [0, 1]");
}

double compute_tv(std::span<const GenerativeTarget> samples, const TargetLaw& exact) {
  const std::size_t positions = law_positions(exact);
  const int vocab = law_vocab(exact);
  if (samples.empty() || positions == 0) return 0.0;
  const std::vector<double> q = law_marginals(exact);

  std::vector<double> counts(positions * vocab, 0.0);
  for (const auto& s : samples) {
    if (s.position_count() != positions) throw ShapeError("sample shape differs from the law");
    for (std::size_t i = 0; i < positions; ++i) {
      const Symbol x = s.at(i);
      if (x < 0 || x >= vocab) throw DomainError("sample symbol outside the law's vocabulary");
      counts[i * vocab + x] += 1.0;
    }
  }
  const double n = static_cast<double>(samples.size());
  double total = 0.0;
  for (std::size_t i = 0; i < positions; ++i) {
    double tv = 0.0;
    for (int x = 0; x < vocab; ++x) tv += std::abs(counts[i * vocab + x] / n - q[i * vocab + x]);
    total += 0.5 * tv;
  }
  return total / static_cast<double>(positions);
}

double mean_position_nll(const TargetLaw& law, const GenerativeTarget& sample) {
  const std::size_t positions = law_positions(law);
  if (sample.position_count() != positions) throw ShapeError("sample shape differs from the law");
  if (positions == 0) return 0.0;
  const int vocab = law_vocab(law);
  const std::vector<double> q = law_marginals(law);
  // Product laws: the joint NLL is the sum of per-position terms.
  if (std::holds_alternative<FactorizedLaw>(law)) {
    double total = 0.0;
    for (std::size_t i = 0; i < positions; ++i)
      total -= std::log(std::max(q[i * vocab + sample.at(i)], kLogFloor));
    return total / static_cast<double>(positions);
  }
  const double lp = law_log_prob(law, sample.symbols.flat());
  return -std::max(lp, std::log(kLogFloor)) / static_cast<double>(positions);
}

SweepReport run_nfe_sweep(const SweepConfig& config, const Denoiser& denoiser,
                          const ToyCorpus& corpus, const std::string& denoiser_label) {
  config.validate();
  if (denoiser.layout() != corpus.config().layout)
    throw ConfigError("denoiser layout differs from the corpus layout");

  const HeldOutSplit split = split_held_out(corpus, config.held_out_fraction, config.seed);
  const std::size_t context_count = std::min(config.max_contexts, split.eval.size());
  std::vector<ConditioningContext> contexts;
  std::vector<GenerativeTarget> references;
  for (std::size_t c = 0; c < context_count; ++c) {
    contexts.push_back(context_of(corpus, split.eval[c], ContextMode::dub));
    references.push_back(target_of(corpus[split.eval[c]]));
  }

  const Scheduler sched;
  SweepReport report{config, corpus.config(), denoiser_label, context_count, {}};
  for (int nfe : config.nfe_list) {
    SweepRow row;
    row.nfe = nfe;
    const auto start = std::chrono::steady_clock::now();
    try {
      if (contexts.empty()) throw InconsistencyError("no held-out contexts available");
      std::vector<double> tv, nll, accuracy;
      for (std::size_t c = 0; c < contexts.size(); ++c) {
        const TargetLaw law = true_conditional(corpus.config(), contexts[c]);
        const auto samples = sample_batch(denoiser, contexts[c], config.samples_per_context, nfe,
                                          sched, derive_seed(config.seed, c), config.threads);
        tv.push_back(compute_tv(samples, law));
        for (const auto& s : samples) {
          nll.push_back(mean_position_nll(law, s));
          std::size_t hits = 0;
          for (std::size_t i = 0; i < s.position_count(); ++i) hits += s.at(i) == references[c].at(i);
          accuracy.push_back(static_cast<double>(hits) / static_cast<double>(s.position_count()));
        }
      }
      row.tv_distance = finite_mean(tv);
      row.mean_nll = finite_mean(nll);
      row.token_accuracy = finite_mean(accuracy);
    } catch (const Error& e) {
      row.flagged = true;
      row.flag_reason = e.what();
      row.tv_distance = row.mean_nll = row.token_accuracy = 0.0;
    }
    if (config.record_walltime)
      row.walltime_ms = std::chrono::duration<double, std::milli>(
                            std::chrono::steady_clock::now() - start)
                            .count();
    report.rows.push_back(std::move(row));
  }
  return report;
}

json sweep_to_json(const SweepReport& report) {
  json rows = json::array();
  for (const auto& r : report.rows) {
    json row{{"nfe", r.nfe},
             {"walltime_ms", r.walltime_ms ? json(*r.walltime_ms) : json(nullptr)},
             {"token_accuracy", r.token_accuracy},
             {"tv_distance", r.tv_distance},
             {"mean_nll", r.mean_nll},
             {"flagged", r.flagged}};
    if (r.flagged) row["flag_reason"] = r.flag_reason;
    rows.push_back(std::move(row));
  }
  return json{{"schema_version", kSchemaVersion},
              {"kind", "nfe_sweep"},
              {"metrics_are_toy_analogs", true},
              {"denoiser", report.denoiser},
              {"contexts", report.contexts},
              {"config", sweep_config_json(report.config)},
              {"toy", report.toy},
              {"rows", std::move(rows)}};
}

std::string sweep_to_csv(const SweepReport& report) {
  std::string out = "nfe,walltime_ms,token_accuracy,tv_distance,mean_nll\n";
  for (const auto& r : report.rows) {
    out += std::to_string(r.nfe) + ',';
    if (r.walltime_ms) out += number_text(*r.walltime_ms);
    out += ',' + number_text(r.token_accuracy) + ',' + number_text(r.tv_distance) + ',' +
           number_text(r.mean_nll) + '\n';
  }
  return out;
}

void TwoStageConfig::validate() const {
  toy.validate();
  if (corpus_size < 2) throw ConfigError("two-stage corpus needs at least 2 samples");
  if (pretrain_steps < 1) throw ConfigError("pretrain steps must be >= 1");
  if (adapt_steps < 0) throw ConfigError("adapt steps must be >= 0");
  if (!(lr > 0.0)) throw ConfigError("lr must be positive");
  if (eval_examples < 1) throw ConfigError("eval_examples must be >= 1");
  if (threads < 1) throw ConfigError("threads must be >= 1");
}

double masked_token_accuracy(const Denoiser& denoiser, std::span<const TrainingExample> examples,
                             const Scheduler& sched, std::uint64_t seed) {
  std::size_t hits = 0, total = 0;
  for (std::size_t j = 0; j < examples.size(); ++j) {
    Rng rng(derive_seed(seed, j));
    const PathState x_t = corrupt(examples[j].target, rng.uniform(), sched, rng);
    const PosteriorGrid p = denoiser.evaluate(x_t, examples[j].ctx);
    for (std::size_t i = 0; i < x_t.state.position_count(); ++i) {
      if (!x_t.state.is_masked(i)) continue;
      const auto row = p.row(i);
      const auto best = std::distance(row.begin(), std::ranges::max_element(row));
      hits += best == examples[j].target.at(i);
      ++total;
    }
  }
  return total ? static_cast<double>(hits) / static_cast<double>(total) : 0.0;
}

std::string state_digest(const TabularDenoiser& denoiser) {
  const std::string text = tabular_to_json(denoiser).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

TwoStageReport run_two_stage(const TwoStageConfig& config) {
  config.validate();
  const Scheduler sched;
  Rng corpus_rng(derive_seed(config.seed, 1));
  const ToyCorpus corpus = gen_corpus(config.toy, config.corpus_size, corpus_rng);
  const HeldOutSplit split = split_held_out(corpus, config.held_out_fraction, config.seed);
  if (split.train.empty()) throw ConfigError("two-stage split left no training samples");

  const auto pretrain = training_examples(corpus, ContextMode::tts, split.train);
  const auto adapt = training_examples(corpus, ContextMode::dub, split.train);
  std::vector<std::size_t> eval_in(split.train.begin(),
                                   split.train.begin() + std::min(config.eval_examples, split.train.size()));
  std::vector<std::size_t> eval_out(split.eval.begin(),
                                    split.eval.begin() + std::min(config.eval_examples, split.eval.size()));
  const auto eval_in_domain = training_examples(corpus, ContextMode::dub, eval_in);
  const auto eval_held_out = training_examples(corpus, ContextMode::dub, eval_out);

  const std::uint64_t eval_seed = derive_seed(config.seed, 20);
  auto finish = [&](ArmResult& arm, const TabularDenoiser& d, const TrainTrace& last_trace) {
    arm.final_mean_dfm_loss = mean_dfm_loss(d, eval_in_domain, sched, eval_seed, config.threads);
    arm.held_out_mean_dfm_loss =
        eval_held_out.empty() ? 0.0 : mean_dfm_loss(d, eval_held_out, sched, eval_seed, config.threads);
    arm.token_accuracy = masked_token_accuracy(d, eval_in_domain, sched, eval_seed);
    const std::size_t tail = std::min<std::size_t>(100, last_trace.loss.size());
    std::vector<double> last(last_trace.loss.end() - static_cast<std::ptrdiff_t>(tail), last_trace.loss.end());
    arm.last_train_loss = finite_mean(last);
  };

  auto arm = [](const char* name, int pretrain, int adapt) {
    ArmResult a;
    a.name = name;
    a.pretrain_steps = pretrain;
    a.adapt_steps = adapt;
    return a;
  };
  TwoStageReport report{config,
                        arm("pretrain_then_adapt", config.pretrain_steps, config.adapt_steps),
                        arm("from_scratch", 0, config.pretrain_steps + config.adapt_steps),
                        TabularDenoiser(config.toy.layout, config.table),
                        TabularDenoiser(config.toy.layout, config.table),
                        TabularDenoiser(config.toy.layout, config.table)};

  try {
    TabularDenoiser d(config.toy.layout, config.table);
    Rng pre_rng(derive_seed(config.seed, 10));
    TrainTrace trace = tabular_train(d, pretrain, config.pretrain_steps, config.lr, sched, pre_rng);
    report.adapted_pretrain_state = d;
    Rng adapt_rng(derive_seed(config.seed, 11));
    TrainTrace adapt_trace = tabular_train(d, adapt, config.adapt_steps, config.lr, sched, adapt_rng);
    report.adapted_final_state = d;
    finish(report.adapted, d, adapt_trace.loss.empty() ? trace : adapt_trace);
  } catch (const NumericError& e) {
    report.adapted.diverged = true;
    report.adapted.diagnostic = e.what();
  }

  try {
    TabularDenoiser d(config.toy.layout, config.table);
    Rng rng(derive_seed(config.seed, 12));
    TrainTrace trace =
        tabular_train(d, adapt, config.pretrain_steps + config.adapt_steps, config.lr, sched, rng);
    report.scratch_final_state = d;
    finish(report.from_scratch, d, trace);
  } catch (const NumericError& e) {
    report.from_scratch.diverged = true;
    report.from_scratch.diagnostic = e.what();
  }
  return report;
}

json two_stage_to_json(const TwoStageReport& report) {
  auto arm_json = [](const ArmResult& a, const TabularDenoiser& final_state) {
    json j{{"name", a.name},
           {"pretrain_steps", a.pretrain_steps},
           {"adapt_steps", a.adapt_steps},
           {"total_steps", a.pretrain_steps + a.adapt_steps},
           {"diverged", a.diverged},
           {"final_mean_dfm_loss", a.diverged ? json(nullptr) : finite_or_null(a.final_mean_dfm_loss)},
           {"held_out_mean_dfm_loss",
            a.diverged ? json(nullptr) : finite_or_null(a.held_out_mean_dfm_loss)},
           {"token_accuracy", a.diverged ? json(nullptr) : finite_or_null(a.token_accuracy)},
           {"last_train_loss", a.diverged ? json(nullptr) : finite_or_null(a.last_train_loss)},
           {"final_state_digest", state_digest(final_state)}};
    if (a.diverged) j["diagnostic"] = a.diagnostic;
    return j;
  };
  json adapted = arm_json(report.adapted, report.adapted_final_state);
  adapted["pretrain_state_digest"] = state_digest(report.adapted_pretrain_state);
  return json{{"schema_version", kSchemaVersion},
              {"kind", "two_stage_report"},
              {"metrics_are_toy_analogs", true},
              {"config", two_stage_config_json(report.config)},
              {"arms", json::array({adapted, arm_json(report.from_scratch, report.scratch_final_state)})}};
}

std::vector<std::string> validate_two_stage_report(const json& report) {
  std::vector<std::string> problems;
  auto require = [&](const json& obj, const char* key, auto&& check, const char* what) {
    if (!obj.is_object() || !obj.contains(key)) {
      problems.push_back(std::string("missing field '") + key + "'");
      return;
    }
    if (!check(obj.at(key))) problems.push_back(std::string("field '") + key + "' must be " + what);
  };
  auto is_int = [](const json& x) { return x.is_number_integer(); };
  auto is_bool = [](const json& x) { return x.is_boolean(); };
  auto is_string = [](const json& x) { return x.is_string(); };
  auto is_object = [](const json& x) { return x.is_object(); };
  auto is_number_or_null = [](const json& x) { return x.is_number() || x.is_null(); };
  auto is_digest = [](const json& x) {
    return x.is_string() && x.get<std::string>().size() == 16 &&
           x.get<std::string>().find_first_not_of("0123456789abcdef") == std::string::npos;
  };

  require(report, "schema_version", [](const json& x) { return x == kSchemaVersion; }, "1");
  require(report, "kind", [](const json& x) { return x == "two_stage_report"; }, "\"two_stage_report\"");
  require(report, "config", is_object, "an object");
  if (!report.contains("arms") || !report.at("arms").is_array() || report.at("arms").size() != 2) {
    problems.push_back("'arms' must be an array of two arm objects");
    return problems;
  }
  const char* names[] = {"pretrain_then_adapt", "from_scratch"};
  for (std::size_t a = 0; a < 2; ++a) {
    const json& arm = report.at("arms")[a];
    require(arm, "name", [&](const json& x) { return x == names[a]; }, names[a]);
    require(arm, "pretrain_steps", is_int, "an integer");
    require(arm, "adapt_steps", is_int, "an integer");
    require(arm, "total_steps", is_int, "an integer");
    require(arm, "diverged", is_bool, "a boolean");
    for (const char* key : {"final_mean_dfm_loss", "held_out_mean_dfm_loss", "token_accuracy",
                            "last_train_loss"})
      require(arm, key, is_number_or_null, "a number or null");
    require(arm, "final_state_digest", is_digest, "a 16-digit hex digest");
    if (arm.contains("diverged") && arm.at("diverged") == true)
      require(arm, "diagnostic", is_string, "a string");
  }
  require(report.at("arms")[0], "pretrain_state_digest", is_digest, "a 16-digit hex digest");
  const json& arms = report.at("arms");
  if (arms[0].value("total_steps", -1) != arms[1].value("total_steps", -2))
    problems.push_back("both arms must run the same total number of steps");
  return problems;
}

}  // namespace flowdub
