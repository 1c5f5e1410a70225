#include <doctest.h>

#include <sstream>

#include "flowdub/cli.hpp"
#include "flowdub/io.hpp"
#include "oracles.hpp"

using namespace flowdub;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result call(std::vector<std::string> args) {
  args.insert(args.begin(), "flowdub");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

}  // namespace

TEST_CASE("help and usage errors") {
  const Result help = call({"--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("two-stage") != std::string::npos);
  const Result sub = call({"sweep", "--help"});
  CHECK(sub.code == 0);
  CHECK(sub.out.find("[1,2,4,8,16,32,64,128]") != std::string::npos);
  CHECK(call({}).code == cli::kExitInvalid);
  CHECK(call({"bogus"}).code == cli::kExitInvalid);
  CHECK(call({"gen", "--count", "x"}).code == cli::kExitInvalid);
  CHECK(call({"sweep", "--nfe-list", ""}).code == cli::kExitInvalid);
}

TEST_CASE("file errors map to exit codes") {
  oracle::TempDir dir("cli_err");
  CHECK(call({"train", "--corpus", (dir.path / "none.jsonl").string(), "--out", dir.str()}).code == cli::kExitIo);
  write_text_file(dir.path / "junk.jsonl", "not json\n");
  CHECK(call({"train", "--corpus", (dir.path / "junk.jsonl").string(), "--out", dir.str()}).code == cli::kExitParse);
  write_text_file(dir.path / "cfg.json", R"({"schema_version": 1, "toy": {"phonemes": 9}})");
  CHECK(call({"gen", "--config", (dir.path / "cfg.json").string(), "--out", dir.str()}).code == cli::kExitInvalid);
}

TEST_CASE("gen, train and sample produce their files") {
  oracle::TempDir dir("cli_run");
  const std::string corpus = (dir.path / "corpus.toyc.jsonl").string();
  REQUIRE(call({"gen", "--seed", "4", "--count", "12", "--out", dir.str()}).code == 0);
  REQUIRE(call({"train", "--corpus", corpus, "--steps", "30", "--out", dir.str()}).code == 0);
  const std::string trace = read_text_file(dir.path / "trace.csv");
  CHECK(trace.rfind("step,loss,positions\n", 0) == 0);
  CHECK(std::count(trace.begin(), trace.end(), '\n') == 31);
  REQUIRE(call({"sample", "--corpus", corpus, "--denoiser", (dir.path / "denoiser.json").string(), "--count", "3",
                "--out", dir.str()})
              .code == 0);
  CHECK(call({"sample", "--corpus", corpus, "--oracle", "--mode", "tts", "--out", dir.str()}).code ==
        cli::kExitInvalid);
  CHECK(call({"sample", "--corpus", corpus, "--out", dir.str()}).code == cli::kExitInvalid);
}

TEST_CASE("eval-align reports loss and durations") {
  oracle::TempDir dir("cli_align");
  write_text_file(dir.path / "s.csv", "1,0\n1,0\n0,1\n0,1\n");
  write_text_file(dir.path / "d.json", R"({"frame_counts": [2, 2]})");
  const Result r = call({"eval-align", "--scores", (dir.path / "s.csv").string(), "--durations",
                         (dir.path / "d.json").string()});
  REQUIRE(r.code == 0);
  const json j = json::parse(r.out);
  CHECK(j.at("loss_name") == "l_vt");
  CHECK(j.at("mas_durations") == json::array({2, 2}));
  CHECK(call({"eval-align", "--scores", (dir.path / "s.csv").string(), "--durations",
              (dir.path / "d.json").string(), "--unit", "tokens"})
            .code == cli::kExitInvalid);
  write_text_file(dir.path / "d3.json", R"({"frame_counts": [1, 1, 2]})");
  CHECK(call({"eval-align", "--scores", (dir.path / "s.csv").string(), "--durations",
              (dir.path / "d3.json").string()})
            .code == cli::kExitInvalid);
  write_text_file(dir.path / "bad.csv", "1,0\n1\n");
  CHECK(call({"eval-align", "--scores", (dir.path / "bad.csv").string(), "--durations",
              (dir.path / "d.json").string()})
            .code == cli::kExitParse);
}

TEST_CASE("config values apply unless a flag overrides them") {
  oracle::TempDir dir("cli_cfg");
  write_text_file(dir.path / "cfg.json", R"({"schema_version": 1, "corpus_size": 5, "seed": 2})");
  REQUIRE(call({"gen", "--config", (dir.path / "cfg.json").string(), "--out", dir.str()}).code == 0);
  CHECK(read_corpus(dir.path / "corpus.toyc.jsonl").size() == 5);
  REQUIRE(call({"gen", "--config", (dir.path / "cfg.json").string(), "--count", "7", "--out", dir.str()}).code == 0);
  CHECK(read_corpus(dir.path / "corpus.toyc.jsonl").size() == 7);
  write_text_file(dir.path / "v2.json", R"({"schema_version": 2})");
  CHECK(call({"gen", "--config", (dir.path / "v2.json").string(), "--out", dir.str()}).code == cli::kExitInvalid);
}

TEST_CASE("sample output does not depend on the thread count") {
  oracle::TempDir a("cli_thr_a"), b("cli_thr_b");
  for (const auto* d : {&a, &b}) REQUIRE(call({"gen", "--seed", "1", "--count", "10", "--out", d->str()}).code == 0);
  const std::string corpus = (a.path / "corpus.toyc.jsonl").string();
  REQUIRE(call({"sample", "--corpus", corpus, "--oracle", "--count", "16", "--threads", "1", "--out", a.str()}).code == 0);
  REQUIRE(call({"sample", "--corpus", corpus, "--oracle", "--count", "16", "--threads", "4", "--out", b.str()}).code == 0);
  CHECK(read_text_file(a.path / "samples.jsonl") == read_text_file(b.path / "samples.jsonl"));
}
