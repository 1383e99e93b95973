/* Copyright 2026 The gridnmt Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <sstream>
#include <string>
#include <vector>

#include "gridnmt/commands.hpp"
#include "test_util.hpp"

using namespace gridnmt;
using gridnmt::testing::read_file;
using gridnmt::testing::TempDir;
using gridnmt::testing::write_file;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

bool contains(const std::string& haystack, const std::string& needle) {
  return haystack.find(needle) != std::string::npos;
}

// Generates a small reverse task and a tiny fast config in dir.
void prepare(const TempDir& dir) {
  REQUIRE(cli({"gentask", "--task", "reverse", "--out", (dir / "train").string(), "--seed", "3",
               "--samples", "60", "--vocab", "6", "--max-len", "5"})
              .code == kExitOk);
  REQUIRE(cli({"gentask", "--task", "reverse", "--out", (dir / "dev").string(), "--seed", "4",
               "--samples", "12", "--vocab", "6", "--max-len", "5"})
              .code == kExitOk);
  write_file(dir / "run.cfg",
             "variant=attention\nhidden=6\nembed=5\nbatch=10\nepochs=1\nevals_per_epoch=2\n"
             "keep_best=2\nbeam=3\ntrain=train\ndev=dev\n");
}

}  // namespace

TEST_CASE("usage errors exit with 1") {
  CHECK(cli({}).code == kExitUsage);
  CHECK(cli({"frobnicate"}).code == kExitUsage);
  CHECK(cli({"train"}).code == kExitUsage);
  CHECK(cli({"eval", "--hyps", "a"}).code == kExitUsage);
  CHECK(cli({"gradcheck", "--dims", "3x4"}).code == kExitUsage);
  CHECK(cli({"gradcheck", "--variant", "transformer"}).code == kExitUsage);
  CHECK(cli({"gentask", "--task", "sort", "--out", "x"}).code == kExitUsage);
}

TEST_CASE("help exits cleanly") {
  const Result r = cli({"--help"});
  CHECK(r.code == kExitOk);
  CHECK(contains(r.out, "train"));
  CHECK(contains(r.out, "gradcheck"));
}

TEST_CASE("eval of a file against itself gives BLEU 100.00") {
  TempDir dir("cli-bleu");
  write_file(dir / "h.txt", "the cat sat on the mat\na b c d e\n");
  const Result r = cli({"eval", "--hyps", (dir / "h.txt").string(), "--refs", (dir / "h.txt").string()});
  CHECK(r.code == kExitOk);
  CHECK(r.out.rfind("BLEU 100.00\n", 0) == 0);

  write_file(dir / "short.txt", "a\n");
  CHECK(cli({"eval", "--hyps", (dir / "short.txt").string(), "--refs", (dir / "h.txt").string()}).code ==
        kExitData);
}

TEST_CASE("missing files exit with 2 and name the path") {
  TempDir dir("cli-missing");
  const std::string missing = (dir / "nowhere").string();
  Result r = cli({"eval", "--hyps", missing, "--refs", missing});
  CHECK(r.code == kExitData);
  CHECK(contains(r.err, missing));

  write_file(dir / "run.cfg", "train=" + missing + "\ndev=" + missing + "\n");
  r = cli({"train", "--config", (dir / "run.cfg").string(), "--out-dir", (dir / "out").string()});
  CHECK(r.code == kExitData);
  CHECK(contains(r.err, missing));

  r = cli({"decode", "--model", (dir / "avg.ckpt").string(), "--input", missing});
  CHECK(r.code == kExitData);
}

TEST_CASE("gradcheck reports per-parameter errors") {
  const Result r = cli({"gradcheck", "--variant", "2d-seq2seq", "--dims", "2x2x3", "--tol", "1e-2"});
  CHECK(r.code == kExitOk);
  CHECK(contains(r.out, "encoder.fwd.w"));
  CHECK(contains(r.out, "PASS 2d-seq2seq dims 2x2x3"));
  const Result strict = cli({"gradcheck", "--dims", "2x2x3", "--tol", "1e-30"});
  CHECK(strict.code == kExitNumeric);
  CHECK(contains(strict.out, "FAIL"));
}

TEST_CASE("gentask writes aligned corpora") {
  TempDir dir("cli-gen");
  const Result r = cli({"gentask", "--task", "digit-to-word", "--out", (dir / "d").string(), "--samples", "7"});
  CHECK(r.code == kExitOk);
  CHECK(contains(r.out, "wrote 7 pairs"));
  const std::string src = read_file(dir / "d.src");
  const std::string tgt = read_file(dir / "d.tgt");
  CHECK(std::count(src.begin(), src.end(), '\n') == 7);
  CHECK(std::count(tgt.begin(), tgt.end(), '\n') == 7);
}

TEST_CASE("train, decode and eval end to end, reproducibly") {
  TempDir dir("cli-train");
  prepare(dir);
  for (const char* run : {"a", "b"}) {
    const Result r = cli({"train", "--config", (dir / "run.cfg").string(), "--out-dir", (dir / run).string(),
                          "--no-wall-time", "--seed", "5"});
    REQUIRE(r.code == kExitOk);
    CHECK(contains(r.err, "overriding"));
    CHECK(std::filesystem::exists(dir / run / "avg.ckpt"));
    CHECK(std::filesystem::exists(dir / run / "metrics.jsonl"));
    CHECK(std::filesystem::exists(dir / run / "config.cfg"));
  }
  CHECK(read_file(dir / "a" / "metrics.jsonl") == read_file(dir / "b" / "metrics.jsonl"));
  CHECK(read_file(dir / "a" / "avg.ckpt") == read_file(dir / "b" / "avg.ckpt"));
  const std::string metrics = read_file(dir / "a" / "metrics.jsonl");
  CHECK(std::count(metrics.begin(), metrics.end(), '\n') == 2);
  CHECK(contains(metrics, "\"wall_time\":0.0"));

  const std::string model = (dir / "a" / "avg.ckpt").string();
  for (const char* out : {"h1.txt", "h2.txt"}) {
    const Result r = cli({"decode", "--model", model, "--input", (dir / "dev.src").string(), "--output",
                          (dir / out).string(), "--beam", "1"});
    REQUIRE(r.code == kExitOk);
  }
  const std::string hyps = read_file(dir / "h1.txt");
  CHECK(hyps == read_file(dir / "h2.txt"));
  CHECK(std::count(hyps.begin(), hyps.end(), '\n') == 12);
  const Result to_stdout =
      cli({"decode", "--model", model, "--input", (dir / "dev.src").string(), "--beam", "1", "--workers", "2"});
  CHECK(to_stdout.out == hyps);

  const Result e = cli({"eval", "--model", model, "--corpus", (dir / "dev").string()});
  CHECK(e.code == kExitOk);
  CHECK(contains(e.out, "perplexity "));
  CHECK(contains(e.out, "BLEU "));
  CHECK(contains(e.out, "exact_match "));
}

TEST_CASE("a checkpoint under a different config is rejected") {
  TempDir dir("cli-hash");
  prepare(dir);
  REQUIRE(cli({"train", "--config", (dir / "run.cfg").string(), "--out-dir", (dir / "m").string()}).code ==
          kExitOk);
  std::string cfg = read_file(dir / "m" / "config.cfg");
  const auto at = cfg.find("beam=3");
  REQUIRE(at != std::string::npos);
  write_file(dir / "m" / "config.cfg", cfg.replace(at, 6, "beam=4"));
  const Result r = cli({"decode", "--model", (dir / "m" / "avg.ckpt").string(), "--input",
                        (dir / "dev.src").string()});
  CHECK(r.code == kExitData);
  CHECK(contains(r.err, "config hash"));
}
