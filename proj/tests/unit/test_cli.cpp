// Copyright 2026 The htec Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <doctest.h>
#include <json.hpp>

#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out, err;
};

Run run_htec(std::vector<std::string> args) {
  args.insert(args.begin(), "htec");
  args.push_back("--quiet");
  // Global flags must precede the subcommand.
  std::rotate(args.begin() + 1, args.end() - 1, args.end());
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Run r;
  r.code = htec::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::vector<json> json_lines(const std::string& text) {
  std::vector<json> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(json::parse(line));
  return out;
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("htec_cli_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name, const std::string& content = {}) const {
    const auto p = path / name;
    if (!content.empty()) std::ofstream(p) << content;
    return p.string();
  }
};

std::string slurp(const std::string& path) {
  std::ifstream f(path);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("usage errors exit 1") {
  CHECK(run_htec({"frobnicate"}).code == htec::cli::kExitUsage);
  CHECK(run_htec({}).code == htec::cli::kExitUsage);
  CHECK(run_htec({"evaluate", "--hyp", "a"}).code == htec::cli::kExitUsage);
  CHECK(run_htec({"check", "--model", "m", "--in", "x", "--no-such-flag"}).code == htec::cli::kExitUsage);
  const auto help = run_htec({"fill", "--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("--n-best") != std::string::npos);
}

TEST_CASE("evaluate on identical hypotheses and references prints WER 0") {
  TempDir d;
  const auto text = d.file("t.txt", "give me the latest news\nturn the lights off\n");
  const auto r = run_htec({"evaluate", "--hyp", text, "--ref", text});
  CHECK(r.code == 0);
  CHECK(r.out.find("WER              0.0000") != std::string::npos);

  const auto hyp = d.file("h.jsonl", R"({"id":"b","hyp":"turn lights off"}
{"id":"a","hyp":"give my latest muse"}
)");
  const auto ref = d.file("r.jsonl", R"({"id":"a","gold":"give me the latest news"}
{"id":"b","gold":"turn the lights off"}
)");
  const auto j = run_htec({"evaluate", "--hyp", hyp, "--ref", ref, "--json", "--per-utterance"});
  REQUIRE(j.code == 0);
  const auto lines = json_lines(j.out);
  REQUIRE(lines.size() == 3);
  CHECK(lines[0]["id"] == "b");
  CHECK(lines[0]["deletions"] == 1);
  CHECK(lines[2]["wer"].get<double>() == doctest::Approx(4.0 / 9.0));
  CHECK(lines[2]["utterances"] == 2);
}

TEST_CASE("synth is byte-identical for a seed and derive-labels round-trips") {
  TempDir d;
  const auto a = run_htec({"synth", "--templates", "50", "--seed", "5"});
  const auto b = run_htec({"synth", "--templates", "50", "--seed", "5"});
  const auto c = run_htec({"synth", "--templates", "50", "--seed", "6"});
  REQUIRE(a.code == 0);
  CHECK(a.out == b.out);
  CHECK(a.out != c.out);
  CHECK(json_lines(a.out).size() == 50);

  const auto gold = d.file("gold.txt", "give me the latest news\n\nwhen was my last amazon order\n");
  const auto s = run_htec({"synth", "--gold", gold, "--rate", "0.3", "--seed", "1"});
  REQUIRE(s.code == 0);
  CHECK(json_lines(s.out).size() == 2);
  CHECK(run_htec({"synth", "--gold", gold, "--rate", "0.9"}).code == htec::cli::kExitUsage);

  const auto corpus = d.file("c.jsonl", R"({"id":"w","gold":"give me the latest news","annotator":"give my latest muse"})"
                                        "\n");
  const auto labeled = run_htec({"derive-labels", "--in", corpus});
  REQUIRE(labeled.code == 0);
  const auto j = json_lines(labeled.out).at(0);
  CHECK(j["labels"] == json({"K", "SR", "K", "S"}));
  CHECK(j["fills"][1]["substitute"] == "me");
  CHECK(j["fills"][1]["right_insert"] == json({"the"}));
}

TEST_CASE("data errors exit 2 and model errors exit 3") {
  TempDir d;
  const auto no_gold = d.file("ng.jsonl", R"({"id":"x","annotator":"a b"})"
                                          "\n");
  CHECK(run_htec({"derive-labels", "--in", no_gold}).code == htec::cli::kExitData);
  CHECK(run_htec({"derive-labels", "--in", d.file("bad.jsonl", "{not json\n")}).code == htec::cli::kExitData);
  CHECK(run_htec({"derive-labels", "--in", (d.path / "missing.jsonl").string()}).code == htec::cli::kExitData);
  const auto garbage = d.file("bad.htec", "garbage");
  CHECK(run_htec({"check", "--model", garbage, "--in", no_gold}).code == htec::cli::kExitModel);
  CHECK(run_htec({"check", "--model", (d.path / "none.htec").string(), "--in", no_gold}).code == htec::cli::kExitModel);
}

TEST_CASE("gradcheck passes the finite-difference oracle") {
  const auto r = run_htec({"gradcheck", "--seed", "3", "--elements", "4"});
  CHECK(r.code == 0);
  const auto lines = json_lines(r.out);
  REQUIRE(lines.size() == 4);
  CHECK(lines.back()["max_rel_error"].get<double>() < 1e-4);
  CHECK(lines.back()["pass"] == true);
}

TEST_CASE("train, check, fill, correct and simulate-mcr work end to end") {
  TempDir d;
  const auto corpus = d.file("tri.jsonl", run_htec({"synth", "--templates", "40", "--seed", "2", "--rate", "0.2"}).out);
  const auto model_cfg = d.file("m.json", R"({"layers_enc":1,"layers_dec":1,"model_dim":8,"heads":2,"ff_dim":16,"phoneme_dim":4})");
  const auto train_cfg = d.file("t.json", R"({"batch_size":8,"warmup_steps":5})");
  const auto checker = d.file("c.htec"), filler = d.file("f.htec");

  auto t = run_htec({"train", "checker", "--corpus", corpus, "--config", train_cfg, "--model-config", model_cfg, "--epochs",
                 "2", "--seed", "4", "-o", checker});
  REQUIRE(t.code == 0);
  const auto history = json_lines(t.out);
  REQUIRE(history.size() == 2);
  CHECK(history[0].contains("val_loss"));
  // Same seed, same checkpoint.
  const auto checker2 = d.file("c2.htec");
  REQUIRE(run_htec({"train", "checker", "--corpus", corpus, "--config", train_cfg, "--model-config", model_cfg,
                "--epochs", "2", "--seed", "4", "-o", checker2})
              .code == 0);
  CHECK(slurp(checker) == slurp(checker2));

  REQUIRE(run_htec({"train", "filler", "--mode", "ar", "--corpus", corpus, "--config", train_cfg, "--model-config",
                model_cfg, "--epochs", "1", "--augment", "1", "-o", filler})
              .code == 0);
  CHECK(run_htec({"train", "checker", "--corpus", corpus, "--config", d.file("bad.json", R"({"batch":1})"), "-o",
              d.file("x.htec")})
            .code == htec::cli::kExitUsage);

  const auto c = run_htec({"check", "--model", checker, "--in", corpus, "--mode", "copilot", "--jobs", "2"});
  REQUIRE(c.code == 0);
  const auto checked = json_lines(c.out);
  REQUIRE(checked.size() == 40);
  CHECK(checked[7]["id"] == "7");

  const auto masked = d.file("masked.jsonl", R"({"id":"m","words":["play","?","?","by","?"]})"
                                             "\n");
  const auto f = run_htec({"fill", "--model", filler, "--in", masked, "--n-best", "1"});
  REQUIRE(f.code == 0);
  const auto filled = json_lines(f.out).at(0);
  CHECK(filled["fills"].size() == 3);
  CHECK(filled["fills"][0]["candidates"].size() == 1);
  CHECK(run_htec({"fill", "--model", filler, "--in", masked, "--mode", "nar"}).code == htec::cli::kExitModel);
  CHECK(run_htec({"fill", "--model", checker, "--in", masked}).code == htec::cli::kExitModel);

  const auto r = run_htec({"correct", "--checker", checker, "--filler", filler, "--in", corpus, "--gold", "--threshold",
                       "1.0", "--jobs", "3"});
  REQUIRE(r.code == 0);
  for (const auto& j : json_lines(r.out)) CHECK(j["corrected"] == j["annotator"]);

  const auto m = run_htec({"simulate-mcr", "--checker", checker, "--filler", filler, "--in", corpus, "--mcr", "1", "--seeds",
                       "2", "--seed", "9"});
  REQUIRE(m.code == 0);
  const auto mcr = json_lines(m.out);
  REQUIRE(mcr.size() == 3);
  CHECK(mcr[0]["seed"] == 9);
  CHECK(mcr[2]["mean_wer"].get<double>() == 0.0);
}
