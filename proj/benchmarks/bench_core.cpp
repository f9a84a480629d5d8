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

#include <benchmark/benchmark.h>

#include <random>

#include "htec/align.hpp"
#include "htec/checker.hpp"
#include "htec/filler.hpp"
#include "htec/metrics.hpp"
#include "htec/synth.hpp"
#include "htec/tensor.hpp"
#include "htec/training.hpp"

namespace {

using namespace htec;

std::vector<Utterance> corpus(std::size_t n) {
  const auto gold = TemplateGrammar::shared().generate(n, 1);
  return make_triples(gold, NoiseProfile::human(0.15), NoiseProfile::asr(0.15), 1);
}

void BM_Wer(benchmark::State& state) {
  const auto c = corpus(256);
  std::size_t i = 0;
  for (auto _ : state) {
    const auto& u = c[i++ % c.size()];
    benchmark::DoNotOptimize(wer(*u.annotator, *u.gold));
  }
}
BENCHMARK(BM_Wer);

void BM_DeriveLabels(benchmark::State& state) {
  const auto c = corpus(256);
  std::size_t i = 0;
  for (auto _ : state) {
    const auto& u = c[i++ % c.size()];
    benchmark::DoNotOptimize(derive_labels(*u.annotator, *u.gold));
  }
}
BENCHMARK(BM_DeriveLabels);

void BM_Corrupt(benchmark::State& state) {
  const auto gold = TemplateGrammar::shared().generate(256, 2);
  const auto profile = NoiseProfile::human();
  std::uint64_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(Synthesizer::shared().corrupt(gold[i % gold.size()], profile, i));
    ++i;
  }
}
BENCHMARK(BM_Corrupt);

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<double> a(n * n), b(n * n);
  for (auto& x : a) x = u(rng);
  for (auto& x : b) x = u(rng);
  const auto ta = tensor::Tensor::from({n, n}, a);
  const auto tb = tensor::Tensor::from({n, n}, b);
  tensor::NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(tensor::matmul(ta, tb));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(64)->Arg(128);

ModelConfig bench_config(ModelKind kind, std::size_t vocab) {
  ModelConfig c;
  c.kind = kind;
  c.layers_enc = 2;
  c.layers_dec = 1;
  c.model_dim = 64;
  c.heads = 4;
  c.ff_dim = 128;
  c.phoneme_dim = 16;
  c.vocab_size = vocab;
  return c;
}

void BM_CheckerForward(benchmark::State& state) {
  const auto c = corpus(64);
  auto vocab = corpus_vocab(c, 1);
  const auto n = vocab.size();
  const auto b = ModelBundle::create(bench_config(ModelKind::kChecker, n), std::move(vocab));
  std::size_t i = 0;
  for (auto _ : state) {
    const auto& u = c[i++ % c.size()];
    benchmark::DoNotOptimize(check(b, *u.annotator, u.asr_or_null()));
  }
}
BENCHMARK(BM_CheckerForward);

void BM_CheckerTrainStep(benchmark::State& state) {
  const auto c = corpus(64);
  auto vocab = corpus_vocab(c, 1);
  const auto n = vocab.size();
  const auto b = ModelBundle::create(bench_config(ModelKind::kChecker, n), std::move(vocab));
  TrainConfig cfg;
  cfg.validation_fraction = 0;
  const auto data = make_checker_dataset(c, cfg);
  std::size_t i = 0;
  for (auto _ : state) {
    auto loss = checker_loss(b, data.train[i++ % data.train.size()]);
    loss.backward();
    for (auto p : b.parameter_tensors()) p.zero_grad();
  }
}
BENCHMARK(BM_CheckerTrainStep);

void BM_FillNar(benchmark::State& state) {
  const auto c = corpus(64);
  auto vocab = corpus_vocab(c, 1);
  const auto n = vocab.size();
  const auto b = ModelBundle::create(bench_config(ModelKind::kFiller, n), std::move(vocab));
  const auto masked = parse_uncertain(tokenize("play ? ? by ? on spotify")).transcript;
  for (auto _ : state) benchmark::DoNotOptimize(fill(b, masked, nullptr, 3));
}
BENCHMARK(BM_FillNar);

}  // namespace

BENCHMARK_MAIN();
