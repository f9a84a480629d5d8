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

#include <cmath>
#include <numeric>

#include "fixtures.hpp"
#include "htec/errors.hpp"
#include "htec/training.hpp"

using namespace htec;
using htec::testing::tiny_bundle;
using htec::testing::toy_corpus;
using htec::testing::utterance;
using tensor::Tensor;

namespace {

TrainConfig quick_config() {
  TrainConfig c;
  c.batch_size = 2;
  c.max_epochs = 3;
  c.patience = 10;
  c.validation_fraction = 0.0;
  c.learning_rate = 1e-2;
  c.warmup_steps = 0;
  return c;
}

}  // namespace

TEST_CASE("learning rate schedule warms up then decays") {
  TrainConfig c;
  c.learning_rate = 1.0;
  c.warmup_steps = 100;
  CHECK(c.rate_at(50) == doctest::Approx(0.5));
  CHECK(c.rate_at(100) == doctest::Approx(1.0));
  CHECK(c.rate_at(400) == doctest::Approx(0.5));
  c.warmup_steps = 0;
  CHECK(c.rate_at(1000) == 1.0);
}

TEST_CASE("train config parsing") {
  const auto c = parse_train_config(R"({"batch_size": 8, "class_weighting": "inverse-frequency", "seed": 3})");
  CHECK(c.batch_size == 8);
  CHECK(c.class_weighting == ClassWeighting::kInverseFrequency);
  CHECK(c.seed == 3);
  CHECK(c.max_epochs == TrainConfig{}.max_epochs);
  CHECK_THROWS_AS(parse_train_config(R"({"batchsize": 8})"), Error);
  CHECK_THROWS_AS(parse_train_config(R"({"validation_fraction": 1.5})"), Error);
  CHECK_THROWS_AS(parse_train_config("not json"), Error);
}

TEST_CASE("validation split holds out the tail") {
  const auto s = split_indices(10, 0.2);
  CHECK(s.train == std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7});
  CHECK(s.validation == std::vector<std::size_t>{8, 9});
  CHECK(split_indices(10, 0.0).validation.empty());
}

TEST_CASE("AR filler samples replace earlier masks with gold") {
  const auto pair = derive_labels(tokenize("give my latest muse"), tokenize("give me the latest news"));
  const auto s = filler_samples(pair, std::nullopt, DecodeMode::kAR);
  REQUIRE(s.size() == 3);
  CHECK(s[0].masked.text() == "give <mask> <mask> latest <mask>");
  CHECK(s[0].target_masks == std::vector<std::size_t>{1});
  CHECK(s[1].masked.text() == "give me <mask> latest <mask>");
  CHECK(s[1].target_masks == std::vector<std::size_t>{2});
  CHECK(s[2].masked.text() == "give me the latest <mask>");
  CHECK(s[2].target_masks == std::vector<std::size_t>{4});
  CHECK(s[0].targets[0] == std::vector<std::string>{"me"});
  CHECK(s[1].targets[0] == std::vector<std::string>{"the"});
  CHECK(s[2].targets[0] == std::vector<std::string>{"news"});
}

TEST_CASE("AR filler samples keep multi-word inserts in one target") {
  const auto pair = derive_labels(tokenize("play music"), tokenize("play some jazz music"));
  const auto s = filler_samples(pair, std::nullopt, DecodeMode::kAR);
  REQUIRE(s.size() == 1);
  CHECK(s[0].targets[0] == std::vector<std::string>{"some", "jazz"});
}

TEST_CASE("NAR filler samples expand inserts to one mask per word") {
  const auto pair = derive_labels(tokenize("play music"), tokenize("play some jazz music"));
  const auto s = filler_samples(pair, std::nullopt, DecodeMode::kNAR);
  REQUIRE(s.size() == 1);
  CHECK(s[0].masked.text() == "play <mask> <mask> music");
  CHECK(s[0].targets.size() == 2);
  CHECK(s[0].targets[0] == std::vector<std::string>{"some"});
  CHECK(s[0].targets[1] == std::vector<std::string>{"jazz"});
}

TEST_CASE("error-free pairs yield no filler samples") {
  const auto pair = derive_labels(tokenize("all good here"), tokenize("all good here"));
  CHECK(filler_samples(pair, std::nullopt, DecodeMode::kAR).empty());
  CHECK(filler_samples(pair, std::nullopt, DecodeMode::kNAR).empty());
}

TEST_CASE("two-gram augmentation masks one adjacent pair") {
  const std::vector<Transcript> gold{tokenize("a b c d"), tokenize("too short"), tokenize("x y z")};
  const auto s = augment_two_gram(gold, 5, 11);
  CHECK(s.size() == 10);
  for (const auto& x : s) {
    CHECK(x.target_masks.size() == 1);
    CHECK(x.targets[0].size() == 2);
    auto words = x.masked.words;
    const auto m = x.target_masks[0];
    words.erase(words.begin() + static_cast<std::ptrdiff_t>(m));
    words.insert(words.begin() + static_cast<std::ptrdiff_t>(m), x.targets[0].begin(), x.targets[0].end());
    const auto t = Transcript::from_words(words);
    CHECK((t == gold[0] || t == gold[2]));
  }
  const auto again = augment_two_gram(gold, 5, 11);
  for (std::size_t i = 0; i < s.size(); ++i) CHECK(again[i].masked == s[i].masked);
}

TEST_CASE("inverse-frequency class weights have mean one over present classes") {
  const auto ds = make_checker_dataset(toy_corpus(), quick_config());
  const auto w = class_weights(ds.train, ClassWeighting::kInverseFrequency);
  std::array<std::size_t, kLabelCount> counts{};
  for (const auto& s : ds.train)
    for (auto l : s.labels) ++counts[static_cast<std::size_t>(l)];
  double sum = 0;
  int present = 0;
  for (std::size_t c = 0; c < kLabelCount; ++c) {
    if (counts[c]) {
      sum += w[c];
      ++present;
    } else {
      CHECK(w[c] == 1.0);
    }
  }
  CHECK(sum / present == doctest::Approx(1.0));
  CHECK(w[static_cast<std::size_t>(EditLabel::K)] < w[static_cast<std::size_t>(EditLabel::S)]);
  const auto u = class_weights(ds.train, ClassWeighting::kUniform);
  for (double x : u) CHECK(x == 1.0);
}

TEST_CASE("datasets exclude over-length utterances and need annotator text") {
  auto corpus = toy_corpus();
  std::string longtext;
  for (int i = 0; i < 70; ++i) longtext += "w ";
  corpus.push_back(utterance("long", longtext, longtext));
  const auto ds = make_checker_dataset(corpus, quick_config());
  CHECK(ds.excluded == 1);
  CHECK(ds.train.size() == 4);
  corpus.back().annotator.reset();
  CHECK_THROWS_AS(make_checker_dataset(corpus, quick_config()), Error);
}

TEST_CASE("full checker loss matches finite differences") {
  auto b = tiny_bundle(ModelKind::kChecker);
  const auto ds = make_checker_dataset(toy_corpus(), quick_config());
  const std::array<double, kLabelCount> w{1.0, 2.0, 1.5, 0.5, 1.0, 3.0, 2.5};
  auto params = b.parameter_tensors();
  const auto err = tensor::grad_check(
      [&] { return tensor::add(checker_loss(b, ds.train[0], w), checker_loss(b, ds.train[1], w)); }, params, 1e-5, 6);
  CHECK(err < 1e-4);
}

TEST_CASE("full filler loss matches finite differences in both modes") {
  for (auto mode : {DecodeMode::kAR, DecodeMode::kNAR}) {
    auto b = tiny_bundle(ModelKind::kFiller, mode);
    auto cfg = quick_config();
    const auto ds = make_filler_dataset(toy_corpus(), mode, cfg);
    REQUIRE(ds.train.size() >= 2);
    auto params = b.parameter_tensors();
    const auto err = tensor::grad_check(
        [&] { return tensor::add(filler_loss(b, ds.train[0]), filler_loss(b, ds.train[1])); }, params, 1e-5, 6);
    CHECK(err < 1e-4);
  }
}

TEST_CASE("checker training reduces loss and restores the best epoch") {
  auto b = tiny_bundle(ModelKind::kChecker);
  auto cfg = quick_config();
  cfg.max_epochs = 15;
  const auto ds = make_checker_dataset(toy_corpus(), cfg);
  const auto before = b.version();
  std::vector<double> losses;
  const auto r = train_checker(b, ds, cfg, [&](const EpochRecord& e) { losses.push_back(e.train_loss); });
  CHECK(r.history.size() == 15);
  CHECK(losses.back() < losses.front());
  CHECK(r.best_epoch >= 1);
  CHECK(b.version() != before);
  CHECK(r.steps == 15 * 2);
}

TEST_CASE("training is deterministic for a fixed seed") {
  auto cfg = quick_config();
  const auto ds = make_checker_dataset(toy_corpus(), cfg);
  auto a = tiny_bundle(ModelKind::kChecker);
  auto b = tiny_bundle(ModelKind::kChecker);
  train_checker(a, ds, cfg);
  train_checker(b, ds, cfg);
  CHECK(a.version() == b.version());
}

TEST_CASE("early stopping halts after patience epochs without improvement") {
  auto b = tiny_bundle(ModelKind::kChecker);
  auto cfg = quick_config();
  cfg.max_epochs = 20;
  cfg.patience = 2;
  cfg.learning_rate = 0.0;
  const auto ds = make_checker_dataset(toy_corpus(), cfg);
  const auto r = train_checker(b, ds, cfg);
  CHECK(r.early_stopped);
  CHECK(r.history.size() == 3);
  CHECK(r.best_epoch == 1);
}

TEST_CASE("divergence restores the last good weights") {
  auto b = tiny_bundle(ModelKind::kChecker);
  const auto before = checkpoint_bytes(b);
  auto cfg = quick_config();
  std::size_t calls = 0;
  auto loss = [&](std::size_t) {
    ++calls;
    // A finite first batch updates the weights, then the loss blows up.
    return calls <= 2 ? tensor::sum(tensor::mul(b.param("head.b2"), b.param("head.b2")))
                      : tensor::scale(tensor::sum(b.param("head.b2")), NAN);
  };
  try {
    train_model(b, 4, loss, 0, loss, cfg);
    FAIL("expected DivergedError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDiverged);
  }
  CHECK(checkpoint_bytes(b) == before);
}

TEST_CASE("filler training raises teacher-forced accuracy") {
  for (auto mode : {DecodeMode::kAR, DecodeMode::kNAR}) {
    auto b = tiny_bundle(ModelKind::kFiller, mode);
    auto cfg = quick_config();
    cfg.max_epochs = 40;
    cfg.learning_rate = 3e-2;
    const auto ds = make_filler_dataset(toy_corpus(), mode, cfg);
    const double before = filler_accuracy(b, ds.train);
    train_filler(b, ds, cfg);
    const double after = filler_accuracy(b, ds.train);
    CHECK(after > before);
    CHECK(after >= 0.5);
  }
}
