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

#include <random>

#include "htec/align.hpp"
#include "htec/errors.hpp"
#include "htec/phoneme.hpp"
#include "oracles.hpp"

using namespace htec;
using L = EditLabel;

namespace {

std::vector<int> op_codes(const Alignment& al) {
  std::vector<int> out;
  for (const auto& s : al.steps) {
    out.push_back(s.op == AlignOp::kDelete ? 1 : s.op == AlignOp::kInsert ? 2 : 0);
  }
  return out;
}

oracle::SubCost homophone_sub() {
  return [](const std::string& x, const std::string& y) {
    if (x == y) return 0.0;
    return Phonemizer::shared().homophone(x, y) ? 0.6 : 1.0;
  };
}

const oracle::Words kAlphabet{"a", "the", "news", "play", "two", "too", "one", "on", "me", "my"};

}  // namespace

TEST_CASE("worked example alignment") {
  auto al = align_words(tokenize("give my latest muse"), tokenize("give me the latest news"));
  REQUIRE(al.steps.size() == 5);
  CHECK(al.steps[0].op == AlignOp::kMatch);
  CHECK(al.steps[1].op == AlignOp::kSubstitute);
  CHECK(al.steps[1].a_index == 1);
  CHECK(al.steps[1].g_index == 1);
  CHECK(al.steps[2].op == AlignOp::kInsert);
  CHECK(al.steps[2].g_index == 2);
  CHECK(al.steps[3].op == AlignOp::kMatch);
  CHECK(al.steps[4].op == AlignOp::kSubstitute);
  CHECK(al.cost == doctest::Approx(3.0));
}

TEST_CASE("insertion of a spelled-out token") {
  auto al = align_words(tokenize("order AAA battery"), tokenize("order triple A. battery"));
  CHECK(op_codes(al) == std::vector<int>{0, 0, 2, 0});
  CHECK(al.steps[1].op == AlignOp::kSubstitute);
  CHECK(al.cost == doctest::Approx(2.0));
}

TEST_CASE("homophone substitutions are discounted") {
  auto al = align_words(tokenize("play two songs"), tokenize("play too songs"));
  CHECK(al.cost == doctest::Approx(0.6));
  AlignOptions plain;
  plain.homophone_aware = false;
  CHECK(align_words(tokenize("play two songs"), tokenize("play too songs"), plain).cost == doctest::Approx(1.0));
}

TEST_CASE("identity alignment") {
  auto t = tokenize("set an alarm for seven");
  auto al = align_words(t, t);
  CHECK(al.cost == 0.0);
  for (const auto& s : al.steps) CHECK(s.op == AlignOp::kMatch);
  auto pair = derive_labels(t, t);
  for (auto l : pair.labels) CHECK(l == L::K);
  for (const auto& f : pair.fills) CHECK(f.empty());
}

TEST_CASE("worked example labels and masking") {
  auto pair = derive_labels(tokenize("give my latest muse"), tokenize("give me the latest news"));
  CHECK(pair.labels == std::vector<L>{L::K, L::SR, L::K, L::S});
  CHECK(pair.fills[1].substitute == "me");
  CHECK(pair.fills[1].right_insert == std::vector<std::string>{"the"});
  CHECK(pair.fills[3].substitute == "news");
  CHECK(pair.fills[0].empty());
  CHECK(apply_labels(pair).text() == "give me the latest news");

  auto masked = labels_to_masked(pair.annotator, pair.labels);
  CHECK(masked.masked.transcript.text() == "give <mask> <mask> latest <mask>");
  CHECK(masked.masked.mask_positions == std::vector<std::size_t>{1, 2, 4});
  CHECK(masked.slots[0] == MaskSlot{1, MaskSlot::Kind::kSubstitute});
  CHECK(masked.slots[1] == MaskSlot{1, MaskSlot::Kind::kRightInsert});
  CHECK(masked.slots[2] == MaskSlot{3, MaskSlot::Kind::kSubstitute});
  CHECK(mask_count(pair.labels) == 3);

  auto expanded = labels_to_masked_expanded(pair);
  CHECK(expanded.masked.transcript == masked.masked.transcript);
  CHECK(slot_gold(pair.fills[1], masked.slots[1], false) == std::vector<std::string>{"the"});
}

TEST_CASE("sentence-start insertion attaches to the first word") {
  auto pair = derive_labels(tokenize("me the news"), tokenize("give me the news"));
  CHECK(pair.labels == std::vector<L>{L::KL, L::K, L::K});
  CHECK(pair.fills[0].left_insert == std::vector<std::string>{"give"});
  CHECK(labels_to_masked(pair.annotator, pair.labels).masked.transcript.text() == "<mask> me the news");
}

TEST_CASE("right-side insertions attach to the left neighbour") {
  auto pair = derive_labels(tokenize("play news"), tokenize("play the latest news"));
  CHECK(pair.labels == std::vector<L>{L::KR, L::K});
  CHECK(pair.fills[0].right_insert == std::vector<std::string>{"the", "latest"});
  auto one = labels_to_masked(pair.annotator, pair.labels);
  CHECK(one.masked.transcript.text() == "play <mask> news");
  auto many = labels_to_masked_expanded(pair);
  CHECK(many.masked.transcript.text() == "play <mask> <mask> news");
  CHECK(slot_gold(pair.fills[0], many.slots[1], true) == std::vector<std::string>{"latest"});
  CHECK(slot_gold(pair.fills[0], one.slots[0], false) == std::vector<std::string>{"the", "latest"});
}

TEST_CASE("inserts on both sides of a word are re-attached") {
  auto mid = derive_labels(tokenize("b d"), tokenize("a b c d"));
  CHECK(mid.labels == std::vector<L>{L::KL, L::KL});
  CHECK(mid.fills[1].left_insert == std::vector<std::string>{"c"});
  CHECK(apply_labels(mid).text() == "a b c d");

  auto last = derive_labels(tokenize("b"), tokenize("a b c"));
  CHECK(last.labels == std::vector<L>{L::SR});
  CHECK(last.fills[0].substitute == "a");
  CHECK(last.fills[0].right_insert == std::vector<std::string>{"b", "c"});
  CHECK(apply_labels(last).text() == "a b c");
}

TEST_CASE("delete labels drop the word without a mask") {
  auto a = tokenize("the the");
  std::vector<L> labels{L::D, L::K};
  auto m = labels_to_masked(a, labels);
  CHECK(m.masked.transcript.text() == "the");
  CHECK(m.masked.mask_positions.empty());
  CHECK(derive_labels(a, tokenize("the")).labels.size() == 2);
}

TEST_CASE("validation rejects inconsistent fill records") {
  auto pair = derive_labels(tokenize("give my latest muse"), tokenize("give me the latest news"));
  pair.fills[0].substitute = "take";
  CHECK_THROWS_AS(apply_labels(pair), Error);
  pair.fills[0].substitute.reset();
  pair.fills[3].left_insert = {"x"};
  CHECK_THROWS_AS(validate(pair), Error);
  pair.fills[3].left_insert.clear();
  pair.labels.pop_back();
  CHECK_THROWS_AS(validate(pair), Error);
  std::vector<L> too_few{L::K};
  CHECK_THROWS_AS(labels_to_masked(tokenize("a b"), too_few), Error);
}

TEST_CASE("label codes round-trip") {
  for (auto l : kAllLabels) CHECK(parse_label(label_code(l)) == l);
  CHECK_THROWS_AS(parse_label("I"), Error);
}

TEST_CASE("mask count formula holds for arbitrary label sequences") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> pick(0, 6);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<std::string> words(1 + trial % 9, "w");
    std::vector<L> labels(words.size());
    std::size_t expect = 0;
    for (auto& l : labels) {
      l = static_cast<L>(pick(rng));
      expect += l == L::S || l == L::KL || l == L::KR ? 1 : l == L::SL || l == L::SR ? 2 : 0;
    }
    auto m = labels_to_masked(Transcript::from_words(words), labels);
    CHECK(m.masked.mask_positions.size() == expect);
    CHECK(mask_count(labels) == expect);
  }
}

TEST_CASE("alignment cost matches the recursive oracle") {
  std::mt19937_64 rng(2024);
  const auto sub = homophone_sub();
  for (int trial = 0; trial < 300; ++trial) {
    auto a = oracle::random_words(rng, 8, kAlphabet);
    auto g = oracle::random_words(rng, 8, kAlphabet);
    auto al = align_words(Transcript::from_words(a), Transcript::from_words(g));
    CHECK(al.cost == doctest::Approx(oracle::edit_cost(a, g, sub)).epsilon(1e-12));
    double path_cost = 0;
    for (const auto& s : al.steps) {
      path_cost += s.op == AlignOp::kMatch ? 0.0
                   : s.op == AlignOp::kSubstitute ? sub(a[s.a_index], g[s.g_index])
                                                  : 1.0;
    }
    CHECK(path_cost == doctest::Approx(al.cost));
  }
}

TEST_CASE("tie-breaking picks the earliest preferred step among optimal paths") {
  std::mt19937_64 rng(7);
  const auto sub = homophone_sub();
  for (int trial = 0; trial < 200; ++trial) {
    auto a = oracle::random_words(rng, 4, kAlphabet);
    auto g = oracle::random_words(rng, 4, kAlphabet);
    auto paths = oracle::all_paths(a, g, sub);
    double best = 1e9;
    for (const auto& p : paths) best = std::min(best, p.cost);
    std::vector<int> expected;
    bool first = true;
    for (const auto& p : paths) {
      if (std::abs(p.cost - best) > 1e-9) continue;
      if (first || p.ops < expected) expected = p.ops;
      first = false;
    }
    CHECK(op_codes(align_words(Transcript::from_words(a), Transcript::from_words(g))) == expected);
  }
}

TEST_CASE("derive_labels round-trips random pairs") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 2000; ++trial) {
    auto a = oracle::random_words(rng, 8, kAlphabet, 1);
    auto g = oracle::random_words(rng, 8, kAlphabet);
    auto pair = derive_labels(Transcript::from_words(a), Transcript::from_words(g));
    REQUIRE(pair.labels.size() == a.size());
    CHECK_NOTHROW(validate(pair));
    CHECK(apply_labels(pair).words == g);
    // Expanded masking has one mask per gold word to produce.
    std::size_t produced = 0;
    for (const auto& f : pair.fills) produced += (f.substitute ? 1 : 0) + f.left_insert.size() + f.right_insert.size();
    CHECK(labels_to_masked_expanded(pair).masked.mask_positions.size() == produced);
  }
}
