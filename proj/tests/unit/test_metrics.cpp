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

#include "htec/errors.hpp"
#include "htec/metrics.hpp"
#include "oracles.hpp"

using namespace htec;
using L = EditLabel;

namespace {

const oracle::Words kAlphabet{"a", "b", "c", "d", "e"};

// Pairwise definition of the ROC area: P(score_pos > score_neg) + ties / 2.
double pairwise_auc(const std::vector<double>& s, const std::vector<bool>& pos) {
  double num = 0, den = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      if (pos[i] && !pos[j]) {
        den += 1;
        num += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
      }
  return num / den;
}

}  // namespace

TEST_CASE("worked example WER before and after filling") {
  const auto gold = tokenize("give me the latest news");
  auto before = wer(tokenize("give my latest muse"), gold);
  CHECK(before.wer == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(before.errors() == 3);
  auto after = wer(tokenize("give me some latest news"), gold);
  CHECK(after.wer == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(after.substitutions == 1);
  CHECK(wer(gold, gold).wer == 0.0);
}

TEST_CASE("WER edge cases and options") {
  CHECK_THROWS_AS(wer(tokenize("a"), Transcript{}), Error);
  auto empty_hyp = wer(Transcript{}, tokenize("a b c"));
  CHECK(empty_hyp.wer == 1.0);
  CHECK(empty_hyp.deletions == 3);

  Transcript upper = Transcript::from_words({"Play", "News."});
  Transcript lower = Transcript::from_words({"play", "news"});
  CHECK(wer(upper, lower).errors() == 1);
  WerOptions strict;
  strict.ignore_case = false;
  CHECK(wer(upper, lower, strict).errors() == 2);
  WerOptions loose;
  loose.ignore_punctuation = true;
  CHECK(wer(upper, lower, loose).errors() == 0);
}

TEST_CASE("WER matches the Levenshtein oracle and swaps I/D symmetrically") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 500; ++trial) {
    auto h = oracle::random_words(rng, 8, kAlphabet, 1);
    auto r = oracle::random_words(rng, 8, kAlphabet, 1);
    auto fwd = wer(Transcript::from_words(h), Transcript::from_words(r));
    auto rev = wer(Transcript::from_words(r), Transcript::from_words(h));
    CHECK(fwd.errors() == oracle::word_errors(h, r));
    CHECK(fwd.hits + fwd.substitutions + fwd.deletions == r.size());
    CHECK(fwd.hits + fwd.substitutions + fwd.insertions == h.size());
    CHECK(fwd.substitutions == rev.substitutions);
    CHECK(fwd.insertions == rev.deletions);
    CHECK(fwd.deletions == rev.insertions);
  }
}

TEST_CASE("corpus WER pools counts") {
  WerBreakdown total;
  total += wer(tokenize("a b"), tokenize("a c"));
  total += wer(tokenize("x y z w"), tokenize("x y z w"));
  CHECK(total.reference_length == 6);
  CHECK(total.wer == doctest::Approx(1.0 / 6.0));
}

TEST_CASE("checker metrics on the worked example") {
  const std::vector<L> truth{L::K, L::SR, L::K, L::S};
  // Error words give, my and muse flagged.
  const std::vector<L> pred{L::S, L::S, L::K, L::S};
  auto m = checker_metrics(pred, truth);
  CHECK(m.precision == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(m.recall == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(m.macro_f1 >= 0.0);
  CHECK(m.macro_f1 <= 1.0);

  auto perfect = checker_metrics(truth, truth);
  CHECK(perfect.precision == 1.0);
  CHECK(perfect.recall == 1.0);
  CHECK(perfect.macro_f1 == 1.0);
  REQUIRE(perfect.auc.has_value());
  CHECK(*perfect.auc == 1.0);

  const std::vector<L> all_k(4, L::K);
  CHECK_FALSE(checker_metrics(all_k, all_k).auc.has_value());

  const std::vector<L> shorter{L::K};
  CHECK_THROWS_AS(checker_metrics(shorter, truth), Error);
}

TEST_CASE("AUC agrees with the pairwise definition") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> coarse(0, 4);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> s(20);
    std::vector<bool> pos(20);
    for (std::size_t i = 0; i < s.size(); ++i) {
      s[i] = coarse(rng) / 4.0;  // coarse grid forces ties
      pos[i] = (rng() & 1U) != 0;
    }
    pos[0] = true;
    pos[1] = false;
    auto auc = roc_auc(s, pos);
    REQUIRE(auc.has_value());
    CHECK(*auc == doctest::Approx(pairwise_auc(s, pos)).epsilon(1e-12));
    CHECK(*auc >= 0.0);
    CHECK(*auc <= 1.0);
  }
}

TEST_CASE("filler metrics") {
  std::vector<std::vector<std::string>> fills{{"me"}, {"some"}, {"news"}};
  std::vector<std::vector<std::string>> gold{{"me"}, {"the"}, {"news"}};
  auto m = filler_metrics(fills, gold);
  CHECK(*m.precision == doctest::Approx(2.0 / 3.0));
  CHECK(*m.recall == doctest::Approx(2.0 / 3.0));
  CHECK(*m.f1 == doctest::Approx(2.0 / 3.0));

  auto none = filler_metrics({}, {});
  CHECK_FALSE(none.precision.has_value());
  CHECK_FALSE(none.recall.has_value());

  auto all = filler_metrics(gold, gold);
  CHECK(*all.precision == 1.0);
  CHECK(*all.recall == 1.0);
}

TEST_CASE("automatable predicate") {
  CHECK(automatable(0.05, 0.10));
  CHECK_FALSE(automatable(0.10, 0.10));
}
