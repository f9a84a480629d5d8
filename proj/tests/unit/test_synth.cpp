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

#include <fstream>
#include <sstream>

#include "htec/align.hpp"
#include "htec/errors.hpp"
#include "htec/metrics.hpp"
#include "htec/synth.hpp"

using namespace htec;

namespace {

struct Mix {
  double sub = 0, ins = 0, del = 0, wer = 0;
  std::size_t errors = 0;
};

// Measures the realized mix through the word alignment, not the generator's
// own event log.
Mix measure(const std::vector<Transcript>& gold, const NoiseProfile& profile, std::uint64_t seed) {
  WerBreakdown total;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const auto noisy = Synthesizer::shared().corrupt(gold[i], profile, seed + i);
    total += wer(noisy, gold[i]);
  }
  Mix m;
  m.errors = total.errors();
  m.sub = static_cast<double>(total.substitutions) / static_cast<double>(m.errors);
  m.ins = static_cast<double>(total.insertions) / static_cast<double>(m.errors);
  m.del = static_cast<double>(total.deletions) / static_cast<double>(m.errors);
  m.wer = total.wer;
  return m;
}

}  // namespace

TEST_CASE("profiles are normalized mixes") {
  const auto h = NoiseProfile::human();
  CHECK(h.type_mix[0] == doctest::Approx(0.350));
  CHECK(h.type_mix[1] == doctest::Approx(0.373));
  CHECK(h.type_mix[2] == doctest::Approx(0.277));
  CHECK(h.cause_mix[4] == doctest::Approx(0.5041).epsilon(1e-3));
  const auto a = NoiseProfile::asr();
  double s = 0;
  for (double x : a.type_mix) s += x;
  CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(a.type_mix[2] > a.type_mix[1]);

  NoiseProfile bad = h;
  bad.type_mix[0] += 0.01;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = h;
  bad.rate = 0.6;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("rate zero is the identity") {
  const auto gold = TemplateGrammar::shared().generate(200, 3);
  for (std::size_t i = 0; i < gold.size(); ++i)
    CHECK(Synthesizer::shared().corrupt(gold[i], NoiseProfile::human(0.0), i) == gold[i]);
}

TEST_CASE("corruption is deterministic per stream") {
  const auto g = tokenize("when was my last amazon order");
  const auto p = NoiseProfile::human(0.3);
  for (std::uint64_t s = 0; s < 50; ++s)
    CHECK(Synthesizer::shared().corrupt(g, p, s) == Synthesizer::shared().corrupt(g, p, s));
}

TEST_CASE("realized type mix follows the profile") {
  const auto gold = TemplateGrammar::shared().generate(6000, 11);
  const auto h = measure(gold, NoiseProfile::human(), 100);
  CHECK(h.errors >= 3000);
  CHECK(h.sub == doctest::Approx(0.350).epsilon(0.03 / 0.350));
  CHECK(h.ins == doctest::Approx(0.373).epsilon(0.03 / 0.373));
  CHECK(h.del == doctest::Approx(0.277).epsilon(0.03 / 0.277));
  CHECK(h.wer == doctest::Approx(0.10).epsilon(0.15));
}

TEST_CASE("misheard substitutions stay within one phoneme edit") {
  NoiseProfile p = NoiseProfile::from_weights(0.3, {1, 0, 0}, {0, 0, 0, 0, 1});
  const auto gold = TemplateGrammar::shared().generate(300, 5);
  const auto& ph = Phonemizer::shared();
  std::size_t misheard = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    std::vector<CorruptionEvent> events;
    const auto noisy = Synthesizer::shared().corrupt(gold[i], p, i, &events);
    REQUIRE(noisy.size() == gold[i].size());
    for (const auto& e : events) {
      REQUIRE(e.cause.has_value());
      if (*e.cause != ErrorCause::kMisheard) continue;
      ++misheard;
      const auto a = ph.phonemes(gold[i].words[e.gold_index]);
      const auto b = ph.phonemes(noisy.words[e.gold_index]);
      // Phoneme edit distance via the word-level WER on phoneme symbols.
      std::vector<std::string> sa, sb;
      for (auto x : a) sa.push_back(std::to_string(x));
      for (auto x : b) sb.push_back(std::to_string(x));
      CHECK(wer(Transcript::from_words(sb), Transcript::from_words(sa)).errors() <= 1);
      CHECK(noisy.words[e.gold_index] != gold[i].words[e.gold_index]);
    }
  }
  CHECK(misheard > 50);
}

TEST_CASE("grammatical and entity substitutions come from the confusion table") {
  const auto& synth = Synthesizer::shared();
  NoiseProfile p = NoiseProfile::from_weights(0.3, {1, 0, 0}, {0, 0, 1, 0, 0});
  const auto g = tokenize("give me the latest news");
  bool saw_my = false;
  for (std::uint64_t s = 0; s < 200 && !saw_my; ++s) {
    const auto out = synth.corrupt(g, p, s);
    saw_my = out.words[1] == "my";
  }
  CHECK(saw_my);
}

TEST_CASE("corrupted text never contains special tokens and always round-trips") {
  const auto gold = TemplateGrammar::shared().generate(1500, 9);
  const auto triples = make_triples(gold, NoiseProfile::human(0.2), NoiseProfile::asr(0.2), 4);
  for (const auto& u : triples) {
    for (const auto* t : {&*u.annotator, &*u.asr}) {
      REQUIRE_FALSE(t->empty());
      for (const auto& w : t->words) CHECK((w.empty() || w.front() != '<'));
    }
    const auto pair = derive_labels(*u.annotator, *u.gold);
    CHECK(apply_labels(pair) == *u.gold);
  }
}

TEST_CASE("make_triples is reproducible and channel-specific") {
  const auto gold = TemplateGrammar::shared().generate(3000, 1);
  const auto a = make_triples(gold, NoiseProfile::human(), NoiseProfile::asr(), 7);
  const auto b = make_triples(gold, NoiseProfile::human(), NoiseProfile::asr(), 7);
  std::ostringstream sa, sb;
  write_corpus(sa, a);
  write_corpus(sb, b);
  CHECK(sa.str() == sb.str());

  double gold_len = 0, ann_len = 0, asr_len = 0;
  for (const auto& u : a) {
    gold_len += static_cast<double>(u.gold->size());
    ann_len += static_cast<double>(u.annotator->size());
    asr_len += static_cast<double>(u.asr->size());
  }
  CHECK(ann_len > gold_len);
  CHECK(asr_len < gold_len);
}

TEST_CASE("template grammar expands every slot") {
  const auto& g = TemplateGrammar::shared();
  CHECK(g.template_count() > 100);
  const auto s = g.generate(500, 2);
  for (const auto& t : s) {
    CHECK_FALSE(t.empty());
    for (const auto& w : t.words) CHECK(w.find_first_of("{}") == std::string::npos);
  }
  CHECK(g.generate(50, 2)[17] == s[17]);
}

TEST_CASE("confusion table rejects unknown causes") {
  const auto path = std::filesystem::temp_directory_path() / "htec_bad_confusions.tsv";
  {
    std::ofstream f(path);
    f << "weird\ta\tb\n";
  }
  CHECK_THROWS_AS(ConfusionTable::load(path), Error);
  std::filesystem::remove(path);
}
