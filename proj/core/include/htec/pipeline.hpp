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

#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "htec/checker.hpp"
#include "htec/corpus.hpp"
#include "htec/filler.hpp"
#include "htec/metrics.hpp"

namespace htec {

struct CorrectionOptions {
  CheckMode mode = CheckMode::kAutocorrect;
  Thresholds thresholds;
  std::size_t n_best = 1;
};

struct CorrectionResult {
  Transcript raw;
  CheckerPrediction checker;
  std::vector<std::size_t> flagged;
  std::vector<EditLabel> labels;  // labels acted on
  MaskedLabels masked;
  FillResult fill;
  Transcript filled;
  std::optional<WerBreakdown> wer_raw;
  std::optional<WerBreakdown> wer_htec;
};

/// Checker, thresholding, masking (D words are dropped), then filling.
/// WERs are filled in when `gold` is given.
CorrectionResult correct(const Transcript& annotator, const Transcript* asr, const ModelBundle& checker,
                         const ModelBundle& filler, const CorrectionOptions& options = {},
                         const Transcript* gold = nullptr);

/// Masks `annotator` by `labels`, fills, and returns the corrected transcript.
FillResult fill_labels(const Transcript& annotator, const Transcript* asr, std::span<const EditLabel> labels,
                       const ModelBundle& filler, MaskedLabels* masked_out = nullptr, std::size_t n_best = 1);

struct CorpusCorrection {
  std::vector<Transcript> outputs;
  WerBreakdown wer_raw;   // annotator vs gold
  WerBreakdown wer_htec;  // corrected vs gold
  /// Utterances whose corrected form would exceed the word cap; they keep
  /// the annotator text.
  std::size_t fallbacks = 0;
};

/// correct() over a corpus with gold, pooling WER. Throws MissingGold.
CorpusCorrection correct_corpus(const std::vector<Utterance>& corpus, const ModelBundle& checker,
                                const ModelBundle& filler, const CorrectionOptions& options = {});

struct McrConfig {
  double mcr = 0.0;  // per-decision probability that the simulated annotator fixes a mistake
  std::uint64_t seed = 1;
  Thresholds thresholds;

  /// Throws ConfigError unless mcr is in [0, 1].
  void validate() const;
};

struct McrResult {
  WerBreakdown wer;
  std::size_t labels_fixed = 0;
  std::size_t fills_restored = 0;
  std::size_t fallbacks = 0;
};

/// Human-in-the-loop simulation over a corpus with gold. Starting from the
/// autocorrect labels, each word whose label differs from the true label is
/// set to the true label with probability mcr. After filling, each mask
/// whose fill differs from its gold words is restored to gold with
/// probability mcr. Decisions are keyed by (seed, utterance id, position), so
/// mcr = 0 reproduces autocorrect and mcr = 1 reproduces gold.
McrResult simulate_mcr(const std::vector<Utterance>& corpus, const ModelBundle& checker, const ModelBundle& filler,
                       const McrConfig& config);

/// Gold words for each slot of a masking, judged against the true labels:
/// a substitute slot expects the true substitute, the annotator word itself
/// when the truth keeps it, or nothing when the truth deletes it; an insert
/// slot expects the true insert list on that side.
std::vector<std::vector<std::string>> slot_targets(const LabeledPair& truth, const MaskedLabels& masked);

}  // namespace htec
