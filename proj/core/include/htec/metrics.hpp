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

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "htec/align.hpp"
#include "htec/textcore.hpp"

namespace htec {

struct WerOptions {
  bool ignore_case = true;
  bool ignore_punctuation = false;
};

struct WerBreakdown {
  std::size_t substitutions = 0;
  std::size_t insertions = 0;
  std::size_t deletions = 0;
  std::size_t hits = 0;
  std::size_t reference_length = 0;
  double wer = 0.0;

  std::size_t errors() const { return substitutions + insertions + deletions; }
  /// Pools counts; wer is recomputed from the pooled totals.
  WerBreakdown& operator+=(const WerBreakdown& other);
};

/// Word error rate of `hyp` against `ref` with uniform edit costs. Among
/// minimum-error alignments the one with the most substitutions is counted,
/// which keeps S fixed and swaps I/D when the arguments are swapped.
/// Throws EmptyReference.
WerBreakdown wer(const Transcript& hyp, const Transcript& ref, const WerOptions& options = {});

/// A corrector is automatable when its WER beats the annotator's on the same
/// references.
inline bool automatable(double wer_model, double wer_annotator) { return wer_model < wer_annotator; }

struct CheckerMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double macro_f1 = 0.0;
  std::optional<double> auc;  // nullopt when only one class is present
};

/// Precision and recall count error units: a word that is itself wrong
/// (S/D/SL/SR) and each gap that needs inserted words (KL/SL on the left,
/// KR/SR on the right of a word). Macro-F1 is over the seven labels per
/// word. AUC is the binary error-vs-K ROC area using `error_scores`
/// (1 - P(K)) or, when absent, the hard predictions. Throws ShapeError on
/// length mismatch.
CheckerMetrics checker_metrics(std::span<const std::vector<EditLabel>> predicted,
                               std::span<const std::vector<EditLabel>> truth,
                               std::span<const std::vector<double>> error_scores = {});

CheckerMetrics checker_metrics(std::span<const EditLabel> predicted, std::span<const EditLabel> truth,
                               std::span<const double> error_scores = {});

/// Area under the ROC curve; nullopt without both classes.
std::optional<double> roc_auc(std::span<const double> scores, const std::vector<bool>& positive);

struct FillerMetrics {
  std::optional<double> precision;  // correct filled words / filled words
  std::optional<double> recall;     // correct filled words / words to fill
  std::optional<double> f1;
};

/// Word-level exact match between position-aligned fills and gold fills.
FillerMetrics filler_metrics(std::span<const std::vector<std::string>> fills,
                             std::span<const std::vector<std::string>> gold_fills);

}  // namespace htec
