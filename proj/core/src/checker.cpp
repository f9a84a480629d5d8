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

#include "htec/checker.hpp"

#include <algorithm>
#include <cmath>

#include "htec/errors.hpp"

namespace htec {

std::string_view to_string(CheckMode mode) { return mode == CheckMode::kAutocorrect ? "autocorrect" : "copilot"; }

CheckMode parse_check_mode(std::string_view s) {
  if (s == "autocorrect") return CheckMode::kAutocorrect;
  if (s == "copilot" || s == "co-pilot") return CheckMode::kCopilot;
  throw Error(ErrorCode::kConfigError, "unknown mode '" + std::string(s) + "' (expected autocorrect or copilot)");
}

void Thresholds::validate() const {
  for (double t : {autocorrect, copilot}) {
    if (!(t > 0.0 && t <= 1.0)) {
      throw Error(ErrorCode::kConfigError, "threshold " + std::to_string(t) + " is outside (0, 1]");
    }
  }
}

std::vector<EditLabel> CheckerPrediction::labels() const {
  std::vector<EditLabel> out;
  for (const auto& w : words) out.push_back(w.label);
  return out;
}

std::vector<double> CheckerPrediction::error_scores() const {
  std::vector<double> out;
  for (const auto& w : words) out.push_back(w.error_score);
  return out;
}

CheckerPrediction check(const ModelBundle& bundle, const Transcript& annotator, const Transcript* asr,
                        const Phonemizer& phonemizer) {
  if (bundle.config().kind != ModelKind::kChecker) throw Error(ErrorCode::kConfigError, "bundle is not a checker");
  tensor::NoGradGuard guard;
  const auto in = prepare_input(bundle, annotator, asr, phonemizer);
  const auto logits = checker_logits(bundle, encode(bundle, embed_input(bundle, in)), annotator.size());
  CheckerPrediction out;
  out.words.resize(annotator.size());
  for (std::size_t i = 0; i < annotator.size(); ++i) {
    auto& w = out.words[i];
    const auto row = logits.data().subspan(i * kLabelCount, kLabelCount);
    const double peak = *std::max_element(row.begin(), row.end());
    double z = 0;
    for (std::size_t c = 0; c < kLabelCount; ++c) z += (w.probabilities[c] = std::exp(row[c] - peak));
    std::size_t best = 0;
    for (std::size_t c = 0; c < kLabelCount; ++c) {
      w.probabilities[c] /= z;
      if (w.probabilities[c] > w.probabilities[best]) best = c;
    }
    w.label = static_cast<EditLabel>(best);
    w.error_score = 1.0 - w.probabilities[0];
  }
  return out;
}

std::vector<std::size_t> apply_threshold(const CheckerPrediction& pred, CheckMode mode, const Thresholds& thresholds) {
  thresholds.validate();
  const double tau = thresholds.for_mode(mode);
  std::vector<std::size_t> out;
  // tau = 1 would only flag words with P(K) = 0 exactly; treat it as "never".
  if (tau >= 1.0) return out;
  for (std::size_t i = 0; i < pred.words.size(); ++i)
    if (pred.words[i].error_score >= tau) out.push_back(i);
  return out;
}

std::vector<EditLabel> flagged_labels(const CheckerPrediction& pred, std::span<const std::size_t> flagged) {
  std::vector<EditLabel> out(pred.words.size(), EditLabel::K);
  for (auto i : flagged) {
    if (i >= out.size()) throw Error(ErrorCode::kShapeError, "flag index out of range");
    const auto& p = pred.words[i].probabilities;
    std::size_t best = 1;
    for (std::size_t c = 2; c < kLabelCount; ++c)
      if (p[c] > p[best]) best = c;
    out[i] = static_cast<EditLabel>(best);
  }
  return out;
}

}  // namespace htec
