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

#include <array>
#include <string_view>
#include <vector>

#include "htec/align.hpp"
#include "htec/model.hpp"

namespace htec {

enum class CheckMode : std::uint8_t { kAutocorrect, kCopilot };
std::string_view to_string(CheckMode mode);
CheckMode parse_check_mode(std::string_view s);

struct Thresholds {
  double autocorrect = 0.9;
  double copilot = 0.5;

  /// Each threshold must lie in (0, 1]; 1 flags only certain errors.
  void validate() const;
  double for_mode(CheckMode mode) const { return mode == CheckMode::kAutocorrect ? autocorrect : copilot; }
};

struct WordPrediction {
  EditLabel label = EditLabel::K;  // argmax
  std::array<double, kLabelCount> probabilities{};
  double error_score = 0.0;  // 1 - P(K)
};

struct CheckerPrediction {
  std::vector<WordPrediction> words;

  std::vector<EditLabel> labels() const;
  std::vector<double> error_scores() const;
};

/// Per-word label distribution for `annotator`. `asr` may be null or empty.
/// Throws TooLong, or ConfigError for a non-checker bundle.
CheckerPrediction check(const ModelBundle& bundle, const Transcript& annotator, const Transcript* asr,
                        const Phonemizer& phonemizer = Phonemizer::shared());

/// Indices of words whose error score reaches the mode's threshold.
std::vector<std::size_t> apply_threshold(const CheckerPrediction& pred, CheckMode mode,
                                         const Thresholds& thresholds = {});

/// Labels to act on: flagged words take their most likely error label,
/// every other word is kept.
std::vector<EditLabel> flagged_labels(const CheckerPrediction& pred, std::span<const std::size_t> flagged);

}  // namespace htec
