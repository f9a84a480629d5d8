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

// Mask filling. AR fills the leftmost mask per iteration, re-encoding the
// partially filled sentence each time, and may emit up to kMaxFillWords per
// mask. NAR fills every mask with one word in a single pass. Decoding is
// greedy; special tokens and <unk> are never emitted.

#pragma once

#include <string>
#include <vector>

#include "htec/model.hpp"

namespace htec {

inline constexpr std::size_t kMaxFillWords = 5;
inline constexpr std::size_t kDefaultNBest = 3;

struct FillCandidate {
  std::vector<std::string> words;
  double score = 0.0;  // mean log-probability of the emitted tokens
};

struct MaskFill {
  std::size_t position = 0;  // mask index in the input transcript
  std::vector<std::string> words;
  double score = 0.0;
  /// Ranked alternatives, best first; at most n_best entries.
  std::vector<FillCandidate> candidates;
};

struct FillResult {
  Transcript filled;
  std::vector<MaskFill> fills;
  std::size_t iterations = 0;  // encoder passes

  double score() const;
};

/// Fills every mask in `masked`. Throws TooLong when the input or a
/// partially filled sentence exceeds the word cap, ConfigError for a
/// non-filler bundle.
FillResult fill(const ModelBundle& bundle, const Transcript& masked, const Transcript* asr,
                std::size_t n_best = kDefaultNBest, const Phonemizer& phonemizer = Phonemizer::shared());

/// Up to `n` alternative fillings. Result j takes the j-th candidate at every
/// mask (or the last one when a mask has fewer); results are ordered by mean
/// score. Duplicate fillings are dropped; n = 1 returns exactly fill().
std::vector<FillResult> nbest(const ModelBundle& bundle, const Transcript& masked, const Transcript* asr, std::size_t n,
                              const Phonemizer& phonemizer = Phonemizer::shared());

/// Replaces the k-th mask of `masked` with fills[k].
Transcript splice(const Transcript& masked, const std::vector<std::vector<std::string>>& fills);

}  // namespace htec
