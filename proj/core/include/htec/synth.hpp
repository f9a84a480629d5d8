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

// Synthetic transcription noise. Each gold sentence is corrupted word by
// word; substitutions are drawn by cause (convention, spelling, grammatical,
// entity, misheard), insertions duplicate a word or inject a filler word,
// deletions drop a word. Edits are kept at least two clean words apart so
// that the word alignment recovers each edit as the type that produced it.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "htec/corpus.hpp"
#include "htec/phoneme.hpp"

namespace htec {

enum class ErrorType : std::uint8_t { kSubstitution, kInsertion, kDeletion };
enum class ErrorCause : std::uint8_t { kConvention, kSpelling, kGrammatical, kEntity, kMisheard };
inline constexpr std::size_t kErrorTypeCount = 3;
inline constexpr std::size_t kErrorCauseCount = 5;

std::string_view to_string(ErrorType t);
std::string_view to_string(ErrorCause c);

struct NoiseProfile {
  double rate = 0.10;  // expected edits per gold word
  std::array<double, kErrorTypeCount> type_mix{};    // sub, ins, del
  std::array<double, kErrorCauseCount> cause_mix{};  // in ErrorCause order

  /// Throws ConfigError unless rate is in [0, 0.3] and both mixes are
  /// non-negative and sum to 1 within 1e-9.
  void validate() const;

  /// Scales the weights to sum to one.
  static NoiseProfile from_weights(double rate, std::array<double, kErrorTypeCount> types,
                                   std::array<double, kErrorCauseCount> causes);
  /// Annotator-like noise: 35.0 / 37.3 / 27.7 sub/ins/del.
  static NoiseProfile human(double rate = 0.10);
  /// ASR-like noise: 41.7 / 16.3 / 42.1 sub/ins/del.
  static NoiseProfile asr(double rate = 0.10);
};

struct CorruptionEvent {
  ErrorType type;
  std::optional<ErrorCause> cause;  // substitutions only; the cause actually used
  std::size_t gold_index;
};

struct ConfusionTable {
  /// cause -> correct word -> confusable words
  std::map<ErrorCause, std::unordered_map<std::string, std::vector<std::string>>> entries;

  static ConfusionTable load(const std::filesystem::path& path);
  const std::vector<std::string>* lookup(ErrorCause cause, const std::string& word) const;
};

class Synthesizer {
 public:
  Synthesizer(const Phonemizer& phonemizer, ConfusionTable confusions);
  /// Shared phonemizer plus confusions.tsv from the data directory.
  static const Synthesizer& shared();

  /// Corrupts `gold` under `profile`; the same (gold, profile, stream) gives
  /// the same output. `gold` must be nonempty.
  Transcript corrupt(const Transcript& gold, const NoiseProfile& profile, std::uint64_t stream,
                     std::vector<CorruptionEvent>* events = nullptr) const;

  /// Words whose pronunciation is within one phoneme edit of `word`.
  const std::vector<std::string>& sound_alikes(const std::string& word) const;

 private:
  std::optional<std::string> substitute(const std::string& word, ErrorCause cause, std::uint64_t bits) const;

  const Phonemizer& phonemizer_;
  ConfusionTable confusions_;
  std::vector<std::pair<std::string, std::vector<PhonemeId>>> pronunciations_;
  mutable std::mutex cache_mutex_;
  mutable std::unordered_map<std::string, std::vector<std::string>> sound_alike_cache_;
};

/// Annotator and ASR channels drawn independently for each gold sentence.
/// Utterance ids are the zero-based line numbers.
std::vector<Utterance> make_triples(const std::vector<Transcript>& gold, const NoiseProfile& human,
                                   const NoiseProfile& asr, std::uint64_t seed,
                                   const Synthesizer& synth = Synthesizer::shared());

/// Template grammar for voice-assistant style gold sentences.
class TemplateGrammar {
 public:
  static TemplateGrammar load(const std::filesystem::path& path);
  static const TemplateGrammar& shared();

  std::vector<Transcript> generate(std::size_t count, std::uint64_t seed) const;
  std::size_t template_count() const { return templates_.size(); }

 private:
  std::unordered_map<std::string, std::vector<std::string>> slots_;
  std::vector<std::string> templates_;
};

}  // namespace htec
