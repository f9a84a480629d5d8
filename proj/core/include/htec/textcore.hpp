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
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace htec {

/// Longest annotator (or ASR) segment accepted by the models.
inline constexpr std::size_t kMaxWords = 64;

inline constexpr std::string_view kPadToken = "<pad>";
inline constexpr std::string_view kUnkToken = "<unk>";
inline constexpr std::string_view kMaskToken = "<mask>";
inline constexpr std::string_view kSepToken = "<sep>";
inline constexpr std::string_view kBeginToken = "<s>";
inline constexpr std::string_view kEndToken = "</s>";
inline constexpr std::string_view kEndOfFillToken = "<eof>";
inline constexpr std::string_view kUncertainMarker = "?";

bool is_special_token(std::string_view word);

/// A tokenized utterance. `words` are case-folded with punctuation left
/// attached; `raw` keeps the text the words came from.
struct Transcript {
  std::vector<std::string> words;
  std::string raw;

  std::size_t size() const { return words.size(); }
  bool empty() const { return words.empty(); }
  /// Words joined by single spaces.
  std::string text() const;

  static Transcript from_words(std::vector<std::string> words);

  friend bool operator==(const Transcript& a, const Transcript& b) {
    return a.words == b.words;
  }
};

/// Splits on whitespace and lowercases ASCII letters. Throws EmptyInput for
/// blank text.
Transcript tokenize(std::string_view text);

struct MaskedTranscript {
  Transcript transcript;
  std::vector<std::size_t> mask_positions;
};

/// Replaces every standalone "?" with the mask token. Existing mask tokens
/// are kept and also reported.
MaskedTranscript parse_uncertain(const Transcript& transcript);

/// Positions of mask tokens in `t`.
std::vector<std::size_t> mask_positions(const Transcript& t);

/// Throws TooLong when `t` exceeds the model word cap.
void require_model_length(const Transcript& t, std::string_view what);

using TokenId = std::int32_t;

/// Dense token ids. Special tokens occupy ids 0..6 in a fixed order; regular
/// tokens follow in frequency-descending, then lexicographic order.
class Vocabulary {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kUnk = 1;
  static constexpr TokenId kMask = 2;
  static constexpr TokenId kSep = 3;
  static constexpr TokenId kBegin = 4;
  static constexpr TokenId kEnd = 5;
  static constexpr TokenId kEndOfFill = 6;
  static constexpr TokenId kSpecialCount = 7;

  Vocabulary();
  /// Builds from a full token list whose first entries are the special tokens.
  explicit Vocabulary(std::vector<std::string> tokens);

  TokenId id(std::string_view token) const;
  const std::string& token(TokenId id) const;
  bool contains(std::string_view token) const;
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::vector<TokenId> encode(std::span<const std::string> words) const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.tokens_ == b.tokens_;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

/// Tokens with corpus frequency >= min_count. Throws EmptyCorpus.
Vocabulary build_vocab(std::span<const Transcript> corpus, std::size_t min_count);

}  // namespace htec
