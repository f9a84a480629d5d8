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

#include "htec/textcore.hpp"

#include <algorithm>
#include <array>
#include <map>

#include "htec/errors.hpp"

namespace htec {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kEmptyCorpus: return "EmptyCorpus";
    case ErrorCode::kEmptyWord: return "EmptyWord";
    case ErrorCode::kEmptyReference: return "EmptyReference";
    case ErrorCode::kTooLong: return "TooLong";
    case ErrorCode::kShapeError: return "ShapeError";
    case ErrorCode::kInvalidLabeledPair: return "InvalidLabeledPair";
    case ErrorCode::kCorruptCheckpoint: return "CorruptCheckpoint";
    case ErrorCode::kVersionError: return "VersionError";
    case ErrorCode::kConfigError: return "ConfigError";
    case ErrorCode::kDiverged: return "DivergedError";
    case ErrorCode::kMissingGold: return "MissingGold";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Error";
}

namespace {

constexpr std::array<std::string_view, Vocabulary::kSpecialCount> kSpecials = {
    kPadToken, kUnkToken, kMaskToken, kSepToken, kBeginToken, kEndToken, kEndOfFillToken};

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

char fold(char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

}  // namespace

bool is_special_token(std::string_view word) {
  return std::find(kSpecials.begin(), kSpecials.end(), word) != kSpecials.end();
}

std::string Transcript::text() const {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out.push_back(' ');
    out += words[i];
  }
  return out;
}

Transcript Transcript::from_words(std::vector<std::string> words) {
  Transcript t;
  t.words = std::move(words);
  t.raw = t.text();
  return t;
}

Transcript tokenize(std::string_view text) {
  Transcript t;
  t.raw = std::string(text);
  std::string current;
  for (char c : text) {
    if (is_space(c)) {
      if (!current.empty()) t.words.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(fold(c));
    }
  }
  if (!current.empty()) t.words.push_back(std::move(current));
  if (t.words.empty()) throw Error(ErrorCode::kEmptyInput, "text has no words");
  return t;
}

MaskedTranscript parse_uncertain(const Transcript& transcript) {
  MaskedTranscript out;
  out.transcript = transcript;
  for (std::size_t i = 0; i < out.transcript.words.size(); ++i) {
    auto& w = out.transcript.words[i];
    if (w == kUncertainMarker) w = std::string(kMaskToken);
    if (w == kMaskToken) out.mask_positions.push_back(i);
  }
  return out;
}

std::vector<std::size_t> mask_positions(const Transcript& t) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < t.words.size(); ++i)
    if (t.words[i] == kMaskToken) out.push_back(i);
  return out;
}

void require_model_length(const Transcript& t, std::string_view what) {
  if (t.size() > kMaxWords) {
    throw Error(ErrorCode::kTooLong, std::string(what) + " has " + std::to_string(t.size()) +
                                         " words; the limit is " + std::to_string(kMaxWords));
  }
}

Vocabulary::Vocabulary() : Vocabulary(std::vector<std::string>(kSpecials.begin(), kSpecials.end())) {}

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.size() < static_cast<std::size_t>(kSpecialCount) ||
      !std::equal(kSpecials.begin(), kSpecials.end(), tokens_.begin())) {
    throw Error(ErrorCode::kParseError, "vocabulary must start with the special tokens");
  }
  index_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], static_cast<TokenId>(i)).second)
      throw Error(ErrorCode::kParseError, "duplicate vocabulary token '" + tokens_[i] + "'");
  }
}

TokenId Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(TokenId id) const {
  return tokens_.at(static_cast<std::size_t>(id));
}

bool Vocabulary::contains(std::string_view token) const {
  return index_.contains(std::string(token));
}

std::vector<TokenId> Vocabulary::encode(std::span<const std::string> words) const {
  std::vector<TokenId> ids;
  ids.reserve(words.size());
  for (const auto& w : words) ids.push_back(id(w));
  return ids;
}

Vocabulary build_vocab(std::span<const Transcript> corpus, std::size_t min_count) {
  if (corpus.empty()) throw Error(ErrorCode::kEmptyCorpus, "cannot build a vocabulary from nothing");
  std::map<std::string, std::size_t> counts;
  for (const auto& t : corpus)
    for (const auto& w : t.words)
      if (!is_special_token(w)) ++counts[w];

  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [w, n] : counts)
    if (n >= min_count) kept.emplace_back(w, n);
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  std::vector<std::string> tokens(kSpecials.begin(), kSpecials.end());
  for (auto& [w, n] : kept) tokens.push_back(w);
  return Vocabulary(std::move(tokens));
}

}  // namespace htec
