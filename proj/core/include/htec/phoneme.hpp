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
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "htec/textcore.hpp"

namespace htec {

/// Directory holding the shipped lexicon, inventory, templates and
/// confusion lists. `HTEC_DATA_DIR` in the environment overrides the
/// build-time default.
std::filesystem::path default_data_dir();

inline constexpr std::size_t kMaxPhonemes = 20;
inline constexpr std::size_t kPhonemeSymbols = 44;

using PhonemeId = std::uint8_t;
using PhonemeRow = std::array<PhonemeId, kMaxPhonemes>;

/// 44 phoneme symbols with ids 1..44; id 0 is the pad symbol.
class PhonemeInventory {
 public:
  static constexpr PhonemeId kPad = 0;

  explicit PhonemeInventory(std::vector<std::string> symbols);
  static PhonemeInventory load(const std::filesystem::path& path);

  /// Total id count including pad (45).
  std::size_t size() const { return symbols_.size() + 1; }
  PhonemeId id(std::string_view symbol) const;
  bool contains(std::string_view symbol) const;
  const std::string& symbol(PhonemeId id) const;

 private:
  std::vector<std::string> symbols_;
  std::unordered_map<std::string, PhonemeId> index_;
};

struct PhonemeMatrix {
  std::vector<PhonemeRow> rows;

  std::size_t word_count() const { return rows.size(); }
};

struct LexiconEntry {
  std::string word;
  std::vector<PhonemeId> phonemes;
};

/// Lexicon lookup with a letter-to-sound fallback for unknown words.
/// Immutable after construction.
class Phonemizer {
 public:
  Phonemizer(PhonemeInventory inventory, std::vector<LexiconEntry> lexicon);

  static Phonemizer load(const std::filesystem::path& inventory_path,
                         const std::filesystem::path& lexicon_path);
  /// Loaded once from default_data_dir().
  static const Phonemizer& shared();

  const PhonemeInventory& inventory() const { return inventory_; }
  /// Entries in file order, which the shipped lexicon keeps by frequency rank.
  const std::vector<LexiconEntry>& entries() const { return entries_; }
  bool in_lexicon(std::string_view word) const;

  /// Unpadded phoneme ids, at most 20. Punctuation-only words give an empty
  /// sequence. Throws EmptyWord for "".
  std::vector<PhonemeId> phonemes(std::string_view word) const;
  /// phonemes() padded to exactly 20 ids.
  PhonemeRow phonemize(std::string_view word) const;
  /// One row per word; special tokens get the all-pad row. Throws TooLong
  /// past 64 words.
  PhonemeMatrix phoneme_matrix(const Transcript& t) const;
  /// Identical non-pad phoneme sequences.
  bool homophone(std::string_view a, std::string_view b) const;

  /// Deterministic spelling-based pronunciation, untruncated.
  std::vector<PhonemeId> letter_to_sound(std::string_view letters) const;

 private:
  std::vector<PhonemeId> lookup_or_rules(const std::string& key) const;

  PhonemeInventory inventory_;
  std::vector<LexiconEntry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

inline PhonemeRow pad_row() {
  PhonemeRow r{};
  r.fill(PhonemeInventory::kPad);
  return r;
}

}  // namespace htec
