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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "htec/textcore.hpp"

namespace htec {

class Phonemizer;

/// Per-word correction operation. Order fixes the class ids used by the
/// checker head.
enum class EditLabel : std::uint8_t { K, D, S, KL, KR, SL, SR };
inline constexpr std::size_t kLabelCount = 7;
inline constexpr std::array<EditLabel, kLabelCount> kAllLabels = {
    EditLabel::K, EditLabel::D, EditLabel::S, EditLabel::KL, EditLabel::KR, EditLabel::SL, EditLabel::SR};

std::string_view label_code(EditLabel label);
/// Throws ParseError for an unknown code.
EditLabel parse_label(std::string_view code);

inline bool substitutes(EditLabel l) {
  return l == EditLabel::S || l == EditLabel::SL || l == EditLabel::SR;
}
inline bool inserts_left(EditLabel l) { return l == EditLabel::KL || l == EditLabel::SL; }
inline bool inserts_right(EditLabel l) { return l == EditLabel::KR || l == EditLabel::SR; }

struct FillRecord {
  std::optional<std::string> substitute;
  std::vector<std::string> left_insert;
  std::vector<std::string> right_insert;

  bool empty() const { return !substitute && left_insert.empty() && right_insert.empty(); }
  friend bool operator==(const FillRecord&, const FillRecord&) = default;
};

struct LabeledPair {
  Transcript annotator;
  Transcript gold;
  std::vector<EditLabel> labels;
  std::vector<FillRecord> fills;
};

enum class AlignOp : std::uint8_t { kMatch, kSubstitute, kInsert, kDelete };

/// One alignment step. `a_index` is meaningful for match/substitute/delete,
/// `g_index` for match/substitute/insert.
struct AlignStep {
  AlignOp op;
  std::size_t a_index;
  std::size_t g_index;
};

struct Alignment {
  std::vector<AlignStep> steps;
  double cost = 0.0;
};

struct AlignOptions {
  /// Substitutions between homophones cost `homophone_cost` instead of 1.
  bool homophone_aware = true;
  double homophone_cost = 0.6;
  /// Null selects Phonemizer::shared().
  const Phonemizer* phonemizer = nullptr;
};

/// Minimum-cost word alignment of annotator `a` against gold `g`. Among
/// optimal paths the earliest step prefers match/substitute, then delete,
/// then insert.
Alignment align_words(const Transcript& a, const Transcript& g, const AlignOptions& options = {});

/// Folds the alignment into one label per annotator word. Inserted gold
/// words attach to the word on their left, or to the first word when they
/// open the sentence.
LabeledPair derive_labels(const Transcript& a, const Transcript& g, const AlignOptions& options = {});

/// Throws InvalidLabeledPair when labels and fill records disagree.
void validate(const LabeledPair& pair);

/// Rebuilds the gold transcript from annotator words, labels and fills.
Transcript apply_labels(const LabeledPair& pair);

/// Where a mask came from: the word it anchors to and which part of the
/// correction it stands for. `offset` indexes into a multi-word insert list
/// when inserts are expanded one mask per word.
struct MaskSlot {
  enum class Kind : std::uint8_t { kSubstitute, kLeftInsert, kRightInsert };
  std::size_t word_index;
  Kind kind;
  std::size_t offset = 0;

  friend bool operator==(const MaskSlot&, const MaskSlot&) = default;
};

struct MaskedLabels {
  MaskedTranscript masked;
  std::vector<MaskSlot> slots;  // parallel to masked.mask_positions
};

/// Masked input implied by predicted labels: one mask per substitution and
/// one per insertion side.
MaskedLabels labels_to_masked(const Transcript& a, std::span<const EditLabel> labels);

/// Like labels_to_masked but each inserted gold word gets its own mask.
MaskedLabels labels_to_masked_expanded(const LabeledPair& pair);

/// |S| + |KL| + |KR| + 2|SL| + 2|SR|
std::size_t mask_count(std::span<const EditLabel> labels);

/// Gold words a slot should be filled with under the true fill record.
std::vector<std::string> slot_gold(const FillRecord& fill, const MaskSlot& slot, bool expanded);

}  // namespace htec
