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

#include "htec/align.hpp"

#include <cmath>
#include <deque>

#include "htec/errors.hpp"
#include "htec/phoneme.hpp"

namespace htec {

namespace {

constexpr double kTieEps = 1e-9;
constexpr std::size_t kNone = static_cast<std::size_t>(-1);

constexpr std::array<std::string_view, kLabelCount> kCodes = {"K", "D", "S", "KL", "KR", "SL", "SR"};

}  // namespace

std::string_view label_code(EditLabel label) { return kCodes[static_cast<std::size_t>(label)]; }

EditLabel parse_label(std::string_view code) {
  for (std::size_t i = 0; i < kCodes.size(); ++i)
    if (kCodes[i] == code) return static_cast<EditLabel>(i);
  throw Error(ErrorCode::kParseError, "unknown edit label '" + std::string(code) + "'");
}

Alignment align_words(const Transcript& a, const Transcript& g, const AlignOptions& options) {
  const std::size_t n = a.size(), m = g.size();
  const Phonemizer* ph = nullptr;
  if (options.homophone_aware) ph = options.phonemizer ? options.phonemizer : &Phonemizer::shared();

  std::vector<std::vector<PhonemeId>> pa, pg;
  if (ph) {
    auto pron = [&](const std::string& w) {
      return w.empty() || is_special_token(w) ? std::vector<PhonemeId>{} : ph->phonemes(w);
    };
    for (const auto& w : a.words) pa.push_back(pron(w));
    for (const auto& w : g.words) pg.push_back(pron(w));
  }
  auto sub_cost = [&](std::size_t i, std::size_t j) {
    if (a.words[i] == g.words[j]) return 0.0;
    if (ph && !pa[i].empty() && pa[i] == pg[j]) return options.homophone_cost;
    return 1.0;
  };

  // Suffix costs: cost[i][j] aligns a[i..] with g[j..].
  std::vector<double> cost((n + 1) * (m + 1));
  auto at = [&](std::size_t i, std::size_t j) -> double& { return cost[i * (m + 1) + j]; };
  for (std::size_t i = n + 1; i-- > 0;) {
    for (std::size_t j = m + 1; j-- > 0;) {
      if (i == n && j == m) {
        at(i, j) = 0.0;
        continue;
      }
      double best = INFINITY;
      if (i < n && j < m) best = std::min(best, sub_cost(i, j) + at(i + 1, j + 1));
      if (i < n) best = std::min(best, 1.0 + at(i + 1, j));
      if (j < m) best = std::min(best, 1.0 + at(i, j + 1));
      at(i, j) = best;
    }
  }

  Alignment out;
  out.cost = at(0, 0);
  std::size_t i = 0, j = 0;
  while (i < n || j < m) {
    const double here = at(i, j);
    if (i < n && j < m) {
      double c = sub_cost(i, j);
      if (std::abs(c + at(i + 1, j + 1) - here) < kTieEps) {
        out.steps.push_back({c == 0.0 ? AlignOp::kMatch : AlignOp::kSubstitute, i, j});
        ++i, ++j;
        continue;
      }
    }
    if (i < n && std::abs(1.0 + at(i + 1, j) - here) < kTieEps) {
      out.steps.push_back({AlignOp::kDelete, i, kNone});
      ++i;
      continue;
    }
    out.steps.push_back({AlignOp::kInsert, kNone, j});
    ++j;
  }
  return out;
}

LabeledPair derive_labels(const Transcript& a, const Transcript& g, const AlignOptions& options) {
  if (a.empty() && !g.empty())
    throw Error(ErrorCode::kInvalidLabeledPair, "an empty annotator transcript cannot carry labels");
  const std::size_t n = a.size();
  const auto alignment = align_words(a, g, options);

  enum class Core { kKeep, kSub, kDel };
  std::vector<Core> core(n, Core::kKeep);
  std::vector<std::string> sub(n);
  std::vector<std::deque<std::string>> left(n), right(n);

  // Inserted gold words grouped by the gap they fall into (gap k precedes
  // annotator word k).
  std::vector<std::vector<std::string>> gaps(n + 1);
  std::size_t consumed = 0;
  for (const auto& step : alignment.steps) {
    switch (step.op) {
      case AlignOp::kMatch:
        ++consumed;
        break;
      case AlignOp::kSubstitute:
        core[step.a_index] = Core::kSub;
        sub[step.a_index] = g.words[step.g_index];
        ++consumed;
        break;
      case AlignOp::kDelete:
        core[step.a_index] = Core::kDel;
        ++consumed;
        break;
      case AlignOp::kInsert:
        gaps[consumed].push_back(g.words[step.g_index]);
        break;
    }
  }
  for (std::size_t k = 0; k <= n; ++k) {
    if (gaps[k].empty()) continue;
    auto& dst = k == 0 ? left[0] : right[k - 1];
    dst.insert(dst.end(), gaps[k].begin(), gaps[k].end());
  }

  for (std::size_t i = 0; i < n; ++i) {
    if (core[i] == Core::kDel && !(left[i].empty() && right[i].empty())) {
      // A deleted word that anchors an insertion becomes a substitution.
      core[i] = Core::kSub;
      if (!left[i].empty()) {
        sub[i] = left[i].back();
        left[i].pop_back();
      } else {
        sub[i] = right[i].front();
        right[i].pop_front();
      }
    }
    if (!left[i].empty() && !right[i].empty()) {
      if (i + 1 < n) {
        left[i + 1].insert(left[i + 1].begin(), right[i].begin(), right[i].end());
        right[i].clear();
      } else {
        // Last word with inserts on both sides: substitute the first left
        // word and carry everything else as a right insert.
        std::deque<std::string> seq(left[i].begin(), left[i].end());
        seq.push_back(core[i] == Core::kSub ? sub[i] : a.words[i]);
        core[i] = Core::kSub;
        sub[i] = seq.front();
        seq.pop_front();
        seq.insert(seq.end(), right[i].begin(), right[i].end());
        right[i] = std::move(seq);
        left[i].clear();
      }
    }
  }

  LabeledPair pair;
  pair.annotator = a;
  pair.gold = g;
  pair.labels.resize(n);
  pair.fills.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& f = pair.fills[i];
    f.left_insert.assign(left[i].begin(), left[i].end());
    f.right_insert.assign(right[i].begin(), right[i].end());
    const bool l = !f.left_insert.empty(), r = !f.right_insert.empty();
    switch (core[i]) {
      case Core::kDel:
        pair.labels[i] = EditLabel::D;
        break;
      case Core::kKeep:
        pair.labels[i] = l ? EditLabel::KL : r ? EditLabel::KR : EditLabel::K;
        break;
      case Core::kSub:
        f.substitute = sub[i];
        pair.labels[i] = l ? EditLabel::SL : r ? EditLabel::SR : EditLabel::S;
        break;
    }
  }
  return pair;
}

void validate(const LabeledPair& pair) {
  const std::size_t n = pair.annotator.size();
  if (pair.labels.size() != n || pair.fills.size() != n) {
    throw Error(ErrorCode::kInvalidLabeledPair,
                "expected " + std::to_string(n) + " labels and fill records, got " +
                    std::to_string(pair.labels.size()) + " and " + std::to_string(pair.fills.size()));
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto label = pair.labels[i];
    const auto& f = pair.fills[i];
    const bool sub_ok = substitutes(label) ? (f.substitute && !f.substitute->empty()) : !f.substitute;
    const bool left_ok = inserts_left(label) != f.left_insert.empty();
    const bool right_ok = inserts_right(label) != f.right_insert.empty();
    if (!sub_ok || !left_ok || !right_ok) {
      throw Error(ErrorCode::kInvalidLabeledPair, "word " + std::to_string(i) + " ('" +
                                                      pair.annotator.words[i] + "') has label " +
                                                      std::string(label_code(label)) +
                                                      " but an inconsistent fill record");
    }
  }
}

Transcript apply_labels(const LabeledPair& pair) {
  validate(pair);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < pair.annotator.size(); ++i) {
    const auto& f = pair.fills[i];
    out.insert(out.end(), f.left_insert.begin(), f.left_insert.end());
    if (pair.labels[i] != EditLabel::D) out.push_back(f.substitute ? *f.substitute : pair.annotator.words[i]);
    out.insert(out.end(), f.right_insert.begin(), f.right_insert.end());
  }
  return Transcript::from_words(std::move(out));
}

namespace {

void push_mask(MaskedLabels& out, MaskSlot slot) {
  out.masked.mask_positions.push_back(out.masked.transcript.words.size());
  out.masked.transcript.words.emplace_back(kMaskToken);
  out.slots.push_back(slot);
}

}  // namespace

MaskedLabels labels_to_masked(const Transcript& a, std::span<const EditLabel> labels) {
  if (labels.size() != a.size()) {
    throw Error(ErrorCode::kShapeError, "need one label per word: " + std::to_string(a.size()) +
                                            " words, " + std::to_string(labels.size()) + " labels");
  }
  using Kind = MaskSlot::Kind;
  MaskedLabels out;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto l = labels[i];
    if (inserts_left(l)) push_mask(out, {i, Kind::kLeftInsert});
    if (substitutes(l)) {
      push_mask(out, {i, Kind::kSubstitute});
    } else if (l != EditLabel::D) {
      out.masked.transcript.words.push_back(a.words[i]);
    }
    if (inserts_right(l)) push_mask(out, {i, Kind::kRightInsert});
  }
  out.masked.transcript.raw = out.masked.transcript.text();
  return out;
}

MaskedLabels labels_to_masked_expanded(const LabeledPair& pair) {
  validate(pair);
  using Kind = MaskSlot::Kind;
  MaskedLabels out;
  for (std::size_t i = 0; i < pair.annotator.size(); ++i) {
    const auto l = pair.labels[i];
    const auto& f = pair.fills[i];
    for (std::size_t k = 0; k < f.left_insert.size(); ++k) push_mask(out, {i, Kind::kLeftInsert, k});
    if (substitutes(l)) {
      push_mask(out, {i, Kind::kSubstitute});
    } else if (l != EditLabel::D) {
      out.masked.transcript.words.push_back(pair.annotator.words[i]);
    }
    for (std::size_t k = 0; k < f.right_insert.size(); ++k) push_mask(out, {i, Kind::kRightInsert, k});
  }
  out.masked.transcript.raw = out.masked.transcript.text();
  return out;
}

std::size_t mask_count(std::span<const EditLabel> labels) {
  std::size_t n = 0;
  for (auto l : labels) n += (substitutes(l) ? 1 : 0) + (inserts_left(l) ? 1 : 0) + (inserts_right(l) ? 1 : 0);
  return n;
}

std::vector<std::string> slot_gold(const FillRecord& fill, const MaskSlot& slot, bool expanded) {
  using Kind = MaskSlot::Kind;
  switch (slot.kind) {
    case Kind::kSubstitute:
      if (fill.substitute) return {*fill.substitute};
      return {};
    case Kind::kLeftInsert:
    case Kind::kRightInsert: {
      const auto& list = slot.kind == Kind::kLeftInsert ? fill.left_insert : fill.right_insert;
      if (!expanded) return list;
      if (slot.offset < list.size()) return {list[slot.offset]};
      return {};
    }
  }
  return {};
}

}  // namespace htec
