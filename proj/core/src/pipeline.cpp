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

#include "htec/pipeline.hpp"

#include <spdlog/spdlog.h>

#include "htec/errors.hpp"
#include "htec/hashing.hpp"

namespace htec {

FillResult fill_labels(const Transcript& annotator, const Transcript* asr, std::span<const EditLabel> labels,
                       const ModelBundle& filler, MaskedLabels* masked_out, std::size_t n_best) {
  auto masked = labels_to_masked(annotator, labels);
  auto result = fill(filler, masked.masked.transcript, asr, n_best);
  if (masked_out) *masked_out = std::move(masked);
  return result;
}

CorrectionResult correct(const Transcript& annotator, const Transcript* asr, const ModelBundle& checker,
                         const ModelBundle& filler, const CorrectionOptions& options, const Transcript* gold) {
  CorrectionResult r;
  r.raw = annotator;
  r.checker = check(checker, annotator, asr);
  r.flagged = apply_threshold(r.checker, options.mode, options.thresholds);
  r.labels = flagged_labels(r.checker, r.flagged);
  r.fill = fill_labels(annotator, asr, r.labels, filler, &r.masked, options.n_best);
  r.filled = r.fill.filled;
  if (gold) {
    r.wer_raw = wer(annotator, *gold);
    r.wer_htec = wer(r.filled, *gold);
  }
  return r;
}

namespace {

const Transcript& gold_of(const Utterance& u) {
  if (!u.gold) throw Error(ErrorCode::kMissingGold, "utterance '" + u.id + "' has no gold transcript");
  if (!u.annotator) throw Error(ErrorCode::kParseError, "utterance '" + u.id + "' has no annotator transcript");
  return *u.gold;
}

}  // namespace

CorpusCorrection correct_corpus(const std::vector<Utterance>& corpus, const ModelBundle& checker,
                                const ModelBundle& filler, const CorrectionOptions& options) {
  CorpusCorrection out;
  for (const auto& u : corpus) {
    const auto& g = gold_of(u);
    Transcript hyp = *u.annotator;
    try {
      hyp = correct(*u.annotator, u.asr_or_null(), checker, filler, options).filled;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kTooLong) throw;
      ++out.fallbacks;
    }
    out.wer_raw += wer(*u.annotator, g);
    out.wer_htec += wer(hyp, g);
    out.outputs.push_back(std::move(hyp));
  }
  if (out.fallbacks) spdlog::warn("{} utterances kept their annotator text (over the word cap)", out.fallbacks);
  return out;
}

void McrConfig::validate() const {
  if (!(mcr >= 0.0 && mcr <= 1.0)) throw Error(ErrorCode::kConfigError, "mcr must be in [0, 1]");
  thresholds.validate();
}

std::vector<std::vector<std::string>> slot_targets(const LabeledPair& truth, const MaskedLabels& masked) {
  using Kind = MaskSlot::Kind;
  std::vector<std::vector<std::string>> out;
  for (const auto& slot : masked.slots) {
    const auto l = truth.labels[slot.word_index];
    const auto& f = truth.fills[slot.word_index];
    switch (slot.kind) {
      case Kind::kSubstitute:
        if (substitutes(l)) out.push_back({*f.substitute});
        else if (l == EditLabel::D) out.emplace_back();
        else out.push_back({truth.annotator.words[slot.word_index]});
        break;
      case Kind::kLeftInsert:
        out.push_back(f.left_insert);
        break;
      case Kind::kRightInsert:
        out.push_back(f.right_insert);
        break;
    }
  }
  return out;
}

McrResult simulate_mcr(const std::vector<Utterance>& corpus, const ModelBundle& checker, const ModelBundle& filler,
                       const McrConfig& config) {
  config.validate();
  McrResult out;
  enum : std::uint64_t { kLabelDecision = 1, kFillDecision = 2 };
  for (const auto& u : corpus) {
    const auto& g = gold_of(u);
    const auto& a = *u.annotator;
    const std::uint64_t uid = fnv1a64(u.id);
    auto fixes = [&](std::uint64_t kind, std::size_t index) {
      return unit_interval(mix_keys({config.seed, uid, kind, index})) < config.mcr;
    };

    Transcript hyp = a;
    try {
      const auto pred = check(checker, a, u.asr_or_null());
      auto labels = flagged_labels(pred, apply_threshold(pred, CheckMode::kAutocorrect, config.thresholds));
      const auto truth = derive_labels(a, g);
      for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != truth.labels[i] && fixes(kLabelDecision, i)) {
          labels[i] = truth.labels[i];
          ++out.labels_fixed;
        }
      }
      MaskedLabels masked;
      const auto filled = fill_labels(a, u.asr_or_null(), labels, filler, &masked);
      const auto targets = slot_targets(truth, masked);
      std::vector<std::vector<std::string>> words;
      for (std::size_t k = 0; k < filled.fills.size(); ++k) {
        words.push_back(filled.fills[k].words);
        if (words.back() != targets[k] && fixes(kFillDecision, k)) {
          words.back() = targets[k];
          ++out.fills_restored;
        }
      }
      hyp = splice(masked.masked.transcript, words);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kTooLong) throw;
      ++out.fallbacks;
    }
    out.wer += wer(hyp, g);
  }
  return out;
}

}  // namespace htec
