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

#include "htec/filler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "htec/errors.hpp"

namespace htec {

using tensor::Tensor;

namespace {

std::vector<double> log_softmax(std::span<const double> row) {
  const double peak = *std::max_element(row.begin(), row.end());
  double z = 0;
  for (double v : row) z += std::exp(v - peak);
  const double lz = peak + std::log(z);
  std::vector<double> out(row.size());
  for (std::size_t i = 0; i < row.size(); ++i) out[i] = row[i] - lz;
  return out;
}

bool emittable(std::size_t id, bool allow_end) {
  if (id == static_cast<std::size_t>(Vocabulary::kEndOfFill)) return allow_end;
  return id >= static_cast<std::size_t>(Vocabulary::kSpecialCount);
}

/// Ids of the k best emittable tokens, best first (ties by id).
std::vector<std::size_t> top_tokens(const std::vector<double>& lp, std::size_t k, bool allow_end) {
  std::vector<std::size_t> ids;
  for (std::size_t i = 0; i < lp.size(); ++i)
    if (emittable(i, allow_end)) ids.push_back(i);
  k = std::min(k, ids.size());
  std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k), ids.end(),
                    [&](std::size_t a, std::size_t b) { return lp[a] > lp[b] || (lp[a] == lp[b] && a < b); });
  ids.resize(k);
  return ids;
}

Tensor encode_masked(const ModelBundle& b, const Transcript& t, const Transcript* asr, const Phonemizer& ph) {
  return encode(b, embed_input(b, prepare_input(b, t, asr, ph)));
}

void sort_candidates(std::vector<FillCandidate>& c) {
  std::stable_sort(c.begin(), c.end(), [](const FillCandidate& a, const FillCandidate& b) { return a.score > b.score; });
}

/// Greedy completion of one AR branch that starts with `first`.
FillCandidate complete_branch(const ModelBundle& b, const Tensor& h, std::size_t mask_pos, std::size_t first,
                              double first_lp) {
  const auto& vocab = b.vocab();
  std::vector<TokenId> prefix{Vocabulary::kBegin, static_cast<TokenId>(first)};
  FillCandidate c;
  c.words.push_back(vocab.token(static_cast<TokenId>(first)));
  double total = first_lp;
  std::size_t emitted = 1;
  while (c.words.size() < kMaxFillWords) {
    const auto logits = decode_ar(b, h, mask_pos, prefix);
    const std::size_t v = vocab.size();
    const auto lp = log_softmax(logits.data().subspan((prefix.size() - 1) * v, v));
    const auto next = top_tokens(lp, 1, true);
    if (next.empty()) break;
    total += lp[next[0]];
    ++emitted;
    if (next[0] == static_cast<std::size_t>(Vocabulary::kEndOfFill)) break;
    prefix.push_back(static_cast<TokenId>(next[0]));
    c.words.push_back(vocab.token(static_cast<TokenId>(next[0])));
  }
  c.score = total / static_cast<double>(emitted);
  return c;
}

FillResult fill_nar(const ModelBundle& b, const Transcript& masked, const Transcript* asr, std::size_t n_best,
                    const Phonemizer& ph) {
  FillResult out;
  out.filled = masked;
  const auto masks = mask_positions(masked);
  if (masks.empty()) return out;
  const Tensor h = encode_masked(b, masked, asr, ph);
  out.iterations = 1;
  std::vector<std::size_t> seq;
  for (auto m : masks) seq.push_back(EncoderInput::annotator_position(m));
  const auto logits = decode_nar(b, h, seq);
  const std::size_t v = b.vocab().size();
  for (std::size_t k = 0; k < masks.size(); ++k) {
    const auto lp = log_softmax(logits.data().subspan(k * v, v));
    MaskFill f;
    f.position = masks[k];
    for (auto id : top_tokens(lp, std::max<std::size_t>(n_best, 1), false))
      f.candidates.push_back({{b.vocab().token(static_cast<TokenId>(id))}, lp[id]});
    if (f.candidates.empty()) throw Error(ErrorCode::kConfigError, "vocabulary has no fillable tokens");
    f.words = f.candidates.front().words;
    f.score = f.candidates.front().score;
    out.filled.words[masks[k]] = f.words.front();
    out.fills.push_back(std::move(f));
  }
  out.filled.raw = out.filled.text();
  return out;
}

FillResult fill_ar(const ModelBundle& b, const Transcript& masked, const Transcript* asr, std::size_t n_best,
                   const Phonemizer& ph) {
  FillResult out;
  Transcript current = masked;
  const auto original = mask_positions(masked);
  const std::size_t branches = std::max<std::size_t>(n_best, 1);
  for (std::size_t k = 0; k < original.size(); ++k) {
    require_model_length(current, "partially filled transcript");
    const auto masks = mask_positions(current);
    const std::size_t at = masks.front();
    const std::size_t seq = EncoderInput::annotator_position(at);
    const Tensor h = encode_masked(b, current, asr, ph);
    ++out.iterations;

    const std::vector<TokenId> start{Vocabulary::kBegin};
    const std::size_t v = b.vocab().size();
    const auto lp = log_softmax(decode_ar(b, h, seq, start).data().subspan(0, v));
    const auto firsts = top_tokens(lp, branches, false);
    if (firsts.empty()) throw Error(ErrorCode::kConfigError, "vocabulary has no fillable tokens");

    MaskFill f;
    f.position = original[k];
    for (auto id : firsts) f.candidates.push_back(complete_branch(b, h, seq, id, lp[id]));
    // The greedy fill is the branch that starts with the top first token.
    f.words = f.candidates.front().words;
    f.score = f.candidates.front().score;
    sort_candidates(f.candidates);

    current.words.erase(current.words.begin() + static_cast<std::ptrdiff_t>(at));
    current.words.insert(current.words.begin() + static_cast<std::ptrdiff_t>(at), f.words.begin(), f.words.end());
    out.fills.push_back(std::move(f));
  }
  require_model_length(current, "filled transcript");
  current.raw = current.text();
  out.filled = std::move(current);
  return out;
}

}  // namespace

double FillResult::score() const {
  if (fills.empty()) return 0.0;
  double s = 0;
  for (const auto& f : fills) s += f.score;
  return s / static_cast<double>(fills.size());
}

FillResult fill(const ModelBundle& bundle, const Transcript& masked, const Transcript* asr, std::size_t n_best,
                const Phonemizer& phonemizer) {
  if (bundle.config().kind != ModelKind::kFiller) throw Error(ErrorCode::kConfigError, "bundle is not a filler");
  require_model_length(masked, "masked transcript");
  tensor::NoGradGuard guard;
  if (bundle.config().decode_mode == DecodeMode::kNAR) return fill_nar(bundle, masked, asr, n_best, phonemizer);
  return fill_ar(bundle, masked, asr, n_best, phonemizer);
}

Transcript splice(const Transcript& masked, const std::vector<std::vector<std::string>>& fills) {
  Transcript out;
  std::size_t k = 0;
  for (const auto& w : masked.words) {
    if (w != kMaskToken) {
      out.words.push_back(w);
      continue;
    }
    if (k >= fills.size()) throw Error(ErrorCode::kShapeError, "fewer fills than masks");
    out.words.insert(out.words.end(), fills[k].begin(), fills[k].end());
    ++k;
  }
  if (k != fills.size()) throw Error(ErrorCode::kShapeError, "more fills than masks");
  out.raw = out.text();
  return out;
}

std::vector<FillResult> nbest(const ModelBundle& bundle, const Transcript& masked, const Transcript* asr, std::size_t n,
                              const Phonemizer& phonemizer) {
  if (n == 0) throw Error(ErrorCode::kConfigError, "n must be at least 1");
  const auto base = fill(bundle, masked, asr, n, phonemizer);
  std::vector<FillResult> out{base};
  if (n == 1) return out;
  for (std::size_t j = 1; j < n; ++j) {
    FillResult r = base;
    std::vector<std::vector<std::string>> words;
    for (auto& f : r.fills) {
      const auto& c = f.candidates[std::min(j, f.candidates.size() - 1)];
      f.words = c.words;
      f.score = c.score;
      words.push_back(c.words);
    }
    r.filled = splice(masked, words);
    if (std::none_of(out.begin(), out.end(), [&](const FillResult& x) { return x.filled == r.filled; }))
      out.push_back(std::move(r));
  }
  std::stable_sort(out.begin(), out.end(), [](const FillResult& a, const FillResult& b) { return a.score() > b.score(); });
  return out;
}

}  // namespace htec
