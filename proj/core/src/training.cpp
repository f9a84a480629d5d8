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

#include "htec/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "htec/errors.hpp"

namespace htec {

using tensor::Tensor;

ClassWeighting parse_class_weighting(std::string_view s) {
  if (s == "uniform") return ClassWeighting::kUniform;
  if (s == "inverse-frequency" || s == "inverse_frequency") return ClassWeighting::kInverseFrequency;
  throw Error(ErrorCode::kConfigError, "unknown class weighting '" + std::string(s) + "'");
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::kConfigError, m); };
  if (batch_size == 0) fail("batch_size must be at least 1");
  if (max_epochs == 0) fail("max_epochs must be at least 1");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) fail("validation_fraction must be in [0, 1)");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) fail("learning_rate must be finite and >= 0");
  if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1)) fail("Adam betas must be in [0, 1)");
  if (!(epsilon > 0)) fail("epsilon must be positive");
  if (grad_clip < 0) fail("grad_clip must be >= 0");
}

double TrainConfig::rate_at(std::size_t step) const {
  if (warmup_steps == 0) return learning_rate;
  const double s = static_cast<double>(std::max<std::size_t>(step, 1));
  const double w = static_cast<double>(warmup_steps);
  return learning_rate * std::min(s / w, std::sqrt(w / s));
}

TrainConfig parse_train_config(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kConfigError, std::string("train config: ") + e.what());
  }
  TrainConfig c;
  try {
    for (auto& [key, v] : j.items()) {
      if (key == "batch_size") c.batch_size = v;
      else if (key == "max_epochs") c.max_epochs = v;
      else if (key == "patience") c.patience = v;
      else if (key == "validation_fraction") c.validation_fraction = v;
      else if (key == "learning_rate") c.learning_rate = v;
      else if (key == "warmup_steps") c.warmup_steps = v;
      else if (key == "beta1") c.beta1 = v;
      else if (key == "beta2") c.beta2 = v;
      else if (key == "epsilon") c.epsilon = v;
      else if (key == "grad_clip") c.grad_clip = v;
      else if (key == "class_weighting") c.class_weighting = parse_class_weighting(v.get<std::string>());
      else if (key == "seed") c.seed = v;
      else throw Error(ErrorCode::kConfigError, "unknown train config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kConfigError, std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

Split split_indices(std::size_t n, double validation_fraction) {
  const auto held = static_cast<std::size_t>(std::llround(static_cast<double>(n) * validation_fraction));
  Split s;
  for (std::size_t i = 0; i < n; ++i) (i < n - held ? s.train : s.validation).push_back(i);
  return s;
}

namespace {

bool fits(const Transcript& t) { return t.size() <= kMaxWords; }

const Transcript& annotator_of(const Utterance& u) {
  if (!u.annotator) throw Error(ErrorCode::kParseError, "utterance '" + u.id + "' has no annotator transcript");
  if (!u.gold) throw Error(ErrorCode::kMissingGold, "utterance '" + u.id + "' has no gold transcript");
  return *u.annotator;
}

}  // namespace

CheckerDataset make_checker_dataset(const std::vector<Utterance>& corpus, const TrainConfig& config) {
  config.validate();
  CheckerDataset out;
  const auto split = split_indices(corpus.size(), config.validation_fraction);
  auto build = [&](const std::vector<std::size_t>& idx, std::vector<CheckerSample>& dst) {
    for (auto i : idx) {
      const auto& u = corpus[i];
      const auto& a = annotator_of(u);
      if (!fits(a) || (u.asr && !fits(*u.asr))) {
        ++out.excluded;
        continue;
      }
      auto pair = derive_labels(a, *u.gold);
      dst.push_back({a, u.asr, std::move(pair.labels)});
    }
  };
  build(split.train, out.train);
  build(split.validation, out.validation);
  if (out.excluded) spdlog::info("checker dataset: excluded {} over-length utterances", out.excluded);
  return out;
}

std::vector<FillerSample> filler_samples(const LabeledPair& pair, const std::optional<Transcript>& asr, DecodeMode mode) {
  std::vector<FillerSample> out;
  if (mode == DecodeMode::kNAR) {
    auto m = labels_to_masked_expanded(pair);
    if (m.slots.empty()) return out;
    FillerSample s;
    s.masked = m.masked.transcript;
    s.asr = asr;
    s.target_masks = m.masked.mask_positions;
    for (const auto& slot : m.slots) s.targets.push_back(slot_gold(pair.fills[slot.word_index], slot, true));
    out.push_back(std::move(s));
    return out;
  }
  auto m = labels_to_masked(pair.annotator, pair.labels);
  std::vector<std::vector<std::string>> gold;
  for (const auto& slot : m.slots) gold.push_back(slot_gold(pair.fills[slot.word_index], slot, false));
  for (std::size_t k = 0; k < m.slots.size(); ++k) {
    FillerSample s;
    s.asr = asr;
    std::size_t mask_seen = 0;
    for (const auto& w : m.masked.transcript.words) {
      if (w != kMaskToken) {
        s.masked.words.push_back(w);
        continue;
      }
      if (mask_seen < k) {
        s.masked.words.insert(s.masked.words.end(), gold[mask_seen].begin(), gold[mask_seen].end());
      } else {
        if (mask_seen == k) s.target_masks.push_back(s.masked.words.size());
        s.masked.words.emplace_back(kMaskToken);
      }
      ++mask_seen;
    }
    s.masked.raw = s.masked.text();
    s.targets.push_back(gold[k]);
    out.push_back(std::move(s));
  }
  return out;
}

FillerDataset make_filler_dataset(const std::vector<Utterance>& corpus, DecodeMode mode, const TrainConfig& config) {
  config.validate();
  FillerDataset out;
  const auto split = split_indices(corpus.size(), config.validation_fraction);
  auto build = [&](const std::vector<std::size_t>& idx, std::vector<FillerSample>& dst) {
    for (auto i : idx) {
      const auto& u = corpus[i];
      const auto& a = annotator_of(u);
      if (!fits(a) || (u.asr && !fits(*u.asr))) {
        ++out.excluded;
        continue;
      }
      for (auto& s : filler_samples(derive_labels(a, *u.gold), u.asr, mode)) {
        if (!fits(s.masked)) {
          ++out.excluded;
          continue;
        }
        dst.push_back(std::move(s));
      }
    }
  };
  build(split.train, out.train);
  build(split.validation, out.validation);
  if (out.excluded) spdlog::info("filler dataset: excluded {} over-length inputs", out.excluded);
  return out;
}

std::vector<FillerSample> augment_two_gram(const std::vector<Transcript>& gold, std::size_t multiplier,
                                           std::uint64_t seed) {
  std::vector<FillerSample> out;
  std::mt19937_64 rng(seed);
  for (const auto& g : gold) {
    if (g.size() < 3) continue;
    for (std::size_t r = 0; r < multiplier; ++r) {
      const std::size_t start = static_cast<std::size_t>(rng() % (g.size() - 1));
      FillerSample s;
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (i == start) {
          s.target_masks.push_back(s.masked.words.size());
          s.masked.words.emplace_back(kMaskToken);
        } else if (i != start + 1) {
          s.masked.words.push_back(g.words[i]);
        }
      }
      s.masked.raw = s.masked.text();
      s.targets.push_back({g.words[start], g.words[start + 1]});
      out.push_back(std::move(s));
    }
  }
  return out;
}

std::array<double, kLabelCount> class_weights(std::span<const CheckerSample> samples, ClassWeighting weighting) {
  std::array<double, kLabelCount> w;
  w.fill(1.0);
  if (weighting == ClassWeighting::kUniform) return w;
  std::array<double, kLabelCount> counts{};
  for (const auto& s : samples)
    for (auto l : s.labels) counts[static_cast<std::size_t>(l)] += 1;
  double total = 0;
  int present = 0;
  for (std::size_t c = 0; c < kLabelCount; ++c) {
    if (counts[c] > 0) {
      total += 1.0 / counts[c];
      ++present;
    }
  }
  if (present == 0) return w;
  const double mean = total / present;
  for (std::size_t c = 0; c < kLabelCount; ++c)
    if (counts[c] > 0) w[c] = (1.0 / counts[c]) / mean;
  return w;
}

Vocabulary corpus_vocab(const std::vector<Utterance>& corpus, std::size_t min_count) {
  std::vector<Transcript> all;
  for (const auto& u : corpus) {
    if (u.gold) all.push_back(*u.gold);
    if (u.annotator) all.push_back(*u.annotator);
    if (u.asr) all.push_back(*u.asr);
  }
  return build_vocab(all, min_count);
}

namespace {

const Transcript* asr_ptr(const std::optional<Transcript>& asr) { return asr && !asr->empty() ? &*asr : nullptr; }

// Unknown target words are not trained towards.
std::int32_t target_id(const Vocabulary& v, const std::string& w) {
  const auto id = v.id(w);
  return id == Vocabulary::kUnk ? -1 : id;
}

Tensor encode_sample(const ModelBundle& b, const Transcript& t, const std::optional<Transcript>& asr,
                     const Phonemizer& ph) {
  const auto in = prepare_input(b, t, asr_ptr(asr), ph);
  return encode(b, embed_input(b, in));
}

}  // namespace

Tensor checker_loss(const ModelBundle& bundle, const CheckerSample& sample, std::span<const double> weights,
                    const Phonemizer& phonemizer) {
  const Tensor h = encode_sample(bundle, sample.annotator, sample.asr, phonemizer);
  const Tensor logits = checker_logits(bundle, h, sample.annotator.size());
  std::vector<std::int32_t> targets;
  for (auto l : sample.labels) targets.push_back(static_cast<std::int32_t>(l));
  return tensor::cross_entropy(logits, targets, weights);
}

Tensor filler_loss(const ModelBundle& bundle, const FillerSample& sample, const Phonemizer& phonemizer) {
  const auto& vocab = bundle.vocab();
  const Tensor h = encode_sample(bundle, sample.masked, sample.asr, phonemizer);
  if (bundle.config().decode_mode == DecodeMode::kNAR) {
    std::vector<std::size_t> positions;
    std::vector<std::int32_t> targets;
    for (std::size_t k = 0; k < sample.target_masks.size(); ++k) {
      positions.push_back(EncoderInput::annotator_position(sample.target_masks[k]));
      targets.push_back(sample.targets[k].empty() ? -1 : target_id(vocab, sample.targets[k].front()));
    }
    return tensor::cross_entropy(decode_nar(bundle, h, positions), targets);
  }
  Tensor total;
  for (std::size_t k = 0; k < sample.target_masks.size(); ++k) {
    std::vector<TokenId> prefix{Vocabulary::kBegin};
    std::vector<std::int32_t> targets;
    for (const auto& w : sample.targets[k]) {
      prefix.push_back(vocab.id(w));
      targets.push_back(target_id(vocab, w));
    }
    targets.push_back(Vocabulary::kEndOfFill);
    const Tensor logits = decode_ar(bundle, h, EncoderInput::annotator_position(sample.target_masks[k]), prefix);
    const Tensor loss = tensor::cross_entropy(logits, targets);
    total = total.defined() ? tensor::add(total, loss) : loss;
  }
  return total;
}

TrainResult train_model(ModelBundle& bundle, std::size_t train_count, const ExampleLoss& train_loss,
                        std::size_t validation_count, const ExampleLoss& validation_loss, const TrainConfig& config,
                        const std::function<void(const EpochRecord&)>& on_epoch) {
  config.validate();
  auto params = bundle.parameter_tensors();
  std::vector<std::vector<double>> m1(params.size()), m2(params.size());
  for (std::size_t p = 0; p < params.size(); ++p) {
    m1[p].assign(params[p].size(), 0.0);
    m2[p].assign(params[p].size(), 0.0);
  }
  auto snapshot = [&] {
    std::vector<std::vector<double>> s;
    for (auto& p : params) s.emplace_back(p.data().begin(), p.data().end());
    return s;
  };
  auto restore = [&](const std::vector<std::vector<double>>& s) {
    for (std::size_t p = 0; p < params.size(); ++p) std::copy(s[p].begin(), s[p].end(), params[p].mutable_data().begin());
  };

  TrainResult result;
  auto best = snapshot();
  double best_loss = INFINITY;
  std::size_t since_best = 0;
  std::vector<std::size_t> order(train_count);
  std::iota(order.begin(), order.end(), 0);

  auto diverged = [&](std::size_t epoch) {
    restore(best);
    bundle.zero_grad();
    bundle.refresh_version();
    throw Error(ErrorCode::kDiverged, "loss became non-finite in epoch " + std::to_string(epoch) +
                                          "; restored the last good weights");
  };

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    std::mt19937_64 rng(config.seed * 1000003ULL + epoch);
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0;
    for (std::size_t start = 0; start < train_count; start += config.batch_size) {
      const std::size_t end = std::min(train_count, start + config.batch_size);
      const double inv = 1.0 / static_cast<double>(end - start);
      bundle.zero_grad();
      for (std::size_t k = start; k < end; ++k) {
        const Tensor loss = train_loss(order[k]);
        const double v = loss.item();
        if (!std::isfinite(v)) diverged(epoch);
        epoch_loss += v;
        tensor::scale(loss, inv).backward();
      }
      double norm2 = 0;
      for (auto& p : params)
        for (double g : p.grad()) norm2 += g * g;
      if (!std::isfinite(norm2)) diverged(epoch);
      const double clip =
          config.grad_clip > 0 && std::sqrt(norm2) > config.grad_clip ? config.grad_clip / std::sqrt(norm2) : 1.0;

      ++result.steps;
      const double lr = config.rate_at(result.steps);
      const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(result.steps));
      const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(result.steps));
      for (std::size_t p = 0; p < params.size(); ++p) {
        const auto g = params[p].grad();
        auto w = params[p].mutable_data();
        for (std::size_t i = 0; i < w.size(); ++i) {
          const double gi = g.empty() ? 0.0 : g[i] * clip;
          m1[p][i] = config.beta1 * m1[p][i] + (1 - config.beta1) * gi;
          m2[p][i] = config.beta2 * m2[p][i] + (1 - config.beta2) * gi * gi;
          w[i] -= lr * (m1[p][i] / c1) / (std::sqrt(m2[p][i] / c2) + config.epsilon);
        }
      }
    }
    bundle.zero_grad();

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = train_count ? epoch_loss / static_cast<double>(train_count) : 0.0;
    rec.learning_rate = config.rate_at(std::max<std::size_t>(result.steps, 1));
    double monitored = rec.train_loss;
    if (validation_count > 0) {
      tensor::NoGradGuard guard;
      double v = 0;
      for (std::size_t i = 0; i < validation_count; ++i) v += validation_loss(i).item();
      rec.val_loss = v / static_cast<double>(validation_count);
      if (!std::isfinite(rec.val_loss)) diverged(epoch);
      monitored = rec.val_loss;
    } else {
      rec.val_loss = rec.train_loss;
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (monitored < best_loss) {
      best_loss = monitored;
      best = snapshot();
      result.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= config.patience && config.patience > 0) {
      result.early_stopped = true;
      break;
    }
  }
  restore(best);
  bundle.refresh_version();
  return result;
}

TrainResult train_checker(ModelBundle& bundle, const CheckerDataset& data, const TrainConfig& config,
                          const std::function<void(const EpochRecord&)>& on_epoch) {
  const auto weights = class_weights(data.train, config.class_weighting);
  const std::span<const double> w(weights.data(), weights.size());
  return train_model(
      bundle, data.train.size(), [&](std::size_t i) { return checker_loss(bundle, data.train[i], w); },
      data.validation.size(), [&](std::size_t i) { return checker_loss(bundle, data.validation[i], w); }, config,
      on_epoch);
}

TrainResult train_filler(ModelBundle& bundle, const FillerDataset& data, const TrainConfig& config,
                         const std::function<void(const EpochRecord&)>& on_epoch) {
  return train_model(
      bundle, data.train.size(), [&](std::size_t i) { return filler_loss(bundle, data.train[i]); },
      data.validation.size(), [&](std::size_t i) { return filler_loss(bundle, data.validation[i]); }, config,
      on_epoch);
}

namespace {

std::size_t argmax_row(std::span<const double> row, bool allow_end_of_fill) {
  std::size_t best = 0;
  double best_v = -INFINITY;
  for (std::size_t c = 0; c < row.size(); ++c) {
    const bool special = c < static_cast<std::size_t>(Vocabulary::kSpecialCount);
    if (special && !(allow_end_of_fill && c == static_cast<std::size_t>(Vocabulary::kEndOfFill))) continue;
    if (row[c] > best_v) {
      best_v = row[c];
      best = c;
    }
  }
  return best;
}

}  // namespace

double checker_accuracy(const ModelBundle& bundle, std::span<const CheckerSample> samples) {
  tensor::NoGradGuard guard;
  std::size_t right = 0, total = 0;
  for (const auto& s : samples) {
    const Tensor h = encode_sample(bundle, s.annotator, s.asr, Phonemizer::shared());
    const Tensor logits = checker_logits(bundle, h, s.annotator.size());
    for (std::size_t i = 0; i < s.labels.size(); ++i) {
      std::size_t best = 0;
      for (std::size_t c = 1; c < kLabelCount; ++c)
        if (logits.at(i * kLabelCount + c) > logits.at(i * kLabelCount + best)) best = c;
      right += best == static_cast<std::size_t>(s.labels[i]) ? 1 : 0;
      ++total;
    }
  }
  return total ? static_cast<double>(right) / static_cast<double>(total) : 1.0;
}

double filler_accuracy(const ModelBundle& bundle, std::span<const FillerSample> samples) {
  tensor::NoGradGuard guard;
  const auto& vocab = bundle.vocab();
  const std::size_t v = vocab.size();
  std::size_t right = 0, total = 0;
  for (const auto& s : samples) {
    const Tensor h = encode_sample(bundle, s.masked, s.asr, Phonemizer::shared());
    if (bundle.config().decode_mode == DecodeMode::kNAR) {
      std::vector<std::size_t> positions;
      for (auto m : s.target_masks) positions.push_back(EncoderInput::annotator_position(m));
      const Tensor logits = decode_nar(bundle, h, positions);
      for (std::size_t k = 0; k < positions.size(); ++k) {
        if (s.targets[k].empty()) continue;
        const auto row = logits.data().subspan(k * v, v);
        right += vocab.token(static_cast<TokenId>(argmax_row(row, false))) == s.targets[k].front() ? 1 : 0;
        ++total;
      }
      continue;
    }
    for (std::size_t k = 0; k < s.target_masks.size(); ++k) {
      std::vector<TokenId> prefix{Vocabulary::kBegin};
      for (const auto& w : s.targets[k]) prefix.push_back(vocab.id(w));
      const Tensor logits = decode_ar(bundle, h, EncoderInput::annotator_position(s.target_masks[k]), prefix);
      for (std::size_t t = 0; t < s.targets[k].size(); ++t) {
        const auto row = logits.data().subspan(t * v, v);
        right += vocab.token(static_cast<TokenId>(argmax_row(row, t > 0))) == s.targets[k][t] ? 1 : 0;
        ++total;
      }
    }
  }
  return total ? static_cast<double>(right) / static_cast<double>(total) : 1.0;
}

}  // namespace htec
