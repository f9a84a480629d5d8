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
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "htec/align.hpp"
#include "htec/corpus.hpp"
#include "htec/model.hpp"

namespace htec {

enum class ClassWeighting : std::uint8_t { kUniform, kInverseFrequency };
ClassWeighting parse_class_weighting(std::string_view s);

struct TrainConfig {
  std::size_t batch_size = 64;
  std::size_t max_epochs = 30;
  std::size_t patience = 3;
  /// Share of the corpus held out for early stopping. Zero trains on
  /// everything and early-stops on the training loss.
  double validation_fraction = 0.10;
  double learning_rate = 1e-3;  // peak, reached at the end of warmup
  std::size_t warmup_steps = 500;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double grad_clip = 1.0;  // global L2 norm; 0 disables
  ClassWeighting class_weighting = ClassWeighting::kUniform;
  std::uint64_t seed = 1;

  /// Throws ConfigError.
  void validate() const;
  /// Learning rate for 1-based optimizer step `step`.
  double rate_at(std::size_t step) const;
};

/// Reads a JSON object of TrainConfig fields; unspecified fields keep their
/// defaults. Throws ConfigError for unknown keys.
TrainConfig parse_train_config(const std::string& json_text);

struct CheckerSample {
  Transcript annotator;
  std::optional<Transcript> asr;
  std::vector<EditLabel> labels;
};

/// Masked input with targets for some of its masks. For AR samples exactly
/// one mask is targeted and its target may hold several words; NAR samples
/// target every mask with one word each.
struct FillerSample {
  Transcript masked;
  std::optional<Transcript> asr;
  std::vector<std::size_t> target_masks;  // word indices of targeted masks
  std::vector<std::vector<std::string>> targets;
};

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

/// Holds out round(n * fraction) items from the end of the corpus.
Split split_indices(std::size_t n, double validation_fraction);

struct CheckerDataset {
  std::vector<CheckerSample> train;
  std::vector<CheckerSample> validation;
  std::size_t excluded = 0;  // over-length utterances
};

/// Labels each utterance against its gold with derive_labels.
CheckerDataset make_checker_dataset(const std::vector<Utterance>& corpus, const TrainConfig& config);

struct FillerDataset {
  std::vector<FillerSample> train;
  std::vector<FillerSample> validation;
  std::size_t excluded = 0;
};

/// AR: one sample per mask of labels_to_masked, earlier masks already
/// replaced by their gold words. NAR: one sample per utterance over the
/// expanded masking, so every mask carries exactly one target word.
std::vector<FillerSample> filler_samples(const LabeledPair& pair, const std::optional<Transcript>& asr, DecodeMode mode);
FillerDataset make_filler_dataset(const std::vector<Utterance>& corpus, DecodeMode mode, const TrainConfig& config);

/// Replaces a random two-word span with one mask, `multiplier` times per
/// sentence of at least three words. AR-only augmentation.
std::vector<FillerSample> augment_two_gram(const std::vector<Transcript>& gold, std::size_t multiplier,
                                           std::uint64_t seed);

/// Inverse-frequency weights normalized to mean 1 over the classes present;
/// absent classes get weight 1. Uniform weighting returns all ones.
std::array<double, kLabelCount> class_weights(std::span<const CheckerSample> samples, ClassWeighting weighting);

/// Vocabulary over gold, annotator and ASR words of a corpus.
Vocabulary corpus_vocab(const std::vector<Utterance>& corpus, std::size_t min_count);

/// Summed cross-entropy of one sample.
tensor::Tensor checker_loss(const ModelBundle& bundle, const CheckerSample& sample,
                            std::span<const double> class_weights = {},
                            const Phonemizer& phonemizer = Phonemizer::shared());
tensor::Tensor filler_loss(const ModelBundle& bundle, const FillerSample& sample,
                           const Phonemizer& phonemizer = Phonemizer::shared());

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double learning_rate = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  std::size_t steps = 0;
  bool early_stopped = false;
};

using ExampleLoss = std::function<tensor::Tensor(std::size_t index)>;

/// Mini-batch Adam over `train_count` examples with early stopping on the
/// validation loss (or the training loss when there is no validation
/// data). The batch loss is the mean of per-example losses. The best epoch's
/// weights are restored at the end. Throws DivergedError after restoring the
/// last good weights when a loss turns non-finite.
TrainResult train_model(ModelBundle& bundle, std::size_t train_count, const ExampleLoss& train_loss,
                        std::size_t validation_count, const ExampleLoss& validation_loss, const TrainConfig& config,
                        const std::function<void(const EpochRecord&)>& on_epoch = {});

TrainResult train_checker(ModelBundle& bundle, const CheckerDataset& data, const TrainConfig& config,
                          const std::function<void(const EpochRecord&)>& on_epoch = {});
TrainResult train_filler(ModelBundle& bundle, const FillerDataset& data, const TrainConfig& config,
                         const std::function<void(const EpochRecord&)>& on_epoch = {});

/// Fraction of words whose argmax label matches.
double checker_accuracy(const ModelBundle& bundle, std::span<const CheckerSample> samples);
/// Fraction of target words reproduced under teacher forcing (AR) or by the
/// per-mask argmax (NAR), with special tokens excluded from prediction.
double filler_accuracy(const ModelBundle& bundle, std::span<const FillerSample> samples);

}  // namespace htec
