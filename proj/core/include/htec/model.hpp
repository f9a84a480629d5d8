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

// Transformer models for edit tagging (checker) and mask filling (filler).
//
// Input rows are X = E[token] + P[position] + PH, where PH is the phoneme
// embedding of the word (a width-3 convolution over its phoneme ids followed
// by pooling over the phoneme axis). Only annotator words carry real
// phonemes; every other row uses the embedding of the all-pad phoneme row.
// ASR rows additionally receive a learned segment offset.
//
// The sequence layout is  <s> annotator [<sep> asr] </s>.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "htec/phoneme.hpp"
#include "htec/tensor.hpp"
#include "htec/textcore.hpp"

namespace htec {

enum class ModelKind : std::uint8_t { kChecker, kFiller };
enum class DecodeMode : std::uint8_t { kAR, kNAR };
enum class Pooling : std::uint8_t { kMax, kMean };

std::string_view to_string(ModelKind kind);
std::string_view to_string(DecodeMode mode);
std::string_view to_string(Pooling pooling);
/// Throws ConfigError for unknown names.
ModelKind parse_model_kind(std::string_view s);
DecodeMode parse_decode_mode(std::string_view s);
Pooling parse_pooling(std::string_view s);

struct ModelConfig {
  ModelKind kind = ModelKind::kChecker;
  std::size_t layers_enc = 4;
  std::size_t layers_dec = 4;
  std::size_t model_dim = 128;
  std::size_t heads = 4;
  std::size_t ff_dim = 512;
  std::size_t max_words = kMaxWords;
  std::size_t max_phonemes = kMaxPhonemes;
  std::size_t vocab_size = 0;
  std::size_t phoneme_vocab = kPhonemeSymbols + 1;
  std::size_t phoneme_dim = 32;
  std::size_t label_count = 7;
  DecodeMode decode_mode = DecodeMode::kNAR;
  Pooling pooling = Pooling::kMax;
  std::uint64_t seed = 1;
  // Reference depth of the full-size architecture; informational only.
  std::size_t reference_layers_enc = 12;
  std::size_t reference_layers_dec = 12;

  /// 2 * max_words + 3: begin, separator and end around both segments.
  std::size_t max_sequence() const { return 2 * max_words + 3; }
  /// Throws ConfigError.
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Applies a JSON object of architecture fields (layers_enc, layers_dec,
/// model_dim, heads, ff_dim, phoneme_dim, decode_mode, pooling, seed) to
/// `base`. Throws ConfigError for unknown keys or bad values.
ModelConfig apply_model_overrides(ModelConfig base, const std::string& json_text);

/// Named parameter tensors plus config and vocabulary. Parameters are
/// gradient-tracking leaves; inference runs under NoGradGuard and never
/// mutates them.
class ModelBundle {
 public:
  struct Param {
    std::string name;
    tensor::Tensor value;
  };

  ModelBundle() = default;
  /// Freshly initialized (seeded Xavier-uniform) parameters.
  static ModelBundle create(const ModelConfig& config, Vocabulary vocab);

  const ModelConfig& config() const { return config_; }
  const Vocabulary& vocab() const { return vocab_; }
  const std::vector<Param>& params() const { return params_; }
  std::vector<tensor::Tensor> parameter_tensors() const;
  std::size_t parameter_count() const;

  const tensor::Tensor& param(const std::string& name) const;
  bool has_param(const std::string& name) const { return index_.contains(name); }

  /// Names and shapes implied by a config, in checkpoint order.
  static std::vector<std::pair<std::string, tensor::Shape>> layout(const ModelConfig& config);

  /// Short content hash of the checkpoint bytes.
  const std::string& version() const { return version_; }
  void refresh_version();

  /// Copies values (not graph state) from `other`, which must share the layout.
  void assign_values(const ModelBundle& other);
  ModelBundle clone() const;
  void zero_grad();

 private:
  friend ModelBundle load_checkpoint_bytes(const std::string& bytes);
  void add(std::string name, tensor::Tensor value);

  ModelConfig config_;
  Vocabulary vocab_;
  std::vector<Param> params_;
  std::unordered_map<std::string, std::size_t> index_;
  std::string version_;
};

/// Token ids and phoneme rows for one encoder input.
struct EncoderInput {
  std::vector<TokenId> ids;
  /// Unique phoneme rows; the last one is always the pad row.
  std::vector<PhonemeRow> phoneme_rows;
  /// For every sequence position, the index into phoneme_rows.
  std::vector<std::int32_t> phoneme_index;
  /// 1 for ASR-segment rows.
  std::vector<std::uint8_t> asr_segment;
  std::size_t annotator_len = 0;

  std::size_t length() const { return ids.size(); }
  /// Sequence position of annotator word i.
  static std::size_t annotator_position(std::size_t i) { return i + 1; }
};

/// Throws TooLong when either segment exceeds max_words. An empty ASR
/// transcript is treated as absent.
EncoderInput prepare_input(const ModelBundle& bundle, const Transcript& annotator, const Transcript* asr,
                           const Phonemizer& phonemizer);

struct ForwardProbe {
  /// Receives every attention probability matrix as it is computed.
  std::function<void(const tensor::Tensor&)> on_attention;
};

/// Phoneme embeddings [rows, d] for the given phoneme rows.
tensor::Tensor phoneme_embedding(const ModelBundle& bundle, std::span<const PhonemeRow> rows);
/// [T, d] input embedding.
tensor::Tensor embed_input(const ModelBundle& bundle, const EncoderInput& input);
/// [T, d] encoder states.
tensor::Tensor encode(const ModelBundle& bundle, const tensor::Tensor& x, const ForwardProbe* probe = nullptr);
/// [annotator_len, 7] label logits.
tensor::Tensor checker_logits(const ModelBundle& bundle, const tensor::Tensor& h, std::size_t annotator_len);

/// AR decoder logits [prefix.size(), V] for the mask at sequence position
/// `mask_position`; `prefix` starts with the begin token.
tensor::Tensor decode_ar(const ModelBundle& bundle, const tensor::Tensor& h, std::size_t mask_position,
                         std::span<const TokenId> prefix, const ForwardProbe* probe = nullptr);
/// NAR decoder logits [masks, V], one row per mask position.
tensor::Tensor decode_nar(const ModelBundle& bundle, const tensor::Tensor& h,
                          std::span<const std::size_t> mask_positions, const ForwardProbe* probe = nullptr);

/// Checkpoint I/O. The format is a magic line, a JSON header padded with
/// spaces to a 64-byte boundary, then little-endian float32 payloads in
/// header order. Throws CorruptCheckpoint, VersionError or IoError.
std::string checkpoint_bytes(const ModelBundle& bundle);
ModelBundle load_checkpoint_bytes(const std::string& bytes);
void save_checkpoint(const ModelBundle& bundle, const std::filesystem::path& path);
ModelBundle load_checkpoint(const std::filesystem::path& path);

inline constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace htec
