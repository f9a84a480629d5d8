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

#include "htec/model.hpp"

#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include <json.hpp>

#include "htec/errors.hpp"
#include "htec/hashing.hpp"

namespace htec {

using tensor::Shape;
using tensor::Tensor;
using json = nlohmann::json;

namespace {

constexpr std::string_view kMagic = "HTEC1\n";
constexpr std::size_t kAlign = 64;

template <typename E, std::size_t N>
E parse_enum(std::string_view s, const std::array<std::string_view, N>& names, std::string_view what) {
  std::string lower(s);
  for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  for (std::size_t i = 0; i < N; ++i)
    if (names[i] == lower) return static_cast<E>(i);
  throw Error(ErrorCode::kConfigError, "unknown " + std::string(what) + " '" + std::string(s) + "'");
}

constexpr std::array<std::string_view, 2> kKinds = {"checker", "filler"};
constexpr std::array<std::string_view, 2> kModes = {"ar", "nar"};
constexpr std::array<std::string_view, 2> kPoolings = {"max", "mean"};

}  // namespace

std::string_view to_string(ModelKind kind) { return kKinds[static_cast<std::size_t>(kind)]; }
std::string_view to_string(DecodeMode mode) { return kModes[static_cast<std::size_t>(mode)]; }
std::string_view to_string(Pooling pooling) { return kPoolings[static_cast<std::size_t>(pooling)]; }
ModelKind parse_model_kind(std::string_view s) { return parse_enum<ModelKind>(s, kKinds, "model kind"); }
DecodeMode parse_decode_mode(std::string_view s) { return parse_enum<DecodeMode>(s, kModes, "decode mode"); }
Pooling parse_pooling(std::string_view s) { return parse_enum<Pooling>(s, kPoolings, "pooling"); }

void ModelConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::kConfigError, m); };
  if (model_dim == 0 || heads == 0 || model_dim % heads != 0)
    fail("model_dim " + std::to_string(model_dim) + " is not divisible by heads " + std::to_string(heads));
  if (max_words != kMaxWords) fail("max_words must be " + std::to_string(kMaxWords));
  if (max_phonemes != kMaxPhonemes) fail("max_phonemes must be " + std::to_string(kMaxPhonemes));
  if (label_count != 7) fail("label_count must be 7");
  if (vocab_size < static_cast<std::size_t>(Vocabulary::kSpecialCount)) fail("vocab_size is smaller than the special tokens");
  if (phoneme_vocab != kPhonemeSymbols + 1) fail("phoneme_vocab must be 45");
  if (layers_enc == 0 || ff_dim == 0 || phoneme_dim == 0) fail("layer count and widths must be positive");
  if (kind == ModelKind::kFiller && layers_dec == 0) fail("a filler needs at least one decoder layer");
}

namespace {

json config_to_json(const ModelConfig& c) {
  return json{{"kind", to_string(c.kind)},
              {"layers_enc", c.layers_enc},
              {"layers_dec", c.layers_dec},
              {"model_dim", c.model_dim},
              {"heads", c.heads},
              {"ff_dim", c.ff_dim},
              {"max_words", c.max_words},
              {"max_phonemes", c.max_phonemes},
              {"vocab_size", c.vocab_size},
              {"phoneme_vocab", c.phoneme_vocab},
              {"phoneme_dim", c.phoneme_dim},
              {"label_count", c.label_count},
              {"decode_mode", to_string(c.decode_mode)},
              {"pooling", to_string(c.pooling)},
              {"seed", c.seed},
              {"reference_layers_enc", c.reference_layers_enc},
              {"reference_layers_dec", c.reference_layers_dec}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.kind = parse_model_kind(j.at("kind").get<std::string>());
  c.layers_enc = j.at("layers_enc");
  c.layers_dec = j.at("layers_dec");
  c.model_dim = j.at("model_dim");
  c.heads = j.at("heads");
  c.ff_dim = j.at("ff_dim");
  c.max_words = j.at("max_words");
  c.max_phonemes = j.at("max_phonemes");
  c.vocab_size = j.at("vocab_size");
  c.phoneme_vocab = j.at("phoneme_vocab");
  c.phoneme_dim = j.at("phoneme_dim");
  c.label_count = j.at("label_count");
  c.decode_mode = parse_decode_mode(j.at("decode_mode").get<std::string>());
  c.pooling = parse_pooling(j.at("pooling").get<std::string>());
  c.seed = j.at("seed");
  c.reference_layers_enc = j.value("reference_layers_enc", std::size_t{12});
  c.reference_layers_dec = j.value("reference_layers_dec", std::size_t{12});
  return c;
}

}  // namespace

ModelConfig apply_model_overrides(ModelConfig base, const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfigError, std::string("model config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::kConfigError, "model config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "layers_enc") base.layers_enc = value.get<std::size_t>();
      else if (key == "layers_dec") base.layers_dec = value.get<std::size_t>();
      else if (key == "model_dim") base.model_dim = value.get<std::size_t>();
      else if (key == "heads") base.heads = value.get<std::size_t>();
      else if (key == "ff_dim") base.ff_dim = value.get<std::size_t>();
      else if (key == "phoneme_dim") base.phoneme_dim = value.get<std::size_t>();
      else if (key == "decode_mode") base.decode_mode = parse_decode_mode(value.get<std::string>());
      else if (key == "pooling") base.pooling = parse_pooling(value.get<std::string>());
      else if (key == "seed") base.seed = value.get<std::uint64_t>();
      else throw Error(ErrorCode::kConfigError, "unknown model config key '" + key + "'");
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kConfigError, "bad value for model config key '" + key + "': " + e.what());
    }
  }
  return base;
}

namespace {

void add_attention(std::vector<std::pair<std::string, Shape>>& out, const std::string& p, std::size_t d) {
  for (const char* m : {"q", "k", "v", "o"}) {
    out.emplace_back(p + "." + m + ".weight", Shape{d, d});
    out.emplace_back(p + "." + m + ".bias", Shape{d});
  }
}

void add_norm(std::vector<std::pair<std::string, Shape>>& out, const std::string& p, std::size_t d) {
  out.emplace_back(p + ".gain", Shape{d});
  out.emplace_back(p + ".bias", Shape{d});
}

void add_ff(std::vector<std::pair<std::string, Shape>>& out, const std::string& p, std::size_t d, std::size_t ff) {
  out.emplace_back(p + ".w1", Shape{d, ff});
  out.emplace_back(p + ".b1", Shape{ff});
  out.emplace_back(p + ".w2", Shape{ff, d});
  out.emplace_back(p + ".b2", Shape{d});
}

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::string hex64(std::uint64_t v) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = kDigits[v & 0xF];
  return s;
}

}  // namespace

std::vector<std::pair<std::string, Shape>> ModelBundle::layout(const ModelConfig& c) {
  const std::size_t d = c.model_dim;
  std::vector<std::pair<std::string, Shape>> out;
  out.emplace_back("embed.token", Shape{c.vocab_size, d});
  out.emplace_back("embed.position", Shape{c.max_sequence(), d});
  out.emplace_back("embed.segment", Shape{1, d});
  out.emplace_back("phoneme.table", Shape{c.phoneme_vocab, c.phoneme_dim});
  out.emplace_back("phoneme.conv.weight", Shape{3 * c.phoneme_dim, d});
  out.emplace_back("phoneme.conv.bias", Shape{d});
  for (std::size_t l = 0; l < c.layers_enc; ++l) {
    const std::string p = "enc." + std::to_string(l);
    add_norm(out, p + ".ln1", d);
    add_attention(out, p + ".attn", d);
    add_norm(out, p + ".ln2", d);
    add_ff(out, p + ".ff", d, c.ff_dim);
  }
  add_norm(out, "enc.ln", d);
  if (c.kind == ModelKind::kChecker) {
    out.emplace_back("head.w1", Shape{d, d});
    out.emplace_back("head.b1", Shape{d});
    out.emplace_back("head.w2", Shape{d, c.label_count});
    out.emplace_back("head.b2", Shape{c.label_count});
  } else {
    for (std::size_t l = 0; l < c.layers_dec; ++l) {
      const std::string p = "dec." + std::to_string(l);
      add_norm(out, p + ".ln1", d);
      add_attention(out, p + ".self", d);
      add_norm(out, p + ".ln2", d);
      add_attention(out, p + ".cross", d);
      add_norm(out, p + ".ln3", d);
      add_ff(out, p + ".ff", d, c.ff_dim);
    }
    add_norm(out, "dec.ln", d);
  }
  return out;
}

void ModelBundle::add(std::string name, Tensor value) {
  index_.emplace(name, params_.size());
  params_.push_back({std::move(name), std::move(value)});
}

ModelBundle ModelBundle::create(const ModelConfig& config, Vocabulary vocab) {
  ModelConfig c = config;
  c.vocab_size = vocab.size();
  c.validate();
  ModelBundle b;
  b.config_ = c;
  b.vocab_ = std::move(vocab);
  std::mt19937_64 rng(c.seed);
  auto uniform = [&rng] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  for (auto& [name, shape] : layout(c)) {
    std::vector<double> v(tensor::element_count(shape), 0.0);
    if (ends_with(name, ".gain")) {
      std::fill(v.begin(), v.end(), 1.0);
    } else if (shape.size() == 2) {
      const double a = std::sqrt(6.0 / static_cast<double>(shape[0] + shape[1]));
      for (auto& x : v) x = (2.0 * uniform() - 1.0) * a;
    }
    b.add(name, Tensor::from(shape, std::move(v), true));
  }
  b.refresh_version();
  return b;
}

std::vector<Tensor> ModelBundle::parameter_tensors() const {
  std::vector<Tensor> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.value);
  return out;
}

std::size_t ModelBundle::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

const Tensor& ModelBundle::param(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error(ErrorCode::kConfigError, "model has no parameter '" + name + "'");
  return params_[it->second].value;
}

void ModelBundle::refresh_version() { version_ = hex64(fnv1a64(checkpoint_bytes(*this))); }

void ModelBundle::assign_values(const ModelBundle& other) {
  for (auto& p : params_) {
    const auto& src = other.param(p.name);
    if (src.shape() != p.value.shape()) throw Error(ErrorCode::kShapeError, "shape mismatch for " + p.name);
    std::copy(src.data().begin(), src.data().end(), p.value.mutable_data().begin());
  }
}

ModelBundle ModelBundle::clone() const {
  ModelBundle b;
  b.config_ = config_;
  b.vocab_ = vocab_;
  for (const auto& p : params_) {
    b.add(p.name, Tensor::from(p.value.shape(), std::vector<double>(p.value.data().begin(), p.value.data().end()),
                               p.value.requires_grad()));
  }
  b.version_ = version_;
  return b;
}

void ModelBundle::zero_grad() {
  for (auto& p : params_) p.value.zero_grad();
}

EncoderInput prepare_input(const ModelBundle& bundle, const Transcript& annotator, const Transcript* asr,
                           const Phonemizer& phonemizer) {
  require_model_length(annotator, "annotator transcript");
  if (asr) require_model_length(*asr, "ASR transcript");
  const auto& vocab = bundle.vocab();
  EncoderInput in;
  in.annotator_len = annotator.size();

  const auto matrix = phonemizer.phoneme_matrix(annotator);
  std::map<PhonemeRow, std::int32_t> unique;
  std::vector<std::int32_t> word_rows;
  const PhonemeRow pad = pad_row();
  for (const auto& row : matrix.rows) {
    if (row == pad) {
      word_rows.push_back(-1);
      continue;
    }
    auto [it, fresh] = unique.emplace(row, static_cast<std::int32_t>(in.phoneme_rows.size()));
    if (fresh) in.phoneme_rows.push_back(row);
    word_rows.push_back(it->second);
  }
  const auto pad_index = static_cast<std::int32_t>(in.phoneme_rows.size());
  in.phoneme_rows.push_back(pad);
  for (auto& r : word_rows)
    if (r < 0) r = pad_index;

  auto push = [&](TokenId id, std::int32_t ph, std::uint8_t seg) {
    in.ids.push_back(id);
    in.phoneme_index.push_back(ph);
    in.asr_segment.push_back(seg);
  };
  push(Vocabulary::kBegin, pad_index, 0);
  for (std::size_t i = 0; i < annotator.size(); ++i) push(vocab.id(annotator.words[i]), word_rows[i], 0);
  if (asr && !asr->empty()) {
    push(Vocabulary::kSep, pad_index, 0);
    for (const auto& w : asr->words) push(vocab.id(w), pad_index, 1);
  }
  push(Vocabulary::kEnd, pad_index, 0);
  return in;
}

namespace {

Tensor row_vector(const Tensor& t) { return tensor::reshape(t, {t.size()}); }

Tensor linear(const ModelBundle& b, const Tensor& x, const std::string& w, const std::string& bias) {
  return tensor::add_row(tensor::matmul(x, b.param(w)), b.param(bias));
}

Tensor norm(const ModelBundle& b, const Tensor& x, const std::string& p) {
  return tensor::layer_norm(x, b.param(p + ".gain"), b.param(p + ".bias"));
}

Tensor feed_forward(const ModelBundle& b, const Tensor& x, const std::string& p) {
  return linear(b, tensor::gelu(linear(b, x, p + ".w1", p + ".b1")), p + ".w2", p + ".b2");
}

Tensor attention(const ModelBundle& b, const std::string& p, const Tensor& xq, const Tensor& xkv, bool causal,
                 const ForwardProbe* probe) {
  const std::size_t d = b.config().model_dim, heads = b.config().heads, dh = d / heads;
  const Tensor q = linear(b, xq, p + ".q.weight", p + ".q.bias");
  const Tensor k = linear(b, xkv, p + ".k.weight", p + ".k.bias");
  const Tensor v = linear(b, xkv, p + ".v.weight", p + ".v.bias");
  const double inv = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Tensor> outs;
  outs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    const Tensor qh = heads == 1 ? q : tensor::slice(q, 1, h * dh, dh);
    const Tensor kh = heads == 1 ? k : tensor::slice(k, 1, h * dh, dh);
    const Tensor vh = heads == 1 ? v : tensor::slice(v, 1, h * dh, dh);
    const Tensor probs = tensor::softmax(tensor::scale(tensor::matmul(qh, kh, true), inv), -1, causal);
    if (probe && probe->on_attention) probe->on_attention(probs);
    outs.push_back(tensor::matmul(probs, vh));
  }
  const Tensor merged = heads == 1 ? outs.front() : tensor::concat(outs, 1);
  return linear(b, merged, p + ".o.weight", p + ".o.bias");
}

Tensor decoder_stack(const ModelBundle& b, Tensor x, const Tensor& h, bool causal, const ForwardProbe* probe) {
  for (std::size_t l = 0; l < b.config().layers_dec; ++l) {
    const std::string p = "dec." + std::to_string(l);
    const Tensor n1 = norm(b, x, p + ".ln1");
    x = tensor::add(x, attention(b, p + ".self", n1, n1, causal, probe));
    x = tensor::add(x, attention(b, p + ".cross", norm(b, x, p + ".ln2"), h, false, probe));
    x = tensor::add(x, feed_forward(b, norm(b, x, p + ".ln3"), p + ".ff"));
  }
  x = norm(b, x, "dec.ln");
  // Output projection shares the token embedding.
  return tensor::matmul(x, b.param("embed.token"), true);
}

void require_filler(const ModelBundle& b) {
  if (b.config().kind != ModelKind::kFiller) throw Error(ErrorCode::kConfigError, "model is not a filler");
}

Tensor pad_phoneme_row(const ModelBundle& b) {
  const PhonemeRow pad = pad_row();
  return row_vector(phoneme_embedding(b, std::span<const PhonemeRow>(&pad, 1)));
}

}  // namespace

Tensor phoneme_embedding(const ModelBundle& bundle, std::span<const PhonemeRow> rows) {
  const auto& c = bundle.config();
  std::vector<std::int32_t> ids;
  ids.reserve(rows.size() * kMaxPhonemes);
  for (const auto& r : rows)
    for (auto id : r) ids.push_back(id);
  Tensor e = tensor::embedding_lookup(bundle.param("phoneme.table"), ids);
  e = tensor::reshape(e, {rows.size(), kMaxPhonemes, c.phoneme_dim});
  Tensor conv = tensor::conv1d(e, bundle.param("phoneme.conv.weight"), bundle.param("phoneme.conv.bias"));
  return c.pooling == Pooling::kMax ? tensor::max_pool(conv, 1) : tensor::mean_pool(conv, 1);
}

Tensor embed_input(const ModelBundle& bundle, const EncoderInput& input) {
  const std::size_t t = input.length();
  if (t > bundle.config().max_sequence()) {
    throw Error(ErrorCode::kTooLong, "sequence of " + std::to_string(t) + " tokens exceeds " +
                                         std::to_string(bundle.config().max_sequence()));
  }
  std::vector<std::int32_t> positions(t);
  for (std::size_t i = 0; i < t; ++i) positions[i] = static_cast<std::int32_t>(i);
  Tensor x = tensor::add(tensor::embedding_lookup(bundle.param("embed.token"), input.ids),
                         tensor::embedding_lookup(bundle.param("embed.position"), positions));
  bool any_asr = false;
  std::vector<double> seg(t);
  for (std::size_t i = 0; i < t; ++i) {
    seg[i] = input.asr_segment[i];
    any_asr = any_asr || input.asr_segment[i];
  }
  if (any_asr) x = tensor::add(x, tensor::matmul(Tensor::from({t, 1}, std::move(seg)), bundle.param("embed.segment")));
  const Tensor ph = phoneme_embedding(bundle, input.phoneme_rows);
  return tensor::add(x, tensor::embedding_lookup(ph, input.phoneme_index));
}

Tensor encode(const ModelBundle& bundle, const Tensor& x, const ForwardProbe* probe) {
  Tensor h = x;
  for (std::size_t l = 0; l < bundle.config().layers_enc; ++l) {
    const std::string p = "enc." + std::to_string(l);
    const Tensor n1 = norm(bundle, h, p + ".ln1");
    h = tensor::add(h, attention(bundle, p + ".attn", n1, n1, false, probe));
    h = tensor::add(h, feed_forward(bundle, norm(bundle, h, p + ".ln2"), p + ".ff"));
  }
  return norm(bundle, h, "enc.ln");
}

Tensor checker_logits(const ModelBundle& bundle, const Tensor& h, std::size_t annotator_len) {
  if (bundle.config().kind != ModelKind::kChecker) throw Error(ErrorCode::kConfigError, "model is not a checker");
  if (annotator_len + 2 > h.dim(0)) throw Error(ErrorCode::kShapeError, "annotator length exceeds encoder states");
  const Tensor rows = tensor::slice(h, 0, 1, annotator_len);
  return linear(bundle, tensor::gelu(linear(bundle, rows, "head.w1", "head.b1")), "head.w2", "head.b2");
}

Tensor decode_ar(const ModelBundle& bundle, const Tensor& h, std::size_t mask_position, std::span<const TokenId> prefix,
                 const ForwardProbe* probe) {
  require_filler(bundle);
  if (prefix.empty() || mask_position >= h.dim(0)) throw Error(ErrorCode::kShapeError, "bad decoder prefix or mask position");
  std::vector<std::int32_t> positions(prefix.size());
  for (std::size_t i = 0; i < prefix.size(); ++i) positions[i] = static_cast<std::int32_t>(i);
  Tensor x = tensor::add(tensor::embedding_lookup(bundle.param("embed.token"), prefix),
                         tensor::embedding_lookup(bundle.param("embed.position"), positions));
  x = tensor::add_row(x, pad_phoneme_row(bundle));
  x = tensor::add_row(x, row_vector(tensor::slice(h, 0, mask_position, 1)));
  return decoder_stack(bundle, x, h, true, probe);
}

Tensor decode_nar(const ModelBundle& bundle, const Tensor& h, std::span<const std::size_t> mask_positions,
                  const ForwardProbe* probe) {
  require_filler(bundle);
  if (mask_positions.empty()) throw Error(ErrorCode::kShapeError, "no mask positions to decode");
  std::vector<std::int32_t> pos, masks(mask_positions.size(), Vocabulary::kMask);
  for (auto p : mask_positions) {
    if (p >= h.dim(0)) throw Error(ErrorCode::kShapeError, "mask position outside the encoder states");
    pos.push_back(static_cast<std::int32_t>(p));
  }
  Tensor x = tensor::add(tensor::embedding_lookup(bundle.param("embed.token"), masks),
                         tensor::embedding_lookup(bundle.param("embed.position"), pos));
  x = tensor::add_row(x, pad_phoneme_row(bundle));
  x = tensor::add(x, tensor::embedding_lookup(h, pos));
  return decoder_stack(bundle, x, h, false, probe);
}

namespace {

constexpr std::uint32_t byteswap32(std::uint32_t v) {
  return (v >> 24) | ((v >> 8) & 0xff00u) | ((v << 8) & 0xff0000u) | (v << 24);
}

}  // namespace

std::string checkpoint_bytes(const ModelBundle& bundle) {
  json header;
  header["version"] = kCheckpointVersion;
  header["config"] = config_to_json(bundle.config());
  header["vocab"] = bundle.vocab().tokens();
  json tensors = json::array();
  for (const auto& p : bundle.params()) tensors.push_back({{"name", p.name}, {"shape", p.value.shape()}, {"dtype", "f32"}});
  header["tensors"] = std::move(tensors);

  std::string out(kMagic);
  out += header.dump();
  // Pad with spaces so the payload starts on a 64-byte boundary after '\n'.
  const std::size_t used = out.size() + 1;
  out.append((kAlign - used % kAlign) % kAlign, ' ');
  out.push_back('\n');
  for (const auto& p : bundle.params()) {
    for (double v : p.value.data()) {
      auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
      if constexpr (std::endian::native == std::endian::big) bits = byteswap32(bits);
      char buf[4];
      std::memcpy(buf, &bits, 4);
      out.append(buf, 4);
    }
  }
  return out;
}

ModelBundle load_checkpoint_bytes(const std::string& bytes) {
  auto corrupt = [](const std::string& m) { return Error(ErrorCode::kCorruptCheckpoint, m); };
  if (bytes.compare(0, kMagic.size(), kMagic) != 0) throw corrupt("bad magic; not an htec checkpoint");
  const auto newline = bytes.find('\n', kMagic.size());
  if (newline == std::string::npos) throw corrupt("truncated header");
  const std::size_t payload_start = newline + 1;
  if (payload_start % kAlign != 0) throw corrupt("payload is not 64-byte aligned");

  json header;
  try {
    header = json::parse(bytes.substr(kMagic.size(), newline - kMagic.size()));
  } catch (const json::exception& e) {
    throw corrupt(std::string("unreadable header: ") + e.what());
  }
  if (!header.contains("version") || !header["version"].is_number_unsigned()) throw corrupt("header has no version");
  const auto version = header["version"].get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw Error(ErrorCode::kVersionError, "checkpoint version " + std::to_string(version) + " is not supported (expected " +
                                              std::to_string(kCheckpointVersion) + ")");
  }

  ModelBundle b;
  try {
    b.config_ = config_from_json(header.at("config"));
    b.vocab_ = Vocabulary(header.at("vocab").get<std::vector<std::string>>());
  } catch (const json::exception& e) {
    throw corrupt(std::string("malformed header: ") + e.what());
  }
  if (b.vocab_.size() != b.config_.vocab_size) {
    throw Error(ErrorCode::kVersionError, "vocabulary has " + std::to_string(b.vocab_.size()) +
                                              " tokens but config declares " + std::to_string(b.config_.vocab_size));
  }
  b.config_.validate();

  const auto expected = ModelBundle::layout(b.config_);
  const auto& listed = header.at("tensors");
  std::size_t offset = payload_start;
  for (std::size_t i = 0; i < std::max(expected.size(), listed.size()); ++i) {
    if (i >= listed.size()) {
      throw Error(ErrorCode::kVersionError, "tensor '" + expected[i].first + "' required by the config is missing");
    }
    const auto name = listed[i].at("name").get<std::string>();
    const auto shape = listed[i].at("shape").get<Shape>();
    if (i >= expected.size() || expected[i].first != name) {
      throw Error(ErrorCode::kVersionError, "tensor '" + name + "' does not belong to this config");
    }
    if (expected[i].second != shape) {
      throw Error(ErrorCode::kVersionError, "tensor '" + name + "' has shape " + tensor::shape_string(shape) +
                                                " but the config implies " + tensor::shape_string(expected[i].second));
    }
    if (listed[i].value("dtype", "f32") != "f32") throw Error(ErrorCode::kVersionError, "tensor '" + name + "' is not f32");
    const std::size_t n = tensor::element_count(shape);
    if (offset + 4 * n > bytes.size()) throw corrupt("payload truncated in tensor '" + name + "'");
    std::vector<double> v(n);
    for (std::size_t k = 0; k < n; ++k) {
      std::uint32_t bits;
      std::memcpy(&bits, bytes.data() + offset + 4 * k, 4);
      if constexpr (std::endian::native == std::endian::big) bits = byteswap32(bits);
      v[k] = static_cast<double>(std::bit_cast<float>(bits));
    }
    offset += 4 * n;
    b.add(name, Tensor::from(shape, std::move(v), true));
  }
  if (offset != bytes.size()) throw corrupt("trailing bytes after the last tensor");
  b.version_ = hex64(fnv1a64(bytes));
  return b;
}

void save_checkpoint(const ModelBundle& bundle, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  const auto bytes = checkpoint_bytes(bundle);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error(ErrorCode::kIoError, "write failed for " + path.string());
}

ModelBundle load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::kIoError, "cannot read " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return load_checkpoint_bytes(ss.str());
}

}  // namespace htec
