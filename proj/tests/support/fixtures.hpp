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

#include <string>
#include <vector>

#include "htec/corpus.hpp"
#include "htec/model.hpp"
#include "htec/training.hpp"

namespace htec::testing {

inline Utterance utterance(std::string id, const std::string& gold, const std::string& annotator,
                           const std::string& asr = "") {
  Utterance u;
  u.id = std::move(id);
  u.gold = tokenize(gold);
  u.annotator = tokenize(annotator);
  if (!asr.empty()) u.asr = tokenize(asr);
  return u;
}

/// A handful of utterances with every label class represented.
inline std::vector<Utterance> toy_corpus() {
  return {
      utterance("a", "give me the latest news", "give my latest muse", "give me the latest news"),
      utterance("b", "we will meet at noon", "we will meet meet at new", "we well meet at noon"),
      utterance("c", "turn the lights off", "turn lights off please", "turn the lights of"),
      utterance("d", "play some jazz music now", "play jazz music now", "play some jazz music now"),
  };
}

inline ModelConfig tiny_config(ModelKind kind, std::size_t vocab_size, DecodeMode mode = DecodeMode::kNAR) {
  ModelConfig c;
  c.kind = kind;
  c.layers_enc = 1;
  c.layers_dec = 1;
  c.model_dim = 8;
  c.heads = 2;
  c.ff_dim = 16;
  c.phoneme_dim = 4;
  c.vocab_size = vocab_size;
  c.decode_mode = mode;
  c.seed = 7;
  return c;
}

inline ModelBundle tiny_bundle(ModelKind kind, DecodeMode mode = DecodeMode::kNAR) {
  auto vocab = corpus_vocab(toy_corpus(), 1);
  const auto n = vocab.size();
  return ModelBundle::create(tiny_config(kind, n, mode), std::move(vocab));
}

}  // namespace htec::testing
