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

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "htec/align.hpp"
#include "htec/textcore.hpp"

namespace htec {

/// One corpus line: {"id", "gold", "annotator", "asr"}. Transcripts are
/// stored as text; a JSON array of words is accepted on input too.
struct Utterance {
  std::string id;
  std::optional<Transcript> gold;
  std::optional<Transcript> annotator;
  std::optional<Transcript> asr;

  const Transcript* asr_or_null() const { return asr && !asr->empty() ? &*asr : nullptr; }
};

/// Parses one JSON Lines record. Missing ids become "<line number>". Throws
/// ParseError, or MissingGold when `require_gold` and gold is absent.
Utterance parse_utterance(const std::string& line, std::size_t line_number, bool require_gold);
std::string format_utterance(const Utterance& u);

std::vector<Utterance> read_corpus(std::istream& in, bool require_gold = true);
std::vector<Utterance> read_corpus(const std::filesystem::path& path, bool require_gold = true);
void write_corpus(std::ostream& out, const std::vector<Utterance>& corpus);
void write_corpus(const std::filesystem::path& path, const std::vector<Utterance>& corpus);

/// Plain text, one sentence per line; blank lines are skipped.
std::vector<Transcript> read_sentences(const std::filesystem::path& path);

/// derive_labels record as a JSON object {labels: [...], fills: [...]}.
std::string format_labels(const Utterance& u, const LabeledPair& pair);

}  // namespace htec
