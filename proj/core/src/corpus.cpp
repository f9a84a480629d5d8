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

#include "htec/corpus.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include <json.hpp>

#include "htec/errors.hpp"

namespace htec {

using json = nlohmann::json;

namespace {

std::optional<Transcript> transcript_field(const json& j, const char* key, std::size_t line) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  const auto& v = j[key];
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    // Blank ASR text means "no ASR"; blank gold or annotator is an error.
    if (s.find_first_not_of(" \t\r\n") == std::string::npos) {
      if (std::string_view(key) == "asr") return Transcript{};
      throw Error(ErrorCode::kParseError, "line " + std::to_string(line) + ": field '" + key + "' is empty");
    }
    return tokenize(s);
  }
  if (v.is_array()) {
    std::vector<std::string> words;
    for (const auto& w : v) {
      if (!w.is_string()) throw Error(ErrorCode::kParseError, "line " + std::to_string(line) + ": non-string word");
      words.push_back(w.get<std::string>());
    }
    return Transcript::from_words(std::move(words));
  }
  throw Error(ErrorCode::kParseError, "line " + std::to_string(line) + ": field '" + key + "' must be text");
}

}  // namespace

Utterance parse_utterance(const std::string& line, std::size_t line_number, bool require_gold) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError, "line " + std::to_string(line_number) + ": " + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::kParseError, "line " + std::to_string(line_number) + ": not an object");
  Utterance u;
  if (j.contains("id")) {
    u.id = j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump();
  } else {
    u.id = std::to_string(line_number);
  }
  u.gold = transcript_field(j, "gold", line_number);
  u.annotator = transcript_field(j, "annotator", line_number);
  u.asr = transcript_field(j, "asr", line_number);
  if (require_gold && !u.gold) {
    throw Error(ErrorCode::kMissingGold, "line " + std::to_string(line_number) + ": utterance '" + u.id + "' has no gold");
  }
  return u;
}

std::string format_utterance(const Utterance& u) {
  json j;
  j["id"] = u.id;
  if (u.gold) j["gold"] = u.gold->text();
  if (u.annotator) j["annotator"] = u.annotator->text();
  if (u.asr) j["asr"] = u.asr->text();
  return j.dump();
}

std::vector<Utterance> read_corpus(std::istream& in, bool require_gold) {
  std::vector<Utterance> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(parse_utterance(line, n, require_gold));
  }
  return out;
}

std::vector<Utterance> read_corpus(const std::filesystem::path& path, bool require_gold) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::kIoError, "cannot read " + path.string());
  return read_corpus(f, require_gold);
}

void write_corpus(std::ostream& out, const std::vector<Utterance>& corpus) {
  for (const auto& u : corpus) out << format_utterance(u) << '\n';
}

void write_corpus(const std::filesystem::path& path, const std::vector<Utterance>& corpus) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  write_corpus(f, corpus);
}

std::vector<Transcript> read_sentences(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::kIoError, "cannot read " + path.string());
  std::vector<Transcript> out;
  std::string line;
  while (std::getline(f, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(tokenize(line));
  }
  return out;
}

std::string format_labels(const Utterance& u, const LabeledPair& pair) {
  json j;
  j["id"] = u.id;
  j["annotator"] = pair.annotator.text();
  j["gold"] = pair.gold.text();
  if (u.asr) j["asr"] = u.asr->text();
  json labels = json::array(), fills = json::array();
  for (std::size_t i = 0; i < pair.labels.size(); ++i) {
    labels.push_back(label_code(pair.labels[i]));
    const auto& f = pair.fills[i];
    json rec = json::object();
    if (f.substitute) rec["substitute"] = *f.substitute;
    if (!f.left_insert.empty()) rec["left_insert"] = f.left_insert;
    if (!f.right_insert.empty()) rec["right_insert"] = f.right_insert;
    fills.push_back(std::move(rec));
  }
  j["labels"] = std::move(labels);
  j["fills"] = std::move(fills);
  return j.dump();
}

}  // namespace htec
