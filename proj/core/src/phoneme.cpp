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

#include "htec/phoneme.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "htec/errors.hpp"

#ifndef HTEC_DEFAULT_DATA_DIR
#define HTEC_DEFAULT_DATA_DIR "data"
#endif
#ifndef HTEC_INSTALLED_DATA_DIR
#define HTEC_INSTALLED_DATA_DIR HTEC_DEFAULT_DATA_DIR
#endif

namespace htec {

std::filesystem::path default_data_dir() {
  if (const char* env = std::getenv("HTEC_DATA_DIR"); env && *env) return env;
  std::filesystem::path source_tree = HTEC_DEFAULT_DATA_DIR;
  if (std::filesystem::exists(source_tree / "lexicon.tsv")) return source_tree;
  return HTEC_INSTALLED_DATA_DIR;
}

PhonemeInventory::PhonemeInventory(std::vector<std::string> symbols) : symbols_(std::move(symbols)) {
  if (symbols_.size() != kPhonemeSymbols) {
    throw Error(ErrorCode::kConfigError, "phoneme inventory needs " + std::to_string(kPhonemeSymbols) +
                                             " symbols, got " + std::to_string(symbols_.size()));
  }
  for (std::size_t i = 0; i < symbols_.size(); ++i) {
    if (!index_.emplace(symbols_[i], static_cast<PhonemeId>(i + 1)).second)
      throw Error(ErrorCode::kConfigError, "duplicate phoneme symbol " + symbols_[i]);
  }
}

PhonemeInventory PhonemeInventory::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open phoneme inventory " + path.string());
  std::vector<std::string> symbols;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string sym;
    if (ss >> sym) symbols.push_back(sym);
  }
  return PhonemeInventory(std::move(symbols));
}

PhonemeId PhonemeInventory::id(std::string_view symbol) const {
  auto it = index_.find(std::string(symbol));
  if (it == index_.end()) throw Error(ErrorCode::kParseError, "unknown phoneme '" + std::string(symbol) + "'");
  return it->second;
}

bool PhonemeInventory::contains(std::string_view symbol) const {
  return index_.contains(std::string(symbol));
}

const std::string& PhonemeInventory::symbol(PhonemeId id) const {
  static const std::string pad = "<pad>";
  if (id == kPad) return pad;
  return symbols_.at(id - 1);
}

Phonemizer::Phonemizer(PhonemeInventory inventory, std::vector<LexiconEntry> lexicon)
    : inventory_(std::move(inventory)), entries_(std::move(lexicon)) {
  for (std::size_t i = 0; i < entries_.size(); ++i) index_.emplace(entries_[i].word, i);
}

Phonemizer Phonemizer::load(const std::filesystem::path& inventory_path,
                            const std::filesystem::path& lexicon_path) {
  auto inventory = PhonemeInventory::load(inventory_path);
  std::ifstream in(lexicon_path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open lexicon " + lexicon_path.string());
  std::vector<LexiconEntry> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw Error(ErrorCode::kParseError, lexicon_path.string() + ":" + std::to_string(line_no) + ": missing tab");
    LexiconEntry e;
    e.word = line.substr(0, tab);
    std::istringstream ss(line.substr(tab + 1));
    std::string sym;
    while (ss >> sym) e.phonemes.push_back(inventory.id(sym));
    entries.push_back(std::move(e));
  }
  return Phonemizer(std::move(inventory), std::move(entries));
}

const Phonemizer& Phonemizer::shared() {
  static const Phonemizer instance =
      load(default_data_dir() / "phonemes.txt", default_data_dir() / "lexicon.tsv");
  return instance;
}

bool Phonemizer::in_lexicon(std::string_view word) const {
  return index_.contains(std::string(word));
}

namespace {

bool is_letter(char c) { return c >= 'a' && c <= 'z'; }

bool is_vowel_letter(char c) {
  return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u';
}

constexpr const char* kDigitWords[] = {"zero", "one", "two",   "three", "four",
                                       "five", "six", "seven", "eight", "nine"};

struct Rule {
  std::string_view graphemes;
  std::string_view phones;
  bool initial_only = false;
};

// Longest match wins; ties resolve to the earlier rule.
constexpr Rule kRules[] = {
    {"tion", "SH AX N"}, {"sion", "ZH AX N"}, {"ough", "AO"}, {"augh", "AO"},
    {"igh", "AY"},       {"tch", "CH"},       {"dge", "JH"},  {"sch", "S K"},
    {"kn", "N", true},   {"wr", "R", true},   {"ps", "S", true},
    {"ch", "CH"},        {"sh", "SH"},        {"th", "TH"},   {"ph", "F"},
    {"wh", "W"},         {"ck", "K"},         {"ng", "NG"},   {"qu", "K W"},
    {"ee", "IY"},        {"ea", "IY"},        {"oo", "UW"},   {"ou", "AW"},
    {"ow", "OW"},        {"oi", "OY"},        {"oy", "OY"},   {"ai", "EY"},
    {"ay", "EY"},        {"au", "AO"},        {"aw", "AO"},   {"ei", "EY"},
    {"ey", "EY"},        {"ie", "IY"},        {"ue", "UW"},   {"ew", "UW"},
    {"ar", "AA R"},      {"er", "AXR"},       {"ir", "ER"},   {"ur", "ER"},
    {"or", "AO R"},      {"a", "AE"},         {"e", "EH"},    {"i", "IH"},
    {"o", "AA"},         {"u", "AH"},         {"b", "B"},     {"d", "D"},
    {"f", "F"},          {"h", "HH"},         {"j", "JH"},    {"k", "K"},
    {"l", "L"},          {"m", "M"},          {"n", "N"},     {"p", "P"},
    {"q", "K"},          {"r", "R"},          {"s", "S"},     {"t", "T"},
    {"v", "V"},          {"w", "W"},          {"x", "K S"},   {"z", "Z"},
};

}  // namespace

std::vector<PhonemeId> Phonemizer::letter_to_sound(std::string_view letters) const {
  std::string w;
  for (char c : letters)
    if (is_letter(c)) w.push_back(c);
  std::vector<PhonemeId> out;
  auto emit = [&](std::string_view phones) {
    std::size_t start = 0;
    while (start < phones.size()) {
      auto end = phones.find(' ', start);
      if (end == std::string_view::npos) end = phones.size();
      out.push_back(inventory_.id(phones.substr(start, end - start)));
      start = end + 1;
    }
  };
  bool has_other_vowel = false;
  for (std::size_t i = 0; i + 1 < w.size(); ++i) has_other_vowel |= is_vowel_letter(w[i]);

  std::size_t i = 0;
  while (i < w.size()) {
    char c = w[i];
    // Context-dependent letters first.
    if (c == 'e' && i + 1 == w.size() && i > 0 && has_other_vowel) {
      ++i;  // silent final e
      continue;
    }
    if (i > 0 && c == w[i - 1] && !is_vowel_letter(c)) {
      ++i;  // doubled consonant
      continue;
    }
    if (c == 'c' || c == 'g') {
      bool soft = i + 1 < w.size() && (w[i + 1] == 'e' || w[i + 1] == 'i' || w[i + 1] == 'y');
      bool digraph = c == 'c' && i + 1 < w.size() && (w[i + 1] == 'h' || w[i + 1] == 'k');
      if (!digraph && !(c == 'g' && i + 1 < w.size() && w[i + 1] == 'h')) {
        emit(c == 'c' ? (soft ? "S" : "K") : (soft ? "JH" : "G"));
        ++i;
        continue;
      }
    }
    if (c == 'y') {
      emit(i == 0 ? "Y" : (i + 1 == w.size() ? "IY" : "IH"));
      ++i;
      continue;
    }
    if (c == 'g' && i + 1 < w.size() && w[i + 1] == 'h') {
      emit("G");
      i += 2;
      continue;
    }
    const Rule* best = nullptr;
    for (const auto& r : kRules) {
      if (r.initial_only && i != 0) continue;
      if (w.compare(i, r.graphemes.size(), r.graphemes) != 0) continue;
      if (!best || r.graphemes.size() > best->graphemes.size()) best = &r;
    }
    if (best) {
      emit(best->phones);
      i += best->graphemes.size();
    } else {
      ++i;
    }
  }
  return out;
}

std::vector<PhonemeId> Phonemizer::lookup_or_rules(const std::string& key) const {
  if (auto it = index_.find(key); it != index_.end()) return entries_[it->second].phonemes;
  return letter_to_sound(key);
}

std::vector<PhonemeId> Phonemizer::phonemes(std::string_view word) const {
  if (word.empty()) throw Error(ErrorCode::kEmptyWord, "cannot phonemize an empty word");
  if (is_special_token(word)) return {};

  std::string folded;
  for (char c : word) folded.push_back((c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c);

  std::vector<PhonemeId> out;
  if (auto it = index_.find(folded); it != index_.end()) {
    out = entries_[it->second].phonemes;
  } else {
    // Strip punctuation, spell digits out, and fall back to rules per chunk.
    std::string letters;
    auto flush = [&] {
      if (letters.empty()) return;
      auto p = lookup_or_rules(letters);
      out.insert(out.end(), p.begin(), p.end());
      letters.clear();
    };
    for (char c : folded) {
      if (is_letter(c) || c == '\'') {
        letters.push_back(c);
      } else if (c >= '0' && c <= '9') {
        flush();
        auto p = lookup_or_rules(kDigitWords[c - '0']);
        out.insert(out.end(), p.begin(), p.end());
      } else if (c == '.' && !letters.empty()) {
        flush();  // "a.m." reads letter by letter
      }
    }
    flush();
  }
  if (out.size() > kMaxPhonemes) out.resize(kMaxPhonemes);
  return out;
}

PhonemeRow Phonemizer::phonemize(std::string_view word) const {
  auto ids = phonemes(word);
  PhonemeRow row = pad_row();
  std::copy(ids.begin(), ids.end(), row.begin());
  return row;
}

PhonemeMatrix Phonemizer::phoneme_matrix(const Transcript& t) const {
  require_model_length(t, "transcript");
  PhonemeMatrix m;
  m.rows.reserve(t.size());
  for (const auto& w : t.words) m.rows.push_back(is_special_token(w) ? pad_row() : phonemize(w));
  return m;
}

bool Phonemizer::homophone(std::string_view a, std::string_view b) const {
  if (a == b) return true;
  if (a.empty() || b.empty()) return false;
  return phonemes(a) == phonemes(b);
}

}  // namespace htec
