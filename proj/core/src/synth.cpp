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

#include "htec/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "htec/errors.hpp"
#include "htec/hashing.hpp"

namespace htec {

namespace {

constexpr std::array<std::string_view, kErrorTypeCount> kTypeNames = {"substitution", "insertion", "deletion"};
constexpr std::array<std::string_view, kErrorCauseCount> kCauseNames = {"convention", "spelling", "grammatical",
                                                                        "entity", "misheard"};
// Relative prevalence of substitution causes among erroneous transcripts.
constexpr std::array<double, kErrorCauseCount> kCausePrevalence = {8.57, 11.63, 11.02, 18.37, 50.41};

const std::vector<std::string> kFillerWords = {"um", "uh", "the", "a", "so", "and", "like", "please"};

// Clean words required after every edit.
constexpr std::size_t kEditGap = 2;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

template <std::size_t N>
std::size_t pick(const std::array<double, N>& weights, double u) {
  double acc = 0;
  for (std::size_t i = 0; i < N; ++i) {
    acc += weights[i];
    if (u < acc) return i;
  }
  for (std::size_t i = N; i-- > 0;)
    if (weights[i] > 0) return i;
  return 0;
}

bool within_one_edit(const std::vector<PhonemeId>& a, const std::vector<PhonemeId>& b) {
  const auto& s = a.size() <= b.size() ? a : b;
  const auto& l = a.size() <= b.size() ? b : a;
  if (l.size() - s.size() > 1) return false;
  std::size_t i = 0;
  while (i < s.size() && s[i] == l[i]) ++i;
  if (s.size() == l.size()) return std::equal(s.begin() + static_cast<std::ptrdiff_t>(std::min(i + 1, s.size())), s.end(),
                                              l.begin() + static_cast<std::ptrdiff_t>(std::min(i + 1, l.size())));
  return std::equal(s.begin() + static_cast<std::ptrdiff_t>(i), s.end(), l.begin() + static_cast<std::ptrdiff_t>(i + 1));
}

std::string typo(const std::string& w, std::uint64_t bits) {
  const std::size_t n = w.size();
  const std::size_t kind = bits % 3;
  const std::size_t at = static_cast<std::size_t>((bits >> 8) % std::max<std::size_t>(n, 1));
  std::string out = w;
  if (kind == 0 && n >= 2) {
    const std::size_t i = std::min(at, n - 2);
    std::swap(out[i], out[i + 1]);
    if (out != w) return out;
  }
  if (kind == 1 && n >= 2) {
    out.erase(at, 1);
    return out;
  }
  out.insert(at, 1, w[at]);
  return out;
}

}  // namespace

std::string_view to_string(ErrorType t) { return kTypeNames[static_cast<std::size_t>(t)]; }
std::string_view to_string(ErrorCause c) { return kCauseNames[static_cast<std::size_t>(c)]; }

void NoiseProfile::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::kConfigError, m); };
  if (!(rate >= 0.0 && rate <= 0.3)) fail("error rate must be in [0, 0.3]");
  auto check_mix = [&](std::span<const double> mix, const char* what) {
    double s = 0;
    for (double x : mix) {
      if (!(x >= 0.0)) fail(std::string(what) + " has a negative weight");
      s += x;
    }
    if (std::abs(s - 1.0) > 1e-9) fail(std::string(what) + " must sum to 1");
  };
  check_mix(type_mix, "type mix");
  check_mix(cause_mix, "cause mix");
}

NoiseProfile NoiseProfile::from_weights(double rate, std::array<double, kErrorTypeCount> types,
                                        std::array<double, kErrorCauseCount> causes) {
  NoiseProfile p;
  p.rate = rate;
  const double ts = types[0] + types[1] + types[2];
  double cs = 0;
  for (double c : causes) cs += c;
  if (!(ts > 0 && cs > 0)) throw Error(ErrorCode::kConfigError, "mix weights must be positive");
  for (std::size_t i = 0; i < kErrorTypeCount; ++i) p.type_mix[i] = types[i] / ts;
  for (std::size_t i = 0; i < kErrorCauseCount; ++i) p.cause_mix[i] = causes[i] / cs;
  p.validate();
  return p;
}

NoiseProfile NoiseProfile::human(double rate) { return from_weights(rate, {35.0, 37.3, 27.7}, kCausePrevalence); }

NoiseProfile NoiseProfile::asr(double rate) { return from_weights(rate, {41.7, 16.3, 42.1}, kCausePrevalence); }

ConfusionTable ConfusionTable::load(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::kIoError, "cannot read " + path.string());
  ConfusionTable t;
  std::string line;
  std::size_t n = 0;
  while (std::getline(f, line)) {
    ++n;
    if (trim(line).empty() || line[0] == '#') continue;
    std::istringstream in(line);
    std::string cause, correct, confusable;
    if (!std::getline(in, cause, '\t') || !std::getline(in, correct, '\t') || !std::getline(in, confusable)) {
      throw Error(ErrorCode::kParseError, path.string() + ":" + std::to_string(n) + ": expected three columns");
    }
    ErrorCause c;
    cause = trim(cause);
    if (cause == "convention") c = ErrorCause::kConvention;
    else if (cause == "grammatical") c = ErrorCause::kGrammatical;
    else if (cause == "entity") c = ErrorCause::kEntity;
    else throw Error(ErrorCode::kParseError, path.string() + ":" + std::to_string(n) + ": unknown cause '" + cause + "'");
    t.entries[c][trim(correct)].push_back(trim(confusable));
  }
  return t;
}

const std::vector<std::string>* ConfusionTable::lookup(ErrorCause cause, const std::string& word) const {
  const auto c = entries.find(cause);
  if (c == entries.end()) return nullptr;
  const auto w = c->second.find(word);
  return w == c->second.end() ? nullptr : &w->second;
}

Synthesizer::Synthesizer(const Phonemizer& phonemizer, ConfusionTable confusions)
    : phonemizer_(phonemizer), confusions_(std::move(confusions)) {
  for (const auto& e : phonemizer_.entries()) pronunciations_.emplace_back(e.word, e.phonemes);
}

const Synthesizer& Synthesizer::shared() {
  static const Synthesizer s(Phonemizer::shared(), ConfusionTable::load(default_data_dir() / "confusions.tsv"));
  return s;
}

const std::vector<std::string>& Synthesizer::sound_alikes(const std::string& word) const {
  std::lock_guard lock(cache_mutex_);
  auto it = sound_alike_cache_.find(word);
  if (it != sound_alike_cache_.end()) return it->second;
  std::vector<std::string> out;
  const auto target = phonemizer_.phonemes(word);
  if (!target.empty()) {
    for (const auto& [w, ph] : pronunciations_)
      if (w != word && within_one_edit(ph, target)) out.push_back(w);
  }
  return sound_alike_cache_.emplace(word, std::move(out)).first->second;
}

std::optional<std::string> Synthesizer::substitute(const std::string& word, ErrorCause cause,
                                                   std::uint64_t bits) const {
  switch (cause) {
    case ErrorCause::kConvention:
    case ErrorCause::kGrammatical:
    case ErrorCause::kEntity: {
      const auto* options = confusions_.lookup(cause, word);
      if (!options || options->empty()) return std::nullopt;
      return (*options)[bits % options->size()];
    }
    case ErrorCause::kMisheard: {
      const auto& options = sound_alikes(word);
      if (options.empty()) return std::nullopt;
      return options[bits % options.size()];
    }
    case ErrorCause::kSpelling:
      return typo(word, bits);
  }
  return std::nullopt;
}

Transcript Synthesizer::corrupt(const Transcript& gold, const NoiseProfile& profile, std::uint64_t stream,
                                std::vector<CorruptionEvent>* events) const {
  if (gold.empty()) throw Error(ErrorCode::kEmptyInput, "cannot corrupt an empty transcript");
  profile.validate();
  std::mt19937_64 rng(stream);
  auto uniform = [&] { return unit_interval(rng()); };
  // With kEditGap forced clean words after each edit, a per-word edit
  // probability p realizes a share p / (1 + kEditGap * p) of edited words.
  const double r = profile.rate;
  const double p = r / (1.0 - static_cast<double>(kEditGap) * r);

  Transcript out;
  std::size_t cooldown = 0;
  const std::size_t n = gold.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& w = gold.words[i];
    if (cooldown > 0 || !(uniform() < p)) {
      if (cooldown > 0) --cooldown;
      out.words.push_back(w);
      continue;
    }
    auto type = static_cast<ErrorType>(pick(profile.type_mix, uniform()));
    // A single-word sentence cannot lose its only word.
    if (type == ErrorType::kDeletion && n == 1) type = ErrorType::kSubstitution;
    CorruptionEvent ev{type, std::nullopt, i};
    if (type == ErrorType::kDeletion) {
      // dropped
    } else if (type == ErrorType::kInsertion) {
      out.words.push_back(w);
      out.words.push_back(uniform() < 0.5 ? w : kFillerWords[rng() % kFillerWords.size()]);
    } else {
      auto cause = static_cast<ErrorCause>(pick(profile.cause_mix, uniform()));
      const std::uint64_t bits = rng();
      auto replacement = substitute(w, cause, bits);
      // Fall back towards causes that always apply.
      if (!replacement && cause != ErrorCause::kMisheard) {
        cause = ErrorCause::kMisheard;
        replacement = substitute(w, cause, bits);
      }
      if (!replacement || *replacement == w) {
        cause = ErrorCause::kSpelling;
        replacement = substitute(w, cause, bits);
      }
      ev.cause = cause;
      out.words.push_back(*replacement);
    }
    if (events) events->push_back(ev);
    cooldown = kEditGap;
  }
  out.raw = out.text();
  return out;
}

std::vector<Utterance> make_triples(const std::vector<Transcript>& gold, const NoiseProfile& human,
                                   const NoiseProfile& asr, std::uint64_t seed, const Synthesizer& synth) {
  std::vector<Utterance> out;
  out.reserve(gold.size());
  for (std::size_t i = 0; i < gold.size(); ++i) {
    Utterance u;
    u.id = std::to_string(i);
    u.gold = gold[i];
    u.annotator = synth.corrupt(gold[i], human, mix_keys({seed, i, 1}));
    u.asr = synth.corrupt(gold[i], asr, mix_keys({seed, i, 2}));
    out.push_back(std::move(u));
  }
  return out;
}

TemplateGrammar TemplateGrammar::load(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::kIoError, "cannot read " + path.string());
  TemplateGrammar g;
  std::string line;
  while (std::getline(f, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    if (line[0] == '@') {
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw Error(ErrorCode::kParseError, "slot line without '=': " + line);
      auto& values = g.slots_[trim(line.substr(1, eq - 1))];
      std::istringstream in(line.substr(eq + 1));
      std::string v;
      while (std::getline(in, v, '|'))
        if (!trim(v).empty()) values.push_back(trim(v));
    } else {
      g.templates_.push_back(line);
    }
  }
  for (const auto& t : g.templates_) {
    for (std::size_t at = t.find('{'); at != std::string::npos; at = t.find('{', at + 1)) {
      const auto close = t.find('}', at);
      if (close == std::string::npos) throw Error(ErrorCode::kParseError, "unclosed slot in template: " + t);
      const auto name = t.substr(at + 1, close - at - 1);
      if (!g.slots_.contains(name) || g.slots_[name].empty())
        throw Error(ErrorCode::kParseError, "template uses undefined slot '" + name + "'");
    }
  }
  if (g.templates_.empty()) throw Error(ErrorCode::kEmptyCorpus, path.string() + " defines no templates");
  return g;
}

const TemplateGrammar& TemplateGrammar::shared() {
  static const TemplateGrammar g = load(default_data_dir() / "templates.txt");
  return g;
}

std::vector<Transcript> TemplateGrammar::generate(std::size_t count, std::uint64_t seed) const {
  std::vector<Transcript> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::mt19937_64 rng(mix_keys({seed, i, 0x7e3a}));
    const auto& t = templates_[rng() % templates_.size()];
    std::string text;
    std::size_t pos = 0;
    while (pos < t.size()) {
      const auto at = t.find('{', pos);
      if (at == std::string::npos) {
        text += t.substr(pos);
        break;
      }
      text += t.substr(pos, at - pos);
      const auto close = t.find('}', at);
      const auto& values = slots_.at(t.substr(at + 1, close - at - 1));
      text += values[rng() % values.size()];
      pos = close + 1;
    }
    out.push_back(tokenize(text));
  }
  return out;
}

}  // namespace htec
