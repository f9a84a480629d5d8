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

#include "cli.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "htec/align.hpp"
#include "htec/checker.hpp"
#include "htec/corpus.hpp"
#include "htec/errors.hpp"
#include "htec/filler.hpp"
#include "htec/metrics.hpp"
#include "htec/model.hpp"
#include "htec/pipeline.hpp"
#include "htec/service.hpp"
#include "htec/synth.hpp"
#include "htec/training.hpp"

namespace htec::cli {
namespace {

using json = nlohmann::json;

struct Failure {
  int exit_code;
  std::string message;
};

[[noreturn]] void usage_error(const std::string& m) { throw Failure{kExitUsage, m}; }
[[noreturn]] void model_error(const std::string& m) { throw Failure{kExitModel, m}; }

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfigError:
      return kExitUsage;
    case ErrorCode::kCorruptCheckpoint:
    case ErrorCode::kVersionError:
    case ErrorCode::kDiverged:
    case ErrorCode::kShapeError:
      return kExitModel;
    default:
      return kExitData;
  }
}

std::string read_text(const std::string& path) {
  if (path == "-") {
    std::ostringstream s;
    s << std::cin.rdbuf();
    return s.str();
  }
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::kIoError, "cannot read " + path);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

std::vector<Utterance> read_corpus_arg(const std::string& path, bool require_gold) {
  std::istringstream in(read_text(path));
  return read_corpus(in, require_gold);
}

/// Output sink: stdout (`out`) unless a path is given.
class Output {
 public:
  Output(const std::string& path, std::ostream& fallback) : stream_(&fallback) {
    if (!path.empty() && path != "-") {
      file_.open(path, std::ios::binary | std::ios::trunc);
      if (!file_) throw Error(ErrorCode::kIoError, "cannot write " + path);
      stream_ = &file_;
    }
  }
  std::ostream& operator*() { return *stream_; }
  void line(const std::string& s) { *stream_ << s << '\n'; }

 private:
  std::ofstream file_;
  std::ostream* stream_;
};

ModelBundle load_model(const std::string& path, ModelKind kind) {
  ModelBundle b;
  try {
    b = load_checkpoint(path);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kIoError) model_error(e.what());
    throw;
  }
  if (b.config().kind != kind) {
    model_error(path + " holds a " + std::string(to_string(b.config().kind)) + " model; expected a " +
                std::string(to_string(kind)));
  }
  spdlog::info("loaded {} model {} ({} parameters)", to_string(kind), b.version(), b.parameter_count());
  return b;
}

/// Runs fn(i) for i in [0, n) on up to `jobs` threads; rethrows the first
/// exception.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < jobs; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

std::size_t default_jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

json wer_json(const WerBreakdown& w) {
  return {{"wer", w.wer},
          {"substitutions", w.substitutions},
          {"insertions", w.insertions},
          {"deletions", w.deletions},
          {"reference_length", w.reference_length}};
}

json fills_json(const FillResult& r) {
  json fills = json::array();
  for (const auto& f : r.fills) {
    json candidates = json::array();
    for (const auto& c : f.candidates) candidates.push_back({{"words", c.words}, {"score", c.score}});
    fills.push_back({{"position", f.position}, {"words", f.words}, {"score", f.score}, {"candidates", candidates}});
  }
  return fills;
}

json labels_json(const std::vector<EditLabel>& labels) {
  json out = json::array();
  for (auto l : labels) out.push_back(label_code(l));
  return out;
}

Thresholds thresholds_for(CheckMode mode, std::optional<double> threshold) {
  Thresholds t;
  if (threshold) (mode == CheckMode::kAutocorrect ? t.autocorrect : t.copilot) = *threshold;
  t.validate();
  return t;
}

std::string with_id(const Utterance& u, const std::string& m) { return "utterance '" + u.id + "': " + m; }

// ---------------------------------------------------------------- synth

struct SynthArgs {
  std::string gold, out;
  std::size_t templates = 0;
  std::uint64_t seed = 7;
  double rate = 0.10;
  std::optional<double> asr_rate;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  std::vector<Transcript> gold;
  if (!a.gold.empty() && a.templates > 0) usage_error("--gold and --templates are exclusive");
  if (!a.gold.empty()) {
    const auto text = read_text(a.gold);
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '{') {
      std::istringstream in(text);
      for (auto& u : read_corpus(in, true)) gold.push_back(std::move(*u.gold));
    } else {
      std::istringstream in(text);
      std::string line;
      while (std::getline(in, line))
        if (line.find_first_not_of(" \t\r") != std::string::npos) gold.push_back(tokenize(line));
      if (gold.empty()) throw Error(ErrorCode::kEmptyCorpus, a.gold + " has no sentences");
    }
  } else if (a.templates > 0) {
    gold = TemplateGrammar::shared().generate(a.templates, a.seed);
  } else {
    usage_error("one of --gold or --templates is required");
  }
  const auto human = NoiseProfile::human(a.rate);
  const auto asr = NoiseProfile::asr(a.asr_rate.value_or(a.rate));
  human.validate();
  asr.validate();
  const auto triples = make_triples(gold, human, asr, a.seed);
  Output o(a.out, out);
  write_corpus(*o, triples);
  spdlog::info("wrote {} triples (seed {}, rate {})", triples.size(), a.seed, a.rate);
  return kExitOk;
}

// ------------------------------------------------------- derive-labels

struct DeriveArgs {
  std::string in, out;
};

int cmd_derive(const DeriveArgs& a, std::ostream& out) {
  const auto corpus = read_corpus_arg(a.in, true);
  Output o(a.out, out);
  std::size_t skipped = 0;
  for (const auto& u : corpus) {
    if (!u.annotator) {
      ++skipped;
      continue;
    }
    o.line(format_labels(u, derive_labels(*u.annotator, *u.gold)));
  }
  if (skipped > 0) spdlog::warn("skipped {} utterances without an annotator transcription", skipped);
  return kExitOk;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string kind, corpus, config, model_config, out, mode = "nar";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
  std::size_t min_count = 1;
  std::size_t augment = 0;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
  const auto kind = parse_model_kind(a.kind);
  auto cfg = a.config.empty() ? TrainConfig{} : parse_train_config(read_text(a.config));
  if (a.seed) cfg.seed = *a.seed;
  if (a.epochs) cfg.max_epochs = *a.epochs;
  cfg.validate();

  const auto corpus = read_corpus_arg(a.corpus, true);
  auto vocab = corpus_vocab(corpus, a.min_count);
  ModelConfig mc;
  mc.kind = kind;
  mc.decode_mode = parse_decode_mode(a.mode);
  mc.seed = cfg.seed;
  if (!a.model_config.empty()) mc = apply_model_overrides(mc, read_text(a.model_config));
  mc.kind = kind;
  mc.vocab_size = vocab.size();
  auto bundle = ModelBundle::create(mc, std::move(vocab));
  spdlog::info("training {} ({} parameters, vocabulary {})", to_string(kind), bundle.parameter_count(),
               bundle.vocab().size());

  const auto on_epoch = [&](const EpochRecord& e) {
    out << json{{"epoch", e.epoch},
                {"train_loss", e.train_loss},
                {"val_loss", e.val_loss},
                {"learning_rate", e.learning_rate},
                {"seconds", e.seconds}}
               .dump()
        << '\n'
        << std::flush;
  };
  TrainResult result;
  if (kind == ModelKind::kChecker) {
    const auto data = make_checker_dataset(corpus, cfg);
    if (data.excluded > 0) spdlog::warn("excluded {} over-length utterances", data.excluded);
    result = train_checker(bundle, data, cfg, on_epoch);
    if (!data.validation.empty())
      spdlog::info("validation label accuracy {:.4f}", checker_accuracy(bundle, data.validation));
  } else {
    auto data = make_filler_dataset(corpus, mc.decode_mode, cfg);
    if (data.excluded > 0) spdlog::warn("excluded {} over-length utterances", data.excluded);
    if (a.augment > 0) {
      if (mc.decode_mode != DecodeMode::kAR) usage_error("--augment applies to AR fillers only");
      std::vector<Transcript> gold;
      for (const auto& u : corpus) gold.push_back(*u.gold);
      auto extra = augment_two_gram(gold, a.augment, cfg.seed);
      spdlog::info("added {} two-gram samples", extra.size());
      data.train.insert(data.train.end(), extra.begin(), extra.end());
    }
    result = train_filler(bundle, data, cfg, on_epoch);
    if (!data.validation.empty())
      spdlog::info("validation fill accuracy {:.4f}", filler_accuracy(bundle, data.validation));
  }
  save_checkpoint(bundle, a.out);
  spdlog::info("best epoch {} of {}{}; wrote {} ({})", result.best_epoch, result.history.size(),
               result.early_stopped ? " (early stop)" : "", a.out, bundle.version());
  return kExitOk;
}

// ---------------------------------------------------------------- check

struct CheckArgs {
  std::string model, in, out, mode = "copilot";
  std::optional<double> threshold;
  std::size_t jobs = default_jobs();
};

int cmd_check(const CheckArgs& a, std::ostream& out) {
  const auto mode = parse_check_mode(a.mode);
  const auto thresholds = thresholds_for(mode, a.threshold);
  const auto model = load_model(a.model, ModelKind::kChecker);
  const auto corpus = read_corpus_arg(a.in, false);
  for (const auto& u : corpus)
    if (!u.annotator) throw Error(ErrorCode::kParseError, with_id(u, "missing 'annotator'"));
  std::vector<std::string> lines(corpus.size());
  parallel_for(corpus.size(), a.jobs, [&](std::size_t i) {
    const auto& u = corpus[i];
    try {
      const auto pred = check(model, *u.annotator, u.asr_or_null());
      lines[i] = json{{"id", u.id},
                      {"labels", labels_json(pred.labels())},
                      {"scores", pred.error_scores()},
                      {"flagged", apply_threshold(pred, mode, thresholds)}}
                     .dump();
    } catch (const Error& e) {
      throw Error(e.code(), with_id(u, e.what()));
    }
  });
  Output o(a.out, out);
  for (const auto& l : lines) o.line(l);
  return kExitOk;
}

// ----------------------------------------------------------------- fill

struct FillArgs {
  std::string model, in, out, mode;
  std::size_t n_best = kDefaultNBest;
  std::size_t jobs = default_jobs();
};

struct FillInput {
  std::string id;
  Transcript words;
  std::optional<Transcript> asr;
};

Transcript transcript_field(const json& v, const std::string& where) {
  if (v.is_string()) return tokenize(v.get<std::string>());
  if (v.is_array()) {
    std::vector<std::string> words;
    for (const auto& w : v) {
      if (!w.is_string()) throw Error(ErrorCode::kParseError, where + ": words must be strings");
      auto t = tokenize(w.get<std::string>());
      words.insert(words.end(), t.words.begin(), t.words.end());
    }
    if (words.empty()) throw Error(ErrorCode::kEmptyInput, where + ": no words");
    return Transcript::from_words(std::move(words));
  }
  throw Error(ErrorCode::kParseError, where + ": expected a string or an array of words");
}

std::vector<FillInput> read_fill_inputs(const std::string& path) {
  std::istringstream in(read_text(path));
  std::vector<FillInput> inputs;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto where = path + ":" + std::to_string(n);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kParseError, where + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("words")) throw Error(ErrorCode::kParseError, where + ": missing 'words'");
    FillInput f;
    f.id = j.contains("id") ? (j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump())
                            : std::to_string(inputs.size());
    f.words = parse_uncertain(transcript_field(j["words"], where)).transcript;
    if (j.contains("asr") && !j["asr"].is_null()) f.asr = transcript_field(j["asr"], where);
    inputs.push_back(std::move(f));
  }
  if (inputs.empty()) throw Error(ErrorCode::kEmptyCorpus, path + " has no inputs");
  return inputs;
}

int cmd_fill(const FillArgs& a, std::ostream& out) {
  if (a.n_best < 1) usage_error("--n-best must be at least 1");
  const auto model = load_model(a.model, ModelKind::kFiller);
  if (!a.mode.empty() && parse_decode_mode(a.mode) != model.config().decode_mode) {
    model_error(a.model + " decodes in " + std::string(to_string(model.config().decode_mode)) + " mode, not " +
                a.mode);
  }
  const auto inputs = read_fill_inputs(a.in);
  std::vector<std::string> lines(inputs.size());
  parallel_for(inputs.size(), a.jobs, [&](std::size_t i) {
    const auto& f = inputs[i];
    try {
      const auto r = fill(model, f.words, f.asr ? &*f.asr : nullptr, a.n_best);
      lines[i] = json{{"id", f.id}, {"filled", r.filled.text()}, {"fills", fills_json(r)}}.dump();
    } catch (const Error& e) {
      throw Error(e.code(), "input '" + f.id + "': " + e.what());
    }
  });
  Output o(a.out, out);
  for (const auto& l : lines) o.line(l);
  return kExitOk;
}

// -------------------------------------------------------------- correct

struct CorrectArgs {
  std::string checker, filler, in, out, mode = "autocorrect";
  std::optional<double> threshold;
  bool gold = false;
  std::size_t jobs = default_jobs();
};

int cmd_correct(const CorrectArgs& a, std::ostream& out) {
  CorrectionOptions options;
  options.mode = parse_check_mode(a.mode);
  options.thresholds = thresholds_for(options.mode, a.threshold);
  const auto checker = load_model(a.checker, ModelKind::kChecker);
  const auto filler = load_model(a.filler, ModelKind::kFiller);
  const auto corpus = read_corpus_arg(a.in, a.gold);
  for (const auto& u : corpus)
    if (!u.annotator) throw Error(ErrorCode::kParseError, with_id(u, "missing 'annotator'"));

  std::vector<std::string> lines(corpus.size());
  std::vector<WerBreakdown> raw(corpus.size()), fixed(corpus.size());
  std::vector<char> fell_back(corpus.size(), 0);
  parallel_for(corpus.size(), a.jobs, [&](std::size_t i) {
    const auto& u = corpus[i];
    const auto* gold = a.gold ? &*u.gold : nullptr;
    json j = {{"id", u.id}, {"annotator", u.annotator->text()}};
    try {
      const auto r = correct(*u.annotator, u.asr_or_null(), checker, filler, options, gold);
      j["corrected"] = r.filled.text();
      j["labels"] = labels_json(r.labels);
      j["flagged"] = r.flagged;
      j["fills"] = fills_json(r.fill);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kTooLong) throw Error(e.code(), with_id(u, e.what()));
      fell_back[i] = 1;
      j["corrected"] = u.annotator->text();
      j["fallback"] = true;
    }
    if (gold) {
      raw[i] = wer(*u.annotator, *gold);
      fixed[i] = wer(tokenize(j["corrected"].get<std::string>()), *gold);
      j["wer_raw"] = wer_json(raw[i]);
      j["wer_htec"] = wer_json(fixed[i]);
    }
    lines[i] = j.dump();
  });
  Output o(a.out, out);
  for (const auto& l : lines) o.line(l);
  const auto fallbacks = static_cast<std::size_t>(std::count(fell_back.begin(), fell_back.end(), 1));
  if (fallbacks > 0) spdlog::warn("{} over-length utterances kept their annotator text", fallbacks);
  if (a.gold) {
    WerBreakdown r, f;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      r += raw[i];
      f += fixed[i];
    }
    spdlog::info("corpus WER {:.4f} -> {:.4f} over {} utterances", r.wer, f.wer, corpus.size());
  }
  return kExitOk;
}

// ------------------------------------------------------------- evaluate

struct EvaluateArgs {
  std::string hyp, ref, hyp_field, ref_field = "gold";
  bool per_utterance = false;
  bool as_json = false;
};

struct TextRecord {
  std::optional<std::string> id;
  Transcript text;
};

std::vector<TextRecord> read_records(const std::string& path, const std::vector<std::string>& fields) {
  std::istringstream in(read_text(path));
  std::vector<TextRecord> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto where = path + ":" + std::to_string(n);
    if (line[first] != '{') {
      out.push_back({std::nullopt, tokenize(line)});
      continue;
    }
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kParseError, where + ": " + e.what());
    }
    TextRecord r;
    if (j.contains("id")) r.id = j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump();
    bool found = false;
    for (const auto& f : fields) {
      if (j.contains(f) && j[f].is_string()) {
        r.text = tokenize(j[f].get<std::string>());
        found = true;
        break;
      }
    }
    if (!found) throw Error(ErrorCode::kParseError, where + ": no text field (looked for " + fields.front() + ")");
    out.push_back(std::move(r));
  }
  if (out.empty()) throw Error(ErrorCode::kEmptyCorpus, path + " has no records");
  return out;
}

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
  const std::vector<std::string> hyp_fields =
      a.hyp_field.empty() ? std::vector<std::string>{"hyp", "corrected", "filled", "text", "annotator"}
                          : std::vector<std::string>{a.hyp_field};
  const auto hyps = read_records(a.hyp, hyp_fields);
  const auto refs = read_records(a.ref, {a.ref_field});

  std::map<std::string, const TextRecord*> by_id;
  bool keyed = true;
  for (const auto& r : refs) {
    if (!r.id) keyed = false;
    else by_id[*r.id] = &r;
  }
  for (const auto& h : hyps)
    if (!h.id || !by_id.contains(*h.id)) keyed = false;
  if (!keyed && hyps.size() != refs.size()) {
    throw Error(ErrorCode::kParseError, "hypothesis and reference counts differ (" + std::to_string(hyps.size()) +
                                            " vs " + std::to_string(refs.size()) + ") and ids do not match");
  }

  WerBreakdown total;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    const auto& ref = keyed ? *by_id.at(*hyps[i].id) : refs[i];
    const auto w = wer(hyps[i].text, ref.text);
    total += w;
    if (a.per_utterance) {
      auto j = wer_json(w);
      j["id"] = hyps[i].id ? json(*hyps[i].id) : json(i);
      out << j.dump() << '\n';
    }
  }
  const auto share = [&](std::size_t n) {
    return total.errors() == 0 ? 0.0 : static_cast<double>(n) / static_cast<double>(total.errors());
  };
  if (a.as_json) {
    auto j = wer_json(total);
    j["utterances"] = hyps.size();
    j["shares"] = {{"substitutions", share(total.substitutions)},
                   {"insertions", share(total.insertions)},
                   {"deletions", share(total.deletions)}};
    out << j.dump() << '\n';
    return kExitOk;
  }
  out << std::fixed << std::setprecision(4);
  out << "utterances       " << hyps.size() << '\n';
  out << "reference words  " << total.reference_length << '\n';
  out << "WER              " << total.wer << '\n';
  out << std::setprecision(1);
  out << "substitutions    " << total.substitutions << " (" << 100.0 * share(total.substitutions) << "%)\n";
  out << "insertions       " << total.insertions << " (" << 100.0 * share(total.insertions) << "%)\n";
  out << "deletions        " << total.deletions << " (" << 100.0 * share(total.deletions) << "%)\n";
  return kExitOk;
}

// --------------------------------------------------------- simulate-mcr

struct McrArgs {
  std::string checker, filler, in;
  std::vector<double> mcr{0.5};
  std::size_t seeds = 1;
  std::uint64_t seed = 1;
  std::optional<double> threshold;
};

int cmd_simulate_mcr(const McrArgs& a, std::ostream& out) {
  if (a.seeds < 1) usage_error("--seeds must be at least 1");
  const auto checker = load_model(a.checker, ModelKind::kChecker);
  const auto filler = load_model(a.filler, ModelKind::kFiller);
  const auto corpus = read_corpus_arg(a.in, true);
  WerBreakdown raw;
  for (const auto& u : corpus) {
    if (!u.annotator) throw Error(ErrorCode::kParseError, with_id(u, "missing 'annotator'"));
    raw += wer(*u.annotator, *u.gold);
  }
  for (double mcr : a.mcr) {
    std::vector<double> wers;
    for (std::size_t k = 0; k < a.seeds; ++k) {
      McrConfig c;
      c.mcr = mcr;
      c.seed = a.seed + k;
      c.thresholds = thresholds_for(CheckMode::kAutocorrect, a.threshold);
      c.validate();
      const auto r = simulate_mcr(corpus, checker, filler, c);
      wers.push_back(r.wer.wer);
      auto j = wer_json(r.wer);
      j["mcr"] = mcr;
      j["seed"] = c.seed;
      j["labels_fixed"] = r.labels_fixed;
      j["fills_restored"] = r.fills_restored;
      j["fallbacks"] = r.fallbacks;
      out << j.dump() << '\n';
    }
    double mean = 0, var = 0;
    for (double w : wers) mean += w;
    mean /= static_cast<double>(wers.size());
    for (double w : wers) var += (w - mean) * (w - mean);
    const double sd = wers.size() > 1 ? std::sqrt(var / static_cast<double>(wers.size() - 1)) : 0.0;
    out << json{{"summary", true},
                {"mcr", mcr},
                {"seeds", wers.size()},
                {"mean_wer", mean},
                {"std_wer", sd},
                {"raw_wer", raw.wer},
                {"relative_change", raw.wer > 0 ? json((mean - raw.wer) / raw.wer) : json(nullptr)}}
               .dump()
        << '\n';
  }
  return kExitOk;
}

// ------------------------------------------------------------ gradcheck

struct GradcheckArgs {
  std::string kind = "all";
  std::string corpus;
  std::uint64_t seed = 1;
  std::size_t elements = 8;
  double step = 1e-5;
};

constexpr double kGradTolerance = 1e-4;

int cmd_gradcheck(const GradcheckArgs& a, std::ostream& out) {
  std::vector<Utterance> corpus;
  if (!a.corpus.empty()) {
    corpus = read_corpus_arg(a.corpus, true);
  } else {
    const auto gold = TemplateGrammar::shared().generate(8, a.seed);
    corpus = make_triples(gold, NoiseProfile::human(0.2), NoiseProfile::asr(0.2), a.seed);
  }
  TrainConfig tc;
  tc.validation_fraction = 0.0;
  tc.seed = a.seed;
  auto vocab = corpus_vocab(corpus, 1);

  ModelConfig base;
  base.layers_enc = 1;
  base.layers_dec = 1;
  base.model_dim = 8;
  base.heads = 2;
  base.ff_dim = 16;
  base.phoneme_dim = 4;
  base.vocab_size = vocab.size();
  base.seed = a.seed;

  struct Case {
    std::string name;
    ModelKind kind;
    DecodeMode mode;
  };
  std::vector<Case> cases;
  if (a.kind == "all" || a.kind == "checker") cases.push_back({"checker", ModelKind::kChecker, DecodeMode::kNAR});
  if (a.kind == "all" || a.kind == "filler") {
    cases.push_back({"filler-ar", ModelKind::kFiller, DecodeMode::kAR});
    cases.push_back({"filler-nar", ModelKind::kFiller, DecodeMode::kNAR});
  }
  if (cases.empty()) usage_error("--kind must be checker, filler or all");

  double worst = 0.0;
  for (const auto& c : cases) {
    auto mc = base;
    mc.kind = c.kind;
    mc.decode_mode = c.mode;
    auto b = ModelBundle::create(mc, vocab);
    std::function<tensor::Tensor()> loss;
    CheckerDataset cd;
    FillerDataset fd;
    if (c.kind == ModelKind::kChecker) {
      cd = make_checker_dataset(corpus, tc);
      if (cd.train.size() < 2) throw Error(ErrorCode::kEmptyCorpus, "need at least two usable utterances");
      loss = [&] { return tensor::add(checker_loss(b, cd.train[0]), checker_loss(b, cd.train[1])); };
    } else {
      fd = make_filler_dataset(corpus, c.mode, tc);
      if (fd.train.size() < 2) throw Error(ErrorCode::kEmptyCorpus, "need at least two filler samples");
      loss = [&] { return tensor::add(filler_loss(b, fd.train[0]), filler_loss(b, fd.train[1])); };
    }
    auto params = b.parameter_tensors();
    const double err = tensor::grad_check(loss, params, a.step, a.elements);
    worst = std::max(worst, err);
    out << json{{"model", c.name}, {"max_rel_error", err}, {"pass", err < kGradTolerance}}.dump() << '\n';
  }
  out << json{{"max_rel_error", worst}, {"tolerance", kGradTolerance}, {"pass", worst < kGradTolerance}}.dump()
      << '\n';
  return worst < kGradTolerance ? kExitOk : kExitModel;
}

// ---------------------------------------------------------------- serve

struct ServeArgs {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string checker, filler, sessions_path;
  double threshold_autocorrect = Thresholds{}.autocorrect;
  double threshold_copilot = Thresholds{}.copilot;
};

int cmd_serve(const ServeArgs& a) {
  ServiceConfig c;
  c.thresholds.autocorrect = a.threshold_autocorrect;
  c.thresholds.copilot = a.threshold_copilot;
  c.sessions_path = a.sessions_path;
  Service service(c);
  std::shared_ptr<const ModelBundle> checker, filler;
  if (!a.checker.empty()) checker = std::make_shared<const ModelBundle>(load_model(a.checker, ModelKind::kChecker));
  if (!a.filler.empty()) filler = std::make_shared<const ModelBundle>(load_model(a.filler, ModelKind::kFiller));
  if (!checker || !filler) spdlog::warn("serving without a {} model", !checker ? "checker" : "filler");
  service.set_models(checker, filler);
  spdlog::info("listening on {}:{}", a.host, a.port);
  if (!service.listen(a.host, a.port)) {
    throw Error(ErrorCode::kIoError, "cannot listen on " + a.host + ":" + std::to_string(a.port));
  }
  return kExitOk;
}

void configure_logging(bool verbose, bool quiet) {
  static std::once_flag once;
  std::call_once(once, [] { spdlog::set_default_logger(spdlog::stderr_color_mt("htec")); });
  spdlog::set_level(quiet ? spdlog::level::warn : verbose ? spdlog::level::debug : spdlog::level::info);
  spdlog::set_pattern("[%H:%M:%S] [%^%l%$] %v");
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Human transcription error correction: edit-label checking and mask filling."};
  app.name("htec");
  app.require_subcommand(1);
  bool verbose = false, quiet = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging on stderr");
  app.add_flag("-q,--quiet", quiet, "Only warnings and errors on stderr");

  const auto jobs_opt = [](CLI::App* sub, std::size_t& jobs) {
    sub->add_option("-j,--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
  };
  std::function<int()> action;

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate (gold, annotator, ASR) triples");
  s->add_option("--gold", synth.gold, "Gold sentences: one per line, or a JSONL corpus with 'gold'");
  s->add_option("--templates", synth.templates, "Generate this many gold sentences from the template grammar");
  s->add_option("-o,--out", synth.out, "Output JSONL (default stdout)");
  s->add_option("--seed", synth.seed, "Random seed")->capture_default_str();
  s->add_option("--rate", synth.rate, "Per-word error rate of the annotator channel")->capture_default_str();
  s->add_option("--asr-rate", synth.asr_rate, "Per-word error rate of the ASR channel (default --rate)");
  s->callback([&] { action = [&] { return cmd_synth(synth, out); }; });

  DeriveArgs derive;
  auto* d = app.add_subcommand("derive-labels", "Label annotator words against gold");
  d->add_option("-i,--in", derive.in, "Corpus JSONL")->required();
  d->add_option("-o,--out", derive.out, "Output JSONL (default stdout)");
  d->callback([&] { action = [&] { return cmd_derive(derive, out); }; });

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train a checker or filler model");
  t->add_option("kind", train.kind, "checker or filler")->required()->check(CLI::IsMember({"checker", "filler"}));
  t->add_option("--corpus", train.corpus, "Training corpus JSONL with gold and annotator")->required();
  t->add_option("--config", train.config, "Training config JSON");
  t->add_option("--model-config", train.model_config, "Architecture overrides JSON");
  t->add_option("--mode", train.mode, "Filler decoding: ar or nar")->capture_default_str();
  t->add_option("-o,--out", train.out, "Checkpoint path")->required();
  t->add_option("--seed", train.seed, "Seed for initialization and shuffling (overrides the config)");
  t->add_option("--epochs", train.epochs, "Maximum epochs (overrides the config)");
  t->add_option("--min-count", train.min_count, "Minimum word frequency for the vocabulary")->capture_default_str();
  t->add_option("--augment", train.augment, "Two-gram augmentation copies per sentence (AR filler)");
  t->callback([&] { action = [&] { return cmd_train(train, out); }; });

  CheckArgs chk;
  auto* c = app.add_subcommand("check", "Predict per-word edit labels");
  c->add_option("--model", chk.model, "Checker checkpoint")->required();
  c->add_option("-i,--in", chk.in, "Corpus JSONL with annotator (and optional asr)")->required();
  c->add_option("-o,--out", chk.out, "Output JSONL (default stdout)");
  c->add_option("--mode", chk.mode, "autocorrect or copilot")->capture_default_str();
  c->add_option("--threshold", chk.threshold, "Error-score threshold for the mode");
  jobs_opt(c, chk.jobs);
  c->callback([&] { action = [&] { return cmd_check(chk, out); }; });

  FillArgs fl;
  auto* f = app.add_subcommand("fill", "Fill masked words");
  f->add_option("--model", fl.model, "Filler checkpoint")->required();
  f->add_option("-i,--in", fl.in, "JSONL with 'words' (\"?\" or <mask> marks gaps) and optional asr")->required();
  f->add_option("-o,--out", fl.out, "Output JSONL (default stdout)");
  f->add_option("--mode", fl.mode, "Expected decoding mode of the model (ar or nar)");
  f->add_option("--n-best", fl.n_best, "Candidates per mask")->capture_default_str();
  jobs_opt(f, fl.jobs);
  f->callback([&] { action = [&] { return cmd_fill(fl, out); }; });

  CorrectArgs cor;
  auto* r = app.add_subcommand("correct", "Check, mask and fill");
  r->add_option("--checker", cor.checker, "Checker checkpoint")->required();
  r->add_option("--filler", cor.filler, "Filler checkpoint")->required();
  r->add_option("-i,--in", cor.in, "Corpus JSONL")->required();
  r->add_option("-o,--out", cor.out, "Output JSONL (default stdout)");
  r->add_option("--mode", cor.mode, "autocorrect or copilot")->capture_default_str();
  r->add_option("--threshold", cor.threshold, "Error-score threshold for the mode");
  r->add_flag("--gold", cor.gold, "Require gold and report WER");
  jobs_opt(r, cor.jobs);
  r->callback([&] { action = [&] { return cmd_correct(cor, out); }; });

  EvaluateArgs ev;
  auto* e = app.add_subcommand("evaluate", "Corpus WER of hypotheses against references");
  e->add_option("--hyp", ev.hyp, "Hypotheses: text lines or JSONL")->required();
  e->add_option("--ref", ev.ref, "References: text lines or JSONL")->required();
  e->add_option("--hyp-field", ev.hyp_field, "JSONL field holding the hypothesis");
  e->add_option("--ref-field", ev.ref_field, "JSONL field holding the reference")->capture_default_str();
  e->add_flag("--per-utterance", ev.per_utterance, "Print one JSON line per utterance before the summary");
  e->add_flag("--json", ev.as_json, "Print the summary as JSON");
  e->callback([&] { action = [&] { return cmd_evaluate(ev, out); }; });

  McrArgs mcr;
  auto* m = app.add_subcommand("simulate-mcr", "Simulate a human double-checking a share of model decisions");
  m->add_option("--checker", mcr.checker, "Checker checkpoint")->required();
  m->add_option("--filler", mcr.filler, "Filler checkpoint")->required();
  m->add_option("-i,--in", mcr.in, "Corpus JSONL with gold")->required();
  m->add_option("--mcr", mcr.mcr, "Manual check rate(s) in [0, 1]")->capture_default_str();
  m->add_option("--seeds", mcr.seeds, "Number of seeds per rate")->capture_default_str();
  m->add_option("--seed", mcr.seed, "First seed")->capture_default_str();
  m->add_option("--threshold", mcr.threshold, "Autocorrect threshold");
  m->callback([&] { action = [&] { return cmd_simulate_mcr(mcr, out); }; });

  GradcheckArgs gc;
  auto* g = app.add_subcommand("gradcheck", "Compare analytic and finite-difference gradients of the losses");
  g->add_option("--kind", gc.kind, "checker, filler or all")->capture_default_str();
  g->add_option("--corpus", gc.corpus, "Corpus JSONL (default: synthetic sentences)");
  g->add_option("--seed", gc.seed, "Seed for data and initialization")->capture_default_str();
  g->add_option("--elements", gc.elements, "Entries probed per tensor; 0 probes all")->capture_default_str();
  g->add_option("--step", gc.step, "Central-difference step")->capture_default_str();
  g->callback([&] { action = [&] { return cmd_gradcheck(gc, out); }; });

  ServeArgs sv;
  auto* v = app.add_subcommand("serve", "Run the HTTP service");
  v->add_option("--host", sv.host, "Bind address")->capture_default_str();
  v->add_option("--port", sv.port, "Port")->capture_default_str();
  v->add_option("--checker", sv.checker, "Checker checkpoint");
  v->add_option("--filler", sv.filler, "Filler checkpoint");
  v->add_option("--sessions-path", sv.sessions_path, "Append-only session log (JSONL)");
  v->add_option("--threshold-autocorrect", sv.threshold_autocorrect)->capture_default_str();
  v->add_option("--threshold-copilot", sv.threshold_copilot)->capture_default_str();
  v->callback([&] { action = [&] { return cmd_serve(sv); }; });

  if (argc > 1 && argv[1][0] != '-') {
    const std::string name = argv[1];
    if (app.get_subcommand_no_throw(name) == nullptr) {
      err << "unknown subcommand '" << name << "'\n" << app.help();
      return kExitUsage;
    }
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& ex) {
    return app.exit(ex, out, err);
  } catch (const CLI::CallForAllHelp& ex) {
    return app.exit(ex, out, err);
  } catch (const CLI::CallForVersion& ex) {
    return app.exit(ex, out, err);
  } catch (const CLI::ParseError& ex) {
    app.exit(ex, err, err);
    err << app.help();
    return kExitUsage;
  }

  configure_logging(verbose, quiet);
  try {
    return action();
  } catch (const Failure& ex) {
    spdlog::error("{}", ex.message);
    return ex.exit_code;
  } catch (const Error& ex) {
    spdlog::error("{}", ex.what());
    return exit_code_for(ex.code());
  } catch (const std::exception& ex) {
    spdlog::error("{}", ex.what());
    return kExitData;
  }
}

}  // namespace htec::cli
