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

#include "htec/service.hpp"

#include <chrono>
#include <ctime>
#include <fstream>

#include <httplib.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "htec/errors.hpp"
#include "htec/filler.hpp"
#include "htec/metrics.hpp"
#include "htec/pipeline.hpp"

namespace htec {

using json = nlohmann::json;

namespace {

constexpr std::array<std::string_view, kStageCount> kStageNames = {"raw", "checker", "filler", "final"};

std::string now_utc() {
  const auto now = std::chrono::system_clock::now();
  const auto t = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  char out[40];
  std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms));
  return out;
}

/// Client-facing failure with an HTTP status.
struct HttpError {
  int status;
  std::string code;
  std::string message;
};

[[noreturn]] void bad_request(const std::string& m) { throw HttpError{400, "BadRequest", m}; }

Transcript transcript_of(const json& v, const char* field) {
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s.find_first_not_of(" \t\r\n") == std::string::npos) bad_request(std::string("'") + field + "' is empty");
    return tokenize(s);
  }
  if (v.is_array()) {
    std::vector<std::string> words;
    for (const auto& w : v) {
      if (!w.is_string()) bad_request(std::string("'") + field + "' must contain only strings");
      auto t = tokenize(w.get<std::string>());
      words.insert(words.end(), t.words.begin(), t.words.end());
    }
    if (words.empty()) bad_request(std::string("'") + field + "' is empty");
    return Transcript::from_words(std::move(words));
  }
  bad_request(std::string("'") + field + "' must be a string or an array of words");
}

Transcript required_transcript(const json& body, const char* field) {
  if (!body.contains(field) || body[field].is_null()) bad_request(std::string("missing '") + field + "'");
  return transcript_of(body[field], field);
}

std::optional<Transcript> optional_transcript(const json& body, const char* field) {
  if (!body.contains(field) || body[field].is_null()) return std::nullopt;
  if (body[field].is_string() && body[field].get<std::string>().find_first_not_of(" \t\r\n") == std::string::npos)
    return std::nullopt;
  if (body[field].is_array() && body[field].empty()) return std::nullopt;
  return transcript_of(body[field], field);
}

json parse_body(const std::string& body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception&) {
    bad_request("body is not valid JSON");
  }
  if (!j.is_object()) bad_request("body must be a JSON object");
  return j;
}

void require_length(const Transcript& t, const char* what) {
  if (t.size() > kMaxWords) {
    throw HttpError{422, "TooLong", std::string(what) + " has " + std::to_string(t.size()) + " words; the limit is " +
                                        std::to_string(kMaxWords)};
  }
}

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

CheckMode mode_of(const json& body, CheckMode fallback) {
  if (!body.contains("mode") || body["mode"].is_null()) return fallback;
  if (!body["mode"].is_string()) bad_request("'mode' must be a string");
  try {
    return parse_check_mode(body["mode"].get<std::string>());
  } catch (const Error& e) {
    bad_request(e.what());
  }
}

Thresholds thresholds_of(const json& body, Thresholds base, CheckMode mode) {
  if (body.contains("threshold") && !body["threshold"].is_null()) {
    if (!body["threshold"].is_number()) bad_request("'threshold' must be a number");
    (mode == CheckMode::kAutocorrect ? base.autocorrect : base.copilot) = body["threshold"].get<double>();
    try {
      base.validate();
    } catch (const Error& e) {
      bad_request(e.what());
    }
  }
  return base;
}

json session_json(const CorrectionSession& s) {
  json stages = json::object();
  for (std::size_t k = 0; k < kStageCount; ++k) {
    const auto& rec = s.stages[k];
    if (!rec) continue;
    json st = {{"text", rec->text.text()}, {"timestamp", rec->timestamp}};
    if (s.gold) st["wer"] = wer_json(wer(rec->text, *s.gold));
    stages[std::string(kStageNames[k])] = std::move(st);
  }
  json j = {{"id", s.id}, {"utterance_id", s.utterance_id}, {"stages", stages}};
  j["gold"] = s.gold ? json(s.gold->text()) : json(nullptr);
  return j;
}

}  // namespace

std::string_view to_string(Stage s) { return kStageNames[static_cast<std::size_t>(s)]; }

Stage parse_stage(std::string_view s) {
  for (std::size_t k = 0; k < kStageCount; ++k)
    if (kStageNames[k] == s) return static_cast<Stage>(k);
  throw Error(ErrorCode::kParseError, "unknown stage '" + std::string(s) + "' (expected raw, checker, filler or final)");
}

std::optional<Stage> CorrectionSession::last_stage() const {
  for (std::size_t k = kStageCount; k-- > 0;)
    if (stages[k]) return static_cast<Stage>(k);
  return std::nullopt;
}

const Transcript* CorrectionSession::effective(Stage s) const {
  for (std::size_t k = static_cast<std::size_t>(s) + 1; k-- > 0;)
    if (stages[k]) return &stages[k]->text;
  return nullptr;
}

SessionStore::SessionStore(std::filesystem::path path) : path_(std::move(path)) {
  if (path_.empty() || !std::filesystem::exists(path_)) return;
  std::ifstream f(path_);
  if (!f) throw Error(ErrorCode::kIoError, "cannot read session log " + path_.string());
  std::string line;
  std::size_t n = 0;
  while (std::getline(f, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = json::parse(line);
      Update u;
      u.session_id = j.at("session").get<std::string>();
      u.utterance_id = j.value("utterance_id", "");
      u.stage = parse_stage(j.at("stage").get<std::string>());
      u.text = tokenize(j.at("text").get<std::string>());
      if (j.contains("gold") && j["gold"].is_string()) u.gold = tokenize(j["gold"].get<std::string>());
      // Replayed events create their session on first sight.
      if (!sessions_.contains(*u.session_id)) {
        CorrectionSession s;
        s.id = *u.session_id;
        s.utterance_id = u.utterance_id;
        sessions_.emplace(s.id, s);
      }
      apply_locked(u, j.value("time", ""), false);
      const auto& id = *u.session_id;
      if (id.size() > 1 && id[0] == 's') next_id_ = std::max<std::uint64_t>(next_id_, std::stoull(id.substr(1)) + 1);
    } catch (const std::exception& e) {
      throw Error(ErrorCode::kParseError, path_.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
}

SessionStore::Result SessionStore::apply(const Update& update) {
  std::lock_guard lock(mutex_);
  return apply_locked(update, now_utc(), true);
}

SessionStore::Result SessionStore::apply_locked(const Update& update, const std::string& timestamp, bool persist) {
  Result r;
  CorrectionSession* s = nullptr;
  CorrectionSession fresh;
  if (update.session_id) {
    auto it = sessions_.find(*update.session_id);
    if (it == sessions_.end()) {
      r.status = Status::kUnknownSession;
      return r;
    }
    s = &it->second;
  } else {
    char buf[24];
    std::snprintf(buf, sizeof buf, "s%06llu", static_cast<unsigned long long>(next_id_));
    fresh.id = buf;
    fresh.utterance_id = update.utterance_id;
    s = &fresh;
  }
  const auto last = s->last_stage();
  if ((!last && update.stage != Stage::kRaw) || (last && update.stage <= *last)) {
    r.status = Status::kOutOfOrder;
    r.session = *s;
    return r;
  }
  if (persist && !path_.empty()) {
    json line = {{"session", s->id}, {"utterance_id", update.utterance_id.empty() ? s->utterance_id : update.utterance_id},
                 {"stage", to_string(update.stage)}, {"text", update.text.text()}, {"time", timestamp}};
    if (update.gold) line["gold"] = update.gold->text();
    std::ofstream f(path_, std::ios::app);
    if (!f) throw Error(ErrorCode::kIoError, "cannot append to session log " + path_.string());
    f << line.dump() << '\n';
  }
  if (!update.session_id) {
    ++next_id_;
    s = &sessions_.emplace(fresh.id, fresh).first->second;
  }
  if (!update.utterance_id.empty()) s->utterance_id = update.utterance_id;
  if (update.gold) s->gold = update.gold;
  s->stages[static_cast<std::size_t>(update.stage)] = SessionStageRecord{update.text, timestamp};
  r.session = *s;
  return r;
}

std::optional<CorrectionSession> SessionStore::get(const std::string& id) const {
  std::lock_guard lock(mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) return std::nullopt;
  return it->second;
}

std::vector<CorrectionSession> SessionStore::all() const {
  std::lock_guard lock(mutex_);
  std::vector<CorrectionSession> out;
  for (const auto& [id, s] : sessions_) out.push_back(s);
  return out;
}

struct Service::Server {
  httplib::Server http;
};

Service::Service(ServiceConfig config)
    : config_(std::move(config)), sessions_(config_.sessions_path) {
  config_.thresholds.validate();
  auto m = std::make_shared<Models>();
  m->version = "checker=none;filler=none";
  models_ = std::move(m);
}

Service::~Service() = default;

void Service::set_models(std::shared_ptr<const ModelBundle> checker, std::shared_ptr<const ModelBundle> filler) {
  if (checker && checker->config().kind != ModelKind::kChecker)
    throw Error(ErrorCode::kConfigError, "checker model is not a checker");
  if (filler && filler->config().kind != ModelKind::kFiller)
    throw Error(ErrorCode::kConfigError, "filler model is not a filler");
  auto m = std::make_shared<Models>();
  m->checker = std::move(checker);
  m->filler = std::move(filler);
  m->version = "checker=" + (m->checker ? m->checker->version() : std::string("none")) +
               ";filler=" + (m->filler ? m->filler->version() : std::string("none"));
  std::lock_guard lock(models_mutex_);
  models_ = std::move(m);
}

std::shared_ptr<const Service::Models> Service::models() const {
  std::lock_guard lock(models_mutex_);
  return models_;
}

HttpResponse Service::handle(const std::string& method, const std::string& path, const std::string& body) const {
  const auto m = models();
  HttpResponse res;
  res.headers["X-Model-Version"] = m->version;
  res.headers["Content-Type"] = "application/json";
  auto need_checker = [&] {
    if (!m->checker) throw HttpError{503, "ModelNotLoaded", "no checker model is loaded"};
    return m->checker;
  };
  auto need_filler = [&] {
    if (!m->filler) throw HttpError{503, "ModelNotLoaded", "no filler model is loaded"};
    return m->filler;
  };
  auto only = [&](const char* allowed) {
    if (method != allowed) throw HttpError{405, "MethodNotAllowed", method + " is not supported on " + path};
  };

  try {
    json out;
    if (path == "/v1/health") {
      only("GET");
      out = {{"status", "ok"},
             {"checker", m->checker ? json(m->checker->version()) : json(nullptr)},
             {"filler", m->filler ? json(m->filler->version()) : json(nullptr)}};
    } else if (path == "/v1/check") {
      only("POST");
      const auto j = parse_body(body);
      const auto annotator = required_transcript(j, "annotator");
      const auto asr = optional_transcript(j, "asr");
      require_length(annotator, "annotator");
      if (asr) require_length(*asr, "asr");
      const auto mode = mode_of(j, CheckMode::kCopilot);
      const auto thresholds = thresholds_of(j, config_.thresholds, mode);
      const auto checker = need_checker();
      const auto pred = check(*checker, annotator, asr ? &*asr : nullptr);
      json probs = json::array();
      for (const auto& w : pred.words) probs.push_back(w.probabilities);
      out = {{"words", annotator.words},
             {"labels", labels_json(pred.labels())},
             {"scores", pred.error_scores()},
             {"probabilities", probs},
             {"mode", to_string(mode)},
             {"flagged", apply_threshold(pred, mode, thresholds)}};
    } else if (path == "/v1/fill") {
      only("POST");
      const auto j = parse_body(body);
      const auto words = parse_uncertain(required_transcript(j, "words")).transcript;
      const auto asr = optional_transcript(j, "asr");
      require_length(words, "words");
      if (asr) require_length(*asr, "asr");
      std::size_t n = config_.default_n_best;
      if (j.contains("n_best") && !j["n_best"].is_null()) {
        if (!j["n_best"].is_number_integer() || j["n_best"].get<long long>() < 1 ||
            j["n_best"].get<long long>() > static_cast<long long>(config_.max_n_best))
          bad_request("'n_best' must be an integer in [1, " + std::to_string(config_.max_n_best) + "]");
        n = j["n_best"].get<std::size_t>();
      }
      const auto filler = need_filler();
      if (j.contains("mode") && !j["mode"].is_null()) {
        if (!j["mode"].is_string()) bad_request("'mode' must be a string");
        DecodeMode requested;
        try {
          requested = parse_decode_mode(j["mode"].get<std::string>());
        } catch (const Error& e) {
          bad_request(e.what());
        }
        if (requested != filler->config().decode_mode)
          bad_request("the loaded filler decodes in " + std::string(to_string(filler->config().decode_mode)) + " mode");
      }
      const auto r = fill(*filler, words, asr ? &*asr : nullptr, n);
      out = {{"filled", r.filled.text()}, {"words", r.filled.words}, {"iterations", r.iterations},
             {"fills", fills_json(r)}};
    } else if (path == "/v1/correct") {
      only("POST");
      const auto j = parse_body(body);
      const auto annotator = required_transcript(j, "annotator");
      const auto asr = optional_transcript(j, "asr");
      const auto gold = optional_transcript(j, "gold");
      require_length(annotator, "annotator");
      if (asr) require_length(*asr, "asr");
      CorrectionOptions o;
      o.mode = mode_of(j, CheckMode::kAutocorrect);
      o.thresholds = thresholds_of(j, config_.thresholds, o.mode);
      const auto checker = need_checker();
      const auto filler = need_filler();
      const auto r = correct(annotator, asr ? &*asr : nullptr, *checker, *filler, o, gold ? &*gold : nullptr);
      out = {{"labels", labels_json(r.labels)},
             {"scores", r.checker.error_scores()},
             {"flagged", r.flagged},
             {"masked", r.masked.masked.transcript.text()},
             {"filled", r.filled.text()},
             {"fills", fills_json(r.fill)}};
      if (r.wer_raw) {
        out["wer_raw"] = wer_json(*r.wer_raw);
        out["wer_htec"] = wer_json(*r.wer_htec);
      }
    } else if (path == "/v1/sessions") {
      only("POST");
      const auto j = parse_body(body);
      SessionStore::Update u;
      if (j.contains("session_id") && !j["session_id"].is_null()) {
        if (!j["session_id"].is_string()) bad_request("'session_id' must be a string");
        u.session_id = j["session_id"].get<std::string>();
      }
      if (j.contains("utterance_id") && j["utterance_id"].is_string()) u.utterance_id = j["utterance_id"];
      if (!j.contains("stage") || !j["stage"].is_string()) bad_request("missing 'stage'");
      try {
        u.stage = parse_stage(j["stage"].get<std::string>());
      } catch (const Error& e) {
        bad_request(e.what());
      }
      u.text = required_transcript(j, "text");
      u.gold = optional_transcript(j, "gold");
      const auto r = sessions_.apply(u);
      if (r.status == SessionStore::Status::kUnknownSession)
        throw HttpError{404, "UnknownSession", "no session '" + *u.session_id + "'"};
      if (r.status == SessionStore::Status::kOutOfOrder) {
        const auto last = r.session.last_stage();
        throw HttpError{409, "StageOutOfOrder",
                        "stage '" + std::string(to_string(u.stage)) + "' cannot follow " +
                            (last ? "'" + std::string(to_string(*last)) + "'" : std::string("an empty session"))};
      }
      out = session_json(r.session);
      res.status = u.session_id ? 200 : 201;
    } else if (path == "/v1/sessions/stats") {
      only("GET");
      std::array<WerBreakdown, kStageCount> pooled{};
      std::size_t count = 0;
      for (const auto& s : sessions_.all()) {
        if (!s.gold || !s.stages[static_cast<std::size_t>(Stage::kFinal)]) continue;
        ++count;
        for (std::size_t k = 0; k < kStageCount; ++k) pooled[k] += wer(*s.effective(static_cast<Stage>(k)), *s.gold);
      }
      json stages = json::object(), relative = json::object();
      if (count > 0) {
        for (std::size_t k = 0; k < kStageCount; ++k) {
          stages[std::string(kStageNames[k])] = wer_json(pooled[k]);
          if (k > 0) {
            relative[std::string(kStageNames[k])] =
                pooled[0].wer > 0 ? json((pooled[k].wer - pooled[0].wer) / pooled[0].wer) : json(nullptr);
          }
        }
      }
      out = {{"count", count}, {"stages", stages}, {"relative", relative}};
    } else if (path.rfind("/v1/sessions/", 0) == 0) {
      only("GET");
      const auto id = path.substr(std::string("/v1/sessions/").size());
      const auto s = sessions_.get(id);
      if (!s) throw HttpError{404, "UnknownSession", "no session '" + id + "'"};
      out = session_json(*s);
    } else {
      throw HttpError{404, "NotFound", "no route for " + path};
    }
    res.body = out.dump();
  } catch (const HttpError& e) {
    res.status = e.status;
    res.body = json{{"error", {{"code", e.code}, {"message", e.message}}}}.dump();
  } catch (const Error& e) {
    switch (e.code()) {
      case ErrorCode::kTooLong:
        res.status = 422;
        break;
      case ErrorCode::kEmptyInput:
      case ErrorCode::kEmptyWord:
      case ErrorCode::kParseError:
      case ErrorCode::kConfigError:
        res.status = 400;
        break;
      default:
        res.status = 500;
    }
    res.body = json{{"error", {{"code", error_code_name(e.code())}, {"message", e.what()}}}}.dump();
  } catch (const json::exception& e) {
    res.status = 400;
    res.body = json{{"error", {{"code", "BadRequest"}, {"message", e.what()}}}}.dump();
  } catch (const std::exception& e) {
    res.status = 500;
    res.body = json{{"error", {{"code", "Internal"}, {"message", e.what()}}}}.dump();
  }
  return res;
}

void Service::mount() {
  if (server_) return;
  server_ = std::make_unique<Server>();
  auto handler = [this](const httplib::Request& req, httplib::Response& res) {
    const auto r = handle(req.method, req.path, req.body);
    res.status = r.status;
    for (const auto& [k, v] : r.headers)
      if (k != "Content-Type") res.set_header(k, v);
    res.set_content(r.body, "application/json");
    spdlog::debug("{} {} -> {}", req.method, req.path, r.status);
  };
  server_->http.Get(R"(/.*)", handler);
  server_->http.Post(R"(/.*)", handler);
  server_->http.Put(R"(/.*)", handler);
  server_->http.Delete(R"(/.*)", handler);
}

bool Service::listen(const std::string& host, int port) {
  mount();
  return server_->http.listen(host, port);
}

int Service::bind_any_port(const std::string& host) {
  mount();
  return server_->http.bind_to_any_port(host);
}

bool Service::listen_after_bind() {
  mount();
  return server_->http.listen_after_bind();
}

void Service::stop() {
  if (server_) server_->http.stop();
}

}  // namespace htec
