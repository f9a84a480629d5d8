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

// HTTP front end.
//
//   GET  /v1/health            model versions
//   POST /v1/check             {annotator, asr?, mode?}         -> labels, scores, flagged
//   POST /v1/fill              {words, asr?, n_best?}           -> filled, per-mask candidates
//   POST /v1/correct           {annotator, asr?, mode?, gold?}  -> cascade output
//   POST /v1/sessions          {session_id?, utterance_id?, stage, text, gold?}
//   GET  /v1/sessions/{id}
//   GET  /v1/sessions/stats    pooled WER per stage over finished sessions with gold
//
// Every response carries X-Model-Version. Sessions live in an append-only
// JSON Lines log that is replayed on start-up.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "htec/checker.hpp"
#include "htec/model.hpp"

namespace htec {

enum class Stage : std::uint8_t { kRaw, kChecker, kFiller, kFinal };
inline constexpr std::size_t kStageCount = 4;
std::string_view to_string(Stage s);
/// Throws ParseError.
Stage parse_stage(std::string_view s);

struct SessionStageRecord {
  Transcript text;
  std::string timestamp;
};

struct CorrectionSession {
  std::string id;
  std::string utterance_id;
  std::optional<Transcript> gold;
  std::array<std::optional<SessionStageRecord>, kStageCount> stages;

  std::optional<Stage> last_stage() const;
  /// Text of `s`, or of the latest earlier stage when `s` was skipped.
  const Transcript* effective(Stage s) const;
};

/// Append-only session log with an in-memory index rebuilt from the log.
class SessionStore {
 public:
  /// Empty path keeps sessions in memory only.
  explicit SessionStore(std::filesystem::path path = {});

  struct Update {
    std::optional<std::string> session_id;  // absent creates a session
    std::string utterance_id;
    Stage stage = Stage::kRaw;
    Transcript text;
    std::optional<Transcript> gold;
  };
  enum class Status { kOk, kUnknownSession, kOutOfOrder };
  struct Result {
    Status status = Status::kOk;
    CorrectionSession session;
  };

  /// New sessions must start at the raw stage; later updates must move to a
  /// strictly later stage.
  Result apply(const Update& update);
  std::optional<CorrectionSession> get(const std::string& id) const;
  std::vector<CorrectionSession> all() const;

 private:
  Result apply_locked(const Update& update, const std::string& timestamp, bool persist);

  std::filesystem::path path_;
  mutable std::mutex mutex_;
  std::map<std::string, CorrectionSession> sessions_;
  std::uint64_t next_id_ = 1;
};

struct ServiceConfig {
  Thresholds thresholds;
  std::size_t default_n_best = 3;
  std::size_t max_n_best = 10;
  std::filesystem::path sessions_path;
};

struct HttpResponse {
  int status = 200;
  std::string body;
  std::map<std::string, std::string> headers;
};

class Service {
 public:
  explicit Service(ServiceConfig config);

  /// Atomically replaces the models; requests already running keep the old
  /// ones. Either may be null.
  void set_models(std::shared_ptr<const ModelBundle> checker, std::shared_ptr<const ModelBundle> filler);

  /// Routes one request. Used directly by tests and by the HTTP server.
  HttpResponse handle(const std::string& method, const std::string& path, const std::string& body) const;

  /// Serves until stop() is called or the process ends. Returns false when
  /// the port cannot be bound.
  bool listen(const std::string& host, int port);
  /// Binds to an ephemeral port and returns it, or -1.
  int bind_any_port(const std::string& host);
  bool listen_after_bind();
  void stop();

  ~Service();

 private:
  struct Models {
    std::shared_ptr<const ModelBundle> checker;
    std::shared_ptr<const ModelBundle> filler;
    std::string version;
  };
  std::shared_ptr<const Models> models() const;
  void mount();

  ServiceConfig config_;
  mutable SessionStore sessions_;
  mutable std::mutex models_mutex_;
  std::shared_ptr<const Models> models_;
  struct Server;
  std::unique_ptr<Server> server_;
};

}  // namespace htec
