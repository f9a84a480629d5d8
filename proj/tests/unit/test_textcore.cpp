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

#include <doctest.h>

#include "htec/errors.hpp"
#include "htec/textcore.hpp"

using namespace htec;

namespace {

ErrorCode code_of(const auto& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an htec::Error");
  return ErrorCode::kIoError;
}

}  // namespace

TEST_CASE("tokenize keeps punctuation attached and folds case") {
  auto t = tokenize("Give me, um... the latest news");
  CHECK(t.words == std::vector<std::string>{"give", "me,", "um...", "the", "latest", "news"});
  CHECK(t.raw == "Give me, um... the latest news");
  CHECK(tokenize("A   B").words == std::vector<std::string>{"a", "b"});
  CHECK(tokenize("order triple A. battery").words[2] == "a.");
}

TEST_CASE("tokenize rejects blank text") {
  CHECK(code_of([] { tokenize(""); }) == ErrorCode::kEmptyInput);
  CHECK(code_of([] { tokenize(" \t\n"); }) == ErrorCode::kEmptyInput);
}

TEST_CASE("tokenize is idempotent on its canonical output") {
  auto once = tokenize("  Play   Songs by\tThe Beatles ");
  auto twice = tokenize(once.text());
  CHECK(once == twice);
  CHECK(twice.text() == "play songs by the beatles");
}

TEST_CASE("parse_uncertain masks standalone question marks") {
  auto m = parse_uncertain(tokenize("play ? ? by ?"));
  CHECK(m.mask_positions == std::vector<std::size_t>{1, 2, 4});
  CHECK(m.transcript.words[0] == "play");
  CHECK(m.transcript.words[1] == "<mask>");
  CHECK(m.transcript.size() == 5);

  auto none = parse_uncertain(tokenize("what? is this"));
  CHECK(none.mask_positions.empty());
  CHECK(none.transcript.words[0] == "what?");

  auto all = parse_uncertain(tokenize("? ?"));
  CHECK(all.mask_positions.size() == 2);
}

TEST_CASE("model length cap") {
  std::vector<std::string> w(kMaxWords, "x");
  CHECK_NOTHROW(require_model_length(Transcript::from_words(w), "input"));
  w.push_back("x");
  CHECK(code_of([&] { require_model_length(Transcript::from_words(w), "input"); }) == ErrorCode::kTooLong);
}

TEST_CASE("build_vocab thresholds and ordering") {
  std::vector<Transcript> corpus{tokenize("play the news"), tokenize("play a song"), tokenize("the the")};
  auto v2 = build_vocab(corpus, 2);
  CHECK(v2.contains("play"));
  CHECK(v2.id("song") == Vocabulary::kUnk);
  // "the" (3) before "play" (2).
  CHECK(v2.id("the") == Vocabulary::kSpecialCount);
  CHECK(v2.id("play") == Vocabulary::kSpecialCount + 1);

  auto v3 = build_vocab(corpus, 3);
  CHECK(v3.id("play") == Vocabulary::kUnk);

  auto v1 = build_vocab(corpus, 1);
  // Ties broken lexicographically: a, news, song all have count 1.
  CHECK(v1.token(Vocabulary::kSpecialCount + 2) == "a");
  CHECK(v1.token(Vocabulary::kSpecialCount + 3) == "news");
  CHECK(v1.token(Vocabulary::kSpecialCount + 4) == "song");

  CHECK(build_vocab(corpus, 1) == v1);
  for (TokenId id = 0; id < static_cast<TokenId>(v1.size()); ++id) CHECK(v1.id(v1.token(id)) == id);
  CHECK(code_of([] { build_vocab(std::vector<Transcript>{}, 1); }) == ErrorCode::kEmptyCorpus);
}

TEST_CASE("special tokens have fixed ids") {
  Vocabulary v;
  CHECK(v.id("<pad>") == 0);
  CHECK(v.id("<unk>") == 1);
  CHECK(v.id("<mask>") == 2);
  CHECK(v.id("<sep>") == 3);
  CHECK(v.id("<s>") == 4);
  CHECK(v.id("</s>") == 5);
  CHECK(v.id("<eof>") == 6);
  CHECK(is_special_token("<mask>"));
  CHECK_FALSE(is_special_token("mask"));
}
