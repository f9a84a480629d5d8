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

// Reference implementations used only by tests. They share no code with the
// library: edit distances are computed by memoized recursion over prefixes
// (the library runs an iterative suffix table), and small cases can be
// checked against full path enumeration.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace htec::oracle {

using Words = std::vector<std::string>;
using SubCost = std::function<double(const std::string&, const std::string&)>;

/// Minimum edit cost of turning `a` into `b` with unit indels.
inline double edit_cost(const Words& a, const Words& b, const SubCost& sub) {
  std::map<std::pair<std::size_t, std::size_t>, double> memo;
  std::function<double(std::size_t, std::size_t)> go = [&](std::size_t i, std::size_t j) -> double {
    if (i == 0) return static_cast<double>(j);
    if (j == 0) return static_cast<double>(i);
    auto key = std::make_pair(i, j);
    if (auto it = memo.find(key); it != memo.end()) return it->second;
    const double best = std::min({go(i - 1, j - 1) + sub(a[i - 1], b[j - 1]), go(i - 1, j) + 1.0, go(i, j - 1) + 1.0});
    memo[key] = best;
    return best;
  };
  return go(a.size(), b.size());
}

inline double uniform_sub(const std::string& x, const std::string& y) { return x == y ? 0.0 : 1.0; }

/// Levenshtein distance with unit costs.
inline std::size_t word_errors(const Words& hyp, const Words& ref) {
  return static_cast<std::size_t>(std::lround(edit_cost(hyp, ref, uniform_sub)));
}

/// One alignment step in enumeration order: 0 diagonal, 1 delete from a,
/// 2 insert from b.
struct Path {
  std::vector<int> ops;
  double cost = 0.0;
};

/// Every alignment path between a and b. Exponential; keep inputs tiny.
inline std::vector<Path> all_paths(const Words& a, const Words& b, const SubCost& sub) {
  std::vector<Path> out;
  Path cur;
  std::function<void(std::size_t, std::size_t)> go = [&](std::size_t i, std::size_t j) {
    if (i == a.size() && j == b.size()) {
      out.push_back(cur);
      return;
    }
    const double saved = cur.cost;
    if (i < a.size() && j < b.size()) {
      cur.ops.push_back(0);
      cur.cost += sub(a[i], b[j]);
      go(i + 1, j + 1);
      cur.ops.pop_back();
      cur.cost = saved;
    }
    if (i < a.size()) {
      cur.ops.push_back(1);
      cur.cost += 1.0;
      go(i + 1, j);
      cur.ops.pop_back();
      cur.cost = saved;
    }
    if (j < b.size()) {
      cur.ops.push_back(2);
      cur.cost += 1.0;
      go(i, j + 1);
      cur.ops.pop_back();
      cur.cost = saved;
    }
  };
  go(0, 0);
  return out;
}

/// Random word lists over a small alphabet so matches are common.
inline Words random_words(std::mt19937_64& rng, std::size_t max_len, const Words& alphabet, std::size_t min_len = 0) {
  std::uniform_int_distribution<std::size_t> len(min_len, max_len);
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
  Words w(len(rng));
  for (auto& x : w) x = alphabet[pick(rng)];
  return w;
}

}  // namespace htec::oracle
