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

#include "htec/metrics.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <numeric>
#include <set>
#include <utility>

#include "htec/errors.hpp"

namespace htec {

WerBreakdown& WerBreakdown::operator+=(const WerBreakdown& other) {
  substitutions += other.substitutions;
  insertions += other.insertions;
  deletions += other.deletions;
  hits += other.hits;
  reference_length += other.reference_length;
  wer = static_cast<double>(errors()) / static_cast<double>(std::max<std::size_t>(1, reference_length));
  return *this;
}

namespace {

std::string normalize(const std::string& w, const WerOptions& o) {
  std::string out;
  for (char c : w) {
    if (o.ignore_punctuation && !(std::isalnum(static_cast<unsigned char>(c)) || c == '\'' ||
                                  static_cast<unsigned char>(c) >= 0x80))
      continue;
    out.push_back(o.ignore_case ? static_cast<char>(std::tolower(static_cast<unsigned char>(c))) : c);
  }
  return out;
}

// (errors, -substitutions), compared lexicographically.
struct Cell {
  std::size_t errors = 0;
  std::size_t subs = 0;
  bool better_than(const Cell& o) const {
    return errors < o.errors || (errors == o.errors && subs > o.subs);
  }
};

}  // namespace

WerBreakdown wer(const Transcript& hyp, const Transcript& ref, const WerOptions& options) {
  if (ref.empty()) throw Error(ErrorCode::kEmptyReference, "reference transcript is empty");
  std::vector<std::string> h, r;
  for (const auto& w : hyp.words) h.push_back(normalize(w, options));
  for (const auto& w : ref.words) r.push_back(normalize(w, options));
  const std::size_t n = h.size(), m = r.size();

  // Prefix DP over hyp (rows) and ref (columns).
  std::vector<Cell> dp((n + 1) * (m + 1));
  auto at = [&](std::size_t i, std::size_t j) -> Cell& { return dp[i * (m + 1) + j]; };
  for (std::size_t i = 0; i <= n; ++i) at(i, 0) = {i, 0};
  for (std::size_t j = 0; j <= m; ++j) at(0, j) = {j, 0};
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const bool same = h[i - 1] == r[j - 1];
      Cell best{at(i - 1, j - 1).errors + (same ? 0 : 1), at(i - 1, j - 1).subs + (same ? 0 : 1)};
      Cell ins{at(i - 1, j).errors + 1, at(i - 1, j).subs};
      Cell del{at(i, j - 1).errors + 1, at(i, j - 1).subs};
      if (ins.better_than(best)) best = ins;
      if (del.better_than(best)) best = del;
      at(i, j) = best;
    }
  }
  WerBreakdown out;
  const Cell& end = at(n, m);
  out.substitutions = end.subs;
  out.reference_length = m;
  // errors = S + I + D and I - D = n - m fix the rest.
  const std::size_t indel = end.errors - end.subs;
  out.insertions = (indel + n - m) / 2;
  out.deletions = indel - out.insertions;
  out.hits = m - out.substitutions - out.deletions;
  out.wer = static_cast<double>(out.errors()) / static_cast<double>(m);
  return out;
}

namespace {

// Error units: word k itself is wrong -> (0, k); gap g needs words -> (1, g).
std::set<std::pair<int, std::size_t>> error_units(std::span<const EditLabel> labels) {
  std::set<std::pair<int, std::size_t>> units;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto l = labels[i];
    if (l == EditLabel::D || substitutes(l)) units.emplace(0, i);
    if (inserts_left(l)) units.emplace(1, i);
    if (inserts_right(l)) units.emplace(1, i + 1);
  }
  return units;
}

double safe_div(double num, double den) { return den > 0 ? num / den : 0.0; }

}  // namespace

std::optional<double> roc_auc(std::span<const double> scores, const std::vector<bool>& positive) {
  if (scores.size() != positive.size())
    throw Error(ErrorCode::kShapeError, "scores and labels differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });

  // Mann-Whitney U with average ranks for ties.
  double pos = 0, neg = 0, rank_sum = 0;
  for (std::size_t k = 0; k < order.size();) {
    std::size_t e = k;
    while (e < order.size() && scores[order[e]] == scores[order[k]]) ++e;
    const double avg_rank = (static_cast<double>(k + 1) + static_cast<double>(e)) / 2.0;
    for (std::size_t q = k; q < e; ++q) {
      if (positive[order[q]]) {
        pos += 1;
        rank_sum += avg_rank;
      } else {
        neg += 1;
      }
    }
    k = e;
  }
  if (pos == 0 || neg == 0) return std::nullopt;
  return (rank_sum - pos * (pos + 1) / 2.0) / (pos * neg);
}

CheckerMetrics checker_metrics(std::span<const std::vector<EditLabel>> predicted,
                               std::span<const std::vector<EditLabel>> truth,
                               std::span<const std::vector<double>> error_scores) {
  if (predicted.size() != truth.size() || (!error_scores.empty() && error_scores.size() != truth.size()))
    throw Error(ErrorCode::kShapeError, "utterance counts differ");

  double tp = 0, n_pred = 0, n_true = 0;
  std::array<double, kLabelCount> cls_tp{}, cls_pred{}, cls_true{};
  std::vector<double> scores;
  std::vector<bool> positives;
  for (std::size_t u = 0; u < truth.size(); ++u) {
    const auto& p = predicted[u];
    const auto& t = truth[u];
    if (p.size() != t.size() || (!error_scores.empty() && error_scores[u].size() != t.size())) {
      throw Error(ErrorCode::kShapeError, "utterance " + std::to_string(u) + ": " +
                                              std::to_string(p.size()) + " predictions for " +
                                              std::to_string(t.size()) + " words");
    }
    const auto pu = error_units(p), tu = error_units(t);
    n_pred += static_cast<double>(pu.size());
    n_true += static_cast<double>(tu.size());
    for (const auto& unit : pu) tp += tu.contains(unit) ? 1 : 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const auto pi = static_cast<std::size_t>(p[i]), ti = static_cast<std::size_t>(t[i]);
      cls_pred[pi] += 1;
      cls_true[ti] += 1;
      if (pi == ti) cls_tp[pi] += 1;
      scores.push_back(error_scores.empty() ? (p[i] != EditLabel::K ? 1.0 : 0.0) : error_scores[u][i]);
      positives.push_back(t[i] != EditLabel::K);
    }
  }

  CheckerMetrics m;
  m.precision = n_pred > 0 ? tp / n_pred : (n_true > 0 ? 0.0 : 1.0);
  m.recall = n_true > 0 ? tp / n_true : 1.0;
  double f1_sum = 0;
  int classes = 0;
  for (std::size_t c = 0; c < kLabelCount; ++c) {
    if (cls_pred[c] == 0 && cls_true[c] == 0) continue;
    const double pr = safe_div(cls_tp[c], cls_pred[c]), rc = safe_div(cls_tp[c], cls_true[c]);
    f1_sum += safe_div(2 * pr * rc, pr + rc);
    ++classes;
  }
  m.macro_f1 = classes ? f1_sum / classes : 0.0;
  m.auc = roc_auc(scores, positives);
  return m;
}

CheckerMetrics checker_metrics(std::span<const EditLabel> predicted, std::span<const EditLabel> truth,
                               std::span<const double> error_scores) {
  std::vector<std::vector<EditLabel>> p{{predicted.begin(), predicted.end()}};
  std::vector<std::vector<EditLabel>> t{{truth.begin(), truth.end()}};
  std::vector<std::vector<double>> s;
  if (!error_scores.empty()) s.emplace_back(error_scores.begin(), error_scores.end());
  return checker_metrics(p, t, s);
}

FillerMetrics filler_metrics(std::span<const std::vector<std::string>> fills,
                             std::span<const std::vector<std::string>> gold_fills) {
  if (fills.size() != gold_fills.size())
    throw Error(ErrorCode::kShapeError, "fill and gold fill counts differ");
  double filled = 0, expected = 0, correct = 0;
  for (std::size_t k = 0; k < fills.size(); ++k) {
    filled += static_cast<double>(fills[k].size());
    expected += static_cast<double>(gold_fills[k].size());
    const std::size_t common = std::min(fills[k].size(), gold_fills[k].size());
    for (std::size_t w = 0; w < common; ++w) correct += fills[k][w] == gold_fills[k][w] ? 1 : 0;
  }
  FillerMetrics m;
  if (filled > 0) m.precision = correct / filled;
  if (expected > 0) m.recall = correct / expected;
  if (m.precision && m.recall) {
    const double p = *m.precision, r = *m.recall;
    m.f1 = p + r > 0 ? 2 * p * r / (p + r) : 0.0;
  }
  return m;
}

}  // namespace htec
