// src/scoring.cc

// Copyright 2026  The ulid Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "ulid/scoring.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>

#include "ulid/io_util.h"
#include "ulid/parallel.h"

namespace ulid {

void TrialScoreSet::validate() const {
  const int64_t k = static_cast<int64_t>(languages.size());
  ULID_CHECK(k >= 2) << "a trial score set needs at least 2 languages";
  for (const auto& e : entries) {
    ULID_CHECK(e.true_label >= 0 && e.true_label < k)
        << "entry " << e.utt_id << ": bad true label " << e.true_label;
    ULID_CHECK(static_cast<int64_t>(e.scores.size()) == k)
        << "entry " << e.utt_id << ": " << e.scores.size() << " scores for "
        << k << " languages";
    for (double s : e.scores) {
      ULID_CHECK(std::isfinite(s)) << "entry " << e.utt_id
                                   << ": non-finite score";
    }
  }
}

double eer_percent(const TrialScoreSet& set) {
  set.validate();
  // Pool every (utterance, language) one-vs-rest trial.
  std::vector<std::pair<double, uint8_t>> trials;
  trials.reserve(set.entries.size() * set.languages.size());
  int64_t n_tar = 0, n_non = 0;
  for (const auto& e : set.entries) {
    for (size_t l = 0; l < e.scores.size(); ++l) {
      const bool target = static_cast<int>(l) == e.true_label;
      trials.push_back({e.scores[l], target ? 1 : 0});
      (target ? n_tar : n_non) += 1;
    }
  }
  if (n_tar == 0 || n_non == 0) {
    ULID_ERR << "degenerate trial set: " << n_tar << " target and " << n_non
             << " non-target trials";
  }
  std::sort(trials.begin(), trials.end());

  // Operating points at every distinct threshold (accept iff score >= t),
  // ascending, ending at +inf (reject everything).
  const int64_t n = static_cast<int64_t>(trials.size());
  double prev_miss = 0, prev_fa = 0;
  bool have_prev = false;
  int64_t tar_below = 0, non_below = 0;
  int64_t i = 0;
  while (i <= n) {
    // threshold between trials[i-1] and trials[i] (or +inf at i == n)
    const double miss = static_cast<double>(tar_below) / n_tar;
    const double fa = static_cast<double>(n_non - non_below) / n_non;
    const double diff = miss - fa;
    if (diff == 0) return 100.0 * miss;
    if (diff > 0) {
      // crossing between the previous point and this one
      ULID_CHECK(have_prev) << "EER sweep started above the crossing";
      const double denom = (miss - prev_miss) - (fa - prev_fa);
      const double t = (prev_fa - prev_miss) / denom;
      return 100.0 * (prev_miss + t * (miss - prev_miss));
    }
    prev_miss = miss;
    prev_fa = fa;
    have_prev = true;
    if (i == n) break;
    // advance past one run of equal scores
    const double s = trials[i].first;
    while (i < n && trials[i].first == s) {
      (trials[i].second ? tar_below : non_below) += 1;
      ++i;
    }
  }
  ULID_ERR << "EER sweep found no crossing";  // unreachable: ends at miss=1
}

namespace {

double cavg_from_decisions(const TrialScoreSet& set,
                           const std::vector<double>& thresholds) {
  const int64_t k = static_cast<int64_t>(set.languages.size());
  std::vector<int64_t> n_true(k, 0), miss(k, 0);
  std::vector<std::vector<int64_t>> fa(k, std::vector<int64_t>(k, 0));
  for (const auto& e : set.entries) {
    ++n_true[e.true_label];
    for (int64_t t = 0; t < k; ++t) {
      const bool accept = e.scores[t] >= thresholds[t];
      if (t == e.true_label) {
        if (!accept) ++miss[t];
      } else if (accept) {
        ++fa[t][e.true_label];
      }
    }
  }
  std::string missing;
  for (int64_t t = 0; t < k; ++t) {
    if (n_true[t] == 0) {
      missing += missing.empty() ? set.languages[t] : ", " + set.languages[t];
    }
  }
  if (!missing.empty()) {
    ULID_ERR << "languages missing among true labels: " << missing;
  }
  double total = 0;
  for (int64_t t = 0; t < k; ++t) {
    const double p_miss = static_cast<double>(miss[t]) / n_true[t];
    double fa_sum = 0;
    for (int64_t n = 0; n < k; ++n) {
      if (n == t) continue;
      fa_sum += static_cast<double>(fa[t][n]) / n_true[n];
    }
    total += 0.5 * p_miss + 0.5 / static_cast<double>(k - 1) * fa_sum;
  }
  return 100.0 * total / static_cast<double>(k);
}

}  // namespace

double cavg_percent(const TrialScoreSet& set, double threshold) {
  set.validate();
  return cavg_from_decisions(
      set, std::vector<double>(set.languages.size(), threshold));
}

double min_cavg_percent(const TrialScoreSet& set) {
  set.validate();
  const int64_t k = static_cast<int64_t>(set.languages.size());
  std::vector<int64_t> n_true(k, 0);
  for (const auto& e : set.entries) ++n_true[e.true_label];
  for (int64_t t = 0; t < k; ++t) {
    if (n_true[t] == 0) {
      ULID_ERR << "languages missing among true labels: " << set.languages[t];
    }
  }
  // The cost decomposes per detector, so each threshold optimizes alone.
  double total = 0;
  for (int64_t t = 0; t < k; ++t) {
    std::vector<double> cands;
    for (const auto& e : set.entries) cands.push_back(e.scores[t]);
    std::sort(cands.begin(), cands.end());
    cands.erase(std::unique(cands.begin(), cands.end()), cands.end());
    cands.push_back(std::numeric_limits<double>::infinity());
    double best = 1e300;
    for (double th : cands) {
      int64_t miss = 0;
      std::vector<int64_t> fa(k, 0);
      for (const auto& e : set.entries) {
        const bool accept = e.scores[t] >= th;
        if (e.true_label == static_cast<int>(t)) {
          if (!accept) ++miss;
        } else if (accept) {
          ++fa[e.true_label];
        }
      }
      double fa_sum = 0;
      for (int64_t n = 0; n < k; ++n) {
        if (n != t) fa_sum += static_cast<double>(fa[n]) / n_true[n];
      }
      best = std::min(best, 0.5 * static_cast<double>(miss) / n_true[t] +
                                0.5 / static_cast<double>(k - 1) * fa_sum);
    }
    total += best;
  }
  return 100.0 * total / static_cast<double>(k);
}

double accuracy_percent(const TrialScoreSet& set) {
  set.validate();
  int64_t correct = 0;
  for (const auto& e : set.entries) {
    const auto best = std::max_element(e.scores.begin(), e.scores.end());
    if (static_cast<int>(best - e.scores.begin()) == e.true_label) ++correct;
  }
  return 100.0 * static_cast<double>(correct) /
         static_cast<double>(set.entries.size());
}

std::vector<BucketReport> bucket_reports(const TrialScoreSet& set,
                                         double threshold) {
  set.validate();
  std::map<std::string, TrialScoreSet> by_bucket;
  for (const auto& e : set.entries) {
    auto& sub = by_bucket[e.bucket.empty() ? "all" : e.bucket];
    sub.languages = set.languages;
    sub.entries.push_back(e);
  }
  std::vector<std::string> order;
  for (const auto& [bucket, sub] : by_bucket) order.push_back(bucket);
  std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
    const double da = std::atof(a.c_str()), db = std::atof(b.c_str());
    if (da != db) return da < db;
    return a < b;
  });
  std::vector<BucketReport> rows;
  for (const auto& bucket : order) {
    const auto& sub = by_bucket[bucket];
    BucketReport r;
    r.bucket = bucket;
    r.n = static_cast<int64_t>(sub.entries.size());
    r.cavg = cavg_percent(sub, threshold);
    r.min_cavg = min_cavg_percent(sub);
    r.eer = eer_percent(sub);
    r.accuracy = accuracy_percent(sub);
    rows.push_back(r);
  }
  return rows;
}

std::string format_report(const std::string& system_name,
                          const std::vector<BucketReport>& rows) {
  std::ostringstream os;
  os << std::left << std::setw(16) << "System";
  for (const auto& r : rows) os << std::setw(14) << r.bucket;
  os << "\n" << std::setw(16) << system_name;
  os << std::fixed << std::setprecision(2);
  for (const auto& r : rows) {
    std::ostringstream cell;
    cell << std::fixed << std::setprecision(2) << r.cavg << "/" << r.eer;
    os << std::setw(14) << cell.str();
  }
  os << "\n";
  for (const auto& r : rows) {
    os << "# bucket " << r.bucket << ": n=" << r.n << " accuracy="
       << std::setprecision(2) << r.accuracy << "% min_cavg=" << r.min_cavg
       << "%\n";
  }
  return os.str();
}

ScoreRunResult score_run(const Model<float>& model,
                         const std::vector<ManifestEntry>& entries,
                         const FrontendConfig& frontend,
                         const std::string& cache_dir) {
  ULID_CHECK(!entries.empty()) << "test manifest is empty";
  const auto& classes = model.spec.class_names;
  std::map<std::string, int> index;
  for (size_t i = 0; i < classes.size(); ++i) {
    index[classes[i]] = static_cast<int>(i);
  }
  for (const auto& e : entries) {
    if (e.label.empty()) {
      ULID_ERR << "scoring needs labels; utterance " << e.id
               << " is unlabeled";
    }
    if (index.find(e.label) == index.end()) {
      ULID_ERR << "label '" << e.label << "' of utterance " << e.id
               << " does not match the checkpoint's " << classes.size()
               << " classes (class-table mismatch)";
    }
  }

  const int64_t n = static_cast<int64_t>(entries.size());
  std::vector<TrialScore> slots(n);
  std::vector<std::string> errors(n);
  parallel_for(n, [&](int64_t i) {
    const auto& e = entries[i];
    try {
      const FeatureSequence f = load_features(e, frontend, cache_dir);
      TrialScore t;
      t.utt_id = e.id;
      t.true_label = index.at(e.label);
      t.bucket = e.bucket.empty() ? "all" : e.bucket;
      t.scores = model.classify(f);
      slots[i] = std::move(t);
    } catch (const Error& err) {
      errors[i] = err.what();
    }
  });

  ScoreRunResult result;
  result.scores.languages = classes;
  for (int64_t i = 0; i < n; ++i) {
    if (errors[i].empty()) {
      result.scores.entries.push_back(std::move(slots[i]));
      ++result.n_scored;
    } else {
      ++result.n_failed;
      result.failures.push_back(entries[i].id + ": " + errors[i]);
      ULID_WARN << "skipping " << entries[i].id << ": " << errors[i];
    }
  }
  if (result.n_failed * 20 > n) {  // > 5%
    ULID_ERR << result.n_failed << " of " << n
             << " utterances failed to score (over the 5% budget)";
  }
  return result;
}

void write_score_file(const std::string& path, const TrialScoreSet& set) {
  set.validate();
  atomic_write(path, [&](std::ostream& os) {
    os << std::setprecision(17);
    for (const auto& e : set.entries) {
      os << e.utt_id << " " << set.languages[e.true_label] << " "
         << (e.bucket.empty() ? "all" : e.bucket);
      for (double s : e.scores) os << " " << s;
      os << "\n";
    }
  });
}

TrialScoreSet read_score_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) ULID_ERR << "cannot open score file " << path;
  TrialScoreSet set;
  std::map<std::string, int> index;
  std::string line;
  int64_t line_no = 0;
  std::vector<std::pair<std::string, TrialScore>> raw;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    TrialScore t;
    std::string label;
    if (!(ls >> t.utt_id >> label >> t.bucket)) {
      ULID_ERR << path << ":" << line_no << ": bad score line";
    }
    double s;
    while (ls >> s) t.scores.push_back(s);
    if (t.scores.size() < 2) {
      ULID_ERR << path << ":" << line_no << ": needs at least 2 scores";
    }
    if (index.find(label) == index.end()) {
      index[label] = static_cast<int>(set.languages.size());
      set.languages.push_back(label);
    }
    raw.push_back({label, std::move(t)});
  }
  for (auto& [label, t] : raw) {
    t.true_label = index[label];
    set.entries.push_back(std::move(t));
  }
  set.validate();
  return set;
}

}  // namespace ulid
