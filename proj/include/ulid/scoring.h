// include/ulid/scoring.h

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

#ifndef ULID_SCORING_H_
#define ULID_SCORING_H_

#include <string>
#include <vector>

#include "ulid/model.h"

namespace ulid {

struct TrialScore {
  std::string utt_id;
  int true_label = 0;
  std::string bucket;           // duration bucket tag, "all" when untagged
  std::vector<double> scores;   // K log-posteriors
};

struct TrialScoreSet {
  std::vector<std::string> languages;
  std::vector<TrialScore> entries;
  void validate() const;
};

// Pooled one-vs-rest detection EER in percent. Threshold sweeps every
// distinct score; when no operating point has P_miss == P_fa exactly, the
// crossing is linearly interpolated between the adjacent points.
double eer_percent(const TrialScoreSet& set);

constexpr double kDefaultDetectionLogOdds = -0.6931471805599453;  // ln(0.5)

// Closed-set average detection cost in percent with C_miss = C_fa = 1,
// P_target = 0.5: mean over target languages of
//   0.5 * P_miss(t) + (0.5 / (K-1)) * sum_{n != t} P_fa(t, n)
// with accept decided by score >= threshold (log-posterior domain).
double cavg_percent(const TrialScoreSet& set,
                    double threshold = kDefaultDetectionLogOdds);

// Same cost with the threshold optimized per target language.
double min_cavg_percent(const TrialScoreSet& set);

// Closed-set identification accuracy (argmax) in percent.
double accuracy_percent(const TrialScoreSet& set);

struct BucketReport {
  std::string bucket;
  int64_t n = 0;
  double cavg = 0, min_cavg = 0, eer = 0, accuracy = 0;
};

// Metrics per duration bucket, ordered by duration where parseable.
std::vector<BucketReport> bucket_reports(
    const TrialScoreSet& set, double threshold = kDefaultDetectionLogOdds);

// Plain-text table: one system row, one column per bucket, cells
// "Cavg/EER" in percent with two decimals; per-bucket detail lines follow
// as '#' comments.
std::string format_report(const std::string& system_name,
                          const std::vector<BucketReport>& rows);

struct ScoreRunResult {
  TrialScoreSet scores;
  int64_t n_scored = 0;
  int64_t n_failed = 0;
  std::vector<std::string> failures;  // "<id>: <reason>"
};

// Whole-utterance scoring of a labeled manifest (no cropping). Per-utterance
// failures are collected and excluded; more than 5% failures fails the run.
ScoreRunResult score_run(const Model<float>& model,
                         const std::vector<ManifestEntry>& entries,
                         const FrontendConfig& frontend,
                         const std::string& cache_dir);

// Score file: one line per utterance,
// <utt_id> <true_label> <bucket> <K space-separated log-posteriors>
void write_score_file(const std::string& path, const TrialScoreSet& set);
TrialScoreSet read_score_file(const std::string& path);

}  // namespace ulid

#endif  // ULID_SCORING_H_
