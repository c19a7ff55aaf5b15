// include/ulid/trainer.h

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

#ifndef ULID_TRAINER_H_
#define ULID_TRAINER_H_

#include <string>
#include <vector>

#include "ulid/model.h"
#include "ulid/rng.h"

namespace ulid {

struct TrainConfig {
  int64_t epochs = 90;
  double lr0 = 0.1;
  // lr is lr0 divided by the divisor of the last decay epoch reached.
  std::vector<int64_t> decay_epochs = {60, 80};
  std::vector<double> decay_divisors = {10.0, 100.0};
  int64_t batch_size = 32;
  int64_t crop_min = 200;
  int64_t crop_max = 1000;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  int64_t checkpoint_every = 10;
  uint64_t seed = 7;

  void validate(int64_t backbone_min_len) const;
};

// Piecewise-constant step decay.
double lr_schedule(const TrainConfig& cfg, int64_t epoch);

// In-memory training pool: features plus integer labels over a fixed
// class-name table (sorted unique labels of the manifest).
struct FeaturePool {
  std::vector<FeatureSequence> feats;
  std::vector<int> labels;
  std::vector<std::string> ids;
  std::vector<std::string> class_names;
};

FeaturePool load_pool(const std::string& manifest_path,
                      const FrontendConfig& frontend,
                      const std::string& cache_dir);

// One equal-length training crop: longer sequences are cropped at a uniform
// random start, shorter ones extended by cyclic repetition.
std::vector<float> crop_or_extend(const FeatureSequence& f, int64_t target_len,
                                  Rng& rng);

struct Batch {
  TensorPtrF x;  // [B, 1, 64, L]
  std::vector<int> labels;
  int64_t crop_len = 0;
};

// Draws the shared crop length L ~ uniform[crop_min, crop_max], then crops or
// extends every selected sequence to exactly L frames.
Batch make_batch(const FeaturePool& pool, const std::vector<int64_t>& indices,
                 const TrainConfig& cfg, Rng& rng);

struct EpochStats {
  int64_t epoch = 0;
  double lr = 0;
  double loss = 0;
  double acc = 0;
};

struct TrainResult {
  std::vector<EpochStats> history;
  std::string log_text;  // one "<epoch> <lr> <loss> <acc>" line per epoch
};

// SGD with momentum and weight decay over the paper recipe: per-step random
// crop batching, step-decayed lr, per-epoch logging, periodic checkpoints.
// A non-finite loss aborts with the last-good checkpoint left on disk.
// Deterministic for a fixed seed and worker count.
TrainResult train(Model<float>& model, const FeaturePool& pool,
                  const TrainConfig& cfg, const std::string& checkpoint_path,
                  const std::string& log_path, const std::string& config_hash);

}  // namespace ulid

#endif  // ULID_TRAINER_H_
