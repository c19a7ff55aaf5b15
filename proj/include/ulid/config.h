// include/ulid/config.h

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

#ifndef ULID_CONFIG_H_
#define ULID_CONFIG_H_

#include <string>

#include "ulid/frontend.h"
#include "ulid/synth.h"
#include "ulid/trainer.h"

namespace ulid {

// Plain-text run configuration: one `section.key = value` pair per line,
// '#' comments. Unknown keys are rejected; every key has a documented
// default. The normalized form (all keys, sorted) is hashed into
// checkpoints.
struct RunConfig {
  uint64_t seed = 7;
  int workers = 0;  // 0 = hardware concurrency

  FrontendConfig frontend;
  std::string conv_spec;  // parseable ConvStackSpec text
  std::string encoder_kind = "tap";
  int64_t encoder_components = 64;
  int64_t encoder_layers = 2;
  std::string encoder_lde_norm = "length";  // length | mass
  TrainConfig train;
  SynthConfig synth;

  std::string train_manifest, test_manifest, features_dir, checkpoint_path,
      log_path, scores_path, out_dir;

  RunConfig();

  // Applies one key; errors on unknown keys or unparseable values.
  void set(const std::string& key, const std::string& value);
  static RunConfig load(const std::string& path);

  std::string normalized() const;
  std::string hash() const;

  ConvStackSpec conv() const;
  EncoderSpec encoder() const;
};

}  // namespace ulid

#endif  // ULID_CONFIG_H_
