// include/ulid/model.h

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

#ifndef ULID_MODEL_H_
#define ULID_MODEL_H_

#include <string>
#include <vector>

#include "ulid/backbone.h"
#include "ulid/encoders.h"
#include "ulid/frontend.h"

namespace ulid {

struct ModelSpec {
  ConvStackSpec conv;
  EncoderSpec encoder;
  std::vector<std::string> class_names;
  uint64_t seed = 7;

  int64_t n_classes() const { return static_cast<int64_t>(class_names.size()); }
  void validate() const;
  std::string to_json() const;
  static ModelSpec from_json(const std::string& text);
};

// backbone -> encoder -> single fully-connected layer -> softmax.
template <typename T>
struct Model {
  ModelSpec spec;
  Backbone<T> backbone;
  Encoder<T> encoder;
  LinearLayer<T> fc;

  void init(const ModelSpec& s);

  // x is [B, 1, 64, L]; returns [B, K] logits.
  TensorPtrT<T> forward_logits(TapeT<T>* tape, const TensorPtrT<T>& x,
                               bool training) const;

  // Whole-utterance inference (eval-mode normalization, no tape):
  // log-posteriors over the K classes. Errors when the sequence is shorter
  // than the backbone minimum.
  std::vector<double> classify(const FeatureSequence& f) const;

  TensorEntries<T> tensors();
};

struct CheckpointMeta {
  int64_t epoch = 0;
  std::string config_hash;
};

// Checkpoint layout: one JSON header line {"format":"ulid-checkpoint",
// "version":1,"epoch":...,"config_hash":...,"model_spec":{...}}, then
// u32 record count and per tensor: u32 name length, name bytes, u32 rank,
// u32 dims[rank], then little-endian 32-bit floats. Everything after the
// header line is little-endian binary.
void save_checkpoint(Model<float>& model, const std::string& path,
                     const CheckpointMeta& meta);
Model<float> load_checkpoint(const std::string& path,
                             CheckpointMeta* meta = nullptr);

// Builds the [B, 1, 64, L] network input from equal-length feature crops.
TensorPtrF batch_input(const std::vector<const FeatureSequence*>& feats);

}  // namespace ulid

#endif  // ULID_MODEL_H_
