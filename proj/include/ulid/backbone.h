// include/ulid/backbone.h

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

#ifndef ULID_BACKBONE_H_
#define ULID_BACKBONE_H_

#include <string>
#include <vector>

#include "ulid/nn.h"

namespace ulid {

// One entry per stage: a plain conv (conv-norm-relu) or a residual block
// whose first conv carries the stride. Residual stages need odd kernels with
// pad (k-1)/2 so the shortcut and main path agree.
struct ConvLayerSpec {
  int64_t channels = 0;
  int64_t kh = 3, kw = 3;
  int64_t sh = 1, sw = 1;
  int64_t ph = 1, pw = 1;
  bool residual = false;
};

struct ConvStackSpec {
  std::vector<ConvLayerSpec> layers;

  int64_t final_dim() const;
  void validate() const;

  // Composed stride arithmetic along the time (W) and frequency (H) axes.
  int64_t output_len(int64_t len) const;
  int64_t freq_extent(int64_t freq) const;
  int64_t time_jump() const;  // product of time strides; minimum input length

  // Compact text form, e.g. "c16 k3x3 s1x1 p1x1; c16 k3x3 s2x2 p1x1 res".
  std::string to_string() const;
  static ConvStackSpec parse(const std::string& text);

  // conv 3x3/16 stride 1, then residual stages 16/32/64/128, each opening
  // with stride 2 on both axes; D_in = 128.
  static ConvStackSpec desk_default();
  // The five-layer K=(3,3) S=2 stack of the receptive-field example table.
  static ConvStackSpec toy_example();
};

struct RfRow {
  std::string name;
  int64_t k = 0, s = 0;          // time axis kernel/stride of this conv
  int64_t rf_h = 0, rf_w = 0;    // receptive field per axis
  int64_t jump_h = 0, jump_w = 0;
  int64_t out_h = 0, out_w = 0;  // extents for the given input size
};

// Per-conv receptive-field table: rf_i = rf_{i-1} + (k_i - 1) * jump_{i-1},
// jump_i = jump_{i-1} * s_i, per axis. Residual stages expand to their two
// main-path convs.
std::vector<RfRow> receptive_field(const ConvStackSpec& spec, int64_t freq,
                                   int64_t len);

// Residual CNN over [B, 1, 64, L] inputs; emits time-ordered [B, D_in, L']
// after striding away frequency and mean-pooling the remaining bins.
template <typename T>
struct Backbone {
  ConvStackSpec spec;

  struct Stage {
    bool residual = false;
    Conv2dLayer<T> conv;
    BatchNormLayer<T> bn;
    ResidualBlock<T> block;
  };
  std::vector<Stage> stages;

  void init(const ConvStackSpec& s, Rng& rng);
  TensorPtrT<T> forward(TapeT<T>* tape, const TensorPtrT<T>& x,
                        bool training) const;
  int64_t d_in() const { return spec.final_dim(); }
  int64_t min_len() const { return spec.time_jump(); }
  void collect(const std::string& prefix, TensorEntries<T>* out);
};

}  // namespace ulid

#endif  // ULID_BACKBONE_H_
